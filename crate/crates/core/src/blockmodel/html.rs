//! Error-tolerant HTML front end.
//!
//! The tokenizer and tree builder implement the subset of the HTML parsing
//! rules that matters for structural segmentation: implied end tags for
//! paragraphs, list items, table rows and cells, raw-text handling for
//! script and style, and recovery from stray or missing end tags. No
//! `html`/`body` elements are synthesized.

use encoding_rs::{Encoding, UTF_8, WINDOWS_1252};

use super::dom::{DomTree, NodeId, TreeBuilder, RAW_TEXT_TAGS, VOID_TAGS};
use super::ParseError;

/// Start tags that close an open `p`.
const CLOSES_P: &[&str] = &[
    "address", "article", "aside", "blockquote", "center", "details", "dialog", "dir", "div", "dl",
    "fieldset", "figcaption", "figure", "footer", "form", "h1", "h2", "h3", "h4", "h5", "h6",
    "header", "hgroup", "hr", "li", "main", "menu", "nav", "ol", "p", "pre", "section", "table",
    "ul", "dd", "dt",
];

/// Elements that stop the search for an element to implicitly close.
const SCOPE_BOUNDARY: &[&str] = &[
    "#document", "html", "table", "td", "th", "caption", "button", "object", "template", "marquee",
    "applet",
];

const RCDATA_TAGS: &[&str] = &["title", "textarea"];

const HEADINGS: &[&str] = &["h1", "h2", "h3", "h4", "h5", "h6"];

/// Parses an HTML byte stream into a [`DomTree`].
///
/// Decoding honors `charset_hint`, then a `<meta charset>` declaration,
/// then a byte-order mark, then strict UTF-8, and finally Latin-1.
pub fn parse_html(body: &[u8], charset_hint: Option<&str>) -> Result<DomTree, ParseError> {
    if body.is_empty() {
        return Err(ParseError::Empty);
    }
    let text = decode(body, charset_hint)?;
    Ok(parse_str(&text))
}

/// Parses already-decoded markup.
pub fn parse_str(text: &str) -> DomTree {
    let text = text.replace("\r\n", "\n").replace('\r', "\n");
    let mut builder = Builder {
        tree: TreeBuilder::new(),
        stack: vec![NodeId(0)],
    };
    Tokenizer::new(&text).run(&mut builder);
    builder.tree.finish()
}

fn decode(body: &[u8], charset_hint: Option<&str>) -> Result<String, ParseError> {
    let declared = charset_hint
        .and_then(|h| Encoding::for_label(h.trim().as_bytes()))
        .or_else(|| sniff_meta_charset(body));

    let mut attempts: Vec<&'static Encoding> = Vec::new();
    if let Some((enc, _)) = Encoding::for_bom(body) {
        attempts.push(enc);
    }
    if let Some(enc) = declared {
        attempts.push(enc);
    }
    attempts.push(UTF_8);
    attempts.push(WINDOWS_1252);

    for enc in attempts {
        let (text, _, had_errors) = enc.decode(body);
        if had_errors {
            continue;
        }
        if let Some(pos) = text
            .chars()
            .position(|c| c.is_control() && !matches!(c, '\t' | '\n' | '\r' | '\u{c}'))
        {
            return Err(ParseError::Undecodable {
                encoding: enc.name().to_string(),
                position: pos,
            });
        }
        return Ok(text.into_owned());
    }
    Err(ParseError::Undecodable {
        encoding: WINDOWS_1252.name().to_string(),
        position: 0,
    })
}

/// Looks for `charset=` inside the first kilobyte, the way a
/// `<meta charset>` or `http-equiv` declaration spells it.
fn sniff_meta_charset(body: &[u8]) -> Option<&'static Encoding> {
    let head = &body[..body.len().min(1024)];
    let lower: Vec<u8> = head.iter().map(u8::to_ascii_lowercase).collect();
    let needle = b"charset=";
    let pos = lower.windows(needle.len()).position(|w| w == needle)?;
    let rest = &head[pos + needle.len()..];
    let rest = rest
        .iter()
        .skip_while(|b| **b == b'"' || **b == b'\'')
        .copied()
        .take_while(|b| b.is_ascii_alphanumeric() || matches!(b, b'-' | b'_' | b':' | b'.'))
        .collect::<Vec<u8>>();
    Encoding::for_label(&rest)
}

enum Token {
    Start {
        name: String,
        attributes: Vec<(String, String)>,
    },
    End(String),
    Text(String),
}

struct Builder {
    tree: TreeBuilder,
    stack: Vec<NodeId>,
}

impl Builder {
    fn current(&self) -> NodeId {
        *self.stack.last().expect("document root never popped")
    }

    fn current_tag(&self) -> &str {
        self.tree.tag(self.current()).unwrap_or("")
    }

    /// Pops up to and including the nearest open element in `targets`, unless
    /// one of `boundary` is reached first.
    fn close_in_scope(&mut self, targets: &[&str], boundary: &[&str]) {
        for i in (1..self.stack.len()).rev() {
            let tag = self.tree.tag(self.stack[i]).unwrap_or("");
            if targets.contains(&tag) {
                self.stack.truncate(i);
                return;
            }
            if boundary.contains(&tag) || SCOPE_BOUNDARY.contains(&tag) {
                return;
            }
        }
    }

    fn start(&mut self, name: String, attributes: Vec<(String, String)>) {
        let n = name.as_str();
        if CLOSES_P.contains(&n) {
            self.close_in_scope(&["p"], &[]);
        }
        match n {
            "li" => self.close_in_scope(&["li"], &["ul", "ol"]),
            "dt" | "dd" => self.close_in_scope(&["dt", "dd"], &["dl"]),
            "tr" => self.close_in_scope(&["tr"], &["tbody", "thead", "tfoot"]),
            "td" | "th" => {
                // td/th act as scope boundaries, so walk manually.
                for i in (1..self.stack.len()).rev() {
                    let tag = self.tree.tag(self.stack[i]).unwrap_or("");
                    if tag == "td" || tag == "th" {
                        self.stack.truncate(i);
                        break;
                    }
                    if matches!(tag, "tr" | "table" | "#document") {
                        break;
                    }
                }
            }
            "tbody" | "thead" | "tfoot" => {
                self.close_in_scope(&["tbody", "thead", "tfoot"], &[]);
            }
            "option" => {
                if self.current_tag() == "option" {
                    self.stack.pop();
                }
            }
            "a" => self.close_in_scope(&["a"], &[]),
            _ => {}
        }
        if HEADINGS.contains(&n) && HEADINGS.contains(&self.current_tag()) {
            self.stack.pop();
        }
        let parent = self.current();
        let void = VOID_TAGS.contains(&n);
        let id = self.tree.append_element(parent, name, attributes);
        if !void {
            self.stack.push(id);
        }
    }

    fn end(&mut self, name: &str) {
        if let Some(i) = (1..self.stack.len())
            .rev()
            .find(|&i| self.tree.tag(self.stack[i]) == Some(name))
        {
            self.stack.truncate(i);
        }
    }

    fn text(&mut self, text: &str) {
        let parent = self.current();
        self.tree.append_text(parent, text);
    }
}

struct Tokenizer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Tokenizer<'a> {
    fn new(src: &'a str) -> Self {
        Tokenizer { src, pos: 0 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn run(mut self, builder: &mut Builder) {
        while let Some(token) = self.next_token() {
            match token {
                Token::Start { name, attributes } => {
                    let raw = RAW_TEXT_TAGS.contains(&name.as_str());
                    let rcdata = RCDATA_TAGS.contains(&name.as_str());
                    let tag = name.clone();
                    builder.start(name, attributes);
                    if raw || rcdata {
                        let content = self.consume_until_end_tag(&tag);
                        if raw {
                            builder.text(content);
                        } else {
                            builder.text(&decode_entities(content));
                        }
                        builder.end(&tag);
                    }
                }
                Token::End(name) => builder.end(&name),
                Token::Text(t) => builder.text(&t),
            }
        }
    }

    fn consume_until_end_tag(&mut self, tag: &str) -> &'a str {
        let rest = self.rest();
        let lower = rest.to_ascii_lowercase();
        let needle = format!("</{}", tag);
        let mut search = 0;
        while let Some(found) = lower[search..].find(&needle) {
            let at = search + found;
            let after = lower[at + needle.len()..].chars().next();
            if matches!(after, None | Some('>') | Some('/'))
                || after.map(char::is_whitespace).unwrap_or(false)
            {
                let content = &rest[..at];
                self.pos += at;
                // skip the end tag itself
                match self.rest().find('>') {
                    Some(gt) => self.pos += gt + 1,
                    None => self.pos = self.src.len(),
                }
                return content;
            }
            search = at + needle.len();
        }
        self.pos = self.src.len();
        rest
    }

    fn next_token(&mut self) -> Option<Token> {
        loop {
            let rest = self.rest();
            if rest.is_empty() {
                return None;
            }
            let markup_at = find_markup_start(rest);
            if markup_at != Some(0) {
                let end = markup_at.unwrap_or(rest.len());
                self.pos += end;
                return Some(Token::Text(decode_entities(&rest[..end])));
            }
            if let Some(comment) = rest.strip_prefix("<!--") {
                match comment.find("-->") {
                    Some(i) => self.pos += 4 + i + 3,
                    None => self.pos = self.src.len(),
                }
                continue;
            }
            if rest.starts_with("<!") || rest.starts_with("<?") {
                match rest.find('>') {
                    Some(i) => self.pos += i + 1,
                    None => self.pos = self.src.len(),
                }
                continue;
            }
            if let Some(after) = rest.strip_prefix("</") {
                if after.starts_with(|c: char| c.is_ascii_alphabetic()) {
                    let name_len = after
                        .find(|c: char| c.is_whitespace() || c == '>' || c == '/')
                        .unwrap_or(after.len());
                    let name = after[..name_len].to_ascii_lowercase();
                    match rest.find('>') {
                        Some(i) => self.pos += i + 1,
                        None => self.pos = self.src.len(),
                    }
                    return Some(Token::End(name));
                }
                // `</` followed by junk is a bogus comment
                match rest.find('>') {
                    Some(i) => self.pos += i + 1,
                    None => self.pos = self.src.len(),
                }
                continue;
            }
            // start tag
            return Some(self.start_tag());
        }
    }

    fn start_tag(&mut self) -> Token {
        let bytes = self.src.as_bytes();
        let mut i = self.pos + 1;
        let name_start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'>' && bytes[i] != b'/'
        {
            i += 1;
        }
        let name = self.src[name_start..i].to_ascii_lowercase();
        let mut attributes: Vec<(String, String)> = Vec::new();
        loop {
            while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'/') {
                i += 1;
            }
            if i >= bytes.len() {
                break;
            }
            if bytes[i] == b'>' {
                i += 1;
                break;
            }
            let attr_start = i;
            while i < bytes.len()
                && !bytes[i].is_ascii_whitespace()
                && !matches!(bytes[i], b'>' | b'=' | b'/')
            {
                i += 1;
            }
            // a lone `=` or stray byte still has to make progress
            if i == attr_start {
                i += 1;
                continue;
            }
            let attr_name = self.src[attr_start..i].to_ascii_lowercase();
            while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                i += 1;
            }
            let mut value = String::new();
            if i < bytes.len() && bytes[i] == b'=' {
                i += 1;
                while i < bytes.len() && bytes[i].is_ascii_whitespace() {
                    i += 1;
                }
                if i < bytes.len() && (bytes[i] == b'"' || bytes[i] == b'\'') {
                    let quote = bytes[i];
                    let v_start = i + 1;
                    let v_end = self.src[v_start..]
                        .bytes()
                        .position(|b| b == quote)
                        .map(|p| v_start + p)
                        .unwrap_or(bytes.len());
                    value = decode_entities(&self.src[v_start..v_end]);
                    i = (v_end + 1).min(bytes.len());
                } else {
                    let v_start = i;
                    while i < bytes.len() && !bytes[i].is_ascii_whitespace() && bytes[i] != b'>' {
                        i += 1;
                    }
                    value = decode_entities(&self.src[v_start..i]);
                }
            }
            if !attributes.iter().any(|(k, _)| *k == attr_name) {
                attributes.push((attr_name, value));
            }
        }
        self.pos = i;
        Token::Start { name, attributes }
    }
}

/// Finds the next `<` that opens markup (tag, end tag, comment, declaration).
fn find_markup_start(s: &str) -> Option<usize> {
    let bytes = s.as_bytes();
    let mut from = 0;
    while let Some(off) = s[from..].find('<') {
        let at = from + off;
        match bytes.get(at + 1) {
            Some(b) if b.is_ascii_alphabetic() || matches!(b, b'/' | b'!' | b'?') => {
                return Some(at)
            }
            _ => from = at + 1,
        }
    }
    None
}

fn named_entity(name: &str) -> Option<char> {
    Some(match name {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        "nbsp" => '\u{a0}',
        "copy" => '©',
        "reg" => '®',
        "trade" => '™',
        "mdash" => '—',
        "ndash" => '–',
        "hellip" => '…',
        "laquo" => '«',
        "raquo" => '»',
        "lsquo" => '‘',
        "rsquo" => '’',
        "ldquo" => '“',
        "rdquo" => '”',
        "bull" => '•',
        "middot" => '·',
        "euro" => '€',
        "pound" => '£',
        "yen" => '¥',
        "cent" => '¢',
        "sect" => '§',
        "deg" => '°',
        "plusmn" => '±',
        "times" => '×',
        "divide" => '÷',
        "para" => '¶',
        _ => return None,
    })
}

/// Decodes character references. Unknown or malformed references are kept
/// verbatim.
pub fn decode_entities(s: &str) -> String {
    if !s.contains('&') {
        return s.to_string();
    }
    let mut out = String::with_capacity(s.len());
    let mut rest = s;
    while let Some(amp) = rest.find('&') {
        out.push_str(&rest[..amp]);
        let after = &rest[amp + 1..];
        let end = after
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '#'))
            .unwrap_or(after.len());
        let name = &after[..end];
        let terminated = after[end..].starts_with(';');
        let decoded = if let Some(num) = name.strip_prefix('#') {
            let code = if let Some(hex) = num.strip_prefix('x').or_else(|| num.strip_prefix('X')) {
                u32::from_str_radix(hex, 16).ok()
            } else {
                num.parse::<u32>().ok()
            };
            code.and_then(char::from_u32)
        } else if terminated {
            named_entity(name)
        } else {
            None
        };
        match decoded {
            Some(c) if !name.is_empty() => {
                out.push(c);
                rest = &after[end + usize::from(terminated)..];
            }
            _ => {
                out.push('&');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}
