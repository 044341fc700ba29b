//! Boilerplate detection from shallow text features.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blockmodel::{nearest_block, BlockTree, DomTree, VisualBlock};

/// Wrap width used for text density.
pub const LINE_WIDTH: usize = 80;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TextFeatureVector {
    pub num_tokens: usize,
    pub num_words: usize,
    /// Characters per word.
    pub avg_word_length: f64,
    /// Words per sentence.
    pub avg_sentence_length: f64,
    /// Fraction of tokens inside anchors, in `[0, 1]`.
    pub link_density: f64,
    /// Tokens per wrapped line.
    pub text_density: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BlockLabel {
    Content,
    Boilerplate,
}

/// Thresholds of the rule-based classifier. A block is boilerplate when its
/// link density exceeds `max_link_density`, when it has any links and fewer
/// than `min_words_linked` words, or when it has fewer than `min_words`
/// words.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RuleSet {
    pub max_link_density: f64,
    pub min_words: usize,
    pub min_words_linked: usize,
}

impl Default for RuleSet {
    fn default() -> Self {
        RuleSet {
            max_link_density: 0.33,
            min_words: 4,
            min_words_linked: 10,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RulesError {
    #[error("rules: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("rules: {path}: {message}")]
    Parse { path: String, message: String },
    #[error("rules: max_link_density {0} outside [0, 1]")]
    OutOfRange(f64),
}

impl RuleSet {
    /// Reads a TOML rules file. Missing keys keep their defaults.
    pub fn load(path: &Path) -> Result<Self, RulesError> {
        let text = std::fs::read_to_string(path).map_err(|source| RulesError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let rules: RuleSet = toml::from_str(&text).map_err(|e| RulesError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        if !(0.0..=1.0).contains(&rules.max_link_density) {
            return Err(RulesError::OutOfRange(rules.max_link_density));
        }
        Ok(rules)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum NoiseError {
    #[error("every block was classified as boilerplate")]
    AllNoise,
}

/// Whitespace-separated tokens.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Maximal alphanumeric runs.
pub fn words(text: &str) -> Vec<&str> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Sentences end at `.`, `!` or `?` followed by whitespace or the end of
/// the text. Fragments without words are not sentences.
pub fn sentences(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut start = 0;
    let mut chars = text.char_indices().peekable();
    while let Some((i, c)) = chars.next() {
        if matches!(c, '.' | '!' | '?') {
            let at_boundary = chars.peek().map(|(_, n)| n.is_whitespace()).unwrap_or(true);
            if at_boundary {
                let end = i + c.len_utf8();
                out.push(&text[start..end]);
                start = end;
            }
        }
    }
    out.push(&text[start..]);
    out.into_iter()
        .map(str::trim)
        .filter(|s| !words(s).is_empty())
        .collect()
}

/// Number of lines `tokens` occupy when greedily wrapped at `width`.
fn wrapped_lines(tokens: &[&str], width: usize) -> usize {
    let mut lines = 0;
    let mut current = 0;
    for t in tokens {
        let len = t.chars().count();
        if current == 0 {
            lines += 1;
            current = len;
        } else if current + 1 + len <= width {
            current += 1 + len;
        } else {
            lines += 1;
            current = len;
        }
    }
    lines
}

/// Features of a piece of text where `linked[i]` tells whether the `i`-th
/// character lies inside an anchor.
fn features_of(text: &str, linked: &[bool]) -> TextFeatureVector {
    let mut num_tokens = 0;
    let mut linked_tokens = 0;
    let mut token_chars = 0;
    let mut token_linked_chars = 0;
    for (ch, &in_link) in text.chars().zip(linked.iter().chain(std::iter::repeat(&false))) {
        if ch.is_whitespace() {
            if token_chars > 0 {
                num_tokens += 1;
                if token_linked_chars * 2 > token_chars {
                    linked_tokens += 1;
                }
            }
            token_chars = 0;
            token_linked_chars = 0;
        } else {
            token_chars += 1;
            if in_link {
                token_linked_chars += 1;
            }
        }
    }
    if token_chars > 0 {
        num_tokens += 1;
        if token_linked_chars * 2 > token_chars {
            linked_tokens += 1;
        }
    }

    let word_list = words(text);
    let num_words = word_list.len();
    let word_chars: usize = word_list.iter().map(|w| w.chars().count()).sum();
    let num_sentences = sentences(text).len();
    let lines = wrapped_lines(&tokenize(text), LINE_WIDTH);
    let ratio = |n: f64, d: usize| if d == 0 { 0.0 } else { n / d as f64 };

    TextFeatureVector {
        num_tokens,
        num_words,
        avg_word_length: ratio(word_chars as f64, num_words),
        avg_sentence_length: ratio(num_words as f64, num_sentences),
        link_density: ratio(linked_tokens as f64, num_tokens),
        text_density: ratio(num_tokens as f64, lines),
    }
}

/// Features of plain text with no link markup.
pub fn text_features(text: &str) -> TextFeatureVector {
    features_of(text, &[])
}

/// Features of the visible text a block covers.
pub fn compute_features(block: &VisualBlock, dom: &DomTree) -> TextFeatureVector {
    let mut text = String::new();
    let mut linked = Vec::new();
    let mut prev_block = None;
    for n in block.text_nodes(dom) {
        let container = nearest_block(dom, n);
        if prev_block.is_some() && prev_block != container {
            text.push(' ');
            linked.push(false);
        }
        prev_block = container;
        let in_anchor = dom.has_ancestor_tag(n, "a");
        let t = dom.node(n).text().unwrap_or("");
        text.push_str(t);
        linked.extend(std::iter::repeat_n(in_anchor, t.chars().count()));
    }
    features_of(&text, &linked)
}

pub fn classify_block(features: &TextFeatureVector, rules: &RuleSet) -> BlockLabel {
    let noisy = features.link_density > rules.max_link_density
        || (features.num_words < rules.min_words_linked && features.link_density > 0.0)
        || features.num_words < rules.min_words;
    if noisy {
        BlockLabel::Boilerplate
    } else {
        BlockLabel::Content
    }
}

/// Label of every leaf, in document order.
pub fn label_leaves<'t>(
    tree: &'t BlockTree,
    dom: &DomTree,
    rules: &RuleSet,
) -> Vec<(&'t VisualBlock, BlockLabel)> {
    tree.leaves()
        .into_iter()
        .map(|leaf| (leaf, classify_block(&compute_features(leaf, dom), rules)))
        .collect()
}

/// Removes boilerplate leaves, keeping any ancestor with a surviving
/// descendant. The input tree is left untouched.
pub fn strip_noise(
    tree: &BlockTree,
    dom: &DomTree,
    rules: &RuleSet,
) -> Result<BlockTree, NoiseError> {
    fn keep(b: &VisualBlock, dom: &DomTree, rules: &RuleSet) -> Option<VisualBlock> {
        if b.is_leaf() {
            return (classify_block(&compute_features(b, dom), rules) == BlockLabel::Content)
                .then(|| b.clone());
        }
        let children: Vec<VisualBlock> =
            b.children.iter().filter_map(|c| keep(c, dom, rules)).collect();
        if children.is_empty() {
            None
        } else {
            Some(VisualBlock {
                children,
                ..b.as_leaf()
            })
        }
    }
    keep(&tree.root, dom, rules)
        .map(BlockTree::new)
        .ok_or(NoiseError::AllNoise)
}
