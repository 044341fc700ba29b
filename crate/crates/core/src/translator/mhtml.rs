//! MIME `multipart/related` archives as saved by browsers (`.mhtml`).
//!
//! Both CRLF and bare LF line endings are accepted, header lines may be
//! folded, and parts are decoded according to their
//! `Content-Transfer-Encoding`.

use std::fmt;

use base64::engine::general_purpose::{GeneralPurpose, GeneralPurposeConfig};
use base64::engine::DecodePaddingMode;
use base64::Engine;

const BASE64: GeneralPurpose = GeneralPurpose::new(
    &base64::alphabet::STANDARD,
    GeneralPurposeConfig::new().with_decode_padding_mode(DecodePaddingMode::Indifferent),
);

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MhtmlError {
    #[error("archive has no multipart boundary")]
    MissingBoundary,
    #[error("malformed headers in part {0}")]
    MalformedHeaders(usize),
    #[error("part {index} cannot be decoded: {reason}")]
    UndecodablePart { index: usize, reason: String },
    #[error("archive contains no parts")]
    NoParts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferEncoding {
    Base64,
    QuotedPrintable,
    SevenBit,
    EightBit,
    Binary,
}

impl TransferEncoding {
    fn parse(value: &str) -> Option<Self> {
        match value.trim().to_ascii_lowercase().as_str() {
            "base64" => Some(TransferEncoding::Base64),
            "quoted-printable" => Some(TransferEncoding::QuotedPrintable),
            "7bit" | "" => Some(TransferEncoding::SevenBit),
            "8bit" => Some(TransferEncoding::EightBit),
            "binary" => Some(TransferEncoding::Binary),
            _ => None,
        }
    }
}

impl fmt::Display for TransferEncoding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TransferEncoding::Base64 => "base64",
            TransferEncoding::QuotedPrintable => "quoted-printable",
            TransferEncoding::SevenBit => "7bit",
            TransferEncoding::EightBit => "8bit",
            TransferEncoding::Binary => "binary",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MimePart {
    /// Media type without parameters, lowercase.
    pub content_type: String,
    pub content_location: Option<String>,
    pub content_id: Option<String>,
    pub transfer_encoding: TransferEncoding,
    pub headers: Vec<(String, String)>,
    /// Decoded body, or the raw body when `decode_error` is set.
    pub body: Vec<u8>,
    pub decode_error: Option<String>,
}

impl MimePart {
    pub fn header(&self, name: &str) -> Option<&str> {
        header(&self.headers, name)
    }

    pub fn is_image(&self) -> bool {
        self.content_type.starts_with("image/")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MhtmlArchive {
    pub parts: Vec<MimePart>,
    pub boundary: String,
    pub root_content_location: Option<String>,
}

impl MhtmlArchive {
    /// The part the archive's root refers to, or the first part.
    pub fn root_part(&self) -> Option<&MimePart> {
        self.root_content_location
            .as_deref()
            .and_then(|loc| {
                self.parts
                    .iter()
                    .find(|p| p.content_location.as_deref() == Some(loc))
            })
            .or_else(|| self.parts.first())
    }

    /// Serializes the archive, base64-encoding binary parts and
    /// quoted-printable-encoding text parts as their `transfer_encoding`
    /// says.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"MIME-Version: 1.0\r\n");
        out.extend_from_slice(
            format!(
                "Content-Type: multipart/related; type=\"text/html\"; boundary=\"{}\"\r\n\r\n",
                self.boundary
            )
            .as_bytes(),
        );
        for part in &self.parts {
            out.extend_from_slice(format!("--{}\r\n", self.boundary).as_bytes());
            out.extend_from_slice(format!("Content-Type: {}\r\n", part.content_type).as_bytes());
            out.extend_from_slice(
                format!("Content-Transfer-Encoding: {}\r\n", part.transfer_encoding).as_bytes(),
            );
            if let Some(loc) = &part.content_location {
                out.extend_from_slice(format!("Content-Location: {loc}\r\n").as_bytes());
            }
            out.extend_from_slice(b"\r\n");
            match part.transfer_encoding {
                TransferEncoding::Base64 => {
                    let encoded = BASE64.encode(&part.body);
                    for chunk in encoded.as_bytes().chunks(76) {
                        out.extend_from_slice(chunk);
                        out.extend_from_slice(b"\r\n");
                    }
                }
                TransferEncoding::QuotedPrintable => {
                    out.extend_from_slice(&encode_quoted_printable(&part.body));
                    out.extend_from_slice(b"\r\n");
                }
                _ => {
                    out.extend_from_slice(&part.body);
                    out.extend_from_slice(b"\r\n");
                }
            }
        }
        out.extend_from_slice(format!("--{}--\r\n", self.boundary).as_bytes());
        out
    }
}

fn header<'h>(headers: &'h [(String, String)], name: &str) -> Option<&'h str> {
    headers
        .iter()
        .find(|(k, _)| k.eq_ignore_ascii_case(name))
        .map(|(_, v)| v.as_str())
}

/// Splits `bytes` into lines, each without its terminator, together with
/// the offset just past the terminator.
fn lines(bytes: &[u8]) -> impl Iterator<Item = (&[u8], usize, usize)> {
    let mut pos = 0;
    std::iter::from_fn(move || {
        if pos >= bytes.len() {
            return None;
        }
        let start = pos;
        let (end, next) = match bytes[start..].iter().position(|&b| b == b'\n') {
            Some(i) => {
                let nl = start + i;
                let end = if nl > start && bytes[nl - 1] == b'\r' { nl - 1 } else { nl };
                (end, nl + 1)
            }
            None => (bytes.len(), bytes.len()),
        };
        pos = next;
        Some((&bytes[start..end], start, next))
    })
}

/// Parses a header block. Returns the headers and the offset of the body.
fn parse_headers(bytes: &[u8]) -> Result<(Vec<(String, String)>, usize), ()> {
    let mut headers: Vec<(String, String)> = Vec::new();
    for (line, _, next) in lines(bytes) {
        if line.is_empty() {
            return Ok((headers, next));
        }
        let text = String::from_utf8_lossy(line);
        if line[0] == b' ' || line[0] == b'\t' {
            match headers.last_mut() {
                Some((_, v)) => {
                    if !v.is_empty() {
                        v.push(' ');
                    }
                    v.push_str(text.trim());
                }
                None => return Err(()),
            }
            continue;
        }
        match text.split_once(':') {
            Some((name, value)) if !name.trim().is_empty() && !name.contains(' ') => {
                headers.push((name.trim().to_string(), value.trim().to_string()));
            }
            _ => return Err(()),
        }
    }
    // headers without a body
    Ok((headers, bytes.len()))
}

/// Extracts a parameter such as `boundary` from a structured header value.
fn header_param(value: &str, name: &str) -> Option<String> {
    let mut rest = value;
    while let Some(semi) = rest.find(';') {
        rest = &rest[semi + 1..];
        let param = rest.trim_start();
        let Some((key, val)) = param.split_once('=') else {
            continue;
        };
        if !key.trim().eq_ignore_ascii_case(name) {
            continue;
        }
        let val = val.trim_start();
        if let Some(quoted) = val.strip_prefix('"') {
            return quoted.find('"').map(|end| quoted[..end].to_string());
        }
        let end = val.find(';').unwrap_or(val.len());
        return Some(val[..end].trim().to_string());
    }
    None
}

fn media_type(value: &str) -> String {
    value
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase()
}

/// Parses an archive, failing on the first part that cannot be decoded.
pub fn parse_mhtml(bytes: &[u8]) -> Result<MhtmlArchive, MhtmlError> {
    let archive = parse_mhtml_lenient(bytes)?;
    if let Some((index, part)) = archive
        .parts
        .iter()
        .enumerate()
        .find(|(_, p)| p.decode_error.is_some())
    {
        return Err(MhtmlError::UndecodablePart {
            index,
            reason: part.decode_error.clone().unwrap_or_default(),
        });
    }
    Ok(archive)
}

/// Parses an archive, keeping the raw body and an error note for parts that
/// cannot be decoded.
pub fn parse_mhtml_lenient(bytes: &[u8]) -> Result<MhtmlArchive, MhtmlError> {
    let (headers, body_start) = parse_headers(bytes).map_err(|_| MhtmlError::MissingBoundary)?;
    let content_type = header(&headers, "Content-Type").ok_or(MhtmlError::MissingBoundary)?;
    let boundary = header_param(content_type, "boundary")
        .filter(|b| !b.is_empty())
        .ok_or(MhtmlError::MissingBoundary)?;
    let start_param = header_param(content_type, "start");

    let body = &bytes[body_start..];
    let delimiter = format!("--{boundary}");
    let close = format!("--{boundary}--");

    // (content start, content end) of every part
    let mut spans: Vec<(usize, usize)> = Vec::new();
    let mut open: Option<usize> = None;
    for (line, start, next) in lines(body) {
        let trimmed = trim_end_ws(line);
        let is_close = trimmed == close.as_bytes();
        if trimmed == delimiter.as_bytes() || is_close {
            if let Some(content_start) = open.take() {
                // the line break before the delimiter belongs to it
                let mut end = start;
                if end > content_start && body[end - 1] == b'\n' {
                    end -= 1;
                    if end > content_start && body[end - 1] == b'\r' {
                        end -= 1;
                    }
                }
                spans.push((content_start, end.max(content_start)));
            }
            if is_close {
                break;
            }
            open = Some(next);
        }
    }
    if let Some(content_start) = open {
        // unterminated final part
        spans.push((content_start, body.len()));
    }
    if spans.is_empty() {
        return Err(MhtmlError::NoParts);
    }

    let mut parts = Vec::with_capacity(spans.len());
    for (index, (s, e)) in spans.into_iter().enumerate() {
        let raw = &body[s..e];
        let (part_headers, offset) =
            parse_headers(raw).map_err(|_| MhtmlError::MalformedHeaders(index))?;
        let raw_body = &raw[offset.min(raw.len())..];
        let cte = header(&part_headers, "Content-Transfer-Encoding").unwrap_or("7bit");
        let (transfer_encoding, decoded) = match TransferEncoding::parse(cte) {
            Some(enc) => (enc, decode_body(enc, raw_body)),
            None => (
                TransferEncoding::Binary,
                Err(format!("unknown transfer encoding {cte:?}")),
            ),
        };
        let (body, decode_error) = match decoded {
            Ok(b) => (b, None),
            Err(reason) => (raw_body.to_vec(), Some(reason)),
        };
        parts.push(MimePart {
            content_type: header(&part_headers, "Content-Type")
                .map(media_type)
                .unwrap_or_else(|| "text/plain".to_string()),
            content_location: header(&part_headers, "Content-Location").map(str::to_string),
            content_id: header(&part_headers, "Content-ID")
                .map(|v| v.trim_matches(|c| c == '<' || c == '>').to_string()),
            transfer_encoding,
            headers: part_headers,
            body,
            decode_error,
        });
    }

    let root_content_location = start_param
        .and_then(|start| {
            let id = start.trim_matches(|c| c == '<' || c == '>').to_string();
            parts
                .iter()
                .find(|p| p.content_id.as_deref() == Some(id.as_str()))
                .and_then(|p| p.content_location.clone())
        })
        .or_else(|| header(&headers, "Snapshot-Content-Location").map(str::to_string))
        .or_else(|| parts.first().and_then(|p| p.content_location.clone()));

    Ok(MhtmlArchive {
        parts,
        boundary,
        root_content_location,
    })
}

fn trim_end_ws(line: &[u8]) -> &[u8] {
    let end = line
        .iter()
        .rposition(|b| !matches!(b, b' ' | b'\t'))
        .map(|i| i + 1)
        .unwrap_or(0);
    &line[..end]
}

fn decode_body(enc: TransferEncoding, raw: &[u8]) -> Result<Vec<u8>, String> {
    match enc {
        TransferEncoding::Base64 => {
            let compact: Vec<u8> = raw
                .iter()
                .copied()
                .filter(|b| !b.is_ascii_whitespace())
                .collect();
            BASE64.decode(compact).map_err(|e| e.to_string())
        }
        TransferEncoding::QuotedPrintable => decode_quoted_printable(raw),
        TransferEncoding::SevenBit | TransferEncoding::EightBit | TransferEncoding::Binary => {
            Ok(raw.to_vec())
        }
    }
}

fn hex_value(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'A'..=b'F' => Some(b - b'A' + 10),
        b'a'..=b'f' => Some(b - b'a' + 10),
        _ => None,
    }
}

/// Decodes quoted-printable: `=XX` escapes, `=` soft line breaks, and
/// trailing whitespace before hard line breaks removed.
pub fn decode_quoted_printable(raw: &[u8]) -> Result<Vec<u8>, String> {
    let mut out = Vec::with_capacity(raw.len());
    let mut pos = 0;
    while pos < raw.len() {
        let nl = raw[pos..].iter().position(|&b| b == b'\n').map(|i| pos + i);
        let (line_end, next, ending): (usize, usize, &[u8]) = match nl {
            Some(n) if n > pos && raw[n - 1] == b'\r' => (n - 1, n + 1, b"\r\n"),
            Some(n) => (n, n + 1, b"\n"),
            None => (raw.len(), raw.len(), b""),
        };
        let line = trim_end_ws(&raw[pos..line_end]);
        let mut i = 0;
        let mut soft = false;
        while i < line.len() {
            let b = line[i];
            if b != b'=' {
                out.push(b);
                i += 1;
                continue;
            }
            if i + 1 == line.len() {
                soft = true;
                break;
            }
            match (line.get(i + 1).copied().and_then(hex_value), line.get(i + 2).copied().and_then(hex_value)) {
                (Some(h), Some(l)) => {
                    out.push(h << 4 | l);
                    i += 3;
                }
                _ => {
                    return Err(format!(
                        "invalid escape at byte {}",
                        pos + i
                    ))
                }
            }
        }
        if !soft {
            out.extend_from_slice(ending);
        }
        pos = next;
    }
    Ok(out)
}

/// Encodes bytes as quoted-printable, with soft breaks keeping lines at
/// most 76 characters.
pub fn encode_quoted_printable(data: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * 3 / 2);
    let mut line_len = 0;
    let mut i = 0;
    while i < data.len() {
        let b = data[i];
        // hard line breaks keep their original form so decoding is exact
        if b == b'\r' && data.get(i + 1) == Some(&b'\n') {
            out.extend_from_slice(b"\r\n");
            line_len = 0;
            i += 2;
            continue;
        }
        if b == b'\n' {
            out.push(b'\n');
            line_len = 0;
            i += 1;
            continue;
        }
        let next_is_break = matches!(data.get(i + 1), None | Some(b'\r') | Some(b'\n'));
        let literal = (b == b' ' || b == b'\t') && !next_is_break
            || (33..=126).contains(&b) && b != b'=';
        let piece: Vec<u8> = if literal {
            vec![b]
        } else {
            format!("={b:02X}").into_bytes()
        };
        if line_len + piece.len() > 75 {
            out.extend_from_slice(b"=\r\n");
            line_len = 0;
        }
        line_len += piece.len();
        out.extend_from_slice(&piece);
        i += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoted_printable_identity_cases() {
        assert_eq!(decode_quoted_printable(b"a=3Db").unwrap(), b"a=b");
        assert_eq!(decode_quoted_printable(b"soft=\r\nbreak").unwrap(), b"softbreak");
        assert_eq!(decode_quoted_printable(b"soft=\nbreak").unwrap(), b"softbreak");
        assert_eq!(decode_quoted_printable(b"trail   \r\nx").unwrap(), b"trail\r\nx");
        assert_eq!(decode_quoted_printable(b"caf=C3=A9").unwrap(), "café".as_bytes());
        assert!(decode_quoted_printable(b"bad=ZZ").is_err());
    }

    #[test]
    fn boundary_param_forms() {
        assert_eq!(
            header_param("multipart/related; boundary=\"----abc\"; type=text/html", "boundary"),
            Some("----abc".to_string())
        );
        assert_eq!(
            header_param("multipart/related;\ttype=\"text/html\";boundary=xyz", "boundary"),
            Some("xyz".to_string())
        );
        assert_eq!(header_param("multipart/related", "boundary"), None);
    }

    #[test]
    fn folded_headers_and_lf_only() {
        let src = b"MIME-Version: 1.0\nContent-Type: multipart/related;\n\tboundary=\"B\"\n\n--B\nContent-Type: text/html\nContent-Location: http://x/\n\n<p>x</p>\n--B--\n";
        let a = parse_mhtml(src).unwrap();
        assert_eq!(a.boundary, "B");
        assert_eq!(a.parts.len(), 1);
        assert_eq!(a.parts[0].body, b"<p>x</p>");
        assert_eq!(a.root_content_location.as_deref(), Some("http://x/"));
    }

    #[test]
    fn missing_boundary() {
        assert_eq!(
            parse_mhtml(b"Content-Type: multipart/related\r\n\r\nbody"),
            Err(MhtmlError::MissingBoundary)
        );
        assert_eq!(parse_mhtml(b"no headers at all"), Err(MhtmlError::MissingBoundary));
    }

    #[test]
    fn malformed_part_headers() {
        let src = b"Content-Type: multipart/related; boundary=B\r\n\r\n--B\r\nContent-Type: text/html\r\n\r\nok\r\n--B\r\nthis is not a header\r\n\r\nx\r\n--B--\r\n";
        assert_eq!(parse_mhtml(src), Err(MhtmlError::MalformedHeaders(1)));
    }

    #[test]
    fn undecodable_part_strict_and_lenient() {
        let src = b"Content-Type: multipart/related; boundary=B\r\n\r\n--B\r\nContent-Type: image/png\r\nContent-Transfer-Encoding: base64\r\n\r\n@@not base64@@\r\n--B--\r\n";
        assert!(matches!(
            parse_mhtml(src),
            Err(MhtmlError::UndecodablePart { index: 0, .. })
        ));
        let lenient = parse_mhtml_lenient(src).unwrap();
        assert!(lenient.parts[0].decode_error.is_some());
        assert_eq!(lenient.parts[0].body, b"@@not base64@@");
    }
}
