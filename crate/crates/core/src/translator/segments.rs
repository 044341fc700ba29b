//! Text segment files: newline-delimited JSON, one segment per line.
//!
//! ```text
//! {"site":"isim","page":"home","order":0,"role":"heading","text":"Welcome"}
//! {"site":"isim","page":"home","order":1,"role":"link","text":"About us","link_target":"about"}
//! ```

use std::collections::HashMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentRole {
    Heading,
    Body,
    Link,
    Caption,
}

impl SegmentRole {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "heading" => Some(SegmentRole::Heading),
            "body" => Some(SegmentRole::Body),
            "link" => Some(SegmentRole::Link),
            "caption" => Some(SegmentRole::Caption),
            _ => None,
        }
    }
}

impl fmt::Display for SegmentRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SegmentRole::Heading => "heading",
            SegmentRole::Body => "body",
            SegmentRole::Link => "link",
            SegmentRole::Caption => "caption",
        })
    }
}

/// A piece of text transcribed from one tab of a Flash site.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSegment {
    pub site: String,
    pub page: String,
    pub order: u32,
    pub role: SegmentRole,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_target: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum SegmentError {
    #[error("segments: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("segments: line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("segments: line {line}: ({site}, {page}, {order}) already defined on line {first_line}")]
    DuplicateKey {
        line: usize,
        first_line: usize,
        site: String,
        page: String,
        order: u32,
    },
    #[error("segments: line {line}: empty text")]
    EmptyText { line: usize },
    #[error("segments: line {line}: unknown role {role:?}")]
    BadRole { line: usize, role: String },
}

#[derive(Deserialize)]
struct RawSegment {
    site: String,
    page: String,
    order: u32,
    role: String,
    text: String,
    #[serde(default)]
    link_target: Option<String>,
}

/// Parses segment lines, validates them and sorts by `(site, page, order)`.
pub fn parse_segments(text: &str) -> Result<Vec<TextSegment>, SegmentError> {
    let mut first_seen: HashMap<(String, String, u32), usize> = HashMap::new();
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawSegment = serde_json::from_str(line).map_err(|e| SegmentError::Malformed {
            line: line_no,
            message: e.to_string(),
        })?;
        let role = SegmentRole::parse(&raw.role).ok_or_else(|| SegmentError::BadRole {
            line: line_no,
            role: raw.role.clone(),
        })?;
        if raw.text.trim().is_empty() {
            return Err(SegmentError::EmptyText { line: line_no });
        }
        if raw.site.is_empty() || raw.page.is_empty() {
            return Err(SegmentError::Malformed {
                line: line_no,
                message: "site and page must be non-empty".to_string(),
            });
        }
        if raw.link_target.is_some() && role != SegmentRole::Link {
            return Err(SegmentError::Malformed {
                line: line_no,
                message: format!("link_target is only allowed on link segments, not {role}"),
            });
        }
        let key = (raw.site.clone(), raw.page.clone(), raw.order);
        if let Some(&first_line) = first_seen.get(&key) {
            return Err(SegmentError::DuplicateKey {
                line: line_no,
                first_line,
                site: raw.site,
                page: raw.page,
                order: raw.order,
            });
        }
        first_seen.insert(key, line_no);
        out.push(TextSegment {
            site: raw.site,
            page: raw.page,
            order: raw.order,
            role,
            text: raw.text,
            link_target: raw.link_target,
        });
    }
    out.sort_by(|a, b| (&a.site, &a.page, a.order).cmp(&(&b.site, &b.page, b.order)));
    Ok(out)
}

pub fn ingest_segments(path: &Path) -> Result<Vec<TextSegment>, SegmentError> {
    let text = std::fs::read_to_string(path).map_err(|source| SegmentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_segments(&text)
}

/// Writes segments in the line format `parse_segments` reads.
pub fn segments_to_jsonl(segments: &[TextSegment]) -> String {
    segments
        .iter()
        .map(|s| serde_json::to_string(s).expect("segment serializes") + "\n")
        .collect()
}
