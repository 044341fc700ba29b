//! Technology classification by magic bytes, media type, URL suffix and
//! body prefix, in that order of precedence.

use crate::blockmodel::{parse_html, DomTree, NodeId};

use super::{PageRecord, PageTechnology};

/// Flash container signatures found at offset 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlashSignature {
    /// `FWS`: uncompressed.
    Uncompressed,
    /// `CWS`: zlib-compressed body (SWF 6+).
    Zlib,
    /// `ZWS`: LZMA-compressed body (SWF 13+).
    Lzma,
}

/// Visible text outside Flash objects below which the object dominates.
const FLASH_DOMINANCE_TOKENS: usize = 50;

const FLASH_MEDIA_TYPE: &str = "application/x-shockwave-flash";
const FLASH_CLASSID: &str = "d27cdb6e-ae6d-11cf-96b8-444553540000";

/// Reads the three-byte signature and the version byte that follows it.
pub fn flash_signature(body: &[u8]) -> Option<FlashSignature> {
    if body.len() < 4 {
        return None;
    }
    match &body[..3] {
        b"FWS" => Some(FlashSignature::Uncompressed),
        b"CWS" => Some(FlashSignature::Zlib),
        b"ZWS" => Some(FlashSignature::Lzma),
        _ => None,
    }
}

pub fn classify_technology(page: &PageRecord) -> PageTechnology {
    classify_parts(page.url.as_str(), &page.content_type, &page.body)
}

/// Classifies from the raw parts of a page. Pure: equal inputs give equal
/// outputs.
pub fn classify_parts(url: &str, content_type: &str, body: &[u8]) -> PageTechnology {
    if flash_signature(body).is_some() {
        return PageTechnology::Flash;
    }
    let by_evidence = by_media_type(content_type)
        .or_else(|| by_url_suffix(url))
        .or_else(|| by_body_prefix(body));
    match by_evidence {
        Some(PageTechnology::Html) if flash_dominates(body) => PageTechnology::Flash,
        Some(t) => t,
        None => PageTechnology::Unknown,
    }
}

fn by_media_type(content_type: &str) -> Option<PageTechnology> {
    let essence = content_type
        .split(';')
        .next()
        .unwrap_or("")
        .trim()
        .to_ascii_lowercase();
    match essence.as_str() {
        "" => None,
        FLASH_MEDIA_TYPE => Some(PageTechnology::Flash),
        "text/html" | "application/xhtml+xml" => Some(PageTechnology::Html),
        "text/xml" | "application/xml" => Some(PageTechnology::Xml),
        e if e.ends_with("+xml") => Some(PageTechnology::Xml),
        _ => None,
    }
}

fn by_url_suffix(url: &str) -> Option<PageTechnology> {
    let path = url
        .split(['?', '#'])
        .next()
        .unwrap_or("")
        .to_ascii_lowercase();
    if path.ends_with(".swf") {
        Some(PageTechnology::Flash)
    } else if path.ends_with(".xml") {
        Some(PageTechnology::Xml)
    } else if path.ends_with(".html") || path.ends_with(".htm") {
        Some(PageTechnology::Html)
    } else {
        None
    }
}

fn by_body_prefix(body: &[u8]) -> Option<PageTechnology> {
    let body = body.strip_prefix(b"\xef\xbb\xbf").unwrap_or(body);
    let start = body.iter().position(|b| !b.is_ascii_whitespace())?;
    let head = &body[start..body.len().min(start + 1024)];
    let lower: Vec<u8> = head.iter().map(u8::to_ascii_lowercase).collect();
    let has = |needle: &[u8]| lower.windows(needle.len()).any(|w| w == needle);

    if lower.starts_with(b"<?xml") {
        if has(b"<!doctype html") || has(b"<html") {
            return Some(PageTechnology::Html);
        }
        return Some(PageTechnology::Xml);
    }
    if lower.starts_with(b"<!doctype html") || lower.starts_with(b"<html") {
        return Some(PageTechnology::Html);
    }
    if has(b"<html") || has(b"<body") || has(b"<head") {
        return Some(PageTechnology::Html);
    }
    None
}

/// An HTML page is Flash when it references a Flash object and fewer than
/// 50 visible tokens lie outside that object.
fn flash_dominates(body: &[u8]) -> bool {
    let Ok(dom) = parse_html(body, None) else {
        return false;
    };
    let flash_roots: Vec<NodeId> = dom
        .ids()
        .filter(|&id| references_flash(&dom, id))
        .collect();
    if flash_roots.is_empty() {
        return false;
    }
    let scope = dom.find_element("body").unwrap_or(dom.root());
    let outside_tokens: usize = dom
        .visible_text_nodes(scope)
        .into_iter()
        .filter(|n| {
            !flash_roots
                .iter()
                .any(|&f| dom.ancestors(*n).any(|a| a == f))
        })
        .map(|n| dom.node(n).text().unwrap_or("").split_whitespace().count())
        .sum();
    outside_tokens < FLASH_DOMINANCE_TOKENS
}

fn references_flash(dom: &DomTree, id: NodeId) -> bool {
    let node = dom.node(id);
    let is_swf = |v: Option<&str>| {
        v.map(|s| {
            let path = s.split(['?', '#']).next().unwrap_or("").to_ascii_lowercase();
            path.ends_with(".swf")
        })
        .unwrap_or(false)
    };
    let is_flash_type = |v: Option<&str>| {
        v.map(|s| s.trim().eq_ignore_ascii_case(FLASH_MEDIA_TYPE))
            .unwrap_or(false)
    };
    match node.tag() {
        Some("embed") => is_swf(node.attr("src")) || is_flash_type(node.attr("type")),
        Some("object") => {
            is_swf(node.attr("data"))
                || is_flash_type(node.attr("type"))
                || node
                    .attr("classid")
                    .map(|c| c.to_ascii_lowercase().contains(FLASH_CLASSID))
                    .unwrap_or(false)
                || dom.children(id).iter().any(|&c| {
                    let p = dom.node(c);
                    p.is_element("param")
                        && matches!(
                            p.attr("name").map(str::to_ascii_lowercase).as_deref(),
                            Some("movie") | Some("src")
                        )
                        && is_swf(p.attr("value"))
                })
        }
        Some("script") => {
            let text = dom.text_content(id);
            text.contains("embedSWF(") || text.contains("new SWFObject(")
        }
        _ => false,
    }
}
