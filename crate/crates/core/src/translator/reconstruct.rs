//! Rebuilds a Flash site as single-column static HTML pages.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::blockmodel::{escape_attr, escape_text, parse_html};

use super::mhtml::MhtmlArchive;
use super::segments::{SegmentRole, TextSegment};

/// Attribute marking an element that carries one text segment.
pub const SEGMENT_ATTR: &str = "data-seg";

pub const DEFAULT_PAGE_BUDGET: usize = 64 * 1024;
pub const DEFAULT_INLINE_ASSET_LIMIT: usize = 100 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TemplateId {
    SingleColumn,
}

impl FromStr for TemplateId {
    type Err = TemplateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single-column" => Ok(TemplateId::SingleColumn),
            other => Err(TemplateError::Unknown(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TemplateError {
    #[error("template: unknown template {0:?} (available: single-column)")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ReconstructError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("reconstruct: no segments to translate")]
    NoSegments,
    #[error("reconstruct: segments mix sites {0:?} and {1:?}")]
    MixedSites(String, String),
}

#[derive(Debug, Clone)]
pub struct ReconstructOptions {
    pub template: TemplateId,
    /// Maximum bytes of markup per emitted page, images excluded.
    pub page_budget: usize,
    /// Images at least this large are linked instead of copied.
    pub inline_asset_limit: usize,
}

impl Default for ReconstructOptions {
    fn default() -> Self {
        ReconstructOptions {
            template: TemplateId::SingleColumn,
            page_budget: DEFAULT_PAGE_BUDGET,
            inline_asset_limit: DEFAULT_INLINE_ASSET_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TranslatedPage {
    pub page_id: String,
    /// File name relative to the site directory.
    pub path: String,
    pub title: String,
    #[serde(skip)]
    pub html: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SiteAsset {
    /// Path relative to the site directory, under `assets/`.
    pub path: String,
    pub content_type: String,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslatedSite {
    pub site: String,
    pub pages: Vec<TranslatedPage>,
    /// Page id to relative path, for every emitted page including
    /// continuation pages.
    pub nav_index: BTreeMap<String, String>,
    pub assets: Vec<SiteAsset>,
}

impl TranslatedSite {
    /// Relative path of the landing page: the page named `index`, else the
    /// one named `home`, else the first page.
    pub fn index_path(&self) -> Option<&str> {
        ["index", "home"]
            .iter()
            .find_map(|id| self.nav_index.get(*id))
            .map(String::as_str)
            .or_else(|| self.pages.first().map(|p| p.path.as_str()))
    }
}

/// Builds the site with the named template and default options.
pub fn reconstruct_html(
    segments: &[TextSegment],
    assets: Option<&MhtmlArchive>,
    template: &str,
) -> Result<TranslatedSite, ReconstructError> {
    let options = ReconstructOptions {
        template: template.parse()?,
        ..ReconstructOptions::default()
    };
    reconstruct_with(segments, assets, &options)
}

struct PagePlan<'a> {
    id: String,
    title: String,
    segments: Vec<&'a TextSegment>,
}

fn page_file(id: &str) -> String {
    let safe: String = id
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') {
                c
            } else {
                '_'
            }
        })
        .collect();
    format!("{safe}.html")
}

/// Last path segment without its extension, lowercased.
fn location_stem(location: &str) -> Option<String> {
    let path = location.split(['?', '#']).next()?;
    let last = path.trim_end_matches('/').rsplit('/').next()?;
    let stem = last.rsplit_once('.').map(|(s, _)| s).unwrap_or(last);
    (!stem.is_empty()).then(|| stem.to_ascii_lowercase())
}

fn asset_name(location: &str, index: usize) -> String {
    let path = location.split(['?', '#']).next().unwrap_or("");
    let last = path.trim_end_matches('/').rsplit('/').next().unwrap_or("");
    let safe: String = last
        .chars()
        .filter(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        .collect();
    if safe.is_empty() {
        format!("asset-{index}")
    } else {
        format!("{index}-{safe}")
    }
}

pub fn reconstruct_with(
    segments: &[TextSegment],
    archive: Option<&MhtmlArchive>,
    options: &ReconstructOptions,
) -> Result<TranslatedSite, ReconstructError> {
    let TemplateId::SingleColumn = options.template;
    let first = segments.first().ok_or(ReconstructError::NoSegments)?;
    if let Some(other) = segments.iter().find(|s| s.site != first.site) {
        return Err(ReconstructError::MixedSites(
            first.site.clone(),
            other.site.clone(),
        ));
    }

    let mut sorted: Vec<&TextSegment> = segments.iter().collect();
    sorted.sort_by(|a, b| (&a.page, a.order).cmp(&(&b.page, b.order)));

    let mut plans: Vec<PagePlan> = Vec::new();
    for seg in sorted {
        match plans.last_mut() {
            Some(p) if p.id == seg.page => p.segments.push(seg),
            _ => plans.push(PagePlan {
                id: seg.page.clone(),
                title: String::new(),
                segments: vec![seg],
            }),
        }
    }
    for plan in &mut plans {
        plan.title = plan
            .segments
            .iter()
            .find(|s| s.role == SegmentRole::Heading)
            .map(|s| s.text.trim().to_string())
            .unwrap_or_else(|| plan.id.clone());
    }
    let page_ids: HashSet<&str> = plans.iter().map(|p| p.id.as_str()).collect();

    // images belong to the page whose id matches their file stem
    let mut assets = Vec::new();
    let mut page_images: BTreeMap<String, Vec<String>> = BTreeMap::new();
    if let Some(archive) = archive {
        for (i, part) in archive.parts.iter().enumerate() {
            if !part.is_image() || part.decode_error.is_some() {
                continue;
            }
            let Some(location) = part.content_location.as_deref() else {
                continue;
            };
            let Some(stem) = location_stem(location) else {
                continue;
            };
            let Some(page) = plans.iter().find(|p| p.id.to_ascii_lowercase() == stem) else {
                continue;
            };
            let markup = if part.body.len() < options.inline_asset_limit {
                let path = format!("assets/{}", asset_name(location, i));
                let tag = format!(
                    "<img src=\"{}\" alt=\"{}\" />",
                    escape_attr(&path),
                    escape_attr(&page.title)
                );
                assets.push(SiteAsset {
                    path,
                    content_type: part.content_type.clone(),
                    bytes: part.body.clone(),
                });
                tag
            } else {
                format!(
                    "<a class=\"asset\" href=\"{}\">{} image</a>",
                    escape_attr(location),
                    escape_text(&page.title)
                )
            };
            page_images.entry(page.id.clone()).or_default().push(markup);
        }
    }

    let nav_entries: Vec<(String, String)> = plans
        .iter()
        .map(|p| (page_file(&p.id), p.title.clone()))
        .collect();

    let mut pages = Vec::new();
    let mut nav_index = BTreeMap::new();
    for plan in &plans {
        let mut images = page_images.remove(&plan.id).unwrap_or_default();
        let mut elements = Vec::new();
        let mut heading_seen = false;
        for seg in &plan.segments {
            let text = escape_text(&seg.text);
            let marker = format!("{SEGMENT_ATTR}=\"{}\"", seg.order);
            let element = match seg.role {
                SegmentRole::Heading => {
                    let level = if heading_seen { 2 } else { 1 };
                    heading_seen = true;
                    format!("<h{level} {marker}>{text}</h{level}>")
                }
                SegmentRole::Body => format!("<p {marker}>{text}</p>"),
                SegmentRole::Link => {
                    let href = resolve_link(seg.link_target.as_deref(), &page_ids);
                    match href {
                        Some(h) => format!(
                            "<p {marker}><a href=\"{}\">{text}</a></p>",
                            escape_attr(&h)
                        ),
                        None => format!("<p {marker}><a>{text}</a></p>"),
                    }
                }
                SegmentRole::Caption => {
                    let imgs: String = std::mem::take(&mut images).concat();
                    format!("<figure {marker}>{imgs}<figcaption>{text}</figcaption></figure>")
                }
            };
            elements.push(element);
        }
        if !images.is_empty() {
            elements.push(format!("<figure class=\"asset\">{}</figure>", images.concat()));
        }
        for (i, chunk) in split_into_pages(&plan.title, &nav_entries, &elements, options.page_budget)
            .into_iter()
            .enumerate()
        {
            let page_id = if i == 0 {
                plan.id.clone()
            } else {
                format!("{}-{}", plan.id, i + 1)
            };
            let path = page_file(&page_id);
            nav_index.insert(page_id.clone(), path.clone());
            pages.push(TranslatedPage {
                page_id,
                path,
                title: plan.title.clone(),
                html: chunk,
            });
        }
    }
    // continuation links point at the next chunk of the same page
    link_continuations(&mut pages);

    Ok(TranslatedSite {
        site: first.site.clone(),
        pages,
        nav_index,
        assets,
    })
}

const CONTINUED_MARK: &str = "<!--continued-->";

/// Groups elements into as few pages as the budget allows. An element that
/// alone exceeds the budget gets a page of its own.
fn split_into_pages(
    title: &str,
    nav: &[(String, String)],
    elements: &[String],
    budget: usize,
) -> Vec<String> {
    // room reserved for the continuation link
    let link_room = 96;
    let mut pages = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for el in elements {
        let mut candidate = current.clone();
        candidate.push(el);
        let size = render_page(title, nav, &candidate, true).len() + link_room;
        if size > budget && !current.is_empty() {
            pages.push(render_page(title, nav, &current, true));
            current = vec![el];
        } else {
            current = candidate;
        }
    }
    pages.push(render_page(title, nav, &current, false));
    pages
}

fn render_page(title: &str, nav: &[(String, String)], elements: &[&str], continued: bool) -> String {
    let mut html = String::new();
    html.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n");
    html.push_str("<meta charset=\"utf-8\" />\n");
    html.push_str(
        "<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\" />\n",
    );
    let _ = writeln!(html, "<title>{}</title>", escape_text(title));
    html.push_str(
        "<style>body{margin:0 auto;max-width:40em;padding:0 .5em;font-family:sans-serif}\
         nav ul{list-style:none;padding:0}nav li{display:inline;margin-right:.6em}\
         img{max-width:100%;height:auto}</style>\n",
    );
    html.push_str("</head>\n<body>\n<nav><ul>");
    for (path, label) in nav {
        let _ = write!(
            html,
            "<li><a href=\"{}\">{}</a></li>",
            escape_attr(path),
            escape_text(label)
        );
    }
    html.push_str("</ul></nav>\n<main>\n");
    for el in elements {
        html.push_str(el);
        html.push('\n');
    }
    if continued {
        html.push_str(CONTINUED_MARK);
        html.push('\n');
    }
    html.push_str("</main>\n</body>\n</html>\n");
    html
}

fn link_continuations(pages: &mut [TranslatedPage]) {
    for i in 0..pages.len().saturating_sub(1) {
        if pages[i].html.contains(CONTINUED_MARK) {
            let next = pages[i + 1].path.clone();
            let link = format!(
                "<p class=\"continued\"><a href=\"{}\">continued</a></p>",
                escape_attr(&next)
            );
            pages[i].html = pages[i].html.replacen(CONTINUED_MARK, &link, 1);
        }
    }
}

/// Maps a link target to an href: page ids (or URLs whose fragment names a
/// page) become relative page paths, anything else is kept.
fn resolve_link(target: Option<&str>, page_ids: &HashSet<&str>) -> Option<String> {
    let target = target?.trim();
    if target.is_empty() {
        return None;
    }
    if page_ids.contains(target) {
        return Some(page_file(target));
    }
    if let Some((_, fragment)) = target.split_once('#') {
        if page_ids.contains(fragment) {
            return Some(page_file(fragment));
        }
    }
    Some(target.to_string())
}

/// Texts of the segment-bearing elements of an emitted page, in document
/// order.
pub fn extract_segment_texts(html: &str) -> Vec<String> {
    let Ok(dom) = parse_html(html.as_bytes(), Some("utf-8")) else {
        return Vec::new();
    };
    dom.ids()
        .filter(|&id| dom.node(id).attr(SEGMENT_ATTR).is_some())
        .map(|id| dom.text_content(id))
        .collect()
}
