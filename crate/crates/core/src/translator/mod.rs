//! Flash site translation: an MHTML capture plus transcribed text segments
//! become a directory of static single-column HTML pages.

mod mhtml;
mod reconstruct;
mod segments;

use std::path::{Path, PathBuf};

use serde::Serialize;

pub use mhtml::{
    decode_quoted_printable, encode_quoted_printable, parse_mhtml, parse_mhtml_lenient,
    MhtmlArchive, MhtmlError, MimePart, TransferEncoding,
};
pub use reconstruct::{
    extract_segment_texts, reconstruct_html, reconstruct_with, ReconstructError,
    ReconstructOptions, SiteAsset, TemplateError, TemplateId, TranslatedPage, TranslatedSite,
    DEFAULT_INLINE_ASSET_LIMIT, DEFAULT_PAGE_BUDGET, SEGMENT_ATTR,
};
pub use segments::{
    ingest_segments, parse_segments, segments_to_jsonl, SegmentError, SegmentRole, TextSegment,
};

/// Name of the manifest written next to the pages.
pub const SITE_MANIFEST: &str = "site-manifest.json";

#[derive(Debug, thiserror::Error)]
pub enum TranslateError {
    #[error("mhtml: {path}: {source}")]
    MhtmlIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("mhtml: {path}: {source}")]
    Mhtml {
        path: PathBuf,
        #[source]
        source: MhtmlError,
    },
    #[error(transparent)]
    Segments(#[from] SegmentError),
    #[error(transparent)]
    Reconstruct(#[from] ReconstructError),
    #[error("write: {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// On-disk description of a translated site.
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq, Eq)]
pub struct SiteManifest {
    pub site: String,
    /// Relative path of the page served for `/`.
    pub index: String,
    pub pages: Vec<ManifestPage>,
    pub nav_index: std::collections::BTreeMap<String, String>,
    pub assets: Vec<String>,
}

#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq, Eq)]
pub struct ManifestPage {
    pub page_id: String,
    pub path: String,
    pub title: String,
    pub bytes: usize,
}

impl SiteManifest {
    pub fn of(site: &TranslatedSite) -> Self {
        SiteManifest {
            site: site.site.clone(),
            index: site.index_path().unwrap_or("index.html").to_string(),
            pages: site
                .pages
                .iter()
                .map(|p| ManifestPage {
                    page_id: p.page_id.clone(),
                    path: p.path.clone(),
                    title: p.title.clone(),
                    bytes: p.html.len(),
                })
                .collect(),
            nav_index: site.nav_index.clone(),
            assets: site.assets.iter().map(|a| a.path.clone()).collect(),
        }
    }
}

/// Writes pages, assets and the site manifest under `out_dir`.
pub fn write_site(site: &TranslatedSite, out_dir: &Path) -> Result<(), TranslateError> {
    let write = |path: PathBuf, bytes: &[u8]| -> Result<(), TranslateError> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|source| TranslateError::Write {
                path: parent.to_path_buf(),
                source,
            })?;
        }
        std::fs::write(&path, bytes).map_err(|source| TranslateError::Write { path, source })
    };
    for page in &site.pages {
        write(out_dir.join(&page.path), page.html.as_bytes())?;
    }
    for asset in &site.assets {
        write(out_dir.join(&asset.path), &asset.bytes)?;
    }
    let manifest = serde_json::to_vec_pretty(&SiteManifest::of(site)).expect("manifest serializes");
    write(out_dir.join(SITE_MANIFEST), &manifest)
}

/// Parses both inputs, rebuilds the site and persists it. An empty MHTML
/// file yields a text-only site.
pub fn translate_site(
    mhtml_path: &Path,
    segments_path: &Path,
    out_dir: &Path,
) -> Result<TranslatedSite, TranslateError> {
    let bytes = std::fs::read(mhtml_path).map_err(|source| TranslateError::MhtmlIo {
        path: mhtml_path.to_path_buf(),
        source,
    })?;
    let archive = if bytes.iter().all(u8::is_ascii_whitespace) {
        None
    } else {
        Some(
            parse_mhtml_lenient(&bytes).map_err(|source| TranslateError::Mhtml {
                path: mhtml_path.to_path_buf(),
                source,
            })?,
        )
    };
    let segments = ingest_segments(segments_path)?;
    let site = reconstruct_with(&segments, archive.as_ref(), &ReconstructOptions::default())?;
    write_site(&site, out_dir)?;
    Ok(site)
}
