//! Dataset construction: fetching pages, classifying the technology each
//! page is built with, and persisting the result as a manifest.

mod classify;
mod fetch;
mod manifest;
mod scan;

use std::fmt;
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use url::Url;

pub use classify::{classify_parts, classify_technology, flash_signature, FlashSignature};
pub use fetch::{fetch_page, FetchError, FetchOptions, Fetcher};
pub use manifest::{build_manifest, load_manifest, DatasetManifest, ManifestEntry, ManifestError};
pub use scan::{normalize_url, scan_domain, scan_domain_with, ScanFailure, ScanOutcome};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PageTechnology {
    Html,
    Xml,
    Flash,
    Unknown,
}

impl PageTechnology {
    pub const ALL: [PageTechnology; 4] = [
        PageTechnology::Html,
        PageTechnology::Xml,
        PageTechnology::Flash,
        PageTechnology::Unknown,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PageTechnology::Html => "html",
            PageTechnology::Xml => "xml",
            PageTechnology::Flash => "flash",
            PageTechnology::Unknown => "unknown",
        }
    }
}

impl fmt::Display for PageTechnology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PageSource {
    LiveFetch,
    LocalFile,
}

/// A fetched or loaded page.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PageRecord {
    pub url: Url,
    pub body: Vec<u8>,
    /// Declared media type; empty when none was available.
    pub content_type: String,
    pub technology: PageTechnology,
    pub fetched_at: DateTime<Utc>,
    pub source: PageSource,
}

impl PageRecord {
    /// A record for bytes that did not come over the network. Technology is
    /// left `Unknown` until classified.
    pub fn from_bytes(url: Url, body: Vec<u8>, content_type: impl Into<String>) -> Self {
        PageRecord {
            url,
            body,
            content_type: content_type.into(),
            technology: PageTechnology::Unknown,
            fetched_at: Utc::now(),
            source: PageSource::LocalFile,
        }
    }

    /// Sets `technology` from the page contents.
    pub fn classified(mut self) -> Self {
        self.technology = classify_technology(&self);
        self
    }
}

/// Loads a page from disk. The URL is the file's absolute `file://` form.
pub fn load_local(path: &Path) -> std::io::Result<PageRecord> {
    let body = std::fs::read(path)?;
    let abs = std::path::absolute(path)?;
    let url = Url::from_file_path(&abs).map_err(|_| {
        std::io::Error::new(
            std::io::ErrorKind::InvalidInput,
            format!("{} cannot be expressed as a file URL", abs.display()),
        )
    })?;
    Ok(PageRecord::from_bytes(url, body, String::new()).classified())
}
