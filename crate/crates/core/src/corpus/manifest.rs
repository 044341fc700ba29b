//! Dataset manifest: page bodies on disk plus a newline-delimited JSON index.
//!
//! The first line of `manifest.jsonl` is a header object carrying
//! `created_at`; every following line is one entry
//! `{url, technology, body_digest, local_path}`. Digests are lowercase hex
//! SHA-256 of the stored body; `local_path` is relative to the manifest
//! directory.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use url::Url;

use super::{PageRecord, PageSource, PageTechnology};

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub url: Url,
    pub technology: PageTechnology,
    pub body_digest: String,
    pub local_path: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    pub created_at: DateTime<Utc>,
    /// Directory holding the manifest file; `local_path`s resolve against it.
    pub root: PathBuf,
}

#[derive(Debug, thiserror::Error)]
pub enum ManifestError {
    #[error("io: {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("manifest: {path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("manifest: duplicate url {0}")]
    DuplicateUrl(Url),
    #[error("manifest: digest of {path} does not match the recorded {expected}")]
    DigestMismatch { path: PathBuf, expected: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ManifestError + '_ {
    move |source| ManifestError::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn extension(t: PageTechnology) -> &'static str {
    match t {
        PageTechnology::Html => "html",
        PageTechnology::Xml => "xml",
        PageTechnology::Flash => "swf",
        PageTechnology::Unknown => "bin",
    }
}

impl DatasetManifest {
    pub fn manifest_path(&self) -> PathBuf {
        self.root.join(MANIFEST_FILE)
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        self.root.join(&entry.local_path)
    }

    /// Reads every body back as a local-file record.
    pub fn load_records(&self) -> Result<Vec<PageRecord>, ManifestError> {
        self.entries
            .iter()
            .map(|e| {
                let path = self.resolve(e);
                let body = fs::read(&path).map_err(io_err(&path))?;
                Ok(PageRecord {
                    url: e.url.clone(),
                    body,
                    content_type: String::new(),
                    technology: e.technology,
                    fetched_at: self.created_at,
                    source: PageSource::LocalFile,
                })
            })
            .collect()
    }
}

/// Writes bodies under `out_dir/pages/` and the index to
/// `out_dir/manifest.jsonl`. Later duplicates of a URL are dropped.
pub fn build_manifest(
    records: &[PageRecord],
    out_dir: &Path,
) -> Result<DatasetManifest, ManifestError> {
    let pages = out_dir.join("pages");
    fs::create_dir_all(&pages).map_err(io_err(&pages))?;

    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for record in records {
        if !seen.insert(record.url.clone()) {
            log::info!("manifest: dropping duplicate {}", record.url);
            continue;
        }
        let digest = sha256_hex(&record.body);
        let name = format!(
            "{}.{}",
            &sha256_hex(record.url.as_str().as_bytes())[..16],
            extension(record.technology)
        );
        let path = pages.join(&name);
        fs::write(&path, &record.body).map_err(io_err(&path))?;
        let on_disk = fs::read(&path).map_err(io_err(&path))?;
        if sha256_hex(&on_disk) != digest {
            return Err(ManifestError::DigestMismatch {
                path,
                expected: digest,
            });
        }
        entries.push(ManifestEntry {
            url: record.url.clone(),
            technology: record.technology,
            body_digest: digest,
            local_path: format!("pages/{name}"),
        });
    }

    let manifest = DatasetManifest {
        entries,
        created_at: Utc::now(),
        root: out_dir.to_path_buf(),
    };
    let path = manifest.manifest_path();
    let mut file = fs::File::create(&path).map_err(io_err(&path))?;
    let header = Header {
        created_at: manifest.created_at,
    };
    let mut text = serde_json::to_string(&header).expect("header serializes");
    text.push('\n');
    for e in &manifest.entries {
        text.push_str(&serde_json::to_string(e).expect("entry serializes"));
        text.push('\n');
    }
    file.write_all(text.as_bytes()).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Loads a manifest file (or a directory containing `manifest.jsonl`) and
/// verifies every stored body against its digest.
pub fn load_manifest(path: &Path) -> Result<DatasetManifest, ManifestError> {
    let file = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let root = file
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let text = fs::read_to_string(&file).map_err(io_err(&file))?;
    let format_err = |line: usize, message: String| ManifestError::Format {
        path: file.clone(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines
        .next()
        .ok_or_else(|| format_err(1, "missing header line".to_string()))?;
    let header: Header =
        serde_json::from_str(first).map_err(|e| format_err(1, e.to_string()))?;

    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, line) in lines {
        let entry: ManifestEntry =
            serde_json::from_str(line).map_err(|e| format_err(i + 1, e.to_string()))?;
        if !seen.insert(entry.url.clone()) {
            return Err(ManifestError::DuplicateUrl(entry.url));
        }
        let body_path = root.join(&entry.local_path);
        let body = fs::read(&body_path).map_err(io_err(&body_path))?;
        if sha256_hex(&body) != entry.body_digest {
            return Err(ManifestError::DigestMismatch {
                path: body_path,
                expected: entry.body_digest,
            });
        }
        entries.push(entry);
    }
    Ok(DatasetManifest {
        entries,
        created_at: header.created_at,
        root,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(url: &str, body: &str) -> PageRecord {
        PageRecord::from_bytes(Url::parse(url).unwrap(), body.as_bytes().to_vec(), "")
            .classified()
    }

    #[test]
    fn digest_is_sha256_hex() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn writes_entries_and_drops_duplicates() {
        let dir = tempfile::tempdir().unwrap();
        let records = vec![
            record("http://x/a.html", "<p>a</p>"),
            record("http://x/b.xml", "<?xml version=\"1.0\"?><b/>"),
            record("http://x/a.html", "<p>other</p>"),
        ];
        let m = build_manifest(&records, dir.path()).unwrap();
        assert_eq!(m.entries.len(), 2);
        assert_eq!(m.entries[1].technology, PageTechnology::Xml);
        for e in &m.entries {
            assert!(m.resolve(e).exists());
        }
        let body = fs::read(m.resolve(&m.entries[0])).unwrap();
        assert_eq!(body, b"<p>a</p>");

        let reloaded = load_manifest(dir.path()).unwrap();
        assert_eq!(reloaded.entries, m.entries);
        let bodies = reloaded.load_records().unwrap();
        assert_eq!(sha256_hex(&bodies[1].body), m.entries[1].body_digest);
    }

    #[test]
    fn rerun_is_deterministic_apart_from_timestamp() {
        let records = vec![
            record("http://x/a.html", "<p>a</p>"),
            record("http://x/c", "FWS\x0a...."),
        ];
        let read_entries = |dir: &Path| {
            let text = fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap();
            text.lines().skip(1).map(str::to_string).collect::<Vec<_>>()
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        build_manifest(&records, d1.path()).unwrap();
        build_manifest(&records, d2.path()).unwrap();
        assert_eq!(read_entries(d1.path()), read_entries(d2.path()));
    }

    #[test]
    fn tampered_body_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let m = build_manifest(&[record("http://x/a.html", "<p>a</p>")], dir.path()).unwrap();
        fs::write(m.resolve(&m.entries[0]), b"changed").unwrap();
        assert!(matches!(
            load_manifest(dir.path()),
            Err(ManifestError::DigestMismatch { .. })
        ));
    }
}
