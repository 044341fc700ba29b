//! Response-time measurement, kappa content coverage and the feasibility
//! matrix, plus their comma-separated report tables.

mod feasibility;
mod kappa;
mod timing;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

pub use feasibility::{
    feasibility_of, feasibility_report, majority, page_outcomes, FeasibilityCell, Outcome, System,
};
pub use kappa::{
    compute_kappa, coverage_score, kappa_from_marginals, CoverageRating, CoverageReport,
    KappaBand, KappaError, KappaResult, HUMAN_VIEW, SYSTEM_VIEW,
};
pub use timing::{median, measure_response, MeasureError, TimingRecord, Variant, MEASURE_TIMEOUT};

use crate::translator::{extract_segment_texts, TextSegment, TranslatedSite};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("report: {0}")]
    Csv(#[from] csv::Error),
    #[error("report: {0}")]
    Io(#[from] std::io::Error),
}

pub fn write_timing_csv<W: Write>(out: W, records: &[TimingRecord]) -> Result<(), ReportError> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(["url", "variant", "device_profile", "median_ms", "bytes", "samples"])?;
    for r in records {
        let mut row = vec![
            r.url.to_string(),
            r.variant.to_string(),
            r.device_profile.clone(),
            format!("{:.3}", r.median_ms),
            r.bytes.to_string(),
        ];
        row.extend(r.samples.iter().map(|s| format!("{s:.3}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_kappa_csv<W: Write>(
    out: W,
    rows: &[(String, KappaResult)],
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["page_set", "pr_a", "pr_e", "kappa", "band"])?;
    for (set, r) in rows {
        w.write_record([
            set.clone(),
            format!("{:.6}", r.pr_a),
            format!("{:.6}", r.pr_e),
            format!("{:.6}", r.kappa),
            r.band.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_feasibility_csv<W: Write>(
    out: W,
    cells: &[FeasibilityCell],
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["system", "technology", "outcome", "n_pages"])?;
    for c in cells {
        w.write_record([
            c.system.to_string(),
            c.technology.to_string(),
            c.outcome.to_string(),
            c.n_pages.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum RatingsError {
    #[error("ratings: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("ratings: line {line}: {message}")]
    Malformed { line: usize, message: String },
}

/// Reads a ratings file: one rating per line, either `value` or
/// `page,value`. Blank lines and lines starting with `#` are skipped.
pub fn parse_ratings(text: &str) -> Result<Vec<(Option<String>, CoverageRating)>, RatingsError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (page, value) = match line.rsplit_once(',') {
            Some((p, v)) => (Some(p.trim().to_string()), v),
            None => (None, line),
        };
        let rating = value.parse().map_err(|message| RatingsError::Malformed {
            line: i + 1,
            message,
        })?;
        out.push((page, rating));
    }
    Ok(out)
}

pub fn load_ratings(path: &Path) -> Result<Vec<(Option<String>, CoverageRating)>, RatingsError> {
    let text = std::fs::read_to_string(path).map_err(|source| RatingsError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_ratings(&text)
}

/// Texts recovered from the emitted pages of each source page, continuation
/// pages included.
pub fn recovered_texts(site: &TranslatedSite) -> BTreeMap<String, Vec<String>> {
    let mut by_page: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let source_ids: Vec<&str> = site
        .pages
        .iter()
        .map(|p| p.page_id.as_str())
        .filter(|id| !site.pages.iter().any(|q| is_continuation_of(id, &q.page_id)))
        .collect();
    for page in &site.pages {
        let owner = source_ids
            .iter()
            .find(|&&id| id == page.page_id || is_continuation_of(&page.page_id, id))
            .copied()
            .unwrap_or(page.page_id.as_str());
        by_page
            .entry(owner.to_string())
            .or_default()
            .extend(extract_segment_texts(&page.html));
    }
    by_page
}

fn is_continuation_of(candidate: &str, base: &str) -> bool {
    candidate
        .strip_prefix(base)
        .and_then(|rest| rest.strip_prefix('-'))
        .and_then(|n| n.parse::<u32>().ok())
        .is_some_and(|n| n >= 2)
}

/// Automated coverage per page: full when every segment text comes back in
/// order, half when at least half the texts come back, lost otherwise.
pub fn system_view_ratings(
    segments: &[TextSegment],
    site: &TranslatedSite,
) -> Vec<(String, CoverageRating)> {
    let recovered = recovered_texts(site);
    let mut expected: BTreeMap<&str, Vec<(u32, &str)>> = BTreeMap::new();
    for s in segments {
        expected
            .entry(s.page.as_str())
            .or_default()
            .push((s.order, s.text.as_str()));
    }
    expected
        .into_iter()
        .map(|(page, mut texts)| {
            texts.sort();
            let want: Vec<&str> = texts.iter().map(|(_, t)| *t).collect();
            let got: Vec<&str> = recovered
                .get(page)
                .map(|v| v.iter().map(String::as_str).collect())
                .unwrap_or_default();
            let rating = if got == want {
                CoverageRating::Full
            } else {
                let found = want.iter().filter(|t| got.contains(t)).count();
                if 2 * found >= want.len() {
                    CoverageRating::Half
                } else {
                    CoverageRating::Lost
                }
            };
            (page.to_string(), rating)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ratings_file() {
        let r = parse_ratings("# hv\nhome,1\n\nabout, 0.5\n0\n").unwrap();
        assert_eq!(
            r,
            vec![
                (Some("home".into()), CoverageRating::Full),
                (Some("about".into()), CoverageRating::Half),
                (None, CoverageRating::Lost),
            ]
        );
        assert!(matches!(
            parse_ratings("a,2"),
            Err(RatingsError::Malformed { line: 1, .. })
        ));
    }

    #[test]
    fn continuation_ids() {
        assert!(is_continuation_of("home-2", "home"));
        assert!(!is_continuation_of("home-1", "home"));
        assert!(!is_continuation_of("home-x", "home"));
    }

    #[test]
    fn feasibility_csv_layout() {
        let cells = vec![FeasibilityCell {
            system: System::Segmenter,
            technology: crate::corpus::PageTechnology::Flash,
            outcome: Outcome::SingleBlock,
            n_pages: 2,
            works: 0,
            single_block: 2,
            fails: 0,
        }];
        let mut out = Vec::new();
        write_feasibility_csv(&mut out, &cells).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "system,technology,outcome,n_pages\nsegmenter,flash,single-block,2\n"
        );
    }
}
