use std::collections::BTreeMap;
use std::fmt;

use crate::blockmodel::parse_html;
use crate::corpus::{DatasetManifest, ManifestError, PageRecord, PageTechnology};
use crate::noisefilter::{strip_noise, RuleSet};
use crate::segmenter::{segment_page, PDoC, SegmentationStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum System {
    Segmenter,
    NoiseFilter,
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            System::Segmenter => "segmenter",
            System::NoiseFilter => "noisefilter",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Outcome {
    Works,
    SingleBlock,
    Fails,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Works => "works",
            Outcome::SingleBlock => "single-block",
            Outcome::Fails => "fails",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeasibilityCell {
    pub system: System,
    pub technology: PageTechnology,
    pub outcome: Outcome,
    pub n_pages: usize,
    pub works: usize,
    pub single_block: usize,
    pub fails: usize,
}

/// Per-page outcome of both systems.
pub fn page_outcomes(page: &PageRecord, pdoc: PDoC, rules: &RuleSet) -> (Outcome, Outcome) {
    let seg = segment_page(page, pdoc);
    let segmenter = match seg.status {
        SegmentationStatus::Segmented => Outcome::Works,
        SegmentationStatus::SingleBlock => Outcome::SingleBlock,
        SegmentationStatus::Unsupported => Outcome::Fails,
    };
    // the filter works on the segmenter's blocks, so it inherits its limits
    let filter = match (&seg.tree, segmenter) {
        (None, _) | (_, Outcome::Fails) => Outcome::Fails,
        (Some(tree), _) => {
            let dom = match page.technology {
                PageTechnology::Xml => crate::blockmodel::parse_xml(&page.body).map(|d| d.tree).ok(),
                _ => parse_html(&page.body, None).ok(),
            };
            match dom.map(|dom| strip_noise(tree, &dom, rules)) {
                Some(Ok(_)) if segmenter == Outcome::Works => Outcome::Works,
                Some(Ok(_)) => Outcome::SingleBlock,
                _ => Outcome::Fails,
            }
        }
    };
    (segmenter, filter)
}

/// Strict majority of works, then of single-block; anything else fails.
pub fn majority(works: usize, single_block: usize, fails: usize) -> Outcome {
    let n = works + single_block + fails;
    if 2 * works > n {
        Outcome::Works
    } else if 2 * single_block > n {
        Outcome::SingleBlock
    } else {
        Outcome::Fails
    }
}

/// Aggregates already-loaded pages. Technologies without pages get no cell.
pub fn feasibility_of(pages: &[PageRecord], pdoc: PDoC, rules: &RuleSet) -> Vec<FeasibilityCell> {
    let mut tally: BTreeMap<(System, &'static str), (PageTechnology, [usize; 3])> = BTreeMap::new();
    for page in pages {
        let (s, f) = page_outcomes(page, pdoc, rules);
        for (system, outcome) in [(System::Segmenter, s), (System::NoiseFilter, f)] {
            let slot = &mut tally
                .entry((system, page.technology.as_str()))
                .or_insert((page.technology, [0; 3]))
                .1;
            slot[match outcome {
                Outcome::Works => 0,
                Outcome::SingleBlock => 1,
                Outcome::Fails => 2,
            }] += 1;
        }
    }
    let mut cells: Vec<FeasibilityCell> = tally
        .into_iter()
        .map(|((system, _), (technology, [w, s, f]))| FeasibilityCell {
            system,
            technology,
            outcome: majority(w, s, f),
            n_pages: w + s + f,
            works: w,
            single_block: s,
            fails: f,
        })
        .collect();
    let rank = |t: PageTechnology| PageTechnology::ALL.iter().position(|&x| x == t);
    cells.sort_by_key(|c| (c.system, rank(c.technology)));
    cells
}

pub fn feasibility_report(
    manifest: &DatasetManifest,
    pdoc: PDoC,
    rules: &RuleSet,
) -> Result<Vec<FeasibilityCell>, ManifestError> {
    Ok(feasibility_of(&manifest.load_records()?, pdoc, rules))
}
