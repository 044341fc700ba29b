use std::fmt;

use serde::Serialize;

/// Per-page content coverage as judged by one rater.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CoverageRating {
    /// All content lost.
    Lost,
    /// About half the content lost.
    Half,
    /// Nothing lost.
    Full,
}

impl CoverageRating {
    pub const ALL: [CoverageRating; 3] = [CoverageRating::Lost, CoverageRating::Half, CoverageRating::Full];

    pub fn value(self) -> f64 {
        match self {
            CoverageRating::Lost => 0.0,
            CoverageRating::Half => 0.5,
            CoverageRating::Full => 1.0,
        }
    }

    /// Accepts exactly 0, 0.5 or 1.
    pub fn from_value(v: f64) -> Option<Self> {
        if v == 0.0 {
            Some(CoverageRating::Lost)
        } else if v == 0.5 {
            Some(CoverageRating::Half)
        } else if v == 1.0 {
            Some(CoverageRating::Full)
        } else {
            None
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for CoverageRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

impl std::str::FromStr for CoverageRating {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<f64>()
            .ok()
            .and_then(CoverageRating::from_value)
            .ok_or_else(|| format!("coverage rating must be 0, 0.5 or 1, got {:?}", s.trim()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum KappaBand {
    Weak,
    Strong,
    Excellent,
}

impl KappaBand {
    /// Strict thresholds: above 0.9 is excellent, above 0.7 strong.
    pub fn of(kappa: f64) -> Self {
        if kappa > 0.9 {
            KappaBand::Excellent
        } else if kappa > 0.7 {
            KappaBand::Strong
        } else {
            KappaBand::Weak
        }
    }
}

impl fmt::Display for KappaBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KappaBand::Weak => "weak",
            KappaBand::Strong => "strong",
            KappaBand::Excellent => "excellent",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KappaResult {
    /// Observed agreement.
    pub pr_a: f64,
    /// Chance agreement from the product of the raters' marginals.
    pub pr_e: f64,
    pub kappa: f64,
    pub band: KappaBand,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KappaError {
    #[error("kappa: rater vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("kappa: no ratings")]
    EmptyInput,
    #[error("kappa: chance agreement is 1 but observed agreement is {pr_a}")]
    DegenerateMarginals { pr_a: f64 },
    #[error("kappa: marginals must be non-negative and sum to 1")]
    InvalidMarginals,
}

fn finish(pr_a: f64, pr_e: f64) -> Result<KappaResult, KappaError> {
    let kappa = if pr_e >= 1.0 {
        if pr_a >= 1.0 {
            1.0
        } else {
            return Err(KappaError::DegenerateMarginals { pr_a });
        }
    } else {
        (pr_a - pr_e) / (1.0 - pr_e)
    };
    Ok(KappaResult {
        pr_a,
        pr_e,
        kappa,
        band: KappaBand::of(kappa),
    })
}

/// Cohen's kappa over paired ratings.
pub fn compute_kappa(
    ratings_a: &[CoverageRating],
    ratings_b: &[CoverageRating],
) -> Result<KappaResult, KappaError> {
    if ratings_a.len() != ratings_b.len() {
        return Err(KappaError::LengthMismatch(ratings_a.len(), ratings_b.len()));
    }
    if ratings_a.is_empty() {
        return Err(KappaError::EmptyInput);
    }
    let n = ratings_a.len();
    let mut agree = 0usize;
    let mut count_a = [0usize; 3];
    let mut count_b = [0usize; 3];
    for (&a, &b) in ratings_a.iter().zip(ratings_b) {
        agree += usize::from(a == b);
        count_a[a.index()] += 1;
        count_b[b.index()] += 1;
    }
    // integer arithmetic keeps the result symmetric and exact before the
    // final divisions
    let chance: usize = count_a.iter().zip(&count_b).map(|(x, y)| x * y).sum();
    let pr_a = agree as f64 / n as f64;
    let pr_e = chance as f64 / (n * n) as f64;
    finish(pr_a, pr_e)
}

/// Kappa from an observed agreement and the two raters' category marginals,
/// for summaries that report only those figures.
pub fn kappa_from_marginals(
    pr_a: f64,
    marginals_a: &[f64],
    marginals_b: &[f64],
) -> Result<KappaResult, KappaError> {
    if marginals_a.len() != marginals_b.len() {
        return Err(KappaError::LengthMismatch(marginals_a.len(), marginals_b.len()));
    }
    if marginals_a.is_empty() {
        return Err(KappaError::EmptyInput);
    }
    let valid = |m: &[f64]| {
        m.iter().all(|&p| (0.0..=1.0).contains(&p)) && (m.iter().sum::<f64>() - 1.0).abs() < 1e-9
    };
    if !valid(marginals_a) || !valid(marginals_b) || !(0.0..=1.0).contains(&pr_a) {
        return Err(KappaError::InvalidMarginals);
    }
    let pr_e = marginals_a.iter().zip(marginals_b).map(|(a, b)| a * b).sum();
    finish(pr_a, pr_e)
}

/// Agreement between human-view and system-view ratings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoverageReport {
    pub rater_a: &'static str,
    pub rater_b: &'static str,
    #[serde(flatten)]
    pub result: KappaResult,
}

pub const HUMAN_VIEW: &str = "HV";
pub const SYSTEM_VIEW: &str = "SV";

pub fn coverage_score(
    human_view: &[CoverageRating],
    system_view: &[CoverageRating],
) -> Result<CoverageReport, KappaError> {
    Ok(CoverageReport {
        rater_a: HUMAN_VIEW,
        rater_b: SYSTEM_VIEW,
        result: compute_kappa(human_view, system_view)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use CoverageRating::*;

    #[test]
    fn no_agreement_beyond_chance() {
        let r = compute_kappa(&[Full, Full, Lost, Lost], &[Full, Lost, Full, Lost]).unwrap();
        assert_eq!((r.pr_a, r.pr_e, r.kappa), (0.5, 0.5, 0.0));
    }

    #[test]
    fn degenerate_marginals() {
        let r = compute_kappa(&[Half, Half], &[Half, Half]).unwrap();
        assert_eq!((r.pr_e, r.kappa, r.band), (1.0, 1.0, KappaBand::Excellent));
        assert_eq!(
            kappa_from_marginals(0.5, &[1.0, 0.0], &[1.0, 0.0]),
            Err(KappaError::DegenerateMarginals { pr_a: 0.5 })
        );
    }

    #[test]
    fn errors() {
        assert_eq!(compute_kappa(&[Full], &[]), Err(KappaError::LengthMismatch(1, 0)));
        assert_eq!(compute_kappa(&[], &[]), Err(KappaError::EmptyInput));
        assert_eq!(
            kappa_from_marginals(0.8, &[0.6, 0.5], &[0.5, 0.5]),
            Err(KappaError::InvalidMarginals)
        );
    }

    #[test]
    fn rating_parse() {
        assert_eq!("0.5".parse::<CoverageRating>(), Ok(Half));
        assert_eq!(" 1 ".parse::<CoverageRating>(), Ok(Full));
        assert!("0.25".parse::<CoverageRating>().is_err());
    }
}
