use std::fmt;
use std::io::Read;
use std::str::FromStr;
use std::time::{Duration, Instant};

use url::Url;

/// Which side of the comparison a URL belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// The original Flash page.
    Conventional,
    /// The translated HTML page.
    Translated,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Conventional => "C",
            Variant::Translated => "T",
        })
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "C" | "c" => Ok(Variant::Conventional),
            "T" | "t" => Ok(Variant::Translated),
            other => Err(format!("variant must be C or T, got {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimingRecord {
    pub url: Url,
    pub variant: Variant,
    /// Free-form label; no device is emulated.
    pub device_profile: String,
    /// Elapsed milliseconds of the successful samples, in request order.
    pub samples: Vec<f64>,
    pub median_ms: f64,
    /// Body size of the last successful sample.
    pub bytes: usize,
    /// Messages of the failed samples.
    pub failures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("measure: repeats must be at least 1")]
    NoRepeats,
    #[error("measure: {url}: all {attempts} samples failed; last error: {last}")]
    MeasurementFailed {
        url: Url,
        attempts: usize,
        last: String,
    },
}

/// Median of a non-empty sample; the mean of the middle pair for even
/// lengths.
pub fn median(samples: &[f64]) -> Option<f64> {
    if samples.is_empty() {
        return None;
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    Some(if sorted.len() % 2 == 1 {
        sorted[mid]
    } else {
        (sorted[mid - 1] + sorted[mid]) / 2.0
    })
}

pub const MEASURE_TIMEOUT: Duration = Duration::from_secs(60);

/// Times `repeats` sequential GET requests. Each sample runs from sending
/// the request until the last body byte arrives.
pub fn measure_response(
    url: &Url,
    repeats: usize,
    variant: Variant,
    device_profile: &str,
) -> Result<TimingRecord, MeasureError> {
    if repeats == 0 {
        return Err(MeasureError::NoRepeats);
    }
    let client = reqwest::blocking::Client::builder()
        .timeout(MEASURE_TIMEOUT)
        .build()
        .map_err(|e| MeasureError::MeasurementFailed {
            url: url.clone(),
            attempts: 0,
            last: e.to_string(),
        })?;
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    let mut bytes = 0;
    for _ in 0..repeats {
        let start = Instant::now();
        let result = client
            .get(url.clone())
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| e.to_string())
            .and_then(|mut r| {
                let mut body = Vec::new();
                r.read_to_end(&mut body).map(|_| body).map_err(|e| e.to_string())
            });
        match result {
            Ok(body) => {
                samples.push(start.elapsed().as_secs_f64() * 1000.0);
                bytes = body.len();
            }
            Err(e) => failures.push(e),
        }
    }
    let Some(median_ms) = median(&samples) else {
        return Err(MeasureError::MeasurementFailed {
            url: url.clone(),
            attempts: repeats,
            last: failures.pop().unwrap_or_default(),
        });
    };
    Ok(TimingRecord {
        url: url.clone(),
        variant,
        device_profile: device_profile.to_string(),
        samples,
        median_ms,
        bytes,
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_odd_even() {
        assert_eq!(median(&[3.0]), Some(3.0));
        assert_eq!(median(&[5.0, 1.0, 3.0]), Some(3.0));
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), Some(2.5));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn zero_repeats() {
        let url = Url::parse("http://127.0.0.1:1/").unwrap();
        assert_eq!(
            measure_response(&url, 0, Variant::Translated, "x"),
            Err(MeasureError::NoRepeats)
        );
    }
}
