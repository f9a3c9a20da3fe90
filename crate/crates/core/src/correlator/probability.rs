use serde::{Deserialize, Serialize};

use super::CorrelateError;
use crate::heuristics::Bounds;

/// Whether an allocation's duration hit the activity's average exactly or
/// fell elsewhere in its window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DurationKind {
    Avg,
    Range,
}

impl DurationKind {
    pub fn classify(duration: i64, bounds: Bounds) -> Self {
        if duration == bounds.avg() {
            DurationKind::Avg
        } else {
            DurationKind::Range
        }
    }
}

/// Probability of one of `m` instances cloned from an event.
///
/// * `m = 1`: 1
/// * avg-kind: `(m + 1) / m²`
/// * range-kind: `(m - 1/|range|) / m²`, the excluded average counting as a
///   singleton.
pub fn instance_probability(
    m: usize,
    kind: DurationKind,
    activity: &str,
    bounds: Bounds,
) -> Result<f64, CorrelateError> {
    assert!(m >= 1, "an event needs at least one allocation");
    if m == 1 {
        return Ok(1.0);
    }
    let m = m as f64;
    match kind {
        DurationKind::Avg => Ok((m + 1.0) / (m * m)),
        DurationKind::Range => {
            let range = bounds.range_len();
            if range == 0 {
                return Err(CorrelateError::DegenerateRange(activity.to_string()));
            }
            Ok((m - 1.0 / range as f64) / (m * m))
        }
    }
}

/// Percentage trust from the probabilities of one case's instances, capped
/// at 100. Returns `(capped, raw)`.
pub fn case_trust(probabilities: impl IntoIterator<Item = f64>) -> (f64, f64) {
    let raw = 100.0 * probabilities.into_iter().sum::<f64>();
    (raw.min(100.0), raw)
}
