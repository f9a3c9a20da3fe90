//! Scoring correlator output against the original case labels.
//!
//! Each event contributes once. The event's selected instance is a true
//! positive if its predicted case is aligned to the event's true case, a
//! false positive otherwise. An event with no selected instance (noise, or
//! all instances below the threshold) is a false negative.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlator::{CaseId, CorrelatedEventInstance};
use crate::stream::{EventKey, GroundTruth};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Selection {
    /// The highest-trust instance of each event.
    MaxTrust,
    /// As `MaxTrust`, among instances with trust at least the given value.
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvaluationError {
    #[error("event populations differ: {missing} events lack a prediction, {unexpected} predicted events are not in the truth")]
    PopulationMismatch { missing: usize, unexpected: usize },
}

/// One-to-one partial mapping from predicted to true cases, built greedily
/// by descending overlap. Ties go to the predicted case seen first, then to
/// the true case seen first, so the result does not depend on id spelling.
pub fn align_cases<'a>(assignments: impl IntoIterator<Item = (CaseId, &'a str)>) -> BTreeMap<CaseId, String> {
    let mut overlap: HashMap<(CaseId, &str), u64> = HashMap::new();
    let mut first_pred: HashMap<CaseId, usize> = HashMap::new();
    let mut first_true: HashMap<&str, usize> = HashMap::new();
    for (i, (p, t)) in assignments.into_iter().enumerate() {
        *overlap.entry((p, t)).or_default() += 1;
        first_pred.entry(p).or_insert(i);
        first_true.entry(t).or_insert(i);
    }
    let mut pairs: Vec<((CaseId, &str), u64)> = overlap.into_iter().collect();
    pairs.sort_by_key(|&((p, t), n)| (std::cmp::Reverse(n), first_pred[&p], first_true[t]));

    let mut used_true = HashSet::new();
    let mut mapping = BTreeMap::new();
    for ((p, t), _) in pairs {
        if !mapping.contains_key(&p) && used_true.insert(t) {
            mapping.insert(p, t.to_string());
        }
    }
    mapping
}

/// The instance chosen for each event, keyed like the ground truth. Events
/// with nothing selected map to `None`. Trust ties go to the case that
/// started first, which for correlator output is the smaller case id.
pub fn select(
    instances: &[CorrelatedEventInstance],
    selection: Selection,
) -> BTreeMap<EventKey, Option<&CorrelatedEventInstance>> {
    let floor = match selection {
        Selection::MaxTrust => f64::NEG_INFINITY,
        Selection::Threshold(t) => t,
    };
    let mut opened: HashMap<CaseId, u64> = HashMap::new();
    for i in instances {
        if let Some(c) = i.case_id {
            let seq = opened.entry(c).or_insert(i.event_seq);
            *seq = (*seq).min(i.event_seq);
        }
    }
    let rank = |i: &CorrelatedEventInstance| i.case_id.map(|c| opened[&c]);

    let mut chosen: BTreeMap<EventKey, Option<&CorrelatedEventInstance>> = BTreeMap::new();
    for i in instances {
        let key = EventKey {
            timestamp: i.timestamp,
            activity: i.activity.clone(),
            ordinal: i.ordinal,
        };
        let slot = chosen.entry(key).or_insert(None);
        let Some(trust) = i.trust.filter(|&t| t >= floor) else {
            continue;
        };
        let better = match slot {
            None => true,
            Some(cur) => {
                let cur_trust = cur.trust.unwrap_or(f64::NEG_INFINITY);
                trust > cur_trust || (trust == cur_trust && rank(i) < rank(cur))
            }
        };
        if better {
            *slot = Some(i);
        }
    }
    chosen
}

/// Confusion counts of `instances` (a whole correlator store, noise
/// included) against `truth`.
pub fn score(
    instances: &[CorrelatedEventInstance],
    truth: &GroundTruth,
    selection: Selection,
) -> Result<ConfusionCounts, EvaluationError> {
    let chosen = select(instances, selection);
    let unexpected = chosen.keys().filter(|k| truth.get(k).is_none()).count();
    let missing = truth.len() - (chosen.len() - unexpected);
    if missing > 0 || unexpected > 0 {
        return Err(EvaluationError::PopulationMismatch { missing, unexpected });
    }

    let mut ordered: Vec<(&CorrelatedEventInstance, &str)> = chosen
        .iter()
        .filter_map(|(k, i)| i.map(|i| (i, truth.get(k).expect("checked above"))))
        .collect();
    ordered.sort_by_key(|(i, _)| i.event_seq);
    let mapping = align_cases(ordered.iter().map(|(i, t)| (i.case_id.expect("selected"), *t)));

    let mut counts = ConfusionCounts::default();
    for (key, instance) in &chosen {
        match instance {
            None => counts.fn_ += 1,
            Some(i) => {
                let aligned = mapping.get(&i.case_id.expect("selected")).map(String::as_str);
                if aligned == truth.get(key) {
                    counts.tp += 1;
                } else {
                    counts.fp += 1;
                }
            }
        }
    }
    Ok(counts)
}

fn ratio(num: u64, den: u64, what: &str) -> f64 {
    if den == 0 {
        log::warn!("{what}: zero denominator, reporting 0");
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// `tp / (tp + fp)`.
pub fn precision(c: ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fp, "precision")
}

/// `tp / (tp + fn)`.
pub fn recall(c: ConfusionCounts) -> f64 {
    ratio(c.tp, c.tp + c.fn_, "recall")
}

/// Harmonic mean of precision and recall.
pub fn f_score(c: ConfusionCounts) -> f64 {
    let (p, r) = (precision(c), recall(c));
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-event processing time in milliseconds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub mean: f64,
    pub p99: f64,
    pub max: f64,
}

/// `None` for an empty sample. The 99th percentile uses the nearest-rank
/// definition.
pub fn latency_report(latencies: &[Duration]) -> Option<LatencySummary> {
    if latencies.is_empty() {
        return None;
    }
    let mut ms: Vec<f64> = latencies.iter().map(|d| d.as_secs_f64() * 1e3).collect();
    ms.sort_by(f64::total_cmp);
    let rank = ((0.99 * ms.len() as f64).ceil() as usize).max(1);
    Some(LatencySummary {
        mean: ms.iter().sum::<f64>() / ms.len() as f64,
        p99: ms[rank - 1],
        max: ms[ms.len() - 1],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub latency_ms: LatencySummary,
}

impl Report {
    pub fn new(counts: ConfusionCounts, latency: Option<LatencySummary>) -> Self {
        Report {
            tp: counts.tp,
            fp: counts.fp,
            fn_: counts.fn_,
            precision: precision(counts),
            recall: recall(counts),
            f_score: f_score(counts),
            latency_ms: latency.unwrap_or_default(),
        }
    }
}
