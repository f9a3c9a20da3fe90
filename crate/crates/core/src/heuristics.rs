//! Per-activity execution-duration bounds.
//!
//! Every activity has an inclusive integral window `[min, max]` (in whatever
//! unit the timestamps are differenced in, seconds here). The average is the
//! ceiling of the midpoint and the range is the window without the average.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::correlator::Lifecycle;
use crate::dependencies::TaskDependencies;
use crate::stream::LabeledEvent;
use crate::time::Timestamp;

#[derive(Debug, Error)]
pub enum HeuristicsError {
    #[error("unknown activity {0:?}")]
    UnknownActivity(String),
    #[error("row {row}: MIN_GT_MAX for {activity:?} ({min} > {max})")]
    MinGtMax {
        row: usize,
        activity: String,
        min: i64,
        max: i64,
    },
    #[error("row {row}: durations must be positive, got {min}..{max} for {activity:?}")]
    NonPositive {
        row: usize,
        activity: String,
        min: i64,
        max: i64,
    },
    #[error("row {row}: duplicate activity {activity:?}")]
    Duplicate { row: usize, activity: String },
    #[error("row {row}: {message}")]
    Malformed { row: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub min: i64,
    pub max: i64,
}

impl Bounds {
    /// Panics unless `0 < min <= max`.
    pub fn new(min: i64, max: i64) -> Self {
        assert!(0 < min && min <= max, "invalid bounds {min}..{max}");
        Bounds { min, max }
    }

    /// `⌈(min + max) / 2⌉`.
    pub fn avg(&self) -> i64 {
        (self.min + self.max + 1).div_euclid(2)
    }

    /// Inclusive on both ends.
    pub fn contains(&self, duration: i64) -> bool {
        self.min <= duration && duration <= self.max
    }

    /// `[min, max] \ {avg}`.
    pub fn range(&self) -> BTreeSet<i64> {
        let avg = self.avg();
        (self.min..=self.max).filter(|&d| d != avg).collect()
    }

    /// `|range| = max - min` without materialising the set.
    pub fn range_len(&self) -> u64 {
        (self.max - self.min) as u64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct HeuristicTable {
    entries: BTreeMap<String, Bounds>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    activity: String,
    min: i64,
    max: i64,
}

impl HeuristicTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics on invalid bounds, see [`Bounds::new`].
    pub fn insert(&mut self, activity: impl Into<String>, min: i64, max: i64) -> &mut Self {
        self.entries.insert(activity.into(), Bounds::new(min, max));
        self
    }

    pub fn get(&self, activity: &str) -> Option<Bounds> {
        self.entries.get(activity).copied()
    }

    pub fn bounds(&self, activity: &str) -> Result<Bounds, HeuristicsError> {
        self.get(activity)
            .ok_or_else(|| HeuristicsError::UnknownActivity(activity.to_string()))
    }

    pub fn avg_of(&self, activity: &str) -> Result<i64, HeuristicsError> {
        Ok(self.bounds(activity)?.avg())
    }

    pub fn range_of(&self, activity: &str) -> Result<BTreeSet<i64>, HeuristicsError> {
        Ok(self.bounds(activity)?.range())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, Bounds)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Reads the `activity,min,max` CSV format. An empty input is an empty
    /// table.
    pub fn load<R: io::Read>(reader: R) -> Result<Self, HeuristicsError> {
        let mut csv = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut table = HeuristicTable::new();
        for (i, record) in csv.deserialize::<Row>().enumerate() {
            let row = i + 2;
            let Row { activity, min, max } = record.map_err(|e| HeuristicsError::Malformed {
                row,
                message: e.to_string(),
            })?;
            if min > max {
                return Err(HeuristicsError::MinGtMax {
                    row,
                    activity,
                    min,
                    max,
                });
            }
            if min <= 0 {
                return Err(HeuristicsError::NonPositive {
                    row,
                    activity,
                    min,
                    max,
                });
            }
            if table.entries.contains_key(&activity) {
                return Err(HeuristicsError::Duplicate { row, activity });
            }
            table.entries.insert(activity, Bounds { min, max });
        }
        Ok(table)
    }

    pub fn load_str(text: &str) -> Result<Self, HeuristicsError> {
        Self::load(text.as_bytes())
    }

    pub fn save<W: io::Write>(&self, writer: W) -> Result<(), HeuristicsError> {
        let mut csv = csv::Writer::from_writer(writer);
        // Header is written explicitly so an empty table still carries it.
        csv.write_record(["activity", "min", "max"]).map_err(io::Error::from)?;
        for (activity, b) in &self.entries {
            csv.write_record([activity.as_str(), &b.min.to_string(), &b.max.to_string()])
                .map_err(io::Error::from)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn save_string(&self) -> String {
        let mut buf = Vec::new();
        self.save(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv output is UTF-8")
    }
}

/// Outcome of [`extract_heuristics`].
#[derive(Debug, Clone, Default)]
pub struct Extraction {
    pub table: HeuristicTable,
    /// Observations that were dropped, e.g. negative durations.
    pub warnings: Vec<String>,
    /// Activities that occur in the log but yielded no duration sample.
    pub unmeasured: BTreeSet<String>,
}

/// Derives `(min, max)` per activity from a labeled log.
///
/// When the log carries started events, a duration is `completed - started`
/// for the matching pair within a case. Otherwise it is the time since the
/// most recent satisfied dependency alternative in the same case, where an
/// alternative's anchor is the latest prior occurrence over all its members.
/// Start activities have nothing to measure against in that mode and end up
/// in [`Extraction::unmeasured`].
pub fn extract_heuristics(log: &[LabeledEvent], td: Option<&TaskDependencies>) -> Extraction {
    let lifecycle_pairs = log.iter().any(|e| e.event.lifecycle == Lifecycle::Started);
    let mut samples: BTreeMap<String, (i64, i64)> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    let mut warnings = Vec::new();

    let mut record = |activity: &str, duration: i64, at: Timestamp, warnings: &mut Vec<String>| {
        if duration < 0 {
            warnings.push(format!("negative duration {duration} for {activity} at {at}; ignored"));
            return;
        }
        samples
            .entry(activity.to_string())
            .and_modify(|(lo, hi)| {
                *lo = (*lo).min(duration);
                *hi = (*hi).max(duration);
            })
            .or_insert((duration, duration));
    };

    let mut by_case: BTreeMap<&str, Vec<&LabeledEvent>> = BTreeMap::new();
    for e in log {
        seen.insert(e.event.activity.clone());
        by_case.entry(e.case_id.as_str()).or_default().push(e);
    }

    for events in by_case.values() {
        if lifecycle_pairs {
            let mut open: HashMap<&str, Vec<Timestamp>> = HashMap::new();
            for e in events {
                let a = e.event.activity.as_str();
                match e.event.lifecycle {
                    Lifecycle::Started => open.entry(a).or_default().push(e.event.timestamp),
                    Lifecycle::Completed => {
                        if let Some(start) = open.get_mut(a).and_then(|v| (!v.is_empty()).then(|| v.remove(0))) {
                            record(a, e.event.timestamp.since(start), e.event.timestamp, &mut warnings);
                        }
                    }
                }
            }
        } else if let Some(td) = td {
            let mut latest: HashMap<&str, Timestamp> = HashMap::new();
            for e in events {
                let a = e.event.activity.as_str();
                let anchor = td.alternatives(a).and_then(|alts| {
                    alts.iter()
                        .filter_map(|alt| {
                            alt.iter()
                                .map(|x| latest.get(x.as_str()).copied())
                                .collect::<Option<Vec<_>>>()
                                .and_then(|ts| ts.into_iter().max())
                        })
                        .max()
                });
                if let Some(anchor) = anchor {
                    record(a, e.event.timestamp.since(anchor), e.event.timestamp, &mut warnings);
                }
                latest.insert(a, e.event.timestamp);
            }
        }
    }

    // A zero-length sample cannot be expressed with 0 < min; widen to 1.
    let mut table = HeuristicTable::new();
    for (activity, (lo, hi)) in &samples {
        table.insert(activity.clone(), (*lo).max(1), (*hi).max(1));
    }
    let unmeasured = seen.into_iter().filter(|a| table.get(a).is_none()).collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    Extraction {
        table,
        warnings,
        unmeasured,
    }
}
