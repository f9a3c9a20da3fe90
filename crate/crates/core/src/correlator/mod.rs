//! The correlation engine.
//!
//! A [`Correlator`] consumes [`UncorrelatedEvent`]s in timestamp order. An
//! event of a start activity opens a new case. Any other event is matched
//! against the live cases: a case qualifies when it holds instances of every
//! member of one dependency alternative of the event's activity and the time
//! elapsed since the latest of them lies within the activity's heuristic
//! bounds. Each such match is an [`Allocation`]. Allocations are weighted by
//! [`instance_probability`] and summed per case into a trust percentage.
//! Events with no allocation become noise instances.
//!
//! A synchronising alternative (two or more members) with a member that is
//! not a loop entry can place an activity in a case only once: a case that
//! already holds the activity at full trust through that alternative is
//! skipped. Single-member alternatives are never restricted this way.

mod export;
mod probability;
mod store;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dependencies::TaskDependencies;
use crate::heuristics::{Bounds, HeuristicTable};
use crate::time::Timestamp;

pub use export::{write_csv, CSV_HEADER};
pub use probability::{case_trust, instance_probability, DurationKind};
use store::ActivityId;
pub use store::CaseStore;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lifecycle {
    Started,
    #[default]
    Completed,
}

impl Lifecycle {
    pub fn as_str(self) -> &'static str {
        match self {
            Lifecycle::Started => "started",
            Lifecycle::Completed => "completed",
        }
    }
}

impl fmt::Display for Lifecycle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Lifecycle {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "started" | "start" => Ok(Lifecycle::Started),
            "completed" | "complete" | "" => Ok(Lifecycle::Completed),
            other => Err(format!("unknown lifecycle {other:?}")),
        }
    }
}

/// An event as observed on the stream, without a case identifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UncorrelatedEvent {
    pub timestamp: Timestamp,
    pub activity: String,
    #[serde(default)]
    pub lifecycle: Lifecycle,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub resource: Option<String>,
}

impl UncorrelatedEvent {
    pub fn new(timestamp: Timestamp, activity: impl Into<String>) -> Self {
        UncorrelatedEvent {
            timestamp,
            activity: activity.into(),
            lifecycle: Lifecycle::Completed,
            resource: None,
        }
    }

    pub fn with_lifecycle(mut self, lifecycle: Lifecycle) -> Self {
        self.lifecycle = lifecycle;
        self
    }

    pub fn with_resource(mut self, resource: impl Into<String>) -> Self {
        self.resource = Some(resource.into());
        self
    }
}

/// Dense, positive case identifier assigned in order of case creation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CaseId(pub u64);

impl fmt::Display for CaseId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One way of attaching an event to a case.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub case_id: CaseId,
    /// Index of the dependency alternative in the activity's ordered
    /// alternatives; `None` when pairing a completion with its start.
    pub alternative: Option<usize>,
    pub dependency_set: Vec<String>,
    pub anchor: Timestamp,
    pub duration: i64,
    pub kind: DurationKind,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum NoiseReason {
    UnknownActivity,
    NoAllocation,
}

impl fmt::Display for NoiseReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseReason::UnknownActivity => "UNKNOWN_ACTIVITY",
            NoiseReason::NoAllocation => "NO_ALLOCATION",
        })
    }
}

/// An event attached to one case, or a noise instance (`case_id` and
/// `trust` both `None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelatedEventInstance {
    /// Position of the source event in ingest order.
    pub event_seq: u64,
    /// Number of earlier events with the same timestamp and activity.
    pub ordinal: u32,
    pub timestamp: Timestamp,
    pub activity: String,
    pub lifecycle: Lifecycle,
    pub resource: Option<String>,
    pub case_id: Option<CaseId>,
    pub trust: Option<f64>,
    /// Trust before capping at 100.
    pub raw_trust: Option<f64>,
    pub allocations: Vec<Allocation>,
    pub noise: Option<NoiseReason>,
}

impl CorrelatedEventInstance {
    pub fn is_noise(&self) -> bool {
        self.case_id.is_none()
    }
}

/// Instances created for one ingested event.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestOutcome {
    pub instances: Vec<CorrelatedEventInstance>,
    /// Total number of allocations across all cases.
    pub m: usize,
}

impl IngestOutcome {
    pub fn noise(&self) -> Option<NoiseReason> {
        match self.instances.as_slice() {
            [only] => only.noise,
            _ => None,
        }
    }

    pub fn is_noise(&self) -> bool {
        self.noise().is_some()
    }

    pub fn case_ids(&self) -> Vec<CaseId> {
        self.instances.iter().filter_map(|i| i.case_id).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorrelateError {
    #[error("DEGENERATE_RANGE: activity {0} has min = max, so range-kind probabilities are undefined")]
    DegenerateRange(String),
    #[error("OUT_OF_ORDER: event at {got} arrived after {last}")]
    OutOfOrder { last: Timestamp, got: Timestamp },
    #[error("MIXED_LIFECYCLE: {found} event in a {mode} stream")]
    MixedLifecycle { mode: &'static str, found: Lifecycle },
    #[error("MISSING_HEURISTICS: no bounds for {}", .0.join(", "))]
    MissingHeuristics(Vec<String>),
    #[error("UNKNOWN_CASE: {0}")]
    UnknownCase(CaseId),
}

/// How lifecycle attributes are interpreted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LifecycleMode {
    /// Decide from the first event: a started event selects
    /// [`LifecycleMode::StartedCompleted`].
    #[default]
    Auto,
    CompletedOnly,
    StartedCompleted,
}

impl FromStr for LifecycleMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(LifecycleMode::Auto),
            "completed-only" | "completed" => Ok(LifecycleMode::CompletedOnly),
            "started-completed" | "lifecycle" => Ok(LifecycleMode::StartedCompleted),
            other => Err(format!("unknown lifecycle mode {other:?}")),
        }
    }
}

#[derive(Debug, Clone)]
struct CompiledAlternative {
    members: Vec<ActivityId>,
    labels: Vec<String>,
    /// Loop exclusion applies only to synchronising alternatives (two or
    /// more members) with a member that is not a loop entry.
    excludes_repeats: bool,
}

#[derive(Debug, Clone)]
struct CompiledModel {
    names: Vec<String>,
    ids: HashMap<String, ActivityId>,
    alternatives: Vec<Vec<CompiledAlternative>>,
    bounds: Vec<Bounds>,
}

impl CompiledModel {
    fn new(td: &TaskDependencies, heuristics: &HeuristicTable) -> Result<Self, CorrelateError> {
        let mut names: Vec<String> = td.activities().map(str::to_string).collect();
        for label in td.deps.values().flatten().flatten() {
            if !td.deps.contains_key(label) && !names.contains(label) {
                names.push(label.clone());
            }
        }
        let ids: HashMap<String, ActivityId> = names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();

        let missing: Vec<String> = names.iter().filter(|n| heuristics.get(n).is_none()).cloned().collect();
        if !missing.is_empty() {
            return Err(CorrelateError::MissingHeuristics(missing));
        }
        let bounds = names
            .iter()
            .map(|n| heuristics.get(n).expect("checked above"))
            .collect();

        let alternatives = names
            .iter()
            .map(|n| {
                td.alternatives(n)
                    .into_iter()
                    .flatten()
                    .map(|alt| CompiledAlternative {
                        members: alt.iter().map(|x| ids[x]).collect(),
                        labels: alt.iter().cloned().collect(),
                        excludes_repeats: alt.len() > 1 && alt.iter().any(|x| !td.is_loop_entry(x)),
                    })
                    .collect()
            })
            .collect();

        Ok(CompiledModel {
            names,
            ids,
            alternatives,
            bounds,
        })
    }

    fn is_start(&self, a: ActivityId) -> bool {
        self.alternatives[a].is_empty()
    }
}

/// Single-writer correlation state machine.
#[derive(Debug, Clone)]
pub struct Correlator {
    model: CompiledModel,
    store: CaseStore,
    mode: LifecycleMode,
    last_timestamp: Option<Timestamp>,
    next_seq: u64,
    same_instant: HashMap<String, u32>,
}

impl Correlator {
    /// Fails with `MissingHeuristics` unless every activity of `td` has bounds.
    pub fn new(td: &TaskDependencies, heuristics: &HeuristicTable) -> Result<Self, CorrelateError> {
        Self::with_mode(td, heuristics, LifecycleMode::Auto)
    }

    pub fn with_mode(
        td: &TaskDependencies,
        heuristics: &HeuristicTable,
        mode: LifecycleMode,
    ) -> Result<Self, CorrelateError> {
        let model = CompiledModel::new(td, heuristics)?;
        let store = CaseStore::with_activities(model.names.len());
        Ok(Correlator {
            model,
            store,
            mode,
            last_timestamp: None,
            next_seq: 0,
            same_instant: HashMap::new(),
        })
    }

    pub fn store(&self) -> &CaseStore {
        &self.store
    }

    pub fn mode(&self) -> LifecycleMode {
        self.mode
    }

    /// Correlates one event and records the resulting instances. On error the
    /// state is left untouched.
    pub fn ingest(&mut self, event: UncorrelatedEvent) -> Result<IngestOutcome, CorrelateError> {
        if let Some(last) = self.last_timestamp {
            if event.timestamp < last {
                return Err(CorrelateError::OutOfOrder {
                    last,
                    got: event.timestamp,
                });
            }
        }
        let mode = self.effective_mode(&event)?;

        let Some(&activity) = self.model.ids.get(&event.activity) else {
            let instance = self.noise_instance(&event, NoiseReason::UnknownActivity);
            self.commit(&event, mode);
            self.store.push(None, instance.clone());
            return Ok(IngestOutcome {
                instances: vec![instance],
                m: 0,
            });
        };

        let opens_case = self.model.is_start(activity)
            && (mode == LifecycleMode::CompletedOnly || event.lifecycle == Lifecycle::Started);
        if opens_case {
            self.commit(&event, mode);
            let instance = self.open_case(&event, activity);
            return Ok(IngestOutcome {
                instances: vec![instance],
                m: 1,
            });
        }

        let allocations = self.allocations_for(&event, activity, mode)?;
        if allocations.is_empty() {
            let instance = self.noise_instance(&event, NoiseReason::NoAllocation);
            self.commit(&event, mode);
            self.store.push(None, instance.clone());
            return Ok(IngestOutcome {
                instances: vec![instance],
                m: 0,
            });
        }

        let m = allocations.len();
        let (seq, ordinal) = self.commit(&event, mode);
        let mut per_case: BTreeMap<CaseId, Vec<Allocation>> = BTreeMap::new();
        for a in allocations {
            per_case.entry(a.case_id).or_default().push(a);
        }

        let mut instances = Vec::with_capacity(per_case.len());
        for (case, allocations) in per_case {
            let (trust, raw) = case_trust(allocations.iter().map(|a| a.probability));
            if event.lifecycle == Lifecycle::Completed && mode == LifecycleMode::StartedCompleted {
                close_paired_starts(&mut self.store, case, activity, &allocations);
            }
            if trust >= 100.0 {
                let record = self.store.record_mut(case);
                for a in &allocations {
                    if let Some(k) = a.alternative {
                        record.full_trust_via.insert((activity, k));
                    }
                }
            }
            let instance = CorrelatedEventInstance {
                event_seq: seq,
                ordinal,
                timestamp: event.timestamp,
                activity: event.activity.clone(),
                lifecycle: event.lifecycle,
                resource: event.resource.clone(),
                case_id: Some(case),
                trust: Some(trust),
                raw_trust: Some(raw),
                allocations,
                noise: None,
            };
            let idx = self.store.push(Some(activity), instance.clone());
            if event.lifecycle == Lifecycle::Started {
                self.store
                    .record_mut(case)
                    .open_starts
                    .entry(activity)
                    .or_default()
                    .push(idx);
            }
            instances.push(instance);
        }
        Ok(IngestOutcome { instances, m })
    }

    /// Allocations the event would receive against the current state, with
    /// probabilities. Start activities and unknown activities give none.
    pub fn candidate_allocations(&self, event: &UncorrelatedEvent) -> Result<Vec<Allocation>, CorrelateError> {
        let mode = match self.mode {
            LifecycleMode::Auto if event.lifecycle == Lifecycle::Started => LifecycleMode::StartedCompleted,
            LifecycleMode::Auto => LifecycleMode::CompletedOnly,
            m => m,
        };
        match self.model.ids.get(&event.activity) {
            Some(&a) if !(self.model.is_start(a) && event.lifecycle == Lifecycle::Started) => {
                if self.model.is_start(a) && mode == LifecycleMode::CompletedOnly {
                    return Ok(Vec::new());
                }
                self.allocations_for(event, a, mode)
            }
            _ => Ok(Vec::new()),
        }
    }

    /// Instances with trust at least `threshold`, ordered by timestamp, then
    /// case id, then arrival. Noise instances appear only at threshold 0.
    pub fn export_log(&self, threshold: f64) -> Vec<&CorrelatedEventInstance> {
        let mut out: Vec<&CorrelatedEventInstance> = self
            .store
            .instances()
            .iter()
            .filter(|i| match i.trust {
                Some(t) => t >= threshold,
                None => threshold <= 0.0,
            })
            .collect();
        out.sort_by_key(|i| (i.timestamp, i.case_id.is_none(), i.case_id, i.event_seq));
        out
    }

    pub fn case_view(&self, case: CaseId) -> Result<Vec<&CorrelatedEventInstance>, CorrelateError> {
        self.store
            .case_instances(case)
            .map(Iterator::collect)
            .ok_or(CorrelateError::UnknownCase(case))
    }

    fn effective_mode(&self, event: &UncorrelatedEvent) -> Result<LifecycleMode, CorrelateError> {
        match (self.mode, event.lifecycle) {
            (LifecycleMode::Auto, Lifecycle::Started) => Ok(LifecycleMode::StartedCompleted),
            (LifecycleMode::Auto, Lifecycle::Completed) => Ok(LifecycleMode::CompletedOnly),
            (LifecycleMode::CompletedOnly, Lifecycle::Started) => Err(CorrelateError::MixedLifecycle {
                mode: "completed-only",
                found: Lifecycle::Started,
            }),
            (m, _) => Ok(m),
        }
    }

    /// Advances sequence counters; returns `(event_seq, ordinal)`.
    fn commit(&mut self, event: &UncorrelatedEvent, mode: LifecycleMode) -> (u64, u32) {
        self.mode = mode;
        if self.last_timestamp != Some(event.timestamp) {
            self.same_instant.clear();
            self.last_timestamp = Some(event.timestamp);
        }
        let ordinal = self.same_instant.entry(event.activity.clone()).or_insert(0);
        let current = *ordinal;
        *ordinal += 1;
        let seq = self.next_seq;
        self.next_seq += 1;
        (seq, current)
    }

    fn noise_instance(&self, event: &UncorrelatedEvent, reason: NoiseReason) -> CorrelatedEventInstance {
        let ordinal = if self.last_timestamp == Some(event.timestamp) {
            self.same_instant.get(&event.activity).copied().unwrap_or(0)
        } else {
            0
        };
        CorrelatedEventInstance {
            event_seq: self.next_seq,
            ordinal,
            timestamp: event.timestamp,
            activity: event.activity.clone(),
            lifecycle: event.lifecycle,
            resource: event.resource.clone(),
            case_id: None,
            trust: None,
            raw_trust: None,
            allocations: Vec::new(),
            noise: Some(reason),
        }
    }

    fn open_case(&mut self, event: &UncorrelatedEvent, activity: ActivityId) -> CorrelatedEventInstance {
        let case = self.store.new_case();
        let instance = CorrelatedEventInstance {
            event_seq: self.next_seq - 1,
            ordinal: self.same_instant[&event.activity] - 1,
            timestamp: event.timestamp,
            activity: event.activity.clone(),
            lifecycle: event.lifecycle,
            resource: event.resource.clone(),
            case_id: Some(case),
            trust: Some(100.0),
            raw_trust: Some(100.0),
            allocations: Vec::new(),
            noise: None,
        };
        let idx = self.store.push(Some(activity), instance.clone());
        if event.lifecycle == Lifecycle::Started {
            self.store
                .record_mut(case)
                .open_starts
                .entry(activity)
                .or_default()
                .push(idx);
        }
        instance
    }

    fn allocations_for(
        &self,
        event: &UncorrelatedEvent,
        activity: ActivityId,
        mode: LifecycleMode,
    ) -> Result<Vec<Allocation>, CorrelateError> {
        let mut found = if mode == LifecycleMode::StartedCompleted && event.lifecycle == Lifecycle::Completed {
            self.pair_with_open_starts(event, activity)
        } else {
            self.dependency_allocations(event, activity, mode)
        };
        found.sort_by_key(|a| (a.case_id, a.alternative, a.anchor));

        let m = found.len();
        let bounds = self.model.bounds[activity];
        for a in &mut found {
            a.probability = instance_probability(m, a.kind, &event.activity, bounds)?;
        }
        Ok(found)
    }

    fn dependency_allocations(
        &self,
        event: &UncorrelatedEvent,
        activity: ActivityId,
        mode: LifecycleMode,
    ) -> Vec<Allocation> {
        let bounds = self.model.bounds[activity];
        let ts = event.timestamp;
        // A started event precedes its own execution, so the lower bound is
        // not yet known to hold.
        let started = mode == LifecycleMode::StartedCompleted;
        let (lo, hi) = if started {
            (ts.plus_seconds(-bounds.max), ts)
        } else {
            (ts.plus_seconds(-bounds.max), ts.plus_seconds(-bounds.min))
        };

        let mut out = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (k, alt) in self.model.alternatives[activity].iter().enumerate() {
            for &member in &alt.members {
                for &idx in self.store.activity_window(member, lo, hi) {
                    let anchor_instance = &self.store.instances[idx];
                    if anchor_instance.lifecycle != Lifecycle::Completed {
                        continue;
                    }
                    let case = anchor_instance.case_id.expect("indexed instances are correlated");
                    let anchor = anchor_instance.timestamp;
                    if !seen.insert((case, k, anchor)) {
                        continue;
                    }
                    let record = self.store.record(case).expect("case exists");
                    if alt.excludes_repeats && record.full_trust_via.contains(&(activity, k)) {
                        continue;
                    }
                    let synchronised = alt
                        .members
                        .iter()
                        .all(|x| record.first_completed.get(x).is_some_and(|&t| t <= anchor));
                    if !synchronised {
                        continue;
                    }
                    let duration = ts.since(anchor);
                    let kind = if started {
                        DurationKind::Avg
                    } else {
                        DurationKind::classify(duration, bounds)
                    };
                    out.push(Allocation {
                        case_id: case,
                        alternative: Some(k),
                        dependency_set: alt.labels.clone(),
                        anchor,
                        duration,
                        kind,
                        probability: 0.0,
                    });
                }
            }
        }
        out
    }

    fn pair_with_open_starts(&self, event: &UncorrelatedEvent, activity: ActivityId) -> Vec<Allocation> {
        let bounds = self.model.bounds[activity];
        let mut out = Vec::new();
        for (i, record) in self.store.cases.iter().enumerate() {
            let Some(open) = record.open_starts.get(&activity) else {
                continue;
            };
            let matched = open
                .iter()
                .map(|&idx| self.store.instances[idx].timestamp)
                .find(|&t| bounds.contains(event.timestamp.since(t)));
            if let Some(start) = matched {
                let duration = event.timestamp.since(start);
                out.push(Allocation {
                    case_id: CaseId(i as u64 + 1),
                    alternative: None,
                    dependency_set: vec![event.activity.clone()],
                    anchor: start,
                    duration,
                    kind: DurationKind::classify(duration, bounds),
                    probability: 0.0,
                });
            }
        }
        out
    }
}

fn close_paired_starts(store: &mut CaseStore, case: CaseId, activity: ActivityId, allocations: &[Allocation]) {
    for a in allocations {
        let record = store.record(case).expect("case exists");
        let Some(open) = record.open_starts.get(&activity) else {
            return;
        };
        if let Some(pos) = open.iter().position(|&idx| store.instances[idx].timestamp == a.anchor) {
            store
                .record_mut(case)
                .open_starts
                .get_mut(&activity)
                .expect("present")
                .remove(pos);
        }
    }
}
