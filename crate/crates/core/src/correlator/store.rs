//! In-memory correlation state.
//!
//! Instances live in one append-only arena. Two indexes point into it: per
//! case (ordered by arrival) and per activity (ordered by arrival, hence by
//! timestamp). Both cover exactly the correlated instances; noise instances
//! are only in the arena.

use std::collections::{HashMap, HashSet};

use super::{CaseId, CorrelatedEventInstance, Lifecycle};
use crate::time::Timestamp;

pub(crate) type ActivityId = usize;

#[derive(Debug, Clone, Default)]
pub(crate) struct CaseRecord {
    pub(crate) instances: Vec<usize>,
    pub(crate) by_activity: HashMap<ActivityId, Vec<usize>>,
    /// Earliest completed instance per activity, for synchronisation checks.
    pub(crate) first_completed: HashMap<ActivityId, Timestamp>,
    /// `(activity, alternative)` pairs this case already holds with trust 100.
    pub(crate) full_trust_via: HashSet<(ActivityId, usize)>,
    /// Started instances not yet paired with a completion, per activity.
    pub(crate) open_starts: HashMap<ActivityId, Vec<usize>>,
}

#[derive(Debug, Clone, Default)]
pub struct CaseStore {
    pub(crate) instances: Vec<CorrelatedEventInstance>,
    pub(crate) cases: Vec<CaseRecord>,
    pub(crate) by_activity: Vec<Vec<usize>>,
}

impl CaseStore {
    pub(crate) fn with_activities(count: usize) -> Self {
        CaseStore {
            instances: Vec::new(),
            cases: Vec::new(),
            by_activity: vec![Vec::new(); count],
        }
    }

    /// Every instance, noise included, in insertion order.
    pub fn instances(&self) -> &[CorrelatedEventInstance] {
        &self.instances
    }

    pub fn case_count(&self) -> usize {
        self.cases.len()
    }

    pub fn case_ids(&self) -> impl Iterator<Item = CaseId> {
        (1..=self.cases.len() as u64).map(CaseId)
    }

    pub fn contains_case(&self, case: CaseId) -> bool {
        self.record(case).is_some()
    }

    /// Instances of one case in arrival order.
    pub fn case_instances(&self, case: CaseId) -> Option<impl Iterator<Item = &CorrelatedEventInstance>> {
        self.record(case)
            .map(|r| r.instances.iter().map(move |&i| &self.instances[i]))
    }

    pub fn noise_count(&self) -> usize {
        self.instances.iter().filter(|i| i.case_id.is_none()).count()
    }

    pub(crate) fn record(&self, case: CaseId) -> Option<&CaseRecord> {
        let idx = usize::try_from(case.0).ok()?.checked_sub(1)?;
        self.cases.get(idx)
    }

    pub(crate) fn record_mut(&mut self, case: CaseId) -> &mut CaseRecord {
        &mut self.cases[case.0 as usize - 1]
    }

    pub(crate) fn new_case(&mut self) -> CaseId {
        self.cases.push(CaseRecord::default());
        CaseId(self.cases.len() as u64)
    }

    /// Indices into the activity index whose timestamps fall in `[lo, hi]`.
    pub(crate) fn activity_window(&self, activity: ActivityId, lo: Timestamp, hi: Timestamp) -> &[usize] {
        let list = &self.by_activity[activity];
        let start = list.partition_point(|&i| self.instances[i].timestamp < lo);
        let end = list.partition_point(|&i| self.instances[i].timestamp <= hi);
        if start >= end {
            &[]
        } else {
            &list[start..end]
        }
    }

    pub(crate) fn push(&mut self, activity: Option<ActivityId>, instance: CorrelatedEventInstance) -> usize {
        let idx = self.instances.len();
        if let (Some(case), Some(activity)) = (instance.case_id, activity) {
            let timestamp = instance.timestamp;
            let completed = instance.lifecycle == Lifecycle::Completed;
            self.by_activity[activity].push(idx);
            let record = self.record_mut(case);
            record.instances.push(idx);
            record.by_activity.entry(activity).or_default().push(idx);
            if completed {
                record.first_completed.entry(activity).or_insert(timestamp);
            }
        }
        self.instances.push(instance);
        idx
    }
}
