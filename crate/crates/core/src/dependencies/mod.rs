//! Task dependencies derived from a workflow net.
//!
//! For every observable activity `a`, `deps(a)` is a set of alternatives; each
//! alternative is a set of activities that must all have been observed in a
//! case before an event of `a` can be correlated with that case. Start
//! activities have no alternatives at all.
//!
//! Derivation runs once per model:
//!
//! 1. per transition, an input place with several producers yields one
//!    singleton alternative per producer (exclusive choice); several input
//!    places yield the non-Cartesian product of their producer sets
//!    (synchronisation);
//! 2. silent transitions are replaced by their own alternatives until no
//!    silent label is left;
//! 3. loop entries are the dependencies whose edge into a multi-alternative
//!    activity lies on a cycle of the dependency graph.

mod graph;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::WorkflowNet;

pub use graph::DependencyGraph;

pub type LabelSet = BTreeSet<String>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DependencyError {
    #[error("a family of the non-Cartesian product is empty")]
    EmptyFamily,
    #[error("transition {0:?} synchronises on a place without producers")]
    UnproducedInput(String),
    #[error("transition {0:?} has no input place")]
    NoInputPlace(String),
    #[error("silent transition {silent:?} has no dependencies but is required by {required_by:?}")]
    VacuousSilent { silent: String, required_by: String },
    #[error("silent transitions form a cycle through {0:?}")]
    SilentCycle(String),
    #[error("invalid task dependency JSON: {0}")]
    Json(String),
}

/// `deps` plus the loop-entry flags.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskDependencies {
    pub deps: BTreeMap<String, BTreeSet<LabelSet>>,
    pub loop_entries: BTreeSet<String>,
}

impl TaskDependencies {
    pub fn activities(&self) -> impl Iterator<Item = &str> {
        self.deps.keys().map(String::as_str)
    }

    pub fn alternatives(&self, activity: &str) -> Option<&BTreeSet<LabelSet>> {
        self.deps.get(activity)
    }

    pub fn is_start(&self, activity: &str) -> bool {
        self.deps.get(activity).is_some_and(BTreeSet::is_empty)
    }

    pub fn is_loop_entry(&self, activity: &str) -> bool {
        self.loop_entries.contains(activity)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("string keys always serialise")
    }

    pub fn from_json(text: &str) -> Result<Self, DependencyError> {
        serde_json::from_str(text).map_err(|e| DependencyError::Json(e.to_string()))
    }
}

/// All sets built by choosing exactly one element from each family.
pub fn non_cartesian_product<S>(families: &[BTreeSet<S>]) -> Result<BTreeSet<BTreeSet<S>>, DependencyError>
where
    S: Ord + Clone,
{
    let mut acc: BTreeSet<BTreeSet<S>> = BTreeSet::from([BTreeSet::new()]);
    for family in families {
        if family.is_empty() {
            return Err(DependencyError::EmptyFamily);
        }
        acc = acc
            .iter()
            .flat_map(|partial| {
                family.iter().map(move |x| {
                    let mut s = partial.clone();
                    s.insert(x.clone());
                    s
                })
            })
            .collect();
    }
    Ok(acc)
}

/// Dependencies before silent-transition elimination, per transition index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawDependencies {
    pub per_transition: Vec<BTreeSet<BTreeSet<usize>>>,
}

/// Exclusive-choice and synchronisation alternatives for every transition,
/// silent ones included.
pub fn raw_dependencies(net: &WorkflowNet) -> Result<RawDependencies, DependencyError> {
    let mut per_transition = Vec::with_capacity(net.transitions().len());
    for (t, transition) in net.transitions().iter().enumerate() {
        let inputs = net.transition_inputs(t);
        let alternatives = match inputs {
            [] => return Err(DependencyError::NoInputPlace(transition.id.clone())),
            [p] => net.place_producers(*p).iter().map(|&x| BTreeSet::from([x])).collect(),
            places => {
                let families: Vec<BTreeSet<usize>> = places
                    .iter()
                    .map(|&p| net.place_producers(p).iter().copied().collect())
                    .collect();
                non_cartesian_product(&families).map_err(|_| DependencyError::UnproducedInput(transition.id.clone()))?
            }
        };
        per_transition.push(alternatives);
    }
    Ok(RawDependencies { per_transition })
}

/// Replaces every silent transition inside a dependency set by each of its
/// own alternatives, repeated through chains of silent transitions. Loop
/// entries are left empty.
pub fn eliminate_silent(raw: &RawDependencies, net: &WorkflowNet) -> Result<TaskDependencies, DependencyError> {
    let mut resolver = SilentResolver {
        raw,
        net,
        resolved: BTreeMap::new(),
    };
    let mut deps = BTreeMap::new();
    for (t, transition) in net.transitions().iter().enumerate() {
        if transition.is_silent {
            continue;
        }
        let mut alternatives = BTreeSet::new();
        for set in &raw.per_transition[t] {
            alternatives.extend(resolver.expand(set, &transition.label, &mut Vec::new())?);
        }
        deps.insert(transition.label.clone(), alternatives);
    }
    Ok(TaskDependencies {
        deps,
        loop_entries: BTreeSet::new(),
    })
}

struct SilentResolver<'a> {
    raw: &'a RawDependencies,
    net: &'a WorkflowNet,
    resolved: BTreeMap<usize, BTreeSet<LabelSet>>,
}

impl SilentResolver<'_> {
    fn expand(
        &mut self,
        set: &BTreeSet<usize>,
        required_by: &str,
        stack: &mut Vec<usize>,
    ) -> Result<BTreeSet<LabelSet>, DependencyError> {
        let mut families: Vec<BTreeSet<LabelSet>> = Vec::new();
        let mut observable = LabelSet::new();
        for &x in set {
            let tx = &self.net.transitions()[x];
            if !tx.is_silent {
                observable.insert(tx.label.clone());
                continue;
            }
            let alternatives = self.resolve(x, stack)?;
            if alternatives.is_empty() {
                return Err(DependencyError::VacuousSilent {
                    silent: tx.id.clone(),
                    required_by: required_by.to_string(),
                });
            }
            families.push(alternatives);
        }
        // Each silent member contributes one of its alternatives; the
        // product of label sets flattens by union.
        let mut out = BTreeSet::from([observable]);
        for family in families {
            out = out
                .iter()
                .flat_map(|partial| {
                    family
                        .iter()
                        .map(move |alt| partial.union(alt).cloned().collect::<LabelSet>())
                })
                .collect();
        }
        Ok(out)
    }

    fn resolve(&mut self, silent: usize, stack: &mut Vec<usize>) -> Result<BTreeSet<LabelSet>, DependencyError> {
        if let Some(done) = self.resolved.get(&silent) {
            return Ok(done.clone());
        }
        if stack.contains(&silent) {
            return Err(DependencyError::SilentCycle(self.net.transitions()[silent].id.clone()));
        }
        stack.push(silent);
        let id = self.net.transitions()[silent].id.clone();
        let mut out = BTreeSet::new();
        for set in &self.raw.per_transition[silent] {
            out.extend(self.expand(set, &id, stack)?);
        }
        stack.pop();
        self.resolved.insert(silent, out.clone());
        Ok(out)
    }
}

/// Dependencies `x` of a multi-alternative activity `t` such that the edge
/// `x -> t` lies on a cycle of the dependency graph.
pub fn find_loop_entries(td: &TaskDependencies) -> BTreeSet<String> {
    let graph = DependencyGraph::from_dependencies(td);
    let component = graph.component_ids();
    let mut entries = BTreeSet::new();
    for (t, alternatives) in &td.deps {
        if alternatives.len() < 2 {
            continue;
        }
        for x in alternatives.iter().flatten() {
            if component.get(x.as_str()) == component.get(t.as_str()) {
                entries.insert(x.clone());
            }
        }
    }
    entries
}

pub fn build_task_dependencies(net: &WorkflowNet) -> Result<TaskDependencies, DependencyError> {
    let raw = raw_dependencies(net)?;
    let mut td = eliminate_silent(&raw, net)?;
    td.loop_entries = find_loop_entries(&td);
    Ok(td)
}
