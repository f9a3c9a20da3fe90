//! Small random instances: a generated net, random heuristics and a short
//! stream of overlapping cases with some stray events mixed in.

use std::collections::BTreeSet;

use evcorr::{
    build_task_dependencies, model, DurationKind, HeuristicTable, TaskDependencies, Timestamp, UncorrelatedEvent,
    WorkflowNet,
};
use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::nets::random_net;
use super::oracle::OracleAllocation;
use super::sim::{random_heuristics, simulate_log};

pub struct Setup {
    pub net: WorkflowNet,
    pub td: TaskDependencies,
    pub h: HeuristicTable,
}

pub fn setup(rng: &mut ChaCha8Rng) -> Setup {
    let generated = random_net(rng, 15);
    let net = model::parse_simple_net(&generated.simple).unwrap();
    let td = build_task_dependencies(&net).unwrap();
    let h = random_heuristics(&net, rng);
    Setup { net, td, h }
}

/// Up to 30 events: a few overlapping simulated cases, sometimes with
/// foreign or out-of-place events mixed in.
pub fn small_stream(s: &Setup, rng: &mut ChaCha8Rng) -> Vec<UncorrelatedEvent> {
    let cases = rng.random_range(1..=4);
    let log = simulate_log(&s.net, &s.h, rng, cases, 0..=8, 60);
    let mut events: Vec<UncorrelatedEvent> = log.into_iter().take(30).map(|l| l.event).collect();
    if rng.random_bool(0.5) && !events.is_empty() {
        let activities: Vec<String> = s.td.activities().map(str::to_string).chain(["Z".to_string()]).collect();
        let last = events.last().unwrap().timestamp.seconds();
        for _ in 0..rng.random_range(1..=4) {
            if events.len() >= 30 {
                break;
            }
            let a = activities.choose(rng).unwrap().clone();
            events.push(UncorrelatedEvent::new(
                Timestamp::from_seconds(rng.random_range(0..=last)),
                a,
            ));
        }
        events.sort_by_key(|e| e.timestamp);
    }
    events
}

pub fn as_oracle(allocations: &[evcorr::Allocation]) -> BTreeSet<OracleAllocation> {
    allocations
        .iter()
        .map(|a| OracleAllocation {
            case: a.case_id.0,
            alternative: a.dependency_set.iter().cloned().collect(),
            anchor: a.anchor.seconds(),
            duration: a.duration,
            avg: a.kind == DurationKind::Avg,
        })
        .collect()
}
