//! Timed token-game simulation producing labeled logs.
//!
//! A visible transition fires at `max(input token times) + d` with `d` drawn
//! uniformly from the activity's heuristic bounds; silent transitions take no
//! time. Enabled transitions are picked uniformly, which resolves choices and
//! loop exits at random.

use std::collections::BTreeMap;

use evcorr::stream::LabeledEvent;
use evcorr::{HeuristicTable, Timestamp, UncorrelatedEvent, WorkflowNet};
use rand::seq::IndexedRandom;
use rand::Rng;

fn source_and_sink(net: &WorkflowNet) -> (usize, usize) {
    let n = net.places().len();
    let source = (0..n)
        .find(|&p| net.place_producers(p).is_empty())
        .expect("source place");
    let sink = (0..n).find(|&p| net.place_consumers(p).is_empty()).expect("sink place");
    (source, sink)
}

/// One trace as `(timestamp, label)` in firing order, or `None` if it did
/// not reach the sink within `max_steps` firings.
pub fn simulate_trace<R: Rng>(
    net: &WorkflowNet,
    h: &HeuristicTable,
    rng: &mut R,
    start: i64,
    max_steps: usize,
) -> Option<Vec<(i64, String)>> {
    let (source, sink) = source_and_sink(net);
    // Token times per place; a safe net holds at most one token per place,
    // but nothing here relies on it.
    let mut marking: BTreeMap<usize, Vec<i64>> = BTreeMap::from([(source, vec![start])]);
    let mut trace = Vec::new();
    for _ in 0..max_steps {
        if marking.len() == 1 && marking.get(&sink).is_some_and(|v| v.len() == 1) {
            return Some(trace);
        }
        let enabled: Vec<usize> = (0..net.transitions().len())
            .filter(|&t| {
                let inputs = net.transition_inputs(t);
                !inputs.is_empty() && inputs.iter().all(|p| marking.get(p).is_some_and(|v| !v.is_empty()))
            })
            .collect();
        let &t = enabled.choose(rng)?;
        let mut ready = i64::MIN;
        for p in net.transition_inputs(t) {
            let tokens = marking.get_mut(p).expect("enabled");
            ready = ready.max(tokens.remove(0));
            if tokens.is_empty() {
                marking.remove(p);
            }
        }
        let tr = &net.transitions()[t];
        let at = if tr.is_silent {
            ready
        } else {
            let b = h.get(&tr.label).expect("bounds for every activity");
            let at = ready + rng.random_range(b.min..=b.max);
            trace.push((at, tr.label.clone()));
            at
        };
        for &p in net.transition_outputs(t) {
            marking.entry(p).or_default().push(at);
        }
    }
    None
}

/// `cases` traces started `gap` apart (`gap` drawn per case), merged into one
/// log ordered by timestamp. Case ids are `"1"`, `"2"`, ...
pub fn simulate_log<R: Rng>(
    net: &WorkflowNet,
    h: &HeuristicTable,
    rng: &mut R,
    cases: usize,
    gap: std::ops::RangeInclusive<i64>,
    max_steps: usize,
) -> Vec<LabeledEvent> {
    let mut rows: Vec<(i64, usize, String)> = Vec::new();
    let mut start = 0;
    let mut made = 0;
    while made < cases {
        let Some(trace) = simulate_trace(net, h, rng, start, max_steps) else {
            continue;
        };
        made += 1;
        for (t, a) in trace {
            rows.push((t, made, a));
        }
        start += rng.random_range(gap.clone());
    }
    // Stable: within a case, firing order breaks timestamp ties.
    rows.sort_by_key(|r| r.0);
    rows.into_iter()
        .map(|(t, case, a)| LabeledEvent {
            event: UncorrelatedEvent::new(Timestamp::from_seconds(t), a),
            case_id: case.to_string(),
        })
        .collect()
}

/// Random bounds for every observable activity of `net`.
pub fn random_heuristics<R: Rng>(net: &WorkflowNet, rng: &mut R) -> HeuristicTable {
    let mut h = HeuristicTable::new();
    for a in net.activities() {
        let min = rng.random_range(1..=4);
        let max = min + rng.random_range(0..=6);
        h.insert(a, min, max);
    }
    h
}
