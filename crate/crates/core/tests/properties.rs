mod common;

use std::collections::{BTreeMap, BTreeSet};

use common::oracle::{reference_probability, Oracle};
use common::sim::{simulate_log, simulate_trace};
use common::small::{as_oracle, setup, small_stream, Setup};
use evcorr::correlator::write_csv;
use evcorr::evaluation::{align_cases, f_score, precision, recall, score, Selection};
use evcorr::heuristics::extract_heuristics;
use evcorr::stream::{replay, strip_case_ids, LabeledEvent, VirtualClock};
use evcorr::{Bounds, CaseId, CorrelatedEventInstance, Correlator, DurationKind, UncorrelatedEvent};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn correlate(s: &Setup, events: &[UncorrelatedEvent]) -> Correlator {
    let mut c = Correlator::new(&s.td, &s.h).unwrap();
    for e in events {
        c.ingest(e.clone()).unwrap();
    }
    c
}

fn csv_bytes(c: &Correlator) -> Vec<u8> {
    let mut out = Vec::new();
    write_csv(&mut out, c.export_log(0.0)).unwrap();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn candidate_allocations_match_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = setup(&mut rng);
        let events = small_stream(&s, &mut rng);
        let mut c = Correlator::new(&s.td, &s.h).unwrap();
        let mut oracle = Oracle::new(&s.td, &s.h);
        for e in &events {
            if !s.td.is_start(&e.activity) {
                let got = as_oracle(&c.candidate_allocations(e).unwrap());
                prop_assert_eq!(got, oracle.allocations(e), "event {:?}", e);
            }
            let expected = oracle.ingest(e);
            let out = c.ingest(e.clone()).unwrap();
            let got: BTreeMap<u64, f64> = out.instances.iter().filter_map(|i| Some((i.case_id?.0, i.trust?))).collect();
            prop_assert_eq!(got.keys().collect::<Vec<_>>(), expected.keys().collect::<Vec<_>>());
            for (k, t) in &got {
                prop_assert!((t - expected[k]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn strip_then_relabel_is_identity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = setup(&mut rng);
        let log = simulate_log(&s.net, &s.h, &mut rng, 3, 0..=5, 60);
        let (events, truth) = strip_case_ids(&log);
        prop_assert_eq!(events.len(), log.len());
        prop_assert_eq!(truth.len(), log.len());
        prop_assert_eq!(truth.relabel(&events).unwrap(), log);
    }

    #[test]
    fn correlation_is_deterministic(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = setup(&mut rng);
        let events = small_stream(&s, &mut rng);
        prop_assert_eq!(csv_bytes(&correlate(&s, &events)), csv_bytes(&correlate(&s, &events)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn dependency_alternatives_explain_every_trace(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = setup(&mut rng);
        let silent: BTreeSet<&str> = s.net.transitions().iter().filter(|t| t.is_silent).map(|t| t.id.as_str()).collect();
        for alts in s.td.deps.values() {
            prop_assert!(alts.iter().flatten().all(|x| !silent.contains(x.as_str()) && x != "tau"));
        }
        let multi: BTreeSet<&String> = s.td.deps.values().filter(|a| a.len() >= 2).flatten().flatten().collect();
        prop_assert!(s.td.loop_entries.iter().all(|x| multi.contains(x)));

        for _ in 0..5 {
            let Some(trace) = simulate_trace(&s.net, &s.h, &mut rng, 0, 80) else { continue };
            let mut fired: BTreeSet<&str> = BTreeSet::new();
            for (i, (_, a)) in trace.iter().enumerate() {
                if i > 0 {
                    let alts = &s.td.deps[a];
                    prop_assert!(
                        alts.iter().any(|d| d.iter().all(|x| fired.contains(x.as_str()))),
                        "{} fired without any of {:?}", a, alts
                    );
                }
                fired.insert(a);
            }
        }
    }

    #[test]
    fn instances_are_justified_by_the_store(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = setup(&mut rng);
        let events = small_stream(&s, &mut rng);
        let mut c = Correlator::new(&s.td, &s.h).unwrap();
        for e in events {
            let out = c.ingest(e.clone()).unwrap();
            let m = out.m;
            for inst in &out.instances {
                let (Some(case), Some(trust)) = (inst.case_id, inst.trust) else {
                    prop_assert!(inst.trust.is_none() && inst.noise.is_some());
                    continue;
                };
                prop_assert!(trust > 0.0 && trust <= 100.0);
                if s.td.is_start(&inst.activity) {
                    prop_assert_eq!(trust, 100.0);
                    continue;
                }
                let b = s.h.get(&inst.activity).unwrap();
                let history: Vec<&CorrelatedEventInstance> = c
                    .case_view(case)
                    .unwrap()
                    .into_iter()
                    .filter(|i| i.event_seq < inst.event_seq)
                    .collect();
                for a in &inst.allocations {
                    prop_assert!(b.contains(a.duration));
                    prop_assert!(a.probability > 0.0 && a.probability <= 1.0);
                    if m == 1 {
                        prop_assert_eq!(a.probability, 1.0);
                    }
                    for x in &a.dependency_set {
                        prop_assert!(history.iter().any(|h| &h.activity == x && h.timestamp <= a.anchor));
                    }
                    prop_assert!(history.iter().any(|h| a.dependency_set.contains(&h.activity) && h.timestamp == a.anchor));
                }
            }
        }
    }

    #[test]
    fn heuristic_invariants(min in 1i64..50, extra in 0i64..50) {
        let b = Bounds::new(min, min + extra);
        let avg = b.avg();
        prop_assert!(b.contains(avg));
        let mut full = b.range();
        prop_assert_eq!(full.len() as u64, b.range_len());
        prop_assert_eq!(b.range_len() as i64, b.max - b.min);
        prop_assert!(full.insert(avg));
        prop_assert_eq!(full, (b.min..=b.max).collect::<BTreeSet<_>>());
    }

    #[test]
    fn probability_orders_avg_above_range(m in 2usize..40, min in 1i64..20, extra in 1i64..20) {
        let (lo, hi) = (min, min + extra);
        let b = Bounds::new(lo, hi);
        let avg = evcorr::correlator::instance_probability(m, DurationKind::Avg, "a", b).unwrap();
        let range = evcorr::correlator::instance_probability(m, DurationKind::Range, "a", b).unwrap();
        prop_assert!(avg > range);
        prop_assert!((avg - reference_probability(m, true, lo, hi)).abs() < 1e-12);
        prop_assert!((range - reference_probability(m, false, lo, hi)).abs() < 1e-12);
    }

    #[test]
    fn extracted_bounds_lie_within_generating_bounds(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = setup(&mut rng);
        let log = simulate_log(&s.net, &s.h, &mut rng, 4, 0..=20, 60);
        let extraction = extract_heuristics(&log, Some(&s.td));
        prop_assert!(extraction.warnings.is_empty());
        for (a, got) in extraction.table.iter() {
            let want = s.h.get(a).unwrap();
            prop_assert!(want.min <= got.min && got.max <= want.max, "{}: {:?} not within {:?}", a, got, want);
        }
    }

    #[test]
    fn scores_are_bounded_and_monotone(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = setup(&mut rng);
        let cases = rng.random_range(1..=5);
        let log = simulate_log(&s.net, &s.h, &mut rng, cases, 0..=6, 60);
        let (events, truth) = strip_case_ids(&log);
        let c = correlate(&s, &events);
        let instances = c.store().instances();

        let mut last = u64::MAX;
        for t in [0.0, 20.0, 40.0, 60.0, 80.0, 100.0] {
            let counts = score(instances, &truth, Selection::Threshold(t)).unwrap();
            prop_assert_eq!(counts.tp + counts.fp + counts.fn_, events.len() as u64);
            prop_assert!(counts.tp + counts.fp <= last);
            last = counts.tp + counts.fp;
        }

        let counts = score(instances, &truth, Selection::MaxTrust).unwrap();
        let (p, r, f) = (precision(counts), recall(counts), f_score(counts));
        for v in [p, r, f] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        prop_assert!(f <= p.max(r) + 1e-12);
        prop_assert_eq!(f == 0.0, p == 0.0 || r == 0.0);

        // Renaming predicted cases by a random permutation.
        let n = c.store().case_count() as u64;
        let mut perm: Vec<u64> = (1..=n).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let renamed: Vec<CorrelatedEventInstance> = instances
            .iter()
            .cloned()
            .map(|mut i| {
                i.case_id = i.case_id.map(|c| CaseId(perm[c.0 as usize - 1] + 100));
                i
            })
            .collect();
        prop_assert_eq!(score(&renamed, &truth, Selection::MaxTrust).unwrap(), counts);
    }

    #[test]
    fn replay_content_ignores_speedup(seed in any::<u64>(), speedup in 0.5f64..1e6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let s = setup(&mut rng);
        let events: Vec<UncorrelatedEvent> = simulate_log(&s.net, &s.h, &mut rng, 2, 0..=5, 60)
            .into_iter()
            .map(|l: LabeledEvent| l.event)
            .collect();
        let collect = |speedup: f64| {
            let mut seen = Vec::new();
            replay(&events, speedup, &mut VirtualClock::default(), |e| {
                seen.push(e.clone());
                Ok::<_, ()>(())
            })
            .unwrap();
            seen
        };
        prop_assert_eq!(collect(speedup), collect(f64::INFINITY));
    }
}

#[test]
fn alignment_ignores_id_spelling() {
    let a = align_cases([(CaseId(1), "x"), (CaseId(2), "y"), (CaseId(1), "y"), (CaseId(2), "x")]);
    let b = align_cases([(CaseId(9), "x"), (CaseId(3), "y"), (CaseId(9), "y"), (CaseId(3), "x")]);
    assert_eq!(a[&CaseId(1)], b[&CaseId(9)]);
    assert_eq!(a[&CaseId(2)], b[&CaseId(3)]);
}
