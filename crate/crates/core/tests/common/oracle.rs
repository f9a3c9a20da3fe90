//! Brute-force reference for completed-only correlation.
//!
//! Keeps a flat list of correlated instances and, for each event, enumerates
//! every (case, dependency alternative, choice of one instance per member)
//! triple. No indexes, no windows: the allocation rules are applied to each
//! combination directly.

use std::collections::{BTreeMap, BTreeSet};

use evcorr::{HeuristicTable, TaskDependencies, UncorrelatedEvent};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct OracleAllocation {
    pub case: u64,
    pub alternative: BTreeSet<String>,
    pub anchor: i64,
    pub duration: i64,
    pub avg: bool,
}

#[derive(Debug, Clone)]
struct Inst {
    case: u64,
    activity: String,
    ts: i64,
    /// Alternatives through which this instance reached trust 100.
    full_via: Vec<BTreeSet<String>>,
}

pub struct Oracle {
    td: TaskDependencies,
    h: HeuristicTable,
    cases: u64,
    instances: Vec<Inst>,
}

/// Instance probability written out independently of the library.
pub fn reference_probability(m: usize, avg: bool, min: i64, max: i64) -> f64 {
    if m == 1 {
        return 1.0;
    }
    let m = m as f64;
    let avg_value = (min + max) as f64 / 2.0;
    let avg_value = avg_value.ceil() as i64;
    let range = (min..=max).filter(|&d| d != avg_value).count() as f64;
    if avg {
        (m + 1.0) / (m * m)
    } else {
        (m - 1.0 / range) / (m * m)
    }
}

fn cartesian<'a>(choices: &[Vec<&'a Inst>]) -> Vec<Vec<&'a Inst>> {
    let mut out: Vec<Vec<&Inst>> = vec![Vec::new()];
    for options in choices {
        let mut next = Vec::new();
        for prefix in &out {
            for &o in options {
                let mut p = prefix.clone();
                p.push(o);
                next.push(p);
            }
        }
        out = next;
    }
    out
}

impl Oracle {
    pub fn new(td: &TaskDependencies, h: &HeuristicTable) -> Self {
        Oracle {
            td: td.clone(),
            h: h.clone(),
            cases: 0,
            instances: Vec::new(),
        }
    }

    pub fn allocations(&self, e: &UncorrelatedEvent) -> BTreeSet<OracleAllocation> {
        let mut out = BTreeSet::new();
        let Some(alternatives) = self.td.deps.get(&e.activity) else {
            return out;
        };
        let b = self.h.get(&e.activity).expect("bounds");
        let ts = e.timestamp.seconds();
        let avg = ((b.min + b.max) as f64 / 2.0).ceil() as i64;
        for case in 1..=self.cases {
            for alt in alternatives {
                let excluded = alt.len() > 1
                    && alt.iter().any(|x| !self.td.loop_entries.contains(x))
                    && self
                        .instances
                        .iter()
                        .any(|i| i.case == case && i.activity == e.activity && i.full_via.contains(alt));
                if excluded {
                    continue;
                }
                let choices: Vec<Vec<&Inst>> = alt
                    .iter()
                    .map(|x| {
                        self.instances
                            .iter()
                            .filter(|i| i.case == case && &i.activity == x)
                            .collect()
                    })
                    .collect();
                for combo in cartesian(&choices) {
                    let anchor = combo.iter().map(|i| i.ts).max().expect("non-empty alternative");
                    let duration = ts - anchor;
                    if b.min <= duration && duration <= b.max {
                        out.insert(OracleAllocation {
                            case,
                            alternative: alt.clone(),
                            anchor,
                            duration,
                            avg: duration == avg,
                        });
                    }
                }
            }
        }
        out
    }

    /// Applies the event and returns trust per case (empty for noise).
    pub fn ingest(&mut self, e: &UncorrelatedEvent) -> BTreeMap<u64, f64> {
        let Some(alternatives) = self.td.deps.get(&e.activity) else {
            return BTreeMap::new();
        };
        if alternatives.is_empty() {
            self.cases += 1;
            self.instances.push(Inst {
                case: self.cases,
                activity: e.activity.clone(),
                ts: e.timestamp.seconds(),
                full_via: Vec::new(),
            });
            return BTreeMap::from([(self.cases, 100.0)]);
        }
        let allocations = self.allocations(e);
        let b = self.h.get(&e.activity).expect("bounds");
        let m = allocations.len();
        let mut trust: BTreeMap<u64, f64> = BTreeMap::new();
        let mut via: BTreeMap<u64, Vec<BTreeSet<String>>> = BTreeMap::new();
        for a in &allocations {
            *trust.entry(a.case).or_default() += 100.0 * reference_probability(m, a.avg, b.min, b.max);
            via.entry(a.case).or_default().push(a.alternative.clone());
        }
        for (&case, t) in trust.iter_mut() {
            *t = t.min(100.0);
            let full_via = if *t >= 100.0 {
                via.remove(&case).unwrap_or_default()
            } else {
                Vec::new()
            };
            self.instances.push(Inst {
                case,
                activity: e.activity.clone(),
                ts: e.timestamp.seconds(),
                full_via,
            });
        }
        trust
    }
}
