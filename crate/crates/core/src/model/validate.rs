use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::Serialize;

use super::{NodeRef, WorkflowNet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DiagnosticCode {
    EmptyNet,
    UniqueSource,
    UniqueSink,
    Connectivity,
    DuplicateLabel,
    /// Warning: a start activity can be re-enabled, which the correlator
    /// cannot tell apart from a new case.
    StartOnCycle,
}

impl fmt::Display for DiagnosticCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DiagnosticCode::EmptyNet => "EMPTY_NET",
            DiagnosticCode::UniqueSource => "UNIQUE_SOURCE",
            DiagnosticCode::UniqueSink => "UNIQUE_SINK",
            DiagnosticCode::Connectivity => "CONNECTIVITY",
            DiagnosticCode::DuplicateLabel => "DUPLICATE_LABEL",
            DiagnosticCode::StartOnCycle => "START_ON_CYCLE",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub code: DiagnosticCode,
    pub node: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Some(node) => write!(f, "{} [{}]: {}", self.code, node, self.message),
            None => write!(f, "{}: {}", self.code, self.message),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct NetDiagnostics {
    pub errors: Vec<Diagnostic>,
    pub warnings: Vec<Diagnostic>,
}

impl NetDiagnostics {
    pub fn is_ok(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_error(&self, code: DiagnosticCode) -> bool {
        self.errors.iter().any(|d| d.code == code)
    }

    fn error(&mut self, code: DiagnosticCode, node: Option<&str>, message: impl Into<String>) {
        self.errors.push(Diagnostic {
            code,
            node: node.map(str::to_string),
            message: message.into(),
        });
    }

    fn warning(&mut self, code: DiagnosticCode, node: Option<&str>, message: impl Into<String>) {
        self.warnings.push(Diagnostic {
            code,
            node: node.map(str::to_string),
            message: message.into(),
        });
    }
}

/// Structural workflow-net checks: one source place, one sink place, every
/// node on a source-to-sink path, unique labels on observable transitions.
/// Never fails; problems are returned as diagnostics.
pub fn validate(net: &WorkflowNet) -> NetDiagnostics {
    let mut diag = NetDiagnostics::default();
    if net.places().is_empty() || net.transitions().is_empty() {
        diag.error(
            DiagnosticCode::EmptyNet,
            None,
            "net needs at least one place and one transition",
        );
        return diag;
    }

    let sources: Vec<usize> = (0..net.places().len())
        .filter(|&p| net.place_producers(p).is_empty())
        .collect();
    let sinks: Vec<usize> = (0..net.places().len())
        .filter(|&p| net.place_consumers(p).is_empty())
        .collect();
    if sources.len() != 1 {
        let ids: Vec<&str> = sources.iter().map(|&p| net.places()[p].id.as_str()).collect();
        diag.error(
            DiagnosticCode::UniqueSource,
            ids.first().copied(),
            format!("expected exactly one source place, found {} {:?}", ids.len(), ids),
        );
    }
    if sinks.len() != 1 {
        let ids: Vec<&str> = sinks.iter().map(|&p| net.places()[p].id.as_str()).collect();
        diag.error(
            DiagnosticCode::UniqueSink,
            ids.first().copied(),
            format!("expected exactly one sink place, found {} {:?}", ids.len(), ids),
        );
    }

    if let ([source], [sink]) = (sources.as_slice(), sinks.as_slice()) {
        let forward = reachable(NodeRef::Place(*source), |n| net.successors(n));
        let backward = reachable(NodeRef::Place(*sink), |n| net.predecessors(n));
        let all_nodes = (0..net.places().len())
            .map(NodeRef::Place)
            .chain((0..net.transitions().len()).map(NodeRef::Transition));
        for node in all_nodes {
            let id = net.node_id(node);
            if !forward.contains(&node) {
                diag.error(
                    DiagnosticCode::Connectivity,
                    Some(id),
                    "not reachable from the source place",
                );
            } else if !backward.contains(&node) {
                diag.error(DiagnosticCode::Connectivity, Some(id), "cannot reach the sink place");
            }
        }

        for &t in net.place_consumers(*source) {
            let start = NodeRef::Transition(t);
            let after = net.successors(start);
            let cyclic = after
                .into_iter()
                .any(|n| reachable(n, |m| net.successors(m)).contains(&start));
            if cyclic {
                diag.warning(
                    DiagnosticCode::StartOnCycle,
                    Some(&net.transitions()[t].id),
                    "start transition lies on a cycle; repeated start events open new cases",
                );
            }
        }
    }

    let mut seen: HashMap<&str, &str> = HashMap::new();
    for t in net.transitions().iter().filter(|t| !t.is_silent) {
        if let Some(first) = seen.insert(&t.label, &t.id) {
            diag.error(
                DiagnosticCode::DuplicateLabel,
                Some(&t.id),
                format!("label {:?} already used by transition {first:?}", t.label),
            );
        }
    }
    diag
}

fn reachable<F>(from: NodeRef, next: F) -> HashSet<NodeRef>
where
    F: Fn(NodeRef) -> Vec<NodeRef>,
{
    let mut seen = HashSet::from([from]);
    let mut queue = VecDeque::from([from]);
    while let Some(n) = queue.pop_front() {
        for m in next(n) {
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    seen
}
