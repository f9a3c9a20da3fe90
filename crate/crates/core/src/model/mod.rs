//! Workflow-net process models.
//!
//! A [`WorkflowNet`] is an immutable Petri net `(P, T, F)` whose flow relation
//! only connects places to transitions and transitions to places. Nets are
//! built through [`NetBuilder`], which rejects dangling references, duplicate
//! ids and non-bipartite arcs; the remaining workflow-net conditions (single
//! source and sink, connectedness, unique activity labels) are reported by
//! [`validate`] as diagnostics.
//!
//! Behavioural soundness (deadlock and livelock freedom) is not checked.
//! Correlation results on unsound nets may be wrong.

mod pnml;
mod simple;
mod validate;

use std::collections::{BTreeSet, HashMap};
use std::fmt;

use thiserror::Error;

pub use pnml::{parse_pnml, parse_pnml_with};
pub use simple::{parse_simple_net, parse_simple_net_with};
pub use validate::{validate, Diagnostic, DiagnosticCode, NetDiagnostics};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("no net")]
    NoNet,
    #[error("malformed XML: {0}")]
    Xml(String),
    #[error("duplicate node id {0:?}")]
    DuplicateId(String),
    #[error("arc references unknown node {0:?}")]
    UnknownNode(String),
    #[error("arc {from:?} -> {to:?} connects two nodes of the same kind")]
    NotBipartite { from: String, to: String },
    #[error("<{element}> is missing attribute {attribute:?}")]
    MissingAttribute {
        element: &'static str,
        attribute: &'static str,
    },
    #[error("unknown directive {0:?}")]
    UnknownDirective(String),
    #[error("{0}")]
    Syntax(String),
    #[error("line {line}, column {column}: {source}")]
    Located {
        line: u32,
        column: u32,
        #[source]
        source: Box<ModelError>,
    },
}

impl ModelError {
    pub(crate) fn at(self, line: u32, column: u32) -> Self {
        match self {
            located @ ModelError::Located { .. } => located,
            other => ModelError::Located {
                line,
                column,
                source: Box::new(other),
            },
        }
    }

    /// The error without any position wrapper.
    pub fn kind(&self) -> &ModelError {
        match self {
            ModelError::Located { source, .. } => source.kind(),
            other => other,
        }
    }
}

/// Labels that mark a transition as silent. Empty or missing labels are
/// always silent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SilentLabels(BTreeSet<String>);

impl SilentLabels {
    pub fn new<I, S>(labels: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        SilentLabels(labels.into_iter().map(Into::into).collect())
    }

    pub fn is_silent(&self, label: &str) -> bool {
        label.trim().is_empty() || self.0.contains(label)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl Default for SilentLabels {
    fn default() -> Self {
        SilentLabels::new(["tau"])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Place {
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transition {
    pub id: String,
    pub label: String,
    pub is_silent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRef {
    Place(usize),
    Transition(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowArc {
    pub source: String,
    pub target: String,
}

impl fmt::Display for FlowArc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}", self.source, self.target)
    }
}

/// An immutable workflow net.
#[derive(Debug, Clone)]
pub struct WorkflowNet {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    arcs: Vec<FlowArc>,
    index: HashMap<String, NodeRef>,
    // Producers / consumers of each place, input / output places of each transition.
    place_in: Vec<Vec<usize>>,
    place_out: Vec<Vec<usize>>,
    transition_in: Vec<Vec<usize>>,
    transition_out: Vec<Vec<usize>>,
}

impl WorkflowNet {
    pub fn places(&self) -> &[Place] {
        &self.places
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn arcs(&self) -> &[FlowArc] {
        &self.arcs
    }

    pub fn node(&self, id: &str) -> Option<NodeRef> {
        self.index.get(id).copied()
    }

    pub fn node_id(&self, node: NodeRef) -> &str {
        match node {
            NodeRef::Place(i) => &self.places[i].id,
            NodeRef::Transition(i) => &self.transitions[i].id,
        }
    }

    /// Labels of all non-silent transitions.
    pub fn activities(&self) -> BTreeSet<&str> {
        self.transitions
            .iter()
            .filter(|t| !t.is_silent)
            .map(|t| t.label.as_str())
            .collect()
    }

    /// Transitions producing into place `p` (`•p`).
    pub fn place_producers(&self, p: usize) -> &[usize] {
        &self.place_in[p]
    }

    /// Transitions consuming from place `p` (`p•`).
    pub fn place_consumers(&self, p: usize) -> &[usize] {
        &self.place_out[p]
    }

    /// Input places of transition `t` (`•t`).
    pub fn transition_inputs(&self, t: usize) -> &[usize] {
        &self.transition_in[t]
    }

    /// Output places of transition `t` (`t•`).
    pub fn transition_outputs(&self, t: usize) -> &[usize] {
        &self.transition_out[t]
    }

    pub(crate) fn successors(&self, node: NodeRef) -> Vec<NodeRef> {
        match node {
            NodeRef::Place(p) => self.place_out[p].iter().map(|&t| NodeRef::Transition(t)).collect(),
            NodeRef::Transition(t) => self.transition_out[t].iter().map(|&p| NodeRef::Place(p)).collect(),
        }
    }

    pub(crate) fn predecessors(&self, node: NodeRef) -> Vec<NodeRef> {
        match node {
            NodeRef::Place(p) => self.place_in[p].iter().map(|&t| NodeRef::Transition(t)).collect(),
            NodeRef::Transition(t) => self.transition_in[t].iter().map(|&p| NodeRef::Place(p)).collect(),
        }
    }

    fn lookup(&self, id: &str) -> Result<NodeRef, ModelError> {
        self.node(id).ok_or_else(|| ModelError::UnknownNode(id.to_string()))
    }

    /// Ids of the nodes with an arc into `id`.
    pub fn preset(&self, id: &str) -> Result<BTreeSet<&str>, ModelError> {
        let node = self.lookup(id)?;
        Ok(self.predecessors(node).into_iter().map(|n| self.node_id(n)).collect())
    }

    /// Ids of the nodes with an arc from `id`.
    pub fn postset(&self, id: &str) -> Result<BTreeSet<&str>, ModelError> {
        let node = self.lookup(id)?;
        Ok(self.successors(node).into_iter().map(|n| self.node_id(n)).collect())
    }

    /// Index of the non-silent transition carrying `label`.
    pub fn transition_by_label(&self, label: &str) -> Option<usize> {
        self.transitions.iter().position(|t| !t.is_silent && t.label == label)
    }
}

/// Incremental construction of a [`WorkflowNet`].
#[derive(Debug, Default)]
pub struct NetBuilder {
    places: Vec<Place>,
    transitions: Vec<Transition>,
    arcs: Vec<FlowArc>,
    index: HashMap<String, NodeRef>,
}

impl NetBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn claim(&mut self, id: &str, node: NodeRef) -> Result<(), ModelError> {
        if self.index.contains_key(id) {
            return Err(ModelError::DuplicateId(id.to_string()));
        }
        self.index.insert(id.to_string(), node);
        Ok(())
    }

    pub fn place(&mut self, id: impl Into<String>) -> Result<&mut Self, ModelError> {
        let id = id.into();
        self.claim(&id, NodeRef::Place(self.places.len()))?;
        self.places.push(Place { id });
        Ok(self)
    }

    pub fn transition(
        &mut self,
        id: impl Into<String>,
        label: impl Into<String>,
        is_silent: bool,
    ) -> Result<&mut Self, ModelError> {
        let id = id.into();
        self.claim(&id, NodeRef::Transition(self.transitions.len()))?;
        self.transitions.push(Transition {
            id,
            label: label.into(),
            is_silent,
        });
        Ok(self)
    }

    /// Adds an arc; both endpoints must already be declared. Repeated arcs
    /// are merged since the flow relation is a set.
    pub fn arc(&mut self, source: &str, target: &str) -> Result<&mut Self, ModelError> {
        let s = self
            .index
            .get(source)
            .ok_or_else(|| ModelError::UnknownNode(source.to_string()))?;
        let t = self
            .index
            .get(target)
            .ok_or_else(|| ModelError::UnknownNode(target.to_string()))?;
        let bipartite = matches!(
            (s, t),
            (NodeRef::Place(_), NodeRef::Transition(_)) | (NodeRef::Transition(_), NodeRef::Place(_))
        );
        if !bipartite {
            return Err(ModelError::NotBipartite {
                from: source.to_string(),
                to: target.to_string(),
            });
        }
        if !self.arcs.iter().any(|a| a.source == source && a.target == target) {
            self.arcs.push(FlowArc {
                source: source.to_string(),
                target: target.to_string(),
            });
        }
        Ok(self)
    }

    pub fn build(self) -> Result<WorkflowNet, ModelError> {
        if self.places.is_empty() && self.transitions.is_empty() {
            return Err(ModelError::NoNet);
        }
        let mut place_in = vec![Vec::new(); self.places.len()];
        let mut place_out = vec![Vec::new(); self.places.len()];
        let mut transition_in = vec![Vec::new(); self.transitions.len()];
        let mut transition_out = vec![Vec::new(); self.transitions.len()];
        for arc in &self.arcs {
            match (self.index[&arc.source], self.index[&arc.target]) {
                (NodeRef::Place(p), NodeRef::Transition(t)) => {
                    place_out[p].push(t);
                    transition_in[t].push(p);
                }
                (NodeRef::Transition(t), NodeRef::Place(p)) => {
                    transition_out[t].push(p);
                    place_in[p].push(t);
                }
                _ => unreachable!("arc() enforces bipartiteness"),
            }
        }
        Ok(WorkflowNet {
            places: self.places,
            transitions: self.transitions,
            arcs: self.arcs,
            index: self.index,
            place_in,
            place_out,
            transition_in,
            transition_out,
        })
    }
}
