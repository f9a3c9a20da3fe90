use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;

use super::TaskDependencies;

/// Activity-level causal graph: an edge `(x, t)` for every `x` in some
/// dependency set of `t`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DependencyGraph {
    pub nodes: BTreeSet<String>,
    pub edges: BTreeSet<(String, String)>,
}

impl DependencyGraph {
    pub fn from_dependencies(td: &TaskDependencies) -> Self {
        let mut nodes = BTreeSet::new();
        let mut edges = BTreeSet::new();
        for (t, alternatives) in &td.deps {
            nodes.insert(t.clone());
            for x in alternatives.iter().flatten() {
                nodes.insert(x.clone());
                edges.insert((x.clone(), t.clone()));
            }
        }
        DependencyGraph { nodes, edges }
    }

    /// Strongly-connected-component index of every node. Two nodes share an
    /// index iff each reaches the other.
    pub fn component_ids(&self) -> BTreeMap<&str, usize> {
        let mut g: DiGraphMap<&str, ()> = DiGraphMap::new();
        for n in &self.nodes {
            g.add_node(n);
        }
        for (x, t) in &self.edges {
            g.add_edge(x, t, ());
        }
        tarjan_scc(&g)
            .into_iter()
            .enumerate()
            .flat_map(|(i, comp)| comp.into_iter().map(move |n| (n, i)))
            .collect()
    }

    /// Whether the edge `x -> t` closes a cycle.
    pub fn edge_on_cycle(&self, x: &str, t: &str) -> bool {
        if !self.edges.contains(&(x.to_string(), t.to_string())) {
            return false;
        }
        let ids = self.component_ids();
        ids.get(x) == ids.get(t)
    }
}
