//! Circuit construction over the QKDN topology.
//!
//! A circuit is the ordered node path from initiator to destination,
//! destination included. Routing picks the path with the fewest
//! intermediate nodes; among equal-length paths the lexicographically
//! smallest node sequence wins, so construction is deterministic.

use alloc::borrow::ToOwned;
use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::CircuitError;

/// Identifier of a QKD node / SAE.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        NodeId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Undirected adjacency over QKD links.
#[derive(Debug, Clone, Default)]
pub struct Topology {
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

impl Topology {
    pub fn new() -> Self {
        Self::default()
    }

    /// Build a line topology over the given nodes, linking each to the next.
    pub fn line(nodes: &[NodeId]) -> Self {
        let mut topo = Topology::new();
        for pair in nodes.windows(2) {
            topo.add_link(pair[0].clone(), pair[1].clone());
        }
        topo
    }

    pub fn add_link(&mut self, a: NodeId, b: NodeId) {
        self.adjacency.entry(a.clone()).or_default().insert(b.clone());
        self.adjacency.entry(b).or_default().insert(a);
    }

    pub fn contains(&self, node: &NodeId) -> bool {
        self.adjacency.contains_key(node)
    }

    pub fn neighbors(&self, node: &NodeId) -> impl Iterator<Item = &NodeId> {
        self.adjacency.get(node).into_iter().flatten()
    }
}

/// The ordered node path `[initiator, intermediates.., destination]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    nodes: Vec<NodeId>,
}

impl Circuit {
    /// Validate and wrap an explicit node path.
    pub fn new(nodes: Vec<NodeId>) -> Result<Self, CircuitError> {
        if nodes.len() < 2 {
            return Err(CircuitError::Invalid("fewer than two nodes"));
        }
        let distinct: BTreeSet<_> = nodes.iter().collect();
        if distinct.len() != nodes.len() {
            return Err(CircuitError::Invalid("duplicate node"));
        }
        Ok(Circuit { nodes })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction requires at least two nodes
    }

    pub fn initiator(&self) -> &NodeId {
        &self.nodes[0]
    }

    pub fn destination(&self) -> &NodeId {
        &self.nodes[self.nodes.len() - 1]
    }

    /// Circuit members other than the initiator, in path order.
    pub fn relays(&self) -> &[NodeId] {
        &self.nodes[1..]
    }

    /// Intermediate nodes: everything strictly between the endpoints.
    pub fn intermediates(&self) -> &[NodeId] {
        &self.nodes[1..self.nodes.len() - 1]
    }

    /// Adjacent pairs, one per QKD link along the path.
    pub fn links(&self) -> impl Iterator<Item = (&NodeId, &NodeId)> {
        self.nodes.windows(2).map(|w| (&w[0], &w[1]))
    }

    pub fn position(&self, node: &NodeId) -> Option<usize> {
        self.nodes.iter().position(|n| n == node)
    }
}

/// Find the shortest path from `src` to `dst` by hop count.
///
/// Ties are broken by comparing the full node sequences lexicographically,
/// which reduces to the usual "smaller intermediate wins" rule.
pub fn build_circuit(topo: &Topology, src: &NodeId, dst: &NodeId) -> Result<Circuit, CircuitError> {
    if src == dst {
        return Err(CircuitError::SameEndpoints);
    }
    for node in [src, dst] {
        if !topo.contains(node) {
            return Err(CircuitError::UnknownNode { node: node.clone() });
        }
    }

    // BFS by layers; best_path(v) = min over predecessors of best_path(u) ++ v.
    // Paths within a layer all have equal length, so lexicographic comparison
    // of whole sequences is well defined.
    let mut best: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    best.insert(src.clone(), alloc::vec![src.clone()]);
    let mut frontier: VecDeque<NodeId> = VecDeque::new();
    frontier.push_back(src.clone());

    while !frontier.is_empty() {
        let mut next_layer: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for node in frontier.drain(..) {
            let path = best[&node].clone();
            for neighbor in topo.neighbors(&node) {
                if best.contains_key(neighbor) {
                    continue; // reached in an earlier layer
                }
                let mut candidate = path.clone();
                candidate.push(neighbor.clone());
                match next_layer.get(neighbor) {
                    Some(existing) if *existing <= candidate => {}
                    _ => {
                        next_layer.insert(neighbor.clone(), candidate);
                    }
                }
            }
        }
        if let Some(path) = next_layer.get(dst) {
            return Circuit::new(path.clone());
        }
        for (node, path) in next_layer {
            frontier.push_back(node.clone());
            best.insert(node, path);
        }
    }

    Err(CircuitError::NoPath)
}
