//! Institution co-occurrence graph: institutions are linked when they hold
//! members of the same duplicate group, weighted by the number of groups
//! they share.

mod export;
mod louvain;

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

pub use export::{
    companion_nodes_path, export_graph, import_graph, read_dot, read_edgelist_csv, read_graphml, write_dot,
    write_edgelist_csv, write_graphml, write_node_csv, GraphFormat,
};
pub use louvain::{louvain_communities, modularity, LouvainOptions, Partition};

use crate::error::{Error, Result};

/// Weighted undirected graph without self-loops. Nodes are kept sorted by
/// code and addressed by position.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct InstitutionGraph {
    nodes: Vec<String>,
    index: HashMap<String, usize>,
    /// (lower index, higher index) -> weight
    edges: BTreeMap<(usize, usize), u64>,
    adjacency: Vec<Vec<(usize, u64)>>,
    communities: Option<Vec<usize>>,
}

impl InstitutionGraph {
    /// Builds a graph from explicit nodes and weighted edges. Repeated
    /// pairs accumulate; self-loops and zero weights are rejected.
    pub fn from_edges<'a>(
        nodes: impl IntoIterator<Item = &'a str>,
        edges: impl IntoIterator<Item = (&'a str, &'a str, u64)>,
    ) -> Result<Self> {
        let edges: Vec<_> = edges.into_iter().collect();
        let mut names: BTreeSet<&str> = nodes.into_iter().collect();
        for &(a, b, _) in &edges {
            names.insert(a);
            names.insert(b);
        }
        let mut g = Self::with_nodes(names.into_iter().map(str::to_string).collect());
        let mut map: BTreeMap<(usize, usize), u64> = BTreeMap::new();
        for (a, b, w) in edges {
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop on `{a}`")));
            }
            if w == 0 {
                return Err(Error::InvalidParameter(format!("zero weight on {a}--{b}")));
            }
            let (i, j) = (g.index[a], g.index[b]);
            *map.entry((i.min(j), i.max(j))).or_default() += w;
        }
        g.set_edges(map);
        Ok(g)
    }

    fn with_nodes(nodes: Vec<String>) -> Self {
        let index = nodes.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
        let adjacency = vec![Vec::new(); nodes.len()];
        InstitutionGraph { nodes, index, edges: BTreeMap::new(), adjacency, communities: None }
    }

    fn set_edges(&mut self, edges: BTreeMap<(usize, usize), u64>) {
        let mut adjacency = vec![Vec::new(); self.nodes.len()];
        for (&(i, j), &w) in &edges {
            adjacency[i].push((j, w));
            adjacency[j].push((i, w));
        }
        for a in &mut adjacency {
            a.sort_unstable();
        }
        self.adjacency = adjacency;
        self.edges = edges;
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_index(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    /// Edges as (source, target, weight) with source < target.
    pub fn edges(&self) -> impl Iterator<Item = (&str, &str, u64)> + '_ {
        self.edges.iter().map(|(&(i, j), &w)| (self.nodes[i].as_str(), self.nodes[j].as_str(), w))
    }

    pub(crate) fn adjacency(&self, i: usize) -> &[(usize, u64)] {
        &self.adjacency[i]
    }

    pub fn weight(&self, a: &str, b: &str) -> Option<u64> {
        let (i, j) = (self.node_index(a)?, self.node_index(b)?);
        self.edges.get(&(i.min(j), i.max(j))).copied()
    }

    /// Number of incident edges.
    pub fn degree(&self, code: &str) -> Result<usize> {
        self.node_index(code).map(|i| self.adjacency[i].len()).ok_or_else(|| Error::UnknownNode(code.to_string()))
    }

    /// Sum of incident edge weights.
    pub fn strength(&self, code: &str) -> Result<u64> {
        self.node_index(code)
            .map(|i| self.adjacency[i].iter().map(|&(_, w)| w).sum())
            .ok_or_else(|| Error::UnknownNode(code.to_string()))
    }

    pub fn total_weight(&self) -> u64 {
        self.edges.values().sum()
    }

    /// Nodes without any edge.
    pub fn isolated_count(&self) -> usize {
        self.adjacency.iter().filter(|a| a.is_empty()).count()
    }

    /// Community label per node (node order), once assigned.
    pub fn communities(&self) -> Option<&[usize]> {
        self.communities.as_deref()
    }

    pub fn community(&self, code: &str) -> Option<usize> {
        Some(self.communities.as_ref()?[self.node_index(code)?])
    }

    pub fn community_count(&self) -> usize {
        self.communities.as_ref().map_or(0, |c| c.iter().collect::<BTreeSet<_>>().len())
    }

    pub fn set_communities(&mut self, communities: Vec<usize>) -> Result<()> {
        if communities.len() != self.nodes.len() {
            return Err(Error::InvalidParameter(format!(
                "{} community labels for {} nodes",
                communities.len(),
                self.nodes.len()
            )));
        }
        self.communities = Some(communities);
        Ok(())
    }
}

/// Builds the graph from the institution codes of each group's members.
///
/// Each unordered pair of distinct codes within a group adds 1 to its edge,
/// however many sheets either institution holds. Blank codes are ignored.
pub fn build_graph<S: AsRef<str> + Sync>(groups: &[Vec<S>]) -> InstitutionGraph {
    let per_group: Vec<Vec<&str>> = groups
        .par_iter()
        .map(|g| {
            let set: BTreeSet<&str> = g.iter().map(|s| s.as_ref().trim()).filter(|s| !s.is_empty()).collect();
            set.into_iter().collect()
        })
        .collect();
    let names: BTreeSet<&str> = per_group.iter().flatten().copied().collect();
    let mut g = InstitutionGraph::with_nodes(names.into_iter().map(str::to_string).collect());
    let index = &g.index;
    let counts: HashMap<(usize, usize), u64> = per_group
        .par_iter()
        .fold(HashMap::new, |mut acc: HashMap<(usize, usize), u64>, codes| {
            let ids: Vec<usize> = codes.iter().map(|c| index[*c]).collect();
            for (a, &i) in ids.iter().enumerate() {
                for &j in &ids[a + 1..] {
                    *acc.entry((i.min(j), i.max(j))).or_default() += 1;
                }
            }
            acc
        })
        .reduce(HashMap::new, |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_default() += v;
            }
            a
        });
    g.set_edges(counts.into_iter().collect());
    g
}
