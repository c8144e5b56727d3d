//! Louvain modularity optimisation: repeated local moving of nodes between
//! communities followed by aggregation of communities into super-nodes.
//! A final node-level pass keeps the result a local optimum under single
//! node moves on the original graph.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::InstitutionGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LouvainOptions {
    pub seed: u64,
    pub resolution: f64,
}

impl Default for LouvainOptions {
    fn default() -> Self {
        LouvainOptions { seed: 0, resolution: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    /// Community per node, numbered densely in order of first appearance.
    pub community: Vec<usize>,
    pub modularity: f64,
    /// Modularity after every phase, starting from all singletons.
    pub trace: Vec<f64>,
}

impl Partition {
    pub fn community_count(&self) -> usize {
        self.community.iter().max().map_or(0, |m| m + 1)
    }
}

/// Gains below this are treated as ties.
const MIN_GAIN: f64 = 1e-10;

/// Graph at one aggregation level. `loops[i]` is the weight of edges
/// folded inside super-node `i`, counted once.
#[derive(Debug, Clone)]
struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
    strength: Vec<f64>,
    /// twice the total edge weight
    m2: f64,
}

impl Level {
    fn from_graph(g: &InstitutionGraph) -> Self {
        let n = g.node_count();
        let adj: Vec<Vec<(usize, f64)>> =
            (0..n).map(|i| g.adjacency(i).iter().map(|&(j, w)| (j, w as f64)).collect()).collect();
        Self::assemble(adj, vec![0.0; n])
    }

    fn assemble(adj: Vec<Vec<(usize, f64)>>, loops: Vec<f64>) -> Self {
        let strength: Vec<f64> =
            adj.iter().zip(&loops).map(|(a, l)| a.iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * l).collect();
        let m2 = strength.iter().sum();
        Level { adj, loops, strength, m2 }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    /// Collapses each community into one node. `comm` must be dense.
    fn aggregate(&self, comm: &[usize], count: usize) -> Level {
        let mut loops = vec![0.0; count];
        let mut maps: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); count];
        for i in 0..self.len() {
            let ci = comm[i];
            loops[ci] += self.loops[i];
            for &(j, w) in &self.adj[i] {
                let cj = comm[j];
                if ci == cj {
                    // each internal edge is seen from both ends
                    loops[ci] += w / 2.0;
                } else {
                    *maps[ci].entry(cj).or_default() += w;
                }
            }
        }
        let adj = maps.into_iter().map(|m| m.into_iter().collect()).collect();
        Self::assemble(adj, loops)
    }

    fn modularity(&self, comm: &[usize], resolution: f64) -> f64 {
        if self.m2 == 0.0 {
            return 0.0;
        }
        let n = comm.iter().max().map_or(0, |m| m + 1);
        let mut inside = vec![0.0; n];
        let mut total = vec![0.0; n];
        for i in 0..self.len() {
            let ci = comm[i];
            total[ci] += self.strength[i];
            inside[ci] += 2.0 * self.loops[i];
            for &(j, w) in &self.adj[i] {
                if comm[j] == ci {
                    inside[ci] += w;
                }
            }
        }
        inside.iter().zip(&total).map(|(&e, &t)| e / self.m2 - resolution * (t / self.m2) * (t / self.m2)).sum()
    }

    /// Moves single nodes to the neighbouring (or an empty) community with
    /// the largest modularity gain until no move improves. Returns whether
    /// anything moved.
    fn local_moves(&self, comm: &mut [usize], resolution: f64, rng: &mut ChaCha8Rng) -> bool {
        let n = self.len();
        if self.m2 == 0.0 || n == 0 {
            return false;
        }
        let mut total = vec![0.0; n];
        let mut size = vec![0usize; n];
        for i in 0..n {
            total[comm[i]] += self.strength[i];
            size[comm[i]] += 1;
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let mut link = vec![0.0; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut moved_any = false;
        loop {
            let mut moved = false;
            for &i in &order {
                let own = comm[i];
                let k = self.strength[i];
                for &(j, w) in &self.adj[i] {
                    let c = comm[j];
                    if link[c] == 0.0 {
                        touched.push(c);
                    }
                    link[c] += w;
                }
                total[own] -= k;
                size[own] -= 1;
                let gain = |c: usize, link: &[f64]| link[c] - resolution * total[c] * k / self.m2;

                let mut best = own;
                let mut best_gain = gain(own, &link);
                for &c in &touched {
                    let g = gain(c, &link);
                    if g > best_gain + MIN_GAIN {
                        best = c;
                        best_gain = g;
                    }
                }
                // an empty community always offers gain 0
                if best_gain < -MIN_GAIN && size[own] > 0 {
                    if let Some(free) = (0..n).find(|&c| size[c] == 0) {
                        best = free;
                    }
                }
                for &c in &touched {
                    link[c] = 0.0;
                }
                touched.clear();
                total[best] += k;
                size[best] += 1;
                if best != own {
                    comm[i] = best;
                    moved = true;
                    moved_any = true;
                }
            }
            if !moved {
                return moved_any;
            }
        }
    }
}

/// Relabels to 0.. in order of first appearance.
fn densify(comm: &mut [usize]) -> usize {
    let mut map = std::collections::HashMap::new();
    for c in comm.iter_mut() {
        let next = map.len();
        *c = *map.entry(*c).or_insert(next);
    }
    map.len()
}

/// Modularity of a node partition of `g`:
/// `Q = 1/2m Σ_ij [A_ij − γ k_i k_j / 2m] δ(c_i, c_j)`, 0 for edgeless graphs.
pub fn modularity(g: &InstitutionGraph, community: &[usize], resolution: f64) -> f64 {
    let mut comm = community.to_vec();
    densify(&mut comm);
    Level::from_graph(g).modularity(&comm, resolution)
}

/// Louvain community detection. Node visiting order at every phase is
/// shuffled by a generator seeded from `opts.seed`, so equal seeds give
/// equal partitions.
pub fn louvain_communities(g: &InstitutionGraph, opts: LouvainOptions) -> Result<Partition> {
    if g.is_empty() {
        return Err(Error::EmptyGraph);
    }
    if !(opts.resolution > 0.0 && opts.resolution.is_finite()) {
        return Err(Error::InvalidParameter(format!("resolution must be positive, got {}", opts.resolution)));
    }
    let gamma = opts.resolution;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let base = Level::from_graph(g);
    let n = base.len();
    let mut membership: Vec<usize> = (0..n).collect();
    let mut trace = vec![base.modularity(&membership, gamma)];

    loop {
        let count = densify(&mut membership);
        let mut level = base.aggregate(&membership, count);
        loop {
            let mut local: Vec<usize> = (0..level.len()).collect();
            if !level.local_moves(&mut local, gamma, &mut rng) {
                break;
            }
            let count = densify(&mut local);
            for c in membership.iter_mut() {
                *c = local[*c];
            }
            trace.push(base.modularity(&membership, gamma));
            level = level.aggregate(&local, count);
        }
        if !base.local_moves(&mut membership, gamma, &mut rng) {
            break;
        }
        densify(&mut membership);
        trace.push(base.modularity(&membership, gamma));
    }

    densify(&mut membership);
    let q = base.modularity(&membership, gamma);
    Ok(Partition { community: membership, modularity: q, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn graph(edges: &[(&str, &str, u64)]) -> InstitutionGraph {
        InstitutionGraph::from_edges([], edges.iter().copied()).unwrap()
    }

    #[test]
    fn two_triangles() {
        let g = graph(&[("a", "b", 1), ("b", "c", 1), ("a", "c", 1), ("d", "e", 1), ("e", "f", 1), ("d", "f", 1)]);
        let p = louvain_communities(&g, LouvainOptions::default()).unwrap();
        assert_eq!(p.community_count(), 2);
        assert_eq!(p.community, vec![0, 0, 0, 1, 1, 1]);
        assert!((p.modularity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn single_edge_is_one_community() {
        let p = louvain_communities(&graph(&[("a", "b", 3)]), LouvainOptions::default()).unwrap();
        assert_eq!(p.community, vec![0, 0]);
        assert!(p.modularity.abs() < 1e-12);
    }

    #[test]
    fn clique_is_one_community() {
        let names = ["a", "b", "c", "d"];
        let mut edges = Vec::new();
        for i in 0..4 {
            for j in i + 1..4 {
                edges.push((names[i], names[j], 1));
            }
        }
        let p = louvain_communities(&graph(&edges), LouvainOptions::default()).unwrap();
        assert_eq!(p.community_count(), 1);
    }

    #[test]
    fn edgeless_and_empty() {
        let g = InstitutionGraph::from_edges(["a", "b"], []).unwrap();
        let p = louvain_communities(&g, LouvainOptions::default()).unwrap();
        assert_eq!(p.community, vec![0, 1]);
        assert_eq!(p.modularity, 0.0);
        assert!(matches!(
            louvain_communities(&InstitutionGraph::default(), LouvainOptions::default()),
            Err(Error::EmptyGraph)
        ));
    }

    #[test]
    fn modularity_of_known_partitions() {
        let g = graph(&[("a", "b", 1), ("b", "c", 1), ("a", "c", 1), ("d", "e", 1), ("e", "f", 1), ("d", "f", 1)]);
        assert!((modularity(&g, &[0, 0, 0, 1, 1, 1], 1.0) - 0.5).abs() < 1e-12);
        assert!(modularity(&g, &[0; 6], 1.0).abs() < 1e-12);
        // singletons: -Σ (k_i / 2m)^2 = -6 * (2/12)^2
        assert!((modularity(&g, &[0, 1, 2, 3, 4, 5], 1.0) + 6.0 / 36.0).abs() < 1e-12);
    }

    #[test]
    fn aggregation_preserves_modularity() {
        let g = graph(&[("a", "b", 2), ("b", "c", 1), ("c", "d", 3), ("d", "a", 1), ("a", "c", 1)]);
        let base = Level::from_graph(&g);
        let comm = vec![0, 0, 1, 1];
        let agg = base.aggregate(&comm, 2);
        assert!((agg.m2 - base.m2).abs() < 1e-12);
        let q_base = base.modularity(&comm, 1.0);
        let q_agg = agg.modularity(&[0, 1], 1.0);
        assert!((q_base - q_agg).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_partition() {
        let g = graph(&[
            ("a", "b", 1),
            ("b", "c", 1),
            ("c", "d", 1),
            ("d", "e", 1),
            ("e", "f", 1),
            ("f", "a", 1),
            ("a", "d", 1),
        ]);
        let o = LouvainOptions { seed: 42, resolution: 1.0 };
        assert_eq!(louvain_communities(&g, o).unwrap(), louvain_communities(&g, o).unwrap());
    }
}
