//! Agent co-occurrence graphs and their structural metrics.
//!
//! Agents are nodes; two agents are joined when some rule's required set
//! (or banned set, for [`GraphKind::Ban`]) contains both of them.

mod report;
mod stats;

use serde::{Deserialize, Serialize};

use crate::mcn::{AgentSet, RuleSet};

pub use report::{
    correlation_report, BanzhafStat, CorrelationRecord, CorrelationReport, GraphStat, Metric,
    PrevalenceRow, SIGNIFICANCE_P, SIGNIFICANCE_RHO,
};
pub use stats::{banzhaf_stats, spearman, BanzhafStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Req,
    Ban,
}

impl GraphKind {
    pub const ALL: [GraphKind; 2] = [GraphKind::Req, GraphKind::Ban];

    pub fn as_str(self) -> &'static str {
        match self {
            GraphKind::Req => "req",
            GraphKind::Ban => "ban",
        }
    }
}

/// Undirected simple graph on at most 64 nodes, stored as neighbour bitsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AgentGraph {
    pub kind: GraphKind,
    adj: Vec<u64>,
}

impl AgentGraph {
    pub fn empty(m: usize, kind: GraphKind) -> Self {
        assert!(m <= 64, "at most 64 nodes");
        AgentGraph {
            kind,
            adj: vec![0; m],
        }
    }

    /// Builds a graph from an edge list; self-loops are ignored.
    pub fn from_edges(m: usize, kind: GraphKind, edges: &[(usize, usize)]) -> Self {
        let mut g = AgentGraph::empty(m, kind);
        for &(i, j) in edges {
            g.add_edge(i, j);
        }
        g
    }

    pub fn add_edge(&mut self, i: usize, j: usize) {
        if i != j {
            self.adj[i] |= 1 << j;
            self.adj[j] |= 1 << i;
        }
    }

    pub fn m(&self) -> usize {
        self.adj.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i] >> j & 1 == 1
    }

    pub fn neighbours(&self, i: usize) -> AgentSet {
        AgentSet::from_bits(self.adj[i])
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj[i].count_ones() as usize
    }

    pub fn edge_count(&self) -> usize {
        self.adj.iter().map(|a| a.count_ones() as usize).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.m())
            .flat_map(|i| self.neighbours(i).iter().filter(move |&j| j > i).map(move |j| (i, j)))
            .collect()
    }
}

pub fn build_graph(rs: &RuleSet, kind: GraphKind) -> AgentGraph {
    let mut g = AgentGraph::empty(rs.m(), kind);
    for rule in rs.rules() {
        let mask = match kind {
            GraphKind::Req => rule.req,
            GraphKind::Ban => rule.ban,
        };
        for i in mask.iter() {
            g.adj[i] |= mask.bits() & !(1 << i);
        }
    }
    g
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraphMetrics {
    pub max_clique: usize,
    pub avg_degree: f64,
    pub degree_variance: f64,
    pub avg_clustering: f64,
    pub max_betweenness: f64,
}

impl GraphMetrics {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::MaxClique => self.max_clique as f64,
            Metric::AvgDegree => self.avg_degree,
            Metric::DegreeVariance => self.degree_variance,
            Metric::AvgClustering => self.avg_clustering,
            Metric::MaxBetweenness => self.max_betweenness,
        }
    }
}

pub fn graph_metrics(g: &AgentGraph) -> GraphMetrics {
    let m = g.m();
    if m == 0 {
        return GraphMetrics {
            max_clique: 0,
            avg_degree: 0.0,
            degree_variance: 0.0,
            avg_clustering: 0.0,
            max_betweenness: 0.0,
        };
    }
    let degrees: Vec<f64> = (0..m).map(|i| g.degree(i) as f64).collect();
    let avg_degree = degrees.iter().sum::<f64>() / m as f64;
    let degree_variance =
        degrees.iter().map(|d| (d - avg_degree).powi(2)).sum::<f64>() / m as f64;
    let avg_clustering = (0..m).map(|i| local_clustering(g, i)).sum::<f64>() / m as f64;
    let max_betweenness = betweenness(g).into_iter().fold(0.0, f64::max);
    GraphMetrics {
        max_clique: max_clique(g),
        avg_degree,
        degree_variance,
        avg_clustering,
        max_betweenness,
    }
}

/// Fraction of neighbour pairs of `i` that are themselves adjacent; 0 below
/// degree 2.
pub fn local_clustering(g: &AgentGraph, i: usize) -> f64 {
    let d = g.degree(i);
    if d < 2 {
        return 0.0;
    }
    let nbrs = g.adj[i];
    let links: u32 = g
        .neighbours(i)
        .iter()
        .map(|j| (g.adj[j] & nbrs).count_ones())
        .sum();
    // each neighbour pair was seen from both ends
    (links / 2) as f64 / (d * (d - 1) / 2) as f64
}

/// Size of the largest clique, by Bron-Kerbosch with pivoting and a size
/// bound.
pub fn max_clique(g: &AgentGraph) -> usize {
    fn expand(adj: &[u64], size: usize, mut cand: u64, mut excl: u64, best: &mut usize) {
        if cand == 0 {
            if excl == 0 {
                *best = (*best).max(size);
            }
            return;
        }
        if size + cand.count_ones() as usize <= *best {
            return;
        }
        let pool = cand | excl;
        let pivot = (0..64)
            .filter(|&u| pool >> u & 1 == 1)
            .max_by_key(|&u| (adj[u] & cand).count_ones())
            .unwrap();
        let mut todo = cand & !adj[pivot];
        while todo != 0 {
            let v = todo.trailing_zeros() as usize;
            todo &= todo - 1;
            expand(adj, size + 1, cand & adj[v], excl & adj[v], best);
            cand &= !(1 << v);
            excl |= 1 << v;
        }
    }
    let m = g.m();
    if m == 0 {
        return 0;
    }
    let mut best = 1;
    expand(&g.adj, 0, crate::mcn::full_mask(m), 0, &mut best);
    best
}

/// Node betweenness (Brandes), unnormalized, each unordered pair counted once.
pub fn betweenness(g: &AgentGraph) -> Vec<f64> {
    let m = g.m();
    let mut centrality = vec![0.0; m];
    let mut order = Vec::with_capacity(m);
    let mut queue = std::collections::VecDeque::with_capacity(m);
    for s in 0..m {
        let mut sigma = vec![0.0f64; m];
        let mut dist = vec![usize::MAX; m];
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); m];
        sigma[s] = 1.0;
        dist[s] = 0;
        order.clear();
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for w in g.neighbours(v).iter() {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0; m];
        for &w in order.iter().rev() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                centrality[w] += delta[w];
            }
        }
    }
    centrality.iter_mut().for_each(|c| *c /= 2.0);
    centrality
}
