//! CoRisk-distance graphs and the network measures computed on them.

mod arborescence;
mod centrality;
mod topo;

pub use arborescence::{min_arborescence, Arborescence};
pub use centrality::{
    betweenness, centrality_suite, centroid, closeness, laplacian_centrality, laplacian_energy,
    leaderrank, CentralityRow, CentralityTable, LEADERRANK_MAX_STEPS, LEADERRANK_TOL,
};
pub use topo::{topo_sources, TopoOrder};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::corisk::CoRiskMatrix;
use crate::error::{Error, Result};
use crate::ingest::Institution;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Node {
    pub id: String,
    pub country: Option<String>,
    pub size: Option<f64>,
}

impl Node {
    pub fn new(id: impl Into<String>) -> Self {
        Node {
            id: id.into(),
            country: None,
            size: None,
        }
    }
}

pub fn nodes_from(institutions: &[Institution]) -> Vec<Node> {
    institutions
        .iter()
        .map(|i| Node {
            id: i.ticker.clone(),
            country: i.country.clone(),
            size: None,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub w: f64,
}

/// A weighted graph over labelled nodes. Edges of an undirected graph are
/// stored once each.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSnapshot {
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub directed: bool,
}

impl GraphSnapshot {
    pub fn new(nodes: Vec<Node>, edges: Vec<Edge>, directed: bool) -> Result<Self> {
        let n = nodes.len();
        for e in &edges {
            if e.from >= n || e.to >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge {}->{} references a node outside 0..{n}",
                    e.from, e.to
                )));
            }
            if e.from == e.to {
                return Err(Error::InvalidGraph(format!("self-loop on node {}", e.from)));
            }
            if !e.w.is_finite() {
                return Err(Error::InvalidGraph(format!(
                    "non-finite weight on {}->{}",
                    e.from, e.to
                )));
            }
        }
        Ok(GraphSnapshot {
            nodes,
            edges,
            directed,
        })
    }

    /// Unlabelled graph with nodes named by index.
    pub fn unlabelled(n: usize, edges: Vec<Edge>, directed: bool) -> Result<Self> {
        Self::new(
            (0..n).map(|i| Node::new(i.to_string())).collect(),
            edges,
            directed,
        )
    }

    pub fn n(&self) -> usize {
        self.nodes.len()
    }

    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.w).sum()
    }

    pub fn ids(&self) -> Vec<String> {
        self.nodes.iter().map(|n| n.id.clone()).collect()
    }

    /// Directed arcs; undirected edges contribute both orientations.
    pub fn arcs(&self) -> Vec<Edge> {
        let mut out = Vec::with_capacity(self.edges.len() * 2);
        for e in &self.edges {
            out.push(*e);
            if !self.directed {
                out.push(Edge {
                    from: e.to,
                    to: e.from,
                    w: e.w,
                });
            }
        }
        out
    }

    /// Symmetric weight matrix of the undirected view; parallel arcs keep the
    /// smaller weight.
    pub fn undirected_weights(&self) -> DMatrix<Option<f64>> {
        let n = self.n();
        let mut m: DMatrix<Option<f64>> = DMatrix::from_element(n, n, None);
        for e in &self.edges {
            let w = match m[(e.from, e.to)] {
                Some(old) => old.min(e.w),
                None => e.w,
            };
            m[(e.from, e.to)] = Some(w);
            m[(e.to, e.from)] = Some(w);
        }
        m
    }

    /// In-degree plus out-degree for directed graphs, incident-edge count otherwise.
    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n()];
        for e in &self.edges {
            d[e.from] += 1;
            d[e.to] += 1;
        }
        d
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            directed: self.directed,
            nodes: self.nodes.clone(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeJson {
                    from: self.nodes[e.from].id.clone(),
                    to: self.nodes[e.to].id.clone(),
                    w: e.w,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphJson {
    pub directed: bool,
    pub nodes: Vec<Node>,
    pub edges: Vec<EdgeJson>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EdgeJson {
    pub from: String,
    pub to: String,
    pub w: f64,
}

/// `sqrt(2 (1 - c))`: larger CoRisk maps to a shorter edge.
pub fn corisk_distance(c: f64) -> f64 {
    (2.0 * (1.0 - c)).max(0.0).sqrt()
}

/// Directed distance for each present pair, `None` elsewhere.
pub fn distance_matrix(cr: &CoRiskMatrix) -> DMatrix<Option<f64>> {
    let n = cr.n();
    DMatrix::from_fn(n, n, |i, j| {
        cr.present[(i, j)].then(|| corisk_distance(cr.c[(i, j)]))
    })
}

/// Directed graph with an arc `i -> j` (i transmits to j) for every present pair.
pub fn distance_graph(cr: &CoRiskMatrix, nodes: Vec<Node>) -> Result<GraphSnapshot> {
    if nodes.len() != cr.n() {
        return Err(Error::Dimension(format!(
            "{} nodes for a {}x{} CoRisk matrix",
            nodes.len(),
            cr.n(),
            cr.n()
        )));
    }
    let d = distance_matrix(cr);
    let n = cr.n();
    let edges = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter_map(|(i, j)| d[(i, j)].map(|w| Edge { from: i, to: j, w }))
        .collect();
    GraphSnapshot::new(nodes, edges, true)
}

/// Fragility `E(d^2) / E(d)` over node degrees, evaluated as `sum d^2 / sum d`.
pub fn fragility(g: &GraphSnapshot) -> Result<f64> {
    if g.edges.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let d = g.degrees();
    let s1: usize = d.iter().sum();
    let s2: usize = d.iter().map(|x| x * x).sum();
    Ok(s2 as f64 / s1 as f64)
}

/// Complete undirected graph with edge weight `c_ij + c_ji` and node size set
/// to the supplied Laplacian scores.
pub fn net_corisk_graph(
    cr: &CoRiskMatrix,
    laplacian_scores: &[f64],
    mut nodes: Vec<Node>,
) -> Result<GraphSnapshot> {
    let n = cr.n();
    if cr.c.ncols() != n || laplacian_scores.len() != n || nodes.len() != n {
        return Err(Error::Dimension(format!(
            "CoRisk {}x{}, {} scores, {} nodes",
            cr.c.nrows(),
            cr.c.ncols(),
            laplacian_scores.len(),
            nodes.len()
        )));
    }
    for (node, &s) in nodes.iter_mut().zip(laplacian_scores) {
        node.size = Some(s);
    }
    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            edges.push(Edge {
                from: i,
                to: j,
                w: cr.c[(i, j)] + cr.c[(j, i)],
            });
        }
    }
    GraphSnapshot::new(nodes, edges, false)
}
