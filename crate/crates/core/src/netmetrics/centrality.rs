//! Betweenness, closeness, Laplacian, centroid and LeaderRank centralities.
//!
//! All measures except LeaderRank work on the undirected view of the graph.
//! Betweenness ignores weights; closeness and centroid use weighted
//! shortest-path distances; Laplacian centrality uses the weights directly.

use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::Serialize;

use super::GraphSnapshot;
use crate::error::{Error, Result};

pub const LEADERRANK_TOL: f64 = 1e-10;
pub const LEADERRANK_MAX_STEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityRow {
    pub node: String,
    pub betweenness: f64,
    /// `None` when the node has no other node reachable at positive distance.
    pub closeness: Option<f64>,
    pub laplacian: f64,
    pub centroid: i64,
    pub leaderrank: f64,
    /// Connected component of the undirected view.
    pub component: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CentralityTable {
    pub rows: Vec<CentralityRow>,
    /// False when closeness and centroid were computed per component.
    pub connected: bool,
}

impl CentralityTable {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record([
            "node",
            "betweenness",
            "closeness",
            "laplacian",
            "centroid",
            "leaderrank",
            "component",
        ])?;
        for r in &self.rows {
            wtr.write_record([
                r.node.clone(),
                r.betweenness.to_string(),
                r.closeness.map(|c| c.to_string()).unwrap_or_default(),
                r.laplacian.to_string(),
                r.centroid.to_string(),
                r.leaderrank.to_string(),
                r.component.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

fn neighbour_lists(w: &DMatrix<Option<f64>>) -> Vec<Vec<(usize, f64)>> {
    let n = w.nrows();
    (0..n)
        .map(|i| (0..n).filter_map(|j| w[(i, j)].map(|x| (j, x))).collect())
        .collect()
}

fn components(adj: &[Vec<(usize, f64)>]) -> Vec<usize> {
    let n = adj.len();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        comp[s] = next;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &(v, _) in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}

/// Unweighted betweenness on the undirected view, each unordered endpoint
/// pair counted once (Brandes).
pub fn betweenness(g: &GraphSnapshot) -> Vec<f64> {
    let adj = neighbour_lists(&g.undirected_weights());
    let n = adj.len();
    let mut cb = vec![0.0; n];
    for s in 0..n {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![-1i64; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            stack.push(v);
            for &(w, _) in &adj[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    cb.iter().map(|x| x / 2.0).collect()
}

/// All-pairs weighted shortest-path distances on the undirected view
/// (infinite between components).
fn all_pairs(g: &GraphSnapshot) -> Result<Vec<Vec<f64>>> {
    if let Some(e) = g.edges.iter().find(|e| e.w < 0.0) {
        return Err(Error::InvalidGraph(format!(
            "negative distance on {}->{}",
            g.nodes[e.from].id, g.nodes[e.to].id
        )));
    }
    let adj = neighbour_lists(&g.undirected_weights());
    let n = adj.len();
    Ok((0..n)
        .map(|s| {
            let mut dist = vec![f64::INFINITY; n];
            let mut done = vec![false; n];
            dist[s] = 0.0;
            for _ in 0..n {
                let Some(u) = (0..n)
                    .filter(|&v| !done[v] && dist[v].is_finite())
                    .min_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(a.cmp(&b)))
                else {
                    break;
                };
                done[u] = true;
                for &(v, w) in &adj[u] {
                    let nd = dist[u] + w;
                    if nd < dist[v] {
                        dist[v] = nd;
                    }
                }
            }
            dist
        })
        .collect())
}

fn closeness_from(dist: &[Vec<f64>]) -> Vec<Option<f64>> {
    dist.iter()
        .enumerate()
        .map(|(v, row)| {
            let total: f64 = row
                .iter()
                .enumerate()
                .filter(|&(i, d)| i != v && d.is_finite())
                .map(|(_, d)| d)
                .sum();
            (total > 0.0).then(|| 1.0 / total)
        })
        .collect()
}

/// `1 / sum_i d(v, i)` over nodes reachable from `v`.
pub fn closeness(g: &GraphSnapshot) -> Result<Vec<Option<f64>>> {
    Ok(closeness_from(&all_pairs(g)?))
}

/// Laplacian energy `trace(L^2) = sum_i s_i^2 + 2 sum_{i<j} w_ij^2`, with `s_i`
/// the weighted degree, on the undirected view restricted to `keep`.
fn energy_masked(w: &DMatrix<Option<f64>>, keep: &[bool]) -> f64 {
    let n = w.nrows();
    let mut e = 0.0;
    for i in (0..n).filter(|&i| keep[i]) {
        let mut s = 0.0;
        for j in (0..n).filter(|&j| keep[j] && j != i) {
            if let Some(x) = w[(i, j)] {
                s += x;
                // each unordered pair visited twice
                e += x * x;
            }
        }
        e += s * s;
    }
    e
}

pub fn laplacian_energy(g: &GraphSnapshot) -> f64 {
    energy_masked(&g.undirected_weights(), &vec![true; g.n()])
}

/// Drop in Laplacian energy when each vertex is removed.
pub fn laplacian_centrality(g: &GraphSnapshot) -> Vec<f64> {
    let w = g.undirected_weights();
    let n = g.n();
    let mut keep = vec![true; n];
    let full = energy_masked(&w, &keep);
    (0..n)
        .map(|v| {
            keep[v] = false;
            let drop = full - energy_masked(&w, &keep);
            keep[v] = true;
            drop
        })
        .collect()
}

fn centroid_from(dist: &[Vec<f64>]) -> Vec<i64> {
    let n = dist.len();
    (0..n)
        .map(|v| {
            (0..n)
                .filter(|&w| w != v)
                .map(|w| {
                    let mut f = 0i64;
                    for u in 0..n {
                        let (dv, dw) = (dist[v][u], dist[w][u]);
                        if dv < dw {
                            f += 1;
                        } else if dw < dv {
                            f -= 1;
                        }
                    }
                    f
                })
                .min()
                .unwrap_or(0)
        })
        .collect()
}

/// `min_{w != v} (gamma_v(w) - gamma_w(v))`, where `gamma_v(w)` counts nodes
/// strictly closer to `v` than to `w`.
pub fn centroid(g: &GraphSnapshot) -> Result<Vec<i64>> {
    Ok(centroid_from(&all_pairs(g)?))
}

/// LeaderRank: unweighted random walk on the directed graph augmented with a
/// ground node linked both ways to every node. The ground node's final score
/// is shared equally and the scores are rescaled to mean 1.
pub fn leaderrank(g: &GraphSnapshot) -> Result<Vec<f64>> {
    let n = g.n();
    if n == 0 {
        return Ok(vec![]);
    }
    let ground = n;
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n + 1];
    for a in g.arcs() {
        if !out[a.from].contains(&a.to) {
            out[a.from].push(a.to);
        }
    }
    for list in out.iter_mut().take(n) {
        list.push(ground);
    }
    out[ground] = (0..n).collect();

    let mut s = vec![1.0; n + 1];
    s[ground] = 0.0;
    let mut next = vec![0.0; n + 1];
    let mut converged = false;
    for _ in 0..LEADERRANK_MAX_STEPS {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (j, targets) in out.iter().enumerate() {
            let share = s[j] / targets.len() as f64;
            for &i in targets {
                next[i] += share;
            }
        }
        let change: f64 = s.iter().zip(&next).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut s, &mut next);
        if change < LEADERRANK_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Degenerate(format!(
            "LeaderRank did not converge within {LEADERRANK_MAX_STEPS} steps"
        )));
    }
    let bonus = s[ground] / n as f64;
    let mut scores: Vec<f64> = s[..n].iter().map(|x| x + bonus).collect();
    let mean = scores.iter().sum::<f64>() / n as f64;
    scores.iter_mut().for_each(|x| *x /= mean);
    Ok(scores)
}

/// Compute all five measures.
pub fn centrality_suite(g: &GraphSnapshot) -> Result<CentralityTable> {
    let dist = all_pairs(g)?;
    let comp = components(&neighbour_lists(&g.undirected_weights()));
    let bet = betweenness(g);
    let clo = closeness_from(&dist);
    let lap = laplacian_centrality(g);
    let cen = centroid_from(&dist);
    let lr = leaderrank(g)?;
    let connected = comp.iter().all(|&c| c == 0);
    let rows = (0..g.n())
        .map(|v| CentralityRow {
            node: g.nodes[v].id.clone(),
            betweenness: bet[v],
            closeness: clo[v],
            laplacian: lap[v],
            centroid: cen[v],
            leaderrank: lr[v],
            component: comp[v],
        })
        .collect();
    Ok(CentralityTable { rows, connected })
}
