use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::GraphSnapshot;
use crate::error::{Error, Result};

/// Topological order of a DAG and its zero in-degree (source) nodes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TopoOrder {
    pub order: Vec<usize>,
    pub sources: Vec<usize>,
}

/// Kahn's algorithm, always emitting the lowest-index ready node.
pub fn topo_sources(g: &GraphSnapshot) -> Result<TopoOrder> {
    let n = g.n();
    let arcs = g.arcs();
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in &arcs {
        indeg[a.to] += 1;
        out[a.from].push(a.to);
    }
    let sources: Vec<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut ready: BinaryHeap<Reverse<usize>> = sources.iter().map(|&v| Reverse(v)).collect();
    let mut order = Vec::with_capacity(n);
    let mut remaining = indeg.clone();
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for &v in &out[u] {
            remaining[v] -= 1;
            if remaining[v] == 0 {
                ready.push(Reverse(v));
            }
        }
    }
    if order.len() < n {
        let cycle = witness_cycle(n, &arcs, &remaining);
        return Err(Error::Cycle {
            cycle: cycle.into_iter().map(|v| g.nodes[v].id.clone()).collect(),
        });
    }
    Ok(TopoOrder { order, sources })
}

/// Every unplaced node has an unplaced predecessor; walk predecessors until
/// a node repeats.
fn witness_cycle(n: usize, arcs: &[super::Edge], remaining: &[usize]) -> Vec<usize> {
    let stuck = |v: usize| remaining[v] > 0;
    let mut pred = vec![usize::MAX; n];
    for a in arcs {
        if stuck(a.from) && stuck(a.to) && pred[a.to] == usize::MAX {
            pred[a.to] = a.from;
        }
    }
    let start = (0..n).find(|&v| stuck(v)).expect("some node is unplaced");
    let mut pos = vec![usize::MAX; n];
    let mut walk = Vec::new();
    let mut u = start;
    while pos[u] == usize::MAX {
        pos[u] = walk.len();
        walk.push(u);
        u = pred[u];
    }
    let mut cycle = walk[pos[u]..].to_vec();
    // walk went backwards along arcs
    cycle.reverse();
    cycle
}
