//! Minimum spanning arborescence (Chu-Liu/Edmonds) with best-root search.

use std::cmp::Ordering;

use super::{Edge, GraphSnapshot};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Arborescence {
    pub root: usize,
    /// Directed tree, edges ordered by child index.
    pub tree: GraphSnapshot,
    pub weight: f64,
}

#[derive(Debug, Clone, Copy)]
struct Arc {
    from: usize,
    to: usize,
    w: f64,
    /// position in the lexicographically sorted input; final tie-break
    ord: usize,
}

fn arc_cmp(a: &Arc, b: &Arc) -> Ordering {
    a.w.total_cmp(&b.w)
        .then(a.from.cmp(&b.from))
        .then(a.ord.cmp(&b.ord))
}

/// Returns indices into `arcs`, one incoming arc per non-root node, or `None`
/// if some node has no incoming arc.
fn edmonds(n: usize, root: usize, arcs: &[Arc]) -> Option<Vec<usize>> {
    let mut best: Vec<Option<usize>> = vec![None; n];
    for (k, a) in arcs.iter().enumerate() {
        if a.to == root || a.from == a.to {
            continue;
        }
        match best[a.to] {
            Some(b) if arc_cmp(a, &arcs[b]) != Ordering::Less => {}
            _ => best[a.to] = Some(k),
        }
    }
    if (0..n).any(|v| v != root && best[v].is_none()) {
        return None;
    }
    let parent = |v: usize| arcs[best[v].expect("checked above")].from;

    // cycles among the chosen incoming arcs
    const UNSEEN: usize = usize::MAX;
    let mut visited = vec![UNSEEN; n];
    let mut cycle_of = vec![UNSEEN; n];
    let mut cycles: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        let mut u = start;
        while u != root && visited[u] == UNSEEN {
            visited[u] = start;
            u = parent(u);
        }
        if u != root && visited[u] == start && cycle_of[u] == UNSEEN {
            let id = cycles.len();
            let mut cyc = vec![u];
            cycle_of[u] = id;
            let mut w = parent(u);
            while w != u {
                cycle_of[w] = id;
                cyc.push(w);
                w = parent(w);
            }
            cycles.push(cyc);
        }
    }
    if cycles.is_empty() {
        return Some(
            (0..n)
                .filter(|&v| v != root)
                .map(|v| best[v].unwrap())
                .collect(),
        );
    }

    // contract: each cycle becomes one node, others keep their own
    let mut comp = vec![UNSEEN; n];
    for v in 0..n {
        if cycle_of[v] != UNSEEN {
            comp[v] = cycle_of[v];
        }
    }
    let mut next = cycles.len();
    for c in comp.iter_mut() {
        if *c == UNSEEN {
            *c = next;
            next += 1;
        }
    }
    let mut sub_arcs = Vec::new();
    let mut origin = Vec::new();
    for (k, a) in arcs.iter().enumerate() {
        let (cu, cv) = (comp[a.from], comp[a.to]);
        if cu == cv {
            continue;
        }
        let w = if cycle_of[a.to] != UNSEEN {
            a.w - arcs[best[a.to].unwrap()].w
        } else {
            a.w
        };
        sub_arcs.push(Arc {
            from: cu,
            to: cv,
            w,
            ord: a.ord,
        });
        origin.push(k);
    }
    let sub = edmonds(next, comp[root], &sub_arcs)?;

    let mut chosen = Vec::with_capacity(n - 1);
    let mut entry = vec![UNSEEN; cycles.len()];
    for s in sub {
        let k = origin[s];
        let to = arcs[k].to;
        if cycle_of[to] != UNSEEN {
            entry[cycle_of[to]] = to;
        }
        chosen.push(k);
    }
    for (c, cyc) in cycles.iter().enumerate() {
        for &v in cyc {
            if v != entry[c] {
                chosen.push(best[v].unwrap());
            }
        }
    }
    Some(chosen)
}

fn reachable_from(n: usize, arcs: &[Arc], root: usize) -> Vec<bool> {
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in arcs {
        out[a.from].push(a.to);
    }
    let mut seen = vec![false; n];
    let mut stack = vec![root];
    seen[root] = true;
    while let Some(u) = stack.pop() {
        for &v in &out[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// Minimum-weight spanning arborescence over all feasible roots. Ties in total
/// weight go to the lowest root index; ties between arcs to the lower source
/// index, then lexicographic `(from, to)` order.
pub fn min_arborescence(g: &GraphSnapshot) -> Result<Arborescence> {
    let n = g.n();
    if n == 0 {
        return Err(Error::InvalidGraph("graph has no nodes".into()));
    }
    let mut raw = g.arcs();
    raw.sort_by(|a, b| {
        a.from
            .cmp(&b.from)
            .then(a.to.cmp(&b.to))
            .then(a.w.total_cmp(&b.w))
    });
    let arcs: Vec<Arc> = raw
        .iter()
        .enumerate()
        .map(|(ord, e)| Arc {
            from: e.from,
            to: e.to,
            w: e.w,
            ord,
        })
        .collect();

    let mut best: Option<(f64, usize, Vec<Edge>)> = None;
    let mut best_cover: (usize, Vec<bool>) = (0, vec![]);
    for root in 0..n {
        let reach = reachable_from(n, &arcs, root);
        let covered = reach.iter().filter(|&&r| r).count();
        if covered < n {
            if covered > best_cover.0 {
                best_cover = (covered, reach);
            }
            continue;
        }
        let Some(chosen) = edmonds(n, root, &arcs) else {
            continue;
        };
        let mut edges: Vec<Edge> = chosen
            .iter()
            .map(|&k| Edge {
                from: arcs[k].from,
                to: arcs[k].to,
                w: arcs[k].w,
            })
            .collect();
        edges.sort_by_key(|e| e.to);
        let weight: f64 = edges.iter().map(|e| e.w).sum();
        if best.as_ref().is_none_or(|(bw, _, _)| weight < *bw) {
            best = Some((weight, root, edges));
        }
    }
    match best {
        Some((weight, root, edges)) => Ok(Arborescence {
            root,
            tree: GraphSnapshot::new(g.nodes.clone(), edges, true)?,
            weight,
        }),
        None => {
            let unreachable = if best_cover.1.is_empty() {
                (1..n).map(|v| g.nodes[v].id.clone()).collect()
            } else {
                (0..n)
                    .filter(|&v| !best_cover.1[v])
                    .map(|v| g.nodes[v].id.clone())
                    .collect()
            };
            Err(Error::NoFeasibleRoot { unreachable })
        }
    }
}
