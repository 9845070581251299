//! DAG shortest strategy search on G′ for one commodity.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::flow::{Path, Strategy};
use crate::network::{EdgeIdx, EdgeKind, ExtendedGraph, NodeIdx};
use crate::rational::Rational;

pub(crate) struct Query<'a> {
    pub allow: &'a dyn Fn(EdgeIdx) -> bool,
    /// Added on top of β·τ_e.
    pub extra: Option<&'a dyn Fn(EdgeIdx) -> Option<Rational>>,
    pub include_outside: bool,
}

impl<'a> Query<'a> {
    pub fn filtered(allow: &'a dyn Fn(EdgeIdx) -> bool) -> Self {
        Query { allow, extra: None, include_outside: true }
    }
}

/// Cheapest strategy. Ties prefer non-boarding predecessors, then the lower
/// edge index; among destinations the earliest arrival, then node order; a
/// path beats the outside option on equal cost. With `rng`, equal-cost
/// predecessors and destinations are sampled uniformly instead.
pub(crate) fn shortest(xg: &ExtendedGraph, i: usize, q: &Query<'_>, mut rng: Option<&mut ChaCha8Rng>) -> Option<(Strategy, Rational)> {
    let g = xg.base();
    let c = xg.commodity(i);
    let n = g.num_nodes();
    let sources = xg.sources(i);
    let mut best: Option<(Strategy, Rational)> = q.include_outside.then(|| (Strategy::Outside, c.outside_cost.clone()));
    let Some(start) = sources.first() else { return best };

    let mut dist: Vec<Option<Rational>> = vec![None; n];
    let mut pred: Vec<Option<EdgeIdx>> = vec![None; n];
    let mut ties: Vec<u32> = vec![0; n];
    for &s in sources {
        dist[s.index()] = Some(Rational::from_integer(0.into()));
    }
    let mut dest: Option<(NodeIdx, Rational)> = None;
    let mut dest_ties = 0u32;
    for v in start.index()..n {
        let Some(d) = dist[v].clone() else { continue };
        let node = NodeIdx(v as u32);
        if xg.is_sink(i, node) {
            let total = &d + c.arrival_cost(g.time(node));
            let replace = match &dest {
                None => {
                    dest_ties = 1;
                    true
                }
                Some((_, cur)) if total < *cur => {
                    dest_ties = 1;
                    true
                }
                Some((_, cur)) if total == *cur => match rng.as_deref_mut() {
                    Some(r) => {
                        dest_ties += 1;
                        r.gen_range(0..dest_ties) == 0
                    }
                    None => false,
                },
                _ => false,
            };
            if replace {
                dest = Some((node, total));
            }
        }
        for &e in g.out_edges(node) {
            if !(q.allow)(e) {
                continue;
            }
            let mut cand = &d + xg.travel_cost(i, e);
            if let Some(extra) = q.extra {
                match extra(e) {
                    Some(x) => cand += x,
                    None => continue,
                }
            }
            let w = g.edge(e).head.index();
            let replace = match &dist[w] {
                None => true,
                Some(cur) if cand < *cur => true,
                Some(cur) if cand == *cur => match pred[w] {
                    // a source keeps its empty prefix
                    None => false,
                    Some(p) => match rng.as_deref_mut() {
                        Some(r) => {
                            ties[w] += 1;
                            r.gen_range(0..ties[w]) == 0
                        }
                        None => tie_key(xg, e) < tie_key(xg, p),
                    },
                },
                _ => false,
            };
            if replace {
                if dist[w].as_ref().is_none_or(|cur| cand < *cur) {
                    ties[w] = 1;
                }
                dist[w] = Some(cand);
                pred[w] = Some(e);
            }
        }
    }
    if let Some((w, total)) = dest {
        if best.as_ref().is_none_or(|(_, out)| total <= *out) {
            let mut edges = Vec::new();
            let mut v = w;
            while let Some(e) = pred[v.index()] {
                edges.push(e);
                v = g.edge(e).tail;
            }
            edges.reverse();
            best = Some((Strategy::Path(Path::new(edges)), total));
        }
    }
    best
}

fn tie_key(xg: &ExtendedGraph, e: EdgeIdx) -> (bool, EdgeIdx) {
    (xg.base().kind(e) == EdgeKind::Boarding, e)
}
