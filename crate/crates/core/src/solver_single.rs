//! Exact single-commodity solver for fixed departure times, and the
//! super-source reduction for commodities sharing a destination.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{Signed, Zero};

use crate::demand::{fdt_transform, Commodity, DemandError, Window};
use crate::flow::{Flow, Path, Strategy};
use crate::instances::Instance;
use crate::network::{EdgeIdx, EdgeKey, EdgeKind, ExtendedGraph, NetworkError, NodeIdx, Station, TimeExpandedGraph, Trip};
use crate::rational::{self, Rational, Time};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SingleError {
    NotSingleCommodity(usize),
    NotFixedDeparture,
    MixedDestinations,
    MixedCosts,
    Demand(DemandError),
    Network(NetworkError),
}

impl fmt::Display for SingleError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SingleError::NotSingleCommodity(n) => write!(f, "expected exactly one commodity, found {n}"),
            SingleError::NotFixedDeparture => write!(f, "departure window must be a singleton unless β = 0"),
            SingleError::MixedDestinations => write!(f, "commodities do not share a destination"),
            SingleError::MixedCosts => write!(f, "commodities do not share the arrival cost function"),
            SingleError::Demand(e) => write!(f, "{e}"),
            SingleError::Network(e) => write!(f, "{e}"),
        }
    }
}

impl From<NetworkError> for SingleError {
    fn from(e: NetworkError) -> Self {
        SingleError::Network(e)
    }
}

/// The first conflicting edge of two paths.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PriorityWitness {
    pub edge: EdgeIdx,
    pub boarding: EdgeIdx,
    /// Whether the boarding edge lies on the second path.
    pub boarding_on_second: bool,
}

/// First driving edge shared by `p` and `q` whose boarding edge lies on exactly one of them.
pub fn first_conflict(g: &TimeExpandedGraph, p: &Path, q: &Path) -> Option<PriorityWitness> {
    p.driving_edges(g).filter(|&e| q.contains(e)).find_map(|e| {
        let b = g.boarding_into(e)?;
        let (on_p, on_q) = (p.contains(b), q.contains(b));
        (on_p != on_q).then_some(PriorityWitness { edge: e, boarding: b, boarding_on_second: on_q })
    })
}

/// p ≺ q.
pub fn has_priority(g: &TimeExpandedGraph, p: &Path, q: &Path) -> bool {
    first_conflict(g, p, q).is_some_and(|w| w.boarding_on_second)
}

fn reachable(g: &TimeExpandedGraph, sources: &[NodeIdx], removed: &[bool]) -> Vec<bool> {
    let mut seen = vec![false; g.num_nodes()];
    for &s in sources {
        seen[s.index()] = true;
    }
    let Some(start) = sources.iter().min() else { return seen };
    for v in start.index()..g.num_nodes() {
        if !seen[v] {
            continue;
        }
        for &e in g.out_edges(NodeIdx(v as u32)) {
            if !removed[e.index()] {
                seen[g.edge(e).head.index()] = true;
            }
        }
    }
    seen
}

/// Backward search from `w` over nodes reachable from `sources`, preferring
/// non-boarding predecessors. `removed` masks deleted edges.
pub fn minimal_path(g: &TimeExpandedGraph, sources: &[NodeIdx], removed: &[bool], w: NodeIdx) -> Option<Path> {
    let seen = reachable(g, sources, removed);
    minimal_path_in(g, &seen, removed, w)
}

fn minimal_path_in(g: &TimeExpandedGraph, seen: &[bool], removed: &[bool], w: NodeIdx) -> Option<Path> {
    if !seen[w.index()] {
        return None;
    }
    let mut edges = Vec::new();
    let mut v = w;
    loop {
        let preds = || g.in_edges(v).iter().copied().filter(|&e| !removed[e.index()] && seen[g.edge(e).tail.index()]);
        let Some(e) = preds().find(|&e| g.kind(e) != EdgeKind::Boarding).or_else(|| preds().next()) else { break };
        edges.push(e);
        v = g.edge(e).tail;
    }
    if edges.is_empty() {
        return None;
    }
    edges.reverse();
    Some(Path::new(edges))
}

/// One saturation round.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Round {
    pub path: Path,
    pub delta: Rational,
    pub cost: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SingleSolution {
    pub flow: Flow,
    pub rounds: Vec<Round>,
}

fn check_single(xg: &ExtendedGraph) -> Result<&Commodity, SingleError> {
    if xg.num_commodities() != 1 {
        return Err(SingleError::NotSingleCommodity(xg.num_commodities()));
    }
    let c = xg.commodity(0);
    if !c.window.is_singleton() && !c.beta.is_zero() {
        return Err(SingleError::NotFixedDeparture);
    }
    Ok(c)
}

/// Successive saturation of ≺-minimal cheapest paths.
pub fn solve_single(xg: &ExtendedGraph) -> Result<SingleSolution, SingleError> {
    let c = check_single(xg)?;
    let g = xg.base();
    let sources = xg.sources(0);
    let start_time = sources.first().map(|&s| g.time(s)).unwrap_or(c.window.lo);
    let cost_at = |w: NodeIdx| c.trip_cost(start_time, g.time(w));
    let mut residual: Vec<Option<Rational>> = (0..g.num_edges()).map(|k| g.capacity(EdgeIdx(k as u32)).cloned()).collect();
    let mut removed = vec![false; g.num_edges()];
    let mut flow = Flow::new(g.num_edges());
    let mut routed = rational::zero();
    let mut rounds = Vec::new();
    while routed < c.demand {
        let seen = reachable(g, sources, &removed);
        // sinks are sorted by node index, i.e. by time: the first minimum is the earliest
        let mut best: Option<(NodeIdx, Rational)> = None;
        for &w in xg.sinks(0) {
            if !seen[w.index()] || sources.contains(&w) {
                continue;
            }
            let cost = cost_at(w);
            if best.as_ref().is_none_or(|(_, b)| cost < *b) {
                best = Some((w, cost));
            }
        }
        let rest = &c.demand - &routed;
        let Some((w, cost)) = best.filter(|(_, cost)| *cost <= c.outside_cost) else {
            flow.add(g, 0, Strategy::Outside, rest);
            break;
        };
        let path = minimal_path_in(g, &seen, &removed, w).expect("w is reachable");
        let mut delta = rest;
        for e in path.driving_edges(g) {
            delta = rational::min(delta, residual[e.index()].clone().unwrap());
        }
        for e in path.driving_edges(g) {
            let r = residual[e.index()].as_mut().unwrap();
            *r -= &delta;
            if r.is_zero() {
                removed[e.index()] = true;
            }
        }
        flow.add(g, 0, Strategy::Path(path.clone()), delta.clone());
        routed += &delta;
        rounds.push(Round { path, delta, cost });
    }
    Ok(SingleSolution { flow, rounds })
}

/// The single-commodity instance built by [`super_source_reduce`].
#[derive(Clone, Debug)]
pub struct SuperSource {
    pub instance: Instance,
    /// Artificial trip id → original commodity index.
    feeders: BTreeMap<String, usize>,
    demands: Vec<Rational>,
}

pub const SUPER_STATION: &str = "__super_source";

/// Reduces commodities with a common destination and arrival cost to one
/// commodity starting at an artificial station. Each commodity is fed by an
/// artificial trip of capacity Q_i arriving at its start platform.
pub fn super_source_reduce(instance: &Instance) -> Result<SuperSource, SingleError> {
    let fdt = fdt_transform(instance).map_err(SingleError::Demand)?;
    let cs = &fdt.instance.commodities;
    let Some(first) = cs.first() else { return Err(SingleError::NotSingleCommodity(0)) };
    if cs.iter().any(|c| c.destination != first.destination) {
        return Err(SingleError::MixedDestinations);
    }
    let key = |c: &Commodity| (c.target, c.gamma_late.clone(), c.gamma_early.clone(), c.outside_cost.clone());
    if cs.iter().any(|c| key(c) != key(first)) {
        return Err(SingleError::MixedCosts);
    }
    let starts: Vec<Time> = fdt.start_times.iter().flatten().copied().collect();
    let depart = starts.iter().min().copied().unwrap_or(0) - 1;
    let mut out = Instance { stations: instance.stations.clone(), trips: instance.trips.clone(), commodities: Vec::new() };
    out.stations.push(Station::new(SUPER_STATION));
    let mut feeders = BTreeMap::new();
    for (i, (c, start)) in cs.iter().zip(&fdt.start_times).enumerate() {
        let Some(theta) = start else { continue };
        if !c.demand.is_positive() {
            continue;
        }
        let id = format!("{SUPER_STATION}_{i}");
        out.trips.push(Trip::simple(id.clone(), c.demand.clone(), &[(SUPER_STATION, depart), (&c.origin, *theta)]));
        feeders.insert(id, i);
    }
    let mut sc = first.clone();
    sc.id = String::from(SUPER_STATION);
    sc.origin = String::from(SUPER_STATION);
    sc.window = Window::singleton(depart);
    sc.demand = cs.iter().map(|c| &c.demand).sum();
    out.commodities.push(sc);
    Ok(SuperSource { instance: out, feeders, demands: cs.iter().map(|c| c.demand.clone()).collect() })
}

impl SuperSource {
    /// Maps a flow of the reduced instance back to the original commodities.
    pub fn map_back(&self, reduced: &ExtendedGraph, flow: &Flow, original: &ExtendedGraph) -> Flow {
        let rg = reduced.base();
        let og = original.base();
        let keys: BTreeMap<EdgeKey, EdgeIdx> = (0..og.num_edges()).map(|k| (og.edge_key(EdgeIdx(k as u32)), EdgeIdx(k as u32))).collect();
        let mut out = Flow::new(og.num_edges());
        let mut routed = vec![rational::zero(); self.demands.len()];
        for (_, s, vol) in flow.used() {
            let Strategy::Path(p) = s else { continue };
            let feeder = p.driving_edges(rg).next().expect("reduced paths start with a feeder");
            let trip = rg.edge(feeder).trip.unwrap();
            let i = self.feeders[rg.trip_id(trip)];
            // boarding, feeder driving edge, alighting
            let edges: Vec<EdgeIdx> = p.edges()[3..].iter().map(|&e| keys[&rg.edge_key(e)]).collect();
            routed[i] += vol;
            out.add(og, i, Strategy::Path(Path::new(edges)), vol.clone());
        }
        for (i, d) in self.demands.iter().enumerate() {
            out.add(og, i, Strategy::Outside, d - &routed[i]);
        }
        out
    }
}

/// Solves a common-destination instance through the super-source reduction.
pub fn solve_common_destination(instance: &Instance) -> Result<Flow, SingleError> {
    let original = instance.network()?;
    let reduction = super_source_reduce(instance)?;
    let reduced = reduction.instance.network()?;
    let sol = solve_single(&reduced)?;
    Ok(reduction.map_back(&reduced, &sol.flow, &original))
}
