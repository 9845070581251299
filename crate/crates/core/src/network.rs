//! Time-expanded transit graph and its per-commodity extension.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::Signed;

use crate::demand::Commodity;
use crate::flow::Flow;
use crate::rational::{self, Rational, Time};

macro_rules! index_type {
    ($name:ident, $prefix:literal) => {
        #[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Debug for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "#{}"), self.0)
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

index_type!(NodeIdx, "v");
index_type!(EdgeIdx, "e");
index_type!(StationIdx, "s");
index_type!(TripIdx, "z");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Station {
    pub id: String,
}

impl Station {
    pub fn new(id: impl Into<String>) -> Self {
        Station { id: id.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stop {
    pub station: String,
    pub arrival: Option<Time>,
    pub departure: Option<Time>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trip {
    pub id: String,
    pub capacity: Rational,
    pub stops: Vec<Stop>,
}

impl Trip {
    /// Builds a trip from `(station, arrival, departure)` triples.
    pub fn new(id: impl Into<String>, capacity: Rational, stops: &[(&str, Option<Time>, Option<Time>)]) -> Self {
        Trip {
            id: id.into(),
            capacity,
            stops: stops.iter().map(|&(station, arrival, departure)| Stop { station: station.into(), arrival, departure }).collect(),
        }
    }

    /// Convenience constructor: `times[k]` is the arrival and departure at stop k
    /// (arrival absent at the first stop, departure absent at the last).
    pub fn simple(id: impl Into<String>, capacity: Rational, stops: &[(&str, Time)]) -> Self {
        let last = stops.len().saturating_sub(1);
        Trip {
            id: id.into(),
            capacity,
            stops: stops
                .iter()
                .enumerate()
                .map(|(k, &(station, t))| Stop {
                    station: station.into(),
                    arrival: (k > 0).then_some(t),
                    departure: (k < last).then_some(t),
                })
                .collect(),
        }
    }

    pub fn first_departure(&self) -> Option<Time> {
        self.stops.first().and_then(|s| s.departure)
    }

    pub fn shifted(&self, by: Time, id: String) -> Trip {
        Trip {
            id,
            capacity: self.capacity.clone(),
            stops: self
                .stops
                .iter()
                .map(|s| Stop { station: s.station.clone(), arrival: s.arrival.map(|t| t + by), departure: s.departure.map(|t| t + by) })
                .collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NetworkError {
    DuplicateStation(String),
    DuplicateTrip(String),
    UnknownStation { trip: String, station: String },
    MalformedTrip { trip: String, reason: String },
    UnknownCommodityStation { commodity: String, station: String },
    InvalidPeriod,
}

impl fmt::Display for NetworkError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkError::DuplicateStation(s) => write!(f, "duplicate station id `{s}`"),
            NetworkError::DuplicateTrip(t) => write!(f, "duplicate trip id `{t}`"),
            NetworkError::UnknownStation { trip, station } => {
                write!(f, "trip `{trip}` references unknown station `{station}`")
            }
            NetworkError::MalformedTrip { trip, reason } => write!(f, "trip `{trip}`: {reason}"),
            NetworkError::UnknownCommodityStation { commodity, station } => {
                write!(f, "commodity `{commodity}` references unknown station `{station}`")
            }
            NetworkError::InvalidPeriod => write!(f, "period must be positive and the horizon non-empty"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeKind {
    Arrival { trip: TripIdx, station: StationIdx, stop: u32 },
    OnPlatform { station: StationIdx },
    Departure { trip: TripIdx, station: StationIdx, stop: u32 },
}

impl NodeKind {
    fn rank(&self) -> u8 {
        match self {
            NodeKind::Arrival { .. } => 0,
            NodeKind::OnPlatform { .. } => 1,
            NodeKind::Departure { .. } => 2,
        }
    }

    pub fn station(&self) -> StationIdx {
        match *self {
            NodeKind::Arrival { station, .. } | NodeKind::OnPlatform { station } | NodeKind::Departure { station, .. } => station,
        }
    }

    fn trip_and_stop(&self) -> (u32, u32) {
        match *self {
            NodeKind::Arrival { trip, stop, .. } | NodeKind::Departure { trip, stop, .. } => (trip.0, stop),
            NodeKind::OnPlatform { .. } => (u32::MAX, 0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Node {
    pub kind: NodeKind,
    pub time: Time,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EdgeKind {
    Waiting,
    Boarding,
    Driving,
    Alighting,
    Dwelling,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Edge {
    pub tail: NodeIdx,
    pub head: NodeIdx,
    pub kind: EdgeKind,
    /// Set for every edge touching a vehicle (boarding, driving, alighting, dwelling).
    pub trip: Option<TripIdx>,
}

/// Acyclic time-expanded graph.
///
/// Node indices are a topological order: nodes are sorted by time, then
/// arrival < on-platform < departure, then station, trip and stop.
#[derive(Clone, Debug)]
pub struct TimeExpandedGraph {
    stations: Vec<String>,
    trips: Vec<(String, Rational)>,
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    out_edges: Vec<Vec<EdgeIdx>>,
    in_edges: Vec<Vec<EdgeIdx>>,
    platforms: Vec<Vec<NodeIdx>>,
    trip_driving: Vec<Vec<EdgeIdx>>,
    driving: Vec<EdgeIdx>,
    driving_rank: Vec<Option<u32>>,
}

impl TimeExpandedGraph {
    pub fn build(stations: &[Station], trips: &[Trip]) -> Result<Self, NetworkError> {
        let mut station_index = BTreeMap::new();
        for (k, s) in stations.iter().enumerate() {
            if station_index.insert(s.id.as_str(), StationIdx(k as u32)).is_some() {
                return Err(NetworkError::DuplicateStation(s.id.clone()));
            }
        }
        let mut trip_ids = BTreeMap::new();
        for t in trips {
            if trip_ids.insert(t.id.as_str(), ()).is_some() {
                return Err(NetworkError::DuplicateTrip(t.id.clone()));
            }
            validate_trip(t, &station_index)?;
        }

        // Collect nodes, then sort canonically.
        let mut raw_nodes: Vec<Node> = Vec::new();
        let mut platform_times: BTreeMap<(StationIdx, Time), ()> = BTreeMap::new();
        for (z, t) in trips.iter().enumerate() {
            let trip = TripIdx(z as u32);
            for (k, stop) in t.stops.iter().enumerate() {
                let station = station_index[stop.station.as_str()];
                if let Some(a) = stop.arrival {
                    raw_nodes.push(Node { kind: NodeKind::Arrival { trip, station, stop: k as u32 }, time: a });
                    platform_times.insert((station, a), ());
                }
                if let Some(d) = stop.departure {
                    raw_nodes.push(Node { kind: NodeKind::Departure { trip, station, stop: k as u32 }, time: d });
                    platform_times.insert((station, d), ());
                }
            }
        }
        for &(station, time) in platform_times.keys() {
            raw_nodes.push(Node { kind: NodeKind::OnPlatform { station }, time });
        }
        raw_nodes.sort_by_key(|n| (n.time, n.kind.rank(), n.kind.station(), n.kind.trip_and_stop()));

        let mut platform_node = BTreeMap::new();
        let mut vehicle_node = BTreeMap::new();
        let mut platforms = vec![Vec::new(); stations.len()];
        for (k, n) in raw_nodes.iter().enumerate() {
            let idx = NodeIdx(k as u32);
            match n.kind {
                NodeKind::OnPlatform { station } => {
                    platform_node.insert((station, n.time), idx);
                    platforms[station.index()].push(idx);
                }
                NodeKind::Arrival { trip, stop, .. } => {
                    vehicle_node.insert((trip, stop, false), idx);
                }
                NodeKind::Departure { trip, stop, .. } => {
                    vehicle_node.insert((trip, stop, true), idx);
                }
            }
        }

        let mut raw_edges: Vec<Edge> = Vec::new();
        for plats in &platforms {
            for w in plats.windows(2) {
                raw_edges.push(Edge { tail: w[0], head: w[1], kind: EdgeKind::Waiting, trip: None });
            }
        }
        for (z, t) in trips.iter().enumerate() {
            let trip = TripIdx(z as u32);
            let last = t.stops.len() - 1;
            for (k, stop) in t.stops.iter().enumerate() {
                let station = station_index[stop.station.as_str()];
                let stop_no = k as u32;
                if let Some(d) = stop.departure {
                    let dep = vehicle_node[&(trip, stop_no, true)];
                    let plat = platform_node[&(station, d)];
                    raw_edges.push(Edge { tail: plat, head: dep, kind: EdgeKind::Boarding, trip: Some(trip) });
                    let arr_next = vehicle_node[&(trip, stop_no + 1, false)];
                    raw_edges.push(Edge { tail: dep, head: arr_next, kind: EdgeKind::Driving, trip: Some(trip) });
                }
                if let Some(a) = stop.arrival {
                    let arr = vehicle_node[&(trip, stop_no, false)];
                    let plat = platform_node[&(station, a)];
                    raw_edges.push(Edge { tail: arr, head: plat, kind: EdgeKind::Alighting, trip: Some(trip) });
                    if k < last {
                        let dep = vehicle_node[&(trip, stop_no, true)];
                        raw_edges.push(Edge { tail: arr, head: dep, kind: EdgeKind::Dwelling, trip: Some(trip) });
                    }
                }
            }
        }
        raw_edges.sort_by_key(|e| (e.tail, e.kind, e.head));

        let n = raw_nodes.len();
        let mut out_edges = vec![Vec::new(); n];
        let mut in_edges = vec![Vec::new(); n];
        let mut trip_driving = vec![Vec::new(); trips.len()];
        let mut driving = Vec::new();
        let mut driving_rank = vec![None; raw_edges.len()];
        for (k, e) in raw_edges.iter().enumerate() {
            let idx = EdgeIdx(k as u32);
            out_edges[e.tail.index()].push(idx);
            in_edges[e.head.index()].push(idx);
            if e.kind == EdgeKind::Driving {
                driving_rank[k] = Some(driving.len() as u32);
                driving.push(idx);
                trip_driving[e.trip.unwrap().index()].push(idx);
            }
        }
        for list in &mut trip_driving {
            list.sort_by_key(|&e| raw_nodes[raw_edges[e.index()].tail.index()].time);
        }

        Ok(TimeExpandedGraph {
            stations: stations.iter().map(|s| s.id.clone()).collect(),
            trips: trips.iter().map(|t| (t.id.clone(), t.capacity.clone())).collect(),
            nodes: raw_nodes,
            edges: raw_edges,
            out_edges,
            in_edges,
            platforms,
            trip_driving,
            driving,
            driving_rank,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn node(&self, v: NodeIdx) -> &Node {
        &self.nodes[v.index()]
    }

    pub fn edge(&self, e: EdgeIdx) -> &Edge {
        &self.edges[e.index()]
    }

    pub fn time(&self, v: NodeIdx) -> Time {
        self.nodes[v.index()].time
    }

    pub fn kind(&self, e: EdgeIdx) -> EdgeKind {
        self.edges[e.index()].kind
    }

    pub fn tau(&self, e: EdgeIdx) -> Time {
        let edge = &self.edges[e.index()];
        self.time(edge.head) - self.time(edge.tail)
    }

    pub fn out_edges(&self, v: NodeIdx) -> &[EdgeIdx] {
        &self.out_edges[v.index()]
    }

    pub fn in_edges(&self, v: NodeIdx) -> &[EdgeIdx] {
        &self.in_edges[v.index()]
    }

    pub fn station_count(&self) -> usize {
        self.stations.len()
    }

    pub fn station_id(&self, s: StationIdx) -> &str {
        &self.stations[s.index()]
    }

    pub fn station_index(&self, id: &str) -> Option<StationIdx> {
        self.stations.iter().position(|s| s == id).map(|k| StationIdx(k as u32))
    }

    pub fn trip_count(&self) -> usize {
        self.trips.len()
    }

    pub fn trip_id(&self, z: TripIdx) -> &str {
        &self.trips[z.index()].0
    }

    /// On-platform nodes of a station in increasing time.
    pub fn platforms(&self, s: StationIdx) -> &[NodeIdx] {
        &self.platforms[s.index()]
    }

    pub fn platform_at(&self, s: StationIdx, t: Time) -> Option<NodeIdx> {
        let plats = &self.platforms[s.index()];
        plats.binary_search_by_key(&t, |&v| self.time(v)).ok().map(|k| plats[k])
    }

    /// Capacity ν_e of a driving edge.
    pub fn capacity(&self, e: EdgeIdx) -> Option<&Rational> {
        let edge = &self.edges[e.index()];
        match edge.kind {
            EdgeKind::Driving => Some(&self.trips[edge.trip.unwrap().index()].1),
            _ => None,
        }
    }

    /// Driving edges in canonical order.
    pub fn driving_edges(&self) -> &[EdgeIdx] {
        &self.driving
    }

    /// Position of a driving edge within [`Self::driving_edges`].
    pub fn driving_rank(&self, e: EdgeIdx) -> Option<usize> {
        self.driving_rank[e.index()].map(|r| r as usize)
    }

    /// Driving edges of one trip in travel order.
    pub fn trip_driving_edges(&self, z: TripIdx) -> &[EdgeIdx] {
        &self.trip_driving[z.index()]
    }

    /// e ↦ e⁺ for boarding edges.
    pub fn successor(&self, e: EdgeIdx) -> Option<EdgeIdx> {
        let edge = &self.edges[e.index()];
        if edge.kind != EdgeKind::Boarding {
            return None;
        }
        self.out_edges[edge.head.index()].first().copied()
    }

    /// The boarding edge whose successor is the driving edge `e`.
    pub fn boarding_into(&self, e: EdgeIdx) -> Option<EdgeIdx> {
        let edge = &self.edges[e.index()];
        if edge.kind != EdgeKind::Driving {
            return None;
        }
        self.in_edges[edge.tail.index()].iter().copied().find(|&b| self.kind(b) == EdgeKind::Boarding)
    }

    /// Previous driving edge of the same trip, if any.
    pub fn previous_driving(&self, e: EdgeIdx) -> Option<EdgeIdx> {
        let trip = self.edges[e.index()].trip?;
        let list = &self.trip_driving[trip.index()];
        let k = list.iter().position(|&x| x == e)?;
        k.checked_sub(1).map(|p| list[p])
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    pub fn count_platforms(&self) -> usize {
        self.platforms.iter().map(Vec::len).sum()
    }

    /// A stable identity of an edge independent of indices, used to map paths
    /// between graphs built from overlapping timetables.
    pub fn edge_key(&self, e: EdgeIdx) -> EdgeKey {
        let edge = &self.edges[e.index()];
        EdgeKey { kind: edge.kind, tail: self.node_key(edge.tail), head: self.node_key(edge.head) }
    }

    fn node_key(&self, v: NodeIdx) -> NodeKey {
        let node = &self.nodes[v.index()];
        let (trip, stop) = match node.kind {
            NodeKind::Arrival { trip, stop, .. } | NodeKind::Departure { trip, stop, .. } => {
                (Some(self.trips[trip.index()].0.clone()), stop)
            }
            NodeKind::OnPlatform { .. } => (None, 0),
        };
        NodeKey { rank: node.kind.rank(), station: self.stations[node.kind.station().index()].clone(), trip, stop, time: node.time }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct NodeKey {
    rank: u8,
    station: String,
    trip: Option<String>,
    stop: u32,
    time: Time,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct EdgeKey {
    kind: EdgeKind,
    tail: NodeKey,
    head: NodeKey,
}

fn validate_trip(t: &Trip, stations: &BTreeMap<&str, StationIdx>) -> Result<(), NetworkError> {
    let bad = |reason: String| NetworkError::MalformedTrip { trip: t.id.clone(), reason };
    if t.stops.len() < 2 {
        return Err(bad("needs at least two stops".into()));
    }
    if !t.capacity.is_positive() {
        return Err(bad("capacity must be positive".into()));
    }
    let last = t.stops.len() - 1;
    for (k, stop) in t.stops.iter().enumerate() {
        if !stations.contains_key(stop.station.as_str()) {
            return Err(NetworkError::UnknownStation { trip: t.id.clone(), station: stop.station.clone() });
        }
        if k > 0 && stop.arrival.is_none() {
            return Err(bad(format!("stop {k} lacks an arrival time")));
        }
        if k < last && stop.departure.is_none() {
            return Err(bad(format!("stop {k} lacks a departure time")));
        }
        if k == 0 && stop.arrival.is_some() {
            return Err(bad("first stop has an arrival time".into()));
        }
        if k == last && stop.departure.is_some() {
            return Err(bad("last stop has a departure time".into()));
        }
        if let (Some(a), Some(d)) = (stop.arrival, stop.departure) {
            if d < a {
                return Err(bad(format!("departs stop {k} before arriving")));
            }
        }
        if k < last {
            let d = stop.departure.unwrap();
            let a = t.stops[k + 1].arrival.unwrap();
            if a <= d {
                return Err(bad(format!("arrival at stop {} is not after departure at stop {k}", k + 1)));
            }
        }
    }
    Ok(())
}

/// Shifts period-relative templates into concrete trips whose first
/// departure lies in `[start, end)`. Copies are suffixed `_{k}`.
pub fn unroll_periodic(templates: &[Trip], period: Time, start: Time, end: Time) -> Result<Vec<Trip>, NetworkError> {
    if period <= 0 || end <= start {
        return Err(NetworkError::InvalidPeriod);
    }
    let mut out = Vec::new();
    for t in templates {
        let d0 = t
            .first_departure()
            .ok_or_else(|| NetworkError::MalformedTrip { trip: t.id.clone(), reason: "template has no first departure".into() })?;
        let k_min = div_ceil(start - d0, period);
        let k_max = div_ceil(end - d0, period) - 1;
        for k in k_min..=k_max {
            out.push(t.shifted(k * period, format!("{}_{}", t.id, k)));
        }
    }
    Ok(out)
}

fn div_ceil(a: Time, b: Time) -> Time {
    let q = a.div_euclid(b);
    if a.rem_euclid(b) == 0 {
        q
    } else {
        q + 1
    }
}

/// An edge of G′ as seen from one commodity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExtEdge {
    Base(EdgeIdx),
    /// α_i → eligible origin platform.
    Source(NodeIdx),
    /// destination platform → ω_i.
    Sink(NodeIdx),
    /// α_i → ω_i.
    Outside,
}

/// Base graph plus the commodities with resolved eligible sources and sinks.
#[derive(Clone, Debug)]
pub struct ExtendedGraph {
    base: TimeExpandedGraph,
    commodities: Vec<Commodity>,
    sources: Vec<Vec<NodeIdx>>,
    sinks: Vec<Vec<NodeIdx>>,
    big_m: Rational,
}

impl ExtendedGraph {
    pub fn new(base: TimeExpandedGraph, commodities: Vec<Commodity>) -> Result<Self, NetworkError> {
        let mut sources = Vec::with_capacity(commodities.len());
        let mut sinks = Vec::with_capacity(commodities.len());
        for c in &commodities {
            let lookup = |id: &str| {
                base.station_index(id).ok_or_else(|| NetworkError::UnknownCommodityStation { commodity: c.id.clone(), station: id.into() })
            };
            let s = lookup(&c.origin)?;
            let t = lookup(&c.destination)?;
            sources.push(base.platforms(s).iter().copied().filter(|&v| c.window.contains(base.time(v))).collect());
            sinks.push(
                base.platforms(t)
                    .iter()
                    .copied()
                    .filter(|&v| base.in_edges(v).iter().any(|&e| base.kind(e) == EdgeKind::Alighting))
                    .collect(),
            );
        }
        let mut xg = ExtendedGraph { base, commodities, sources, sinks, big_m: rational::one() };
        let mut highest = rational::zero();
        let mut lowest = rational::zero();
        for i in 0..xg.commodities.len() {
            let (lo, hi) = xg.strategy_cost_range(i);
            highest = rational::max(highest, hi);
            lowest = rational::min(lowest, lo);
        }
        // max π + 1; shifted further when the fixed-departure transform produced negative costs
        xg.big_m = highest - lowest + rational::one();
        Ok(xg)
    }

    pub fn base(&self) -> &TimeExpandedGraph {
        &self.base
    }

    pub fn commodities(&self) -> &[Commodity] {
        &self.commodities
    }

    pub fn commodity(&self, i: usize) -> &Commodity {
        &self.commodities[i]
    }

    pub fn num_commodities(&self) -> usize {
        self.commodities.len()
    }

    /// Eligible origin platforms (heads of the α_i edges).
    pub fn sources(&self, i: usize) -> &[NodeIdx] {
        &self.sources[i]
    }

    /// Destination platforms (tails of the ω_i edges).
    pub fn sinks(&self, i: usize) -> &[NodeIdx] {
        &self.sinks[i]
    }

    pub fn is_sink(&self, i: usize, v: NodeIdx) -> bool {
        self.sinks[i].binary_search(&v).is_ok()
    }

    pub fn is_source(&self, i: usize, v: NodeIdx) -> bool {
        self.sources[i].binary_search(&v).is_ok()
    }

    /// The penalty constant M.
    pub fn big_m(&self) -> &Rational {
        &self.big_m
    }

    /// All G′ edges of commodity i in a fixed order.
    pub fn ext_edges(&self, i: usize) -> Vec<ExtEdge> {
        let mut out: Vec<ExtEdge> = (0..self.base.num_edges()).map(|k| ExtEdge::Base(EdgeIdx(k as u32))).collect();
        out.extend(self.sources[i].iter().map(|&v| ExtEdge::Source(v)));
        out.extend(self.sinks[i].iter().map(|&v| ExtEdge::Sink(v)));
        out.push(ExtEdge::Outside);
        out
    }

    /// β_i·τ_e for a base edge.
    pub fn travel_cost(&self, i: usize, e: EdgeIdx) -> Rational {
        &self.commodities[i].beta * rational::time(self.base.tau(e))
    }

    /// c_{i,e}(f) on G′.
    pub fn edge_cost(&self, i: usize, e: ExtEdge, f: &Flow) -> Rational {
        match e {
            ExtEdge::Base(b) => match self.base.successor(b) {
                Some(plus) => {
                    if f.load(plus) <= self.base.capacity(plus).unwrap() {
                        rational::zero()
                    } else {
                        self.big_m.clone()
                    }
                }
                None => self.travel_cost(i, b),
            },
            ExtEdge::Source(_) => rational::zero(),
            ExtEdge::Sink(v) => self.commodities[i].arrival_cost(self.base.time(v)),
            ExtEdge::Outside => self.commodities[i].outside_cost.clone(),
        }
    }

    /// Cheapest and most expensive α_i–ω_i cost (outside edge included) by DP over the DAG.
    fn strategy_cost_range(&self, i: usize) -> (Rational, Rational) {
        let c = &self.commodities[i];
        let mut lo = c.outside_cost.clone();
        let mut hi = c.outside_cost.clone();
        let n = self.base.num_nodes();
        let mut range: Vec<Option<(Rational, Rational)>> = vec![None; n];
        for &s in &self.sources[i] {
            range[s.index()] = Some((rational::zero(), rational::zero()));
        }
        let Some(start) = self.sources[i].first() else { return (lo, hi) };
        for v in start.index()..n {
            let Some((dmin, dmax)) = range[v].clone() else { continue };
            let node = NodeIdx(v as u32);
            if self.is_sink(i, node) {
                let pen = c.arrival_cost(self.base.time(node));
                lo = rational::min(lo, &dmin + &pen);
                hi = rational::max(hi, &dmax + pen);
            }
            for &e in self.base.out_edges(node) {
                let w = self.base.edge(e).head.index();
                let step = self.travel_cost(i, e);
                let cand = (&dmin + &step, &dmax + step);
                range[w] = Some(match range[w].take() {
                    None => cand,
                    Some((a, b)) => (rational::min(a, cand.0), rational::max(b, cand.1)),
                });
            }
        }
        (lo, hi)
    }
}
