//! Commodities, elastic demand groups, strategy costs and the fixed-departure transform.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{Signed, Zero};

use crate::flow::{Flow, Path, Strategy};
use crate::instances::Instance;
use crate::network::{EdgeIdx, EdgeKind, NodeIdx, TimeExpandedGraph};
use crate::rational::{self, Rational, Time};

/// Closed integer interval of admissible departure times.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Window {
    pub lo: Time,
    pub hi: Time,
}

impl Window {
    pub fn new(lo: Time, hi: Time) -> Self {
        Window { lo, hi }
    }

    pub fn singleton(t: Time) -> Self {
        Window { lo: t, hi: t }
    }

    pub fn contains(&self, t: Time) -> bool {
        self.lo <= t && t <= self.hi
    }

    pub fn is_singleton(&self) -> bool {
        self.lo == self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Commodity {
    pub id: String,
    pub origin: String,
    pub destination: String,
    pub window: Window,
    pub target: Time,
    /// β: cost per second of travel time.
    pub beta: Rational,
    /// γ⁺: cost per second of late arrival.
    pub gamma_late: Rational,
    /// γ⁻: cost per second of early arrival.
    pub gamma_early: Rational,
    pub demand: Rational,
    pub outside_cost: Rational,
}

impl Commodity {
    /// Pure travel-time commodity: β = 1, γ⁺ = γ⁻ = 0, T = 0.
    pub fn new(
        id: impl Into<String>,
        origin: impl Into<String>,
        destination: impl Into<String>,
        window: Window,
        demand: Rational,
        outside_cost: Rational,
    ) -> Self {
        Commodity {
            id: id.into(),
            origin: origin.into(),
            destination: destination.into(),
            window,
            target: 0,
            beta: rational::one(),
            gamma_late: rational::zero(),
            gamma_early: rational::zero(),
            demand,
            outside_cost,
        }
    }

    /// γ⁺·max{0, t−T} + γ⁻·max{0, T−t}.
    pub fn arrival_cost(&self, t: Time) -> Rational {
        if t > self.target {
            &self.gamma_late * rational::time(t - self.target)
        } else if t < self.target {
            &self.gamma_early * rational::time(self.target - t)
        } else {
            rational::zero()
        }
    }

    /// π for a path departing at `dep` and arriving at `arr`.
    pub fn trip_cost(&self, dep: Time, arr: Time) -> Rational {
        &self.beta * rational::time(arr - dep) + self.arrival_cost(arr)
    }
}

/// Cost of a strategy of commodity `c` on graph `g`.
pub fn path_cost(g: &TimeExpandedGraph, c: &Commodity, s: &Strategy) -> Rational {
    match s {
        Strategy::Outside => c.outside_cost.clone(),
        Strategy::Path(p) => c.trip_cost(p.departure(g), p.arrival(g)),
    }
}

/// Right-continuous non-increasing step function: `Q(π)` is the volume of the
/// last breakpoint whose cost is ≤ π.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ElasticCurve {
    breakpoints: Vec<(Rational, Rational)>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DemandError {
    InvalidCurve(&'static str),
    CostsNotIncreasing,
    NotFixedDeparture { commodity: String },
    Truncated { cap: usize },
}

impl fmt::Display for DemandError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DemandError::InvalidCurve(why) => write!(f, "invalid elastic curve: {why}"),
            DemandError::CostsNotIncreasing => write!(f, "cost list must be strictly increasing"),
            DemandError::NotFixedDeparture { commodity } => {
                write!(f, "commodity `{commodity}` has a departure window and positive travel-time weight")
            }
            DemandError::Truncated { cap } => write!(f, "distinct-cost enumeration exceeded the cap of {cap}"),
        }
    }
}

impl ElasticCurve {
    /// Breakpoints sorted by strictly increasing cost, starting at cost 0,
    /// non-increasing volumes, ending with volume 0 at π_max.
    pub fn new(breakpoints: Vec<(Rational, Rational)>) -> Result<Self, DemandError> {
        let (first, last) = match (breakpoints.first(), breakpoints.last()) {
            (Some(f), Some(l)) => (f, l),
            _ => return Err(DemandError::InvalidCurve("no breakpoints")),
        };
        if !first.0.is_zero() {
            return Err(DemandError::InvalidCurve("first breakpoint must be at cost 0"));
        }
        if !last.1.is_zero() || breakpoints.len() < 2 {
            return Err(DemandError::InvalidCurve("last breakpoint must have volume 0"));
        }
        for w in breakpoints.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(DemandError::InvalidCurve("costs must increase"));
            }
            if w[1].1 > w[0].1 {
                return Err(DemandError::InvalidCurve("volumes must not increase"));
            }
        }
        if breakpoints.iter().any(|b| b.1.is_negative()) {
            return Err(DemandError::InvalidCurve("negative volume"));
        }
        Ok(ElasticCurve { breakpoints })
    }

    /// Constant volume `d` on `[0, π_max)`.
    pub fn constant(d: Rational, pi_max: Rational) -> Result<Self, DemandError> {
        Self::new(vec![(rational::zero(), d), (pi_max, rational::zero())])
    }

    pub fn breakpoints(&self) -> &[(Rational, Rational)] {
        &self.breakpoints
    }

    pub fn pi_max(&self) -> &Rational {
        &self.breakpoints.last().unwrap().0
    }

    pub fn eval(&self, pi: &Rational) -> Rational {
        self.breakpoints.iter().take_while(|(c, _)| c <= pi).last().map(|(_, v)| v.clone()).unwrap_or_else(rational::zero)
    }
}

/// A demand group with elastic volume; discretized into commodities.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Group {
    pub id: String,
    pub origin: String,
    pub destination: String,
    pub window: Window,
    pub target: Time,
    pub beta: Rational,
    pub gamma_late: Rational,
    pub gamma_early: Rational,
    pub curve: ElasticCurve,
}

impl Group {
    fn as_commodity(&self, id: String, demand: Rational, outside_cost: Rational) -> Commodity {
        Commodity {
            id,
            origin: self.origin.clone(),
            destination: self.destination.clone(),
            window: self.window,
            target: self.target,
            beta: self.beta.clone(),
            gamma_late: self.gamma_late.clone(),
            gamma_early: self.gamma_early.clone(),
            demand,
            outside_cost,
        }
    }
}

/// Distinct path costs, possibly cut off at the cap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostSet {
    pub costs: Vec<Rational>,
    pub truncated: bool,
}

/// The sorted set of distinct costs of the group's paths.
///
/// For every eligible start platform a forward sweep collects the reachable
/// destination arrival times; each (departure, arrival) signature determines
/// the cost.
pub fn enumerate_distinct_costs(group: &Group, g: &TimeExpandedGraph, cap: usize) -> CostSet {
    let (Some(s), Some(t)) = (g.station_index(&group.origin), g.station_index(&group.destination)) else {
        return CostSet { costs: Vec::new(), truncated: false };
    };
    let probe = group.as_commodity(String::new(), rational::zero(), rational::zero());
    let mut costs = BTreeSet::new();
    let mut signatures = BTreeSet::new();
    let n = g.num_nodes();
    for &start in g.platforms(s) {
        let dep = g.time(start);
        if !group.window.contains(dep) {
            continue;
        }
        let mut reach = vec![false; n];
        reach[start.index()] = true;
        for v in start.index()..n {
            if !reach[v] {
                continue;
            }
            let node = NodeIdx(v as u32);
            if g.node(node).kind.station() == t && is_arrival_platform(g, node) {
                let arr = g.time(node);
                if signatures.insert((dep, arr)) {
                    costs.insert(probe.trip_cost(dep, arr));
                    if costs.len() > cap {
                        let costs: Vec<_> = costs.into_iter().take(cap).collect();
                        return CostSet { costs, truncated: true };
                    }
                }
            }
            for &e in g.out_edges(node) {
                reach[g.edge(e).head.index()] = true;
            }
        }
    }
    CostSet { costs: costs.into_iter().collect(), truncated: false }
}

fn is_arrival_platform(g: &TimeExpandedGraph, v: NodeIdx) -> bool {
    matches!(g.node(v).kind, crate::network::NodeKind::OnPlatform { .. }) && g.in_edges(v).iter().any(|&e| g.kind(e) == EdgeKind::Alighting)
}

/// Splits a group into willingness bands delimited by consecutive costs.
pub fn discretize_elastic(group: &Group, costs: &[Rational]) -> Result<Vec<Commodity>, DemandError> {
    if costs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(DemandError::CostsNotIncreasing);
    }
    let pi_max = group.curve.pi_max().clone();
    let mut bounds = Vec::with_capacity(costs.len() + 2);
    bounds.push(rational::zero());
    bounds.extend(costs.iter().cloned());
    bounds.push(pi_max);
    let mut out = Vec::new();
    for j in 1..bounds.len() {
        let (lo, hi) = (&bounds[j - 1], &bounds[j]);
        let demand = group.curve.eval(lo) - group.curve.eval(hi);
        if demand.is_positive() {
            let outside = (lo + hi) / rational::int(2);
            out.push(group.as_commodity(alloc::format!("{}#{}", group.id, j), demand, outside));
        }
    }
    Ok(out)
}

/// Result of the fixed-departure transform.
#[derive(Clone, Debug)]
pub struct FdtTransform {
    pub instance: Instance,
    /// Indices of commodities whose transformed earliness coefficient is negative.
    pub negative_earliness: Vec<usize>,
    /// Transformed start time per commodity; `None` when no platform is eligible.
    pub start_times: Vec<Option<Time>>,
}

/// Event times (arrivals and departures) at every station.
pub fn station_event_times(instance: &Instance) -> BTreeMap<&str, BTreeSet<Time>> {
    let mut out: BTreeMap<&str, BTreeSet<Time>> = BTreeMap::new();
    for t in &instance.trips {
        for stop in &t.stops {
            let set = out.entry(stop.station.as_str()).or_default();
            set.extend(stop.arrival);
            set.extend(stop.departure);
        }
    }
    out
}

/// Rewrites every commodity to a singleton window at its earliest eligible
/// on-platform time, with travel time folded into the arrival penalties.
///
/// The outside cost is shifted by −β(T−θ′) so that each strategy keeps its
/// cost difference to the outside option.
pub fn fdt_transform(instance: &Instance) -> Result<FdtTransform, DemandError> {
    let events = station_event_times(instance);
    let mut out = instance.clone();
    let mut negative_earliness = Vec::new();
    let mut start_times = Vec::new();
    for (k, c) in out.commodities.iter_mut().enumerate() {
        if !c.window.is_singleton() && !c.beta.is_zero() {
            return Err(DemandError::NotFixedDeparture { commodity: c.id.clone() });
        }
        let start = events.get(c.origin.as_str()).and_then(|ts| ts.range(c.window.lo..=c.window.hi).next().copied());
        start_times.push(start);
        let Some(theta) = start else { continue };
        c.window = Window::singleton(theta);
        if c.beta.is_zero() {
            continue;
        }
        let beta = core::mem::replace(&mut c.beta, rational::zero());
        c.outside_cost = &c.outside_cost - &beta * rational::time(c.target - theta);
        c.gamma_late = &c.gamma_late + &beta;
        c.gamma_early = &c.gamma_early - &beta;
        if c.gamma_early.is_negative() {
            negative_earliness.push(k);
        }
    }
    Ok(FdtTransform { instance: out, negative_earliness, start_times })
}

/// The extension f̄: each path is prefixed with waiting edges from the
/// transformed start platform. Merged paths have their volumes summed.
pub fn extend_flow_fdt(g: &TimeExpandedGraph, flow: &Flow, start_times: &[Option<Time>]) -> Flow {
    let mut out = Flow::new(g.num_edges());
    for ((i, s), vol) in flow.entries() {
        let extended = match s {
            Strategy::Outside => Strategy::Outside,
            Strategy::Path(p) => {
                let first = p.start(g);
                let station = g.node(first).kind.station();
                let theta = start_times[*i].expect("a used path implies an eligible start");
                let mut edges: Vec<EdgeIdx> = Vec::new();
                let mut v = g.platform_at(station, theta).expect("start platform exists");
                while v != first {
                    let wait = g
                        .out_edges(v)
                        .iter()
                        .copied()
                        .find(|&e| g.kind(e) == EdgeKind::Waiting)
                        .expect("waiting chain reaches the path start");
                    edges.push(wait);
                    v = g.edge(wait).head;
                }
                edges.extend_from_slice(p.edges());
                Strategy::Path(Path::new(edges))
            }
        };
        out.add(g, *i, extended, vol.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{gen_example, Example};
    use crate::rational::{frac, int};

    const H: Time = 3600;

    #[test]
    fn arrival_cost_examples() {
        let mut c = Commodity::new("c", "a", "b", Window::singleton(0), int(1), int(1));
        c.gamma_late = int(1);
        assert_eq!(c.arrival_cost(1234), int(1234));
        c.target = 100;
        assert_eq!(c.arrival_cost(100), int(0));
        c.gamma_late = int(3);
        c.gamma_early = int(1);
        assert_eq!(c.arrival_cost(110), int(30));
        assert_eq!(c.arrival_cost(90), int(10));
    }

    #[test]
    fn study_cost_setting() {
        let mut c = Commodity::new("c", "a", "b", Window::singleton(0), int(1), int(1));
        c.target = 1200;
        c.gamma_late = int(3);
        c.gamma_early = int(1);
        assert_eq!(c.trip_cost(0, 1800), int(1800 + 3 * 600));
    }

    #[test]
    fn fig1_travel_cost() {
        let c = Commodity::new("c", "a", "c", Window::singleton(H), int(1), int(1));
        assert_eq!(c.trip_cost(H, 9 * H / 2), int(12600));
    }

    fn group(curve: ElasticCurve) -> Group {
        Group {
            id: "g".into(),
            origin: "a".into(),
            destination: "c".into(),
            window: Window::singleton(H),
            target: 0,
            beta: int(1),
            gamma_late: int(0),
            gamma_early: int(0),
            curve,
        }
    }

    #[test]
    fn fig1_distinct_costs() {
        let inst = gen_example(&Example::Fig1);
        let g = TimeExpandedGraph::build(&inst.stations, &inst.trips).unwrap();
        let grp = group(ElasticCurve::constant(int(2), int(100_000)).unwrap());
        let set = enumerate_distinct_costs(&grp, &g, 10_000);
        assert_eq!(set.costs, [int(12600), int(18000)]);
        assert!(!set.truncated);
        let capped = enumerate_distinct_costs(&grp, &g, 1);
        assert!(capped.truncated);
        assert_eq!(capped.costs.len(), 1);
        let mut unreachable = grp.clone();
        unreachable.destination = "a".into();
        assert!(enumerate_distinct_costs(&unreachable, &g, 10).costs.is_empty());
    }

    #[test]
    fn discretize_constant_curve() {
        let grp = group(ElasticCurve::constant(int(5), int(100)).unwrap());
        let out = discretize_elastic(&grp, &[int(10)]).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].demand, int(5));
        assert!(out[0].outside_cost > int(10) && out[0].outside_cost < int(100));
        let none = discretize_elastic(&grp, &[]).unwrap();
        assert_eq!(none.len(), 1);
        assert_eq!(none[0].demand, int(5));
        assert_eq!(none[0].outside_cost, int(50));
        assert_eq!(discretize_elastic(&grp, &[int(3), int(3)]), Err(DemandError::CostsNotIncreasing));
    }

    #[test]
    fn discretize_decreasing_curve() {
        let curve = ElasticCurve::new(vec![
            (int(0), int(10)),
            (int(2), int(8)),
            (int(5), int(5)),
            (int(7), int(3)),
            (int(9), int(1)),
            (int(12), int(0)),
        ])
        .unwrap();
        let grp = group(curve);
        let costs = [int(1), int(4), int(6), int(10)];
        let out = discretize_elastic(&grp, &costs).unwrap();
        let demands: Vec<_> = out.iter().map(|c| c.demand.clone()).collect();
        // Q(0)-Q(1), Q(1)-Q(4), Q(4)-Q(6), Q(6)-Q(10), Q(10)-Q(12)
        assert_eq!(demands, [int(0), int(2), int(3), int(4), int(1)].into_iter().filter(|d| !d.is_zero()).collect::<Vec<_>>());
        assert_eq!(out.len(), 4);
        let total: Rational = demands.iter().sum();
        assert_eq!(total, int(10));
        for c in &out {
            let band: usize = c.id.rsplit('#').next().unwrap().parse().unwrap();
            let lo = if band == 1 { int(0) } else { costs[band - 2].clone() };
            let hi = costs.get(band - 1).cloned().unwrap_or(int(12));
            assert!(lo < c.outside_cost && c.outside_cost < hi);
            for (k, p) in costs.iter().enumerate() {
                if k + 1 < band {
                    assert!(*p < c.outside_cost);
                } else {
                    assert!(*p > c.outside_cost);
                }
            }
        }
    }

    #[test]
    fn curve_validation() {
        assert!(ElasticCurve::new(vec![(int(1), int(1)), (int(2), int(0))]).is_err());
        assert!(ElasticCurve::new(vec![(int(0), int(1)), (int(2), int(2)), (int(3), int(0))]).is_err());
        assert!(ElasticCurve::new(vec![(int(0), int(1)), (int(2), int(1))]).is_err());
        let c = ElasticCurve::new(vec![(int(0), int(3)), (int(2), int(1)), (int(5), int(0))]).unwrap();
        assert_eq!(c.eval(&frac(3, 2)), int(3));
        assert_eq!(c.eval(&int(2)), int(1));
        assert_eq!(c.eval(&int(7)), int(0));
    }

    #[test]
    fn fdt_coefficients() {
        let mut inst = gen_example(&Example::Fig1);
        inst.commodities[0].gamma_early = int(1);
        let out = fdt_transform(&inst).unwrap();
        let c = &out.instance.commodities[0];
        assert_eq!((c.beta.clone(), c.gamma_late.clone(), c.gamma_early.clone()), (int(0), int(1), int(0)));
        assert!(out.negative_earliness.is_empty());

        let mut inst = gen_example(&Example::Fig1);
        inst.commodities[0].beta = int(0);
        inst.commodities[0].window = Window::new(0, 3 * H);
        let out = fdt_transform(&inst).unwrap();
        assert_eq!(out.instance.commodities[0].window, Window::singleton(H));
        assert_eq!(out.instance.commodities[0].gamma_late, int(0));
        let again = fdt_transform(&out.instance).unwrap();
        assert_eq!(again.instance, out.instance);
    }

    #[test]
    fn fdt_flags_negative_earliness_and_rejects_windows() {
        let inst = gen_example(&Example::Fig1);
        let out = fdt_transform(&inst).unwrap();
        assert_eq!(out.negative_earliness, [0]);
        let mut inst = gen_example(&Example::Fig1);
        inst.commodities[0].window = Window::new(0, 3 * H);
        assert!(matches!(fdt_transform(&inst), Err(DemandError::NotFixedDeparture { .. })));
    }
}
