//! Path-based flows, deviations, availability, equilibrium verification and metrics.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{Signed, Zero};

use crate::demand::path_cost;
use crate::network::{EdgeIdx, EdgeKind, ExtEdge, ExtendedGraph, NodeIdx, TimeExpandedGraph};
use crate::rational::{self, Rational, Time};
use crate::route::{self, Query};

/// A path in the base graph: from an origin platform to a destination platform.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path(Arc<[EdgeIdx]>);

impl Path {
    pub fn new(edges: Vec<EdgeIdx>) -> Self {
        Path(edges.into())
    }

    pub fn edges(&self) -> &[EdgeIdx] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, e: EdgeIdx) -> bool {
        self.0.contains(&e)
    }

    pub fn start(&self, g: &TimeExpandedGraph) -> NodeIdx {
        g.edge(self.0[0]).tail
    }

    pub fn end(&self, g: &TimeExpandedGraph) -> NodeIdx {
        g.edge(*self.0.last().unwrap()).head
    }

    pub fn departure(&self, g: &TimeExpandedGraph) -> Time {
        g.time(self.start(g))
    }

    pub fn arrival(&self, g: &TimeExpandedGraph) -> Time {
        g.time(self.end(g))
    }

    pub fn driving_edges<'a>(&'a self, g: &'a TimeExpandedGraph) -> impl Iterator<Item = EdgeIdx> + 'a {
        self.0.iter().copied().filter(move |&e| g.kind(e) == EdgeKind::Driving)
    }

    pub fn boarding_edges<'a>(&'a self, g: &'a TimeExpandedGraph) -> impl Iterator<Item = EdgeIdx> + 'a {
        self.0.iter().copied().filter(move |&e| g.kind(e) == EdgeKind::Boarding)
    }
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

/// A strategy of a commodity: a path or the outside option ô.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Strategy {
    Outside,
    Path(Path),
}

impl Strategy {
    pub fn path(&self) -> Option<&Path> {
        match self {
            Strategy::Path(p) => Some(p),
            Strategy::Outside => None,
        }
    }

    pub fn edges(&self) -> &[EdgeIdx] {
        match self {
            Strategy::Path(p) => p.edges(),
            Strategy::Outside => &[],
        }
    }

    pub fn contains(&self, e: EdgeIdx) -> bool {
        self.edges().contains(&e)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum FlowError {
    InsufficientVolume { commodity: usize },
    NonPositiveAmount,
    InvalidStrategy { commodity: usize },
}

impl fmt::Display for FlowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FlowError::InsufficientVolume { commodity } => {
                write!(f, "deviation exceeds the volume on the path of commodity {commodity}")
            }
            FlowError::NonPositiveAmount => write!(f, "deviation amount must be positive"),
            FlowError::InvalidStrategy { commodity } => write!(f, "not a strategy of commodity {commodity}"),
        }
    }
}

/// Sparse map (commodity, strategy) → volume, with edge loads kept in sync.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Flow {
    entries: BTreeMap<(usize, Strategy), Rational>,
    loads: Vec<Rational>,
}

impl Flow {
    pub fn new(num_edges: usize) -> Self {
        Flow { entries: BTreeMap::new(), loads: vec![rational::zero(); num_edges] }
    }

    /// The flow sending every commodity's demand to its outside option.
    pub fn all_outside(xg: &ExtendedGraph) -> Self {
        let mut f = Flow::new(xg.base().num_edges());
        for (i, c) in xg.commodities().iter().enumerate() {
            f.add(xg.base(), i, Strategy::Outside, c.demand.clone());
        }
        f
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, Strategy), &Rational)> {
        self.entries.iter()
    }

    /// Entries with positive volume.
    pub fn used(&self) -> impl Iterator<Item = (usize, &Strategy, &Rational)> {
        self.entries.iter().filter(|(_, v)| v.is_positive()).map(|((i, s), v)| (*i, s, v))
    }

    pub fn volume(&self, i: usize, s: &Strategy) -> Rational {
        self.entries.get(&(i, s.clone())).cloned().unwrap_or_else(rational::zero)
    }

    pub fn commodity_volume(&self, i: usize) -> Rational {
        self.entries.range((i, Strategy::Outside)..).take_while(|((j, _), _)| *j == i).map(|(_, v)| v).sum()
    }

    pub fn load(&self, e: EdgeIdx) -> &Rational {
        &self.loads[e.index()]
    }

    pub fn loads(&self) -> &[Rational] {
        &self.loads
    }

    /// Adds (possibly negative) volume; zero entries are dropped.
    pub fn add(&mut self, _g: &TimeExpandedGraph, i: usize, s: Strategy, vol: Rational) {
        if vol.is_zero() {
            return;
        }
        for &e in s.edges() {
            self.loads[e.index()] += &vol;
        }
        let key = (i, s);
        let entry = self.entries.entry(key.clone()).or_insert_with(rational::zero);
        *entry += vol;
        if entry.is_zero() {
            self.entries.remove(&key);
        }
    }

    /// Raw load adjustment without an entry; used by tests of edge costs.
    pub fn add_load(&mut self, e: EdgeIdx, vol: Rational) {
        self.loads[e.index()] += vol;
    }

    pub fn recompute_loads(&self) -> Vec<Rational> {
        let mut loads = vec![rational::zero(); self.loads.len()];
        for ((_, s), v) in &self.entries {
            for &e in s.edges() {
                loads[e.index()] += v;
            }
        }
        loads
    }

    pub fn is_nonnegative(&self) -> bool {
        self.entries.values().all(|v| !v.is_negative())
    }

    pub fn is_demand_feasible(&self, xg: &ExtendedGraph) -> bool {
        self.is_nonnegative()
            && self.entries.keys().all(|(i, _)| *i < xg.num_commodities())
            && (0..xg.num_commodities()).all(|i| self.commodity_volume(i) == xg.commodity(i).demand)
    }

    pub fn is_capacity_feasible(&self, xg: &ExtendedGraph) -> bool {
        let g = xg.base();
        g.driving_edges().iter().all(|&e| self.load(e) <= g.capacity(e).unwrap())
    }

    pub fn is_feasible(&self, xg: &ExtendedGraph) -> bool {
        self.is_demand_feasible(xg) && self.is_capacity_feasible(xg)
    }

    pub fn is_saturated(&self, xg: &ExtendedGraph, e: EdgeIdx) -> bool {
        xg.base().capacity(e).is_some_and(|cap| self.load(e) >= cap)
    }

    /// E_S^f: driving edges loaded exactly to capacity.
    pub fn saturated_edges(&self, xg: &ExtendedGraph) -> Vec<EdgeIdx> {
        let g = xg.base();
        g.driving_edges().iter().copied().filter(|&e| self.load(e) == g.capacity(e).unwrap()).collect()
    }
}

/// Checks that `s` is a strategy of commodity `i`.
pub fn is_strategy(xg: &ExtendedGraph, i: usize, s: &Strategy) -> bool {
    let Strategy::Path(p) = s else { return true };
    let g = xg.base();
    if p.is_empty() || p.edges().iter().any(|e| e.index() >= g.num_edges()) {
        return false;
    }
    let contiguous = p.edges().windows(2).all(|w| g.edge(w[0]).head == g.edge(w[1]).tail);
    contiguous && xg.is_source(i, p.start(g)) && xg.is_sink(i, p.end(g))
}

pub fn strategy_cost(xg: &ExtendedGraph, i: usize, s: &Strategy) -> Rational {
    path_cost(xg.base(), xg.commodity(i), s)
}

/// f_{i,p→q}(ε).
pub fn deviate(xg: &ExtendedGraph, f: &Flow, i: usize, p: &Strategy, q: &Strategy, eps: &Rational) -> Result<Flow, FlowError> {
    if !eps.is_positive() {
        return Err(FlowError::NonPositiveAmount);
    }
    if f.volume(i, p) < *eps {
        return Err(FlowError::InsufficientVolume { commodity: i });
    }
    if !is_strategy(xg, i, q) {
        return Err(FlowError::InvalidStrategy { commodity: i });
    }
    let mut out = f.clone();
    out.add(xg.base(), i, p.clone(), -eps.clone());
    out.add(xg.base(), i, q.clone(), eps.clone());
    Ok(out)
}

/// Whether the deviation of `eps` from `p` to `q` keeps every boarding
/// successor of `q` within capacity.
pub fn is_admissible(xg: &ExtendedGraph, f: &Flow, i: usize, p: &Strategy, q: &Strategy, eps: &Rational) -> bool {
    let g = xg.base();
    let _ = i;
    q.edges().iter().filter_map(|&e| g.successor(e)).all(|plus| {
        let mut load = f.load(plus).clone();
        if q.contains(plus) {
            load += eps;
        }
        if p.contains(plus) {
            load -= eps;
        }
        &load <= g.capacity(plus).unwrap()
    })
}

/// The limit form of admissibility: q ∈ A_{i,p}(f).
pub fn is_available(xg: &ExtendedGraph, f: &Flow, p: &Strategy, q: &Strategy) -> bool {
    let g = xg.base();
    q.edges().iter().filter_map(|&e| g.successor(e)).all(|plus| boarding_open(xg, f, p, plus))
}

fn boarding_open(xg: &ExtendedGraph, f: &Flow, p: &Strategy, plus: EdgeIdx) -> bool {
    let cap = xg.base().capacity(plus).unwrap();
    if p.contains(plus) {
        f.load(plus) <= cap
    } else {
        f.load(plus) < cap
    }
}

/// π*_{i,p}(f) and a minimizing available strategy.
pub fn best_available_alternative(xg: &ExtendedGraph, f: &Flow, i: usize, p: &Strategy) -> (Strategy, Rational) {
    best_available_with(xg, f, i, p, None)
}

pub(crate) fn best_available_with(
    xg: &ExtendedGraph,
    f: &Flow,
    i: usize,
    p: &Strategy,
    rng: Option<&mut rand_chacha::ChaCha8Rng>,
) -> (Strategy, Rational) {
    let g = xg.base();
    let allow = |e: EdgeIdx| match g.successor(e) {
        Some(plus) => boarding_open(xg, f, p, plus),
        None => true,
    };
    route::shortest(xg, i, &Query::filtered(&allow), rng).expect("the outside option is always available")
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    Demand { commodity: usize, routed: Rational, demand: Rational },
    Capacity { edge: EdgeIdx, load: Rational, capacity: Rational },
    NegativeVolume { commodity: usize },
    Improvement { commodity: usize, used: Strategy, alternative: Strategy, used_cost: Rational, alternative_cost: Rational },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EquilibriumCheck {
    Equilibrium,
    /// First violation in canonical order plus the total count.
    Violated {
        first: Violation,
        count: usize,
    },
}

impl EquilibriumCheck {
    pub fn is_equilibrium(&self) -> bool {
        matches!(self, EquilibriumCheck::Equilibrium)
    }
}

fn feasibility_violations(xg: &ExtendedGraph, f: &Flow) -> Vec<Violation> {
    let g = xg.base();
    let mut out = Vec::new();
    for ((i, _), v) in f.entries() {
        if v.is_negative() {
            out.push(Violation::NegativeVolume { commodity: *i });
        }
    }
    for (i, c) in xg.commodities().iter().enumerate() {
        let routed = f.commodity_volume(i);
        if routed != c.demand {
            out.push(Violation::Demand { commodity: i, routed, demand: c.demand.clone() });
        }
    }
    for &e in g.driving_edges() {
        let cap = g.capacity(e).unwrap();
        if f.load(e) > cap {
            out.push(Violation::Capacity { edge: e, load: f.load(e).clone(), capacity: cap.clone() });
        }
    }
    out
}

/// Checks feasibility and the equilibrium condition with the filtered-graph search.
pub fn verify_equilibrium(xg: &ExtendedGraph, f: &Flow) -> EquilibriumCheck {
    let mut violations = feasibility_violations(xg, f);
    if violations.is_empty() {
        for (i, p, _) in f.used() {
            let used_cost = strategy_cost(xg, i, p);
            let (alternative, alternative_cost) = best_available_alternative(xg, f, i, p);
            if alternative_cost < used_cost {
                violations.push(Violation::Improvement { commodity: i, used: p.clone(), alternative, used_cost, alternative_cost });
            }
        }
    }
    let count = violations.len();
    match violations.into_iter().next() {
        None => EquilibriumCheck::Equilibrium,
        Some(first) => EquilibriumCheck::Violated { first, count },
    }
}

/// QVI check: for each used p, build an explicit admissible deviation with a
/// concrete ε toward the cheapest admissible q, and test ⟨π, f′−f⟩ ≥ 0.
pub fn verify_qvi(xg: &ExtendedGraph, f: &Flow) -> bool {
    if !f.is_feasible(xg) {
        return false;
    }
    let g = xg.base();
    // ε at most half of every positive slack, so "f_{e⁺}+ε ≤ ν" ⇔ "f_{e⁺} < ν".
    let mut eps: Option<Rational> = None;
    for &e in g.driving_edges() {
        let slack = g.capacity(e).unwrap() - f.load(e);
        if slack.is_positive() && eps.as_ref().is_none_or(|x| slack < *x) {
            eps = Some(slack);
        }
    }
    let base_cost = social_cost(xg, f);
    for (i, p, vol) in f.used() {
        let eps = rational::min(eps.clone().unwrap_or_else(|| vol.clone()), vol.clone()) / rational::int(2);
        let allow = |e: EdgeIdx| match g.successor(e) {
            Some(plus) => {
                let mut load = f.load(plus) + &eps;
                if p.contains(plus) {
                    load -= &eps;
                }
                &load <= g.capacity(plus).unwrap()
            }
            None => true,
        };
        let Some((q, _)) = route::shortest(xg, i, &Query::filtered(&allow), None) else { continue };
        debug_assert!(is_admissible(xg, f, i, p, &q, &eps));
        let moved = deviate(xg, f, i, p, &q, &eps).expect("ε ≤ volume");
        if social_cost(xg, &moved) < base_cost {
            return false;
        }
    }
    true
}

/// BS check on G′: c_{i,p}(f) ≤ liminf c_{i,q}(f_{p→q}(ε)) for all used p and all q.
pub fn verify_bs(xg: &ExtendedGraph, f: &Flow) -> bool {
    if !f.is_demand_feasible(xg) {
        return false;
    }
    let g = xg.base();
    let m = xg.big_m();
    for (i, p, _) in f.used() {
        let own: Rational = match p {
            Strategy::Outside => xg.edge_cost(i, ExtEdge::Outside, f),
            Strategy::Path(path) => {
                let mut sum = xg.edge_cost(i, ExtEdge::Source(path.start(g)), f);
                for &e in path.edges() {
                    sum += xg.edge_cost(i, ExtEdge::Base(e), f);
                }
                sum + xg.edge_cost(i, ExtEdge::Sink(path.end(g)), f)
            }
        };
        let allow = |_: EdgeIdx| true;
        let extra = |e: EdgeIdx| -> Option<Rational> {
            let plus = g.successor(e)?;
            let cap = g.capacity(plus).unwrap();
            let blocked = if p.contains(plus) { f.load(plus) > cap } else { f.load(plus) >= cap };
            Some(if blocked { m.clone() } else { rational::zero() })
        };
        let extra_all = |e: EdgeIdx| Some(extra(e).unwrap_or_else(rational::zero));
        let query = Query { allow: &allow, extra: Some(&extra_all), include_outside: true };
        let (_, liminf) = route::shortest(xg, i, &query, None).expect("outside edge exists");
        if own > liminf {
            return false;
        }
    }
    true
}

pub fn social_cost(xg: &ExtendedGraph, f: &Flow) -> Rational {
    f.used().map(|(i, s, v)| v * strategy_cost(xg, i, s)).sum()
}

/// Approximation factor; infinite when π* = 0 < π.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Factor {
    Finite(Rational),
    Infinite,
}

impl fmt::Display for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Finite(q) => write!(f, "{q}"),
            Factor::Infinite => write!(f, "inf"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricsRow {
    pub commodity: usize,
    pub strategy: Strategy,
    pub volume: Rational,
    pub cost: Rational,
    pub best_alt_cost: Rational,
    pub regret: Rational,
    pub factor: Factor,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MetricsReport {
    pub rows: Vec<MetricsRow>,
    pub mean_rho: Rational,
    pub p99_rho: Factor,
    pub share_zero_regret: Rational,
    pub social_cost: Rational,
    /// Volume whose factor is infinite (excluded from the mean).
    pub infinite_volume: Rational,
}

pub fn metric_row(xg: &ExtendedGraph, f: &Flow, i: usize, s: &Strategy, vol: &Rational) -> MetricsRow {
    let cost = strategy_cost(xg, i, s);
    let (_, best) = best_available_alternative(xg, f, i, s);
    let factor = if best.is_zero() {
        if cost.is_zero() {
            Factor::Finite(rational::one())
        } else {
            Factor::Infinite
        }
    } else {
        Factor::Finite(&cost / &best)
    };
    MetricsRow { commodity: i, strategy: s.clone(), volume: vol.clone(), regret: &cost - &best, cost, best_alt_cost: best, factor }
}

/// Regret and approximation-factor summary over all used strategies,
/// outside options included.
pub fn metrics(xg: &ExtendedGraph, f: &Flow) -> MetricsReport {
    let rows: Vec<MetricsRow> = f.used().map(|(i, s, v)| metric_row(xg, f, i, s, v)).collect();
    summarize(rows)
}

pub fn summarize(rows: Vec<MetricsRow>) -> MetricsReport {
    let total: Rational = rows.iter().map(|r| &r.volume).sum();
    let mut finite_volume = rational::zero();
    let mut weighted = rational::zero();
    let mut infinite_volume = rational::zero();
    let mut zero_regret = rational::zero();
    let mut social = rational::zero();
    for r in &rows {
        social += &r.volume * &r.cost;
        if r.regret.is_zero() {
            zero_regret += &r.volume;
        }
        match &r.factor {
            Factor::Finite(x) => {
                weighted += &r.volume * x;
                finite_volume += &r.volume;
            }
            Factor::Infinite => infinite_volume += &r.volume,
        }
    }
    let mean_rho = if finite_volume.is_zero() { rational::one() } else { weighted / finite_volume };
    let share_zero_regret = if total.is_zero() { rational::one() } else { zero_regret / &total };
    let p99_rho = weighted_quantile(&rows, &total, &rational::frac(99, 100));
    MetricsReport { rows, mean_rho, p99_rho, share_zero_regret, social_cost: social, infinite_volume }
}

/// Minimum v such that the volume with factor ≤ v is at least `q` of the total.
fn weighted_quantile(rows: &[MetricsRow], total: &Rational, q: &Rational) -> Factor {
    if total.is_zero() {
        return Factor::Finite(rational::one());
    }
    let mut sorted: Vec<(&Factor, &Rational)> = rows.iter().map(|r| (&r.factor, &r.volume)).collect();
    sorted.sort();
    let need = total * q;
    let mut acc = rational::zero();
    for (factor, vol) in sorted {
        acc += vol;
        if acc >= need {
            return factor.clone();
        }
    }
    Factor::Infinite
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PriceOfStability {
    Ratio(Rational),
    NoEquilibrium,
    /// Positive equilibrium cost over a zero optimum.
    Unbounded,
}

/// Best equilibrium social cost divided by the system optimum.
pub fn price_of_stability(
    xg: &ExtendedGraph,
    limits: &crate::solver_exact::ExactLimits,
) -> Result<PriceOfStability, crate::solver_exact::ResourceLimit> {
    let Some(range) = crate::solver_exact::enumerate_equilibrium_costs(xg, limits)? else {
        return Ok(PriceOfStability::NoEquilibrium);
    };
    let opt = crate::sysopt::solve_system_optimum(xg).cost;
    Ok(if opt.is_zero() {
        if range.min.is_zero() {
            PriceOfStability::Ratio(rational::one())
        } else {
            PriceOfStability::Unbounded
        }
    } else {
        PriceOfStability::Ratio(range.min / opt)
    })
}
