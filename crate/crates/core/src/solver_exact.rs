//! Exact multi-commodity solver over saturated driving-edge sets.
//!
//! For a set E_S of saturated driving edges, ℱ(E_S) is the polytope of
//! demand-feasible flows with f_e = ν_e on E_S, f_e ≤ ν_e elsewhere, and zero
//! volume on every strategy that has a strictly cheaper alternative avoiding
//! the boarding of E_S-edges it does not already ride. The union of these
//! polytopes is exactly the set of equilibria.
//!
//! Instead of listing all subsets by cardinality, the search fixes driving
//! edges one at a time (out before in) and prunes a branch as soon as a
//! relaxation covering every completion is infeasible.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use num_traits::{Signed, Zero};

use crate::flow::{verify_equilibrium, Flow, Path, Strategy};
use crate::lp::{ExactSimplex, LinearProgram, LpBackend, LpResult, Sense};
use crate::network::{EdgeIdx, ExtendedGraph, NodeIdx};
use crate::rational::{self, Rational};
use crate::route::{self, Query};

/// Bitset over driving-edge ranks.
pub type Mask = u128;

/// Hard ceiling on driving edges, from the mask width.
pub const MASK_BITS: usize = 128;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ResourceLimit {
    DrivingEdges { found: usize, limit: usize },
    Strategies { limit: usize },
    Nodes { limit: u64 },
}

impl fmt::Display for ResourceLimit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResourceLimit::DrivingEdges { found, limit } => write!(f, "{found} driving edges exceed the limit of {limit}"),
            ResourceLimit::Strategies { limit } => write!(f, "more than {limit} strategies"),
            ResourceLimit::Nodes { limit } => write!(f, "search exceeded {limit} nodes"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactLimits {
    pub max_driving_edges: usize,
    /// Total strategy count over all commodities.
    pub path_cap: usize,
    pub max_nodes: Option<u64>,
    /// Forces all outside options to zero.
    pub forbid_outside: bool,
}

impl Default for ExactLimits {
    fn default() -> Self {
        ExactLimits { max_driving_edges: 24, path_cap: 1_000_000, max_nodes: None, forbid_outside: false }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StrategyInfo {
    pub strategy: Strategy,
    pub cost: Rational,
    /// Driving edges on the path.
    pub driving: Mask,
    /// Successors e⁺ of the boarding edges on the path.
    pub boards: Mask,
}

#[derive(Clone, Debug)]
pub struct StrategySet {
    per_commodity: Vec<Vec<StrategyInfo>>,
    driving: Vec<EdgeIdx>,
}

impl StrategySet {
    /// Strategies of commodity `i`, outside option first.
    pub fn strategies(&self, i: usize) -> &[StrategyInfo] {
        &self.per_commodity[i]
    }

    pub fn total(&self) -> usize {
        self.per_commodity.iter().map(Vec::len).sum()
    }

    pub fn driving_edges(&self) -> &[EdgeIdx] {
        &self.driving
    }

    pub fn mask_of(&self, edges: &[EdgeIdx]) -> Mask {
        edges.iter().filter_map(|e| self.driving.iter().position(|d| d == e)).fold(0, |m, r| m | 1 << r)
    }

    pub fn edges_of(&self, mask: Mask) -> Vec<EdgeIdx> {
        self.driving.iter().enumerate().filter(|(r, _)| mask >> r & 1 == 1).map(|(_, e)| *e).collect()
    }

    /// Whether strategy `k` of commodity `i` lies in 𝒫_i(E_S).
    pub fn is_blocked(&self, i: usize, k: usize, saturated: Mask) -> bool {
        let list = &self.per_commodity[i];
        let p = &list[k];
        let closed = saturated & !p.driving;
        list.iter().any(|q| q.cost < p.cost && q.boards & closed == 0)
    }
}

/// Lists every strategy of every commodity by depth-first search on the DAG.
pub fn enumerate_strategies(xg: &ExtendedGraph, cap: usize) -> Result<StrategySet, ResourceLimit> {
    let g = xg.base();
    let driving = g.driving_edges().to_vec();
    if driving.len() > MASK_BITS {
        return Err(ResourceLimit::DrivingEdges { found: driving.len(), limit: MASK_BITS });
    }
    let bit = |e: EdgeIdx| g.driving_rank(e).map_or(0, |r| 1u128 << r);
    let mut total = 0usize;
    let mut per_commodity = Vec::with_capacity(xg.num_commodities());
    for i in 0..xg.num_commodities() {
        let c = xg.commodity(i);
        let mut list = vec![StrategyInfo { strategy: Strategy::Outside, cost: c.outside_cost.clone(), driving: 0, boards: 0 }];
        total += 1;
        for &s in xg.sources(i) {
            let mut stack: Vec<(NodeIdx, usize)> = vec![(s, 0)];
            let mut edges: Vec<EdgeIdx> = Vec::new();
            // iterative DFS: (node, next out-edge position)
            while let Some(&mut (v, ref mut pos)) = stack.last_mut() {
                if *pos == 0 && !edges.is_empty() && xg.is_sink(i, v) {
                    total += 1;
                    if total > cap {
                        return Err(ResourceLimit::Strategies { limit: cap });
                    }
                    let path = Path::new(edges.clone());
                    let driving = edges.iter().fold(0, |m, &e| m | bit(e));
                    let boards = edges.iter().filter_map(|&e| g.successor(e)).fold(0, |m, e| m | bit(e));
                    let cost = c.trip_cost(g.time(s), g.time(v));
                    list.push(StrategyInfo { strategy: Strategy::Path(path), cost, driving, boards });
                }
                let out = g.out_edges(v);
                if *pos < out.len() {
                    let e = out[*pos];
                    *pos += 1;
                    edges.push(e);
                    stack.push((g.edge(e).head, 0));
                } else {
                    stack.pop();
                    edges.pop();
                }
            }
        }
        per_commodity.push(list);
    }
    Ok(StrategySet { per_commodity, driving })
}

/// Graph-based membership test p ∈ 𝒫_i(E_S).
pub fn is_blocked_path(xg: &ExtendedGraph, i: usize, p: &Strategy, saturated: &[EdgeIdx]) -> bool {
    let g = xg.base();
    let allow = |e: EdgeIdx| match g.successor(e) {
        Some(plus) => !saturated.contains(&plus) || p.contains(plus),
        None => true,
    };
    let own = crate::flow::strategy_cost(xg, i, p);
    let (_, best) = route::shortest(xg, i, &Query::filtered(&allow), None).expect("outside option");
    best < own
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Objective {
    Feasibility,
    MinCost,
    MaxCost,
}

struct Model<'a> {
    xg: &'a ExtendedGraph,
    set: &'a StrategySet,
    forbid_outside: bool,
    backend: &'a dyn LpBackend,
}

enum Relaxation {
    Infeasible,
    Point { flow: Flow, objective: Rational },
}

impl Model<'_> {
    fn capacity(&self, rank: usize) -> &Rational {
        self.xg.base().capacity(self.set.driving[rank]).unwrap()
    }

    fn allowed(&self, blocking: Mask) -> Vec<Vec<bool>> {
        (0..self.xg.num_commodities())
            .map(|i| {
                (0..self.set.strategies(i).len())
                    .map(|k| !(self.forbid_outside && k == 0) && !self.set.is_blocked(i, k, blocking))
                    .collect()
            })
            .collect()
    }

    /// Solves the system with equalities on `eq` and forced zeros from `allowed`.
    fn solve(&self, allowed: &[Vec<bool>], eq: Mask, objective: Objective) -> Relaxation {
        let mut vars: Vec<(usize, usize)> = Vec::new();
        for (i, row) in allowed.iter().enumerate() {
            vars.extend(row.iter().enumerate().filter(|(_, a)| **a).map(|(k, _)| (i, k)));
        }
        let mut lp = LinearProgram::new(vars.len());
        for (j, &(i, k)) in vars.iter().enumerate() {
            let cost = &self.set.strategies(i)[k].cost;
            lp.objective[j] = match objective {
                Objective::Feasibility => rational::zero(),
                Objective::MinCost => cost.clone(),
                Objective::MaxCost => -cost.clone(),
            };
        }
        for i in 0..self.xg.num_commodities() {
            let coeffs: Vec<_> = vars.iter().enumerate().filter(|(_, v)| v.0 == i).map(|(j, _)| (j, rational::one())).collect();
            let demand = self.xg.commodity(i).demand.clone();
            if coeffs.is_empty() && !demand.is_zero() {
                return Relaxation::Infeasible;
            }
            lp.add(coeffs, Sense::Eq, demand);
        }
        for rank in 0..self.set.driving.len() {
            let nu = self.capacity(rank);
            let mut coeffs = Vec::new();
            let mut reach = rational::zero();
            let mut last = usize::MAX;
            for (j, &(i, k)) in vars.iter().enumerate() {
                if self.set.strategies(i)[k].driving >> rank & 1 == 1 {
                    coeffs.push((j, rational::one()));
                    if i != last {
                        reach += &self.xg.commodity(i).demand;
                        last = i;
                    }
                }
            }
            if eq >> rank & 1 == 1 {
                if reach < *nu {
                    return Relaxation::Infeasible;
                }
                lp.add(coeffs, Sense::Eq, nu.clone());
            } else if reach > *nu {
                lp.add(coeffs, Sense::Le, nu.clone());
            }
        }
        match self.backend.solve(&lp) {
            LpResult::Optimal(sol) => {
                let g = self.xg.base();
                let mut flow = Flow::new(g.num_edges());
                for (j, &(i, k)) in vars.iter().enumerate() {
                    if sol.x[j].is_positive() {
                        flow.add(g, i, self.set.strategies(i)[k].strategy.clone(), sol.x[j].clone());
                    }
                }
                let objective = match objective {
                    Objective::MaxCost => -sol.objective,
                    _ => sol.objective,
                };
                Relaxation::Point { flow, objective }
            }
            LpResult::Infeasible => Relaxation::Infeasible,
            LpResult::Unbounded => unreachable!("path volumes are bounded by the demands"),
        }
    }

    /// Driving-edge ranks whose boarding edge no strategy uses, paired with
    /// the previous driving edge of the same trip.
    fn fed_only_by(&self) -> Vec<Option<usize>> {
        let g = self.xg.base();
        let boarded = (0..self.xg.num_commodities()).flat_map(|i| self.set.strategies(i)).fold(0, |m, s| m | s.boards);
        self.set
            .driving
            .iter()
            .enumerate()
            .map(|(r, &e)| {
                if boarded >> r & 1 == 1 {
                    return None;
                }
                g.previous_driving(e).and_then(|prev| g.driving_rank(prev))
            })
            .collect()
    }

    /// Upper bound on the volume that can reach rank `r` under `allowed`.
    fn can_saturate(&self, allowed: &[Vec<bool>], rank: usize) -> bool {
        let mut reach = rational::zero();
        for (i, row) in allowed.iter().enumerate() {
            let through = row.iter().zip(self.set.strategies(i)).any(|(a, s)| *a && s.driving >> rank & 1 == 1);
            if through {
                reach += &self.xg.commodity(i).demand;
            }
        }
        reach >= *self.capacity(rank)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactSolution {
    pub flow: Flow,
    /// E_S^f: the driving edges the flow saturates.
    pub saturated: Vec<EdgeIdx>,
    pub nodes: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExactOutcome {
    Equilibrium(ExactSolution),
    /// Every saturated set was ruled out: a certificate of non-existence.
    NoEquilibrium {
        nodes: u64,
    },
    ResourceLimit(ResourceLimit),
}

impl ExactOutcome {
    pub fn flow(&self) -> Option<&Flow> {
        match self {
            ExactOutcome::Equilibrium(s) => Some(&s.flow),
            _ => None,
        }
    }
}

fn prepare(xg: &ExtendedGraph, limits: &ExactLimits) -> Result<StrategySet, ResourceLimit> {
    let n = xg.base().driving_edges().len();
    if n > limits.max_driving_edges.min(MASK_BITS) {
        return Err(ResourceLimit::DrivingEdges { found: n, limit: limits.max_driving_edges.min(MASK_BITS) });
    }
    enumerate_strategies(xg, limits.path_cap)
}

/// Any point of ℱ(E_S), or `None` when the system is infeasible.
pub fn feasibility(xg: &ExtendedGraph, set: &StrategySet, saturated: &[EdgeIdx], forbid_outside: bool) -> Option<Flow> {
    let model = Model { xg, set, forbid_outside, backend: &ExactSimplex };
    let mask = set.mask_of(saturated);
    match model.solve(&model.allowed(mask), mask, Objective::Feasibility) {
        Relaxation::Point { flow, .. } => Some(flow),
        Relaxation::Infeasible => None,
    }
}

/// Whether `f` itself lies in ℱ(E_S) for the given saturated set.
pub fn in_feasibility_set(xg: &ExtendedGraph, set: &StrategySet, f: &Flow, saturated: &[EdgeIdx]) -> bool {
    let g = xg.base();
    let mask = set.mask_of(saturated);
    let tight = saturated.iter().all(|&e| g.capacity(e).is_some_and(|c| f.load(e) == c));
    tight
        && f.is_feasible(xg)
        && f.used().all(|(i, s, _)| set.strategies(i).iter().position(|x| x.strategy == *s).is_some_and(|k| !set.is_blocked(i, k, mask)))
}

pub fn solve_exact(xg: &ExtendedGraph, limits: &ExactLimits) -> ExactOutcome {
    solve_exact_with(xg, limits, &ExactSimplex)
}

struct Search<'a> {
    model: Model<'a>,
    fed_only_by: Vec<Option<usize>>,
    nodes: u64,
    max_nodes: Option<u64>,
    n: usize,
}

impl Search<'_> {
    fn tick(&mut self) -> Result<(), ResourceLimit> {
        self.nodes += 1;
        match self.max_nodes {
            Some(limit) if self.nodes > limit => Err(ResourceLimit::Nodes { limit }),
            _ => Ok(()),
        }
    }

    fn undecided(&self, k: usize) -> Mask {
        if k >= MASK_BITS {
            0
        } else {
            (!0u128 << k) & (if self.n == MASK_BITS { !0 } else { (1u128 << self.n) - 1 })
        }
    }

    /// Whether rank `k` may join the saturated set given the decisions so far.
    fn may_saturate(&self, k: usize, inside: Mask, allowed: &[Vec<bool>]) -> bool {
        if let Some(prev) = self.fed_only_by[k] {
            if inside >> prev & 1 == 0 {
                return false;
            }
        }
        self.model.can_saturate(allowed, k)
    }

    fn find(&mut self, k: usize, inside: Mask) -> Result<Option<(Flow, Mask)>, ResourceLimit> {
        self.tick()?;
        let allowed = self.model.allowed(inside | self.undecided(k));
        let Relaxation::Point { flow, .. } = self.model.solve(&allowed, inside, Objective::Feasibility) else {
            return Ok(None);
        };
        if k == self.n {
            debug_assert!(verify_equilibrium(self.model.xg, &flow).is_equilibrium());
            return Ok(Some((flow, inside)));
        }
        if verify_equilibrium(self.model.xg, &flow).is_equilibrium() {
            return Ok(Some((flow, inside)));
        }
        if let Some(found) = self.find(k + 1, inside)? {
            return Ok(Some(found));
        }
        if self.may_saturate(k, inside, &allowed) {
            return self.find(k + 1, inside | 1 << k);
        }
        Ok(None)
    }

    fn costs(&mut self, k: usize, inside: Mask, range: &mut Option<CostRange>) -> Result<(), ResourceLimit> {
        self.tick()?;
        let allowed = self.model.allowed(inside | self.undecided(k));
        let Relaxation::Point { objective: lo, .. } = self.model.solve(&allowed, inside, Objective::MinCost) else {
            return Ok(());
        };
        let Relaxation::Point { objective: hi, .. } = self.model.solve(&allowed, inside, Objective::MaxCost) else {
            unreachable!("same feasible region")
        };
        if let Some(r) = range {
            if lo >= r.min && hi <= r.max {
                return Ok(());
            }
        }
        if k == self.n {
            match range {
                None => *range = Some(CostRange { min: lo, max: hi }),
                Some(r) => {
                    r.min = rational::min(r.min.clone(), lo);
                    r.max = rational::max(r.max.clone(), hi);
                }
            }
            return Ok(());
        }
        self.costs(k + 1, inside, range)?;
        if self.may_saturate(k, inside, &allowed) {
            self.costs(k + 1, inside | 1 << k, range)?;
        }
        Ok(())
    }
}

pub fn solve_exact_with(xg: &ExtendedGraph, limits: &ExactLimits, backend: &dyn LpBackend) -> ExactOutcome {
    let set = match prepare(xg, limits) {
        Ok(s) => s,
        Err(e) => return ExactOutcome::ResourceLimit(e),
    };
    let model = Model { xg, set: &set, forbid_outside: limits.forbid_outside, backend };
    let fed_only_by = model.fed_only_by();
    let n = set.driving.len();
    let mut search = Search { model, fed_only_by, nodes: 0, max_nodes: limits.max_nodes, n };
    match search.find(0, 0) {
        Ok(Some((flow, _))) => {
            let saturated = flow.saturated_edges(xg);
            ExactOutcome::Equilibrium(ExactSolution { flow, saturated, nodes: search.nodes })
        }
        Ok(None) => ExactOutcome::NoEquilibrium { nodes: search.nodes },
        Err(e) => ExactOutcome::ResourceLimit(e),
    }
}

/// Extremes of the social cost over all equilibria.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostRange {
    pub min: Rational,
    pub max: Rational,
}

/// `Ok(None)` when no equilibrium exists.
pub fn enumerate_equilibrium_costs(xg: &ExtendedGraph, limits: &ExactLimits) -> Result<Option<CostRange>, ResourceLimit> {
    let set = prepare(xg, limits)?;
    let model = Model { xg, set: &set, forbid_outside: limits.forbid_outside, backend: &ExactSimplex };
    let fed_only_by = model.fed_only_by();
    let n = set.driving.len();
    let mut search = Search { model, fed_only_by, nodes: 0, max_nodes: limits.max_nodes, n };
    let mut range = None;
    search.costs(0, 0, &mut range)?;
    Ok(range)
}
