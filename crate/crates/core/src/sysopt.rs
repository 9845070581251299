//! System optimum by column generation over path variables.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use num_traits::{Signed, Zero};

use crate::flow::{strategy_cost, Flow, Strategy};
use crate::lp::{ExactSimplex, LinearProgram, LpBackend, LpResult, Sense};
use crate::network::{EdgeIdx, ExtendedGraph};
use crate::rational::{self, Rational};
use crate::route::{self, Query};
use crate::solver_exact::{enumerate_strategies, ResourceLimit};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SystemOptimum {
    pub flow: Flow,
    pub cost: Rational,
    /// Master re-solves until pricing found no improving column.
    pub iterations: usize,
    pub columns: usize,
}

/// Result of pricing one commodity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PricedColumn {
    pub strategy: Strategy,
    pub reduced_cost: Rational,
}

/// Cheapest column of commodity `i` under capacity duals (≤ 0, keyed by
/// driving edge) and the demand dual.
pub fn price_column(xg: &ExtendedGraph, i: usize, capacity_duals: &BTreeMap<EdgeIdx, Rational>, demand_dual: &Rational) -> PricedColumn {
    let allow = |_: EdgeIdx| true;
    let extra = |e: EdgeIdx| Some(capacity_duals.get(&e).map_or_else(rational::zero, |u| -u.clone()));
    let query = Query { allow: &allow, extra: Some(&extra), include_outside: true };
    let (strategy, value) = route::shortest(xg, i, &query, None).expect("outside option");
    PricedColumn { strategy, reduced_cost: value - demand_dual }
}

pub fn solve_system_optimum(xg: &ExtendedGraph) -> SystemOptimum {
    let demands: Vec<Rational> = xg.commodities().iter().map(|c| c.demand.clone()).collect();
    solve_residual(xg, None, &demands, &ExactSimplex)
}

/// Column generation with optional per-edge capacity overrides (indexed by
/// edge) and explicit per-commodity demands.
pub fn solve_residual(xg: &ExtendedGraph, capacities: Option<&[Rational]>, demands: &[Rational], backend: &dyn LpBackend) -> SystemOptimum {
    let g = xg.base();
    let cap = |e: EdgeIdx| match capacities {
        Some(c) => c[e.index()].clone(),
        None => g.capacity(e).unwrap().clone(),
    };
    let m = xg.num_commodities();
    let mut columns: Vec<(usize, Strategy, Rational)> = Vec::new();
    for i in 0..m {
        columns.push((i, Strategy::Outside, xg.commodity(i).outside_cost.clone()));
        let p = price_column(xg, i, &BTreeMap::new(), &rational::zero()).strategy;
        if p != Strategy::Outside {
            let cost = strategy_cost(xg, i, &p);
            columns.push((i, p, cost));
        }
    }
    let mut iterations = 0;
    loop {
        iterations += 1;
        let mut rows: Vec<EdgeIdx> =
            columns.iter().flat_map(|(_, s, _)| s.edges().iter().copied()).filter(|&e| g.capacity(e).is_some()).collect();
        rows.sort();
        rows.dedup();
        let mut lp = LinearProgram::new(columns.len());
        for (j, (_, _, c)) in columns.iter().enumerate() {
            lp.objective[j] = c.clone();
        }
        for (i, d) in demands.iter().enumerate() {
            let coeffs = columns.iter().enumerate().filter(|(_, c)| c.0 == i).map(|(j, _)| (j, rational::one())).collect();
            lp.add(coeffs, Sense::Eq, d.clone());
        }
        for &e in &rows {
            let coeffs = columns.iter().enumerate().filter(|(_, c)| c.1.contains(e)).map(|(j, _)| (j, rational::one())).collect();
            lp.add(coeffs, Sense::Le, cap(e));
        }
        let LpResult::Optimal(sol) = backend.solve(&lp) else { unreachable!("outside columns keep the master feasible and bounded") };
        let duals: BTreeMap<EdgeIdx, Rational> = rows.iter().zip(&sol.duals[m..]).map(|(e, u)| (*e, u.clone())).collect();
        let mut added = false;
        for i in 0..m {
            let priced = price_column(xg, i, &duals, &sol.duals[i]);
            if priced.reduced_cost.is_negative() {
                debug_assert!(!columns.iter().any(|(k, s, _)| *k == i && *s == priced.strategy));
                let cost = strategy_cost(xg, i, &priced.strategy);
                columns.push((i, priced.strategy, cost));
                added = true;
            }
        }
        if !added {
            let mut flow = Flow::new(g.num_edges());
            for (j, (i, s, _)) in columns.iter().enumerate() {
                flow.add(g, *i, s.clone(), sol.x[j].clone());
            }
            return SystemOptimum { flow, cost: sol.objective, iterations, columns: columns.len() };
        }
    }
}

/// Optimum over all enumerated strategies at once.
pub fn full_lp_optimum(xg: &ExtendedGraph, path_cap: usize) -> Result<SystemOptimum, ResourceLimit> {
    let set = enumerate_strategies(xg, path_cap)?;
    let g = xg.base();
    let mut vars = Vec::new();
    for i in 0..xg.num_commodities() {
        vars.extend(set.strategies(i).iter().map(|s| (i, s)));
    }
    let mut lp = LinearProgram::new(vars.len());
    for (j, (_, s)) in vars.iter().enumerate() {
        lp.objective[j] = s.cost.clone();
    }
    for i in 0..xg.num_commodities() {
        let coeffs = vars.iter().enumerate().filter(|(_, v)| v.0 == i).map(|(j, _)| (j, rational::one())).collect();
        lp.add(coeffs, Sense::Eq, xg.commodity(i).demand.clone());
    }
    for (r, &e) in set.driving_edges().iter().enumerate() {
        let coeffs: Vec<_> =
            vars.iter().enumerate().filter(|(_, v)| v.1.driving >> r & 1 == 1).map(|(j, _)| (j, rational::one())).collect();
        if !coeffs.is_empty() {
            lp.add(coeffs, Sense::Le, g.capacity(e).unwrap().clone());
        }
    }
    let LpResult::Optimal(sol) = ExactSimplex.solve(&lp) else { unreachable!("outside options keep the LP feasible") };
    let mut flow = Flow::new(g.num_edges());
    for (j, (i, s)) in vars.iter().enumerate() {
        if !sol.x[j].is_zero() {
            flow.add(g, *i, s.strategy.clone(), sol.x[j].clone());
        }
    }
    Ok(SystemOptimum { flow, cost: sol.objective, iterations: 1, columns: vars.len() })
}
