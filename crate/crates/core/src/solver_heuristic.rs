//! Multi-commodity equilibrium heuristic: feasible-direction steps with
//! direction repair, prefilling, warm start and cycle handling.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::flow::{best_available_with, metrics, strategy_cost, Factor, Flow, MetricsReport, Strategy};
use crate::lp::ExactSimplex;
use crate::network::{EdgeIdx, EdgeKind, ExtendedGraph};
use crate::rational::{self, Rational};
use crate::route::{self, Query};
use crate::sysopt;

/// Sparse signed change of path volumes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Direction {
    entries: BTreeMap<(usize, Strategy), Rational>,
}

impl Direction {
    pub fn new() -> Self {
        Self::default()
    }

    /// 1_{i,q} − 1_{i,p}.
    pub fn elementary(i: usize, p: &Strategy, q: &Strategy) -> Self {
        let mut d = Self::new();
        d.add(i, q, &rational::one());
        d.add(i, p, &-rational::one());
        d
    }

    pub fn entries(&self) -> impl Iterator<Item = (&(usize, Strategy), &Rational)> {
        self.entries.iter()
    }

    pub fn get(&self, i: usize, s: &Strategy) -> Rational {
        self.entries.get(&(i, s.clone())).cloned().unwrap_or_else(rational::zero)
    }

    pub fn add(&mut self, i: usize, s: &Strategy, v: &Rational) {
        let key = (i, s.clone());
        let cur = self.entries.remove(&key).unwrap_or_else(rational::zero) + v;
        if !cur.is_zero() {
            self.entries.insert(key, cur);
        }
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn plus(&self, other: &Direction) -> Direction {
        let mut out = self.clone();
        for ((i, s), v) in &other.entries {
            out.add(*i, s, v);
        }
        out
    }

    pub fn is_balanced(&self, num_commodities: usize) -> bool {
        let mut sums = vec![rational::zero(); num_commodities];
        for ((i, _), v) in &self.entries {
            sums[*i] += v;
        }
        sums.iter().all(Zero::is_zero)
    }

    /// d < 0 only where f > 0.
    pub fn satisfies_support(&self, f: &Flow) -> bool {
        self.entries.iter().all(|((i, s), v)| !v.is_negative() || f.volume(*i, s).is_positive())
    }

    /// d_e for every edge.
    pub fn edge_deltas(&self, num_edges: usize) -> Vec<Rational> {
        let mut out = vec![rational::zero(); num_edges];
        for ((_, s), v) in &self.entries {
            for &e in s.edges() {
                out[e.index()] += v;
            }
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DirectionError {
    Unbalanced,
    SupportViolated,
}

fn is_full(xg: &ExtendedGraph, f: &Flow, e: EdgeIdx) -> bool {
    xg.base().capacity(e).is_some_and(|c| f.load(e) == c)
}

fn offending_boarding(xg: &ExtendedGraph, f: &Flow, de: &[Rational]) -> Option<EdgeIdx> {
    let g = xg.base();
    g.driving_edges().iter().find_map(|&plus| {
        if !is_full(xg, f, plus) || !de[plus.index()].is_positive() {
            return None;
        }
        let b = g.boarding_into(plus)?;
        (f.load(b).is_positive() || de[b.index()].is_positive()).then_some(b)
    })
}

fn check_direction(xg: &ExtendedGraph, f: &Flow, d: &Direction) -> Result<(), DirectionError> {
    if !d.is_balanced(xg.num_commodities()) {
        return Err(DirectionError::Unbalanced);
    }
    if !d.satisfies_support(f) {
        return Err(DirectionError::SupportViolated);
    }
    Ok(())
}

/// No boarding edge e has a full successor e⁺ with d_{e⁺} > 0 while
/// f_e > 0 or d_e > 0.
pub fn is_feasible_direction(xg: &ExtendedGraph, f: &Flow, d: &Direction) -> Result<bool, DirectionError> {
    check_direction(xg, f, d)?;
    let de = d.edge_deltas(xg.base().num_edges());
    Ok(offending_boarding(xg, f, &de).is_none())
}

/// Turns `d` into a feasible direction for `f` by moving offending carriers
/// onto their best unblocked alternatives.
pub fn repair_direction(xg: &ExtendedGraph, f: &Flow, d: &Direction) -> Result<Direction, DirectionError> {
    check_direction(xg, f, d)?;
    let g = xg.base();
    let mut d = d.clone();
    let mut de = d.edge_deltas(g.num_edges());
    let shift = |d: &mut Direction, de: &mut [Rational], i: usize, s: &Strategy, v: &Rational| {
        d.add(i, s, v);
        for &e in s.edges() {
            de[e.index()] += v;
        }
    };
    while let Some(e) = offending_boarding(xg, f, &de) {
        let plus = g.successor(e).unwrap();
        let mut carriers: Vec<(usize, Strategy)> = f
            .used()
            .map(|(i, s, _)| (i, s.clone()))
            .chain(d.entries().filter(|(_, v)| v.is_positive()).map(|(k, _)| k.clone()))
            .filter(|(_, s)| s.contains(e))
            .collect();
        carriers.sort();
        carriers.dedup();
        // positive d first, then the largest volume, then canonical order
        let (i, p) = carriers
            .into_iter()
            .min_by(|a, b| {
                let (da, db) = (d.get(a.0, &a.1), d.get(b.0, &b.1));
                db.is_positive().cmp(&da.is_positive()).then_with(|| f.volume(b.0, &b.1).cmp(&f.volume(a.0, &a.1))).then_with(|| a.cmp(b))
            })
            .expect("an offending boarding edge has a carrier");
        let dplus = de[plus.index()].clone();
        let mut delta = if f.volume(i, &p).is_positive() { dplus } else { rational::min(dplus, d.get(i, &p)) };
        shift(&mut d, &mut de, i, &p, &-delta.clone());
        while delta.is_positive() {
            let blocked = |x: EdgeIdx| g.kind(x) == EdgeKind::Driving && is_full(xg, f, x) && !de[x.index()].is_negative();
            let allow = |x: EdgeIdx| !blocked(x);
            let (q, _) = route::shortest(xg, i, &Query::filtered(&allow), None).expect("outside option");
            let step = q
                .edges()
                .iter()
                .filter(|&&x| g.kind(x) == EdgeKind::Driving && is_full(xg, f, x))
                .map(|&x| -de[x.index()].clone())
                .fold(delta.clone(), rational::min);
            shift(&mut d, &mut de, i, &q, &step);
            delta -= step;
        }
    }
    Ok(d)
}

/// Largest λ keeping f + λd feasible; `None` if nothing binds.
pub fn max_step(xg: &ExtendedGraph, f: &Flow, d: &Direction) -> Option<Rational> {
    let g = xg.base();
    let de = d.edge_deltas(g.num_edges());
    let from_entries = d.entries().filter(|(_, v)| v.is_negative()).map(|((i, s), v)| f.volume(*i, s) / -v);
    let from_edges =
        g.driving_edges().iter().filter(|e| de[e.index()].is_positive()).map(|&e| (g.capacity(e).unwrap() - f.load(e)) / &de[e.index()]);
    from_entries.chain(from_edges).min()
}

pub fn apply(xg: &ExtendedGraph, f: &Flow, d: &Direction, lambda: &Rational) -> Flow {
    let mut out = f.clone();
    for ((i, s), v) in d.entries() {
        out.add(xg.base(), *i, s.clone(), v * lambda);
    }
    out
}

/// Prerouted flow on uninterruptible paths; never includes outside options.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixedInitialSolution {
    pub flow: Flow,
}

impl FixedInitialSolution {
    pub fn volume(&self) -> Rational {
        self.flow.used().map(|(_, _, v)| v.clone()).sum()
    }

    /// Adds the remaining demand as outside options.
    pub fn with_outside(&self, xg: &ExtendedGraph) -> Flow {
        let mut f = self.flow.clone();
        for (i, c) in xg.commodities().iter().enumerate() {
            let rest = &c.demand - self.flow.commodity_volume(i);
            if rest.is_positive() {
                f.add(xg.base(), i, Strategy::Outside, rest);
            }
        }
        f
    }
}

fn is_uninterruptible(xg: &ExtendedGraph, f: &Flow, s: &Strategy) -> bool {
    let g = xg.base();
    s.edges().iter().filter_map(|&e| g.successor(e)).all(|plus| g.previous_driving(plus).is_none_or(|prev| is_full(xg, f, prev)))
}

pub fn fixed_initial_solution(xg: &ExtendedGraph) -> FixedInitialSolution {
    let g = xg.base();
    let mut f = Flow::new(g.num_edges());
    loop {
        let mut progressed = false;
        for (i, c) in xg.commodities().iter().enumerate() {
            let residual = &c.demand - f.commodity_volume(i);
            if !residual.is_positive() {
                continue;
            }
            let allow = |e: EdgeIdx| g.successor(e).is_none_or(|plus| !is_full(xg, &f, plus));
            let query = Query { allow: &allow, extra: None, include_outside: false };
            let Some((q, cost)) = route::shortest(xg, i, &query, None) else { continue };
            if cost >= c.outside_cost || !is_uninterruptible(xg, &f, &q) {
                continue;
            }
            let lambda = q.edges().iter().filter_map(|&e| g.capacity(e).map(|cap| cap - f.load(e))).fold(residual, rational::min);
            if lambda.is_positive() {
                f.add(g, i, q, lambda);
                progressed = true;
            }
        }
        if !progressed {
            return FixedInitialSolution { flow: f };
        }
    }
}

/// Routes the demand left by `f_in` through the system-optimum LP on
/// residual capacities and adds `f_in` back unchanged.
pub fn warm_start(xg: &ExtendedGraph, f_in: &FixedInitialSolution) -> Flow {
    let g = xg.base();
    let caps: Vec<Rational> = (0..g.num_edges())
        .map(|k| {
            let e = EdgeIdx(k as u32);
            g.capacity(e).map_or_else(rational::zero, |c| c - f_in.flow.load(e))
        })
        .collect();
    let demands: Vec<Rational> = xg.commodities().iter().enumerate().map(|(i, c)| &c.demand - f_in.flow.commodity_volume(i)).collect();
    let mut f = sysopt::solve_residual(xg, Some(&caps), &demands, &ExactSimplex).flow;
    for (i, s, v) in f_in.flow.used() {
        f.add(g, i, s.clone(), v.clone());
    }
    f
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    MaxRegret,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InitialFlow {
    Outside,
    FixedInitial,
    WarmStart,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeuristicConfig {
    pub iteration_cap: usize,
    pub selection: Selection,
    pub seed: u64,
    pub cycle_window: usize,
    pub restarts: usize,
    pub compress_cycles: bool,
    pub initial: InitialFlow,
    /// Commodities whose best move is taken in the first iterations.
    pub forced_choices: Vec<usize>,
    pub check_invariants: bool,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        HeuristicConfig {
            iteration_cap: 10_000,
            selection: Selection::MaxRegret,
            seed: 0,
            cycle_window: 64,
            restarts: 50,
            compress_cycles: true,
            initial: InitialFlow::WarmStart,
            forced_choices: Vec::new(),
            check_invariants: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceRow {
    pub iter: usize,
    /// `None` for a compressed cycle step.
    pub selected_commodity: Option<usize>,
    pub regret: Rational,
    pub lambda: Rational,
    pub mean_rho: Rational,
    pub p99_rho: Factor,
    pub social_cost: Rational,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeuristicOutcome {
    Equilibrium,
    Exhausted,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct HeuristicResult {
    pub outcome: HeuristicOutcome,
    /// Best flow seen: equilibria first, then the lowest mean ρ.
    pub flow: Flow,
    pub metrics: MetricsReport,
    pub trace: Vec<TraceRow>,
    pub fixed_initial: FixedInitialSolution,
    pub compressed_steps: usize,
    pub vanishing_cycles: usize,
    pub restarts: usize,
    /// Seed of the run that produced `flow`.
    pub seed: u64,
}

enum Cycle {
    Terminating(Direction),
    Vanishing,
}

fn detect_cycle(window: &[Direction]) -> Option<Cycle> {
    let n = window.len();
    (1..=n / 2).find_map(|k| {
        let (prev, last) = (&window[n - 2 * k..n - k], &window[n - k..]);
        if prev != last {
            return None;
        }
        let sum = last.iter().fold(Direction::new(), |acc, d| acc.plus(d));
        Some(if sum.is_zero() { Cycle::Vanishing } else { Cycle::Terminating(sum) })
    })
}

fn better(a: &MetricsReport, b: &MetricsReport) -> bool {
    let eq = |m: &MetricsReport| m.rows.iter().all(|r| r.regret.is_zero());
    (eq(a), -a.mean_rho.clone()) > (eq(b), -b.mean_rho.clone())
}

/// Runs the heuristic until an equilibrium is found, the iteration cap is
/// hit or `stop(iteration)` returns true.
pub fn solve_heuristic(xg: &ExtendedGraph, cfg: &HeuristicConfig, stop: &mut dyn FnMut(usize) -> bool) -> HeuristicResult {
    let f_in = match cfg.initial {
        InitialFlow::Outside => FixedInitialSolution { flow: Flow::new(xg.base().num_edges()) },
        _ => fixed_initial_solution(xg),
    };
    let mut f = match cfg.initial {
        InitialFlow::Outside => Flow::all_outside(xg),
        InitialFlow::FixedInitial => f_in.with_outside(xg),
        InitialFlow::WarmStart => warm_start(xg, &f_in),
    };
    let mut seed = cfg.seed;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selection = cfg.selection;
    let mut forced = cfg.forced_choices.iter().copied();
    let mut window: Vec<Direction> = Vec::new();
    let mut report = metrics(xg, &f);
    let mut best = (f.clone(), report.clone(), seed);
    let mut trace = Vec::new();
    let (mut compressed_steps, mut vanishing_cycles, mut restarts) = (0, 0, 0);
    let check = |f: &Flow| {
        if cfg.check_invariants {
            assert!(f.is_feasible(xg), "infeasible flow");
            assert!(f_in.flow.used().all(|(i, s, v)| f.volume(i, s) >= *v), "fixed initial entry decreased");
        }
    };
    check(&f);

    let mut outcome = HeuristicOutcome::Exhausted;
    for iter in 1..=cfg.iteration_cap {
        if report.rows.iter().all(|r| r.regret.is_zero()) {
            outcome = HeuristicOutcome::Equilibrium;
            break;
        }
        if stop(iter) {
            break;
        }
        let movable: Vec<usize> = (0..report.rows.len()).filter(|&k| report.rows[k].regret.is_positive()).collect();
        let forced_row = forced.next().and_then(|c| {
            movable
                .iter()
                .copied()
                .filter(|&k| report.rows[k].commodity == c)
                .max_by(|&a, &b| report.rows[a].regret.cmp(&report.rows[b].regret).then(b.cmp(&a)))
        });
        let pick = forced_row.unwrap_or_else(|| match selection {
            Selection::MaxRegret => {
                movable.iter().copied().max_by(|&a, &b| report.rows[a].regret.cmp(&report.rows[b].regret).then(b.cmp(&a))).unwrap()
            }
            Selection::Random => movable[rng.gen_range(0..movable.len())],
        });
        let row = &report.rows[pick];
        let (i, p, regret) = (row.commodity, row.strategy.clone(), row.regret.clone());
        let q_rng = (selection == Selection::Random).then_some(&mut rng);
        let (q, _) = best_available_with(xg, &f, i, &p, q_rng);
        let d = repair_direction(xg, &f, &Direction::elementary(i, &p, &q)).expect("elementary directions are balanced");
        if cfg.check_invariants {
            assert_eq!(is_feasible_direction(xg, &f, &d), Ok(true), "repaired direction infeasible");
        }
        let lambda = max_step(xg, &f, &d).expect("a balanced non-zero direction is bounded");
        f = apply(xg, &f, &d, &lambda);
        window.push(d);
        if window.len() > cfg.cycle_window {
            window.remove(0);
        }
        let mut selected = Some(i);
        let mut step = lambda;
        match detect_cycle(&window) {
            Some(Cycle::Terminating(sum)) if cfg.compress_cycles => {
                if is_feasible_direction(xg, &f, &sum) == Ok(true) {
                    if let Some(l) = max_step(xg, &f, &sum) {
                        f = apply(xg, &f, &sum, &l);
                        compressed_steps += 1;
                        selected = None;
                        step = l;
                    }
                }
                window.clear();
            }
            Some(Cycle::Vanishing) => {
                vanishing_cycles += 1;
                window.clear();
                if selection != Selection::Random {
                    selection = Selection::Random;
                } else if restarts < cfg.restarts {
                    restarts += 1;
                    seed = cfg.seed.wrapping_add(restarts as u64);
                    rng = ChaCha8Rng::seed_from_u64(seed);
                    f = f_in.with_outside(xg);
                }
            }
            _ => {}
        }
        check(&f);
        report = metrics(xg, &f);
        trace.push(TraceRow {
            iter,
            selected_commodity: selected,
            regret,
            lambda: step,
            mean_rho: report.mean_rho.clone(),
            p99_rho: report.p99_rho.clone(),
            social_cost: report.social_cost.clone(),
        });
        if better(&report, &best.1) {
            best = (f.clone(), report.clone(), seed);
        }
    }
    if report.rows.iter().all(|r| r.regret.is_zero()) {
        outcome = HeuristicOutcome::Equilibrium;
    }
    let (flow, metrics, seed) = best;
    debug_assert!(outcome != HeuristicOutcome::Equilibrium || metrics.rows.iter().all(|r| r.regret.is_zero()));
    HeuristicResult { outcome, flow, metrics, trace, fixed_initial: f_in, compressed_steps, vanishing_cycles, restarts, seed }
}

/// Cost of every used strategy; handy for asserting the shape of a result.
pub fn used_costs(xg: &ExtendedGraph, f: &Flow) -> Vec<(usize, Strategy, Rational, Rational)> {
    f.used().map(|(i, s, v)| (i, s.clone(), v.clone(), strategy_cost(xg, i, s))).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::verify_equilibrium;
    use crate::instances::{gen_example, gen_random, Example, RandomConfig};
    use crate::network::{Station, Trip};
    use crate::rational::{frac, int};
    use crate::{Commodity, Instance, Window};
    use proptest::prelude::{any, prop_assert, prop_assert_eq, proptest, ProptestConfig};

    fn run(xg: &ExtendedGraph, cfg: &HeuristicConfig) -> HeuristicResult {
        solve_heuristic(xg, cfg, &mut |_| false)
    }

    fn path_of(xg: &ExtendedGraph, i: usize) -> Strategy {
        let allow = |_: EdgeIdx| true;
        let q = Query { allow: &allow, extra: None, include_outside: false };
        route::shortest(xg, i, &q, None).unwrap().0
    }

    fn fig9_cfg(compress: bool) -> HeuristicConfig {
        HeuristicConfig {
            initial: InitialFlow::Outside,
            forced_choices: vec![2, 1],
            compress_cycles: compress,
            check_invariants: true,
            ..HeuristicConfig::default()
        }
    }

    #[test]
    fn fig9_step_sizes() {
        let eps = frac(1, 64);
        let xg = gen_example(&Example::Fig9 { eps: eps.clone() }).network().unwrap();
        let r = run(&xg, &fig9_cfg(false));
        let lambdas: Vec<_> = r.trace.iter().take(4).map(|t| t.lambda.clone()).collect();
        assert_eq!(lambdas, vec![int(1) - &eps, int(1), eps.clone(), eps.clone()]);
        assert_eq!(r.trace[2].selected_commodity, Some(0));
        assert_eq!(r.trace[3].selected_commodity, Some(3));
        assert_eq!(r.outcome, HeuristicOutcome::Equilibrium);
        assert!(r.trace.len() >= 126, "{}", r.trace.len());
        assert_eq!(r.flow.volume(0, &path_of(&xg, 0)), int(1));
        assert_eq!(r.flow.volume(3, &path_of(&xg, 3)), int(1) - &eps);
    }

    #[test]
    fn fig9_iteration_three_repair() {
        let eps = frac(1, 64);
        let xg = gen_example(&Example::Fig9 { eps: eps.clone() }).network().unwrap();
        let g = xg.base();
        let mut f = Flow::all_outside(&xg);
        for (i, v) in [(2, int(1) - &eps), (1, int(1))] {
            f.add(g, i, Strategy::Outside, -v.clone());
            f.add(g, i, path_of(&xg, i), v);
        }
        let d = Direction::elementary(0, &Strategy::Outside, &path_of(&xg, 0));
        assert_eq!(is_feasible_direction(&xg, &f, &d), Ok(false));
        let r = repair_direction(&xg, &f, &d).unwrap();
        assert_eq!(r.get(1, &path_of(&xg, 1)), int(-1));
        assert_eq!(r.get(1, &Strategy::Outside), int(1));
        assert_eq!(is_feasible_direction(&xg, &f, &r), Ok(true));
        assert_eq!(max_step(&xg, &f, &r), Some(eps));
    }

    #[test]
    fn fig9_compression() {
        let eps = frac(1, 64);
        let xg = gen_example(&Example::Fig9 { eps: eps.clone() }).network().unwrap();
        let raw = run(&xg, &fig9_cfg(false));
        let r = run(&xg, &fig9_cfg(true));
        assert_eq!(r.outcome, HeuristicOutcome::Equilibrium);
        assert!(r.trace.len() <= 10, "{}", r.trace.len());
        assert_eq!(r.compressed_steps, 1);
        let jump = r.trace.iter().find(|t| t.selected_commodity.is_none()).unwrap();
        assert_eq!(jump.lambda, int(1) - int(3) * &eps);
        assert_eq!(r.flow, raw.flow);
    }

    #[test]
    fn fig9_prefill_is_the_equilibrium() {
        let eps = frac(1, 64);
        let xg = gen_example(&Example::Fig9 { eps: eps.clone() }).network().unwrap();
        let fin = fixed_initial_solution(&xg);
        assert_eq!(fin.flow.volume(0, &path_of(&xg, 0)), int(1));
        assert_eq!(fin.flow.volume(3, &path_of(&xg, 3)), int(1) - &eps);
        assert_eq!(fin.flow.volume(2, &path_of(&xg, 2)), int(0));
        assert!(verify_equilibrium(&xg, &fin.with_outside(&xg)).is_equilibrium());
    }

    #[test]
    fn fig10_cycle_and_restart() {
        let xg = gen_example(&Example::Fig10).network().unwrap();
        let cfg = HeuristicConfig {
            initial: InitialFlow::Outside,
            forced_choices: vec![0],
            check_invariants: true,
            ..HeuristicConfig::default()
        };
        let r = run(&xg, &cfg);
        assert!(r.vanishing_cycles >= 1);
        assert!(r.restarts >= 1);
        assert_eq!(r.outcome, HeuristicOutcome::Equilibrium);
        assert!(verify_equilibrium(&xg, &r.flow).is_equilibrium());
        let used: Vec<_> = r.flow.used().filter(|(_, s, _)| **s != Strategy::Outside).collect();
        assert_eq!(used.len(), 1);
        let (i, s, v) = used[0];
        assert_eq!((i, v), (1, &int(1)));
        // p2 rides all three vehicles
        let trips: alloc::collections::BTreeSet<_> = s.edges().iter().filter_map(|&e| xg.base().edge(e).trip).collect();
        assert_eq!(trips.len(), 3);
    }

    #[test]
    fn feasibility_predicate_examples() {
        let xg = gen_example(&Example::Fig1).network().unwrap();
        let f = Flow::all_outside(&xg);
        assert_eq!(is_feasible_direction(&xg, &f, &Direction::new()), Ok(true));
        let p = path_of(&xg, 0);
        let bad = Direction::elementary(0, &p, &Strategy::Outside);
        assert_eq!(is_feasible_direction(&xg, &f, &bad), Err(DirectionError::SupportViolated));
        let mut unbalanced = Direction::new();
        unbalanced.add(0, &p, &int(1));
        assert_eq!(repair_direction(&xg, &f, &unbalanced), Err(DirectionError::Unbalanced));
        let d = Direction::elementary(0, &Strategy::Outside, &p);
        assert_eq!(max_step(&xg, &f, &d), Some(int(1)));
    }

    #[test]
    fn staying_longer_on_a_full_vehicle_is_feasible() {
        // one vehicle a → b → c at capacity; moving to alight later keeps d_e ≤ 0 at b's boarding
        let stations = ["a", "b", "c"].map(Station::new).to_vec();
        let trips = vec![Trip::simple("z", int(1), &[("a", 0), ("b", 600), ("c", 1200)])];
        let mut k = Commodity::new("k", "a", "c", Window::singleton(0), int(1), int(100_000));
        k.destination = "c".into();
        let xg = Instance { stations, trips, commodities: vec![k] }.network().unwrap();
        let p = path_of(&xg, 0);
        let mut f = Flow::new(xg.base().num_edges());
        f.add(xg.base(), 0, p.clone(), int(1));
        assert!(f.is_saturated(&xg, xg.base().driving_edges()[0]));
        let d = Direction::elementary(0, &p, &p);
        assert!(d.is_zero());
        assert_eq!(is_feasible_direction(&xg, &f, &d), Ok(true));
    }

    #[test]
    fn repair_falls_back_to_the_outside_option() {
        // two commodities share one full vehicle; the newcomer dwells through
        let stations = ["a", "b", "c"].map(Station::new).to_vec();
        let trips = vec![Trip::simple("z", int(1), &[("a", 0), ("b", 600), ("c", 1200)])];
        let first = Commodity::new("first", "a", "c", Window::singleton(0), int(1), int(100_000));
        let second = Commodity::new("second", "b", "c", Window::singleton(600), int(1), int(100_000));
        let xg = Instance { stations, trips, commodities: vec![first, second] }.network().unwrap();
        let g = xg.base();
        let mut f = Flow::all_outside(&xg);
        f.add(g, 1, Strategy::Outside, int(-1));
        f.add(g, 1, path_of(&xg, 1), int(1));
        let d = Direction::elementary(0, &Strategy::Outside, &path_of(&xg, 0));
        let r = repair_direction(&xg, &f, &d).unwrap();
        assert_eq!(r.get(1, &Strategy::Outside), int(1));
        assert_eq!(max_step(&xg, &f, &r), Some(int(1)));
    }

    #[test]
    fn warm_start_examples() {
        let xg = gen_example(&Example::Fig7 { delay: 0 }).network().unwrap();
        let empty = FixedInitialSolution { flow: Flow::new(xg.base().num_edges()) };
        let f = warm_start(&xg, &empty);
        assert_eq!(crate::flow::social_cost(&xg, &f), sysopt::solve_system_optimum(&xg).cost);
        let eps = frac(1, 8);
        let xg = gen_example(&Example::Fig9 { eps }).network().unwrap();
        let fin = fixed_initial_solution(&xg);
        let f = warm_start(&xg, &fin);
        assert!(f.is_feasible(&xg));
        assert!(fin.flow.used().all(|(i, s, v)| f.volume(i, s) >= *v));
    }

    #[test]
    fn first_stop_boardings_prefill_chains() {
        let stations = ["a", "b"].map(Station::new).to_vec();
        let trips = vec![Trip::simple("z", int(3), &[("a", 0), ("b", 600)])];
        let c = Commodity::new("k", "a", "b", Window::singleton(0), int(5), int(100_000));
        let xg = Instance { stations, trips, commodities: vec![c] }.network().unwrap();
        assert_eq!(fixed_initial_solution(&xg).volume(), int(3));
    }

    fn small_random() -> RandomConfig {
        RandomConfig { max_stations: 5, max_trips: 5, max_commodities: 3, max_driving_edges: 12, ..RandomConfig::default() }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn runs_stay_feasible_and_keep_prefill(seed in 0u64..10_000, random in any::<bool>()) {
            let xg = gen_random(&small_random(), seed).network().unwrap();
            let cfg = HeuristicConfig {
                iteration_cap: 200,
                selection: if random { Selection::Random } else { Selection::MaxRegret },
                seed,
                check_invariants: true,
                ..HeuristicConfig::default()
            };
            let r = run(&xg, &cfg);
            prop_assert!(r.flow.is_feasible(&xg));
            for t in &r.trace {
                prop_assert!(r.metrics.mean_rho <= t.mean_rho || r.outcome == HeuristicOutcome::Equilibrium);
            }
        }

        #[test]
        fn max_step_is_exactly_feasible(seed in 0u64..10_000) {
            let xg = gen_random(&small_random(), seed).network().unwrap();
            let f = warm_start(&xg, &fixed_initial_solution(&xg));
            let report = metrics(&xg, &f);
            for row in report.rows.iter().filter(|r| r.regret.is_positive()) {
                let (q, _) = best_available_with(&xg, &f, row.commodity, &row.strategy, None);
                let d = repair_direction(&xg, &f, &Direction::elementary(row.commodity, &row.strategy, &q)).unwrap();
                prop_assert_eq!(is_feasible_direction(&xg, &f, &d), Ok(true));
                let l = max_step(&xg, &f, &d).unwrap();
                prop_assert!(l.is_positive());
                let next = apply(&xg, &f, &d, &l);
                prop_assert!(next.is_feasible(&xg));
            }
        }
    }
}
