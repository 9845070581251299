//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! `cargo test -p transit-eq --test acceptance` runs everything; extra
//! numeric arguments select criteria (`-- 4 7`).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use transit_eq_core::demand::{extend_flow_fdt, fdt_transform};
use transit_eq_core::flow::{
    price_of_stability, social_cost, strategy_cost, verify_bs, verify_equilibrium, verify_qvi, Flow, PriceOfStability, Strategy,
};
use transit_eq_core::instances::{gen_example, gen_random, gen_sat, CnfFormula, Example, Instance, Literal, RandomConfig, SatMode};
use transit_eq_core::network::{EdgeKind, ExtendedGraph};
use transit_eq_core::rational::{frac, int, min, zero, Rational, Time};
use transit_eq_core::solver_exact::{
    enumerate_equilibrium_costs, enumerate_strategies, in_feasibility_set, solve_exact, ExactLimits, ExactOutcome, StrategySet,
};
use transit_eq_core::solver_heuristic::{solve_heuristic, HeuristicConfig, HeuristicOutcome, HeuristicResult, InitialFlow, Selection};
use transit_eq_core::solver_single::solve_single;
use transit_eq_core::sysopt::{full_lp_optimum, solve_system_optimum};

const H: Time = 3600;

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

static HEURISTIC_RUNS: AtomicUsize = AtomicUsize::new(0);
static HEURISTIC_PANICS: AtomicUsize = AtomicUsize::new(0);

/// Every heuristic run in the suite goes through here with invariant checks on.
fn heuristic(xg: &ExtendedGraph, cfg: HeuristicConfig) -> Result<HeuristicResult, String> {
    let cfg = HeuristicConfig { check_invariants: true, ..cfg };
    HEURISTIC_RUNS.fetch_add(1, Ordering::Relaxed);
    catch_unwind(AssertUnwindSafe(|| solve_heuristic(xg, &cfg, &mut |_| false))).map_err(|e| {
        HEURISTIC_PANICS.fetch_add(1, Ordering::Relaxed);
        format!("heuristic invariant failed: {}", panic_message(&e))
    })
}

fn panic_message(e: &Box<dyn std::any::Any + Send>) -> String {
    e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
}

fn network(inst: &Instance) -> ExtendedGraph {
    inst.network().expect("generated instances are valid")
}

fn example(e: Example) -> ExtendedGraph {
    network(&gen_example(&e))
}

fn dtc_config() -> RandomConfig {
    RandomConfig { fixed_departure: false, betas: vec![zero(), int(1)], ..RandomConfig::default() }
}

fn all_verifiers(xg: &ExtendedGraph, f: &Flow) -> [bool; 3] {
    [verify_equilibrium(xg, f).is_equilibrium(), verify_qvi(xg, f), verify_bs(xg, f)]
}

/// Random feasible flow: deviations from the all-outside flow, each moving a
/// share of the largest amount capacity allows, so some edges end up full.
fn random_feasible_flow(xg: &ExtendedGraph, set: &StrategySet, rng: &mut ChaCha8Rng, steps: usize) -> Flow {
    let g = xg.base();
    let mut f = Flow::all_outside(xg);
    for _ in 0..steps {
        let i = rng.gen_range(0..xg.num_commodities());
        let used: Vec<Strategy> = f.used().filter(|(j, _, _)| *j == i).map(|(_, s, _)| s.clone()).collect();
        let (Some(p), Some(q)) = (used.choose(rng), set.strategies(i).choose(rng).map(|s| &s.strategy)) else { continue };
        if p == q {
            continue;
        }
        let mut amount = f.volume(i, p);
        for &e in q.edges() {
            if let (EdgeKind::Driving, false) = (g.kind(e), p.contains(e)) {
                amount = min(amount, g.capacity(e).unwrap() - f.load(e));
            }
        }
        if amount <= zero() {
            continue;
        }
        let share = [int(1), int(1), frac(1, 2), frac(1, 3)].choose(rng).unwrap().clone();
        f.add(g, i, p.clone(), -(&amount * &share));
        f.add(g, i, q.clone(), amount * share);
    }
    assert!(f.is_feasible(xg));
    f
}

fn boardings(xg: &ExtendedGraph, s: &Strategy) -> Vec<String> {
    let g = xg.base();
    s.edges()
        .iter()
        .filter(|&&e| g.kind(e) == EdgeKind::Boarding)
        .map(|&e| g.trip_id(g.edge(g.successor(e).unwrap()).trip.unwrap()).to_string())
        .collect()
}

/// Cheapest strategy of commodity 0 boarding exactly `trips` in order.
fn strategy_by_trips(xg: &ExtendedGraph, set: &StrategySet, trips: &[&str]) -> Result<Strategy, String> {
    set.strategies(0)
        .iter()
        .filter(|s| boardings(xg, &s.strategy) == trips)
        .min_by(|a, b| a.cost.cmp(&b.cost))
        .map(|s| s.strategy.clone())
        .ok_or_else(|| format!("no strategy boarding {trips:?}"))
}

fn c1_non_existence() -> Check {
    let xg = example(Example::Fig4);
    let start = Instant::now();
    let outcome = solve_exact(&xg, &ExactLimits::default());
    let took = start.elapsed();
    let ExactOutcome::NoEquilibrium { nodes } = outcome else { return Err(format!("expected no equilibrium, got {outcome:?}")) };
    ensure!(took < Duration::from_secs(1), "took {took:?}");
    Ok(format!("{nodes} search nodes in {took:?}"))
}

fn c2_fdt_existence() -> Check {
    let start = Instant::now();
    let cfg = RandomConfig::default();
    let mut nodes = 0;
    for seed in 0..200 {
        let inst = gen_random(&cfg, seed);
        ensure!(inst.stations.len() <= 6 && inst.trips.len() <= 8 && inst.commodities.len() <= 3, "seed {seed}: size");
        let xg = network(&inst);
        ensure!(xg.base().driving_edges().len() <= 20, "seed {seed}: driving edges");
        match solve_exact(&xg, &ExactLimits::default()) {
            ExactOutcome::Equilibrium(sol) => {
                ensure!(all_verifiers(&xg, &sol.flow) == [true; 3], "seed {seed}: returned flow fails verification");
                nodes += sol.nodes;
            }
            other => return Err(format!("seed {seed}: {other:?}")),
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(300), "took {took:?}");
    Ok(format!("200 instances, {nodes} search nodes, {took:?}"))
}

fn c3_single_commodity() -> Check {
    let cfg = RandomConfig { max_commodities: 1, ..RandomConfig::default() };
    let mut saturating = 0;
    for seed in 0..200 {
        let xg = network(&gen_random(&cfg, 1000 + seed));
        let f = solve_single(&xg).map_err(|e| format!("seed {seed}: {e:?}"))?.flow;
        ensure!(all_verifiers(&xg, &f) == [true; 3], "seed {seed}: verifiers {:?}", all_verifiers(&xg, &f));
        ensure!(f.used().count() <= xg.base().num_edges(), "seed {seed}: support exceeds |E|");
        let set = enumerate_strategies(&xg, 1_000_000).map_err(|e| format!("seed {seed}: {e}"))?;
        let saturated = f.saturated_edges(&xg);
        ensure!(in_feasibility_set(&xg, &set, &f, &saturated), "seed {seed}: not in the feasibility set of its saturated edges");
        saturating += usize::from(!saturated.is_empty());
    }
    Ok(format!("200 instances, {saturating} with saturated edges"))
}

fn c4_verifier_equivalence() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut pairs, mut equilibria, mut saturated, mut instances) = (0, 0, 0, 0u64);
    while pairs < 1000 {
        let cfg = if instances % 2 == 0 { RandomConfig::default() } else { dtc_config() };
        let xg = network(&gen_random(&cfg, 20_000 + instances));
        instances += 1;
        let Ok(set) = enumerate_strategies(&xg, 100_000) else { continue };
        let mut flows = vec![random_feasible_flow(&xg, &set, &mut rng, 3), random_feasible_flow(&xg, &set, &mut rng, 12)];
        if let Some(f) = solve_exact(&xg, &ExactLimits::default()).flow() {
            flows.push(f.clone());
        }
        flows.push(heuristic(&xg, HeuristicConfig { iteration_cap: 100, ..HeuristicConfig::default() })?.flow);
        for f in flows.into_iter().take(1000 - pairs) {
            let v = all_verifiers(&xg, &f);
            ensure!(v[0] == v[1] && v[1] == v[2], "instance {}: verdicts disagree {v:?}", instances - 1);
            pairs += 1;
            equilibria += usize::from(v[0]);
            saturated += usize::from(!f.saturated_edges(&xg).is_empty());
        }
    }
    ensure!(equilibria > 0 && equilibria < pairs, "degenerate mix: {equilibria} equilibria");
    Ok(format!("{pairs} pairs on {instances} instances: {equilibria} equilibria, {saturated} with saturated edges"))
}

fn c5_multiplicity() -> Check {
    let xg = example(Example::Fig6);
    let g = xg.base();
    let set = enumerate_strategies(&xg, 100_000).map_err(|e| e.to_string())?;
    let green = strategy_by_trips(&xg, &set, &["green"])?;
    let p3 = strategy_by_trips(&xg, &set, &["blue", "red"])?;
    let loop_green = strategy_by_trips(&xg, &set, &["blue", "green"])?;
    let p4 = strategy_by_trips(&xg, &set, &["pink"])?;
    let mut f0 = Flow::new(g.num_edges());
    f0.add(g, 0, green, int(1));
    f0.add(g, 0, p3.clone(), int(1));
    let mut f1 = Flow::new(g.num_edges());
    f1.add(g, 0, loop_green, int(1));
    f1.add(g, 0, p4.clone(), int(1));
    ensure!(all_verifiers(&xg, &f0) == [true; 3], "f0 not verified");
    ensure!(all_verifiers(&xg, &f1) == [true; 3], "f1 not verified");
    let (c0, c1) = (social_cost(&xg, &f0), social_cost(&xg, &f1));
    let diff = strategy_cost(&xg, 0, &p4) - strategy_cost(&xg, 0, &p3);
    ensure!(&c1 - &c0 == diff, "cost difference {} vs {diff}", &c1 - &c0);
    let range = enumerate_equilibrium_costs(&xg, &ExactLimits::default()).map_err(|e| e.to_string())?.ok_or("no equilibrium found")?;
    ensure!(range.min <= c0 && c1 <= range.max, "range [{}, {}] does not bracket {c0}, {c1}", range.min, range.max);
    Ok(format!("costs {c0} and {c1}, range [{}, {}]", range.min, range.max))
}

fn c6_price_of_stability() -> Check {
    let mut out = Vec::new();
    for delta in [0, 9, 90] {
        let inst = gen_example(&Example::Fig7 { delay: delta * H });
        let xg = network(&inst);
        let opt = solve_system_optimum(&xg).cost;
        ensure!(opt == int(9), "Δ={delta}: system optimum {opt}");
        let set = enumerate_strategies(&xg, 100_000).map_err(|e| e.to_string())?;
        let tau_red = strategy_cost(&xg, 0, &strategy_by_trips(&xg, &set, &["red"])?);
        let range = enumerate_equilibrium_costs(&xg, &ExactLimits::default()).map_err(|e| e.to_string())?.ok_or("no equilibrium")?;
        ensure!(range.min == range.max, "Δ={delta}: equilibrium cost not unique");
        ensure!(range.min == int(4) + &tau_red, "Δ={delta}: equilibrium cost {} vs 4 + {tau_red}", range.min);
        let pos = price_of_stability(&xg, &ExactLimits::default()).map_err(|e| e.to_string())?;
        if delta > 0 {
            ensure!(pos == PriceOfStability::Ratio(frac(9 + delta, 9)), "Δ={delta}: {pos:?}");
        }
        let PriceOfStability::Ratio(q) = pos else { return Err(format!("Δ={delta}: {pos:?}")) };
        out.push(format!("Δ={delta}: PoS {q}"));
    }
    Ok(out.join(", "))
}

fn truth_table(f: &CnfFormula, n: usize) -> bool {
    (0..1u32 << n).any(|bits| f.eval(&(0..n).map(|v| bits >> v & 1 == 1).collect::<Vec<_>>()))
}

fn sat_formulas() -> Vec<(usize, CnfFormula)> {
    let (p, q) = (Literal::pos, Literal::neg);
    let fixed: Vec<(usize, Vec<Vec<Literal>>)> = vec![
        (1, vec![vec![p(0)]]),
        (1, vec![vec![p(0)], vec![q(0)]]),
        (2, vec![vec![p(0), p(1)], vec![q(0)], vec![q(1)]]),
        (2, vec![vec![p(0), q(1)], vec![q(0), p(1)]]),
        (2, vec![vec![p(0), p(1)], vec![q(0), q(1)]]),
        (3, vec![vec![p(0), p(1), p(2)], vec![q(0), q(1), q(2)]]),
        (3, vec![vec![p(0), p(1), p(2)], vec![q(0)], vec![q(1), q(2)]]),
        (3, vec![vec![p(0), q(1)], vec![p(1), q(2)], vec![p(2), q(0)]]),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut out: Vec<(usize, CnfFormula)> = fixed.into_iter().map(|(n, c)| (n, CnfFormula::new(n, c).unwrap())).collect();
    while out.len() < 24 {
        let n = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=3);
        let clauses = (0..m)
            .map(|_| {
                let mut vars: Vec<usize> = (0..n).collect();
                vars.shuffle(&mut rng);
                vars.truncate(rng.gen_range(1..=n));
                vars.into_iter().map(|v| if rng.gen() { p(v) } else { q(v) }).collect()
            })
            .collect();
        if let Ok(f) = CnfFormula::new(n, clauses) {
            out.push((n, f));
        }
    }
    out
}

fn c7_sat_reduction() -> Check {
    let start = Instant::now();
    let (mut sat, mut unsat, mut max_edges) = (0, 0, 0);
    for (k, (n, formula)) in sat_formulas().iter().enumerate() {
        let satisfiable = truth_table(formula, *n);
        for (mode, forbid_outside) in [(SatMode::DepartureTimeChoice, false), (SatMode::Fixed, true)] {
            let xg = network(&gen_sat(formula, mode).map_err(|e| format!("{e:?}"))?.instance);
            max_edges = max_edges.max(xg.base().driving_edges().len());
            let limits = ExactLimits { max_driving_edges: 128, forbid_outside, ..ExactLimits::default() };
            let found = match solve_exact(&xg, &limits) {
                ExactOutcome::Equilibrium(sol) => {
                    ensure!(verify_equilibrium(&xg, &sol.flow).is_equilibrium(), "formula {k} {mode:?}: unverified flow");
                    true
                }
                ExactOutcome::NoEquilibrium { .. } => false,
                ExactOutcome::ResourceLimit(l) => return Err(format!("formula {k} {mode:?}: {l}")),
            };
            ensure!(found == satisfiable, "formula {k} {mode:?}: equilibrium {found}, satisfiable {satisfiable}");
        }
        if satisfiable {
            sat += 1;
        } else {
            unsat += 1;
        }
    }
    let took = start.elapsed();
    ensure!(took < Duration::from_secs(600), "took {took:?}");
    Ok(format!("{sat} satisfiable, {unsat} unsatisfiable, up to {max_edges} driving edges, {took:?}"))
}

fn c8_cycle_handling() -> Check {
    let eps = frac(1, 64);
    let xg = example(Example::Fig9 { eps: eps.clone() });
    let cfg = |compress| HeuristicConfig {
        initial: InitialFlow::Outside,
        forced_choices: vec![2, 1],
        compress_cycles: compress,
        ..HeuristicConfig::default()
    };
    let raw = heuristic(&xg, cfg(false))?;
    let compressed = heuristic(&xg, cfg(true))?;
    let bound = int(2) * (int(1) - &eps) / &eps;
    ensure!(raw.outcome == HeuristicOutcome::Equilibrium, "raw run did not converge");
    ensure!(int(raw.trace.len() as i64) >= bound, "raw run took {} iterations", raw.trace.len());
    ensure!(compressed.trace.len() <= 10, "compressed run took {} iterations", compressed.trace.len());
    ensure!(compressed.flow == raw.flow, "final flows differ");
    ensure!(verify_equilibrium(&xg, &raw.flow).is_equilibrium(), "final flow not verified");

    let xg = example(Example::Fig10);
    let r = heuristic(&xg, HeuristicConfig { initial: InitialFlow::Outside, forced_choices: vec![0], ..HeuristicConfig::default() })?;
    ensure!(r.vanishing_cycles >= 1 && r.restarts >= 1, "no vanishing cycle or restart");
    ensure!(verify_equilibrium(&xg, &r.flow).is_equilibrium(), "fig10 flow not verified");
    let used: Vec<_> = r.flow.used().filter(|(_, s, _)| **s != Strategy::Outside).collect();
    ensure!(used.len() == 1, "expected one routed path");
    let (i, s, v) = used[0];
    let mut vehicles = boardings(&xg, s);
    vehicles.dedup();
    ensure!(i == 1 && *v == int(1) && vehicles == ["green", "blue", "red"], "unexpected equilibrium {vehicles:?}");
    Ok(format!(
        "fig9 raw {} / compressed {} iterations; fig10 {} vanishing cycle(s), {} restart(s)",
        raw.trace.len(),
        compressed.trace.len(),
        r.vanishing_cycles,
        r.restarts
    ))
}

fn c9_invariants() -> Check {
    for seed in 0..40 {
        let cfg = if seed % 2 == 0 { RandomConfig::default() } else { dtc_config() };
        let xg = network(&gen_random(&cfg, 30_000 + seed));
        for selection in [Selection::MaxRegret, Selection::Random] {
            for initial in [InitialFlow::Outside, InitialFlow::FixedInitial, InitialFlow::WarmStart] {
                heuristic(&xg, HeuristicConfig { selection, initial, seed, iteration_cap: 300, ..HeuristicConfig::default() })
                    .map_err(|e| format!("seed {seed} {selection:?} {initial:?}: {e}"))?;
            }
        }
    }
    let runs = HEURISTIC_RUNS.load(Ordering::Relaxed);
    let panics = HEURISTIC_PANICS.load(Ordering::Relaxed);
    ensure!(panics == 0, "{panics} of {runs} runs violated an invariant");
    Ok(format!("{runs} checked runs so far, none violated"))
}

fn c10_fdt_invariance() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (mut flows, mut equilibria) = (0, 0);
    for seed in 0..100 {
        let inst = gen_random(&dtc_config(), 40_000 + seed);
        let xg = network(&inst);
        let fdt = fdt_transform(&inst).map_err(|e| format!("seed {seed}: {e:?}"))?;
        let xg2 = network(&fdt.instance);
        let set = enumerate_strategies(&xg, 100_000).map_err(|e| format!("seed {seed}: {e}"))?;
        let mut candidates = vec![random_feasible_flow(&xg, &set, &mut rng, 8)];
        if let Some(f) = solve_exact(&xg, &ExactLimits::default()).flow() {
            candidates.push(f.clone());
        }
        for f in candidates {
            let ext = extend_flow_fdt(xg2.base(), &f, &fdt.start_times);
            ensure!(ext.is_feasible(&xg2), "seed {seed}: extension infeasible");
            let (a, b) = (verify_equilibrium(&xg, &f).is_equilibrium(), verify_equilibrium(&xg2, &ext).is_equilibrium());
            ensure!(a == b, "seed {seed}: verdict {a} before, {b} after the transform");
            flows += 1;
            equilibria += usize::from(a);
        }
    }
    Ok(format!("{flows} flows on 100 instances, {equilibria} equilibria"))
}

fn c11_fixed_initial_preserved() -> Check {
    let cfg = RandomConfig::default();
    let (mut instances, mut nontrivial, mut seed) = (0, 0, 50_000);
    while instances < 100 {
        let xg = network(&gen_random(&cfg, seed));
        seed += 1;
        if xg.num_commodities() < 2 {
            continue;
        }
        instances += 1;
        for selection in [Selection::MaxRegret, Selection::Random] {
            let r = heuristic(&xg, HeuristicConfig { selection, seed, iteration_cap: 500, ..HeuristicConfig::default() })?;
            for (i, s, v) in r.fixed_initial.flow.used() {
                ensure!(r.flow.volume(i, s) >= *v, "seed {}: fixed initial entry decreased", seed - 1);
            }
            nontrivial += usize::from(r.fixed_initial.volume() > zero());
        }
    }
    Ok(format!("100 instances × 2 rules, {nontrivial} runs with a non-empty fixed initial solution"))
}

fn c12_system_optimum() -> Check {
    let mut instances: Vec<(String, Instance)> = [
        ("fig1", Example::Fig1),
        ("fig6", Example::Fig6),
        ("fig7", Example::Fig7 { delay: 0 }),
        ("fig9", Example::Fig9 { eps: frac(1, 64) }),
        ("fig10", Example::Fig10),
    ]
    .into_iter()
    .map(|(n, e)| (n.to_string(), gen_example(&e)))
    .collect();
    for seed in 0..60 {
        let cfg = if seed % 2 == 0 { RandomConfig::default() } else { dtc_config() };
        instances.push((format!("random {seed}"), gen_random(&cfg, 60_000 + seed)));
    }
    let (mut compared, mut skipped) = (0, 0);
    for (name, inst) in &instances {
        let xg = network(inst);
        let Ok(full) = full_lp_optimum(&xg, 10_000) else {
            skipped += 1;
            continue;
        };
        let cg = solve_system_optimum(&xg);
        ensure!(cg.cost == full.cost, "{name}: column generation {} vs full LP {}", cg.cost, full.cost);
        ensure!(cg.flow.is_feasible(&xg) && social_cost(&xg, &cg.flow) == cg.cost, "{name}: optimum flow inconsistent");
        let mut others: Vec<(&str, Rational)> = Vec::new();
        if let Some(f) = solve_exact(&xg, &ExactLimits::default()).flow() {
            others.push(("exact", social_cost(&xg, f)));
        }
        if xg.num_commodities() == 1 {
            if let Ok(sol) = solve_single(&xg) {
                others.push(("single", social_cost(&xg, &sol.flow)));
            }
        }
        let h = heuristic(&xg, HeuristicConfig { iteration_cap: 200, ..HeuristicConfig::default() })?;
        others.push(("heuristic", social_cost(&xg, &h.flow)));
        for (solver, c) in others {
            ensure!(cg.cost <= c, "{name}: {solver} cost {c} below the optimum {}", cg.cost);
        }
        compared += 1;
    }
    ensure!(compared >= instances.len() / 2, "only {compared} instances within the strategy limit");
    Ok(format!("{compared} instances compared, {skipped} over 10^4 strategies"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("non-existence certificate", c1_non_existence),
        ("fixed-departure existence", c2_fdt_existence),
        ("single-commodity correctness", c3_single_commodity),
        ("verifier equivalence", c4_verifier_equivalence),
        ("equilibrium multiplicity", c5_multiplicity),
        ("price of stability", c6_price_of_stability),
        ("SAT reduction", c7_sat_reduction),
        ("heuristic cycle handling", c8_cycle_handling),
        ("heuristic invariants", c9_invariants),
        ("fixed-departure transform invariance", c10_fdt_invariance),
        ("fixed initial solution preserved", c11_fixed_initial_preserved),
        ("system optimum", c12_system_optimum),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (k, (name, check)) in criteria.iter().enumerate() {
        let n = k + 1;
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(check).unwrap_or_else(|e| Err(format!("panicked: {}", panic_message(&e))));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {n:>2} {name} ({secs:.2}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL {n:>2} {name} ({secs:.2}s): {detail}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
