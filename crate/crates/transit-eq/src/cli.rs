//! Command-line front end.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{anyhow, bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use transit_eq_core::flow::{
    price_of_stability, verify_bs, verify_equilibrium, verify_qvi, EquilibriumCheck, Flow, MetricsReport, PriceOfStability,
};
use transit_eq_core::instances::{
    apply_demand_profile, gen_example, gen_random, gen_sat, scale_demand, CnfFormula, Example, ProfileMode, RandomConfig, SatMode,
};
use transit_eq_core::network::{EdgeKind, ExtendedGraph};
use transit_eq_core::rational::{self, Rational, Time};
use transit_eq_core::solver_exact::{solve_exact, ExactLimits, ExactOutcome};
use transit_eq_core::solver_heuristic::{solve_heuristic, HeuristicConfig, HeuristicResult, Selection};
use transit_eq_core::solver_single::{solve_common_destination, solve_single};
use transit_eq_core::sysopt::solve_system_optimum;
use transit_eq_core::Instance;

use crate::csv_import::{import_dir, ImportOptions};
use crate::flowfile;
use crate::format::{self, InstanceFile};
use crate::report::{metrics_par, write_metrics_csv, write_trace_csv, Outcome, Verdict};

#[derive(Parser, Debug)]
#[command(name = "transit-eq", version, about = "Capacitated transit user equilibria: solve, verify, generate")]
pub struct Cli {
    /// Worker threads for parallel metric evaluation.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the time-expanded graph and print its size.
    Build {
        /// Instance file; stdin when omitted or `-`.
        #[arg(default_value = "-")]
        instance: PathBuf,
    },
    /// Run a solver and report the verdict.
    Solve(SolveArgs),
    /// Check a flow file against an instance.
    Verify { instance: PathBuf, flow: PathBuf },
    /// Write the metrics CSV of a flow file.
    Metrics {
        instance: PathBuf,
        flow: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit an instance file.
    Gen(GenArgs),
    /// Expand the periodic block into absolute trips.
    Unroll {
        /// Instance file; stdin when omitted or `-`.
        #[arg(default_value = "-")]
        instance: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Price of stability: best equilibrium cost over the system optimum.
    Pos {
        /// Instance file; stdin when omitted or `-`.
        #[arg(default_value = "-")]
        instance: PathBuf,
        #[command(flatten)]
        limits: LimitArgs,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Single,
    Exact,
    Heuristic,
    Sysopt,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SelectionArg {
    MaxRegret,
    Random,
}

#[derive(Args, Debug, Clone)]
pub struct LimitArgs {
    /// Exact solver: maximum number of driving edges.
    #[arg(long, default_value_t = 24)]
    pub max_driving_edges: usize,
    /// Exact solver: maximum number of enumerated strategies.
    #[arg(long, default_value_t = 1_000_000)]
    pub path_cap: usize,
    /// Exact solver: maximum number of search nodes.
    #[arg(long)]
    pub max_nodes: Option<u64>,
    /// Exact solver: look for equilibria that use no outside option.
    #[arg(long)]
    pub no_outside: bool,
}

impl LimitArgs {
    fn limits(&self) -> ExactLimits {
        ExactLimits {
            max_driving_edges: self.max_driving_edges,
            path_cap: self.path_cap,
            max_nodes: self.max_nodes,
            forbid_outside: self.no_outside,
        }
    }
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    /// Instance file; stdin when omitted or `-`.
    #[arg(default_value = "-")]
    pub instance: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    #[arg(long)]
    pub flow_out: Option<PathBuf>,
    #[arg(long)]
    pub metrics_out: Option<PathBuf>,
    /// Heuristic iteration trace.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Heuristic wall-clock budget.
    #[arg(long, default_value_t = 60.0)]
    pub budget_secs: f64,
    #[arg(long, default_value_t = 10_000)]
    pub iter_cap: usize,
    #[arg(long, value_enum, default_value_t = SelectionArg::MaxRegret)]
    pub selection: SelectionArg,
    #[arg(long, default_value_t = 64)]
    pub cycle_window: usize,
    #[arg(long, default_value_t = 50)]
    pub restarts: usize,
    #[command(flatten)]
    pub limits: LimitArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum SatModeArg {
    Dtc,
    Fixed,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProfileModeArg {
    Fdt,
    Dtc,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("source").required(true).args(["example", "sat", "random", "csv", "from"])))]
pub struct GenArgs {
    /// fig1, fig4, fig6, fig7[:delay_secs], fig9[:eps], fig10.
    #[arg(long)]
    pub example: Option<String>,
    /// DIMACS CNF file for the hardness gadget.
    #[arg(long)]
    pub sat: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = SatModeArg::Dtc)]
    pub mode: SatModeArg,
    /// Seed of a small random instance.
    #[arg(long)]
    pub random: Option<u64>,
    /// Random instances with departure windows where β = 0.
    #[arg(long)]
    pub random_dtc: bool,
    /// Directory with trips.csv, demand.csv and optionally stations.csv.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// CSV import: departure window as `lo,hi` seconds.
    #[arg(long, default_value = "0,0")]
    pub csv_window: String,
    /// CSV import: outside-option cost.
    #[arg(long, default_value = "100000")]
    pub csv_outside_cost: String,
    /// Reshape an existing instance file.
    #[arg(long)]
    pub from: Option<PathBuf>,
    /// Multiply every demand by this rational.
    #[arg(long)]
    pub scale: Option<String>,
    /// CSV with columns `hour,share` (24 rows) splitting demand over the day.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    #[arg(long, default_value_t = 600)]
    pub slot: Time,
    #[arg(long, value_enum, default_value_t = ProfileModeArg::Fdt)]
    pub profile_mode: ProfileModeArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read_input(path: &Path) -> Result<String> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s).context("reading stdin")?;
        Ok(s)
    } else {
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
    }
}

fn load(path: &Path) -> Result<(Instance, ExtendedGraph)> {
    let inst = format::load_instance(&read_input(path)?).with_context(|| format!("loading {}", path.display()))?;
    let xg = inst.network().map_err(|e| anyhow!("{e}"))?;
    Ok((inst, xg))
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => print_stdout(text),
    }
}

/// Writes to stdout; a closed pipe (`| head`) is not an error.
fn print_stdout(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn parse_rational(s: &str, what: &str) -> Result<Rational> {
    rational::parse(s).ok_or_else(|| anyhow!("invalid {what} `{s}`"))
}

/// Metrics, warning on stderr when some volume has no finite factor.
fn evaluate(xg: &ExtendedGraph, f: &Flow) -> MetricsReport {
    let m = metrics_par(xg, f);
    if m.infinite_volume > rational::zero() {
        eprintln!("warning: volume {} has a zero-cost best alternative and is left out of mean_rho", m.infinite_volume);
    }
    m
}

/// Result of one solver run, before reporting.
pub struct SolveRun {
    pub outcome: Outcome,
    pub flow: Option<Flow>,
    pub heuristic: Option<HeuristicResult>,
    pub seed: u64,
}

pub fn heuristic_config(args: &SolveArgs) -> HeuristicConfig {
    HeuristicConfig {
        iteration_cap: args.iter_cap,
        selection: match args.selection {
            SelectionArg::MaxRegret => Selection::MaxRegret,
            SelectionArg::Random => Selection::Random,
        },
        seed: args.seed,
        cycle_window: args.cycle_window,
        restarts: args.restarts,
        ..HeuristicConfig::default()
    }
}

fn classify(xg: &ExtendedGraph, f: &Flow) -> Outcome {
    if verify_equilibrium(xg, f).is_equilibrium() {
        Outcome::Equilibrium
    } else {
        Outcome::BestEffort
    }
}

pub fn run_solver(inst: &Instance, xg: &ExtendedGraph, args: &SolveArgs) -> Result<SolveRun> {
    let plain = |f: Flow| SolveRun { outcome: classify(xg, &f), flow: Some(f), heuristic: None, seed: args.seed };
    Ok(match args.method {
        Method::Single => {
            let f = if xg.num_commodities() == 1 {
                solve_single(xg).map_err(|e| anyhow!("{e}"))?.flow
            } else {
                solve_common_destination(inst).map_err(|e| anyhow!("{e}"))?
            };
            plain(f)
        }
        Method::Exact => match solve_exact(xg, &args.limits.limits()) {
            ExactOutcome::Equilibrium(sol) => plain(sol.flow),
            ExactOutcome::NoEquilibrium { nodes } => {
                eprintln!("exact: no equilibrium after {nodes} search nodes");
                SolveRun { outcome: Outcome::NoEquilibrium, flow: None, heuristic: None, seed: args.seed }
            }
            ExactOutcome::ResourceLimit(limit) => {
                eprintln!("exact: {limit}");
                SolveRun { outcome: Outcome::ResourceLimit, flow: None, heuristic: None, seed: args.seed }
            }
        },
        Method::Heuristic => {
            let start = Instant::now();
            let budget = Duration::try_from_secs_f64(args.budget_secs.max(0.0)).unwrap_or(Duration::MAX);
            let result = solve_heuristic(xg, &heuristic_config(args), &mut |_| start.elapsed() >= budget);
            eprintln!(
                "heuristic: {} iterations, {} compressed cycles, {} vanishing cycles, {} restarts",
                result.trace.len(),
                result.compressed_steps,
                result.vanishing_cycles,
                result.restarts
            );
            SolveRun { outcome: classify(xg, &result.flow), flow: Some(result.flow.clone()), seed: result.seed, heuristic: Some(result) }
        }
        Method::Sysopt => plain(solve_system_optimum(xg).flow),
    })
}

fn solve(args: &SolveArgs) -> Result<Outcome> {
    let start = Instant::now();
    let (inst, xg) = load(&args.instance)?;
    let run = run_solver(&inst, &xg, args)?;
    let metrics = run.flow.as_ref().map(|f| evaluate(&xg, f));
    if let (Some(path), Some(f)) = (&args.flow_out, &run.flow) {
        std::fs::write(path, flowfile::serialize(&xg, f)).with_context(|| format!("writing {}", path.display()))?;
    }
    if let (Some(path), Some(m)) = (&args.metrics_out, &metrics) {
        let file = std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_metrics_csv(&xg, m, file)?;
    }
    if let (Some(path), Some(h)) = (&args.trace_out, &run.heuristic) {
        let file = std::fs::File::create(path).with_context(|| format!("writing {}", path.display()))?;
        write_trace_csv(&xg, &h.trace, file)?;
    }
    let solver = format!("{:?}", args.method).to_lowercase();
    let verdict = Verdict { outcome: run.outcome, metrics, solver, seed: run.seed, wall: start.elapsed() };
    println!("{verdict}");
    eprintln!("solver={} wall_ms={}", verdict.solver, verdict.wall.as_millis());
    Ok(run.outcome)
}

fn verify(instance: &Path, flow: &Path) -> Result<Outcome> {
    let start = Instant::now();
    let (_, xg) = load(instance)?;
    let f = flowfile::parse(&xg, &read_input(flow)?).with_context(|| format!("loading {}", flow.display()))?;
    if !f.is_feasible(&xg) {
        bail!("flow is not feasible: demands must be met exactly and capacities respected");
    }
    let check = verify_equilibrium(&xg, &f);
    let (qvi, bs) = (verify_qvi(&xg, &f), verify_bs(&xg, &f));
    eprintln!("definition={} qvi={qvi} bs={bs}", check.is_equilibrium());
    if let EquilibriumCheck::Violated { first, count } = &check {
        eprintln!("{count} violation(s); first: {first:?}");
    }
    let outcome = classify(&xg, &f);
    let verdict = Verdict { outcome, metrics: Some(evaluate(&xg, &f)), solver: "verify".into(), seed: 0, wall: start.elapsed() };
    println!("{verdict}");
    Ok(outcome)
}

fn read_profile(path: &Path) -> Result<Vec<Rational>> {
    #[derive(serde::Deserialize)]
    struct Row {
        hour: usize,
        share: String,
    }
    let mut shares = vec![None; 24];
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).comment(Some(b'#')).from_path(path)?;
    for row in r.deserialize::<Row>() {
        let row = row?;
        let slot = shares.get_mut(row.hour).ok_or_else(|| anyhow!("hour {} out of range", row.hour))?;
        *slot = Some(parse_rational(&row.share, "share")?);
    }
    shares.into_iter().enumerate().map(|(h, s)| s.ok_or_else(|| anyhow!("hour {h} missing"))).collect()
}

fn generate(args: &GenArgs) -> Result<()> {
    let mut file = if let Some(name) = &args.example {
        InstanceFile::from_instance(&gen_example(&Example::parse(name).map_err(|e| anyhow!("{e}"))?))
    } else if let Some(path) = &args.sat {
        let formula = CnfFormula::parse_dimacs(&read_input(path)?).map_err(|e| anyhow!("{e}"))?;
        let mode = match args.mode {
            SatModeArg::Dtc => SatMode::DepartureTimeChoice,
            SatModeArg::Fixed => SatMode::Fixed,
        };
        InstanceFile::from_instance(&gen_sat(&formula, mode).map_err(|e| anyhow!("{e}"))?.instance)
    } else if let Some(seed) = args.random {
        let cfg = if args.random_dtc {
            RandomConfig { fixed_departure: false, betas: vec![rational::zero(), rational::one()], ..RandomConfig::default() }
        } else {
            RandomConfig::default()
        };
        InstanceFile::from_instance(&gen_random(&cfg, seed))
    } else if let Some(dir) = &args.csv {
        let (lo, hi) = args.csv_window.split_once(',').ok_or_else(|| anyhow!("--csv-window expects `lo,hi`"))?;
        let opts = ImportOptions {
            window: [lo.trim().parse()?, hi.trim().parse()?],
            outside_cost: parse_rational(&args.csv_outside_cost, "outside cost")?,
        };
        import_dir(dir, &opts)?
    } else if let Some(path) = &args.from {
        format::parse(&read_input(path)?)?
    } else {
        unreachable!("clap enforces one source")
    };
    if args.scale.is_some() || args.profile.is_some() {
        let mut inst = file.to_instance()?;
        if let Some(q) = &args.scale {
            inst = scale_demand(&inst, &parse_rational(q, "scale factor")?).map_err(|e| anyhow!("{e}"))?;
        }
        if let Some(p) = &args.profile {
            let mode = match args.profile_mode {
                ProfileModeArg::Fdt => ProfileMode::FixedDeparture,
                ProfileModeArg::Dtc => ProfileMode::DepartureTimeChoice,
            };
            inst = apply_demand_profile(&inst, &read_profile(p)?, args.slot, mode).map_err(|e| anyhow!("{e}"))?;
        }
        file = InstanceFile::from_instance(&inst);
    }
    write_output(args.out.as_deref(), &format::serialize(&file))
}

fn build(path: &Path) -> Result<()> {
    use std::fmt::Write;
    let (inst, xg) = load(path)?;
    let g = xg.base();
    let mut s = String::new();
    writeln!(s, "stations {}", inst.stations.len())?;
    writeln!(s, "trips {}", inst.trips.len())?;
    writeln!(s, "commodities {}", inst.commodities.len())?;
    writeln!(s, "total_demand {}", inst.total_demand())?;
    writeln!(s, "nodes {}", g.num_nodes())?;
    writeln!(s, "edges {}", g.num_edges())?;
    for kind in [EdgeKind::Waiting, EdgeKind::Boarding, EdgeKind::Driving, EdgeKind::Alighting, EdgeKind::Dwelling] {
        writeln!(s, "edges.{} {}", format!("{kind:?}").to_lowercase(), g.count_edges(kind))?;
    }
    writeln!(s, "big_m {}", xg.big_m())?;
    print_stdout(&s)
}

fn unroll(path: &Path, out: Option<&Path>) -> Result<()> {
    let mut file = format::parse(&read_input(path)?)?;
    file.validate()?;
    file.trips = file.concrete_trips()?.iter().map(format::trip_spec).collect();
    file.periodic = None;
    write_output(out, &format::serialize(&file))
}

fn pos(path: &Path, limits: &LimitArgs) -> Result<Outcome> {
    let (_, xg) = load(path)?;
    match price_of_stability(&xg, &limits.limits()) {
        Ok(PriceOfStability::Ratio(q)) => {
            println!("POS ratio={q}");
            Ok(Outcome::Equilibrium)
        }
        Ok(PriceOfStability::Unbounded) => {
            println!("POS ratio=inf");
            Ok(Outcome::Equilibrium)
        }
        Ok(PriceOfStability::NoEquilibrium) => {
            println!("POS outcome=no-equilibrium");
            Ok(Outcome::NoEquilibrium)
        }
        Err(limit) => {
            eprintln!("{limit}");
            println!("POS outcome=resource-limit");
            Ok(Outcome::ResourceLimit)
        }
    }
}

/// Runs a parsed command; the value is the process exit code.
pub fn run(cli: Cli) -> Result<u8> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global().context("configuring the worker pool")?;
    }
    let outcome = match &cli.command {
        Command::Build { instance } => build(instance).map(|_| Outcome::Equilibrium),
        Command::Solve(args) => solve(args),
        Command::Verify { instance, flow } => verify(instance, flow),
        Command::Metrics { instance, flow, out } => (|| {
            let (_, xg) = load(instance)?;
            let f = flowfile::parse(&xg, &read_input(flow)?)?;
            let m = evaluate(&xg, &f);
            let mut buf = Vec::new();
            write_metrics_csv(&xg, &m, &mut buf)?;
            write_output(out.as_deref(), &String::from_utf8(buf)?)?;
            Ok(Outcome::Equilibrium)
        })(),
        Command::Gen(args) => generate(args).map(|_| Outcome::Equilibrium),
        Command::Unroll { instance, out } => unroll(instance, out.as_deref()).map(|_| Outcome::Equilibrium),
        Command::Pos { instance, limits } => pos(instance, limits),
    }?;
    Ok(outcome.exit_code())
}
