//! Metrics and trace CSV, the verdict line, and parallel metric evaluation.

use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use transit_eq_core::flow::{metric_row, summarize, Flow, MetricsReport, Strategy};
use transit_eq_core::network::ExtendedGraph;
use transit_eq_core::solver_heuristic::TraceRow;

/// Metrics with the per-path best alternatives evaluated on the rayon pool.
pub fn metrics_par(xg: &ExtendedGraph, f: &Flow) -> MetricsReport {
    let used: Vec<_> = f.used().collect();
    let rows = used.par_iter().map(|(i, s, v)| metric_row(xg, f, *i, s, v)).collect();
    summarize(rows)
}

pub fn path_id(s: &Strategy) -> String {
    match s {
        Strategy::Outside => "outside".into(),
        Strategy::Path(p) => p.edges().iter().map(|e| e.to_string()).collect::<Vec<_>>().join("-"),
    }
}

/// One row per used strategy, then a summary header and row.
pub fn write_metrics_csv(xg: &ExtendedGraph, m: &MetricsReport, out: impl Write) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().flexible(true).from_writer(out);
    w.write_record(["commodity", "path_id", "volume", "cost", "best_alt_cost", "regret", "approx_factor"])?;
    for r in &m.rows {
        w.write_record([
            xg.commodity(r.commodity).id.clone(),
            path_id(&r.strategy),
            r.volume.to_string(),
            r.cost.to_string(),
            r.best_alt_cost.to_string(),
            r.regret.to_string(),
            r.factor.to_string(),
        ])?;
    }
    w.write_record(["mean_rho", "p99_rho", "share_zero_regret", "social_cost"])?;
    w.write_record([m.mean_rho.to_string(), m.p99_rho.to_string(), m.share_zero_regret.to_string(), m.social_cost.to_string()])?;
    w.flush()?;
    Ok(())
}

pub fn write_trace_csv(xg: &ExtendedGraph, trace: &[TraceRow], out: impl Write) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["iter", "selected_commodity", "regret", "lambda", "mean_rho", "p99_rho", "social_cost"])?;
    for t in trace {
        w.write_record([
            t.iter.to_string(),
            t.selected_commodity.map_or_else(|| "cycle".into(), |i| xg.commodity(i).id.clone()),
            t.regret.to_string(),
            t.lambda.to_string(),
            t.mean_rho.to_string(),
            t.p99_rho.to_string(),
            t.social_cost.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Equilibrium,
    BestEffort,
    NoEquilibrium,
    ResourceLimit,
}

impl Outcome {
    pub fn exit_code(self) -> u8 {
        match self {
            Outcome::Equilibrium | Outcome::BestEffort => 0,
            Outcome::NoEquilibrium => 2,
            Outcome::ResourceLimit => 3,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Outcome::Equilibrium => "equilibrium",
            Outcome::BestEffort => "best-effort",
            Outcome::NoEquilibrium => "no-equilibrium",
            Outcome::ResourceLimit => "resource-limit",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Verdict {
    pub outcome: Outcome,
    pub metrics: Option<MetricsReport>,
    pub solver: String,
    pub seed: u64,
    pub wall: std::time::Duration,
}

impl fmt::Display for Verdict {
    /// The machine-readable line; solver and wall-clock go to stderr so
    /// that seeded runs print identical lines.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let field = |g: &dyn Fn(&MetricsReport) -> String| self.metrics.as_ref().map_or_else(|| "-".into(), g);
        write!(
            f,
            "VERDICT outcome={} mean_rho={} p99_rho={} s_r0={} social_cost={} seed={}",
            self.outcome,
            field(&|m| m.mean_rho.to_string()),
            field(&|m| m.p99_rho.to_string()),
            field(&|m| m.share_zero_regret.to_string()),
            field(&|m| m.social_cost.to_string()),
            self.seed
        )
    }
}
