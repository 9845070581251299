use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_transit-eq");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn verdict(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).lines().find(|l| l.starts_with("VERDICT")).unwrap_or_default().to_string()
}

fn example(dir: &Path, name: &str) -> String {
    let path = dir.join(format!("{}.json", name.replace(':', "_")));
    let out = run(&["gen", "--example", name, "--out", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path.to_str().unwrap().to_string()
}

#[test]
fn no_equilibrium_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let inst = example(dir.path(), "fig4");
    let out = run(&["solve", &inst, "--method", "exact"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(verdict(&out).contains("outcome=no-equilibrium"));
}

fn run_stdin(args: &[&str], input: &[u8]) -> Output {
    use std::io::Write;
    use std::process::Stdio;
    let mut child = Command::new(BIN).args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped()).spawn().unwrap();
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn piped_generation_and_solve() {
    let fig4 = run(&["gen", "--example", "fig4"]).stdout;
    let out = run_stdin(&["solve", "--method", "exact"], &fig4);
    assert_eq!(out.status.code(), Some(2));
    let fig1 = run(&["gen", "--example", "fig1"]).stdout;
    let out = run_stdin(&["solve", "--method", "single"], &fig1);
    assert_eq!(out.status.code(), Some(0));
    assert!(verdict(&out).contains("s_r0=1 "));
}

#[test]
fn resource_limit_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let inst = example(dir.path(), "fig6");
    let out = run(&["solve", &inst, "--method", "exact", "--max-driving-edges", "1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn single_commodity_solve_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let inst = example(dir.path(), "fig1");
    let flow = dir.path().join("flow.json");
    let out = run(&["solve", &inst, "--method", "single", "--flow-out", flow.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(verdict(&out).contains("outcome=equilibrium"));
    assert!(verdict(&out).contains("s_r0=1 "));
    let out = run(&["verify", &inst, flow.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(verdict(&out).contains("outcome=equilibrium"));
    assert!(String::from_utf8_lossy(&out.stderr).contains("definition=true qvi=true bs=true"));
}

#[test]
fn heuristic_on_cycling_example() {
    let dir = tempfile::tempdir().unwrap();
    let inst = example(dir.path(), "fig10");
    let trace = dir.path().join("trace.csv");
    let out = run(&["solve", &inst, "--method", "heuristic", "--budget-secs", "5", "--trace-out", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(verdict(&out).contains("outcome=equilibrium"));
    let text = std::fs::read_to_string(trace).unwrap();
    assert!(text.starts_with("iter,selected_commodity,regret,lambda,mean_rho,p99_rho,social_cost"));
}

#[test]
fn seeded_runs_repeat() {
    let dir = tempfile::tempdir().unwrap();
    let inst = example(dir.path(), "fig9");
    let args = ["solve", &inst, "--method", "heuristic", "--selection", "random", "--seed", "11"];
    let (a, b) = (run(&args), run(&args));
    assert_eq!(a.stdout, b.stdout);
    assert!(verdict(&a).ends_with("seed=11"));
}

#[test]
fn verify_rejects_infeasible_flow() {
    let dir = tempfile::tempdir().unwrap();
    let inst = example(dir.path(), "fig1");
    let flow = dir.path().join("flow.json");
    std::fs::write(&flow, r#"{"version": 1, "entries": [{"commodity": "a-c", "path": "outside", "volume": "1"}]}"#).unwrap();
    let out = run(&["verify", &inst, flow.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not feasible"));
}

#[test]
fn best_effort_flow_verifies_with_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let inst = example(dir.path(), "fig1");
    let flow = dir.path().join("flow.json");
    std::fs::write(&flow, r#"{"version": 1, "entries": [{"commodity": "a-c", "path": "outside", "volume": "2"}]}"#).unwrap();
    let out = run(&["verify", &inst, flow.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(verdict(&out).contains("outcome=best-effort"));
    let csv = dir.path().join("m.csv");
    let out = run(&["metrics", &inst, flow.to_str().unwrap(), "--out", csv.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(std::fs::read_to_string(csv).unwrap().contains("a-c,outside,2,100000,12600,87400,500/63"));
}

#[test]
fn stdin_instance_and_build_counts() {
    let gen = run(&["gen", "--example", "fig1"]);
    let out = run_stdin(&["build", "-"], &gen.stdout);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("nodes 16\n"));
    assert!(text.contains("edges.driving 4\n"));
}

#[test]
fn system_optimum_and_price_of_stability() {
    let dir = tempfile::tempdir().unwrap();
    let inst = example(dir.path(), "fig7");
    let out = run(&["solve", &inst, "--method", "sysopt"]);
    assert!(verdict(&out).contains("social_cost=9 "));
    let out = run(&["pos", &inst]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("POS ratio="));
}

#[test]
fn gen_sources_and_transforms() {
    let dir = tempfile::tempdir().unwrap();
    let cnf = dir.path().join("f.cnf");
    std::fs::write(&cnf, "p cnf 2 2\n1 2 0\n-1 0\n").unwrap();
    for mode in ["dtc", "fixed"] {
        let out = run(&["gen", "--sat", cnf.to_str().unwrap(), "--mode", mode]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let a = run(&["gen", "--random", "5"]);
    assert_eq!(a.stdout, run(&["gen", "--random", "5"]).stdout);
    let inst = example(dir.path(), "fig1");
    let out = run(&["gen", "--from", &inst, "--scale", "1/2"]);
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"demand\": \"1\""));
    let shares = concat!(env!("CARGO_MANIFEST_DIR"), "/data/hourly_shares.csv");
    let out = run(&["gen", "--from", &inst, "--profile", shares, "--slot", "1800", "--profile-mode", "dtc"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["gen", "--example", "fig1", "--random", "1"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn csv_directory_import() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("trips.csv"), "trip_id,seq,station,arr_sec,dep_sec,capacity\nz,0,a,,0,1\nz,1,b,600,,1\n").unwrap();
    std::fs::write(dir.path().join("demand.csv"), "origin,destination,volume\na,b,2\n").unwrap();
    let out_path = dir.path().join("inst.json");
    let out = run(&["gen", "--csv", dir.path().to_str().unwrap(), "--csv-outside-cost", "5000", "--out", out_path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["solve", out_path.to_str().unwrap(), "--method", "single"]);
    assert!(verdict(&out).contains("outcome=equilibrium"), "{}", verdict(&out));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["solve"]).status.code(), Some(1));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}
