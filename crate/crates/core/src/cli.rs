//! Command-line front end.
//!
//! Every command reads a scenario file and writes its results into an output
//! directory. Files contain no timestamps or timings, so reruns on the same
//! input are byte-identical.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::admm::run_admm;
use crate::centralized::{solve, solve_op_b, ProblemMode};
use crate::error::{Error, Result};
use crate::model::{BehavioralModel, SolveReport, TransportNetwork};
use crate::scenario::{load_scenario, write_sweep_csv, write_trace_csv, write_trace_records, ScenarioFile};
use crate::sweep::{
    linspace, sweep_gamma, sweep_tau, SweepOutcome, DEFAULT_GAMMA_RANGE, DEFAULT_STEPS, DEFAULT_TAU_RANGE,
};
use crate::waterfill::waterfill_allocate;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_PARSE: i32 = 3;
pub const EXIT_PRECONDITION: i32 = 4;
pub const EXIT_INFEASIBLE: i32 = 5;
pub const EXIT_NON_CONVERGENCE: i32 = 6;
pub const EXIT_IO: i32 = 7;
pub const EXIT_OTHER: i32 = 8;

#[derive(Debug, Parser)]
#[command(
    name = "secalloc",
    version,
    about = "Security resource allocation with probability-weighting planners"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve a scenario with the centralized projected-gradient solver.
    Solve {
        #[command(flatten)]
        io: IoArgs,
        /// Problem to solve; defaults to the scenario's solver.mode.
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        #[command(flatten)]
        overrides: ModelOverrides,
    },
    /// Analytical water-filling report for a complete network.
    Waterfill {
        #[command(flatten)]
        io: IoArgs,
        /// Override the scenario's gamma.
        #[arg(long)]
        gamma: Option<f64>,
    },
    /// Solve the weighted problem with distributed ADMM and compare against the centralized solver.
    Admm {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        overrides: ModelOverrides,
        /// Penalty parameter.
        #[arg(long)]
        eta: Option<f64>,
        /// Primal residual tolerance.
        #[arg(long)]
        primal_tol: Option<f64>,
        /// Consensus movement tolerance.
        #[arg(long)]
        dual_tol: Option<f64>,
        /// Iteration cap.
        #[arg(long)]
        max_iter: Option<usize>,
    },
    /// Solve the loss-only problem over a grid of gamma values.
    SweepGamma {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Solve the weighted problem over a grid of tau values at fixed gamma.
    SweepTau {
        #[command(flatten)]
        io: IoArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Override the scenario's gamma.
        #[arg(long)]
        gamma: Option<f64>,
    },
}

#[derive(Debug, Args)]
pub struct IoArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub scenario: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ModelOverrides {
    /// Override the scenario's gamma.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Set tau on every source.
    #[arg(long)]
    pub tau: Option<f64>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// First grid point; defaults to the axis' standard range.
    #[arg(long)]
    pub start: Option<f64>,
    /// Last grid point.
    #[arg(long)]
    pub stop: Option<f64>,
    /// Number of grid points.
    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    OpA,
    OpB,
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli.command) {
        Ok(summary) => {
            print!("{summary}");
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parse(_) => EXIT_PARSE,
        Error::Precondition(_) => EXIT_PRECONDITION,
        Error::Infeasible(_) => EXIT_INFEASIBLE,
        Error::NonConvergence { .. } => EXIT_NON_CONVERGENCE,
        Error::Io { .. } => EXIT_IO,
        _ => EXIT_OTHER,
    }
}

/// Runs a command and returns the summary printed on success.
pub fn execute(command: &Command) -> Result<String> {
    match command {
        Command::Solve { io, mode, overrides } => cmd_solve(io, *mode, overrides),
        Command::Waterfill { io, gamma } => cmd_waterfill(io, *gamma),
        Command::Admm {
            io,
            overrides,
            eta,
            primal_tol,
            dual_tol,
            max_iter,
        } => {
            let mut s = load(io, overrides)?;
            let a = &mut s.admm;
            a.eta = eta.unwrap_or(a.eta);
            a.primal_tolerance = primal_tol.unwrap_or(a.primal_tolerance);
            a.dual_tolerance = dual_tol.unwrap_or(a.dual_tolerance);
            a.max_iterations = max_iter.unwrap_or(a.max_iterations);
            cmd_admm(&s, &io.output)
        }
        Command::SweepGamma { io, grid } => {
            let s = load(io, &ModelOverrides { gamma: None, tau: None })?;
            let grid = grid_points(grid, DEFAULT_GAMMA_RANGE)?;
            let out = sweep_gamma(&s.network, &grid, &s.centralized);
            finish_sweep(out, &io.output, "sweep_gamma.csv", grid.len())
        }
        Command::SweepTau { io, grid, gamma } => {
            let s = load(
                io,
                &ModelOverrides {
                    gamma: *gamma,
                    tau: None,
                },
            )?;
            let grid = grid_points(grid, DEFAULT_TAU_RANGE)?;
            let out = sweep_tau(&s.network, &s.behavior, &grid, &s.centralized);
            finish_sweep(out, &io.output, "sweep_tau.csv", grid.len())
        }
    }
}

fn load(io: &IoArgs, overrides: &ModelOverrides) -> Result<ScenarioFile> {
    let mut s = load_scenario(&io.scenario)?;
    if let Some(g) = overrides.gamma {
        s.behavior = BehavioralModel::new(g)?;
    }
    if let Some(t) = overrides.tau {
        s.network = s.network.with_uniform_tau(t)?;
    }
    Ok(s)
}

fn grid_points(grid: &GridArgs, (lo, hi): (f64, f64)) -> Result<Vec<f64>> {
    linspace(grid.start.unwrap_or(lo), grid.stop.unwrap_or(hi), grid.steps)
}

fn output_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

fn cmd_solve(io: &IoArgs, mode: Option<Mode>, overrides: &ModelOverrides) -> Result<String> {
    let s = load(io, overrides)?;
    let mode = match mode {
        Some(Mode::OpA) => ProblemMode::OpA,
        Some(Mode::OpB) => ProblemMode::OpB,
        None => s.mode,
    };
    output_dir(&io.output)?;
    let report = solve(&s.network, &s.behavior, &s.centralized, mode).inspect_err(|e| dump_trace(e, &io.output))?;
    write_trace_csv(&report, &io.output.join("trace.csv"))?;
    write_plan(&s.network, &report, &io.output)?;
    let mut text = String::new();
    let _ = writeln!(text, "solver: centralized {}", mode_name(mode));
    let _ = writeln!(text, "gamma: {}", s.behavior.gamma());
    let _ = writeln!(text, "iterations: {}", report.iterations);
    text.push_str(&losses(&report));
    text.push_str(&tables(&s.network, &report));
    write(&io.output, "report.txt", &text)?;
    Ok(text)
}

fn cmd_admm(s: &ScenarioFile, dir: &Path) -> Result<String> {
    output_dir(dir)?;
    let report = run_admm(&s.network, &s.behavior, &s.admm).inspect_err(|e| dump_trace(e, dir))?;
    write_trace_csv(&report, &dir.join("trace.csv"))?;
    write_plan(&s.network, &report, dir)?;
    let central = solve_op_b(&s.network, &s.behavior, &s.centralized)?;
    let c = central.objective();
    let gap = (report.objective() - c).abs() / c.abs().max(f64::MIN_POSITIVE);

    let mut text = String::new();
    let _ = writeln!(text, "solver: admm");
    let _ = writeln!(text, "gamma: {}", s.behavior.gamma());
    let _ = writeln!(text, "eta: {}", s.admm.eta);
    let _ = writeln!(text, "iterations: {}", report.iterations);
    let final_residual = report.residual_trace.last().map_or(0.0, |r| r.primal_residual);
    let _ = writeln!(text, "final_primal_residual: {final_residual:.3e}");
    text.push_str(&losses(&report));
    let _ = writeln!(text, "centralized_objective: {c:.9}");
    let _ = writeln!(text, "relative_gap: {gap:.3e}");
    text.push_str(&tables(&s.network, &report));
    write(dir, "report.txt", &text)?;
    Ok(text)
}

fn cmd_waterfill(io: &IoArgs, gamma: Option<f64>) -> Result<String> {
    let s = load(io, &ModelOverrides { gamma, tau: None })?;
    let net = &s.network;
    let trace = waterfill_allocate(net, &s.behavior)?;
    output_dir(&io.output)?;
    let id = |x: usize| net.targets()[x].id.as_str();

    let mut thresholds = String::from("target_i,target_j,threshold\n");
    for (&(i, j), v) in &trace.thresholds.entries {
        let _ = writeln!(thresholds, "{},{},{v:.12}", id(i), id(j));
    }
    write(&io.output, "thresholds.csv", &thresholds)?;

    let mut breakpoints = String::from("rank,target,budget\n");
    for (rank, (&x, b)) in trace.activation_order.iter().zip(&trace.breakpoints).enumerate() {
        let _ = writeln!(breakpoints, "{},{},{b:.12}", rank + 1, id(x));
    }
    write(&io.output, "breakpoints.csv", &breakpoints)?;

    let mut aggregates = String::from("target,aggregate\n");
    for (x, a) in trace.final_aggregates.iter().enumerate() {
        let _ = writeln!(aggregates, "{},{a:.12}", id(x));
    }
    write(&io.output, "aggregates.csv", &aggregates)?;
    write(&io.output, "plan.csv", &plan_csv(net, trace.per_source_plan.amounts()))?;

    let mut text = String::new();
    let _ = writeln!(text, "solver: water-filling");
    let _ = writeln!(text, "gamma: {}", s.behavior.gamma());
    let _ = writeln!(text, "budget: {}", net.total_supply());
    let _ = writeln!(text, "water_level: {:.9e}", trace.water_level);
    let funded = trace.final_aggregates.iter().filter(|&&a| a > 0.0).count();
    let _ = writeln!(text, "funded_targets: {funded}");
    text.push_str("\nactivation breakpoints (budget at which each target starts receiving)\n");
    for (&x, b) in trace.activation_order.iter().zip(&trace.breakpoints) {
        let _ = writeln!(text, "  {:<12} {b:>14.9}", id(x));
    }
    text.push_str("\naggregates\n");
    for (x, a) in trace.final_aggregates.iter().enumerate() {
        let _ = writeln!(text, "  {:<12} {a:>14.9}", id(x));
    }
    write(&io.output, "report.txt", &text)?;
    Ok(text)
}

fn finish_sweep(out: SweepOutcome, dir: &Path, name: &str, points: usize) -> Result<String> {
    output_dir(dir)?;
    let path = dir.join(name);
    write_sweep_csv(&out.result, &path)?;
    let rows = out.result.samples.len();
    if let Some((at, e)) = out.failure {
        eprintln!(
            "partial output: {rows} of {points} rows written to {} before the failure at {}={at}",
            path.display(),
            out.result.axis.name()
        );
        return Err(e);
    }
    Ok(format!("{rows} rows written to {}\n", path.display()))
}

fn dump_trace(err: &Error, dir: &Path) {
    if let Error::NonConvergence { trace, .. } = err {
        let path = dir.join("trace.csv");
        if write_trace_records(trace, &path).is_ok() {
            eprintln!("trace of the failed run written to {}", path.display());
        }
    }
}

fn mode_name(mode: ProblemMode) -> &'static str {
    match mode {
        ProblemMode::OpA => "op_a",
        ProblemMode::OpB => "op_b",
    }
}

fn losses(report: &SolveReport) -> String {
    format!(
        "converged: {}\ntrue_loss: {:.9}\nperceived_loss: {:.9}\nsource_utility: {:.9}\nobjective: {:.9}\n",
        report.converged,
        report.true_loss,
        report.perceived_loss,
        report.source_utility,
        report.objective()
    )
}

fn tables(net: &TransportNetwork, report: &SolveReport) -> String {
    let mut text = String::from("\naggregates\n");
    for (t, a) in net.targets().iter().zip(report.plan.target_aggregates(net)) {
        let _ = writeln!(text, "  {:<12} {a:>14.9}", t.id);
    }
    text.push_str("\nplan\n");
    for (e, a) in net.edges().iter().zip(report.plan.amounts()) {
        let _ = writeln!(
            text,
            "  {:<12} {:<12} {a:>14.9}",
            net.targets()[e.target].id,
            net.sources()[e.source].id
        );
    }
    text
}

fn plan_csv(net: &TransportNetwork, amounts: &[f64]) -> String {
    let mut out = String::from("target,source,amount\n");
    for (e, a) in net.edges().iter().zip(amounts) {
        let _ = writeln!(
            out,
            "{},{},{a:.12}",
            net.targets()[e.target].id,
            net.sources()[e.source].id
        );
    }
    out
}

fn write_plan(net: &TransportNetwork, report: &SolveReport, dir: &Path) -> Result<()> {
    write(dir, "plan.csv", &plan_csv(net, report.plan.amounts()))?;
    let mut aggregates = String::from("target,aggregate\n");
    for (t, a) in net.targets().iter().zip(report.plan.target_aggregates(net)) {
        let _ = writeln!(aggregates, "{},{a:.12}", t.id);
    }
    write(dir, "aggregates.csv", &aggregates)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct() {
        let codes = [
            EXIT_OK,
            EXIT_USAGE,
            EXIT_PARSE,
            EXIT_PRECONDITION,
            EXIT_INFEASIBLE,
            EXIT_NON_CONVERGENCE,
            EXIT_IO,
            EXIT_OTHER,
        ];
        let set: std::collections::BTreeSet<_> = codes.iter().collect();
        assert_eq!(set.len(), codes.len());
    }

    #[test]
    fn unknown_flag_is_a_usage_error() {
        assert_eq!(run(["secalloc", "solve", "--bogus"]), EXIT_USAGE);
        assert_eq!(run(["secalloc", "frobnicate"]), EXIT_USAGE);
    }

    #[test]
    fn help_lists_flags() {
        use clap::CommandFactory;
        let mut cmd = Cli::command();
        let help = cmd.find_subcommand_mut("admm").unwrap().render_long_help().to_string();
        for flag in [
            "--scenario",
            "--output",
            "--eta",
            "--primal-tol",
            "--dual-tol",
            "--max-iter",
            "--gamma",
            "--tau",
        ] {
            assert!(help.contains(flag), "{flag} missing from help");
        }
        Cli::command().debug_assert();
    }

    #[test]
    fn missing_scenario_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        let code = run([
            "secalloc",
            "solve",
            "--scenario",
            "/nonexistent/case.toml",
            "--output",
            out,
        ]);
        assert_eq!(code, EXIT_IO);
    }
}
