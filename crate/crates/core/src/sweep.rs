//! Parameter sweeps over `γ` and `τ`.
//!
//! Grid points are solved independently on the rayon pool and collected in
//! grid order. A failed point truncates the result at that point.

use rayon::prelude::*;

use crate::centralized::{solve_op_a, solve_op_b, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{BehavioralModel, SolveReport, TransportNetwork};
use crate::scenario::{SweepAxis, SweepResult, SweepSample};

/// Aggregates above this count as funded.
pub const ACTIVE_THRESHOLD: f64 = 1e-6;

pub const DEFAULT_STEPS: usize = 25;
pub const DEFAULT_GAMMA_RANGE: (f64, f64) = (0.3, 1.0);
pub const DEFAULT_TAU_RANGE: (f64, f64) = (0.0, 1.0);

/// Evenly spaced grid whose last point is exactly `stop`.
pub fn linspace(start: f64, stop: f64, steps: usize) -> Result<Vec<f64>> {
    if steps < 2 || !(start < stop) || !start.is_finite() || !stop.is_finite() {
        return Err(Error::Domain(format!(
            "grid needs at least 2 points and start < stop, got {steps} points on [{start}, {stop}]"
        )));
    }
    let h = (stop - start) / (steps - 1) as f64;
    Ok((0..steps)
        .map(|i| if i + 1 == steps { stop } else { start + h * i as f64 })
        .collect())
}

/// Rows computed before the first failure, plus that failure.
#[derive(Debug)]
pub struct SweepOutcome {
    pub result: SweepResult,
    pub failure: Option<(f64, Error)>,
}

impl SweepOutcome {
    pub fn into_result(self) -> Result<SweepResult> {
        match self.failure {
            Some((_, e)) => Err(e),
            None => Ok(self.result),
        }
    }
}

/// Solves the loss-only problem at each `γ`.
pub fn sweep_gamma(network: &TransportNetwork, grid: &[f64], config: &SolverConfig) -> SweepOutcome {
    if let Some(&g) = grid.iter().find(|&&g| !(g > 0.0 && g <= 1.0)) {
        return early_failure(network, SweepAxis::Gamma, g, "gamma must lie in (0, 1]");
    }
    run(network, SweepAxis::Gamma, grid, |g| {
        solve_op_a(network, &BehavioralModel::new(g)?, config)
    })
}

/// Solves the weighted problem at each `τ`, applied to every source.
pub fn sweep_tau(
    network: &TransportNetwork,
    behavior: &BehavioralModel,
    grid: &[f64],
    config: &SolverConfig,
) -> SweepOutcome {
    if let Some(&t) = grid.iter().find(|&&t| !(0.0..=1.0).contains(&t)) {
        return early_failure(network, SweepAxis::Tau, t, "tau must lie in [0, 1]");
    }
    run(network, SweepAxis::Tau, grid, |t| {
        solve_op_b(&network.with_uniform_tau(t)?, behavior, config)
    })
}

fn early_failure(network: &TransportNetwork, axis: SweepAxis, at: f64, msg: &str) -> SweepOutcome {
    SweepOutcome {
        result: empty(network, axis),
        failure: Some((at, Error::Domain(format!("{msg}, got {at}")))),
    }
}

fn empty(network: &TransportNetwork, axis: SweepAxis) -> SweepResult {
    SweepResult {
        axis,
        target_count: network.targets().len(),
        samples: Vec::new(),
    }
}

fn run(
    network: &TransportNetwork,
    axis: SweepAxis,
    grid: &[f64],
    solve: impl Fn(f64) -> Result<SolveReport> + Sync,
) -> SweepOutcome {
    let mut order: Vec<f64> = grid.to_vec();
    order.sort_by(f64::total_cmp);
    let rows: Vec<Result<SweepSample>> = order
        .par_iter()
        .map(|&v| solve(v).map(|r| sample(network, v, &r)))
        .collect();

    let mut result = empty(network, axis);
    for (v, row) in order.iter().zip(rows) {
        match row {
            Ok(s) => result.samples.push(s),
            Err(e) => {
                return SweepOutcome {
                    result,
                    failure: Some((*v, e)),
                }
            }
        }
    }
    SweepOutcome { result, failure: None }
}

fn sample(network: &TransportNetwork, param: f64, report: &SolveReport) -> SweepSample {
    let aggregates = report.plan.target_aggregates(network);
    SweepSample {
        param,
        active_targets: aggregates.iter().filter(|&&a| a > ACTIVE_THRESHOLD).count(),
        aggregates,
        true_loss: report.true_loss,
        perceived_loss: report.perceived_loss,
    }
}
