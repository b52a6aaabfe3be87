//! Centralized reference solver.
//!
//! Minimizes the perceived loss (optionally minus weighted source utility)
//! by projected gradient descent. Each trial step starts from a
//! Barzilai-Borwein estimate and is halved until the Armijo condition holds,
//! so the objective never increases.

use crate::error::{Error, Result};
use crate::model::{
    marginal_unchecked, perceived_loss_of_aggregates, source_utility_of_amounts, AllocationPlan, BehavioralModel,
    SolveReport, TraceRecord, TransportNetwork,
};
use crate::projection::{project_capped_simplex, violation};

const ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 80;
const STALL_WINDOW: usize = 10;
const DYKSTRA_TOLERANCE: f64 = 1e-9;
const DYKSTRA_FAILURE: f64 = 1e-6;
const DYKSTRA_MAX_SWEEPS: usize = 100_000;

/// Which constraint set a plan is optimized or projected over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemMode {
    /// Source capacities only; no source utility term.
    OpA,
    /// Target and source bounds, with weighted linear source utilities.
    OpB,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Trial step of the first iteration and the fallback when the
    /// curvature estimate is unusable.
    pub step_size: f64,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub objective_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_size: 1.0,
            max_iterations: 200_000,
            gradient_tolerance: 1e-7,
            objective_tolerance: 1e-10,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.step_size, self.gradient_tolerance, self.objective_tolerance];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || self.max_iterations == 0 {
            return Err(Error::Domain(format!("invalid solver configuration {self:?}")));
        }
        Ok(())
    }
}

pub fn solve_op_a(
    network: &TransportNetwork,
    behavior: &BehavioralModel,
    config: &SolverConfig,
) -> Result<SolveReport> {
    solve(network, behavior, config, ProblemMode::OpA)
}

pub fn solve_op_b(
    network: &TransportNetwork,
    behavior: &BehavioralModel,
    config: &SolverConfig,
) -> Result<SolveReport> {
    solve(network, behavior, config, ProblemMode::OpB)
}

pub fn solve(
    network: &TransportNetwork,
    behavior: &BehavioralModel,
    config: &SolverConfig,
    mode: ProblemMode,
) -> Result<SolveReport> {
    config.validate()?;
    if mode == ProblemMode::OpB {
        check_op_b_feasible(network)?;
    }
    let problem = Problem {
        network,
        behavior,
        mode,
    };

    let mut x = problem.project(&uniform_split(network))?;
    let mut f = problem.objective(&x);
    let mut g = problem.gradient(&x);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut trace = Vec::new();
    let mut stalled = 0;
    let mut residual = problem.stationarity(&x, &g)?;
    trace.push(problem.record(0, residual, &x));
    if residual <= config.gradient_tolerance {
        return Ok(problem.report(x, 0, trace, true));
    }

    for iteration in 1..=config.max_iterations {
        let mut step = match &prev {
            Some((px, pg)) => barzilai_borwein(&x, px, &g, pg).unwrap_or(config.step_size),
            None => config.step_size,
        };

        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(&g).map(|(a, d)| a - step * d).collect();
            let candidate = problem.project(&trial)?;
            let f_candidate = problem.objective(&candidate);
            let decrease: f64 = g
                .iter()
                .zip(candidate.iter().zip(&x))
                .map(|(d, (c, a))| d * (c - a))
                .sum();
            if f_candidate <= f + ARMIJO * decrease + 4.0 * f64::EPSILON * f.abs() {
                accepted = Some((candidate, f_candidate));
                break;
            }
            step *= 0.5;
        }

        let (x_new, f_new) = match accepted {
            Some(a) => a,
            // no decrease is representable; the iterate is as good as it gets
            None => (x.clone(), f),
        };
        let g_new = problem.gradient(&x_new);
        let change = (f - f_new).abs();
        prev = Some((std::mem::replace(&mut x, x_new), std::mem::replace(&mut g, g_new)));
        f = f_new;

        residual = problem.stationarity(&x, &g)?;
        trace.push(problem.record(iteration, residual, &x));

        if change <= config.objective_tolerance {
            stalled += 1;
        } else {
            stalled = 0;
        }
        if residual <= config.gradient_tolerance || stalled >= STALL_WINDOW {
            return Ok(problem.report(x, iteration, trace, true));
        }
    }

    Err(Error::NonConvergence {
        iterations: config.max_iterations,
        residual,
        trace,
    })
}

/// Euclidean projection of `raw` onto the feasible set of `mode`.
///
/// The loss-only set is separable per source and projected exactly. With
/// target bounds the two families of constraints are coupled, and Dykstra's
/// alternating projections are run until the target constraints are met to
/// `1e-9`.
pub fn project_feasible(raw: &[f64], network: &TransportNetwork, mode: ProblemMode) -> Result<AllocationPlan> {
    if raw.len() != network.edge_count() {
        return Err(Error::Mismatch(format!(
            "expected {} edge amounts, got {}",
            network.edge_count(),
            raw.len()
        )));
    }
    if raw.iter().any(|a| !a.is_finite()) {
        return Err(Error::Domain("raw plan contains non-finite amounts".into()));
    }
    let amounts = match mode {
        ProblemMode::OpA => project_sources(raw, network, false),
        ProblemMode::OpB => dykstra(raw, network)?,
    };
    Ok(AllocationPlan::from_clamped(network, amounts))
}

/// Norm of the projected gradient step `P(π - ∇F(π)) - π`; zero exactly at
/// optimal plans.
pub fn kkt_residual(
    network: &TransportNetwork,
    behavior: &BehavioralModel,
    plan: &AllocationPlan,
    mode: ProblemMode,
) -> Result<f64> {
    plan.check_network(network)?;
    let problem = Problem {
        network,
        behavior,
        mode,
    };
    let x = plan.amounts().to_vec();
    let g = problem.gradient(&x);
    problem.stationarity(&x, &g)
}

struct Problem<'a> {
    network: &'a TransportNetwork,
    behavior: &'a BehavioralModel,
    mode: ProblemMode,
}

impl Problem<'_> {
    fn aggregates(&self, x: &[f64]) -> Vec<f64> {
        (0..self.network.targets().len())
            .map(|t| self.network.target_edges(t).iter().map(|&k| x[k]).sum())
            .collect()
    }

    fn utility(&self, x: &[f64]) -> f64 {
        match self.mode {
            ProblemMode::OpA => 0.0,
            ProblemMode::OpB => source_utility_of_amounts(self.network, x),
        }
    }

    fn objective(&self, x: &[f64]) -> f64 {
        perceived_loss_of_aggregates(self.network, &self.aggregates(x), self.behavior) - self.utility(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let net = self.network;
        let marginals: Vec<f64> = self
            .aggregates(x)
            .iter()
            .zip(net.targets())
            .map(|(&a, t)| marginal_unchecked(t, self.behavior, a.max(0.0)))
            .collect();
        net.edges()
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let linear = match self.mode {
                    ProblemMode::OpA => 0.0,
                    ProblemMode::OpB => net.sources()[e.source].weight_tau * net.edge_slope(k),
                };
                marginals[e.target] - linear
            })
            .collect()
    }

    fn project(&self, raw: &[f64]) -> Result<Vec<f64>> {
        match self.mode {
            ProblemMode::OpA => Ok(project_sources(raw, self.network, false)),
            ProblemMode::OpB => dykstra(raw, self.network),
        }
    }

    fn stationarity(&self, x: &[f64], g: &[f64]) -> Result<f64> {
        let trial: Vec<f64> = x.iter().zip(g).map(|(a, d)| a - d).collect();
        let p = self.project(&trial)?;
        Ok(p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }

    fn record(&self, iteration: usize, residual: f64, x: &[f64]) -> TraceRecord {
        let perceived = perceived_loss_of_aggregates(self.network, &self.aggregates(x), self.behavior);
        TraceRecord {
            iteration,
            primal_residual: residual,
            perceived_loss: perceived,
            objective: perceived - self.utility(x),
        }
    }

    fn report(&self, x: Vec<f64>, iterations: usize, trace: Vec<TraceRecord>, converged: bool) -> SolveReport {
        let aggregates = self.aggregates(&x);
        let true_loss = self
            .network
            .targets()
            .iter()
            .zip(&aggregates)
            .map(|(t, &a)| t.loss_value * t.prob_model.p(a.max(0.0)))
            .sum();
        let perceived_loss = perceived_loss_of_aggregates(self.network, &aggregates, self.behavior);
        let source_utility = self.utility(&x);
        SolveReport {
            plan: AllocationPlan::from_clamped(self.network, x),
            true_loss,
            perceived_loss,
            source_utility,
            iterations,
            residual_trace: trace,
            converged,
        }
    }
}

fn uniform_split(network: &TransportNetwork) -> Vec<f64> {
    let mut x = vec![0.0; network.edge_count()];
    for (y, s) in network.sources().iter().enumerate() {
        let edges = network.source_edges(y);
        let share = s.supply_upper / edges.len() as f64;
        for &k in edges {
            x[k] = share;
        }
    }
    x
}

fn barzilai_borwein(x: &[f64], px: &[f64], g: &[f64], pg: &[f64]) -> Option<f64> {
    let mut ss = 0.0;
    let mut sy = 0.0;
    for k in 0..x.len() {
        let s = x[k] - px[k];
        let y = g[k] - pg[k];
        ss += s * s;
        sy += s * y;
    }
    let step = ss / sy;
    (sy > 0.0 && step.is_finite()).then(|| step.clamp(1e-12, 1e12))
}

/// Per-source projection; `with_lower` selects whether supply lower bounds
/// are enforced.
fn project_sources(raw: &[f64], network: &TransportNetwork, with_lower: bool) -> Vec<f64> {
    let mut out = vec![0.0; raw.len()];
    for (y, s) in network.sources().iter().enumerate() {
        let edges = network.source_edges(y);
        let v: Vec<f64> = edges.iter().map(|&k| raw[k]).collect();
        let lo = if with_lower { s.supply_lower } else { 0.0 };
        for (&k, p) in edges.iter().zip(project_capped_simplex(&v, lo, s.supply_upper)) {
            out[k] = p;
        }
    }
    out
}

fn project_targets(raw: &[f64], network: &TransportNetwork) -> Vec<f64> {
    let mut out = vec![0.0; raw.len()];
    for (x, t) in network.targets().iter().enumerate() {
        let edges = network.target_edges(x);
        let v: Vec<f64> = edges.iter().map(|&k| raw[k]).collect();
        for (&k, p) in edges
            .iter()
            .zip(project_capped_simplex(&v, t.demand_lower, t.demand_upper))
        {
            out[k] = p;
        }
    }
    out
}

fn target_violation(x: &[f64], network: &TransportNetwork) -> f64 {
    network
        .targets()
        .iter()
        .enumerate()
        .map(|(t, spec)| {
            let v: Vec<f64> = network.target_edges(t).iter().map(|&k| x[k]).collect();
            violation(&v, spec.demand_lower, spec.demand_upper)
        })
        .fold(0.0, f64::max)
}

fn dykstra(raw: &[f64], network: &TransportNetwork) -> Result<Vec<f64>> {
    let n = raw.len();
    let mut x = raw.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut last_violation = f64::INFINITY;
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let shifted: Vec<f64> = x.iter().zip(&p).map(|(a, b)| a + b).collect();
        let y = project_targets(&shifted, network);
        for k in 0..n {
            p[k] = shifted[k] - y[k];
        }
        let shifted: Vec<f64> = y.iter().zip(&q).map(|(a, b)| a + b).collect();
        let x_new = project_sources(&shifted, network, true);
        for k in 0..n {
            q[k] = shifted[k] - x_new[k];
        }
        let change = x_new.iter().zip(&x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        x = x_new;
        last_violation = target_violation(&x, network);
        if last_violation < DYKSTRA_TOLERANCE && change <= 1e-14 * (1.0 + x.iter().fold(0.0f64, |m, a| m.max(a.abs())))
        {
            return Ok(x);
        }
    }
    if last_violation <= DYKSTRA_FAILURE {
        return Ok(x);
    }
    Err(Error::Infeasible(format!(
        "alternating projection stalled with constraint violation {last_violation:.3e}"
    )))
}

pub(crate) fn check_op_b_feasible(network: &TransportNetwork) -> Result<()> {
    let demand_lower: f64 = network.targets().iter().map(|t| t.demand_lower).sum();
    let demand_upper: f64 = network.targets().iter().map(|t| t.demand_upper).sum();
    let supply_lower: f64 = network.sources().iter().map(|s| s.supply_lower).sum();
    let supply_upper: f64 = network.total_supply();
    if demand_lower > supply_upper {
        return Err(Error::Infeasible(format!(
            "total demand lower bound {demand_lower} exceeds total supply {supply_upper}"
        )));
    }
    if supply_lower > demand_upper {
        return Err(Error::Infeasible(format!(
            "total supply lower bound {supply_lower} exceeds total demand cap {demand_upper}"
        )));
    }
    for (x, t) in network.targets().iter().enumerate() {
        let reachable: f64 = network
            .target_edges(x)
            .iter()
            .map(|&k| network.sources()[network.edges()[k].source].supply_upper)
            .sum();
        if t.demand_lower > reachable {
            return Err(Error::Infeasible(format!(
                "target {} needs {} but its sources hold only {reachable}",
                t.id, t.demand_lower
            )));
        }
    }
    for (y, s) in network.sources().iter().enumerate() {
        let room: f64 = network
            .source_edges(y)
            .iter()
            .map(|&k| network.targets()[network.edges()[k].target].demand_upper)
            .sum();
        if s.supply_lower > room {
            return Err(Error::Infeasible(format!(
                "source {} must ship {} but its targets accept only {room}",
                s.id, s.supply_lower
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{marginal_perceived_cost, AttackProbabilityModel, SourceSpec, TargetSpec};

    fn exp1() -> AttackProbabilityModel {
        AttackProbabilityModel::exponential(1.0).unwrap()
    }

    fn case_study(gamma: f64) -> (TransportNetwork, BehavioralModel) {
        let targets = [12.0, 9.0, 5.0, 3.0, 2.0]
            .iter()
            .enumerate()
            .map(|(i, &u)| TargetSpec::new(format!("t{}", i + 1), u, exp1()))
            .collect();
        let sources = vec![SourceSpec::new("s1", 10.0), SourceSpec::new("s2", 4.0)];
        (
            TransportNetwork::complete(targets, sources).unwrap(),
            BehavioralModel::new(gamma).unwrap(),
        )
    }

    fn closed_form() -> Vec<f64> {
        let logs: Vec<f64> = [12.0f64, 9.0, 5.0, 3.0, 2.0].iter().map(|u| u.ln()).collect();
        let level = (logs.iter().sum::<f64>() - 14.0) / 5.0;
        logs.iter().map(|l| l - level).collect()
    }

    #[test]
    fn rational_case_study_matches_closed_form() {
        let (net, b) = case_study(1.0);
        let report = solve_op_a(&net, &b, &SolverConfig::default()).unwrap();
        let agg = report.plan.target_aggregates(&net);
        for (a, e) in agg.iter().zip(closed_form()) {
            assert!((a - e).abs() < 1e-6, "{agg:?}");
        }
        assert!(report.converged);
        assert!((agg.iter().sum::<f64>() - 14.0).abs() < 1e-9);
    }

    #[test]
    fn single_edge_takes_whole_budget() {
        let net = TransportNetwork::complete(vec![TargetSpec::new("t", 3.0, exp1())], vec![SourceSpec::new("s", 5.0)])
            .unwrap();
        let r = solve_op_a(&net, &BehavioralModel::new(0.5).unwrap(), &SolverConfig::default()).unwrap();
        assert!((r.plan.amounts()[0] - 5.0).abs() < 1e-12);
    }

    #[test]
    fn near_rational_is_close_to_rational() {
        let (net, b) = case_study(0.999);
        let r = solve_op_a(&net, &b, &SolverConfig::default()).unwrap();
        for (a, e) in r.plan.target_aggregates(&net).iter().zip(closed_form()) {
            assert!((a - e).abs() < 1e-2);
        }
    }

    #[test]
    fn op_b_without_utility_reduces_to_op_a() {
        let (net, b) = case_study(0.5);
        let cfg = SolverConfig::default();
        let a = solve_op_a(&net, &b, &cfg).unwrap();
        let bb = solve_op_b(&net, &b, &cfg).unwrap();
        assert!((a.objective() - bb.objective()).abs() <= 1e-9);
    }

    #[test]
    fn op_b_saturates_supply_under_heavy_utility() {
        let t = TargetSpec::new("t", 1.0, exp1()).with_demand(0.0, 20.0);
        let s = SourceSpec::new("s", 7.0).with_tau(50.0);
        let net = TransportNetwork::complete(vec![t], vec![s]).unwrap();
        let r = solve_op_b(&net, &BehavioralModel::new(0.7).unwrap(), &SolverConfig::default()).unwrap();
        assert!((r.plan.amounts()[0] - 7.0).abs() < 1e-9);
        assert!((r.source_utility - 350.0).abs() < 1e-6);
    }

    #[test]
    fn op_b_respects_target_caps() {
        let targets = vec![
            TargetSpec::new("a", 12.0, exp1()).with_demand(0.0, 2.0),
            TargetSpec::new("b", 2.0, exp1()).with_demand(1.0, f64::INFINITY),
        ];
        let net =
            TransportNetwork::complete(targets, vec![SourceSpec::new("s", 10.0), SourceSpec::new("u", 1.0)]).unwrap();
        let r = solve_op_b(&net, &BehavioralModel::new(0.6).unwrap(), &SolverConfig::default()).unwrap();
        let agg = r.plan.target_aggregates(&net);
        assert!(agg[0] <= 2.0 + 1e-9 && agg[1] >= 1.0 - 1e-9, "{agg:?}");
    }

    #[test]
    fn op_b_rejects_infeasible_bounds() {
        let t = TargetSpec::new("t", 1.0, exp1()).with_demand(8.0, 9.0);
        let net = TransportNetwork::complete(vec![t], vec![SourceSpec::new("s", 5.0)]).unwrap();
        let err = solve_op_b(&net, &BehavioralModel::rational(), &SolverConfig::default()).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn projection_examples() {
        let net = TransportNetwork::complete(
            vec![TargetSpec::new("a", 2.0, exp1()), TargetSpec::new("b", 1.0, exp1())],
            vec![SourceSpec::new("s", 1.0)],
        )
        .unwrap();
        let p = project_feasible(&[0.8, 0.8], &net, ProblemMode::OpA).unwrap();
        assert!((p.amounts()[0] - 0.5).abs() < 1e-15 && (p.amounts()[1] - 0.5).abs() < 1e-15);
        let same = project_feasible(&[0.25, 0.5], &net, ProblemMode::OpA).unwrap();
        assert_eq!(same.amounts(), &[0.25, 0.5]);
        let clipped = project_feasible(&[-0.3, 0.5], &net, ProblemMode::OpB).unwrap();
        assert_eq!(clipped.amounts(), &[0.0, 0.5]);
        assert!(project_feasible(&[0.1], &net, ProblemMode::OpA).is_err());
    }

    #[test]
    fn kkt_residual_examples() {
        let (net, b) = case_study(1.0);
        // closed-form aggregates split proportionally to capacity
        let agg = closed_form();
        let amounts: Vec<f64> = net
            .edges()
            .iter()
            .map(|e| agg[e.target] * net.sources()[e.source].supply_upper / 14.0)
            .collect();
        let plan = AllocationPlan::from_amounts(&net, amounts).unwrap();
        assert!(kkt_residual(&net, &b, &plan, ProblemMode::OpA).unwrap() <= 1e-6);
        let zero = AllocationPlan::zeros(&net);
        assert!(kkt_residual(&net, &b, &zero, ProblemMode::OpA).unwrap() > 0.0);
    }

    #[test]
    fn equal_marginals_on_funded_targets() {
        let (net, b) = case_study(0.4);
        let r = solve_op_a(&net, &b, &SolverConfig::default()).unwrap();
        let agg = r.plan.target_aggregates(&net);
        let marg: Vec<f64> = net
            .targets()
            .iter()
            .zip(&agg)
            .map(|(t, &a)| marginal_perceived_cost(t, &b, a).unwrap())
            .collect();
        let funded: Vec<f64> = marg
            .iter()
            .zip(&agg)
            .filter(|(_, &a)| a > 1e-6)
            .map(|(m, _)| *m)
            .collect();
        let level = funded[0];
        for m in &funded {
            assert!((m - level).abs() <= 1e-4, "{marg:?}");
        }
        for (m, &a) in marg.iter().zip(&agg) {
            if a <= 1e-6 {
                assert!(*m >= level - 1e-4);
            }
        }
    }

    #[test]
    fn trace_objective_is_non_increasing() {
        let (net, b) = case_study(0.3);
        let r = solve_op_a(&net, &b, &SolverConfig::default()).unwrap();
        for w in r.residual_trace.windows(2) {
            assert!(w[1].objective <= w[0].objective + 1e-12);
        }
    }

    #[test]
    fn invalid_config_rejected() {
        let (net, b) = case_study(1.0);
        let cfg = SolverConfig {
            max_iterations: 0,
            ..SolverConfig::default()
        };
        assert!(solve_op_a(&net, &b, &cfg).is_err());
    }

    #[test]
    fn non_convergence_carries_trace() {
        let (net, b) = case_study(0.5);
        let cfg = SolverConfig {
            max_iterations: 2,
            gradient_tolerance: 1e-300,
            objective_tolerance: 1e-300,
            ..SolverConfig::default()
        };
        match solve_op_a(&net, &b, &cfg) {
            Err(Error::NonConvergence { iterations, trace, .. }) => {
                assert_eq!(iterations, 2);
                assert_eq!(trace.len(), 3);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
