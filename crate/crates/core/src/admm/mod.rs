//! Distributed ADMM solver for the problem with source utilities.
//!
//! Each edge carries two local copies of its amount, `π^t` held by the
//! target and `π^s` held by the source, tied to a consensus value `π` and
//! priced by a dual `α`. One iteration is:
//!
//! ```text
//! Π_x^t(k+1) = argmin_{F_x^t} U_x w(p_x(Π_x^t)) + Σ α π^t + (η/2) Σ (π^t - π(k))²
//! Π_y^s(k+1) = argmin_{F_y^s} -Σ τ_y s_xy(π^s) - Σ α π^s + (η/2) Σ (π(k) - π^s)²
//! π(k+1)     = (π^t + π^s) / 2
//! α(k+1)     = α(k) + (η/2) (π^t - π^s)
//! ```
//!
//! All agents solve against iteration-`k` state, then a single barrier
//! applies the last two lines on every edge.

mod agents;
mod bus;

pub use agents::{source_subproblem, target_subproblem, EdgeView, Message, Side, SourceAgent, TargetAgent};
pub use bus::{message_bus_round, Mailbox, RoundStats};

use crate::centralized::check_op_b_feasible;
use crate::error::{Error, Result};
use crate::model::{
    perceived_loss_of_aggregates, source_utility_of_amounts, AllocationPlan, BehavioralModel, SolveReport, TraceRecord,
    TransportNetwork,
};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeState {
    pub consensus: f64,
    pub dual: f64,
    pub last_target_proposal: f64,
    pub last_source_proposal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmConfig {
    /// Penalty `η` of the augmented Lagrangian.
    pub eta: f64,
    pub max_iterations: usize,
    /// Bound on `max |π^t - π^s|` at termination.
    pub primal_tolerance: f64,
    /// Bound on the last consensus movement at termination.
    pub dual_tolerance: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            eta: 1.0,
            max_iterations: 5000,
            primal_tolerance: 1e-6,
            dual_tolerance: 1e-6,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.eta, self.primal_tolerance, self.dual_tolerance];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || self.max_iterations == 0 {
            return Err(Error::Domain(format!("invalid ADMM configuration {self:?}")));
        }
        Ok(())
    }
}

/// Consensus is the mean of the two proposals.
pub fn consensus_update(edge: &EdgeState) -> EdgeState {
    EdgeState {
        consensus: 0.5 * (edge.last_target_proposal + edge.last_source_proposal),
        ..*edge
    }
}

/// Dual moves by half the penalty times the disagreement.
pub fn dual_update(edge: &EdgeState, eta: f64) -> EdgeState {
    EdgeState {
        dual: edge.dual + 0.5 * eta * (edge.last_target_proposal - edge.last_source_proposal),
        ..*edge
    }
}

/// Agents, edge states and configuration of one distributed run.
#[derive(Debug, Clone)]
pub struct AdmmHarness<'a> {
    network: &'a TransportNetwork,
    behavior: BehavioralModel,
    config: AdmmConfig,
    targets: Vec<TargetAgent>,
    sources: Vec<SourceAgent>,
    edges: Vec<EdgeState>,
    iteration: usize,
}

impl<'a> AdmmHarness<'a> {
    pub fn new(network: &'a TransportNetwork, behavior: &BehavioralModel, config: &AdmmConfig) -> Result<Self> {
        config.validate()?;
        check_op_b_feasible(network)?;
        let targets: Vec<TargetAgent> = network
            .targets()
            .iter()
            .enumerate()
            .map(|(x, t)| TargetAgent::new(t.clone(), *behavior, network.target_edges(x).to_vec()))
            .collect();
        let sources: Vec<SourceAgent> = network
            .sources()
            .iter()
            .enumerate()
            .map(|(y, s)| {
                let edges = network.source_edges(y).to_vec();
                let slopes = edges.iter().map(|&k| network.edge_slope(k)).collect();
                SourceAgent::new(s.clone(), edges, slopes)
            })
            .collect();

        let edges = initial_edges(network);
        let mut harness = Self {
            network,
            behavior: *behavior,
            config: *config,
            targets,
            sources,
            edges,
            iteration: 0,
        };
        bus::broadcast(&mut harness.targets, &mut harness.sources, &harness.edges);
        Ok(harness)
    }

    pub fn edges(&self) -> &[EdgeState] {
        &self.edges
    }

    pub fn targets(&self) -> &[TargetAgent] {
        &self.targets
    }

    pub fn sources(&self) -> &[SourceAgent] {
        &self.sources
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Runs one round and returns its trace record.
    pub fn step(&mut self) -> Result<(RoundStats, TraceRecord)> {
        let stats = message_bus_round(&mut self.targets, &mut self.sources, &mut self.edges, self.config.eta)?;
        self.iteration += 1;
        let consensus = self.consensus();
        let perceived = perceived_loss_of_aggregates(self.network, &self.aggregates(&consensus), &self.behavior);
        let utility = source_utility_of_amounts(self.network, &consensus);
        let record = TraceRecord {
            iteration: self.iteration,
            primal_residual: stats.primal_residual,
            perceived_loss: perceived,
            objective: perceived - utility,
        };
        Ok((stats, record))
    }

    pub fn consensus(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.consensus).collect()
    }

    fn aggregates(&self, amounts: &[f64]) -> Vec<f64> {
        (0..self.network.targets().len())
            .map(|x| self.network.target_edges(x).iter().map(|&k| amounts[k]).sum())
            .collect()
    }

    /// Iterates until both tolerances hold or the iteration budget is spent.
    pub fn run(mut self) -> Result<SolveReport> {
        let mut trace = Vec::new();
        let mut last_residual = f64::INFINITY;
        while self.iteration < self.config.max_iterations {
            let (stats, record) = self.step()?;
            trace.push(record);
            last_residual = stats.primal_residual;
            if stats.primal_residual <= self.config.primal_tolerance
                && stats.consensus_change <= self.config.dual_tolerance
            {
                return Ok(self.report(trace));
            }
        }
        Err(Error::NonConvergence {
            iterations: self.iteration,
            residual: last_residual,
            trace,
        })
    }

    fn report(&self, trace: Vec<TraceRecord>) -> SolveReport {
        let consensus = self.consensus();
        let aggregates = self.aggregates(&consensus);
        let true_loss = self
            .network
            .targets()
            .iter()
            .zip(&aggregates)
            .map(|(t, &a)| t.loss_value * t.prob_model.p(a))
            .sum();
        SolveReport {
            perceived_loss: perceived_loss_of_aggregates(self.network, &aggregates, &self.behavior),
            source_utility: source_utility_of_amounts(self.network, &consensus),
            plan: AllocationPlan::from_clamped(self.network, consensus),
            true_loss,
            iterations: self.iteration,
            residual_trace: trace,
            converged: true,
        }
    }
}

/// Runs the distributed algorithm to convergence and reports the consensus
/// plan.
pub fn run_admm(network: &TransportNetwork, behavior: &BehavioralModel, config: &AdmmConfig) -> Result<SolveReport> {
    AdmmHarness::new(network, behavior, config)?.run()
}

/// Zero everywhere unless some node has a positive lower bound, in which
/// case each edge starts at the larger of its endpoints' even lower-bound
/// shares.
fn initial_edges(network: &TransportNetwork) -> Vec<EdgeState> {
    network
        .edges()
        .iter()
        .map(|e| {
            let t = &network.targets()[e.target];
            let s = &network.sources()[e.source];
            let t_share = t.demand_lower / network.target_edges(e.target).len() as f64;
            let s_share = s.supply_lower / network.source_edges(e.source).len() as f64;
            let start = t_share.max(s_share);
            EdgeState {
                consensus: start,
                dual: 0.0,
                last_target_proposal: start,
                last_source_proposal: start,
            }
        })
        .collect()
}
