//! Local agents and their subproblems.
//!
//! A target agent sees its own loss value, probability model and demand
//! bounds. A source agent sees its own capacity, utility weight and slopes.
//! Beyond that, both only ever receive `(consensus, dual)` pairs for their
//! incident edges.

use crate::error::{Error, Result};
use crate::model::{marginal_unchecked, BehavioralModel, SourceSpec, TargetSpec};
use crate::projection::project_capped_simplex;
use crate::roots::bisect_increasing;

/// Per-edge state an agent holds after each broadcast.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EdgeView {
    pub consensus: f64,
    pub dual: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Target,
    Source,
}

/// A proposal for one edge, posted to that edge's mailbox.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub edge: usize,
    pub from: Side,
    pub amount: f64,
}

#[derive(Debug, Clone)]
pub struct TargetAgent {
    spec: TargetSpec,
    behavior: BehavioralModel,
    edges: Vec<usize>,
    views: Vec<EdgeView>,
    local_plan: Vec<f64>,
}

impl TargetAgent {
    pub fn new(spec: TargetSpec, behavior: BehavioralModel, edges: Vec<usize>) -> Self {
        let n = edges.len();
        Self {
            spec,
            behavior,
            edges,
            views: vec![EdgeView::default(); n],
            local_plan: vec![0.0; n],
        }
    }

    pub fn spec(&self) -> &TargetSpec {
        &self.spec
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn local_plan(&self) -> &[f64] {
        &self.local_plan
    }

    /// Last `(consensus, dual)` pairs received, one per incident edge.
    pub fn views(&self) -> &[EdgeView] {
        &self.views
    }

    /// Solves the local subproblem against the last broadcast and returns
    /// one message per incident edge.
    pub fn propose(&mut self, eta: f64) -> Result<Vec<Message>> {
        let duals: Vec<f64> = self.views.iter().map(|v| v.dual).collect();
        let consensus: Vec<f64> = self.views.iter().map(|v| v.consensus).collect();
        self.local_plan = target_subproblem(self, &duals, &consensus, eta)?;
        Ok(self
            .edges
            .iter()
            .zip(&self.local_plan)
            .map(|(&edge, &amount)| Message {
                edge,
                from: Side::Target,
                amount,
            })
            .collect())
    }

    pub fn receive(&mut self, edge: usize, view: EdgeView) -> Result<()> {
        let slot = slot_of(&self.edges, edge, &self.spec.id)?;
        self.views[slot] = view;
        Ok(())
    }

    pub(crate) fn set_views(&mut self, views: Vec<EdgeView>) {
        self.views = views;
    }
}

#[derive(Debug, Clone)]
pub struct SourceAgent {
    spec: SourceSpec,
    edges: Vec<usize>,
    slopes: Vec<f64>,
    views: Vec<EdgeView>,
    local_plan: Vec<f64>,
}

impl SourceAgent {
    /// `slopes[k]` is the utility slope of `edges[k]`.
    pub fn new(spec: SourceSpec, edges: Vec<usize>, slopes: Vec<f64>) -> Self {
        let n = edges.len();
        Self {
            spec,
            edges,
            slopes,
            views: vec![EdgeView::default(); n],
            local_plan: vec![0.0; n],
        }
    }

    pub fn spec(&self) -> &SourceSpec {
        &self.spec
    }

    pub fn edges(&self) -> &[usize] {
        &self.edges
    }

    pub fn local_plan(&self) -> &[f64] {
        &self.local_plan
    }

    /// Last `(consensus, dual)` pairs received, one per incident edge.
    pub fn views(&self) -> &[EdgeView] {
        &self.views
    }

    pub fn propose(&mut self, eta: f64) -> Result<Vec<Message>> {
        let duals: Vec<f64> = self.views.iter().map(|v| v.dual).collect();
        let consensus: Vec<f64> = self.views.iter().map(|v| v.consensus).collect();
        self.local_plan = source_subproblem(self, &duals, &consensus, eta)?;
        Ok(self
            .edges
            .iter()
            .zip(&self.local_plan)
            .map(|(&edge, &amount)| Message {
                edge,
                from: Side::Source,
                amount,
            })
            .collect())
    }

    pub fn receive(&mut self, edge: usize, view: EdgeView) -> Result<()> {
        let slot = slot_of(&self.edges, edge, &self.spec.id)?;
        self.views[slot] = view;
        Ok(())
    }

    pub(crate) fn set_views(&mut self, views: Vec<EdgeView>) {
        self.views = views;
    }
}

fn slot_of(edges: &[usize], edge: usize, owner: &str) -> Result<usize> {
    edges
        .iter()
        .position(|&e| e == edge)
        .ok_or_else(|| Error::Mismatch(format!("edge {edge} is not incident to {owner}")))
}

fn check_inputs(n: usize, duals: &[f64], consensus: &[f64], eta: f64) -> Result<()> {
    if duals.len() != n || consensus.len() != n {
        return Err(Error::Mismatch(format!(
            "expected {n} duals and consensus values, got {} and {}",
            duals.len(),
            consensus.len()
        )));
    }
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Domain(format!("penalty must be positive, got {eta}")));
    }
    if duals.iter().chain(consensus).any(|v| !v.is_finite()) {
        return Err(Error::Domain("non-finite dual or consensus value".into()));
    }
    Ok(())
}

/// Minimizer over the target's feasible set of
/// `U w(p(Σ π)) + Σ α π + (η/2) Σ (π - π̄)²`.
///
/// For a fixed total `S` the minimizing split is a shifted, clipped copy of
/// `π̄ - α/η`, so the problem reduces to a convex scalar problem in `S`. Its
/// unconstrained root is found by bisection and then clamped to the demand
/// bounds.
pub fn target_subproblem(agent: &TargetAgent, duals: &[f64], consensus: &[f64], eta: f64) -> Result<Vec<f64>> {
    let n = agent.edges.len();
    check_inputs(n, duals, consensus, eta)?;
    let spec = &agent.spec;
    let behavior = &agent.behavior;

    let split = |theta: f64| -> f64 {
        consensus
            .iter()
            .zip(duals)
            .map(|(z, a)| (z - (a + theta) / eta).max(0.0))
            .sum()
    };
    // S - split(marginal(S)) is increasing in S
    let excess = |s: f64| s - split(marginal_unchecked(spec, behavior, s));
    let upper = split(marginal_unchecked(spec, behavior, 0.0));
    let unconstrained = if excess(0.0) >= 0.0 {
        0.0
    } else {
        bisect_increasing(excess, 0.0, upper, 0.0)
    };
    let total = unconstrained.clamp(spec.demand_lower, spec.demand_upper);

    if total == unconstrained {
        let theta = marginal_unchecked(spec, behavior, total);
        let out: Vec<f64> = consensus
            .iter()
            .zip(duals)
            .map(|(z, a)| (z - (a + theta) / eta).max(0.0))
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!(
                "target {} produced a non-finite proposal",
                spec.id
            )));
        }
        return Ok(out);
    }
    let shifted: Vec<f64> = consensus.iter().zip(duals).map(|(z, a)| z - a / eta).collect();
    Ok(project_capped_simplex(&shifted, total, total))
}

/// Minimizer over the source's feasible set of
/// `-Σ τ c π - Σ α π + (η/2) Σ (π̄ - π)²`, which for linear utilities is the
/// projection of `π̄ + (τ c + α)/η`.
pub fn source_subproblem(agent: &SourceAgent, duals: &[f64], consensus: &[f64], eta: f64) -> Result<Vec<f64>> {
    let n = agent.edges.len();
    check_inputs(n, duals, consensus, eta)?;
    let tau = agent.spec.weight_tau;
    let point: Vec<f64> = consensus
        .iter()
        .zip(duals)
        .zip(&agent.slopes)
        .map(|((z, a), c)| z + (tau * c + a) / eta)
        .collect();
    Ok(project_capped_simplex(
        &point,
        agent.spec.supply_lower,
        agent.spec.supply_upper,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{marginal_perceived_cost, AttackProbabilityModel};

    fn target_agent(u: f64, edges: usize, gamma: f64) -> TargetAgent {
        let spec = TargetSpec::new("t", u, AttackProbabilityModel::exponential(1.0).unwrap());
        TargetAgent::new(spec, BehavioralModel::new(gamma).unwrap(), (0..edges).collect())
    }

    fn source_agent(q: f64, tau: f64, slopes: Vec<f64>) -> SourceAgent {
        let spec = SourceSpec::new("s", q).with_tau(tau);
        SourceAgent::new(spec, (0..slopes.len()).collect(), slopes)
    }

    #[test]
    fn single_edge_first_order_condition() {
        // -12 e^{-(π+1)} + π = 0, solved independently by bisection below
        let agent = target_agent(12.0, 1, 1.0);
        let pi = target_subproblem(&agent, &[0.0], &[0.0], 1.0).unwrap()[0];
        let foc = |p: f64| p - 12.0 * (-(p + 1.0)).exp();
        let (mut lo, mut hi) = (0.0f64, 5.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if foc(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((pi - lo).abs() < 1e-10, "pi={pi} oracle={lo}");
        assert!((pi - 1.256_542_638).abs() < 1e-8);
    }

    #[test]
    fn large_penalty_tracks_consensus() {
        let agent = target_agent(5.0, 3, 0.6);
        let z = [0.4, 1.3, 0.2];
        let out = target_subproblem(&agent, &[0.0; 3], &z, 1e9).unwrap();
        for (a, b) in out.iter().zip(&z) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn optimal_consensus_is_a_fixed_point() {
        let agent = target_agent(7.0, 2, 0.5);
        let z = [0.75, 1.25];
        // dual equal to minus the marginal cancels the gradient
        let m = marginal_perceived_cost(agent.spec(), &agent.behavior, 2.0).unwrap();
        let out = target_subproblem(&agent, &[-m, -m], &z, 2.0).unwrap();
        assert!(
            (out[0] - 0.75).abs() < 1e-10 && (out[1] - 1.25).abs() < 1e-10,
            "{out:?}"
        );
    }

    #[test]
    fn target_demand_bounds_are_enforced() {
        let spec = TargetSpec::new("t", 50.0, AttackProbabilityModel::exponential(1.0).unwrap()).with_demand(0.5, 1.0);
        let agent = TargetAgent::new(spec, BehavioralModel::new(0.8).unwrap(), vec![0, 1]);
        let out = target_subproblem(&agent, &[0.0, 0.0], &[3.0, 3.0], 1.0).unwrap();
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let spec = TargetSpec::new("t", 0.01, AttackProbabilityModel::exponential(1.0).unwrap()).with_demand(0.5, 1.0);
        let agent = TargetAgent::new(spec, BehavioralModel::new(0.8).unwrap(), vec![0, 1]);
        let out = target_subproblem(&agent, &[5.0, 5.0], &[0.0, 0.0], 1.0).unwrap();
        assert!((out.iter().sum::<f64>() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn source_projection_identity() {
        let agent = source_agent(10.0, 0.0, vec![1.0, 1.0]);
        assert_eq!(
            source_subproblem(&agent, &[0.0, 0.0], &[2.0, 3.0], 1.0).unwrap(),
            vec![2.0, 3.0]
        );
    }

    #[test]
    fn source_closed_form_shift() {
        // τ c + α = 0.5 + 0.5 = η
        let agent = source_agent(10.0, 0.5, vec![1.0]);
        let out = source_subproblem(&agent, &[0.5], &[0.0], 1.0).unwrap();
        assert!((out[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn source_capacity_binds() {
        let agent = source_agent(1.0, 1.0, vec![1.0, 1.0]);
        let out = source_subproblem(&agent, &[0.0, 0.0], &[0.5, 0.5], 1.0).unwrap();
        assert!((out[0] - 0.5).abs() < 1e-15 && (out[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn bad_inputs_rejected() {
        let agent = target_agent(5.0, 2, 0.6);
        assert!(target_subproblem(&agent, &[0.0], &[0.0, 0.0], 1.0).is_err());
        assert!(target_subproblem(&agent, &[0.0, 0.0], &[0.0, 0.0], 0.0).is_err());
        let mut agent = agent;
        assert!(agent.receive(7, EdgeView::default()).is_err());
    }
}
