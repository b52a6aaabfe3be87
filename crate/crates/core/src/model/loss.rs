//! True and perceived losses and the marginal perceived cost at a target.

use crate::error::{Error, Result};

use super::network::{TargetSpec, TransportNetwork};
use super::plan::AllocationPlan;
use super::weighting::BehavioralModel;

/// `Σ_x U_x p_x(Π_x)`.
pub fn true_loss(network: &TransportNetwork, plan: &AllocationPlan) -> Result<f64> {
    plan.check_network(network)?;
    Ok(network
        .targets()
        .iter()
        .enumerate()
        .map(|(x, t)| t.loss_value * t.prob_model.p(plan.aggregate_at_target(network, x)))
        .sum())
}

/// `Σ_x U_x w(p_x(Π_x))`.
pub fn perceived_loss(network: &TransportNetwork, plan: &AllocationPlan, behavior: &BehavioralModel) -> Result<f64> {
    plan.check_network(network)?;
    Ok(perceived_loss_of_aggregates(
        network,
        &plan.target_aggregates(network),
        behavior,
    ))
}

/// `Σ_y Σ_x τ_y c_xy π_xy`.
pub fn source_utility(network: &TransportNetwork, plan: &AllocationPlan) -> Result<f64> {
    plan.check_network(network)?;
    Ok(source_utility_of_amounts(network, plan.amounts()))
}

/// Objective of the problem with source utilities: perceived loss minus
/// weighted source utility.
pub fn op_b_objective(network: &TransportNetwork, plan: &AllocationPlan, behavior: &BehavioralModel) -> Result<f64> {
    Ok(perceived_loss(network, plan, behavior)? - source_utility(network, plan)?)
}

pub(crate) fn perceived_loss_of_aggregates(
    network: &TransportNetwork,
    aggregates: &[f64],
    behavior: &BehavioralModel,
) -> f64 {
    network
        .targets()
        .iter()
        .zip(aggregates)
        .map(|(t, &a)| target_cost(t, behavior, a.max(0.0)))
        .sum()
}

pub(crate) fn source_utility_of_amounts(network: &TransportNetwork, amounts: &[f64]) -> f64 {
    network
        .edges()
        .iter()
        .enumerate()
        .map(|(k, e)| network.sources()[e.source].weight_tau * network.edge_slope(k) * amounts[k])
        .sum()
}

/// `U_x w(p_x(t))`.
pub(crate) fn target_cost(target: &TargetSpec, behavior: &BehavioralModel, total: f64) -> f64 {
    let neg_log = target.prob_model.neg_log_unchecked(total);
    target.loss_value * behavior.weight_of_neg_log(neg_log)
}

/// Derivative of `U_x w(p_x(t))` with respect to the total `t` received:
/// `U γ (-ln p)^(γ-1) (p'/p) w(p)`.
///
/// Strictly negative and strictly increasing towards zero in `t`.
pub fn marginal_perceived_cost(target: &TargetSpec, behavior: &BehavioralModel, total_received: f64) -> Result<f64> {
    if !(total_received >= 0.0) {
        return Err(Error::Domain(format!(
            "total received resources must be nonnegative, got {total_received}"
        )));
    }
    let neg_log = target.prob_model.neg_log_unchecked(total_received);
    if !(neg_log > 0.0) || !neg_log.is_finite() {
        return Err(Error::Domain(format!(
            "attack probability at {total_received} is degenerate (-ln p = {neg_log})"
        )));
    }
    Ok(marginal_unchecked(target, behavior, total_received))
}

pub(crate) fn marginal_unchecked(target: &TargetSpec, behavior: &BehavioralModel, t: f64) -> f64 {
    let gamma = behavior.gamma();
    let neg_log = target.prob_model.neg_log_unchecked(t);
    let w = behavior.weight_of_neg_log(neg_log);
    target.loss_value * gamma * neg_log.powf(gamma - 1.0) * target.prob_model.log_derivative(t) * w
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{AttackProbabilityModel, SourceSpec};
    use std::f64::consts::E;

    fn single(u: f64, r: f64) -> TransportNetwork {
        TransportNetwork::complete(
            vec![TargetSpec::new("t", u, AttackProbabilityModel::exponential(r).unwrap())],
            vec![SourceSpec::new("s", 5.0)],
        )
        .unwrap()
    }

    #[test]
    fn single_target_losses() {
        let net = single(12.0, 1.0);
        let plan = AllocationPlan::zeros(&net);
        let expected = 12.0 / E;
        assert!((true_loss(&net, &plan).unwrap() - expected).abs() < 1e-12);
        let half = BehavioralModel::new(0.5).unwrap();
        // -ln p = 1 so the weighting is the identity here.
        assert!((perceived_loss(&net, &plan, &half).unwrap() - expected).abs() < 1e-12);

        let net2 = single(12.0, 2.0);
        let plan2 = AllocationPlan::zeros(&net2);
        let v = perceived_loss(&net2, &plan2, &half).unwrap();
        assert!((v - 12.0 * (-(2f64).sqrt()).exp()).abs() < 1e-12);
        assert!((v - 2.917_400_813).abs() < 1e-9);
    }

    #[test]
    fn two_targets_true_loss() {
        let exp1 = AttackProbabilityModel::exponential(1.0).unwrap();
        let net = TransportNetwork::complete(
            vec![TargetSpec::new("a", 2.0, exp1), TargetSpec::new("b", 3.0, exp1)],
            vec![SourceSpec::new("s", 5.0)],
        )
        .unwrap();
        // aggregates {1, 2} with r = 1 give exponents 2 and 3
        let plan = AllocationPlan::from_amounts(&net, vec![1.0, 2.0]).unwrap();
        let expected = 2.0 * (-2f64).exp() + 3.0 * (-3f64).exp();
        assert!((true_loss(&net, &plan).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.420_031_772).abs() < 1e-9);
        let rational = BehavioralModel::rational();
        assert_eq!(
            perceived_loss(&net, &plan, &rational).unwrap(),
            true_loss(&net, &plan).unwrap()
        );
    }

    #[test]
    fn plan_mismatch_is_rejected() {
        let net = single(12.0, 1.0);
        let other = TransportNetwork::complete(
            vec![TargetSpec::new(
                "t",
                1.0,
                AttackProbabilityModel::exponential(1.0).unwrap(),
            )],
            vec![SourceSpec::new("s", 5.0), SourceSpec::new("u", 5.0)],
        )
        .unwrap();
        let plan = AllocationPlan::zeros(&other);
        assert!(matches!(true_loss(&net, &plan), Err(Error::Mismatch(_))));
    }

    #[test]
    fn marginal_at_gamma_one() {
        let t = TargetSpec::new("t", 12.0, AttackProbabilityModel::exponential(1.0).unwrap());
        let m = marginal_perceived_cost(&t, &BehavioralModel::rational(), 0.0).unwrap();
        assert!((m + 12.0 / E).abs() < 1e-12);
    }

    #[test]
    fn marginal_matches_finite_difference() {
        let t = TargetSpec::new("t", 9.0, AttackProbabilityModel::exponential(1.5).unwrap());
        let b = BehavioralModel::new(0.6).unwrap();
        let h = 1e-5;
        let at = 0.0;
        // one-sided second-order stencil, since t = 0 is the domain edge
        let f = |s: f64| target_cost(&t, &b, s);
        let fd = (-3.0 * f(at) + 4.0 * f(at + h) - f(at + 2.0 * h)) / (2.0 * h);
        let m = marginal_perceived_cost(&t, &b, at).unwrap();
        assert!(((m - fd) / m).abs() <= 1e-6, "m={m} fd={fd}");
        assert!(m < 0.0);
    }

    #[test]
    fn marginal_rejects_negative_total() {
        let t = TargetSpec::new("t", 9.0, AttackProbabilityModel::exponential(1.5).unwrap());
        assert!(marginal_perceived_cost(&t, &BehavioralModel::rational(), -1.0).is_err());
    }
}
