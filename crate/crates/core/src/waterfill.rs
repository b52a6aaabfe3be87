//! Sequential water-filling for complete networks.
//!
//! On a complete network all sources act as one super source holding
//! `Σ q̄_y`. Targets are funded in descending order of loss value: the
//! top target alone until its marginal perceived cost rises to the
//! zero-allocation marginal of the next one, then both at a common marginal
//! level, and so on until the budget runs out. The breakpoints of that
//! process are the pairwise thresholds `π̃_i^{j*}` defined by
//!
//! ```text
//! U_i ∂w(p_i)/∂π̃ |_{π̃ = π̃_i^{j*}} = U_j ∂w(p_j)/∂π̃ |_{π̃ = 0}
//! ```
//!
//! and target `j` receives resources iff the budget exceeds
//! `Σ_{i<j} π̃_i^{j*}`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::{marginal_unchecked, AllocationPlan, BehavioralModel, TargetSpec, TransportNetwork};
use crate::roots::{bisect_increasing, expand_upper, MAX_BISECTIONS};

const THRESHOLD_TOLERANCE: f64 = 1e-12;

/// Pairwise activation thresholds, keyed by `(i, j)` target indices where
/// `i` has the larger loss value.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ThresholdTable {
    pub entries: BTreeMap<(usize, usize), f64>,
}

impl ThresholdTable {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.entries.get(&(i, j)).copied()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaterfillTrace {
    /// Target indices by descending loss value.
    pub activation_order: Vec<usize>,
    /// Super-source budget at which each target in `activation_order`
    /// starts receiving resources; the first entry is 0.
    pub breakpoints: Vec<f64>,
    pub thresholds: ThresholdTable,
    /// Total received per target, indexed like the network's targets.
    pub final_aggregates: Vec<f64>,
    /// Common marginal perceived cost of the funded targets.
    pub water_level: f64,
    /// Edge plan built by letting each source, in listed order, continue the
    /// water-filling where the previous one stopped.
    pub per_source_plan: AllocationPlan,
}

/// Resource level at target `i` where its marginal perceived cost equals the
/// marginal of target `j` at zero.
pub fn threshold(i: &TargetSpec, j: &TargetSpec, behavior: &BehavioralModel) -> Result<f64> {
    check_pair(i, j)?;
    let rhs = marginal_unchecked(j, behavior, 0.0);
    let gap = |t: f64| marginal_unchecked(i, behavior, t) - rhs;
    let at_zero = gap(0.0);
    if at_zero > 0.0 {
        return Err(Error::Precondition(format!(
            "target {} is already below the zero-allocation marginal of {}; no threshold exists",
            i.id, j.id
        )));
    }
    if at_zero == 0.0 {
        return Ok(0.0);
    }
    let hi = expand_upper(gap, 1.0)
        .map_err(|_| Error::Precondition(format!("could not bracket the threshold of {} over {}", i.id, j.id)))?;
    Ok(bisect_increasing(gap, 0.0, hi, THRESHOLD_TOLERANCE))
}

/// `dπ̃_i^{j*}/dγ`, from implicit differentiation of the threshold equation
/// after taking logs of both sides.
///
/// Requires `p(0) < 1/e` at both targets; under that hypothesis the result
/// is strictly negative.
pub fn gamma_sensitivity(i: &TargetSpec, j: &TargetSpec, behavior: &BehavioralModel) -> Result<f64> {
    check_pair(i, j)?;
    for t in [i, j] {
        if t.prob_model.neg_log_unchecked(0.0) <= 1.0 {
            return Err(Error::Precondition(format!(
                "target {} has p(0) >= 1/e; sensitivity sign is only established for p(0) < 1/e",
                t.id
            )));
        }
    }
    let gamma = behavior.gamma();
    let at = threshold(i, j, behavior)?;
    let l_i = i.prob_model.neg_log_unchecked(at);
    let l_j = j.prob_model.neg_log_unchecked(0.0);
    let numerator = (l_i.powf(gamma) - 1.0) * l_i.ln() - (l_j.powf(gamma) - 1.0) * l_j.ln();
    // d/dπ of ln(-marginal_i): the (-ln p) terms plus the slope of ln(-p'/p)
    let dl_i = -i.prob_model.log_derivative(at);
    let lambda = dl_i / l_i * (gamma - 1.0 - gamma * l_i.powf(gamma)) + i.prob_model.log_derivative_slope(at);
    Ok(numerator / lambda)
}

/// Water-filling on a complete network with strictly ordered loss values and
/// one shared probability model.
pub fn waterfill_allocate(network: &TransportNetwork, behavior: &BehavioralModel) -> Result<WaterfillTrace> {
    check_network(network)?;
    let targets = network.targets();
    let order = activation_order(targets);

    let mut thresholds = ThresholdTable::default();
    for (a, &i) in order.iter().enumerate() {
        for &j in &order[a + 1..] {
            thresholds
                .entries
                .insert((i, j), threshold(&targets[i], &targets[j], behavior)?);
        }
    }
    let breakpoints: Vec<f64> = order
        .iter()
        .enumerate()
        .map(|(b, &j)| order[..b].iter().fold(0.0, |acc, &i| acc + thresholds.entries[&(i, j)]))
        .collect();

    let budget = network.total_supply();
    let (final_aggregates, water_level) = fill(targets, behavior, budget)?;

    let mut amounts = vec![0.0; network.edge_count()];
    let mut before = vec![0.0; targets.len()];
    let mut cumulative = 0.0;
    let last = network.sources().len() - 1;
    for (y, s) in network.sources().iter().enumerate() {
        cumulative += s.supply_upper;
        let after = if y == last {
            final_aggregates.clone()
        } else {
            fill(targets, behavior, cumulative)?.0
        };
        for &k in network.source_edges(y) {
            let x = network.edges()[k].target;
            amounts[k] = (after[x] - before[x]).max(0.0);
        }
        before = after;
    }

    Ok(WaterfillTrace {
        activation_order: order,
        breakpoints,
        thresholds,
        final_aggregates,
        water_level,
        per_source_plan: AllocationPlan::from_clamped(network, amounts),
    })
}

/// Number of targets that receive resources in the water-filling solution.
pub fn active_target_count(network: &TransportNetwork, behavior: &BehavioralModel) -> Result<usize> {
    check_network(network)?;
    let (agg, _) = fill(network.targets(), behavior, network.total_supply())?;
    Ok(agg.iter().filter(|&&a| a > 0.0).count())
}

/// Splits `budget` over `targets` so that every funded target sits at the
/// same marginal perceived cost. Returns the per-target totals and the
/// common marginal level.
pub fn super_source_allocation(
    targets: &[TargetSpec],
    behavior: &BehavioralModel,
    budget: f64,
) -> Result<(Vec<f64>, f64)> {
    if !(budget >= 0.0) || !budget.is_finite() {
        return Err(Error::Domain(format!(
            "budget must be finite and nonnegative, got {budget}"
        )));
    }
    fill(targets, behavior, budget)
}

fn fill(targets: &[TargetSpec], behavior: &BehavioralModel, budget: f64) -> Result<(Vec<f64>, f64)> {
    let top = targets
        .iter()
        .map(|t| marginal_unchecked(t, behavior, 0.0))
        .fold(f64::INFINITY, f64::min);
    if budget <= 0.0 {
        return Ok((vec![0.0; targets.len()], top));
    }
    // level = -exp(u); larger u means a more negative level and less water
    let total = |u: f64| -> Result<f64> {
        let level = -u.exp();
        let mut sum = 0.0;
        for t in targets {
            sum += invert_marginal(t, behavior, level)?;
        }
        Ok(sum)
    };
    let u_top = (-top).ln();
    let mut width = 1.0;
    let mut u_low = u_top - width;
    while total(u_low)? < budget {
        width *= 2.0;
        u_low = u_top - width;
        if width > 1e6 {
            return Err(Error::Domain(format!(
                "could not bracket water level for budget {budget}"
            )));
        }
    }
    // bisect on u with total(u) decreasing; the low end keeps total >= budget
    let mut lo = u_low;
    let mut hi = u_top;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid)? >= budget {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let level = -lo.exp();
    let mut agg = targets
        .iter()
        .map(|t| invert_marginal(t, behavior, level))
        .collect::<Result<Vec<f64>>>()?;
    let sum: f64 = agg.iter().sum();
    if sum > 0.0 {
        let scale = budget / sum;
        for a in &mut agg {
            *a *= scale;
        }
    }
    Ok((agg, level))
}

/// Smallest total at which `target`'s marginal reaches `level`, or 0 if it
/// is already above `level` with nothing received.
fn invert_marginal(target: &TargetSpec, behavior: &BehavioralModel, level: f64) -> Result<f64> {
    let gap = |t: f64| marginal_unchecked(target, behavior, t) - level;
    if gap(0.0) >= 0.0 {
        return Ok(0.0);
    }
    let hi = expand_upper(gap, 1.0)?;
    Ok(bisect_increasing(gap, 0.0, hi, 0.0))
}

fn activation_order(targets: &[TargetSpec]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| targets[b].loss_value.total_cmp(&targets[a].loss_value));
    order
}

fn check_pair(i: &TargetSpec, j: &TargetSpec) -> Result<()> {
    if !(i.loss_value > j.loss_value) {
        return Err(Error::Precondition(format!(
            "strict loss ordering required: U({}) = {} must exceed U({}) = {}",
            i.id, i.loss_value, j.id, j.loss_value
        )));
    }
    if i.prob_model.family() != j.prob_model.family() {
        return Err(Error::Precondition(format!(
            "targets {} and {} use different probability families",
            i.id, j.id
        )));
    }
    Ok(())
}

fn check_network(network: &TransportNetwork) -> Result<()> {
    if !network.is_complete() {
        return Err(Error::Precondition(
            "water-filling requires a complete transport network".into(),
        ));
    }
    let targets = network.targets();
    let order = activation_order(targets);
    for w in order.windows(2) {
        if targets[w[0]].loss_value <= targets[w[1]].loss_value {
            return Err(Error::Precondition(format!(
                "water-filling needs strictly ordered loss values; targets {} and {} tie at {}",
                targets[w[0]].id, targets[w[1]].id, targets[w[0]].loss_value
            )));
        }
    }
    let model = targets[0].prob_model;
    if let Some(t) = targets.iter().find(|t| t.prob_model != model) {
        return Err(Error::Precondition(format!(
            "water-filling needs one shared probability model; target {} differs from {}",
            t.id, targets[0].id
        )));
    }
    Ok(())
}
