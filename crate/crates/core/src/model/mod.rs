//! Domain types and the mathematical kernel shared by every solver.

mod loss;
mod network;
mod plan;
mod probability;
mod weighting;

pub use loss::{marginal_perceived_cost, op_b_objective, perceived_loss, source_utility, true_loss};
pub(crate) use loss::{marginal_unchecked, perceived_loss_of_aggregates, source_utility_of_amounts};
pub use network::{Edge, LinearUtility, SourceSpec, TargetSpec, TransportNetwork};
pub use plan::AllocationPlan;
pub use probability::{attack_probability, AttackProbabilityModel, ProbabilityFamily};
pub use weighting::{prelec_weight, BehavioralModel};

/// One row of a solver's convergence trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    /// Projected-gradient norm for the centralized solver, max edge
    /// disagreement `|π^t - π^s|` for ADMM.
    pub primal_residual: f64,
    pub perceived_loss: f64,
    pub objective: f64,
}

/// Outcome of a solve, with the objective decomposed into its parts.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub plan: AllocationPlan,
    pub true_loss: f64,
    pub perceived_loss: f64,
    /// `Σ τ_y c_xy π_xy`; zero for the loss-only problem.
    pub source_utility: f64,
    pub iterations: usize,
    pub residual_trace: Vec<TraceRecord>,
    pub converged: bool,
}

impl SolveReport {
    pub fn objective(&self) -> f64 {
        self.perceived_loss - self.source_utility
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    fn family() -> impl Strategy<Value = AttackProbabilityModel> {
        prop_oneof![
            (0.05f64..5.0).prop_map(|r| AttackProbabilityModel::Exponential { baseline: r }),
            (1.05f64..6.0).prop_map(|r| AttackProbabilityModel::Reciprocal { baseline: r }),
        ]
    }

    proptest! {
        #[test]
        fn probability_strictly_decreasing(m in family(), a in 0.0f64..20.0, d in 1e-3f64..5.0) {
            prop_assert!(m.probability(a).unwrap() > m.probability(a + d).unwrap());
        }

        #[test]
        fn log_probability_midpoint_convex(m in family(), a in 0.0f64..20.0, d in 1e-3f64..5.0) {
            let l = |t: f64| m.probability(t).unwrap().ln();
            prop_assert!(l(a + d) <= 0.5 * (l(a) + l(a + 2.0 * d)) + 1e-10);
        }

        #[test]
        fn marginal_negative_and_increasing(
            m in family(),
            u in 0.1f64..50.0,
            gamma in 0.05f64..=1.0,
            t in 0.0f64..15.0,
            d in 1e-3f64..3.0,
        ) {
            let target = TargetSpec::new("t", u, m);
            let b = BehavioralModel::new(gamma).unwrap();
            let m0 = marginal_perceived_cost(&target, &b, t).unwrap();
            let m1 = marginal_perceived_cost(&target, &b, t + d).unwrap();
            prop_assert!(m0 < 0.0);
            prop_assert!(m1 > m0);
        }

        #[test]
        fn marginal_ordered_by_loss_value(
            m in family(),
            u in 0.1f64..50.0,
            ratio in 1.01f64..10.0,
            gamma in 0.05f64..=1.0,
            t in 0.0f64..10.0,
        ) {
            let b = BehavioralModel::new(gamma).unwrap();
            let hi = TargetSpec::new("hi", u * ratio, m);
            let lo = TargetSpec::new("lo", u, m);
            prop_assert!(
                marginal_perceived_cost(&hi, &b, t).unwrap() < marginal_perceived_cost(&lo, &b, t).unwrap()
            );
        }

        #[test]
        fn marginal_matches_central_difference(
            m in family(),
            u in 0.5f64..20.0,
            gamma in 0.2f64..=1.0,
            t in 0.01f64..8.0,
        ) {
            let target = TargetSpec::new("t", u, m);
            let b = BehavioralModel::new(gamma).unwrap();
            let h = 1e-5;
            let fd = (loss::target_cost(&target, &b, t + h) - loss::target_cost(&target, &b, t - h)) / (2.0 * h);
            let an = marginal_perceived_cost(&target, &b, t).unwrap();
            prop_assert!(((an - fd) / an).abs() <= 1e-5, "an={} fd={}", an, fd);
        }
    }

    #[test]
    fn perceived_cost_strictly_convex_on_grid() {
        let h = 1e-3;
        let models = [
            AttackProbabilityModel::Exponential { baseline: 1.0 },
            AttackProbabilityModel::Exponential { baseline: 2.5 },
            AttackProbabilityModel::Reciprocal { baseline: 1.5 },
            AttackProbabilityModel::Reciprocal { baseline: 3.0 },
        ];
        for m in models {
            for gamma in [0.3, 0.5, 0.8, 1.0] {
                let target = TargetSpec::new("t", 1.0, m);
                let b = BehavioralModel::new(gamma).unwrap();
                let f = |t: f64| loss::target_cost(&target, &b, t);
                for k in 1..=1000 {
                    let t = k as f64 * 0.01;
                    let d2 = f(t + h) - 2.0 * f(t) + f(t - h);
                    assert!(d2 > 0.0, "{m:?} gamma={gamma} t={t}: {d2}");
                }
            }
        }
    }
}
