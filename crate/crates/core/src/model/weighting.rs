//! Prelec probability weighting.
//!
//! `w(p) = exp(-(-ln p)^γ)` with `γ ∈ (0, 1]`. At `γ = 1` the map is the
//! identity; for `γ < 1` small probabilities are overweighted and large ones
//! underweighted, with the crossover at the fixed point `p = 1/e`.

use crate::error::{Error, Result};

/// Degree of probability misperception of the planner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BehavioralModel {
    gamma: f64,
}

impl BehavioralModel {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::Domain(format!("gamma must lie in (0, 1], got {gamma}")));
        }
        Ok(Self { gamma })
    }

    /// The undistorted planner, `γ = 1`.
    pub fn rational() -> Self {
        Self { gamma: 1.0 }
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn weight(&self, p: f64) -> Result<f64> {
        prelec_weight(p, self.gamma)
    }

    /// Weight expressed through `t = -ln p`, which avoids the round trip
    /// through `exp`/`ln` when the caller already has the negative log.
    pub(crate) fn weight_of_neg_log(&self, neg_log_p: f64) -> f64 {
        (-neg_log_p.powf(self.gamma)).exp()
    }
}

/// Evaluates `exp(-(-ln p)^γ)`, continuously extended with `w(0) = 0` and
/// `w(1) = 1`.
pub fn prelec_weight(p: f64, gamma: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability must lie in [0, 1], got {p}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::Domain(format!("gamma must lie in (0, 1], got {gamma}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    if gamma == 1.0 {
        return Ok(p);
    }
    Ok((-(-p.ln()).powf(gamma)).exp())
}
