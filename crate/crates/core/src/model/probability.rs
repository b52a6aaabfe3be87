//! Attack success probability as a function of the total resources a target
//! receives.

use crate::error::{Error, Result};

/// Probability family shared by a target. Both families are strictly
/// decreasing and log-convex in the received amount.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AttackProbabilityModel {
    /// `p(t) = exp(-t - r)`, `r > 0`.
    Exponential { baseline: f64 },
    /// `p(t) = 1 / (t + r)`, `r > 1`.
    Reciprocal { baseline: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbabilityFamily {
    Exponential,
    Reciprocal,
}

impl AttackProbabilityModel {
    pub fn exponential(baseline: f64) -> Result<Self> {
        let m = AttackProbabilityModel::Exponential { baseline };
        m.validate()?;
        Ok(m)
    }

    pub fn reciprocal(baseline: f64) -> Result<Self> {
        let m = AttackProbabilityModel::Reciprocal { baseline };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AttackProbabilityModel::Exponential { baseline } if !(baseline > 0.0) || !baseline.is_finite() => {
                Err(Error::Domain(format!(
                    "exponential baseline must be positive and finite, got {baseline}"
                )))
            }
            AttackProbabilityModel::Reciprocal { baseline } if !(baseline > 1.0) || !baseline.is_finite() => {
                Err(Error::Domain(format!(
                    "reciprocal baseline must exceed 1 and be finite, got {baseline}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn family(&self) -> ProbabilityFamily {
        match self {
            AttackProbabilityModel::Exponential { .. } => ProbabilityFamily::Exponential,
            AttackProbabilityModel::Reciprocal { .. } => ProbabilityFamily::Reciprocal,
        }
    }

    pub fn baseline(&self) -> f64 {
        match *self {
            AttackProbabilityModel::Exponential { baseline } | AttackProbabilityModel::Reciprocal { baseline } => {
                baseline
            }
        }
    }

    pub fn probability(&self, total_received: f64) -> Result<f64> {
        check_total(total_received)?;
        Ok(self.p(total_received))
    }

    /// `-ln p(t)`, evaluated without forming `p` first.
    pub fn neg_log(&self, total_received: f64) -> Result<f64> {
        check_total(total_received)?;
        Ok(self.neg_log_unchecked(total_received))
    }

    pub(crate) fn p(&self, t: f64) -> f64 {
        match *self {
            AttackProbabilityModel::Exponential { baseline } => (-t - baseline).exp(),
            AttackProbabilityModel::Reciprocal { baseline } => 1.0 / (t + baseline),
        }
    }

    pub(crate) fn neg_log_unchecked(&self, t: f64) -> f64 {
        match *self {
            AttackProbabilityModel::Exponential { baseline } => t + baseline,
            AttackProbabilityModel::Reciprocal { baseline } => (t + baseline).ln(),
        }
    }

    /// `p'(t) / p(t)`, always negative.
    pub(crate) fn log_derivative(&self, t: f64) -> f64 {
        match *self {
            AttackProbabilityModel::Exponential { .. } => -1.0,
            AttackProbabilityModel::Reciprocal { baseline } => -1.0 / (t + baseline),
        }
    }

    /// `d/dt ln(-p'/p) = (p p'' - p'^2) / (p p')`, which is `<= 0` for
    /// log-convex `p`.
    pub(crate) fn log_derivative_slope(&self, t: f64) -> f64 {
        match *self {
            AttackProbabilityModel::Exponential { .. } => 0.0,
            AttackProbabilityModel::Reciprocal { baseline } => -1.0 / (t + baseline),
        }
    }
}

fn check_total(t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::Domain(format!(
            "total received resources must be nonnegative, got {t}"
        )));
    }
    Ok(())
}

/// Free-function form of [`AttackProbabilityModel::probability`].
pub fn attack_probability(model: &AttackProbabilityModel, total_received: f64) -> Result<f64> {
    model.probability(total_received)
}
