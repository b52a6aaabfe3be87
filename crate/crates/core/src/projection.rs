//! Euclidean projection onto `{x >= 0, lo <= Σ x <= hi}`.
//!
//! When the clipped point already has an admissible sum it is the answer.
//! Otherwise the sum constraint is active at the violated bound `b` and the
//! projection is `max(v - θ, 0)` with `θ` chosen so the entries sum to `b`.

/// Projects `v` onto the nonnegative vectors whose sum lies in `[lo, hi]`.
///
/// `hi` may be infinite. Requires `0 <= lo <= hi`.
pub fn project_capped_simplex(v: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    debug_assert!(lo >= 0.0 && lo <= hi);
    let clipped: Vec<f64> = v.iter().map(|&a| a.max(0.0)).collect();
    let sum: f64 = clipped.iter().sum();
    if sum <= hi && sum >= lo {
        return clipped;
    }
    let bound = if sum > hi { hi } else { lo };
    if bound <= 0.0 {
        return vec![0.0; v.len()];
    }
    let theta = simplex_shift(v, bound);
    v.iter().map(|&a| (a - theta).max(0.0)).collect()
}

/// Shift `θ` with `Σ max(v_i - θ, 0) = bound`, for `bound > 0`.
fn simplex_shift(v: &[f64], bound: f64) -> f64 {
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut theta = 0.0;
    for (k, &a) in sorted.iter().enumerate() {
        prefix += a;
        let candidate = (prefix - bound) / (k + 1) as f64;
        if a > candidate {
            theta = candidate;
        } else {
            break;
        }
    }
    theta
}

/// Largest amount by which `x` violates `{x >= 0, lo <= Σ x <= hi}`.
pub(crate) fn violation(x: &[f64], lo: f64, hi: f64) -> f64 {
    let neg = x.iter().fold(0.0f64, |m, &a| m.max(-a));
    let s: f64 = x.iter().sum();
    neg.max(s - hi).max(lo - s).max(0.0)
}
