//! Small result types shared by the exact limit and identity checks.

use serde::Serialize;

use crate::stats;

/// Outcome of comparing a finite-depth sequence against its limit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    /// The finite-depth values, in depth order.
    pub values: Vec<f64>,
    /// Absolute errors `|value − target|`.
    pub errors: Vec<f64>,
    /// The limit being approached.
    pub target: f64,
    /// Geometric rate fitted to the positive errors, when identifiable.
    pub fitted_rate: Option<f64>,
    /// Error at the deepest evaluation.
    pub final_error: f64,
    /// Pass threshold applied to `final_error`.
    pub threshold: f64,
    /// Final error below threshold and errors eventually non-increasing.
    pub pass: bool,
}

impl ConvergenceReport {
    /// Builds the report; "eventually monotone" means the last
    /// `min(len, 5)` errors are non-increasing up to additive noise of
    /// 1e-13 (sequences at machine zero jitter at that scale).
    pub fn evaluate(values: Vec<f64>, target: f64, threshold: f64) -> Self {
        assert!(!values.is_empty());
        let errors: Vec<f64> = values.iter().map(|v| (v - target).abs()).collect();
        let final_error = *errors.last().unwrap();
        let tail = errors.len().saturating_sub(5.min(errors.len()));
        let monotone = errors[tail..]
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-13);
        Self {
            fitted_rate: stats::geometric_rate(&errors),
            final_error,
            threshold,
            pass: final_error <= threshold && monotone,
            values,
            errors,
            target,
        }
    }
}

/// Outcome of an identity that must hold exactly up to numerical error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub lhs: f64,
    pub rhs: f64,
    /// `|lhs − rhs|`.
    pub residual: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl IdentityReport {
    pub fn new(lhs: f64, rhs: f64, tolerance: f64) -> Self {
        let residual = (lhs - rhs).abs();
        Self {
            lhs,
            rhs,
            residual,
            tolerance,
            pass: residual <= tolerance,
        }
    }
}

/// Outcome of fitting relativised correlation decay across test words.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    /// Correlation magnitudes per word, indexed `[word][r−1]`.
    pub correlations: Vec<Vec<f64>>,
    /// Fitted geometric rate per word (`None` when at machine zero).
    pub rates: Vec<Option<f64>>,
    /// Fitted prefactor per word, after removing the predicted scale.
    pub prefactors: Vec<f64>,
    /// All identifiable rates below 1.
    pub geometric: bool,
    /// Prefactors within a factor of 10 of each other.
    pub uniform: bool,
    pub pass: bool,
}

/// Exact finite-depth cluster constants against their limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterConstants {
    pub m: usize,
    pub n: usize,
    pub window: usize,
    /// Normalized constant `C̃_m(n)` (the `μ(Δ_n)^{-1}`-scaled sum).
    pub c_tilde: f64,
    /// Unnormalized constant `C_m(n)` (the `e^{-nP_Δ}`-scaled sum).
    pub c_m: f64,
    /// Limit of `C̃_m(n)`: `θ^{m−1}`.
    pub c_tilde_limit: f64,
    /// Limit of `C_m(n)`: `c·θ^{m−1}`.
    pub c_m_limit: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn convergence_report_passes_on_decay() {
        let values: Vec<f64> = (0..20).map(|n| 2.0 + 0.5f64.powi(n)).collect();
        let r = ConvergenceReport::evaluate(values, 2.0, 1e-5);
        assert!(r.pass);
        assert!((r.fitted_rate.unwrap() - 0.5).abs() < 1e-6);
        assert!(r.final_error < 1e-5);
    }

    #[test]
    fn convergence_report_passes_on_exact_sequence() {
        let r = ConvergenceReport::evaluate(vec![1.0; 10], 1.0, 1e-8);
        assert!(r.pass);
        assert_eq!(r.final_error, 0.0);
        assert_eq!(r.fitted_rate, None);
    }

    #[test]
    fn convergence_report_fails_on_miss() {
        let r = ConvergenceReport::evaluate(vec![1.0, 1.1, 1.2], 2.0, 1e-8);
        assert!(!r.pass);
    }

    #[test]
    fn identity_report_thresholds() {
        assert!(IdentityReport::new(1.0, 1.0 + 1e-12, 1e-10).pass);
        assert!(!IdentityReport::new(1.0, 1.001, 1e-10).pass);
    }
}
