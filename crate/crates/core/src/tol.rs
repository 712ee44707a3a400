//! Numeric tolerances used across the crate.
//!
//! Every hard-coded threshold in the library points back here so that the
//! accuracy contract is visible in one place.

/// Relative residual demanded of Perron eigenpairs: `‖Mv − λv‖∞ / λ`.
pub const EIGEN_RESIDUAL: f64 = 1e-12;

/// Iteration cap for the power method.
pub const POWER_ITERATION_CAP: usize = 1_000_000;

/// Tolerance on checks that must hold exactly up to eigen-solve error
/// (stochasticity of rows, stationarity, normalization column sums).
pub const STOCHASTICITY: f64 = 1e-10;

/// Agreement demanded between two independent evaluations of the same
/// exact quantity (dual-route checks).
pub const DUAL_ROUTE: f64 = 1e-10;

/// Agreement between the closed-form conditionally invariant density and
/// the one recovered by iterating the open operator.
pub const DENSITY_ITERATION: f64 = 1e-10;

/// Default pass threshold for exact limit checks evaluated at finite depth.
pub const LIMIT_CHECK: f64 = 1e-8;

/// Pass threshold for the equilibrium-conditioning limit, which converges
/// more slowly than the one-block limits.
pub const CONDITIONED_LIMIT: f64 = 1e-6;

/// Word-enumeration cap: enumerating more words than this is refused.
pub const WORD_ENUMERATION_CAP: u128 = 10_000_000;

/// Work cap for the cluster-constant composition sums.
pub const COMPOSITION_WORK_CAP: u128 = 10_000_000;

/// Largest admissible product-system alphabet.
pub const PRODUCT_ALPHABET_CAP: usize = 10_000;

/// Absolute accuracy of the asymptotic Kolmogorov distribution evaluation.
pub const KOLMOGOROV_CDF_ABS: f64 = 1e-8;

/// Pooled cluster count below which limit-law statistics are flagged
/// underpowered rather than trusted.
pub const UNDERPOWERED_CLUSTERS: usize = 200;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerances_are_ordered_sanely() {
        assert!(EIGEN_RESIDUAL < STOCHASTICITY);
        assert!(STOCHASTICITY <= DUAL_ROUTE);
        assert!(DUAL_ROUTE < LIMIT_CHECK);
        assert!(LIMIT_CHECK < CONDITIONED_LIMIT);
        assert!(KOLMOGOROV_CDF_ABS < 1e-6);
    }
}
