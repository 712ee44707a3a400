//! Statistical helpers: one-sample Kolmogorov–Smirnov and chi-square
//! goodness-of-fit tests, the asymptotic Kolmogorov distribution, a normal
//! CDF, least-squares fits, and a 64-bit seed mixer.
//!
//! Everything here is dependency-free on purpose: the tests are classical,
//! the accuracy demands are modest and documented per function, and keeping
//! them local makes the p-value path auditable end to end.

#[cfg(test)]
use crate::tol;

/// SplitMix64 finalizer. Used to derive independent per-replica seeds from
/// a master seed; the full mix (add + two xor-shift-multiply rounds) is the
/// reference constant set from Steele et al.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for replica `index` derived from `master`. Distinct indices give
/// decorrelated ChaCha streams; the mapping is stable across runs and
/// platforms, which is what makes reports byte-reproducible.
pub fn replica_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Error function via the Abramowitz–Stegun 7.1.26 polynomial,
/// absolute error below 1.5e-7. Sufficient here: the only consumer is the
/// Wilson–Hilferty chi-square approximation, whose own error dominates.
fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.327_591_1 * x);
    let poly = t
        * (0.254_829_592
            + t * (-0.284_496_736 + t * (1.421_413_741 + t * (-1.453_152_027 + t * 1.061_405_429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2))
}

/// Survival function `Q(z) = P(K > z)` of the asymptotic Kolmogorov
/// distribution, absolute error ≤ [`tol::KOLMOGOROV_CDF_ABS`].
///
/// Two complementary expansions are used: the Jacobi-theta form for small
/// `z` (where the alternating series loses all precision) and the
/// alternating exponential series elsewhere.
pub fn kolmogorov_sf(z: f64) -> f64 {
    if z <= 0.0 {
        return 1.0;
    }
    if z < 1.18 {
        // K(z) = sqrt(2π)/z · Σ_{k≥1} exp(−(2k−1)²π²/(8z²))
        let f = std::f64::consts::PI * std::f64::consts::PI / (8.0 * z * z);
        let mut cdf = 0.0;
        for k in 1..=20u32 {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * f).exp();
            cdf += term;
            if term < 1e-14 * cdf.max(1e-300) {
                break;
            }
        }
        cdf *= (2.0 * std::f64::consts::PI).sqrt() / z;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        // Q(z) = 2 Σ_{k≥1} (−1)^{k−1} exp(−2k²z²)
        let mut sf = 0.0;
        for k in 1..=20u32 {
            let kk = (k * k) as f64;
            let term = (-2.0 * kk * z * z).exp();
            if k % 2 == 1 {
                sf += term;
            } else {
                sf -= term;
            }
            if term < 1e-14 {
                break;
            }
        }
        (2.0 * sf).clamp(0.0, 1.0)
    }
}

/// Result of a one-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
}

/// One-sample KS test of `sample` against the continuous CDF `cdf`.
/// The p-value is asymptotic: `Q(√n · D)`.
pub fn ks_test<F: Fn(f64) -> f64>(sample: &[f64], cdf: F) -> KsResult {
    assert!(!sample.is_empty(), "KS test needs a non-empty sample");
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).expect("KS sample contains NaN"));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf(n.sqrt() * d),
        n: xs.len(),
    }
}

/// Result of a chi-square goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct Chi2Result {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: usize,
}

/// Chi-square test of observed counts against expected counts.
/// Degrees of freedom default to `bins − 1`; the p-value uses the
/// Wilson–Hilferty cube-root normal approximation (absolute error a few
/// 1e-3, ample for pass/fail thresholds of 0.01).
pub fn chi_square_test(observed: &[f64], expected: &[f64]) -> Chi2Result {
    assert_eq!(observed.len(), expected.len(), "bin count mismatch");
    assert!(observed.len() >= 2, "chi-square needs at least two bins");
    let statistic: f64 = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            assert!(e > 0.0, "expected counts must be positive");
            (o - e) * (o - e) / e
        })
        .sum();
    let dof = observed.len() - 1;
    Chi2Result {
        statistic,
        p_value: chi_square_sf(statistic, dof),
        dof,
    }
}

/// Survival function of the chi-square distribution with `dof` degrees of
/// freedom, Wilson–Hilferty approximation.
pub fn chi_square_sf(x: f64, dof: usize) -> f64 {
    assert!(dof >= 1, "dof must be at least 1");
    let k = dof as f64;
    let c = 2.0 / (9.0 * k);
    let z = ((x / k).cbrt() - (1.0 - c)) / c.sqrt();
    (1.0 - normal_cdf(z)).clamp(0.0, 1.0)
}

/// Ordinary least squares fit `y ≈ slope·x + intercept`.
/// Returns `(slope, intercept, rmse)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2, "need at least two points to fit a line");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    assert!(sxx > 0.0, "degenerate abscissae");
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let rmse = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (slope * x + intercept);
            r * r
        })
        .sum::<f64>()
        / n)
        .sqrt();
    (slope, intercept, rmse)
}

/// Fit a geometric decay rate to an error sequence by regressing
/// `log e_n` on `n` over the strictly positive entries.
/// Returns `None` when fewer than two entries are positive (the sequence
/// is already at machine zero, so no rate is identifiable).
pub fn geometric_rate(errors: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .enumerate()
        .filter(|(_, &e)| e > 0.0)
        .map(|(i, &e)| (i as f64, e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
    let (slope, _, _) = linear_fit(&xs, &ys);
    Some(slope.exp())
}
