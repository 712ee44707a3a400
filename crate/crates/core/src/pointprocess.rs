//! Hitting and entrance point processes extracted from orbits, their
//! cluster/mark decomposition, and statistical tests against the limiting
//! marked Poisson law.
//!
//! A hit at time `k ≥ 1` means the orbit's symbols `x_k..x_{k+n−1}` all lie
//! in the sub-alphabet; rescaling time by `c_n = e^{nP_Δ}` turns the hit
//! process into a point process whose law converges to a marked Poisson
//! process: cluster arrivals at intensity `λ = (1−β)c` carrying geometric
//! marks `π_j = (1−β)β^{j−1}`. Entrances (hits not preceded by a hit)
//! converge to the unmarked Poisson process at the same intensity.
//!
//! The moment side: for a compactly supported test function `g`, the
//! smoothed hit count `X_n(g) = Σ_k χ(hit at k)·g(k·c_n)` has limiting
//! moment generating function
//! `F_g(z) = exp{Σ_m C_m ∫(e^{zg(t)}−1)^m dt}` with `C_m = c·θ^{m−1}`,
//! equal to the marked-Poisson form `exp{λ Σ_j π_j ∫(e^{zjg(t)}−1)dt}`.
//! Both series are implemented and must agree; `identify_params` converts
//! between the `(c, θ)` and `(λ, π)` parameterizations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::sft::SubAlphabet;
use crate::stats::{self, Chi2Result, KsResult};
use crate::subsystem::MarkedPoissonParams;
use crate::tol;

/// Rate mismatch allowed before a limit-law check fails.
pub const RATE_TOLERANCE: f64 = 0.03;
/// P-value below which a goodness-of-fit check fails.
pub const P_THRESHOLD: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PointProcessError {
    #[error("orbit of length {length} cannot host an {n}-block hit at k = 1")]
    OrbitTooShort { length: usize, n: usize },
    #[error("cluster-constant estimate for m = {m} is {value}, log fit needs positives")]
    NonPositiveEstimate { m: usize, value: f64 },
    #[error("test function table is invalid (need ≥ 2 finite knots, increasing x, y ≥ 0)")]
    InvalidTestFunction,
    #[error("quadrature produced a non-finite value")]
    QuadratureFailure,
}

/// Block length, time rescale, and cluster window for one extraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterConfig {
    /// Block length `n ≥ 1`.
    pub n: usize,
    /// Time rescale `c_n = e^{nP_Δ} ∈ (0,1)`.
    pub c_n: f64,
    /// Maximal inter-hit gap grouped into one cluster.
    pub window: usize,
}

impl ClusterConfig {
    /// Default window `ℓ(n) = n`.
    pub fn new(n: usize, p_delta: f64) -> Self {
        Self::with_window(n, p_delta, n)
    }

    pub fn with_window(n: usize, p_delta: f64, window: usize) -> Self {
        assert!(n >= 1 && window >= 1);
        let c_n = (n as f64 * p_delta).exp();
        assert!(c_n > 0.0 && c_n < 1.0, "rescale needs P_Δ < 0");
        Self { n, c_n, window }
    }
}

/// One cluster of hits: rescaled arrival time and number of hits carried.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cluster {
    pub start: f64,
    pub mark: usize,
}

/// Hit, entrance, and cluster processes read off one orbit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointProcessSample {
    /// Unrescaled hit times, increasing, `1 ≤ k ≤ T − n`.
    pub hits: Vec<u64>,
    /// Hits not preceded by an n-block (position `k−1`, including `k=1`
    /// against the block at position 0).
    pub entrances: Vec<u64>,
    /// Maximal runs of hits with inter-hit gaps ≤ window.
    pub clusters: Vec<Cluster>,
    pub orbit_length: u64,
    pub config: ClusterConfig,
}

impl PointProcessSample {
    /// Rescaled observation length `(T − n)·c_n`.
    pub fn rescaled_length(&self) -> f64 {
        (self.orbit_length - self.config.n as u64) as f64 * self.config.c_n
    }

    /// Rescaled gaps between consecutive cluster arrivals.
    pub fn cluster_gaps(&self) -> Vec<f64> {
        self.clusters
            .windows(2)
            .map(|w| w[1].start - w[0].start)
            .collect()
    }

    /// Rescaled gaps between consecutive entrances.
    pub fn entrance_gaps(&self) -> Vec<f64> {
        self.entrances
            .windows(2)
            .map(|w| (w[1] - w[0]) as f64 * self.config.c_n)
            .collect()
    }

    /// Smoothed hit count `X_n(g) = Σ_{k ∈ hits} g(k·c_n)`.
    pub fn weighted_hit_sum(&self, g: &TestFunction) -> f64 {
        let end = g.support_end();
        let mut sum = 0.0;
        for &k in &self.hits {
            let t = k as f64 * self.config.c_n;
            if t > end {
                break;
            }
            sum += g.evaluate(t);
        }
        sum
    }
}

/// Groups an increasing hit list into entrances and clusters.
/// `block0` is whether positions `0..n` form a block (it gates the `k = 1`
/// entrance but is itself never a hit).
fn assemble(
    hits: Vec<u64>,
    block0: bool,
    orbit_length: u64,
    config: ClusterConfig,
) -> PointProcessSample {
    let mut entrances = Vec::new();
    let mut clusters: Vec<Cluster> = Vec::new();
    let mut prev: Option<u64> = None;
    for &k in &hits {
        let preceded = match prev {
            Some(p) => p == k - 1,
            None => k == 1 && block0,
        };
        if !preceded {
            entrances.push(k);
        }
        match clusters.last_mut() {
            Some(c) if k - prev.unwrap() <= config.window as u64 => c.mark += 1,
            _ => clusters.push(Cluster {
                start: k as f64 * config.c_n,
                mark: 1,
            }),
        }
        prev = Some(k);
    }
    PointProcessSample {
        hits,
        entrances,
        clusters,
        orbit_length,
        config,
    }
}

/// Extracts the sample from a membership stream (`true` = symbol in Δ).
/// Runs in constant space over the stream via a run-length counter; hits
/// are recorded for `1 ≤ k ≤ T − n` only.
pub fn extract_membership(
    membership: impl IntoIterator<Item = bool>,
    config: ClusterConfig,
) -> Result<PointProcessSample, PointProcessError> {
    let n = config.n;
    let mut hits = Vec::new();
    let mut block0 = false;
    let mut streak = 0u64;
    let mut length = 0u64;
    for inside in membership {
        let i = length;
        length += 1;
        streak = if inside { streak + 1 } else { 0 };
        if i + 1 >= n as u64 && streak >= n as u64 {
            let k = i + 1 - n as u64;
            if k == 0 {
                block0 = true;
            } else {
                hits.push(k);
            }
        }
    }
    if length <= n as u64 {
        return Err(PointProcessError::OrbitTooShort {
            length: length as usize,
            n,
        });
    }
    Ok(assemble(hits, block0, length, config))
}

/// Extracts the sample from a materialized orbit.
pub fn extract(
    orbit: &[u16],
    sub: &SubAlphabet,
    config: ClusterConfig,
) -> Result<PointProcessSample, PointProcessError> {
    let mask = sub.mask();
    extract_membership(orbit.iter().map(|&s| mask[s as usize]), config)
}

/// Pooled cardinalities behind a limit-law test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleSizes {
    pub samples: usize,
    pub hits: u64,
    pub clusters: usize,
    pub entrances: usize,
}

/// Verdict of testing pooled samples against the limiting law.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitTestReport {
    /// Intensity predicted by the solved subsystem.
    pub lambda_target: f64,
    /// Clusters per unit of rescaled observation length.
    pub empirical_lambda: f64,
    /// Entrances per unit of rescaled observation length.
    pub entrance_lambda: f64,
    pub observation_length: f64,
    /// KS of pooled rescaled inter-cluster gaps against Exp(λ).
    pub gap_ks: Option<KsResult>,
    /// KS of pooled rescaled inter-entrance gaps against Exp(λ).
    pub entrance_gap_ks: Option<KsResult>,
    /// Chi-square of the mark histogram against the geometric π,
    /// tail-binned where expected counts drop below 5.
    pub mark_chi_sq: Option<Chi2Result>,
    /// `|ν̂_k − ν_k|` for the default tent function, k = 1, 2.
    pub moment_errors: Vec<f64>,
    /// Monte-Carlo standard errors of `ν̂_k`.
    pub moment_standard_errors: Vec<f64>,
    pub sample_sizes: SampleSizes,
    /// Pooled clusters below the count needed for calibrated p-values.
    pub underpowered: bool,
    pub pass: bool,
}

/// Tests pooled samples against the marked-Poisson limit: rates within
/// [`RATE_TOLERANCE`], KS and chi-square p-values above [`P_THRESHOLD`].
/// Underpowered pools (fewer than 200 clusters) are flagged and never
/// failed. All samples must share one configuration.
pub fn test_limit_law(
    samples: &[PointProcessSample],
    params: &MarkedPoissonParams,
) -> LimitTestReport {
    assert!(!samples.is_empty(), "limit-law test needs samples");
    let config = samples[0].config;
    assert!(
        samples.iter().all(|s| s.config == config),
        "pooled samples must share one configuration"
    );
    let lambda = params.lambda;
    let observation_length: f64 = samples.iter().map(|s| s.rescaled_length()).sum();
    let sizes = SampleSizes {
        samples: samples.len(),
        hits: samples.iter().map(|s| s.hits.len() as u64).sum(),
        clusters: samples.iter().map(|s| s.clusters.len()).sum(),
        entrances: samples.iter().map(|s| s.entrances.len()).sum(),
    };
    let empirical_lambda = sizes.clusters as f64 / observation_length;
    let entrance_lambda = sizes.entrances as f64 / observation_length;

    let exp_cdf = |t: f64| 1.0 - (-lambda * t).exp();
    let gaps: Vec<f64> = samples.iter().flat_map(|s| s.cluster_gaps()).collect();
    let gap_ks = (!gaps.is_empty()).then(|| stats::ks_test(&gaps, exp_cdf));
    let egaps: Vec<f64> = samples.iter().flat_map(|s| s.entrance_gaps()).collect();
    let entrance_gap_ks = (!egaps.is_empty()).then(|| stats::ks_test(&egaps, exp_cdf));

    let mark_chi_sq = mark_histogram_test(samples, params, sizes.clusters);

    let tent = TestFunction::tent();
    let analytic =
        marked_poisson_moments(params, &tent, 2).expect("tent moments are always finite");
    let mut moment_errors = Vec::with_capacity(2);
    let mut moment_standard_errors = Vec::with_capacity(2);
    for k in 1..=2 {
        let (nu_hat, se) = empirical_moment_with_se(samples, &tent, k);
        moment_errors.push((nu_hat - analytic[k]).abs());
        moment_standard_errors.push(se);
    }

    let underpowered = sizes.clusters < tol::UNDERPOWERED_CLUSTERS;
    let rate_ok = |rate: f64| (rate - lambda).abs() <= RATE_TOLERANCE * lambda;
    let p_ok = |p: f64| p > P_THRESHOLD;
    let pass = underpowered
        || (rate_ok(empirical_lambda)
            && rate_ok(entrance_lambda)
            && gap_ks.is_some_and(|ks| p_ok(ks.p_value))
            && entrance_gap_ks.is_some_and(|ks| p_ok(ks.p_value))
            && mark_chi_sq.is_some_and(|chi| p_ok(chi.p_value)));
    LimitTestReport {
        lambda_target: lambda,
        empirical_lambda,
        entrance_lambda,
        observation_length,
        gap_ks,
        entrance_gap_ks,
        mark_chi_sq,
        moment_errors,
        moment_standard_errors,
        sample_sizes: sizes,
        underpowered,
        pass,
    }
}

/// Chi-square of pooled marks against the geometric law, binning the tail
/// at the first mark whose expected count drops below 5 (the tail bin is
/// itself grown backwards until it holds an expected count of 5, so every
/// bin is chi-square-stable).
fn mark_histogram_test(
    samples: &[PointProcessSample],
    params: &MarkedPoissonParams,
    clusters: usize,
) -> Option<Chi2Result> {
    if clusters == 0 {
        return None;
    }
    let total = clusters as f64;
    let beta = params.beta;
    let mut cut = 2usize;
    while total * params.mark_probability(cut) >= 5.0 && cut < 200 {
        cut += 1;
    }
    while cut > 2 && total * beta.powi(cut as i32 - 1) < 5.0 {
        cut -= 1;
    }
    let mut observed = vec![0.0f64; cut];
    for s in samples {
        for c in &s.clusters {
            observed[(c.mark.min(cut)) - 1] += 1.0;
        }
    }
    let mut expected: Vec<f64> = (1..cut)
        .map(|j| total * params.mark_probability(j))
        .collect();
    expected.push(total * beta.powi(cut as i32 - 1));
    Some(stats::chi_square_test(&observed, &expected))
}

/// Monte-Carlo `ν̂_k`: the average of `X_n(g)^k` over samples, `k ∈ {1,2}`.
pub fn empirical_moment(samples: &[PointProcessSample], g: &TestFunction, k: usize) -> f64 {
    empirical_moment_with_se(samples, g, k).0
}

/// [`empirical_moment`] together with its standard error across samples.
pub fn empirical_moment_with_se(
    samples: &[PointProcessSample],
    g: &TestFunction,
    k: usize,
) -> (f64, f64) {
    assert!((1..=2).contains(&k), "Monte-Carlo moments stop at k = 2");
    assert!(!samples.is_empty());
    let powers: Vec<f64> = samples
        .iter()
        .map(|s| s.weighted_hit_sum(g).powi(k as i32))
        .collect();
    let n = powers.len() as f64;
    let mean = powers.iter().sum::<f64>() / n;
    if powers.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = powers.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Continuous, nonnegative, compactly supported test function stored as a
/// piecewise-linear table; zero outside the knot range. Powers integrate
/// exactly segment by segment, so no generic quadrature is needed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestFunction {
    knots: Vec<(f64, f64)>,
}

impl TestFunction {
    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self, PointProcessError> {
        let valid = knots.len() >= 2
            && knots
                .iter()
                .all(|&(x, y)| x.is_finite() && y.is_finite() && y >= 0.0)
            && knots.windows(2).all(|w| w[0].0 < w[1].0);
        if !valid {
            return Err(PointProcessError::InvalidTestFunction);
        }
        Ok(Self { knots })
    }

    /// Tent on `[0,1]` peaking at 1: `∫g = 1/2`, `∫g² = 1/3`.
    pub fn tent() -> Self {
        Self::new(vec![(0.0, 0.0), (0.5, 1.0), (1.0, 0.0)]).unwrap()
    }

    /// Smoothed plateau on `[0,2]`: linear ramps over the first and last
    /// quarter-unit around a unit-height top.
    pub fn plateau() -> Self {
        Self::new(vec![(0.0, 0.0), (0.25, 1.0), (1.75, 1.0), (2.0, 0.0)]).unwrap()
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    pub fn support_end(&self) -> f64 {
        self.knots.last().unwrap().0
    }

    pub fn evaluate(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x < k[0].0 || x > k[k.len() - 1].0 {
            return 0.0;
        }
        let i = k.partition_point(|&(kx, _)| kx <= x);
        if i == k.len() {
            return k[i - 1].1;
        }
        let (x0, y0) = k[i - 1];
        let (x1, y1) = k[i];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Exact `∫ g(t)^r dt`, `r ≥ 1`: on a segment where `g` runs linearly
    /// from `a` to `b` over width `w`, the integral is
    /// `w·(b^{r+1} − a^{r+1})/((r+1)(b−a))`.
    pub fn integral_pow(&self, r: u32) -> f64 {
        assert!(r >= 1);
        self.knots
            .windows(2)
            .map(|seg| {
                let (x0, a) = seg[0];
                let (x1, b) = seg[1];
                let w = x1 - x0;
                if (b - a).abs() < 1e-300 {
                    a.powi(r as i32) * w
                } else {
                    w * (b.powi(r as i32 + 1) - a.powi(r as i32 + 1)) / ((r as f64 + 1.0) * (b - a))
                }
            })
            .sum()
    }
}

/// Coefficient of `z^r g^r` in `(e^{zg} − 1)^m`: the sum over compositions
/// of `r` into `m` positive parts of the product of inverse factorials.
fn exp_minus_one_power_coefficient(r: usize, m: usize) -> f64 {
    let mut inv_fact = vec![1.0f64; r + 1];
    for i in 1..=r {
        inv_fact[i] = inv_fact[i - 1] / i as f64;
    }
    // b[level][total]; level = parts used so far.
    let mut b = vec![0.0f64; r + 1];
    b[0] = 1.0;
    for _ in 0..m {
        let mut next = vec![0.0f64; r + 1];
        for total in 0..=r {
            if b[total] == 0.0 {
                continue;
            }
            for part in 1..=r - total {
                next[total + part] += b[total] * inv_fact[part];
            }
        }
        b = next;
    }
    b[r]
}

/// Turns the log-moment-series coefficients `s_r` into the derivatives
/// `ν_k = (d/dz)^k exp(Σ_r s_r z^r)` at 0.
fn exponentiate_series(s: &[f64], k_max: usize) -> Vec<f64> {
    let mut f = vec![0.0f64; k_max + 1];
    f[0] = 1.0;
    for k in 1..=k_max {
        let mut acc = 0.0;
        for j in 1..=k {
            acc += j as f64 * s[j] * f[k - j];
        }
        f[k] = acc / k as f64;
    }
    let mut factorial = 1.0;
    f.iter()
        .enumerate()
        .map(|(k, &fk)| {
            if k > 0 {
                factorial *= k as f64;
            }
            fk * factorial
        })
        .collect()
}

/// Moments `ν_0..ν_{k_max}` of the limit law from the cluster-constant
/// form `F_g(z) = exp{Σ_m c·θ^{m−1} ∫(e^{zg}−1)^m dt}`, `k_max ≤ 4`.
pub fn analytic_moments(
    c: f64,
    theta: f64,
    g: &TestFunction,
    k_max: usize,
) -> Result<Vec<f64>, PointProcessError> {
    assert!(k_max <= 4, "analytic expansion stops at k = 4");
    let mut s = vec![0.0f64; k_max + 1];
    for r in 1..=k_max {
        let integral = g.integral_pow(r as u32);
        if !integral.is_finite() {
            return Err(PointProcessError::QuadratureFailure);
        }
        let weight: f64 = (1..=r)
            .map(|m| c * theta.powi(m as i32 - 1) * exp_minus_one_power_coefficient(r, m))
            .sum();
        s[r] = integral * weight;
    }
    Ok(exponentiate_series(&s, k_max))
}

/// The same moments from the marked-Poisson form
/// `exp{λ Σ_j π_j ∫(e^{zjg}−1)dt}`: here `s_r = λ·I_r·E[J^r]/r!` with `J`
/// geometric.
pub fn marked_poisson_moments(
    params: &MarkedPoissonParams,
    g: &TestFunction,
    k_max: usize,
) -> Result<Vec<f64>, PointProcessError> {
    assert!(k_max <= 4, "analytic expansion stops at k = 4");
    let mut s = vec![0.0f64; k_max + 1];
    let mut factorial = 1.0;
    for r in 1..=k_max {
        factorial *= r as f64;
        let integral = g.integral_pow(r as u32);
        if !integral.is_finite() {
            return Err(PointProcessError::QuadratureFailure);
        }
        // E[J^r] for the geometric marks, summed to convergence.
        let mut moment = 0.0;
        let mut j = 1usize;
        loop {
            let term = params.mark_probability(j) * (j as f64).powi(r as i32);
            moment += term;
            if (j > 8 && term < 1e-16 * moment) || j > 100_000 {
                break;
            }
            j += 1;
        }
        s[r] = params.lambda * integral * moment / factorial;
    }
    Ok(exponentiate_series(&s, k_max))
}

/// Recovers the Poisson parameterization from the cluster constants:
/// `λ = c/(1+θ)`, `π_j = θ^{j−1}/(1+θ)^j`, i.e. `β = θ/(1+θ)`.
pub fn identify_params(c: f64, theta: f64) -> MarkedPoissonParams {
    assert!(c > 0.0 && theta > 0.0);
    MarkedPoissonParams::new(
        (theta / (1.0 + theta)).ln(),
        c,
        MarkedPoissonParams::DEFAULT_TERMS,
    )
}

/// Result of regressing `log C_m` on `m`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterFit {
    pub c: f64,
    pub theta: f64,
    /// Root-mean-square residual of the log-linear fit.
    pub residual: f64,
}

/// Least-squares identification of `(c, θ)` from cluster-constant
/// estimates `C_m ≈ c·θ^{m−1}`; needs at least three values of `m`.
pub fn fit_cluster_constants(
    estimates: &[(usize, f64)],
) -> Result<ClusterFit, PointProcessError> {
    assert!(estimates.len() >= 3, "fit needs at least three constants");
    for &(m, value) in estimates {
        if value <= 0.0 {
            return Err(PointProcessError::NonPositiveEstimate { m, value });
        }
    }
    let xs: Vec<f64> = estimates.iter().map(|&(m, _)| m as f64 - 1.0).collect();
    let ys: Vec<f64> = estimates.iter().map(|&(_, v)| v.ln()).collect();
    let (slope, intercept, residual) = stats::linear_fit(&xs, &ys);
    Ok(ClusterFit {
        c: intercept.exp(),
        theta: slope.exp(),
        residual,
    })
}

/// Draws a sample directly from the limit law: exponential inter-cluster
/// gaps at intensity λ, geometric marks laid down as consecutive hits.
/// Gaps are drawn from the previous cluster's end (renewal form) and
/// quantized to the unrescaled grid, a bias of order `window·c_n`, far
/// below the resolution of the statistical tests this feeds.
pub fn synthesize_sample(
    params: &MarkedPoissonParams,
    config: ClusterConfig,
    orbit_length: u64,
    seed: u64,
) -> PointProcessSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let horizon = orbit_length - config.n as u64;
    let mut hits = Vec::new();
    let mut cursor = 0u64;
    loop {
        let u: f64 = rng.random();
        let gap = -(1.0 - u).ln() / params.lambda;
        let steps = ((gap / config.c_n).ceil() as u64).max(config.window as u64 + 1);
        let start = cursor + steps;
        if start > horizon {
            break;
        }
        let v: f64 = rng.random();
        let mark = 1 + ((1.0 - v).ln() / params.beta.ln()).floor() as u64;
        for i in 0..mark {
            if start + i > horizon {
                break;
            }
            hits.push(start + i);
        }
        cursor = start + mark - 1;
    }
    assemble(hits, false, orbit_length, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::{full_shift, golden_mean};
    use crate::subsystem::SubsystemSolution;
    use crate::thermo::{BlockPotential, ThermoSolution};
    use crate::sft::TransitionSystem;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn solve(system: &Arc<TransitionSystem>, members: &[usize]) -> SubsystemSolution {
        let base = ThermoSolution::solve(BlockPotential::zero(system)).unwrap();
        let full = ThermoSolution::solve(base.normalize()).unwrap();
        let sub = SubAlphabet::new(system, members).unwrap();
        SubsystemSolution::solve(&full, &sub).unwrap()
    }

    #[test]
    fn extract_hand_trace() {
        // Orbit 1 2 2 1 3 on the full 3-shift, Δ={1,2}, n=2: blocks at
        // positions 0..2, so hits at k=1,2 forming one mark-2 cluster;
        // position 3 fails on the final symbol 3.
        let system = full_shift(3);
        let sub = SubAlphabet::new(&system, &[0, 1]).unwrap();
        let config = ClusterConfig::new(2, (2.0f64 / 3.0).ln());
        let sample = extract(&[0, 1, 1, 0, 2], &sub, config).unwrap();
        assert_eq!(sample.hits, vec![1, 2]);
        assert_eq!(sample.clusters.len(), 1);
        assert_eq!(sample.clusters[0].mark, 2);
        assert_abs_diff_eq!(sample.clusters[0].start, 4.0 / 9.0, epsilon = 1e-15);
        // k=1 is preceded by the block at position 0: no entrance.
        assert!(sample.entrances.is_empty());
    }

    #[test]
    fn extract_degenerate_orbits() {
        let system = full_shift(2);
        let sub = SubAlphabet::new(&system, &[0]).unwrap();
        let config = ClusterConfig::new(3, -(2.0f64.ln()));
        // All-Δ orbit: every k is a hit, one cluster of mark T−n, and the
        // k=1 hit is shadowed by the block at 0, so no entrance.
        let all = extract(&vec![0u16; 40], &sub, config).unwrap();
        assert_eq!(all.hits.len(), 37);
        assert_eq!(all.clusters.len(), 1);
        assert_eq!(all.clusters[0].mark, 37);
        assert!(all.entrances.is_empty());
        // No 3-run: empty sample.
        let none = extract(&[0, 0, 1, 0, 0, 1, 0, 0, 1], &sub, config).unwrap();
        assert!(none.hits.is_empty() && none.clusters.is_empty());
        // Too short to host k=1.
        assert!(matches!(
            extract(&[0, 0, 0], &sub, config),
            Err(PointProcessError::OrbitTooShort { .. })
        ));
    }

    #[test]
    fn extract_is_deterministic() {
        let system = full_shift(2);
        let sub = SubAlphabet::new(&system, &[0]).unwrap();
        let full = ThermoSolution::solve(BlockPotential::zero(&system)).unwrap();
        let solution = ThermoSolution::solve(full.normalize()).unwrap();
        let orbit = solution.sample_orbit(20_000, 5).unwrap();
        let config = ClusterConfig::new(4, solution_p_delta(&system));
        let a = extract(&orbit, &sub, config).unwrap();
        let b = extract(&orbit, &sub, config).unwrap();
        assert_eq!(a, b);
    }

    fn solution_p_delta(system: &Arc<TransitionSystem>) -> f64 {
        solve(system, &[0]).p_delta()
    }

    proptest! {
        // Brute-force re-derivation of every extraction invariant from the
        // raw membership word.
        #[test]
        fn extraction_matches_definitions(
            membership in proptest::collection::vec(proptest::bool::weighted(0.7), 10..200),
            n in 1usize..5,
            window in 1usize..6,
        ) {
            prop_assume!(membership.len() > n);
            let config = ClusterConfig::with_window(n, -0.4, window);
            let sample = extract_membership(membership.iter().copied(), config).unwrap();
            let t = membership.len();
            let block = |j: usize| membership[j..j + n].iter().all(|&b| b);
            let expected_hits: Vec<u64> =
                (1..=t - n).filter(|&k| block(k)).map(|k| k as u64).collect();
            prop_assert_eq!(&sample.hits, &expected_hits);
            let expected_entrances: Vec<u64> = expected_hits
                .iter()
                .copied()
                .filter(|&k| !block(k as usize - 1))
                .collect();
            prop_assert_eq!(&sample.entrances, &expected_entrances);
            let mark_total: usize = sample.clusters.iter().map(|c| c.mark).sum();
            prop_assert_eq!(mark_total, sample.hits.len());
            // Clusters are maximal: gaps within ≤ window, across > window.
            let mut idx = 0usize;
            for pair in sample.clusters.windows(2) {
                prop_assert!(pair[1].start - pair[0].start > window as f64 * config.c_n - 1e-12);
            }
            for c in &sample.clusters {
                let members = &sample.hits[idx..idx + c.mark];
                prop_assert_eq!(members[0] as f64 * config.c_n, c.start);
                for w in members.windows(2) {
                    prop_assert!(w[1] - w[0] <= window as u64);
                }
                idx += c.mark;
            }
            // Entrances are exactly the window-1 cluster starts, except a
            // k=1 run shadowed by the block at position 0.
            let unit = extract_membership(
                membership.iter().copied(),
                ClusterConfig::with_window(n, -0.4, 1),
            )
            .unwrap();
            let shadowed = block(0) && expected_hits.first() == Some(&1);
            prop_assert_eq!(
                unit.clusters.len(),
                sample.entrances.len() + usize::from(shadowed)
            );
            prop_assert!(sample.clusters.len() <= unit.clusters.len());
        }
    }

    #[test]
    fn mark_histogram_is_geometric_for_bernoulli() {
        // Full 2-shift, Δ={1}, n=10: limiting P(mark = 1) = 1/2.
        let system = full_shift(2);
        let sub = SubAlphabet::new(&system, &[0]).unwrap();
        let sol = solve(&system, &[0]);
        let config = ClusterConfig::new(10, sol.p_delta());
        let mut ones = 0usize;
        let mut total = 0usize;
        for seed in 0..20u64 {
            let orbit = sol.full().sample_orbit(500_000, seed).unwrap();
            let sample = extract(&orbit, &sub, config).unwrap();
            ones += sample.clusters.iter().filter(|c| c.mark == 1).count();
            total += sample.clusters.len();
        }
        let p1 = ones as f64 / total as f64;
        assert!((0.47..=0.53).contains(&p1), "P(mark=1) = {p1}");
    }

    #[test]
    fn entrance_and_cluster_rates_agree() {
        // n = 12: the window truncation P(gap ≤ n·c_n) ≈ 1.5e-3 sits well
        // below the KS resolution of the pooled gap count here.
        let system = full_shift(2);
        let sub = SubAlphabet::new(&system, &[0]).unwrap();
        let sol = solve(&system, &[0]);
        let config = ClusterConfig::new(12, sol.p_delta());
        let samples: Vec<PointProcessSample> = (0..10u64)
            .map(|seed| {
                let orbit = sol.full().sample_orbit(1_000_000, 100 + seed).unwrap();
                extract(&orbit, &sub, config).unwrap()
            })
            .collect();
        let report = test_limit_law(&samples, &sol.marked_poisson_params());
        let len = report.observation_length;
        let se = |count: usize| (count as f64).sqrt() / len;
        let spread = 3.0
            * (se(report.sample_sizes.clusters).powi(2) + se(report.sample_sizes.entrances).powi(2))
                .sqrt();
        assert!(
            (report.empirical_lambda - report.entrance_lambda).abs() <= spread,
            "cluster λ {} vs entrance λ {}",
            report.empirical_lambda,
            report.entrance_lambda
        );
        assert!(!report.underpowered);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn limit_law_self_test_on_synthetic_samples() {
        // Samples drawn from the limit law itself must look calibrated:
        // median p-values well inside (0,1) over 50 seeds.
        let params = solve(&full_shift(2), &[0]).marked_poisson_params();
        let config = ClusterConfig::new(12, params.beta.ln());
        let mut gap_ps = Vec::new();
        let mut mark_ps = Vec::new();
        for seed in 0..50u64 {
            let samples: Vec<PointProcessSample> = (0..4)
                .map(|r| synthesize_sample(&params, config, 2_000_000, seed * 8 + r))
                .collect();
            let report = test_limit_law(&samples, &params);
            gap_ps.push(report.gap_ks.unwrap().p_value);
            mark_ps.push(report.mark_chi_sq.unwrap().p_value);
        }
        gap_ps.sort_by(|a, b| a.total_cmp(b));
        mark_ps.sort_by(|a, b| a.total_cmp(b));
        assert!(gap_ps[25] > 0.2, "median gap p {}", gap_ps[25]);
        assert!(mark_ps[25] > 0.2, "median mark p {}", mark_ps[25]);
    }

    #[test]
    fn limit_law_rejects_wrong_intensity() {
        let params = solve(&full_shift(2), &[0]).marked_poisson_params();
        let config = ClusterConfig::new(12, params.beta.ln());
        let sample = synthesize_sample(&params, config, 90_000_000, 999);
        assert!(sample.clusters.len() > 10_000);
        let mut doubled = params.clone();
        doubled.lambda *= 2.0;
        let report = test_limit_law(&[sample], &doubled);
        assert!(report.gap_ks.unwrap().p_value < 0.01);
        assert!(!report.pass);
    }

    #[test]
    fn empty_pool_is_underpowered_not_failed() {
        let params = solve(&full_shift(2), &[0]).marked_poisson_params();
        let config = ClusterConfig::new(6, params.beta.ln());
        let empty = extract_membership(
            std::iter::repeat(false).take(1000),
            config,
        )
        .unwrap();
        let report = test_limit_law(&[empty], &params);
        assert!(report.underpowered);
        assert!(report.pass);
        assert!(report.gap_ks.is_none() && report.mark_chi_sq.is_none());
    }

    #[test]
    fn tent_and_plateau_quadrature() {
        let tent = TestFunction::tent();
        assert_abs_diff_eq!(tent.integral_pow(1), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(tent.integral_pow(2), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(tent.integral_pow(3), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(tent.evaluate(0.25), 0.5, epsilon = 1e-15);
        assert_eq!(tent.evaluate(1.5), 0.0);
        let plateau = TestFunction::plateau();
        assert_abs_diff_eq!(plateau.integral_pow(1), 1.75, epsilon = 1e-15);
        assert_eq!(plateau.support_end(), 2.0);
        assert_eq!(plateau.evaluate(1.0), 1.0);
        assert!(TestFunction::new(vec![(0.0, 1.0)]).is_err());
        assert!(TestFunction::new(vec![(0.0, 1.0), (0.0, 2.0)]).is_err());
        assert!(TestFunction::new(vec![(0.0, -1.0), (1.0, 0.0)]).is_err());
    }

    #[test]
    fn zero_function_gives_zero_moment() {
        let params = solve(&full_shift(2), &[0]).marked_poisson_params();
        let config = ClusterConfig::new(6, params.beta.ln());
        let sample = synthesize_sample(&params, config, 100_000, 1);
        let zero = TestFunction::new(vec![(0.0, 0.0), (1.0, 0.0)]).unwrap();
        assert_eq!(empirical_moment(&[sample], &zero, 1), 0.0);
        assert_eq!(analytic_moments(1.0, 1.0, &zero, 4).unwrap()[1..], [0.0; 4]);
    }

    #[test]
    fn analytic_moment_hand_values() {
        let tent = TestFunction::tent();
        // ν_0 = 1; ν_1 = C_1·I_1; ν_2 = C_1I_2 + 2C_2I_2 + (C_1I_1)².
        let nu = analytic_moments(1.0, 1.0, &tent, 2).unwrap();
        assert_abs_diff_eq!(nu[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(nu[1], 0.5, epsilon = 1e-14);
        let expected2 = 1.0 / 3.0 + 2.0 / 3.0 + 0.25;
        assert_abs_diff_eq!(nu[2], expected2, epsilon = 1e-13);
        // First moment is c·∫g for arbitrary parameters and functions.
        for (c, theta) in [(1.0, 2.0), (0.7, 0.4), (1.1708, 1.618)] {
            for g in [TestFunction::tent(), TestFunction::plateau()] {
                let nu = analytic_moments(c, theta, &g, 1).unwrap();
                assert_abs_diff_eq!(nu[1], c * g.integral_pow(1), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn moment_routes_agree() {
        // Cluster-constant form vs marked-Poisson form, k ≤ 4.
        for (c, theta) in [(1.0, 1.0), (1.0, 2.0), (1.1708203932, 1.6180339887), (0.5, 0.25)] {
            let params = identify_params(c, theta);
            for g in [TestFunction::tent(), TestFunction::plateau()] {
                let a = analytic_moments(c, theta, &g, 4).unwrap();
                let b = marked_poisson_moments(&params, &g, 4).unwrap();
                for k in 0..=4 {
                    assert_abs_diff_eq!(a[k], b[k], epsilon = 1e-10 * a[k].max(1.0));
                }
            }
        }
    }

    #[test]
    fn moment_series_matches_direct_evaluation() {
        // Independent oracle: F_g(z) evaluated by composite Simpson on
        // each linear segment and direct summation over m, compared with
        // the degree-4 Taylor polynomial at small z.
        // z small enough that the neglected z⁵ tail (s₅ ≈ 6.25 here)
        // stays below the assertion bound.
        let g = TestFunction::tent();
        let (c, theta) = (1.0, 2.0);
        let nu = analytic_moments(c, theta, &g, 4).unwrap();
        for z in [0.005f64, 0.01, -0.012] {
            let mut log_f = 0.0;
            for m in 1..=40 {
                let mut integral = 0.0;
                for seg in g.knots().windows(2) {
                    let (x0, _) = seg[0];
                    let (x1, _) = seg[1];
                    let steps = 400;
                    let h = (x1 - x0) / steps as f64;
                    let f = |x: f64| ((z * g.evaluate(x)).exp() - 1.0).powi(m);
                    let mut acc = f(x0) + f(x1);
                    for i in 1..steps {
                        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                        acc += w * f(x0 + i as f64 * h);
                    }
                    integral += acc * h / 3.0;
                }
                log_f += c * theta.powi(m - 1) * integral;
            }
            let direct = log_f.exp();
            let taylor: f64 = (0..=4)
                .map(|k| nu[k] * z.powi(k as i32) / (1..=k).product::<usize>() as f64)
                .sum();
            // Residual is the neglected z^5 tail plus quadrature error.
            assert!(
                (direct - taylor).abs() < 1e-8,
                "z={z}: direct {direct} vs taylor {taylor}"
            );
        }
    }

    #[test]
    fn identify_params_round_trip() {
        let p = identify_params(1.0, 1.0);
        assert_abs_diff_eq!(p.lambda, 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(p.mark_probability(3), 0.125, epsilon = 1e-15);
        let p = identify_params(1.0, 2.0);
        assert_abs_diff_eq!(p.lambda, 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(p.mark_probability(2), 2.0 / 9.0, epsilon = 1e-15);
        // Round trip through a solved subsystem.
        for (system, members) in [(full_shift(3), vec![0usize, 1]), (golden_mean(), vec![0])] {
            let sol = solve(&system, &members);
            let direct = sol.marked_poisson_params();
            let identified = identify_params(direct.total_mass, direct.theta);
            assert_abs_diff_eq!(direct.lambda, identified.lambda, epsilon = 1e-14);
            assert_abs_diff_eq!(direct.beta, identified.beta, epsilon = 1e-14);
            for j in 1..=8 {
                assert_abs_diff_eq!(
                    direct.mark_probability(j),
                    identified.mark_probability(j),
                    epsilon = 1e-14
                );
            }
        }
    }

    #[test]
    fn empirical_first_moment_matches_analytic() {
        // Full 3-shift, Δ={1,2}: E X_n(g) → c·∫g = 1/2 for the tent.
        let system = full_shift(3);
        let sub = SubAlphabet::new(&system, &[0, 1]).unwrap();
        let sol = solve(&system, &[0, 1]);
        let config = ClusterConfig::new(8, sol.p_delta());
        let horizon = (1.0 / config.c_n).ceil() as usize + 12;
        let tent = TestFunction::tent();
        let samples: Vec<PointProcessSample> = (0..3000u64)
            .map(|seed| {
                let orbit = sol.full().sample_orbit(horizon, 7_000 + seed).unwrap();
                extract(&orbit, &sub, config).unwrap()
            })
            .collect();
        let (nu1, se1) = empirical_moment_with_se(&samples, &tent, 1);
        assert!((nu1 - 0.5).abs() <= 3.0 * se1, "ν̂₁ = {nu1} ± {se1}");
        let (nu2, se2) = empirical_moment_with_se(&samples, &tent, 2);
        let analytic = analytic_moments(sol.py_total_mass(), 2.0, &tent, 2).unwrap();
        assert!(
            (nu2 - analytic[2]).abs() <= 3.0 * se2 + 0.05 * analytic[2],
            "ν̂₂ = {nu2} ± {se2} vs {}",
            analytic[2]
        );
    }

    #[test]
    fn cluster_fit_recovers_parameters() {
        // Exact constants from the full 3-shift: c ≈ 1, θ ≈ 2.
        let sol = solve(&full_shift(3), &[0, 1]);
        let estimates: Vec<(usize, f64)> = (1..=5)
            .map(|m| {
                let table = sol.exact_cluster_constants(m, 40, Some(40)).unwrap();
                (m, table.c_m)
            })
            .collect();
        let fit = fit_cluster_constants(&estimates).unwrap();
        assert!((fit.c - 1.0).abs() < 1e-4, "c = {}", fit.c);
        assert!((fit.theta - 2.0).abs() < 1e-4, "θ = {}", fit.theta);
        assert!(fit.residual < 1e-4);
        // Constant sequence: exact geometric with θ = 1, residual 0.
        let flat: Vec<(usize, f64)> = (1..=4).map(|m| (m, 1.0)).collect();
        let fit = fit_cluster_constants(&flat).unwrap();
        assert_abs_diff_eq!(fit.c, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.theta, 1.0, epsilon = 1e-12);
        assert!(fit.residual < 1e-12);
        // An outlier shows up in the residual.
        let mut noisy = estimates.clone();
        noisy[2].1 *= 1.5;
        let fit = fit_cluster_constants(&noisy).unwrap();
        assert!(fit.residual > 0.01);
        // Non-positive estimates are rejected.
        assert!(matches!(
            fit_cluster_constants(&[(1, 1.0), (2, 0.0), (3, 1.0)]),
            Err(PointProcessError::NonPositiveEstimate { m: 2, .. })
        ));
    }
}
