//! Coincidences of independent equilibrium orbits, phrased as hitting
//! times of the diagonal of a product shift.
//!
//! [`ProductSystem`] tensors `N` solved systems on a common alphabet into
//! one shift on `V^N`; the equilibrium of the summed potential is the
//! product of the factor equilibria. [`DiagonalSubsystem`] runs the open
//! subsystem machinery on the diagonal symbols `(a, …, a)`, whose depth-`n`
//! hitting set is exactly "all `N` orbits agree for `n` consecutive steps".
//! Simulation comes in two flavours: the generic pipeline on the product
//! chain, and a direct merge of `N` independent factor orbits that never
//! materializes the product.

use std::sync::Arc;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::pointprocess::{
    extract_membership, ClusterConfig, PointProcessError, PointProcessSample,
};
use crate::report::IdentityReport;
use crate::sft::{SftError, SubAlphabet, TransitionSystem, Word};
use crate::stats;
use crate::subsystem::{MarkedPoissonParams, SubsystemError, SubsystemSolution};
use crate::thermo::{perron, BlockPotential, ThermoError, ThermoSolution};
use crate::tol;

#[derive(Debug, Error)]
pub enum MatchingError {
    #[error("factor {index} lives on {found} symbols, the first factor on {expected}")]
    AlphabetMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("product alphabet needs {symbols} symbols, cap is {cap}")]
    ProductTooLarge { symbols: u128, cap: usize },
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Subsystem(#[from] SubsystemError),
    #[error(transparent)]
    Sft(#[from] SftError),
    #[error(transparent)]
    PointProcess(#[from] PointProcessError),
}

/// `N` solved factors and the solved product system on `V^N`.
///
/// Product symbols are mixed-radix integers over the factor symbols with
/// factor 0 most significant, so membership tests in the simulation loop
/// are integer arithmetic, not string matching.
#[derive(Debug, Clone)]
pub struct ProductSystem {
    factors: Vec<ThermoSolution>,
    solution: ThermoSolution,
    base: usize,
}

impl ProductSystem {
    /// Tensors the factors: a product transition is allowed iff it is
    /// allowed in every factor, and its potential is the sum of the factor
    /// potentials, so the weight matrix is the tensor of the factor ones.
    pub fn build(factors: Vec<ThermoSolution>) -> Result<Self, MatchingError> {
        assert!(!factors.is_empty(), "a product needs at least one factor");
        let base = factors[0].system().len();
        for (index, factor) in factors.iter().enumerate() {
            let found = factor.system().len();
            if found != base {
                return Err(MatchingError::AlphabetMismatch {
                    index,
                    expected: base,
                    found,
                });
            }
        }
        let mut symbols: u128 = 1;
        for _ in 0..factors.len() {
            symbols = symbols.saturating_mul(base as u128);
            if symbols > tol::PRODUCT_ALPHABET_CAP as u128 {
                return Err(MatchingError::ProductTooLarge {
                    symbols,
                    cap: tol::PRODUCT_ALPHABET_CAP,
                });
            }
        }
        let size = symbols as usize;
        let order = factors.len();
        let states: Vec<Vec<usize>> = (0..size).map(|c| decode_state(c, base, order)).collect();
        let labels: Vec<String> = states
            .iter()
            .map(|digits| {
                digits
                    .iter()
                    .enumerate()
                    .map(|(i, &d)| factors[i].system().alphabet().label(d))
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        let mut rows = vec![vec![0i64; size]; size];
        let mut weights = vec![vec![0.0f64; size]; size];
        for (u, du) in states.iter().enumerate() {
            for (v, dv) in states.iter().enumerate() {
                let allowed = factors
                    .iter()
                    .zip(du.iter().zip(dv))
                    .all(|(f, (&a, &b))| f.system().allowed(a, b));
                if allowed {
                    rows[u][v] = 1;
                    weights[u][v] = factors
                        .iter()
                        .zip(du.iter().zip(dv))
                        .map(|(f, (&a, &b))| f.potential().weight(a, b))
                        .sum();
                }
            }
        }
        let system = TransitionSystem::with_labels(&rows, Some(labels))?;
        let solution = ThermoSolution::solve(BlockPotential::from_weights(&system, &weights)?)?;
        Ok(Self {
            factors,
            solution,
            base,
        })
    }

    pub fn factors(&self) -> &[ThermoSolution] {
        &self.factors
    }

    /// Number of factors `N`.
    pub fn order(&self) -> usize {
        self.factors.len()
    }

    /// Factor alphabet size `ℓ`.
    pub fn base(&self) -> usize {
        self.base
    }

    /// Equilibrium of the summed potential on the product system.
    pub fn solution(&self) -> &ThermoSolution {
        &self.solution
    }

    pub fn system(&self) -> &Arc<TransitionSystem> {
        self.solution.system()
    }

    /// Mixed-radix code of a tuple of factor symbols.
    pub fn encode(&self, digits: &[usize]) -> usize {
        assert_eq!(digits.len(), self.order(), "one symbol per factor");
        digits.iter().fold(0, |acc, &d| {
            assert!(d < self.base, "symbol {d} outside the factor alphabet");
            acc * self.base + d
        })
    }

    /// Factor symbols of a product code.
    pub fn decode(&self, code: usize) -> Vec<usize> {
        assert!(code < self.system().len(), "code outside the product");
        decode_state(code, self.base, self.order())
    }

    /// Product codes of the diagonal tuples `(a, …, a)`.
    pub fn diagonal_members(&self) -> Vec<usize> {
        let stride: usize = (0..self.order()).map(|i| self.base.pow(i as u32)).sum();
        (0..self.base).map(|a| a * stride).collect()
    }

    /// Worst deviation of the product stationary vector from the tensor of
    /// the factor stationary vectors.
    pub fn stationary_tensor_check(&self) -> IdentityReport {
        let stationary = self.solution.stationary();
        let mut worst = IdentityReport::new(stationary[0], stationary[0], tol::EIGEN_RESIDUAL);
        for code in 0..self.system().len() {
            let tensor: f64 = self
                .decode(code)
                .iter()
                .zip(&self.factors)
                .map(|(&a, f)| f.stationary()[a])
                .product();
            let report = IdentityReport::new(stationary[code], tensor, tol::EIGEN_RESIDUAL);
            if report.residual > worst.residual {
                worst = report;
            }
        }
        worst
    }

    /// Product pressure against the sum of factor pressures.
    pub fn pressure_sum_check(&self) -> IdentityReport {
        let sum: f64 = self.factors.iter().map(ThermoSolution::pressure).sum();
        IdentityReport::new(self.solution.pressure(), sum, tol::DUAL_ROUTE)
    }

    /// Product cylinder mass of a tuple of equal-length factor words
    /// against the product of the factor cylinder masses.
    pub fn cylinder_tensor_check(&self, words: &[Word]) -> Result<IdentityReport, MatchingError> {
        assert_eq!(words.len(), self.order(), "one word per factor");
        let len = words[0].len();
        assert!(
            words.iter().all(|w| w.len() == len),
            "factor words must share a length"
        );
        let mut symbols = Vec::with_capacity(len);
        for k in 0..len {
            let digits: Vec<usize> = words.iter().map(|w| w.symbols()[k]).collect();
            symbols.push(self.encode(&digits));
        }
        let word = Word::new(self.system(), symbols)?;
        let lhs = self.solution.cylinder_measure(&word)?.mass;
        let mut rhs = 1.0;
        for (factor, w) in self.factors.iter().zip(words) {
            rhs *= factor.cylinder_measure(w)?.mass;
        }
        Ok(IdentityReport::new(lhs, rhs, tol::DUAL_ROUTE))
    }
}

fn decode_state(code: usize, base: usize, order: usize) -> Vec<usize> {
    let mut digits = vec![0usize; order];
    let mut c = code;
    for d in digits.iter_mut().rev() {
        *d = c % base;
        c /= base;
    }
    digits
}

/// The diagonal of a product system solved as an open subsystem.
///
/// The subsystem machinery runs on the normalized product equilibrium, so
/// `P_*` is the diagonal pressure of the normalized potential; for raw
/// factor potentials this equals `P_{φ_Δ} − P(φ)` because normalization is
/// a similarity transform on the diagonal block.
#[derive(Debug, Clone)]
pub struct DiagonalSubsystem {
    product: ProductSystem,
    equilibrium: ThermoSolution,
    solution: SubsystemSolution,
    p_star: f64,
    raw_diagonal_pressure: f64,
}

impl DiagonalSubsystem {
    pub fn solve(product: ProductSystem) -> Result<Self, MatchingError> {
        let equilibrium = if product.solution().potential().is_normalized() {
            product.solution().clone()
        } else {
            ThermoSolution::solve(product.solution().normalize())?
        };
        let members = product.diagonal_members();
        let diagonal = SubAlphabet::new(equilibrium.system(), &members)?;
        let solution = SubsystemSolution::solve(&equilibrium, &diagonal)?;
        let p_star = solution.p_delta();
        // Raw route: Perron root of the unnormalized diagonal block. The
        // solve above already vouched for primitivity of the block.
        let t = product.solution().weight_matrix();
        let raw = DMatrix::from_fn(members.len(), members.len(), |i, j| {
            t[(members[i], members[j])]
        });
        let raw_diagonal_pressure = perron(&raw, true)?.eigenvalue.ln();
        Ok(Self {
            product,
            equilibrium,
            solution,
            p_star,
            raw_diagonal_pressure,
        })
    }

    pub fn product(&self) -> &ProductSystem {
        &self.product
    }

    /// Normalized product equilibrium the subsystem is built on.
    pub fn equilibrium(&self) -> &ThermoSolution {
        &self.equilibrium
    }

    pub fn solution(&self) -> &SubsystemSolution {
        &self.solution
    }

    pub fn diagonal(&self) -> &SubAlphabet {
        self.solution.sub()
    }

    /// `P_* = P_{φ_Δ} − P(φ)`, the matching decay exponent.
    pub fn p_star(&self) -> f64 {
        self.p_star
    }

    pub fn params(&self) -> MarkedPoissonParams {
        self.solution.marked_poisson_params()
    }

    /// `P_*` from the normalized subsystem against `P_{φ_Δ} − P(φ)` from
    /// the raw diagonal block.
    pub fn pressure_identity(&self) -> IdentityReport {
        IdentityReport::new(
            self.p_star,
            self.raw_diagonal_pressure - self.product.solution().pressure(),
            tol::DUAL_ROUTE,
        )
    }

    /// Extraction config for depth-`n` matching, rescaled by `e^{nP_*}`.
    pub fn matching_config(&self, n: usize) -> ClusterConfig {
        ClusterConfig::new(n, self.p_star)
    }

    /// Matching depth for closeness `ε ~ e^{nP_*}`.
    pub fn depth_for(&self, epsilon: f64) -> (usize, bool) {
        epsilon_to_n(epsilon, self.p_star)
    }

    /// Hitting process of one orbit of the product chain.
    pub fn product_sample(
        &self,
        config: ClusterConfig,
        length: usize,
        seed: u64,
    ) -> Result<PointProcessSample, MatchingError> {
        let mask = self.diagonal().mask().to_vec();
        let orbit = self.equilibrium.orbit_sampler(seed)?;
        Ok(extract_membership(
            orbit.take(length).map(|s| mask[s as usize]),
            config,
        )?)
    }

    /// Hitting process of `N` independent factor orbits merged on the fly;
    /// the product is never materialized, so this path scales past the
    /// product-alphabet cap.
    pub fn direct_coincidence_sample(
        &self,
        config: ClusterConfig,
        length: usize,
        seed: u64,
    ) -> Result<PointProcessSample, MatchingError> {
        let mut samplers = Vec::with_capacity(self.product.order());
        for (index, factor) in self.product.factors().iter().enumerate() {
            samplers.push(factor.orbit_sampler(stats::replica_seed(seed, index as u64))?);
        }
        let membership = (0..length).map(move |_| {
            let (lead, rest) = samplers.split_first_mut().expect("at least one factor");
            let symbol = lead.next().expect("orbit samplers never end");
            rest.iter_mut()
                .all(|s| s.next().expect("orbit samplers never end") == symbol)
        });
        Ok(extract_membership(membership, config)?)
    }
}

/// Matching depth `n = ⌈log ε / P_*⌉` for a closeness scale `ε`, with the
/// ratio snapped to the nearest integer first so that `ε = ρⁿ` maps to `n`
/// despite roundoff. Returns the depth and whether it was clamped up to 1.
pub fn epsilon_to_n(epsilon: f64, p_star: f64) -> (usize, bool) {
    assert!(
        epsilon > 0.0 && epsilon < 1.0,
        "closeness scale must lie in (0, 1)"
    );
    assert!(p_star < 0.0, "P_* must be negative");
    let ratio = epsilon.ln() / p_star;
    let nearest = ratio.round();
    let depth = if (ratio - nearest).abs() <= 1e-9 * ratio.abs().max(1.0) {
        nearest
    } else {
        ratio.ceil()
    };
    if depth < 1.0 {
        (1, true)
    } else {
        (depth as usize, false)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn uniform(l: usize) -> ThermoSolution {
        ThermoSolution::solve(BlockPotential::uniform(&fixtures::full_shift(l))).unwrap()
    }

    fn zero(system: &Arc<TransitionSystem>) -> ThermoSolution {
        ThermoSolution::solve(BlockPotential::zero(system)).unwrap()
    }

    fn bernoulli(p: f64) -> ThermoSolution {
        let system = fixtures::full_shift(2);
        let q = (1.0 - p).ln();
        let rows = vec![vec![p.ln(), p.ln()], vec![q, q]];
        ThermoSolution::solve(BlockPotential::from_weights(&system, &rows).unwrap()).unwrap()
    }

    #[test]
    fn uniform_product_is_the_full_four_shift() {
        let product = ProductSystem::build(vec![uniform(2), uniform(2)]).unwrap();
        assert_eq!(product.base(), 2);
        assert_eq!(product.order(), 2);
        assert_eq!(product.system().len(), 4);
        for u in 0..4 {
            for v in 0..4 {
                assert!(product.system().allowed(u, v));
            }
        }
        for u in 0..4 {
            assert!((product.solution().stationary()[u] - 0.25).abs() <= 1e-12);
        }
        assert!(product.stationary_tensor_check().pass);
        assert!(product.pressure_sum_check().pass);
        assert!(product.solution().pressure().abs() <= 1e-12);

        // Zero-potential factors: pressures add up to log 4.
        let system = fixtures::full_shift(2);
        let raw = ProductSystem::build(vec![zero(&system), zero(&system)]).unwrap();
        assert!((raw.solution().pressure() - 4f64.ln()).abs() <= 1e-10);
        assert!(raw.pressure_sum_check().pass);
    }

    #[test]
    fn mixed_radix_codes_round_trip() {
        let product = ProductSystem::build(vec![uniform(3), uniform(3), uniform(3)]).unwrap();
        assert_eq!(product.encode(&[1, 0, 2]), 11);
        assert_eq!(product.decode(11), vec![1, 0, 2]);
        for code in 0..27 {
            assert_eq!(product.encode(&product.decode(code)), code);
        }
        assert_eq!(product.diagonal_members(), vec![0, 13, 26]);
    }

    #[test]
    fn golden_mean_product_counts_and_tensorizes() {
        let system = fixtures::golden_mean();
        let gamma = (1.0 + 5f64.sqrt()) / 2.0;
        let product = ProductSystem::build(vec![zero(&system), zero(&system)]).unwrap();
        let transitions: usize = (0..4)
            .flat_map(|u| (0..4).map(move |v| (u, v)))
            .filter(|&(u, v)| product.system().allowed(u, v))
            .count();
        assert_eq!(transitions, 9);
        assert!((product.solution().pressure() - 2.0 * gamma.ln()).abs() <= 1e-10);
        assert!(product.stationary_tensor_check().pass);

        let words: Vec<Word> = system.words(3, None).unwrap().collect();
        assert_eq!(words.len(), 5);
        for a in &words {
            for b in &words {
                let report = product
                    .cylinder_tensor_check(&[a.clone(), b.clone()])
                    .unwrap();
                assert!(report.pass, "cylinder tensor identity broke: {report:?}");
            }
        }
    }

    #[test]
    fn product_rejects_mismatched_or_oversized_factors() {
        let two = zero(&fixtures::golden_mean());
        let three = zero(&fixtures::full_shift(3));
        match ProductSystem::build(vec![two, three]) {
            Err(MatchingError::AlphabetMismatch {
                index: 1,
                expected: 2,
                found: 3,
            }) => {}
            other => panic!("expected an alphabet mismatch, got {other:?}"),
        }

        let wide = uniform(101);
        match ProductSystem::build(vec![wide.clone(), wide]) {
            Err(MatchingError::ProductTooLarge {
                symbols: 10_201,
                cap: 10_000,
            }) => {}
            other => panic!("expected a size rejection, got {other:?}"),
        }
    }

    #[test]
    fn uniform_diagonals_match_hand_values() {
        let pair = DiagonalSubsystem::solve(ProductSystem::build(vec![uniform(2), uniform(2)]).unwrap())
            .unwrap();
        assert!((pair.solution().beta() - 0.5).abs() <= 1e-12);
        assert!((pair.p_star() - 0.5f64.ln()).abs() <= 1e-12);
        assert!((pair.solution().py_total_mass() - 1.0).abs() <= 1e-12);
        for &h in pair.solution().h_delta().iter() {
            assert!((h - 1.0).abs() <= 1e-12);
        }
        let params = pair.params();
        assert!((params.lambda - 0.5).abs() <= 1e-12);
        assert!((params.theta - 1.0).abs() <= 1e-12);
        for n in 1..=8 {
            assert!((pair.solution().mu_delta_n(n) - 0.5f64.powi(n as i32)).abs() <= 1e-12);
        }
        assert!(pair.pressure_identity().pass);

        let triple = DiagonalSubsystem::solve(
            ProductSystem::build(vec![uniform(2), uniform(2), uniform(2)]).unwrap(),
        )
        .unwrap();
        assert_eq!(triple.diagonal().members(), &[0, 7]);
        assert!((triple.solution().beta() - 0.25).abs() <= 1e-12);
        assert!((triple.params().lambda - 0.75).abs() <= 1e-12);
    }

    #[test]
    fn bernoulli_diagonal_matches_the_matching_probability() {
        // Brute force: two i.i.d. draws agree with probability Σ_a π_a².
        let even = DiagonalSubsystem::solve(
            ProductSystem::build(vec![bernoulli(0.3), bernoulli(0.3)]).unwrap(),
        )
        .unwrap();
        assert!((even.solution().beta() - 0.58).abs() <= 1e-12);

        let mixed = DiagonalSubsystem::solve(
            ProductSystem::build(vec![bernoulli(0.3), bernoulli(0.6)]).unwrap(),
        )
        .unwrap();
        let brute = 0.3 * 0.6 + 0.7 * 0.4;
        assert!((mixed.solution().beta() - brute).abs() <= 1e-12);
    }

    #[test]
    fn pressure_identity_holds_for_unnormalized_factors() {
        let system = fixtures::golden_mean();
        let gamma = (1.0 + 5f64.sqrt()) / 2.0;
        let diag =
            DiagonalSubsystem::solve(ProductSystem::build(vec![zero(&system), zero(&system)]).unwrap())
                .unwrap();
        // Raw diagonal block is A itself, so P_* = log γ − 2 log γ.
        assert!(diag.pressure_identity().pass);
        assert!((diag.p_star() + gamma.ln()).abs() <= 1e-10);
        assert!(diag.p_star() < 0.0);

        // Diagonal submatrix has exactly the factor structure.
        let members = diag.product().diagonal_members();
        for a in 0..2 {
            for b in 0..2 {
                assert_eq!(
                    diag.product().system().allowed(members[a], members[b]),
                    system.allowed(a, b)
                );
            }
        }
    }

    #[test]
    fn diagonal_rejects_a_periodic_intersection() {
        // Factors individually mix, but the shared diagonal structure is
        // the two-cycle {0↔1}.
        let forward = fixtures::golden_mean();
        let backward = TransitionSystem::new(&[vec![0, 1], vec![1, 1]]).unwrap();
        let product = ProductSystem::build(vec![zero(&forward), zero(&backward)]).unwrap();
        match DiagonalSubsystem::solve(product) {
            Err(MatchingError::Subsystem(SubsystemError::SubsystemNotMixing)) => {}
            other => panic!("expected a mixing rejection, got {other:?}"),
        }
    }

    fn hit_rate_and_se(sample: &PointProcessSample, batches: u64) -> (f64, f64) {
        let horizon = sample.orbit_length - sample.config.n as u64;
        let chunk = horizon / batches;
        let mut counts = vec![0u64; batches as usize];
        for &k in &sample.hits {
            let b = ((k - 1) / chunk).min(batches - 1);
            counts[b as usize] += 1;
        }
        let rates: Vec<f64> = counts
            .iter()
            .map(|&c| c as f64 / chunk as f64)
            .collect();
        let mean = rates.iter().sum::<f64>() / batches as f64;
        let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>()
            / (batches as f64 - 1.0);
        (
            sample.hits.len() as f64 / horizon as f64,
            (var / batches as f64).sqrt(),
        )
    }

    #[test]
    fn direct_and_product_paths_agree_with_the_exact_rate() {
        let diag = DiagonalSubsystem::solve(ProductSystem::build(vec![uniform(2), uniform(2)]).unwrap())
            .unwrap();
        let n = 6;
        let config = diag.matching_config(n);
        let length = 4_000_000;
        let exact = diag.solution().mu_delta_n(n);

        let direct = diag.direct_coincidence_sample(config, length, 41).unwrap();
        let via_product = diag.product_sample(config, length, 42).unwrap();
        let (rate_d, se_d) = hit_rate_and_se(&direct, 40);
        let (rate_p, se_p) = hit_rate_and_se(&via_product, 40);

        assert!(
            (rate_d - exact).abs() <= 3.0 * se_d,
            "direct rate {rate_d} vs exact {exact} (se {se_d})"
        );
        assert!(
            (rate_p - exact).abs() <= 3.0 * se_p,
            "product rate {rate_p} vs exact {exact} (se {se_p})"
        );
        assert!(
            (rate_d - rate_p).abs() <= 3.0 * se_d.hypot(se_p),
            "paths disagree: {rate_d} vs {rate_p}"
        );
        assert!(direct.clusters.len() > 100 && via_product.clusters.len() > 100);
    }

    #[test]
    fn epsilon_to_n_examples() {
        let rho = 0.5f64;
        assert_eq!(epsilon_to_n(rho.powi(5), rho.ln()), (5, false));
        assert_eq!(epsilon_to_n(rho.powi(4), rho.ln()), (4, false));
        assert_eq!(epsilon_to_n(0.1, rho.ln()), (4, false));
        assert_eq!(epsilon_to_n(0.9, rho.ln()), (1, false));
        assert_eq!(epsilon_to_n(1.0 - 1e-13, rho.ln()), (1, true));

        let diag = DiagonalSubsystem::solve(ProductSystem::build(vec![uniform(2), uniform(2)]).unwrap())
            .unwrap();
        assert_eq!(diag.depth_for(0.1), (4, false));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn bernoulli_diagonal_pressure_is_the_collision_probability(p in 0.05f64..0.95) {
                let diag = DiagonalSubsystem::solve(
                    ProductSystem::build(vec![bernoulli(p), bernoulli(p)]).unwrap(),
                )
                .unwrap();
                let expect = p * p + (1.0 - p) * (1.0 - p);
                prop_assert!((diag.solution().beta() - expect).abs() <= 1e-10);
                prop_assert!(diag.pressure_identity().pass);
            }

            #[test]
            fn matching_depth_is_the_ceiling_staircase(
                eps in 1e-9f64..0.999,
                rho in 0.05f64..0.95,
            ) {
                let (n, clamped) = epsilon_to_n(eps, rho.ln());
                prop_assert!(n >= 1 && !clamped);
                // ρⁿ ≤ ε < ρ^{n−1}, up to the snapping slack.
                prop_assert!(rho.powi(n as i32) <= eps * (1.0 + 1e-6));
                if n > 1 {
                    prop_assert!(rho.powi(n as i32 - 1) > eps * (1.0 - 1e-6));
                }
            }
        }
    }
}
