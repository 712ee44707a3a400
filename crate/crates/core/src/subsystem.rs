//! Restricted transfer operator, subsystem pressure, and the measures that
//! describe mass conditioned on staying inside a sub-alphabet.
//!
//! For a normalized potential and a mixing sub-alphabet `Δ`, four objects
//! are computed from the `Δ×Δ` weight block `M_Δ`:
//!
//! * `P_Δ = log λ_Δ < 0`, the subsystem pressure (`λ_Δ` the Perron root);
//! * `w_Δ`, the positive function on `Δ` picked out by the limit
//!   `e^{−nP_Δ}·(L_Δⁿ1)|_Δ`, i.e. the left Perron vector of `M_Δ` scaled
//!   so that `νᵀw_Δ = 1`;
//! * `h_Δ`, its one-step extension to the full alphabet: the eigenfunction
//!   of the restricted operator, strictly positive exactly on the one-step
//!   successor set `Z_Δ`;
//! * `ν_Δ`, the quasi-stationary measure: the right Perron vector of `M_Δ`
//!   as a probability on `Δ`, extended to cylinders by
//!   `ν[w_0…w_{r−1}] = λ_Δ^{−(r−1)}·∏M_Δ(w_i,w_{i+1})·ν(w_{r−1})`.
//!
//! The invariant measure of the restricted system (its own equilibrium
//! state `μ_Δ`) relates to these by `μ_Δ[W] = w_Δ(w_0)·ν_Δ[W]` exactly.
//! Rescaled iterates of the restricted operator converge to
//! `h_Δ·ν_Δ(ψ)`, and conditioning the ambient measure on `Δ_n` (the first
//! `n` symbols staying in `Δ`) converges to `ν_Δ`, not to `μ_Δ`; the two
//! agree only when `M_Δ`'s left and right Perron vectors coincide. The
//! Pianigiani-Yorke measure `μ_PY(B) = ∫_B h_Δ dμ` ties the subsystem to
//! the ambient equilibrium and drives the hitting-law parameters.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::report::{ClusterConstants, ConvergenceReport, DecayReport, IdentityReport};
use crate::sft::{SftError, SubAlphabet, Word};
use crate::stats;
use crate::thermo::{perron, BlockPotential, ThermoError, ThermoSolution};
use crate::tol;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SubsystemError {
    #[error("potential must be normalized before restricting to a sub-alphabet")]
    PotentialNotNormalized,
    #[error("restriction to the sub-alphabet is not mixing")]
    SubsystemNotMixing,
    #[error("sub-alphabet was built for a different transition system")]
    SystemMismatch,
    #[error("cluster sum needs {required} offset steps, cap is {cap}")]
    CombinatorialOverflow { required: u128, cap: u128 },
    #[error(transparent)]
    Thermo(#[from] ThermoError),
    #[error(transparent)]
    Sft(#[from] SftError),
}

/// Parameters of the limiting marked Poisson process: intensity of cluster
/// arrivals and the geometric law of cluster sizes.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct MarkedPoissonParams {
    /// Cluster arrival intensity `λ = (1 − β)·c`.
    pub lambda: f64,
    /// Geometric ratio `β = e^{P_Δ}`.
    pub beta: f64,
    /// Expected extra revisits per cluster, `θ = β/(1−β) = (e^{−P_Δ}−1)^{−1}`.
    pub theta: f64,
    /// Total Pianigiani-Yorke mass `c`.
    pub total_mass: f64,
    /// First mark probabilities `π_j = (1−β)β^{j−1}`, `j = 1..=J`.
    pub mark_terms: Vec<f64>,
}

impl MarkedPoissonParams {
    pub const DEFAULT_TERMS: usize = 64;

    pub fn new(p_delta: f64, total_mass: f64, terms: usize) -> Self {
        let beta = p_delta.exp();
        let theta = beta / (1.0 - beta);
        Self {
            lambda: (1.0 - beta) * total_mass,
            beta,
            theta,
            total_mass,
            mark_terms: (1..=terms)
                .map(|j| (1.0 - beta) * beta.powi(j as i32 - 1))
                .collect(),
        }
    }

    /// `π_j` for any `j ≥ 1`, not just the stored prefix.
    pub fn mark_probability(&self, j: usize) -> f64 {
        assert!(j >= 1, "marks are 1-based");
        (1.0 - self.beta) * self.beta.powi(j as i32 - 1)
    }

    /// Mean cluster size `Σ j·π_j = 1/(1−β) = 1 + θ`.
    pub fn mean_mark(&self) -> f64 {
        1.0 + self.theta
    }

    /// The same parameters written through `θ`: `λ = c/(1+θ)` and
    /// `π_j = θ^{j−1}/(1+θ)^j`. Agreement with the direct form is an
    /// algebraic identity; the report records the worst residual.
    pub fn parameterization_consistency(&self) -> IdentityReport {
        let lambda_theta = self.total_mass / (1.0 + self.theta);
        let mut worst = IdentityReport::new(self.lambda, lambda_theta, 1e-12);
        for (i, &pi) in self.mark_terms.iter().enumerate() {
            let j = i + 1;
            let via_theta =
                self.theta.powi(j as i32 - 1) / (1.0 + self.theta).powi(j as i32);
            let report = IdentityReport::new(pi, via_theta, 1e-12);
            if report.residual > worst.residual {
                worst = report;
            }
        }
        worst
    }

    /// Truncated geometric tail: `Σ_{j≤J} π_j + β^J = 1`.
    pub fn tail_identity(&self) -> IdentityReport {
        let head: f64 = self.mark_terms.iter().sum();
        IdentityReport::new(head + self.beta.powi(self.mark_terms.len() as i32), 1.0, 1e-12)
    }
}

/// Solved subsystem: pressure, eigenfunction, quasi-stationary measure,
/// restricted equilibrium state, and the Pianigiani-Yorke total mass.
#[derive(Debug, Clone)]
pub struct SubsystemSolution {
    sub: SubAlphabet,
    full: ThermoSolution,
    /// `Δ×Δ` block of the normalized weight matrix.
    block: DMatrix<f64>,
    p_delta: f64,
    lambda_delta: f64,
    /// `w_Δ` over Δ positions (eq. limit normalization: `νᵀw_Δ = 1`).
    w_delta: DVector<f64>,
    /// Quasi-stationary one-block marginal over Δ positions (1-normalized).
    nu_delta: DVector<f64>,
    /// `h_Δ` over the full alphabet.
    h_delta: DVector<f64>,
    z_delta: Vec<usize>,
    /// Equilibrium state of the restricted system.
    restricted: ThermoSolution,
    py_total_mass: f64,
}

impl SubsystemSolution {
    pub fn solve(full: &ThermoSolution, sub: &SubAlphabet) -> Result<Self, SubsystemError> {
        if !full.potential().is_normalized() {
            return Err(SubsystemError::PotentialNotNormalized);
        }
        if !Arc::ptr_eq(sub.parent(), full.system()) {
            return Err(SubsystemError::SystemMismatch);
        }
        if !sub.restricted_mixing() {
            return Err(SubsystemError::SubsystemNotMixing);
        }
        let weights = full.weight_matrix();
        let members = sub.members();
        let d = members.len();
        let block = DMatrix::from_fn(d, d, |i, j| weights[(members[i], members[j])]);
        let pd = perron(&block, true)?;
        let lambda_delta = pd.eigenvalue;
        let p_delta = lambda_delta.ln();
        // pd.right is ν (1-normalized); w_Δ = left/(νᵀleft) gives νᵀw_Δ = 1.
        let nu_delta = pd.right;
        let inner: f64 = (0..d).map(|i| nu_delta[i] * pd.left[i]).sum();
        let w_delta = pd.left / inner;

        let l = full.system().len();
        let h_delta = DVector::from_fn(l, |a, _| {
            let lifted: f64 = (0..d)
                .map(|i| weights[(members[i], a)] * w_delta[i])
                .sum();
            lifted / lambda_delta
        });
        let z_delta = sub.one_step_successors();

        let restricted_system = sub.restricted_system()?;
        let rows: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        if restricted_system.allowed(i, j) {
                            full.potential().weight(members[i], members[j])
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let restricted =
            ThermoSolution::solve(BlockPotential::from_weights(&restricted_system, &rows)?)?;
        debug_assert!(
            (restricted.eigenvalue() - lambda_delta).abs() <= 1e-11 * lambda_delta,
            "restricted solve disagrees with block Perron root"
        );

        let py_total_mass = full.stationary().dot(&h_delta);
        Ok(Self {
            sub: sub.clone(),
            full: full.clone(),
            block,
            p_delta,
            lambda_delta,
            w_delta,
            nu_delta,
            h_delta,
            z_delta,
            restricted,
            py_total_mass,
        })
    }

    pub fn sub(&self) -> &SubAlphabet {
        &self.sub
    }

    pub fn full(&self) -> &ThermoSolution {
        &self.full
    }

    /// Subsystem pressure `P_Δ = log λ_Δ`, strictly negative.
    pub fn p_delta(&self) -> f64 {
        self.p_delta
    }

    /// `β = e^{P_Δ}`, the per-step survival ratio.
    pub fn beta(&self) -> f64 {
        self.lambda_delta
    }

    /// `w_Δ` over Δ positions.
    pub fn w_delta(&self) -> &DVector<f64> {
        &self.w_delta
    }

    /// `h_Δ` over the full alphabet.
    pub fn h_delta(&self) -> &DVector<f64> {
        &self.h_delta
    }

    /// Symbols with a predecessor in Δ; exactly the support of `h_Δ`.
    pub fn z_delta(&self) -> &[usize] {
        &self.z_delta
    }

    /// Equilibrium state of the restricted system.
    pub fn mu_delta(&self) -> &ThermoSolution {
        &self.restricted
    }

    /// One-block marginal of the quasi-stationary measure, over Δ positions.
    pub fn quasi_stationary_marginal(&self) -> &DVector<f64> {
        &self.nu_delta
    }

    /// `c = ∫h_Δ dμ = μ_PY` of the whole space.
    pub fn py_total_mass(&self) -> f64 {
        self.py_total_mass
    }

    pub fn marked_poisson_params(&self) -> MarkedPoissonParams {
        MarkedPoissonParams::new(
            self.p_delta,
            self.py_total_mass,
            MarkedPoissonParams::DEFAULT_TERMS,
        )
    }

    fn validate(&self, word: &Word) -> Result<(), SubsystemError> {
        Word::new(self.full.system(), word.symbols().to_vec())?;
        Ok(())
    }

    /// Positions of the word's symbols within Δ; `None` if any symbol
    /// falls outside Δ.
    fn delta_positions(&self, word: &Word) -> Option<Vec<usize>> {
        word.symbols()
            .iter()
            .map(|&s| self.sub.position(s))
            .collect()
    }

    /// Quasi-stationary mass `ν_Δ[word]`; zero off Δ-words, one for the
    /// empty word.
    pub fn quasi_stationary_mass(&self, word: &Word) -> Result<f64, SubsystemError> {
        self.validate(word)?;
        if word.is_empty() {
            return Ok(1.0);
        }
        let Some(pos) = self.delta_positions(word) else {
            return Ok(0.0);
        };
        let mut mass = self.nu_delta[*pos.last().unwrap()];
        for pair in pos.windows(2) {
            mass *= self.block[(pair[0], pair[1])] / self.lambda_delta;
        }
        Ok(mass)
    }

    /// Mass of the word under the restricted equilibrium state `μ_Δ`;
    /// zero off Δ-words.
    pub fn mu_delta_mass(&self, word: &Word) -> Result<f64, SubsystemError> {
        self.validate(word)?;
        if word.is_empty() {
            return Ok(1.0);
        }
        let Some(pos) = self.delta_positions(word) else {
            return Ok(0.0);
        };
        let restricted_word = Word::new(self.restricted.system(), pos)?;
        Ok(self.restricted.cylinder_measure(&restricted_word)?.mass)
    }

    /// Pianigiani-Yorke mass `μ_PY[word] = h_Δ(w_0)·μ[word]`; the empty
    /// word gives the total mass `c`.
    pub fn py_measure(&self, word: &Word) -> Result<f64, SubsystemError> {
        if word.is_empty() {
            return Ok(self.py_total_mass);
        }
        let mass = self.full.cylinder_measure(word)?.mass;
        Ok(self.h_delta[word.symbols()[0]] * mass)
    }

    /// One rescaled step of the restricted operator on a full-alphabet
    /// function: `ψ ↦ e^{−P_Δ}·L(ψ·χ_Δ)`.
    fn restricted_step(&self, psi: &DVector<f64>) -> DVector<f64> {
        let weights = self.full.weight_matrix();
        let members = self.sub.members();
        let l = self.full.system().len();
        DVector::from_fn(l, |a, _| {
            let sum: f64 = members
                .iter()
                .map(|&b| weights[(b, a)] * psi[b])
                .sum();
            sum / self.lambda_delta
        })
    }

    /// `e^{−nP_Δ}·μ(Δ_n)` evaluated without underflow; this is the natural
    /// scale in which `μ(Δ_n)` stabilizes (limit `c`). `n = 0` gives 1.
    pub fn mu_delta_n_rescaled(&self, n: usize) -> f64 {
        let members = self.sub.members();
        let d = members.len();
        let p = self.full.stationary();
        let p_sub = DVector::from_fn(d, |i, _| p[members[i]]);
        // f_k(b) rescaled: sum over Δ-words of length k ending at b of the
        // weight product, divided by λ_Δ^k; μ(Δ_n) pairs f_{n−1} with p.
        let mut f = DVector::from_element(d, 1.0);
        if n == 0 {
            return 1.0;
        }
        for _ in 0..n - 1 {
            f = self.block.transpose() * f / self.lambda_delta;
        }
        f.dot(&p_sub) / self.lambda_delta
    }

    /// `μ(Δ_n)`: mass of orbits whose first `n` symbols stay in Δ.
    pub fn mu_delta_n(&self, n: usize) -> f64 {
        self.mu_delta_n_rescaled(n) * self.lambda_delta.powi(n as i32)
    }

    /// `μ(Δ_n)` by brute-force enumeration of Δ-words.
    pub fn mu_delta_n_by_enumeration(&self, n: usize) -> Result<f64, SubsystemError> {
        let mut total = 0.0;
        for word in self.full.system().words(n, Some(&self.sub))? {
            total += self.full.cylinder_measure(&word)?.mass;
        }
        Ok(total)
    }

    /// Cross-check of the two `μ(Δ_n)` routes.
    pub fn mu_delta_n_routes(&self, n: usize) -> Result<IdentityReport, SubsystemError> {
        Ok(IdentityReport::new(
            self.mu_delta_n(n),
            self.mu_delta_n_by_enumeration(n)?,
            tol::DUAL_ROUTE,
        ))
    }

    /// Convergence of `a_n = e^{−nP_Δ}·μ(Δ_{n+s})` to `e^{sP_Δ}·c`.
    pub fn dels_limit_check(&self, s: usize, n_max: usize) -> ConvergenceReport {
        let beta_s = self.lambda_delta.powi(s as i32);
        let values: Vec<f64> = (1..=n_max)
            .map(|n| self.mu_delta_n_rescaled(n + s) * beta_s)
            .collect();
        ConvergenceReport::evaluate(values, beta_s * self.py_total_mass, tol::LIMIT_CHECK)
    }

    /// Finite-`n` cluster constants: the exact sum over hit offsets
    /// `0 = q_0 < … < q_{m−1}` with gaps in `[1, window]` of
    /// `μ(Δ_{n+q_{m−1}})`, normalized two ways, with their limits
    /// `θ^{m−1}` and `c·θ^{m−1}`.
    pub fn exact_cluster_constants(
        &self,
        m: usize,
        n: usize,
        window: Option<usize>,
    ) -> Result<ClusterConstants, SubsystemError> {
        assert!(m >= 1 && n >= 1);
        let window = window.unwrap_or(n / m).max(1);
        let t_max = (m - 1) * window;
        let required = t_max as u128;
        if required > tol::COMPOSITION_WORK_CAP {
            return Err(SubsystemError::CombinatorialOverflow {
                required,
                cap: tol::COMPOSITION_WORK_CAP,
            });
        }
        // counts[t] = #compositions of t into m−1 parts from [1, window],
        // built level by level with prefix sums.
        let mut counts = vec![0.0f64; t_max + 1];
        counts[0] = 1.0;
        for _ in 0..m - 1 {
            let mut next = vec![0.0f64; t_max + 1];
            let mut prefix = vec![0.0f64; t_max + 2];
            for t in 0..=t_max {
                prefix[t + 1] = prefix[t] + counts[t];
            }
            for (t, slot) in next.iter_mut().enumerate().take(t_max + 1).skip(1) {
                let lo = t.saturating_sub(window);
                *slot = prefix[t] - prefix[lo];
            }
            counts = next;
        }
        // Rescaled masses r_t = e^{−(n+t)P_Δ}·μ(Δ_{n+t}), advanced one
        // matrix step per t.
        let members = self.sub.members();
        let d = members.len();
        let p = self.full.stationary();
        let p_sub = DVector::from_fn(d, |i, _| p[members[i]]);
        let mut f = DVector::from_element(d, 1.0);
        for _ in 0..n - 1 {
            f = self.block.transpose() * f / self.lambda_delta;
        }
        let mut rescaled = Vec::with_capacity(t_max + 1);
        for _ in 0..=t_max {
            rescaled.push(f.dot(&p_sub) / self.lambda_delta);
            f = self.block.transpose() * f / self.lambda_delta;
        }
        // C_m(n) = Σ_t counts[t]·β^t·r_t; C̃_m(n) divides by r_0 instead
        // of multiplying by c's limit.
        let mut sum = 0.0;
        let mut beta_t = 1.0;
        for t in 0..=t_max {
            sum += counts[t] * beta_t * rescaled[t];
            beta_t *= self.lambda_delta;
        }
        let theta = self.lambda_delta / (1.0 - self.lambda_delta);
        let theta_pow = theta.powi(m as i32 - 1);
        Ok(ClusterConstants {
            m,
            n,
            window,
            c_tilde: sum / rescaled[0],
            c_m: sum,
            c_tilde_limit: theta_pow,
            c_m_limit: self.py_total_mass * theta_pow,
        })
    }

    /// Quasi-stationarity of the Pianigiani-Yorke measure:
    /// `μ_PY(B) = e^{−P_Δ}·μ_PY(S^{−1}B ∩ Δ)` with the preimage expanded
    /// into the finite union of one-symbol extensions from Δ.
    pub fn quasi_stationarity_check(&self, word: &Word) -> Result<IdentityReport, SubsystemError> {
        let lhs = self.py_measure(word)?;
        let system = self.full.system();
        let mut pulled = 0.0;
        for &a in self.sub.members() {
            let extended: Vec<usize> = if word.is_empty() {
                vec![a]
            } else {
                if !system.allowed(a, word.symbols()[0]) {
                    continue;
                }
                let mut s = vec![a];
                s.extend_from_slice(word.symbols());
                s
            };
            pulled += self.py_measure(&Word::new(system, extended)?)?;
        }
        Ok(IdentityReport::new(
            lhs,
            pulled / self.lambda_delta,
            tol::DUAL_ROUTE,
        ))
    }

    /// Convergence of `μ(S^{−k}B | Δ_k)` to `μ_PY(B)/c`: the conditioned
    /// mass is evaluated exactly as a pairing of the word's cylinder with
    /// rescaled iterates of the restricted operator.
    pub fn conditional_limit_check(
        &self,
        word: &Word,
        k_max: usize,
    ) -> Result<ConvergenceReport, SubsystemError> {
        self.validate(word)?;
        let p = self.full.stationary();
        let mass = if word.is_empty() {
            1.0
        } else {
            self.full.cylinder_measure(word)?.mass
        };
        let head = word.symbols().first().copied();
        let mut psi = DVector::from_element(self.full.system().len(), 1.0);
        let mut values = Vec::with_capacity(k_max);
        for _ in 1..=k_max {
            psi = self.restricted_step(&psi);
            let denominator = p.dot(&psi);
            let numerator = match head {
                Some(w0) => psi[w0] * mass,
                None => denominator,
            };
            values.push(numerator / denominator);
        }
        let target = self.py_measure(word)? / self.py_total_mass;
        Ok(ConvergenceReport::evaluate(values, target, tol::LIMIT_CHECK))
    }

    /// Convergence of `μ(B | Δ_n)` to the quasi-stationary mass `ν_Δ(B)`
    /// for a cylinder `B`. Off-Δ words collapse to zero once `n` reaches
    /// the first outside symbol.
    pub fn quasi_stationary_limit_check(
        &self,
        word: &Word,
        n_max: usize,
    ) -> Result<ConvergenceReport, SubsystemError> {
        self.validate(word)?;
        let target = self.quasi_stationary_mass(word)?;
        let r = word.len();
        let syms = word.symbols();
        let members = self.sub.members();
        let d = members.len();
        let p = self.full.stationary();
        let p_sub = DVector::from_fn(d, |i, _| p[members[i]]);
        let pos = self.delta_positions(word);
        // Depth of the longest all-Δ prefix.
        let delta_prefix = syms
            .iter()
            .take_while(|&&s| self.sub.contains(s))
            .count();
        let word_mass = if r == 0 {
            1.0
        } else {
            self.full.cylinder_measure(word)?.mass
        };
        // Weight product along the word in the normalized matrix, for the
        // n > r branch.
        let weights = self.full.weight_matrix();
        let prefix_weight: f64 = syms.windows(2).map(|w| weights[(w[0], w[1])]).product();

        // Rescaled sequences: numerator s_n = λ^{−n}·μ(B ∩ Δ_n) and
        // denominator d_n = λ^{−n}·μ(Δ_n).
        let mut tail = DVector::zeros(d);
        if let Some(ref pos) = pos {
            if r >= 1 {
                tail[pos[r - 1]] = 1.0;
            }
        }
        let mut values = Vec::with_capacity(n_max);
        let mut inv_beta_n = 1.0;
        for n in 1..=n_max {
            inv_beta_n /= self.lambda_delta;
            let numerator = if n <= delta_prefix || (r == 0 && n >= 1) {
                if r == 0 {
                    self.mu_delta_n_rescaled(n)
                } else {
                    word_mass * inv_beta_n
                }
            } else if n <= r || pos.is_none() {
                // A symbol off Δ inside the first n places: empty overlap.
                0.0
            } else {
                // tail currently holds λ^{−k}·(e_{w_last}ᵀ M_Δ^k) for
                // k = n − 1 − (r − 1) steps taken so far.
                prefix_weight * self.lambda_delta.powi(-(r as i32 - 1)) * tail.dot(&p_sub)
                    / self.lambda_delta
            };
            let denominator = self.mu_delta_n_rescaled(n);
            values.push(numerator / denominator);
            if r >= 1 && n >= r && pos.is_some() {
                tail = self.block.transpose() * tail / self.lambda_delta;
            }
        }
        let mut report = ConvergenceReport::evaluate(values, target, tol::CONDITIONED_LIMIT);
        // Exact-zero targets (off-Δ words) pass on exactness alone.
        if target == 0.0 && report.final_error == 0.0 {
            report.pass = true;
        }
        Ok(report)
    }

    /// Correlation decay of the ambient system relative to the subsystem:
    /// `corr_B(r) = |𝔼(χ_{Δ_s}·χ_B∘S^{s+r}) − μ(Δ_s)μ(B)|` for each test
    /// word, with fitted geometric rates and the prefactors rescaled by
    /// `e^{sP_Δ}·μ(B)` checked for uniformity within a factor of 10.
    pub fn relativised_decay_check(
        &self,
        s: usize,
        r_max: usize,
        test_words: &[Word],
    ) -> Result<DecayReport, SubsystemError> {
        assert!(s >= 1 && r_max >= 3);
        let mu_delta_s = self.mu_delta_n(s);
        let beta_s = self.lambda_delta.powi(s as i32);
        // ψ_s = L_Δ^s(1) unrescaled; safe for moderate s.
        let mut psi = DVector::from_element(self.full.system().len(), 1.0);
        for _ in 0..s {
            psi = self.restricted_step(&psi);
        }
        psi *= beta_s;

        let mut correlations = Vec::with_capacity(test_words.len());
        let mut rates = Vec::with_capacity(test_words.len());
        let mut prefactors = Vec::with_capacity(test_words.len());
        let mut geometric = true;
        for word in test_words {
            self.validate(word)?;
            let mass = if word.is_empty() {
                1.0
            } else {
                self.full.cylinder_measure(word)?.mass
            };
            let head = word.symbols().first().copied();
            let mut iterate = psi.clone();
            let mut corr = Vec::with_capacity(r_max);
            for _ in 1..=r_max {
                iterate = self.full.apply_transfer(&iterate);
                let joint = match head {
                    Some(w0) => iterate[w0] * mass,
                    None => self.full.stationary().dot(&iterate),
                };
                corr.push((joint - mu_delta_s * mass).abs());
            }
            let flat = corr.iter().all(|&e| e <= 1e-14);
            let rate = if flat { None } else { stats::geometric_rate(&corr) };
            if !flat {
                match rate {
                    Some(g) if g < 1.0 => {}
                    _ => geometric = false,
                }
            }
            // Prefactor from the fitted line at r = 0, relative to the
            // predicted e^{sP_Δ}·μ(B) scale.
            let prefactor = match rate {
                Some(g) if g > 0.0 => {
                    let logs: Vec<f64> = corr
                        .iter()
                        .enumerate()
                        .filter(|(_, &e)| e > 0.0)
                        .map(|(i, &e)| e.ln() - (i as f64 + 1.0) * g.ln())
                        .collect();
                    (logs.iter().sum::<f64>() / logs.len() as f64).exp() / (beta_s * mass)
                }
                _ => 0.0,
            };
            correlations.push(corr);
            rates.push(rate);
            prefactors.push(prefactor);
        }
        let positive: Vec<f64> = prefactors.iter().copied().filter(|&k| k > 0.0).collect();
        let uniform = match (
            positive.iter().cloned().fold(f64::INFINITY, f64::min),
            positive.iter().cloned().fold(0.0, f64::max),
        ) {
            (lo, hi) if hi > 0.0 => hi / lo <= 10.0,
            _ => true,
        };
        let pass = geometric && uniform;
        Ok(DecayReport {
            correlations,
            rates,
            prefactors,
            geometric,
            uniform,
            pass,
        })
    }

    /// Convergence of the rescaled restricted iterates on one test
    /// function: `‖e^{−nP_Δ}L_Δⁿψ − h_Δ·ν_Δ(ψ)‖∞` through `n_max` steps.
    pub fn transfer_limit_check(&self, psi: &DVector<f64>, n_max: usize) -> ConvergenceReport {
        let members = self.sub.members();
        let projected: f64 = (0..members.len())
            .map(|i| self.nu_delta[i] * psi[members[i]])
            .sum();
        let limit = &self.h_delta * projected;
        let mut iterate = psi.clone();
        let mut sup_errors = Vec::with_capacity(n_max);
        for _ in 1..=n_max {
            iterate = self.restricted_step(&iterate);
            sup_errors.push((&iterate - &limit).amax());
        }
        ConvergenceReport::evaluate(sup_errors, 0.0, tol::LIMIT_CHECK)
    }

    /// [`Self::transfer_limit_check`] over seeded random positive test
    /// functions.
    pub fn transfer_limit_checks(
        &self,
        count: usize,
        n_max: usize,
        seed: u64,
    ) -> Vec<ConvergenceReport> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = self.full.system().len();
        (0..count)
            .map(|_| {
                let psi = DVector::from_fn(l, |_, _| rng.random::<f64>() + 0.1);
                self.transfer_limit_check(&psi, n_max)
            })
            .collect()
    }
}
