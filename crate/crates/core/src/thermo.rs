//! Transfer-operator thermodynamics for two-block potentials.
//!
//! For a potential `φ(a, b)` on allowed transitions `a → b`, the weight
//! matrix is `T[a][b] = A(a,b)·e^{φ(a,b)}` (row = source). The transfer
//! operator acts on one-block functions as `(Lψ)(b) = Σ_a T[a][b]·ψ(a)`,
//! i.e. as `Tᵀ` on column vectors, and the pressure is `P = log λ` with
//! `λ` the Perron root of `T`.
//!
//! Two positive eigenvectors appear throughout and play different roles:
//!
//! * the **left** Perron vector `h` (`hᵀT = λhᵀ`) is the eigenfunction of
//!   `L` and drives normalization: `φ' = φ − P + log h(a) − log h(b)`
//!   makes the column sums of the weight matrix equal to 1 (`L1 = 1`);
//! * the **right** Perron vector `v` (`Tv = λv`) generates the forward
//!   Markov kernel `Q(a,b) = T[a][b]·v(b)/(λ·v(a))` of the equilibrium
//!   measure, whose stationary vector is `p ∝ h ⊙ v`.
//!
//! For symmetric weight matrices the two coincide; the distinction matters
//! for any genuinely asymmetric potential and is covered by the tests.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::sft::{RecodingMap, SftError, TransitionSystem, Word};
use crate::tol;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ThermoError {
    #[error("transition system is not primitive (irreducible + aperiodic required)")]
    NotPrimitive,
    #[error("power iteration did not reach residual {residual:.2e} within {iterations} iterations")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("word is not allowed by the system: {0}")]
    DisallowedWord(#[from] SftError),
    #[error("weight matrix must be {size}×{size}, got {rows}×{cols}")]
    WeightShape { size: usize, rows: usize, cols: usize },
    #[error("weight at ({row},{col}) is not finite")]
    NonFiniteWeight { row: usize, col: usize },
    #[error("alphabet of {symbols} symbols exceeds the orbit sampler limit of 65535")]
    AlphabetTooLargeForSampling { symbols: usize },
}

/// A two-block potential `φ(a, b)` over the allowed transitions of a system.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockPotential {
    system: Arc<TransitionSystem>,
    /// `weights[(a, b)] = φ(a, b)`; entries at disallowed transitions are
    /// ignored (kept at 0).
    weights: DMatrix<f64>,
    normalized: bool,
}

impl BlockPotential {
    /// The zero potential; its equilibrium state is the measure of maximal
    /// entropy and its pressure is the logarithm of the Perron root of `A`.
    pub fn zero(system: &Arc<TransitionSystem>) -> Self {
        let l = system.len();
        Self::detect(system, DMatrix::zeros(l, l))
    }

    /// Constant potential `φ ≡ −log ℓ`; normalized on full shifts.
    pub fn uniform(system: &Arc<TransitionSystem>) -> Self {
        let l = system.len();
        let w = -(l as f64).ln();
        let mut weights = DMatrix::zeros(l, l);
        for a in 0..l {
            for b in 0..l {
                if system.allowed(a, b) {
                    weights[(a, b)] = w;
                }
            }
        }
        Self::detect(system, weights)
    }

    /// A potential from explicit weights; values at disallowed transitions
    /// are ignored and zeroed.
    pub fn from_weights(system: &Arc<TransitionSystem>, rows: &[Vec<f64>]) -> Result<Self, ThermoError> {
        let l = system.len();
        if rows.len() != l || rows.iter().any(|r| r.len() != l) {
            return Err(ThermoError::WeightShape {
                size: l,
                rows: rows.len(),
                cols: rows.first().map_or(0, |r| r.len()),
            });
        }
        let mut weights = DMatrix::zeros(l, l);
        for (a, row) in rows.iter().enumerate() {
            for (b, &w) in row.iter().enumerate() {
                if system.allowed(a, b) {
                    if !w.is_finite() {
                        return Err(ThermoError::NonFiniteWeight { row: a, col: b });
                    }
                    weights[(a, b)] = w;
                }
            }
        }
        Ok(Self::detect(system, weights))
    }

    fn detect(system: &Arc<TransitionSystem>, weights: DMatrix<f64>) -> Self {
        let mut pot = Self {
            system: Arc::clone(system),
            weights,
            normalized: false,
        };
        pot.normalized = pot.column_sums_are_unit(tol::STOCHASTICITY);
        pot
    }

    pub fn system(&self) -> &Arc<TransitionSystem> {
        &self.system
    }

    /// `φ(a, b)`. Only meaningful on allowed transitions.
    pub fn weight(&self, a: usize, b: usize) -> f64 {
        self.weights[(a, b)]
    }

    /// Whether the weight-matrix column sums were verified to be 1,
    /// i.e. `L1 = 1` and the pressure is 0.
    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// The weight matrix `T[a][b] = A(a,b)·e^{φ(a,b)}`.
    pub fn weight_matrix(&self) -> DMatrix<f64> {
        let l = self.system.len();
        DMatrix::from_fn(l, l, |a, b| {
            if self.system.allowed(a, b) {
                self.weights[(a, b)].exp()
            } else {
                0.0
            }
        })
    }

    fn column_sums_are_unit(&self, tolerance: f64) -> bool {
        let t = self.weight_matrix();
        (0..self.system.len()).all(|b| (t.column(b).sum() - 1.0).abs() <= tolerance)
    }
}

/// Perron data of a primitive nonnegative matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronData {
    /// The spectral radius λ.
    pub eigenvalue: f64,
    /// Right vector: `M·right = λ·right`, positive, unit 1-norm.
    pub right: DVector<f64>,
    /// Left vector: `leftᵀ·M = λ·leftᵀ`, positive, unit 1-norm.
    pub left: DVector<f64>,
}

/// Perron eigenvalue and both eigenvectors by power iteration, to relative
/// residual [`tol::EIGEN_RESIDUAL`]. The caller vouches for primitivity
/// via `primitive` (power iteration oscillates on periodic matrices).
pub fn perron(m: &DMatrix<f64>, primitive: bool) -> Result<PerronData, ThermoError> {
    if !primitive {
        return Err(ThermoError::NotPrimitive);
    }
    let (eigenvalue, right) = power_iterate(m)?;
    let (lambda_left, left) = power_iterate(&m.transpose())?;
    debug_assert!(
        (eigenvalue - lambda_left).abs() <= 1e-10 * eigenvalue.max(1.0),
        "left/right eigenvalue mismatch: {eigenvalue} vs {lambda_left}"
    );
    Ok(PerronData {
        eigenvalue,
        right,
        left,
    })
}

fn power_iterate(m: &DMatrix<f64>) -> Result<(f64, DVector<f64>), ThermoError> {
    let n = m.nrows();
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    let mut best_residual = f64::INFINITY;
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut stale = 0usize;
    for _ in 0..tol::POWER_ITERATION_CAP {
        let w = m * &v;
        let lambda = w.sum();
        if !(lambda > 0.0) || !lambda.is_finite() {
            // A primitive matrix never maps a positive vector to zero.
            return Err(ThermoError::NotPrimitive);
        }
        let residual = (0..n).map(|i| (w[i] - lambda * v[i]).abs()).fold(0.0, f64::max);
        v = w / lambda;
        if residual < best_residual {
            best_residual = residual;
            best = Some((lambda, v.clone()));
            stale = 0;
        } else {
            stale += 1;
        }
        // Past the contract bound, keep polishing down to the roundoff
        // floor; stop once the residual stops improving.
        if residual <= 1e-15 * lambda
            || (stale >= 50 && best_residual <= tol::EIGEN_RESIDUAL * lambda)
        {
            let (l, bv) = best.expect("best is set whenever residual is finite");
            return Ok((l, bv));
        }
    }
    Err(ThermoError::NoConvergence {
        iterations: tol::POWER_ITERATION_CAP,
        residual: best_residual,
    })
}

/// Mass of a cylinder set.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct CylinderMeasure {
    /// Cylinder word rendered with the system's labels.
    pub word: String,
    pub mass: f64,
}

/// Perron data, pressure, and equilibrium Markov measure of a potential.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoSolution {
    potential: BlockPotential,
    eigenvalue: f64,
    pressure: f64,
    right: DVector<f64>,
    left: DVector<f64>,
    stationary: DVector<f64>,
    transition: DMatrix<f64>,
}

impl ThermoSolution {
    /// Solves the Perron problem for the potential's weight matrix and
    /// assembles the equilibrium Markov measure.
    pub fn solve(potential: BlockPotential) -> Result<Self, ThermoError> {
        let system = potential.system();
        if !system.primitive() {
            return Err(ThermoError::NotPrimitive);
        }
        let t = potential.weight_matrix();
        let pd = perron(&t, true)?;
        let l = system.len();
        let lambda = pd.eigenvalue;
        let hv: f64 = (0..l).map(|i| pd.left[i] * pd.right[i]).sum();
        let stationary = DVector::from_fn(l, |i, _| pd.left[i] * pd.right[i] / hv);
        let transition = DMatrix::from_fn(l, l, |a, b| {
            if system.allowed(a, b) {
                t[(a, b)] * pd.right[b] / (lambda * pd.right[a])
            } else {
                0.0
            }
        });
        Ok(Self {
            potential,
            eigenvalue: lambda,
            pressure: lambda.ln(),
            right: pd.right,
            left: pd.left,
            stationary,
            transition,
        })
    }

    pub fn potential(&self) -> &BlockPotential {
        &self.potential
    }

    pub fn system(&self) -> &Arc<TransitionSystem> {
        self.potential.system()
    }

    /// Topological pressure `P = log λ`.
    pub fn pressure(&self) -> f64 {
        self.pressure
    }

    pub fn eigenvalue(&self) -> f64 {
        self.eigenvalue
    }

    /// Right Perron vector of the weight matrix (unit 1-norm); generates
    /// the Markov kernel.
    pub fn right_vector(&self) -> &DVector<f64> {
        &self.right
    }

    /// Left Perron vector of the weight matrix (unit 1-norm); this is the
    /// transfer-operator eigenfunction.
    pub fn left_vector(&self) -> &DVector<f64> {
        &self.left
    }

    /// Stationary distribution `p ∝ left ⊙ right`.
    pub fn stationary(&self) -> &DVector<f64> {
        &self.stationary
    }

    /// Forward transition kernel `Q(a,b) = T[a][b]·v(b)/(λ·v(a))`.
    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    /// The weight matrix of the underlying potential.
    pub fn weight_matrix(&self) -> DMatrix<f64> {
        self.potential.weight_matrix()
    }

    /// Applies the transfer operator to a one-block function:
    /// `(Lψ)(b) = Σ_a T[a][b]·ψ(a)`.
    pub fn apply_transfer(&self, psi: &DVector<f64>) -> DVector<f64> {
        self.weight_matrix().transpose() * psi
    }

    /// The normalized potential
    /// `φ'(a,b) = φ(a,b) − P + log h(a) − log h(b)`
    /// with `h` the transfer-operator eigenfunction. Its pressure is 0, its
    /// weight-matrix column sums are 1, and its equilibrium measure is the
    /// same as this one's.
    pub fn normalize(&self) -> BlockPotential {
        let system = self.system();
        let l = system.len();
        let rows: Vec<Vec<f64>> = (0..l)
            .map(|a| {
                (0..l)
                    .map(|b| {
                        if system.allowed(a, b) {
                            self.potential.weight(a, b) - self.pressure + self.left[a].ln()
                                - self.left[b].ln()
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        BlockPotential::from_weights(system, &rows)
            .expect("normalized weights are finite by construction")
    }

    /// Natural log of the cylinder mass of `word`; 0 for the empty word.
    /// Accumulating in log space keeps long cylinders from underflowing.
    pub fn log_cylinder_mass(&self, word: &Word) -> Result<f64, ThermoError> {
        // Re-validate: the word may have been built against another system.
        Word::new(self.system(), word.symbols().to_vec())?;
        let syms = word.symbols();
        if syms.is_empty() {
            return Ok(0.0);
        }
        let mut log_mass = self.stationary[syms[0]].ln();
        for pair in syms.windows(2) {
            log_mass += self.transition[(pair[0], pair[1])].ln();
        }
        Ok(log_mass)
    }

    /// Equilibrium mass of the cylinder `[word]`.
    pub fn cylinder_measure(&self, word: &Word) -> Result<CylinderMeasure, ThermoError> {
        let mass = self.log_cylinder_mass(word)?.exp();
        Ok(CylinderMeasure {
            word: word.display(self.system()),
            mass,
        })
    }

    /// A seeded sampler of equilibrium orbits.
    pub fn orbit_sampler(&self, seed: u64) -> Result<OrbitSampler, ThermoError> {
        OrbitSampler::new(self, seed)
    }

    /// Samples an orbit of length `len`: the first symbol from the
    /// stationary distribution, subsequent symbols from the Markov kernel.
    pub fn sample_orbit(&self, len: usize, seed: u64) -> Result<Vec<u16>, ThermoError> {
        Ok(self.orbit_sampler(seed)?.take(len).collect())
    }
}

/// Streaming equilibrium-orbit sampler (ChaCha8, one uniform draw per
/// symbol, inverse-CDF over precomputed cumulative rows).
pub struct OrbitSampler {
    rng: ChaCha8Rng,
    /// `cum[a]` is the cumulative row of the kernel at state `a`;
    /// the last entry is forced to 1 so a draw can never fall off the end.
    cum: Vec<Vec<f64>>,
    initial: Vec<f64>,
    state: Option<u16>,
}

impl OrbitSampler {
    fn new(solution: &ThermoSolution, seed: u64) -> Result<Self, ThermoError> {
        let l = solution.system().len();
        if l > u16::MAX as usize {
            return Err(ThermoError::AlphabetTooLargeForSampling { symbols: l });
        }
        let cumulative = |row: Vec<f64>| -> Vec<f64> {
            let mut acc = 0.0;
            let mut out: Vec<f64> = row
                .into_iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
            if let Some(last) = out.last_mut() {
                *last = 1.0;
            }
            out
        };
        let cum = (0..l)
            .map(|a| cumulative((0..l).map(|b| solution.transition[(a, b)]).collect()))
            .collect();
        let initial = cumulative(solution.stationary.iter().copied().collect());
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            cum,
            initial,
            state: None,
        })
    }

    #[inline]
    fn draw(&mut self, cum: &[f64]) -> u16 {
        let u: f64 = self.rng.random();
        cum.partition_point(|&c| c <= u) as u16
    }
}

impl Iterator for OrbitSampler {
    type Item = u16;

    #[inline]
    fn next(&mut self) -> Option<u16> {
        let next = match self.state {
            None => {
                let initial = std::mem::take(&mut self.initial);
                let s = self.draw(&initial);
                self.initial = initial;
                s
            }
            Some(s) => {
                let row = std::mem::take(&mut self.cum[s as usize]);
                let s2 = self.draw(&row);
                self.cum[s as usize] = row;
                s2
            }
        };
        self.state = Some(next);
        Some(next)
    }
}

/// Reduces a `k`-block potential to a two-block potential on the
/// higher-block recoding: the recoded transition `u → v` spells the
/// original `k`-word `u·v[k−2]`, and inherits its weight from `table`.
pub fn reduce_k_block_potential(
    system: &Arc<TransitionSystem>,
    k: usize,
    table: impl Fn(&[usize]) -> f64,
) -> Result<(Arc<TransitionSystem>, RecodingMap, BlockPotential), ThermoError> {
    let (recoded, map) = system.recode_higher_block(k)?;
    let size = recoded.len();
    let mut rows = vec![vec![0.0; size]; size];
    let mut kword = Vec::with_capacity(k);
    for u in 0..size {
        for v in 0..size {
            if recoded.allowed(u, v) {
                kword.clear();
                kword.extend_from_slice(&map.blocks[u]);
                kword.push(map.blocks[v][k - 2]);
                rows[u][v] = table(&kword);
            }
        }
    }
    let potential = BlockPotential::from_weights(&recoded, &rows)?;
    Ok((recoded, map, potential))
}
