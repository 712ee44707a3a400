//! Symbolic-dynamics toolkit for subshifts of finite type.
//!
//! The crate is organized around one pipeline:
//!
//! 1. [`sft`]: transition systems on a finite alphabet, sub-alphabets,
//!    higher-block recoding, and word enumeration.
//! 2. [`thermo`]: transfer operators for two-block potentials: Perron data,
//!    pressure, normalization, equilibrium Markov measures, orbit sampling.
//! 3. [`subsystem`]: the open (restricted) transfer operator of a
//!    sub-alphabet: escape pressure, conditionally invariant densities,
//!    exact cluster constants, and the finite-size identity checks behind
//!    them.
//! 4. [`pointprocess`]: extraction of hit/entrance/cluster processes from
//!    orbits, limit-law tests against the predicted marked Poisson process,
//!    and exact/empirical moments of smoothed hit counts.
//! 5. [`matching`]: product systems and diagonal sub-alphabets for N-orbit
//!    coincidence (matching) statistics.
//!
//! Shared report types live in [`report`]; the statistical helpers (KS,
//! chi-square, fits) in [`stats`]; numeric tolerances in [`tol`].

#[cfg(test)]
pub(crate) mod fixtures;
pub mod matching;
pub mod pointprocess;
pub mod report;
pub mod sft;
pub mod stats;
pub mod subsystem;
pub mod thermo;
pub mod tol;

pub use matching::{epsilon_to_n, DiagonalSubsystem, MatchingError, ProductSystem};
pub use pointprocess::{
    analytic_moments, empirical_moment_with_se, extract, extract_membership, fit_cluster_constants,
    identify_params, marked_poisson_moments, synthesize_sample, test_limit_law, Cluster,
    ClusterConfig, ClusterFit, LimitTestReport, PointProcessError, PointProcessSample,
    TestFunction,
};
pub use report::{ClusterConstants, ConvergenceReport, DecayReport, IdentityReport};
pub use sft::{Alphabet, RecodingMap, SftError, SubAlphabet, TransitionSystem, Word};
pub use subsystem::{MarkedPoissonParams, SubsystemError, SubsystemSolution};
pub use thermo::{
    perron, reduce_k_block_potential, BlockPotential, CylinderMeasure, OrbitSampler, PerronData,
    ThermoError, ThermoSolution,
};
