//! The JSON report: one schema-versioned document per run, assembled
//! deterministically so that equal configs and seeds produce equal bytes
//! (timing aside).

use serde::Serialize;
use shiftmark::{ClusterConstants, ConvergenceReport, IdentityReport, LimitTestReport};

pub const SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Metadata {
    pub label: String,
    pub config_hash: String,
    pub seed: u64,
    pub replicas: usize,
    pub version: String,
}

/// One named pass/fail entry; the run exit code is the conjunction.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    pub fn identity(name: impl Into<String>, report: &IdentityReport) -> Self {
        Self::new(
            name,
            report.pass,
            format!(
                "residual {:.3e} (tolerance {:.1e})",
                report.residual, report.tolerance
            ),
        )
    }

    pub fn convergence(name: impl Into<String>, report: &ConvergenceReport) -> Self {
        Self::new(
            name,
            report.pass,
            format!(
                "final error {:.3e} (threshold {:.1e})",
                report.final_error, report.threshold
            ),
        )
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NamedIdentity {
    pub name: String,
    #[serde(flatten)]
    pub report: IdentityReport,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct NamedLimit {
    pub name: String,
    #[serde(flatten)]
    pub report: ConvergenceReport,
}

/// Structural diagnostics (the `validate` stage).
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StructureReport {
    pub symbols: usize,
    pub labels: Vec<String>,
    pub irreducible: bool,
    pub aperiodic: bool,
    pub delta: Vec<String>,
    pub delta_mixing: bool,
    /// One-step successors of Δ (support of the eigenfunction).
    pub z_delta: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ThermoReport {
    pub pressure: f64,
    pub eigenvalue: f64,
    pub normalized_input: bool,
    pub stationary: Vec<f64>,
    /// Worst row-sum deviation of the equilibrium kernel from 1.
    pub stochasticity: IdentityReport,
}

/// Exact subsystem quantities with their identity and limit checks.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct SubsystemReport {
    pub p_delta: f64,
    pub beta: f64,
    pub theta: f64,
    pub lambda: f64,
    /// Pianigiani-Yorke total mass `c`.
    pub total_mass: f64,
    pub h_delta: Vec<f64>,
    pub w_delta: Vec<f64>,
    pub nu_delta: Vec<f64>,
    /// Mark law prefix `π_1..π_12`.
    pub marks: Vec<f64>,
    pub identities: Vec<NamedIdentity>,
    pub limits: Vec<NamedLimit>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ClusterReport {
    pub depth: usize,
    pub window: usize,
    pub table: Vec<ClusterConstants>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct DepthReport {
    pub n: usize,
    pub window: usize,
    pub limit_test: LimitTestReport,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MomentsReport {
    pub samples: usize,
    pub orbit_length: u64,
    pub depth: usize,
    /// Analytic `ν_0..ν_4` from the cluster-constant form.
    pub analytic: Vec<f64>,
    /// The same moments from the marked-Poisson form.
    pub poisson_form: Vec<f64>,
    /// Worst disagreement between the two forms.
    pub route_identity: IdentityReport,
    pub empirical: Vec<MomentEstimate>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MomentEstimate {
    pub k: usize,
    pub value: f64,
    pub standard_error: f64,
    pub analytic: f64,
    /// `|value − analytic| / standardError`.
    pub sigmas: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchPathEstimate {
    pub clusters: usize,
    pub lambda: f64,
    pub standard_error: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MatchReport {
    pub factors: usize,
    pub product_symbols: usize,
    pub p_star: f64,
    pub beta_star: f64,
    pub lambda: f64,
    pub theta: f64,
    pub depth: usize,
    /// Set when the depth came from an epsilon scale.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub depth_clamped: bool,
    pub identities: Vec<NamedIdentity>,
    pub direct: MatchPathEstimate,
    pub product: MatchPathEstimate,
    /// `|λ̂_direct − λ̂_product|` in combined standard errors.
    pub path_sigmas: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Timing {
    pub total_seconds: f64,
    pub stages: Vec<StageTiming>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Report {
    pub schema: u32,
    pub metadata: Metadata,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub structure: Option<StructureReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thermo: Option<ThermoReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subsystem: Option<SubsystemReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clusters: Option<ClusterReport>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub empirical: Vec<DepthReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub matching: Option<MatchReport>,
    pub checks: Vec<Check>,
    pub pass: bool,
    /// Excluded from determinism comparisons.
    pub timing: Timing,
}

/// The report serialized with the timing section removed; two runs of the
/// same config and seed must agree on these bytes.
pub fn deterministic_json(report: &Report) -> String {
    let mut value = serde_json::to_value(report).expect("report serialization is infallible");
    value
        .as_object_mut()
        .expect("report is a JSON object")
        .remove("timing");
    serde_json::to_string_pretty(&value).expect("report serialization is infallible")
}
