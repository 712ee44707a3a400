//! Experiment configuration: one JSON document describing the system, the
//! potential, the sub-alphabet, and the simulation budget.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use shiftmark::{
    reduce_k_block_potential, BlockPotential, SubAlphabet, TestFunction, ThermoSolution,
    TransitionSystem, Word,
};

/// A configuration problem: malformed JSON, an unknown field, or a value
/// that cannot be turned into valid module inputs. Rendered with the field
/// path (or JSON line/column) that caused it.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn bad(msg: impl Into<String>) -> ConfigError {
    ConfigError(msg.into())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SystemSpec {
    /// 0/1 adjacency rows.
    pub rows: Vec<Vec<i64>>,
    /// Symbol labels; defaults to "1", "2", ….
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<String>>,
}

/// Potential spec: a named constant family, an inline weight matrix of
/// `φ(a, b)` values, or a `k`-block table keyed by label words.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PotentialSpec {
    Named(String),
    Weights {
        weights: Vec<Vec<f64>>,
    },
    Block {
        #[serde(rename = "blockLength")]
        block_length: usize,
        /// `φ` per `k`-word, keyed by space-separated symbol labels.
        table: BTreeMap<String, f64>,
    },
}

impl Default for PotentialSpec {
    fn default() -> Self {
        Self::Named("zero".to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TestFunctionSpec {
    Named(String),
    Knots { knots: Vec<(f64, f64)> },
}

impl Default for TestFunctionSpec {
    fn default() -> Self {
        Self::Named("tent".to_string())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MatchingSpec {
    /// Number of independent copies of the configured system.
    pub factors: usize,
    /// Matching depth; exactly one of `depth` and `epsilon` must be set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    /// Closeness scale mapped to a depth via `P_*`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    pub orbit_length: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct MomentsSpec {
    /// Number of independent short orbits.
    pub samples: usize,
    /// Orbit length; defaults to just covering the test-function support.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orbit_length: Option<u64>,
}

impl Default for MomentsSpec {
    fn default() -> Self {
        Self {
            samples: 2000,
            orbit_length: None,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct OutputSpec {
    /// Report file name, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<String>,
    /// Directory for CSV tables, relative to the output directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_dir: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ExperimentConfig {
    pub label: String,
    pub system: SystemSpec,
    #[serde(default)]
    pub potential: PotentialSpec,
    /// Sub-alphabet Δ as symbol labels.
    pub delta: Vec<String>,
    /// Hitting depths `n` for the empirical stages.
    pub depths: Vec<usize>,
    pub orbit_length: u64,
    pub replicas: usize,
    pub seed: u64,
    /// Cluster-window override; defaults to `n` per depth.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<usize>,
    /// Depth of the exact cluster-constant table.
    #[serde(default = "default_cluster_depth")]
    pub cluster_depth: usize,
    #[serde(default)]
    pub test_function: TestFunctionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub moments: Option<MomentsSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matching: Option<MatchingSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

fn default_cluster_depth() -> usize {
    60
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        let config: Self = serde_json::from_str(&text)
            .map_err(|e| bad(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Field-level checks that do not need the solved system.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let size = self.system.rows.len();
        if size < 2 {
            return Err(bad("system.rows: need at least two symbols"));
        }
        for (i, row) in self.system.rows.iter().enumerate() {
            if row.len() != size {
                return Err(bad(format!(
                    "system.rows[{i}]: {} entries in a {size}-symbol system",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(|v| *v != 0 && *v != 1) {
                return Err(bad(format!(
                    "system.rows[{i}][{j}]: entries must be 0 or 1, got {}",
                    row[j]
                )));
            }
        }
        if let Some(labels) = &self.system.labels {
            if labels.len() != size {
                return Err(bad(format!(
                    "system.labels: {} labels for {size} symbols",
                    labels.len()
                )));
            }
        }
        match &self.potential {
            PotentialSpec::Named(name) if name == "zero" || name == "uniform" => {}
            PotentialSpec::Named(name) => {
                return Err(bad(format!(
                    "potential: unknown name {name:?}, expected \"zero\" or \"uniform\""
                )));
            }
            PotentialSpec::Weights { weights } => {
                if weights.len() != size || weights.iter().any(|r| r.len() != size) {
                    return Err(bad("potential.weights: must match the system shape"));
                }
            }
            PotentialSpec::Block { block_length, .. } => {
                if *block_length < 2 {
                    return Err(bad("potential.blockLength: must be at least 2"));
                }
            }
        }
        if self.delta.is_empty() {
            return Err(bad("delta: must name at least one symbol"));
        }
        if self.depths.is_empty() {
            return Err(bad("depths: must list at least one depth"));
        }
        if let Some(i) = self.depths.iter().position(|&n| n == 0) {
            return Err(bad(format!("depths[{i}]: depths start at 1")));
        }
        let max_depth = *self.depths.iter().max().expect("nonempty") as u64;
        if self.orbit_length <= max_depth {
            return Err(bad(format!(
                "orbitLength: {} does not cover the deepest depth {max_depth}",
                self.orbit_length
            )));
        }
        if self.replicas == 0 {
            return Err(bad("replicas: must be at least 1"));
        }
        if self.window == Some(0) {
            return Err(bad("window: must be at least 1"));
        }
        if self.cluster_depth == 0 {
            return Err(bad("clusterDepth: must be at least 1"));
        }
        if let TestFunctionSpec::Knots { knots } = &self.test_function {
            TestFunction::new(knots.clone())
                .map_err(|e| bad(format!("testFunction.knots: {e}")))?;
        } else if let TestFunctionSpec::Named(name) = &self.test_function {
            if name != "tent" && name != "plateau" {
                return Err(bad(format!(
                    "testFunction: unknown name {name:?}, expected \"tent\" or \"plateau\""
                )));
            }
        }
        if let Some(m) = &self.moments {
            if m.samples < 2 {
                return Err(bad("moments.samples: need at least 2 orbits"));
            }
        }
        if let Some(m) = &self.matching {
            if m.factors < 2 {
                return Err(bad("matching.factors: need at least 2 orbit copies"));
            }
            match (m.depth, m.epsilon) {
                (Some(0), _) => return Err(bad("matching.depth: depths start at 1")),
                (Some(_), Some(_)) => {
                    return Err(bad("matching: set depth or epsilon, not both"));
                }
                (None, None) => {
                    return Err(bad("matching: one of depth or epsilon is required"));
                }
                (None, Some(e)) if !(0.0 < e && e < 1.0) => {
                    return Err(bad("matching.epsilon: must lie in (0, 1)"));
                }
                _ => {}
            }
            if m.orbit_length == 0 {
                return Err(bad("matching.orbitLength: must be positive"));
            }
        }
        Ok(())
    }

    /// Hash over the semantically meaningful fields: everything except the
    /// output paths, after overrides are applied.
    pub fn semantic_hash(&self) -> String {
        let mut semantic = self.clone();
        semantic.output = OutputSpec::default();
        let canonical =
            serde_json::to_string(&semantic).expect("config serialization is infallible");
        let digest = Sha256::digest(canonical.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn build_system(&self) -> Result<Arc<TransitionSystem>, ConfigError> {
        TransitionSystem::with_labels(&self.system.rows, self.system.labels.clone())
            .map_err(|e| bad(format!("system: {e}")))
    }

    /// The run system and potential. For a `k`-block table the run system
    /// is the higher-block recoding and `delta` refers to its block labels.
    pub fn build_potential(
        &self,
    ) -> Result<(Arc<TransitionSystem>, BlockPotential), ConfigError> {
        let system = self.build_system()?;
        match &self.potential {
            PotentialSpec::Named(name) if name == "zero" => {
                Ok((system.clone(), BlockPotential::zero(&system)))
            }
            PotentialSpec::Named(_) => Ok((system.clone(), BlockPotential::uniform(&system))),
            PotentialSpec::Weights { weights } => {
                let potential = BlockPotential::from_weights(&system, weights)
                    .map_err(|e| bad(format!("potential.weights: {e}")))?;
                Ok((system.clone(), potential))
            }
            PotentialSpec::Block {
                block_length,
                table,
            } => {
                let k = *block_length;
                let mut by_word: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
                for (key, &value) in table {
                    let symbols: Vec<usize> = key
                        .split_whitespace()
                        .map(|l| system.alphabet().index_of(l))
                        .collect::<Result<_, _>>()
                        .map_err(|e| bad(format!("potential.table[{key:?}]: {e}")))?;
                    if symbols.len() != k {
                        return Err(bad(format!(
                            "potential.table[{key:?}]: {} symbols in a {k}-block table",
                            symbols.len()
                        )));
                    }
                    Word::new(&system, symbols.clone())
                        .map_err(|e| bad(format!("potential.table[{key:?}]: {e}")))?;
                    by_word.insert(symbols, value);
                }
                let allowed = system
                    .words(k, None)
                    .map_err(|e| bad(format!("potential.blockLength: {e}")))?;
                for word in allowed {
                    if !by_word.contains_key(word.symbols()) {
                        let spelled: Vec<&str> = word
                            .symbols()
                            .iter()
                            .map(|&s| system.alphabet().label(s))
                            .collect();
                        return Err(bad(format!(
                            "potential.table: missing entry for allowed word {:?}",
                            spelled.join(" ")
                        )));
                    }
                }
                let (recoded, _map, potential) = reduce_k_block_potential(&system, k, |word| {
                    by_word[word]
                })
                .map_err(|e| bad(format!("potential: {e}")))?;
                Ok((recoded, potential))
            }
        }
    }

    pub fn build_delta(
        &self,
        system: &Arc<TransitionSystem>,
    ) -> Result<SubAlphabet, ConfigError> {
        let labels: Vec<&str> = self.delta.iter().map(String::as_str).collect();
        SubAlphabet::from_labels(system, &labels).map_err(|e| bad(format!("delta: {e}")))
    }

    pub fn build_test_function(&self) -> TestFunction {
        match &self.test_function {
            TestFunctionSpec::Named(name) if name == "plateau" => TestFunction::plateau(),
            TestFunctionSpec::Named(_) => TestFunction::tent(),
            TestFunctionSpec::Knots { knots } => {
                TestFunction::new(knots.clone()).expect("validated at load time")
            }
        }
    }

    /// Equilibrium of the configured potential, normalized for the open
    /// subsystem stages (normalization preserves the measure).
    pub fn solve_normalized(&self) -> Result<ThermoSolution, ConfigError> {
        let (_, potential) = self.build_potential()?;
        let raw = ThermoSolution::solve(potential).map_err(|e| bad(format!("potential: {e}")))?;
        if raw.potential().is_normalized() {
            Ok(raw)
        } else {
            ThermoSolution::solve(raw.normalize()).map_err(|e| bad(format!("potential: {e}")))
        }
    }
}
