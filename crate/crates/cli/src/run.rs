//! Stage orchestration: build module inputs from a config, run the
//! requested stages on a worker pool, and assemble one deterministic
//! report (replica results merged in index order).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{Context, Result};
use rayon::prelude::*;
use shiftmark::stats::replica_seed;
use shiftmark::{
    analytic_moments, empirical_moment_with_se, extract_membership, marked_poisson_moments,
    test_limit_law, ClusterConfig, ConvergenceReport, DiagonalSubsystem, IdentityReport,
    LimitTestReport, PointProcessSample, ProductSystem, SubAlphabet, SubsystemSolution,
    ThermoSolution, TransitionSystem, Word,
};

use crate::config::{ConfigError, ExperimentConfig};
use crate::report::{
    Check, ClusterReport, DepthReport, MatchPathEstimate, MatchReport, Metadata, MomentEstimate,
    MomentsReport, NamedIdentity, NamedLimit, Report, StageTiming, StructureReport,
    SubsystemReport, ThermoReport, Timing, SCHEMA,
};

/// Fixed offsets carving independent seed streams out of the config seed.
const SIMULATE_STREAM: u64 = 1_000;
const MOMENTS_STREAM: u64 = 2_000;
const TRANSFER_STREAM: u64 = 3_000;
const MATCHING_STREAM: u64 = 4_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Validate,
    Thermo,
    Subsystem,
    Clusters,
    Simulate,
    Moments,
    Match,
    Full,
}

impl Stage {
    fn wants_thermo(self) -> bool {
        !matches!(self, Stage::Validate | Stage::Match)
    }

    fn wants_subsystem(self) -> bool {
        matches!(
            self,
            Stage::Subsystem | Stage::Clusters | Stage::Simulate | Stage::Moments | Stage::Full
        )
    }

    fn wants_clusters(self) -> bool {
        matches!(self, Stage::Clusters | Stage::Full)
    }

    fn wants_simulate(self) -> bool {
        matches!(self, Stage::Simulate | Stage::Full)
    }

    fn wants_moments(self) -> bool {
        matches!(self, Stage::Moments | Stage::Full)
    }

    fn wants_matching(self) -> bool {
        matches!(self, Stage::Match | Stage::Full)
    }
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    pub seed: Option<u64>,
    pub replicas: Option<usize>,
    pub threads: Option<usize>,
    pub emit_csv: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            out_dir: PathBuf::from("."),
            seed: None,
            replicas: None,
            threads: None,
            emit_csv: false,
        }
    }
}

/// Loads the config, applies the CLI overrides, runs the stage, writes the
/// report (and CSVs when requested), and returns the assembled report.
/// Errors carrying a [`ConfigError`] are configuration problems; the rest
/// are internal.
pub fn execute(stage: Stage, config_path: &Path, options: &RunOptions) -> Result<Report> {
    let mut config = ExperimentConfig::load(config_path)?;
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    if let Some(replicas) = options.replicas {
        config.replicas = replicas;
        config.validate()?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.threads.unwrap_or(0))
        .build()
        .context("worker pool construction failed")?;
    let report = pool.install(|| run_stages(stage, &config, options))?;

    let report_name = config
        .output
        .report
        .clone()
        .unwrap_or_else(|| format!("{}-report.json", config.label));
    let report_path = options.out_dir.join(report_name);
    if let Some(parent) = report_path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let json = serde_json::to_string_pretty(&report).context("report serialization failed")?;
    std::fs::write(&report_path, json.as_bytes())
        .with_context(|| format!("cannot write {}", report_path.display()))?;
    Ok(report)
}

fn run_stages(stage: Stage, config: &ExperimentConfig, options: &RunOptions) -> Result<Report> {
    let started = Instant::now();
    let mut stages: Vec<StageTiming> = Vec::new();
    let mut checks: Vec<Check> = Vec::new();

    let time = |name: &str, stages: &mut Vec<StageTiming>, from: Instant| {
        stages.push(StageTiming {
            stage: name.to_string(),
            seconds: from.elapsed().as_secs_f64(),
        });
    };

    // Build once: the sub-alphabet must share the solved system's Arc.
    let t0 = Instant::now();
    let (run_system, potential) = config.build_potential()?;
    let sub = config.build_delta(&run_system)?;
    let structure = structure_report(&run_system, &sub);
    if stage == Stage::Validate {
        checks.push(Check::new(
            "structure.irreducible",
            structure.irreducible,
            "transition graph strongly connected",
        ));
        checks.push(Check::new(
            "structure.aperiodic",
            structure.aperiodic,
            "cycle gcd is 1",
        ));
        checks.push(Check::new(
            "structure.deltaMixing",
            structure.delta_mixing,
            "restricted matrix primitive",
        ));
    }
    time("structure", &mut stages, t0);

    let mut thermo_section = None;
    let mut subsystem_section = None;
    let mut clusters_section = None;
    let mut empirical_section = Vec::new();
    let mut moments_section = None;
    let mut matching_section = None;

    let mut normalized: Option<ThermoSolution> = None;
    let mut solution: Option<SubsystemSolution> = None;

    if stage.wants_thermo() {
        let t = Instant::now();
        let raw = ThermoSolution::solve(potential)
            .map_err(|e| ConfigError(format!("potential: {e}")))?;
        let equilibrium = if raw.potential().is_normalized() {
            raw.clone()
        } else {
            ThermoSolution::solve(raw.normalize())
                .map_err(|e| ConfigError(format!("potential: {e}")))?
        };
        let (thermo, stochasticity) = thermo_report(&raw, &equilibrium);
        checks.push(Check::identity("thermo.stochasticity", &stochasticity));
        thermo_section = Some(thermo);
        normalized = Some(equilibrium);
        time("thermo", &mut stages, t);
    }

    if stage.wants_subsystem() {
        let t = Instant::now();
        let equilibrium = normalized.as_ref().expect("thermo ran first");
        let solved = SubsystemSolution::solve(equilibrium, &sub)
            .map_err(|e| ConfigError(format!("delta: {e}")))?;
        let (section, sub_checks) = subsystem_report(&solved, config.seed)?;
        checks.extend(sub_checks);
        subsystem_section = Some(section);
        solution = Some(solved);
        time("subsystem", &mut stages, t);
    }

    if stage.wants_clusters() {
        let t = Instant::now();
        let solved = solution.as_ref().expect("subsystem ran first");
        let section = cluster_report(solved, config)?;
        if options.emit_csv {
            write_cluster_csv(config, options, &section)?;
        }
        clusters_section = Some(section);
        time("clusters", &mut stages, t);
    }

    if stage.wants_simulate() {
        let t = Instant::now();
        let solved = solution.as_ref().expect("subsystem ran first");
        let equilibrium = normalized.as_ref().expect("thermo ran first");
        for (ordinal, &n) in config.depths.iter().enumerate() {
            let depth_seed = replica_seed(config.seed, SIMULATE_STREAM + ordinal as u64);
            let (depth_report, samples) =
                simulate_depth(equilibrium, solved, config, n, depth_seed)?;
            checks.push(Check::new(
                format!("simulate.limitLaw(n={n})"),
                depth_report.limit_test.pass,
                limit_law_detail(&depth_report.limit_test),
            ));
            if options.emit_csv {
                write_depth_csv(config, options, n, &samples)?;
            }
            empirical_section.push(depth_report);
        }
        time("simulate", &mut stages, t);
    }

    if stage.wants_moments() {
        let t = Instant::now();
        let solved = solution.as_ref().expect("subsystem ran first");
        let equilibrium = normalized.as_ref().expect("thermo ran first");
        let (section, moment_checks) = moments_report(equilibrium, solved, config)?;
        checks.extend(moment_checks);
        moments_section = Some(section);
        time("moments", &mut stages, t);
    }

    if stage.wants_matching() {
        if let Some(spec) = &config.matching {
            let t = Instant::now();
            let (section, match_checks) = matching_report(config, spec)?;
            checks.extend(match_checks);
            matching_section = Some(section);
            time("matching", &mut stages, t);
        } else if stage == Stage::Match {
            return Err(
                ConfigError("matching: section required for the match stage".to_string()).into(),
            );
        }
    }

    let pass = checks.iter().all(|c| c.pass);
    Ok(Report {
        schema: SCHEMA,
        metadata: Metadata {
            label: config.label.clone(),
            config_hash: config.semantic_hash(),
            seed: config.seed,
            replicas: config.replicas,
            version: env!("CARGO_PKG_VERSION").to_string(),
        },
        structure: Some(structure),
        thermo: thermo_section,
        subsystem: subsystem_section,
        clusters: clusters_section,
        empirical: empirical_section,
        moments: moments_section,
        matching: matching_section,
        checks,
        pass,
        timing: Timing {
            total_seconds: started.elapsed().as_secs_f64(),
            stages,
        },
    })
}

fn structure_report(system: &Arc<TransitionSystem>, sub: &SubAlphabet) -> StructureReport {
    let label = |&s: &usize| system.alphabet().label(s).to_string();
    StructureReport {
        symbols: system.len(),
        labels: system.alphabet().labels().to_vec(),
        irreducible: system.irreducible(),
        aperiodic: system.aperiodic(),
        delta: sub.members().iter().map(label).collect(),
        delta_mixing: sub.restricted_mixing(),
        z_delta: sub.one_step_successors().iter().map(label).collect(),
    }
}

fn thermo_report(
    raw: &ThermoSolution,
    equilibrium: &ThermoSolution,
) -> (ThermoReport, IdentityReport) {
    let kernel = equilibrium.transition();
    let mut stochasticity = IdentityReport::new(1.0, 1.0, shiftmark::tol::STOCHASTICITY);
    for a in 0..kernel.nrows() {
        let row_sum: f64 = kernel.row(a).sum();
        let report = IdentityReport::new(row_sum, 1.0, shiftmark::tol::STOCHASTICITY);
        if report.residual > stochasticity.residual {
            stochasticity = report;
        }
    }
    (
        ThermoReport {
            pressure: raw.pressure(),
            eigenvalue: raw.eigenvalue(),
            normalized_input: raw.potential().is_normalized(),
            stationary: equilibrium.stationary().iter().copied().collect(),
            stochasticity: stochasticity.clone(),
        },
        stochasticity,
    )
}

fn more_severe_identity(a: IdentityReport, b: IdentityReport) -> IdentityReport {
    match (a.pass, b.pass) {
        (true, false) => b,
        (false, true) => a,
        _ => {
            if b.residual > a.residual {
                b
            } else {
                a
            }
        }
    }
}

fn more_severe_limit(a: ConvergenceReport, b: ConvergenceReport) -> ConvergenceReport {
    match (a.pass, b.pass) {
        (true, false) => b,
        (false, true) => a,
        _ => {
            if b.final_error > a.final_error {
                b
            } else {
                a
            }
        }
    }
}

/// All 1- and 2-cylinder words of the system.
fn cylinder_words(system: &Arc<TransitionSystem>) -> Result<Vec<Word>> {
    let mut words: Vec<Word> = system.words(1, None)?.collect();
    words.extend(system.words(2, None)?);
    Ok(words)
}

fn subsystem_report(
    solved: &SubsystemSolution,
    seed: u64,
) -> Result<(SubsystemReport, Vec<Check>)> {
    let params = solved.marked_poisson_params();
    let system = solved.full().system().clone();
    let words = cylinder_words(&system)?;

    let parameterization = params.parameterization_consistency();
    let tail = params.tail_identity();

    let mut quasi_stationarity = None;
    for word in &words {
        let report = solved.quasi_stationarity_check(word)?;
        quasi_stationarity = Some(match quasi_stationarity {
            None => report,
            Some(worst) => more_severe_identity(worst, report),
        });
    }
    let quasi_stationarity = quasi_stationarity.expect("at least one cylinder");

    // Dual-route μ(Δ_n) as deep as enumeration stays cheap.
    let mut routes = None;
    for n in 1..=10 {
        if system.word_count(n, Some(solved.sub()))? > 100_000 {
            break;
        }
        let report = solved.mu_delta_n_routes(n)?;
        routes = Some(match routes {
            None => report,
            Some(worst) => more_severe_identity(worst, report),
        });
    }
    let routes = routes.expect("depth 1 is always enumerable");

    let dels = solved.dels_limit_check(0, 40);

    let mut conditional = None;
    let mut quasi_limit = None;
    for word in &words {
        let c = solved.conditional_limit_check(word, 40)?;
        conditional = Some(match conditional {
            None => c,
            Some(worst) => more_severe_limit(worst, c),
        });
        let q = solved.quasi_stationary_limit_check(word, 30)?;
        quasi_limit = Some(match quasi_limit {
            None => q,
            Some(worst) => more_severe_limit(worst, q),
        });
    }
    let conditional = conditional.expect("at least one cylinder");
    let quasi_limit = quasi_limit.expect("at least one cylinder");

    let transfer = solved
        .transfer_limit_checks(20, 60, replica_seed(seed, TRANSFER_STREAM))
        .into_iter()
        .reduce(more_severe_limit)
        .expect("twenty test functions");

    let identities = vec![
        NamedIdentity {
            name: "parameterization".to_string(),
            report: parameterization.clone(),
        },
        NamedIdentity {
            name: "markTail".to_string(),
            report: tail.clone(),
        },
        NamedIdentity {
            name: "quasiStationarity".to_string(),
            report: quasi_stationarity.clone(),
        },
        NamedIdentity {
            name: "muDeltaRoutes".to_string(),
            report: routes.clone(),
        },
    ];
    let limits = vec![
        NamedLimit {
            name: "dels".to_string(),
            report: dels.clone(),
        },
        NamedLimit {
            name: "conditional".to_string(),
            report: conditional.clone(),
        },
        NamedLimit {
            name: "quasiStationaryLimit".to_string(),
            report: quasi_limit.clone(),
        },
        NamedLimit {
            name: "transfer".to_string(),
            report: transfer.clone(),
        },
    ];

    let checks = vec![
        Check::identity("subsystem.parameterization", &parameterization),
        Check::identity("subsystem.markTail", &tail),
        Check::identity("subsystem.quasiStationarity", &quasi_stationarity),
        Check::identity("subsystem.muDeltaRoutes", &routes),
        Check::convergence("subsystem.dels", &dels),
        Check::convergence("subsystem.conditional", &conditional),
        Check::convergence("subsystem.quasiStationaryLimit", &quasi_limit),
        Check::convergence("subsystem.transfer", &transfer),
    ];

    let section = SubsystemReport {
        p_delta: solved.p_delta(),
        beta: solved.beta(),
        theta: params.theta,
        lambda: params.lambda,
        total_mass: solved.py_total_mass(),
        h_delta: solved.h_delta().iter().copied().collect(),
        w_delta: solved.w_delta().iter().copied().collect(),
        nu_delta: solved.quasi_stationary_marginal().iter().copied().collect(),
        marks: params.mark_terms.iter().take(12).copied().collect(),
        identities,
        limits,
    };
    Ok((section, checks))
}

fn cluster_report(solved: &SubsystemSolution, config: &ExperimentConfig) -> Result<ClusterReport> {
    let depth = config.cluster_depth;
    let window = config.window.unwrap_or(depth);
    let mut table = Vec::with_capacity(5);
    for m in 1..=5 {
        let constants = solved
            .exact_cluster_constants(m, depth, Some(window))
            .map_err(|e| ConfigError(format!("clusterDepth: {e}")))?;
        table.push(constants);
    }
    Ok(ClusterReport {
        depth,
        window,
        table,
    })
}

fn sample_orbit_process(
    equilibrium: &ThermoSolution,
    sub: &SubAlphabet,
    cluster: ClusterConfig,
    length: u64,
    seed: u64,
) -> Result<PointProcessSample> {
    let mask = sub.mask().to_vec();
    let sampler = equilibrium
        .orbit_sampler(seed)
        .map_err(|e| ConfigError(format!("system: {e}")))?;
    let sample = extract_membership(
        sampler.take(length as usize).map(|s| mask[s as usize]),
        cluster,
    )
    .map_err(|e| ConfigError(format!("orbitLength: {e}")))?;
    Ok(sample)
}

fn simulate_depth(
    equilibrium: &ThermoSolution,
    solved: &SubsystemSolution,
    config: &ExperimentConfig,
    n: usize,
    depth_seed: u64,
) -> Result<(DepthReport, Vec<PointProcessSample>)> {
    let window = config.window.unwrap_or(n);
    let cluster = ClusterConfig::with_window(n, solved.p_delta(), window);
    let samples: Vec<PointProcessSample> = (0..config.replicas)
        .into_par_iter()
        .map(|i| {
            sample_orbit_process(
                equilibrium,
                solved.sub(),
                cluster,
                config.orbit_length,
                replica_seed(depth_seed, i as u64),
            )
        })
        .collect::<Result<_>>()?;
    let limit_test = test_limit_law(&samples, &solved.marked_poisson_params());
    Ok((
        DepthReport {
            n,
            window,
            limit_test,
        },
        samples,
    ))
}

fn limit_law_detail(report: &LimitTestReport) -> String {
    if report.underpowered {
        return format!(
            "underpowered: {} clusters pooled",
            report.sample_sizes.clusters
        );
    }
    let gap_p = report.gap_ks.as_ref().map_or(f64::NAN, |k| k.p_value);
    let mark_p = report.mark_chi_sq.as_ref().map_or(f64::NAN, |c| c.p_value);
    format!(
        "lambda {:.5} vs {:.5}, gap KS p {:.4}, mark chi-square p {:.4}",
        report.empirical_lambda, report.lambda_target, gap_p, mark_p
    )
}

fn moments_report(
    equilibrium: &ThermoSolution,
    solved: &SubsystemSolution,
    config: &ExperimentConfig,
) -> Result<(MomentsReport, Vec<Check>)> {
    let spec = config.moments.clone().unwrap_or_default();
    let g = config.build_test_function();
    let params = solved.marked_poisson_params();
    let n = *config.depths.iter().max().expect("validated nonempty");
    let cluster = ClusterConfig::with_window(n, solved.p_delta(), config.window.unwrap_or(n));
    // Just long enough that the rescaled window covers the support of g.
    let orbit_length = spec.orbit_length.unwrap_or_else(|| {
        (g.support_end() / cluster.c_n).ceil() as u64 + n as u64 + 1
    });

    let base = replica_seed(config.seed, MOMENTS_STREAM);
    let samples: Vec<PointProcessSample> = (0..spec.samples)
        .into_par_iter()
        .map(|i| {
            sample_orbit_process(
                equilibrium,
                solved.sub(),
                cluster,
                orbit_length,
                replica_seed(base, i as u64),
            )
        })
        .collect::<Result<_>>()?;

    let analytic = analytic_moments(params.total_mass, params.theta, &g, 4)
        .map_err(|e| ConfigError(format!("testFunction: {e}")))?;
    let poisson_form = marked_poisson_moments(&params, &g, 4)
        .map_err(|e| ConfigError(format!("testFunction: {e}")))?;
    let mut route_identity = IdentityReport::new(analytic[0], poisson_form[0], 1e-10);
    for k in 1..=4 {
        route_identity = more_severe_identity(
            route_identity,
            IdentityReport::new(analytic[k], poisson_form[k], 1e-10),
        );
    }

    let mut empirical = Vec::new();
    let mut checks = vec![Check::identity("moments.routes", &route_identity)];
    for k in 1..=2 {
        let (value, standard_error) = empirical_moment_with_se(&samples, &g, k);
        let target = analytic[k];
        let diff = (value - target).abs();
        let sigmas = if standard_error > 0.0 {
            diff / standard_error
        } else if diff == 0.0 {
            0.0
        } else {
            f64::MAX
        };
        checks.push(Check::new(
            format!("moments.nu{k}"),
            sigmas <= 3.0,
            format!("{value:.5} vs analytic {target:.5} ({sigmas:.2} standard errors)"),
        ));
        empirical.push(MomentEstimate {
            k,
            value,
            standard_error,
            analytic: target,
            sigmas,
        });
    }

    Ok((
        MomentsReport {
            samples: spec.samples,
            orbit_length,
            depth: n,
            analytic,
            poisson_form,
            route_identity,
            empirical,
        },
        checks,
    ))
}

fn cluster_rate(sample: &PointProcessSample) -> MatchPathEstimate {
    let clusters = sample.clusters.len();
    let length = sample.rescaled_length();
    MatchPathEstimate {
        clusters,
        lambda: clusters as f64 / length,
        standard_error: (clusters as f64).sqrt() / length,
    }
}

fn matching_report(
    config: &ExperimentConfig,
    spec: &crate::config::MatchingSpec,
) -> Result<(MatchReport, Vec<Check>)> {
    let (_, potential) = config.build_potential()?;
    let factor = ThermoSolution::solve(potential)
        .map_err(|e| ConfigError(format!("potential: {e}")))?;
    let product = ProductSystem::build(vec![factor; spec.factors])
        .map_err(|e| ConfigError(format!("matching.factors: {e}")))?;
    let stationary_tensor = product.stationary_tensor_check();
    let pressure_sum = product.pressure_sum_check();
    let diagonal = DiagonalSubsystem::solve(product)
        .map_err(|e| ConfigError(format!("matching: {e}")))?;
    let pressure_identity = diagonal.pressure_identity();
    let params = diagonal.params();

    let (depth, depth_clamped) = match (spec.depth, spec.epsilon) {
        (Some(n), _) => (n, false),
        (None, Some(epsilon)) => diagonal.depth_for(epsilon),
        (None, None) => unreachable!("validated at load time"),
    };
    if spec.orbit_length <= depth as u64 {
        return Err(ConfigError(format!(
            "matching.orbitLength: {} does not cover depth {depth}",
            spec.orbit_length
        ))
        .into());
    }
    let window = config.window.unwrap_or(depth);
    let cluster = ClusterConfig::with_window(depth, diagonal.p_star(), window);

    let direct_sample = diagonal
        .direct_coincidence_sample(
            cluster,
            spec.orbit_length as usize,
            replica_seed(config.seed, MATCHING_STREAM),
        )
        .map_err(|e| ConfigError(format!("matching: {e}")))?;
    let product_sample = diagonal
        .product_sample(
            cluster,
            spec.orbit_length as usize,
            replica_seed(config.seed, MATCHING_STREAM + 1),
        )
        .map_err(|e| ConfigError(format!("matching: {e}")))?;

    let direct = cluster_rate(&direct_sample);
    let product = cluster_rate(&product_sample);
    let combined = direct.standard_error.hypot(product.standard_error);
    let path_sigmas = if combined > 0.0 {
        (direct.lambda - product.lambda).abs() / combined
    } else {
        0.0
    };

    let checks = vec![
        Check::identity("matching.stationaryTensor", &stationary_tensor),
        Check::identity("matching.pressureSum", &pressure_sum),
        Check::identity("matching.pressureIdentity", &pressure_identity),
        Check::new(
            "matching.pathsAgree",
            path_sigmas <= 3.0,
            format!(
                "direct {:.5} vs product {:.5} ({path_sigmas:.2} standard errors)",
                direct.lambda, product.lambda
            ),
        ),
    ];

    let section = MatchReport {
        factors: spec.factors,
        product_symbols: diagonal.product().system().len(),
        p_star: diagonal.p_star(),
        beta_star: diagonal.solution().beta(),
        lambda: params.lambda,
        theta: params.theta,
        depth,
        epsilon: spec.epsilon,
        depth_clamped,
        identities: vec![
            NamedIdentity {
                name: "stationaryTensor".to_string(),
                report: stationary_tensor,
            },
            NamedIdentity {
                name: "pressureSum".to_string(),
                report: pressure_sum,
            },
            NamedIdentity {
                name: "pressureIdentity".to_string(),
                report: pressure_identity,
            },
        ],
        direct,
        product,
        path_sigmas,
    };
    Ok((section, checks))
}

fn csv_dir(config: &ExperimentConfig, options: &RunOptions) -> Result<PathBuf> {
    let dir = match &config.output.csv_dir {
        Some(d) => options.out_dir.join(d),
        None => options.out_dir.clone(),
    };
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn write_cluster_csv(
    config: &ExperimentConfig,
    options: &RunOptions,
    section: &ClusterReport,
) -> Result<()> {
    let mut out = String::from("m,n,window,cTilde,cTildeLimit,cM,cMLimit\n");
    for row in &section.table {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.m, row.n, row.window, row.c_tilde, row.c_tilde_limit, row.c_m, row.c_m_limit
        ));
    }
    let path = csv_dir(config, options)?.join(format!("{}-clusters.csv", config.label));
    std::fs::write(path, out)?;
    Ok(())
}

fn write_depth_csv(
    config: &ExperimentConfig,
    options: &RunOptions,
    n: usize,
    samples: &[PointProcessSample],
) -> Result<()> {
    let dir = csv_dir(config, options)?;

    let mut gaps = String::from("gap\n");
    for sample in samples {
        for gap in sample.cluster_gaps() {
            gaps.push_str(&format!("{gap}\n"));
        }
    }
    std::fs::write(dir.join(format!("{}-gaps-n{n}.csv", config.label)), gaps)?;

    let mut histogram: BTreeMap<usize, u64> = BTreeMap::new();
    for sample in samples {
        for cluster in &sample.clusters {
            *histogram.entry(cluster.mark).or_insert(0) += 1;
        }
    }
    let mut marks = String::from("mark,count\n");
    for (mark, count) in histogram {
        marks.push_str(&format!("{mark},{count}\n"));
    }
    std::fs::write(dir.join(format!("{}-marks-n{n}.csv", config.label)), marks)?;
    Ok(())
}
