//! Throughput benchmarks for the stages that dominate experiment runtime:
//! the Perron solve, orbit sampling, membership extraction, and the exact
//! cluster-constant recursion.

use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use shiftmark::{
    extract_membership, BlockPotential, ClusterConfig, SubAlphabet, SubsystemSolution,
    ThermoSolution, TransitionSystem,
};

/// Band matrix of half-width 2 on `l` symbols, wrapped at the ends so the
/// system stays primitive.
fn banded_system(l: usize) -> Arc<TransitionSystem> {
    let rows: Vec<Vec<i64>> = (0..l)
        .map(|a| {
            (0..l)
                .map(|b| {
                    let d = (a as i64 - b as i64).rem_euclid(l as i64).min(
                        (b as i64 - a as i64).rem_euclid(l as i64),
                    );
                    i64::from(d <= 2)
                })
                .collect()
        })
        .collect();
    TransitionSystem::new(&rows).unwrap()
}

fn two_shift_subsystem() -> (ThermoSolution, SubsystemSolution) {
    let system = TransitionSystem::new(&[vec![1, 1], vec![1, 1]]).unwrap();
    let solution = ThermoSolution::solve(BlockPotential::uniform(&system)).unwrap();
    let sub = SubAlphabet::from_labels(solution.system(), &["1"]).unwrap();
    let solved = SubsystemSolution::solve(&solution, &sub).unwrap();
    (solution, solved)
}

fn bench_perron(c: &mut Criterion) {
    let potential = BlockPotential::uniform(&banded_system(64));
    c.bench_function("perron_solve/banded64", |b| {
        b.iter(|| ThermoSolution::solve(potential.clone()).unwrap())
    });
}

fn bench_orbit(c: &mut Criterion) {
    let (solution, _) = two_shift_subsystem();
    let mut group = c.benchmark_group("orbit_sampler");
    group.throughput(Throughput::Elements(1_000_000));
    group.bench_function("two_shift_1m", |b| {
        b.iter(|| {
            solution
                .orbit_sampler(7)
                .unwrap()
                .take(1_000_000)
                .map(u64::from)
                .sum::<u64>()
        })
    });
    group.finish();
}

fn bench_extract(c: &mut Criterion) {
    let (solution, solved) = two_shift_subsystem();
    let mask = solved.sub().mask().to_vec();
    let membership: Vec<bool> = solution
        .orbit_sampler(7)
        .unwrap()
        .take(1_000_000)
        .map(|s| mask[s as usize])
        .collect();
    let config = ClusterConfig::new(12, solved.p_delta());
    let mut group = c.benchmark_group("extract_membership");
    group.throughput(Throughput::Elements(membership.len() as u64));
    group.bench_function("two_shift_1m", |b| {
        b.iter(|| extract_membership(membership.iter().copied(), config).unwrap())
    });
    group.finish();
}

fn bench_cluster_constants(c: &mut Criterion) {
    let (_, solved) = two_shift_subsystem();
    c.bench_function("cluster_constants/m5_n60_full_window", |b| {
        b.iter(|| solved.exact_cluster_constants(5, 60, Some(60)).unwrap())
    });
}

fn bench_rescaled_mass(c: &mut Criterion) {
    let system = TransitionSystem::new(&[vec![1, 1], vec![1, 0]]).unwrap();
    let raw = ThermoSolution::solve(BlockPotential::zero(&system)).unwrap();
    let solution = ThermoSolution::solve(raw.normalize()).unwrap();
    let sub = SubAlphabet::from_labels(solution.system(), &["1"]).unwrap();
    let solved = SubsystemSolution::solve(&solution, &sub).unwrap();
    c.bench_function("rescaled_mass/golden_mean_n40", |b| {
        b.iter(|| solved.mu_delta_n_rescaled(40))
    });
}

criterion_group!(
    benches,
    bench_perron,
    bench_orbit,
    bench_extract,
    bench_cluster_constants,
    bench_rescaled_mass
);
criterion_main!(benches);
