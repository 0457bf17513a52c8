//! Shared fixtures for the benchmarks.

use leja::greedy::run;
use leja::{CirclePointSet, GreedyConfig, InjectionSchedule, KernelKind, Mode, Provenance};

/// Greedy run of `n` points from a fixed seed.
pub fn leja_set(mode: Mode, n: usize) -> CirclePointSet {
    let seed = match mode {
        Mode::Plain => vec![0.0],
        Mode::Symmetric => vec![0.125, 0.875],
    };
    let seed = CirclePointSet::from_angles(&seed, Provenance::Seed).expect("valid seed");
    let config = GreedyConfig::new(KernelKind::LogSin, mode, n);
    run(&seed, &config, &InjectionSchedule::default())
        .expect("fixture run")
        .final_set
}
