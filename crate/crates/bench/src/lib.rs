//! Shared fixtures for the pipeline benchmarks.

use nalgebra::DMatrix;
use opinf_core::benchmarks::{Benchmark, BenchmarkConfig, BenchmarkName};
use opinf_core::pod_basis;

/// A built-in benchmark together with its leading `n_max` POD modes.
pub struct Fixture {
    pub bench: Benchmark,
    pub modes: DMatrix<f64>,
}

impl Fixture {
    pub fn new(name: BenchmarkName) -> Self {
        let bench = Benchmark::build(name, &BenchmarkConfig::default()).expect("default setup");
        let snaps = bench.pod_snapshots().expect("POD trajectory");
        let modes = pod_basis(&snaps, bench.spec.n_max).expect("POD basis").into_modes();
        Self { bench, modes }
    }

    pub fn basis(&self, n: usize) -> DMatrix<f64> {
        self.modes.columns(0, n).into_owned()
    }
}
