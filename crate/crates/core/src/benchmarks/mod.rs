//! The three PDE test problems: Chafee–Infante, shallow ice, and viscous Burgers.
//!
//! Each builder returns a [`Benchmark`] bundling the semi-discrete model, its
//! input signal, initial condition and the parameters of the POD run. Every
//! model exposes its symmetric multilinear maps so intrusive reduction has an
//! exact reference without ever forming `A_i` densely.

mod burgers;
mod chafee_infante;
mod config;
mod shallow_ice;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DVector;

pub use burgers::Burgers;
pub use chafee_infante::{ChafeeInfante, RightBoundary};
pub use config::BenchmarkConfig;
pub use shallow_ice::{IceForm, ShallowIce};

use crate::error::{Error, Result};
use crate::fom::{simulate, InputSignal, PolynomialFom, Scheme, SnapshotMatrix};
use crate::tensor_poly::DegreeSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BenchmarkName {
    ChafeeInfante,
    ShallowIce,
    Burgers,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 3] = [Self::ChafeeInfante, Self::ShallowIce, Self::Burgers];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ChafeeInfante => "chafee-infante",
            Self::ShallowIce => "shallow-ice",
            Self::Burgers => "burgers",
        }
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "chafee-infante" | "allen-cahn" => Ok(Self::ChafeeInfante),
            "shallow-ice" | "ice" => Ok(Self::ShallowIce),
            "burgers" => Ok(Self::Burgers),
            other => Err(Error::InvalidArgument(format!("unknown benchmark '{other}'"))),
        }
    }
}

/// Discretization and sweep parameters of one benchmark.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkSpec {
    pub name: BenchmarkName,
    /// Full-order dimension `N`.
    pub dim: usize,
    pub mesh_width: f64,
    /// Step size of the POD trajectory.
    pub dt_pod: f64,
    pub horizon: f64,
    /// Number of POD time steps; the trajectory has `k_pod + 1` snapshots.
    pub k_pod: usize,
    pub pod_scheme: Scheme,
    pub degrees: DegreeSet,
    pub n_inputs: usize,
    /// Largest ROM dimension of the sweep; the sweep is `1..=n_max`.
    pub n_max: usize,
}

impl BenchmarkSpec {
    pub fn rom_dims(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_max
    }
}

/// A built benchmark: model, input, initial state and POD-run parameters.
#[derive(Clone)]
pub struct Benchmark {
    pub spec: BenchmarkSpec,
    pub fom: Arc<dyn PolynomialFom>,
    pub signal: InputSignal,
    pub x0: DVector<f64>,
}

impl fmt::Debug for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Benchmark").field("spec", &self.spec).finish_non_exhaustive()
    }
}

impl Benchmark {
    pub fn build(name: BenchmarkName, config: &BenchmarkConfig) -> Result<Self> {
        match name {
            BenchmarkName::ChafeeInfante => chafee_infante::build(config),
            BenchmarkName::ShallowIce => shallow_ice::build(config),
            BenchmarkName::Burgers => burgers::build(config),
        }
    }

    /// Runs the full-order trajectory whose snapshots feed POD.
    pub fn pod_snapshots(&self) -> Result<SnapshotMatrix> {
        simulate(
            self.fom.as_ref(),
            &self.x0,
            &self.signal,
            self.spec.dt_pod,
            self.spec.k_pod,
            self.spec.pod_scheme,
        )
    }
}

/// Chafee–Infante with the default setup.
pub fn build_chafee_infante() -> Benchmark {
    chafee_infante::build(&BenchmarkConfig::default()).expect("default Chafee-Infante setup")
}

/// Shallow ice with the default setup.
pub fn build_shallow_ice() -> Benchmark {
    shallow_ice::build(&BenchmarkConfig::default()).expect("default shallow-ice setup")
}

/// Periodic viscous Burgers with the default setup.
pub fn build_burgers() -> Benchmark {
    burgers::build(&BenchmarkConfig::default()).expect("default Burgers setup")
}

fn steps_for(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!("need positive dt and T, got dt={dt}, T={horizon}")));
    }
    Ok((horizon / dt).round() as usize)
}

/// Elementwise product of several vectors.
fn hadamard(vs: &[&DVector<f64>]) -> DVector<f64> {
    let mut out = vs[0].clone();
    for v in &vs[1..] {
        out.component_mul_assign(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::polarize;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    // Shrunk grids keep polarization (2^i black-box evaluations) cheap. The ice
    // constants are rebalanced so neither degree swamps the other in floating point.
    fn small(name: BenchmarkName) -> Benchmark {
        let mut config = BenchmarkConfig {
            dim: Some(24),
            ..Default::default()
        };
        if name == BenchmarkName::ShallowIce {
            config.c1 = Some(1.0);
            config.c2 = Some(3e3);
        }
        Benchmark::build(name, &config).unwrap()
    }

    #[test]
    fn names_round_trip() {
        for name in BenchmarkName::ALL {
            assert_eq!(name.as_str().parse::<BenchmarkName>().unwrap(), name);
        }
        assert!("heat".parse::<BenchmarkName>().is_err());
    }

    #[test]
    fn default_parameters() {
        let ci = build_chafee_infante().spec;
        assert_eq!((ci.dim, ci.mesh_width, ci.dt_pod, ci.k_pod), (128, 2f64.powi(-7), 1e-5, 10_000));
        assert_eq!((ci.degrees.clone(), ci.n_inputs, ci.n_max), (DegreeSet::new([1, 2, 3]), 1, 14));
        let ice = build_shallow_ice().spec;
        assert_eq!((ice.dim, ice.mesh_width, ice.dt_pod, ice.k_pod), (512, 1000.0 / 512.0, 1e-3, 2000));
        assert_eq!((ice.degrees.clone(), ice.n_inputs, ice.n_max), (DegreeSet::new([3, 8]), 0, 7));
        assert_eq!(ice.pod_scheme, Scheme::ImplicitEuler);
        let bu = build_burgers().spec;
        assert_eq!((bu.dim, bu.mesh_width, bu.dt_pod, bu.k_pod), (128, 2f64.powi(-6), 1e-4, 10_000));
        assert_eq!((bu.degrees.clone(), bu.n_inputs, bu.n_max), (DegreeSet::new([1, 2]), 0, 10));
    }

    #[test]
    fn polarization_agrees_with_structured_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for name in BenchmarkName::ALL {
            let b = small(name);
            let n = b.fom.dim();
            for i in b.fom.degrees().iter() {
                for _ in 0..20 {
                    // smooth-ish arguments keep the derivative terms well scaled
                    let vs: Vec<DVector<f64>> = (0..i)
                        .map(|_| {
                            let phase = rng.random_range(0.0..6.0);
                            let amp = rng.random_range(0.5..1.5);
                            DVector::from_fn(n, |j, _| 1.0 + amp * (phase + 0.3 * j as f64).sin())
                        })
                        .collect();
                    let args: Vec<&DVector<f64>> = vs.iter().collect();
                    let structured = b.fom.multilinear(i, &args).unwrap();
                    let polar = polarize(b.fom.as_ref(), i, &args).unwrap();
                    // zero maps (Chafee-Infante degree 2) are judged against the model's scale
                    let u = DVector::zeros(b.fom.input_dim());
                    let scale = structured.norm().max(b.fom.rhs(args[0], &u).norm());
                    let err = (&polar - &structured).norm() / scale;
                    assert!(err <= 1e-9, "{name} degree {i}: {err:e}");
                }
            }
        }
    }

    #[test]
    fn multilinear_sum_reproduces_rhs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for name in BenchmarkName::ALL {
            let b = small(name);
            let n = b.fom.dim();
            let x = DVector::from_fn(n, |_, _| rng.random_range(0.5..1.5));
            let u = DVector::from_fn(b.fom.input_dim(), |_, _| rng.random_range(-1.0..1.0));
            let mut sum = b.fom.input_map(&u).unwrap_or_else(|| DVector::zeros(n));
            for i in b.fom.degrees().iter() {
                let args = vec![&x; i];
                sum += b.fom.multilinear(i, &args).unwrap();
            }
            let f = b.fom.rhs(&x, &u);
            assert!((&sum - &f).norm() <= 1e-13 * f.norm(), "{name}");
        }
    }
}
