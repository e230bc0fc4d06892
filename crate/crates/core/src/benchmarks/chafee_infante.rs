//! `x_t = x_ξξ + x − x³` on (0, 1), Dirichlet input on the left.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;

use super::{hadamard, steps_for, Benchmark, BenchmarkConfig, BenchmarkName, BenchmarkSpec};
use crate::error::{Error, Result};
use crate::fom::{InputSignal, PolynomialFom, Scheme};
use crate::tensor_poly::DegreeSet;

/// Treatment of the node at ξ = 1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RightBoundary {
    /// Homogeneous Neumann via a mirrored ghost value.
    Neumann,
    /// The last node's time derivative is held at zero.
    Frozen,
}

/// Central second differences on `N` nodes; the boundary value `u` enters the
/// first node's stencil through `B = e_1 / Δξ²`.
#[derive(Clone, Debug)]
pub struct ChafeeInfante {
    dim: usize,
    dx: f64,
    right: RightBoundary,
    degrees: DegreeSet,
}

impl ChafeeInfante {
    pub fn new(dim: usize, right: RightBoundary) -> Self {
        Self {
            dim,
            dx: 1.0 / dim as f64,
            right,
            degrees: DegreeSet::new([1, 2, 3]),
        }
    }

    pub fn mesh_width(&self) -> f64 {
        self.dx
    }

    /// Diffusion plus the `+x` reaction term.
    fn linear(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let inv = 1.0 / (self.dx * self.dx);
        let mut out = DVector::from_fn(n, |j, _| {
            let left = if j == 0 { 0.0 } else { x[j - 1] };
            let right = if j + 1 == n { x[j] } else { x[j + 1] };
            (left - 2.0 * x[j] + right) * inv + x[j]
        });
        self.apply_boundary(&mut out);
        out
    }

    fn apply_boundary(&self, out: &mut DVector<f64>) {
        if self.right == RightBoundary::Frozen {
            out[self.dim - 1] = 0.0;
        }
    }
}

impl PolynomialFom for ChafeeInfante {
    fn dim(&self) -> usize {
        self.dim
    }

    fn degrees(&self) -> &DegreeSet {
        &self.degrees
    }

    fn input_dim(&self) -> usize {
        1
    }

    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut out = self.linear(x) - x.map(|v| v * v * v);
        out[0] += u[0] / (self.dx * self.dx);
        self.apply_boundary(&mut out);
        out
    }

    fn multilinear(&self, degree: usize, args: &[&DVector<f64>]) -> Option<DVector<f64>> {
        match degree {
            1 => Some(self.linear(args[0])),
            // present in the degree set but identically zero
            2 => Some(DVector::zeros(self.dim)),
            3 => {
                let mut out = -hadamard(args);
                self.apply_boundary(&mut out);
                Some(out)
            }
            _ => None,
        }
    }

    fn input_map(&self, u: &DVector<f64>) -> Option<DVector<f64>> {
        let mut out = DVector::zeros(self.dim);
        out[0] = u[0] / (self.dx * self.dx);
        Some(out)
    }

    fn jacobian_bandwidth(&self) -> Option<usize> {
        Some(1)
    }
}

pub(super) fn build(config: &BenchmarkConfig) -> Result<Benchmark> {
    let dim = config.dim.unwrap_or(128);
    let dt = config.dt.unwrap_or(1e-5);
    let horizon = config.horizon.unwrap_or(0.1);
    let right = match config.boundary.as_deref() {
        None | Some("neumann") => RightBoundary::Neumann,
        Some("frozen") => RightBoundary::Frozen,
        Some(other) => return Err(Error::InvalidArgument(format!("unknown boundary '{other}'"))),
    };
    let fom = ChafeeInfante::new(dim, right);
    let spec = BenchmarkSpec {
        name: BenchmarkName::ChafeeInfante,
        dim,
        mesh_width: fom.mesh_width(),
        dt_pod: dt,
        horizon,
        k_pod: steps_for(horizon, dt)?,
        pod_scheme: Scheme::ExplicitEuler,
        degrees: fom.degrees.clone(),
        n_inputs: 1,
        n_max: config.n_max.unwrap_or(14),
    };
    Ok(Benchmark {
        spec,
        fom: Arc::new(fom),
        // u_k = 10 (sin(k π Δt) + 1) with t_k = k Δt
        signal: InputSignal::new(1, |t| DVector::from_element(1, 10.0 * ((PI * t).sin() + 1.0))),
        x0: DVector::zeros(dim),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::{eval_rhs, homogeneous_part};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_state_zero_input_is_equilibrium() {
        let b = super::super::build_chafee_infante();
        let f = eval_rhs(b.fom.as_ref(), &DVector::zeros(128), &DVector::zeros(1)).unwrap();
        assert_eq!(f.amax(), 0.0);
    }

    #[test]
    fn input_enters_first_node_only() {
        let b = super::super::build_chafee_infante();
        let u = 3.5;
        let f = eval_rhs(b.fom.as_ref(), &DVector::zeros(128), &DVector::from_element(1, u)).unwrap();
        let nonzero: Vec<usize> = (0..128).filter(|&j| f[j] != 0.0).collect();
        assert_eq!(nonzero, vec![0]);
        let dx = 2f64.powi(-7);
        assert!((f[0] - u / (dx * dx)).abs() <= 1e-12 * f[0]);
    }

    #[test]
    fn quadratic_part_vanishes() {
        let b = super::super::build_chafee_infante();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = DVector::from_fn(128, |_, _| rng.random_range(-1.0..1.0));
        let f = eval_rhs(b.fom.as_ref(), &x, &DVector::zeros(1)).unwrap();
        let h2 = homogeneous_part(b.fom.as_ref(), 2, &x).unwrap();
        assert!(h2.norm() <= 1e-10 * f.norm(), "{:e}", h2.norm());
    }

    #[test]
    fn input_signal_starts_at_ten() {
        let b = super::super::build_chafee_infante();
        assert_eq!(b.signal.at(0.0)[0], 10.0);
        assert!((b.signal.at(0.5)[0] - 20.0).abs() < 1e-12);
    }

    #[test]
    fn trajectory_stays_below_the_peak_boundary_value() {
        let b = super::super::build_chafee_infante();
        let snaps = b.pod_snapshots().unwrap();
        let x = &snaps.states;
        assert!(x.iter().all(|v| v.is_finite()));
        // discrete maximum principle: x - x^3 pulls values above 1 back down
        let peak_input = 10.0 * ((PI * b.spec.horizon).sin() + 1.0);
        assert!(x.amax() <= peak_input, "{}", x.amax());
        assert!(x.amax() > 11.0);
    }

    #[test]
    fn frozen_boundary_holds_last_node() {
        let config = BenchmarkConfig {
            boundary: Some("frozen".into()),
            ..Default::default()
        };
        let b = build(&config).unwrap();
        let x = DVector::from_fn(128, |j, _| (j as f64 * 0.1).sin());
        let f = b.fom.rhs(&x, &DVector::from_element(1, 1.0));
        assert_eq!(f[127], 0.0);
        assert!(build(&BenchmarkConfig {
            boundary: Some("periodic".into()),
            ..Default::default()
        })
        .is_err());
    }
}
