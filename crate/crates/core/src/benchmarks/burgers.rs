//! Viscous Burgers on the periodic interval (−1, 1) in energy-conserving skew form.
//!
//! Convection is discretized as `C(x) = −(D(x∘x) + x∘Dx) / 3` with `D` the
//! skew-symmetric periodic central difference, so `xᵀ C(x) = 0` identically.
//! Diffusion is the symmetric negative semi-definite periodic Laplacian.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DVector;

use super::{steps_for, Benchmark, BenchmarkConfig, BenchmarkName, BenchmarkSpec};
use crate::error::Result;
use crate::fom::{InputSignal, PolynomialFom, Scheme};
use crate::tensor_poly::DegreeSet;

#[derive(Clone, Debug)]
pub struct Burgers {
    dim: usize,
    dx: f64,
    degrees: DegreeSet,
}

impl Burgers {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            dx: 2.0 / dim as f64,
            degrees: DegreeSet::new([1, 2]),
        }
    }

    pub fn mesh_width(&self) -> f64 {
        self.dx
    }

    /// Node coordinates `ξ_j = −1 + j Δξ`.
    pub fn nodes(&self) -> DVector<f64> {
        DVector::from_fn(self.dim, |j, _| -1.0 + j as f64 * self.dx)
    }

    pub fn diffusion(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let inv = 1.0 / (self.dx * self.dx);
        DVector::from_fn(n, |j, _| (x[(j + n - 1) % n] - 2.0 * x[j] + x[(j + 1) % n]) * inv)
    }

    /// Periodic central first difference.
    pub fn derivative(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let inv = 0.5 / self.dx;
        DVector::from_fn(n, |j, _| (x[(j + 1) % n] - x[(j + n - 1) % n]) * inv)
    }

    /// Symmetric bilinear convection map; `convection(x, x) = C(x)`.
    pub fn convection(&self, a: &DVector<f64>, b: &DVector<f64>) -> DVector<f64> {
        let da = self.derivative(a);
        let db = self.derivative(b);
        let cross = (a.component_mul(&db) + b.component_mul(&da)) * 0.5;
        (self.derivative(&a.component_mul(b)) + cross) * (-1.0 / 3.0)
    }
}

impl PolynomialFom for Burgers {
    fn dim(&self) -> usize {
        self.dim
    }

    fn degrees(&self) -> &DegreeSet {
        &self.degrees
    }

    fn input_dim(&self) -> usize {
        0
    }

    fn rhs(&self, x: &DVector<f64>, _u: &DVector<f64>) -> DVector<f64> {
        let dxx = self.derivative(&x.component_mul(x));
        let xdx = x.component_mul(&self.derivative(x));
        self.diffusion(x) - (dxx + xdx) / 3.0
    }

    fn multilinear(&self, degree: usize, args: &[&DVector<f64>]) -> Option<DVector<f64>> {
        match degree {
            1 => Some(self.diffusion(args[0])),
            2 => Some(self.convection(args[0], args[1])),
            _ => None,
        }
    }

    fn input_map(&self, _u: &DVector<f64>) -> Option<DVector<f64>> {
        Some(DVector::zeros(self.dim))
    }
}

pub(super) fn build(config: &BenchmarkConfig) -> Result<Benchmark> {
    let dim = config.dim.unwrap_or(128);
    let dt = config.dt.unwrap_or(1e-4);
    let horizon = config.horizon.unwrap_or(1.0);
    let fom = Burgers::new(dim);
    let x0 = fom.nodes().map(|xi| -(PI * xi / 2.0).sin());
    let spec = BenchmarkSpec {
        name: BenchmarkName::Burgers,
        dim,
        mesh_width: fom.mesh_width(),
        dt_pod: dt,
        horizon,
        k_pod: steps_for(horizon, dt)?,
        pod_scheme: Scheme::ExplicitEuler,
        degrees: fom.degrees.clone(),
        n_inputs: 0,
        n_max: config.n_max.unwrap_or(10),
    };
    Ok(Benchmark {
        spec,
        fom: Arc::new(fom),
        signal: InputSignal::zero(0),
        x0,
    })
}
