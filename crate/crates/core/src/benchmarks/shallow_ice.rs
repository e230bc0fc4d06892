//! One-dimensional shallow ice flow, a degree {3, 8} polynomial model without input.
//!
//! The flux is `q(x) = c1 x² ∂x + c2 x⁵ (∂x)³`. By default the model evolves
//! `x_t = ∂(q(x))`; [`IceForm::Literal`] drops the outer derivative and evolves
//! `x_t = q(x)` instead. Derivatives are central differences on cell centers
//! with mirrored ghost cells at both ends.

use std::sync::Arc;

use nalgebra::DVector;

use super::{hadamard, steps_for, Benchmark, BenchmarkConfig, BenchmarkName, BenchmarkSpec};
use crate::error::{Error, Result};
use crate::fom::{InputSignal, PolynomialFom, Scheme};
use crate::tensor_poly::DegreeSet;

pub const C1: f64 = 8.9e-13;
pub const C2: f64 = 2.8e7;
pub const DOMAIN_LENGTH: f64 = 1000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IceForm {
    Divergence,
    Literal,
}

#[derive(Clone, Debug)]
pub struct ShallowIce {
    dim: usize,
    dx: f64,
    c1: f64,
    c2: f64,
    form: IceForm,
    degrees: DegreeSet,
}

impl ShallowIce {
    pub fn new(dim: usize, c1: f64, c2: f64, form: IceForm) -> Self {
        Self {
            dim,
            dx: DOMAIN_LENGTH / dim as f64,
            c1,
            c2,
            form,
            degrees: DegreeSet::new([3, 8]),
        }
    }

    pub fn mesh_width(&self) -> f64 {
        self.dx
    }

    /// Cell centers `(j + 1/2) Δξ`, `j = 0..N`.
    pub fn centers(&self) -> DVector<f64> {
        DVector::from_fn(self.dim, |j, _| (j as f64 + 0.5) * self.dx)
    }

    pub fn derivative(&self, x: &DVector<f64>) -> DVector<f64> {
        let n = self.dim;
        let inv = 0.5 / self.dx;
        DVector::from_fn(n, |j, _| {
            let left = x[j.saturating_sub(1)];
            let right = x[(j + 1).min(n - 1)];
            (right - left) * inv
        })
    }

    fn outer(&self, flux: DVector<f64>) -> DVector<f64> {
        match self.form {
            IceForm::Divergence => self.derivative(&flux),
            IceForm::Literal => flux,
        }
    }
}

impl PolynomialFom for ShallowIce {
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
        let d = self.derivative(x);
        let flux = x.zip_map(&d, |v, g| self.c1 * v * v * g + self.c2 * v.powi(5) * g * g * g);
        self.outer(flux)
    }

    fn multilinear(&self, degree: usize, args: &[&DVector<f64>]) -> Option<DVector<f64>> {
        let derivs: Vec<DVector<f64>> = args.iter().map(|a| self.derivative(a)).collect();
        let flux = match degree {
            3 => {
                let mut acc = DVector::zeros(self.dim);
                for k in 0..3 {
                    let mut term = derivs[k].clone();
                    for (m, a) in args.iter().enumerate() {
                        if m != k {
                            term.component_mul_assign(a);
                        }
                    }
                    acc += term;
                }
                acc * (self.c1 / 3.0)
            }
            8 => {
                // choose which three arguments sit in derivative slots: C(8,3) = 56 roles
                let mut acc = DVector::zeros(self.dim);
                for a in 0..8 {
                    for b in a + 1..8 {
                        for c in b + 1..8 {
                            let mut factors: Vec<&DVector<f64>> = vec![&derivs[a], &derivs[b], &derivs[c]];
                            factors.extend(args.iter().enumerate().filter(|(m, _)| ![a, b, c].contains(m)).map(|(_, v)| *v));
                            acc += hadamard(&factors);
                        }
                    }
                }
                acc * (self.c2 / 56.0)
            }
            _ => return None,
        };
        Some(self.outer(flux))
    }

    fn jacobian_bandwidth(&self) -> Option<usize> {
        Some(match self.form {
            IceForm::Divergence => 2,
            IceForm::Literal => 1,
        })
    }
}

pub(super) fn build(config: &BenchmarkConfig) -> Result<Benchmark> {
    let dim = config.dim.unwrap_or(512);
    let dt = config.dt.unwrap_or(1e-3);
    let horizon = config.horizon.unwrap_or(2.0);
    let form = match config.form.as_deref() {
        None | Some("divergence") => IceForm::Divergence,
        Some("literal") => IceForm::Literal,
        Some(other) => return Err(Error::InvalidArgument(format!("unknown ice form '{other}'"))),
    };
    let fom = ShallowIce::new(dim, config.c1.unwrap_or(C1), config.c2.unwrap_or(C2), form);
    let x0 = fom.centers().map(initial_thickness);
    let spec = BenchmarkSpec {
        name: BenchmarkName::ShallowIce,
        dim,
        mesh_width: fom.mesh_width(),
        dt_pod: dt,
        horizon,
        k_pod: steps_for(horizon, dt)?,
        pod_scheme: Scheme::ImplicitEuler,
        degrees: fom.degrees.clone(),
        n_inputs: 0,
        n_max: config.n_max.unwrap_or(7),
    };
    Ok(Benchmark {
        spec,
        fom: Arc::new(fom),
        signal: InputSignal::zero(0),
        x0,
    })
}

pub fn initial_thickness(xi: f64) -> f64 {
    let s = xi / 2000.0;
    1e-2 + 630.0 * (s + 0.25).powi(4) * (s - 0.75).powi(4)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fom::{eval_rhs, homogeneous_part};

    #[test]
    fn constant_thickness_is_steady() {
        for form in [IceForm::Divergence, IceForm::Literal] {
            let fom = ShallowIce::new(512, C1, C2, form);
            let f = eval_rhs(&fom, &DVector::from_element(512, 3.0), &DVector::zeros(0)).unwrap();
            assert_eq!(f.amax(), 0.0);
        }
    }

    #[test]
    fn initial_profile_midpoint() {
        // (0.5)^4 (−0.5)^4 = 1/256
        assert!((initial_thickness(500.0) - (1e-2 + 630.0 / 256.0)).abs() < 1e-15);
        let b = super::super::build_shallow_ice();
        assert_eq!(b.x0.len(), 512);
        assert!((b.x0[0] - initial_thickness(1000.0 / 1024.0)).abs() < 1e-15);
    }

    #[test]
    fn cubic_term_matches_pointwise_formula() {
        // with c2 present the degree-8 part is ~1e15 times larger, beyond what
        // a scaling-based split can separate in double precision
        let fom = ShallowIce::new(512, C1, 0.0, IceForm::Literal);
        let x = fom.centers().map(initial_thickness);
        let d = fom.derivative(&x);
        let expect = x.zip_map(&d, |v, g| C1 * v * v * g);
        let h3 = homogeneous_part(&fom, 3, &x).unwrap();
        assert!((&h3 - &expect).norm() <= 1e-8 * expect.norm(), "{:e}", (&h3 - &expect).norm() / expect.norm());
        let direct = fom.multilinear(3, &[&x, &x, &x]).unwrap();
        assert!((&direct - &expect).norm() <= 1e-14 * expect.norm());
    }
}
