//! Intrusive Galerkin reduction and simulation of the reduced model.

use nalgebra::{DMatrix, DMatrixView, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fom::{simulate, InputSignal, PolynomialFom, Scheme, SnapshotMatrix};
use crate::tensor_poly::{enumerate_monomials, DegreeSet, MonomialBasis};

/// Reduced operator `[Ã_i for i ∈ I | B̃] ∈ R^{n×n_f}`, column-aligned with its feature layout.
#[derive(Clone, Debug, PartialEq)]
pub struct AggregatedOperator {
    basis: MonomialBasis,
    matrix: DMatrix<f64>,
}

impl AggregatedOperator {
    pub fn new(basis: MonomialBasis, matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != basis.n() {
            return Err(Error::DimensionMismatch {
                context: "operator rows",
                expected: basis.n(),
                actual: matrix.nrows(),
            });
        }
        if matrix.ncols() != basis.n_features() {
            return Err(Error::DimensionMismatch {
                context: "operator columns",
                expected: basis.n_features(),
                actual: matrix.ncols(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "operator entries".into(),
            });
        }
        Ok(Self { basis, matrix })
    }

    pub fn basis(&self) -> &MonomialBasis {
        &self.basis
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n(&self) -> usize {
        self.basis.n()
    }

    /// `Ã_i`, or `None` if `i ∉ I`.
    pub fn block(&self, degree: usize) -> Option<DMatrixView<'_, f64>> {
        let r = self.basis.block_range(degree)?;
        Some(self.matrix.columns(r.start, r.len()))
    }

    /// `B̃`.
    pub fn input_block(&self) -> DMatrixView<'_, f64> {
        let r = self.basis.input_range();
        self.matrix.columns(r.start, r.len())
    }

    /// `Õ p(x̃, u)`.
    pub fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        Ok(&self.matrix * self.basis.feature_vector(x.as_slice(), u.as_slice())?)
    }
}

/// Precomputes `Ã_i = V^T A_i (V ⊗ … ⊗ V)` compressed, and `B̃ = V^T B`.
///
/// The column for tuple `(j_1 … j_i)` is `V^T H_i(v_j1, …, v_ji)` scaled by the
/// number of distinct orderings of the tuple, because the compressed monomial
/// appears that many times in `(V x̃)^{i⊗}`.
pub fn reduce(fom: &dyn PolynomialFom, v: &DMatrix<f64>) -> Result<AggregatedOperator> {
    if v.nrows() != fom.dim() {
        return Err(Error::DimensionMismatch {
            context: "basis rows",
            expected: fom.dim(),
            actual: v.nrows(),
        });
    }
    let n = v.ncols();
    let basis = MonomialBasis::new(n, fom.degrees().clone(), fom.input_dim())?;
    let vt = v.transpose();
    let modes: Vec<DVector<f64>> = (0..n).map(|j| v.column(j).into_owned()).collect();
    let mut matrix = DMatrix::zeros(n, basis.n_features());

    for i in fom.degrees().iter() {
        let tuples = enumerate_monomials(n, i)?;
        let columns: Vec<DVector<f64>> = tuples
            .par_iter()
            .map(|t| {
                let args: Vec<&DVector<f64>> = t.indices().iter().map(|&j| &modes[j]).collect();
                let h = fom.multilinear(i, &args).ok_or(Error::NoMultilinearAccess { degree: i })?;
                Ok(&vt * h * t.permutations())
            })
            .collect::<Result<_>>()?;
        let start = basis.block_range(i).expect("degree in basis").start;
        for (k, c) in columns.iter().enumerate() {
            matrix.set_column(start + k, c);
        }
    }

    let start = basis.input_range().start;
    for j in 0..fom.input_dim() {
        let mut e = DVector::zeros(fom.input_dim());
        e[j] = 1.0;
        let b = fom
            .input_map(&e)
            .ok_or_else(|| Error::InvalidArgument("model does not expose its input map".into()))?;
        matrix.set_column(start + j, &(&vt * b));
    }
    AggregatedOperator::new(basis, matrix)
}

pub fn rom_rhs(op: &AggregatedOperator, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    op.rhs(x, u)
}

/// The reduced model as a dense polynomial system, so the full-order integrators apply.
#[derive(Clone, Debug)]
pub struct ReducedModel {
    op: AggregatedOperator,
}

impl ReducedModel {
    pub fn new(op: AggregatedOperator) -> Self {
        Self { op }
    }

    pub fn operator(&self) -> &AggregatedOperator {
        &self.op
    }
}

impl PolynomialFom for ReducedModel {
    fn dim(&self) -> usize {
        self.op.n()
    }

    fn degrees(&self) -> &DegreeSet {
        self.op.basis.degrees()
    }

    fn input_dim(&self) -> usize {
        self.op.basis.n_inputs()
    }

    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        self.op.rhs(x, u).expect("dimensions checked by the integrator")
    }

    fn input_map(&self, u: &DVector<f64>) -> Option<DVector<f64>> {
        Some(self.op.input_block() * u)
    }
}

pub fn rom_simulate(
    op: &AggregatedOperator,
    x0: &DVector<f64>,
    signal: &InputSignal,
    dt: f64,
    steps: usize,
    scheme: Scheme,
) -> Result<SnapshotMatrix> {
    simulate(&ReducedModel::new(op.clone()), x0, signal, dt, steps, scheme)
}
