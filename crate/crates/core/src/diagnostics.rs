//! Figures of merit for inferred operators.

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};
use crate::galerkin::AggregatedOperator;
use crate::tensor_poly::MonomialTuple;

pub use crate::linalg::condition_number;

/// `‖a − reference‖_F / ‖reference‖_F`.
pub fn relative_error(a: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != reference.shape() {
        return Err(Error::DimensionMismatch {
            context: "operator shapes",
            expected: reference.ncols(),
            actual: a.ncols(),
        });
    }
    let denom = reference.norm();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((a - reference).norm() / denom)
}

pub fn relative_operator_error(inferred: &AggregatedOperator, reference: &AggregatedOperator) -> Result<f64> {
    if inferred.basis() != reference.basis() {
        return Err(Error::InvalidArgument("operators use different feature layouts".into()));
    }
    relative_error(inferred.matrix(), reference.matrix())
}

/// Error of each block (`A<i>` per degree, then `B`), scaled by `‖reference‖_F`
/// so that blocks which vanish in the reference still get a finite value.
pub fn block_errors(inferred: &AggregatedOperator, reference: &AggregatedOperator) -> Result<Vec<(String, f64)>> {
    if inferred.basis() != reference.basis() {
        return Err(Error::InvalidArgument("operators use different feature layouts".into()));
    }
    let denom = reference.matrix().norm();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    let basis = reference.basis();
    let mut out = Vec::new();
    for i in basis.degrees().iter() {
        let r = basis.block_range(i).expect("degree in layout");
        let d = (inferred.matrix().columns(r.start, r.len()) - reference.matrix().columns(r.start, r.len())).norm();
        out.push((format!("A{i}"), d / denom));
    }
    if basis.n_inputs() > 0 {
        let d = (inferred.input_block() - reference.input_block()).norm();
        out.push(("B".to_string(), d / denom));
    }
    Ok(out)
}

/// `Σ_ijk |h_ijk + h_jik + h_kji|` for the evenly split quadratic tensor.
///
/// `h_ijk` is row `i` of the column for the sorted pair `(j, k)`, halved when
/// `j ≠ k`, so `h_i·· ` is the symmetric matrix of the quadratic form in row `i`.
pub fn energy_violation(a2: DMatrixView<'_, f64>) -> Result<f64> {
    let n = a2.nrows();
    let expected = n * (n + 1) / 2;
    if a2.ncols() != expected {
        return Err(Error::DimensionMismatch {
            context: "quadratic block columns",
            expected,
            actual: a2.ncols(),
        });
    }
    let h = |i: usize, j: usize, k: usize| {
        let col = MonomialTuple::new(vec![j, k]).rank(n);
        let split = if j == k { 1.0 } else { 2.0 };
        a2[(i, col)] / split
    };
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                total += (h(i, j, k) + h(j, i, k) + h(k, j, i)).abs();
            }
        }
    }
    Ok(total)
}

/// `‖a1 − a1^T‖_F / ‖a1‖_F`.
pub fn symmetry_violation(a1: DMatrixView<'_, f64>) -> Result<f64> {
    if !a1.is_square() {
        return Err(Error::DimensionMismatch {
            context: "linear block must be square",
            expected: a1.nrows(),
            actual: a1.ncols(),
        });
    }
    let denom = a1.norm();
    if denom == 0.0 {
        return Err(Error::ZeroReference);
    }
    Ok((a1 - a1.transpose()).norm() / denom)
}

/// Eigenvalues of `−(a1 + a1^T)/2`, ascending.
pub fn diffusion_spectrum(a1: DMatrixView<'_, f64>) -> Result<Vec<f64>> {
    if !a1.is_square() {
        return Err(Error::DimensionMismatch {
            context: "linear block must be square",
            expected: a1.nrows(),
            actual: a1.ncols(),
        });
    }
    let sym = (a1 + a1.transpose()) * -0.5;
    let mut eig: Vec<f64> = sym.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// One (benchmark, n) row of results.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagnosticsReport {
    pub n: usize,
    pub n_features: usize,
    pub relative_error: f64,
    pub block_errors: Vec<(String, f64)>,
    pub cond_p: f64,
    pub energy_violation: Option<f64>,
    pub symmetry_violation: Option<f64>,
    pub spectrum_inferred: Option<Vec<f64>>,
    pub spectrum_intrusive: Option<Vec<f64>>,
}

impl DiagnosticsReport {
    /// Compares an inferred operator with the intrusive one. The structure
    /// metrics need a linear and a quadratic block and are `None` otherwise.
    pub fn compute(inferred: &AggregatedOperator, intrusive: &AggregatedOperator, cond_p: f64) -> Result<Self> {
        let quadratic = inferred.block(2).filter(|_| inferred.basis().degrees().contains(1));
        let linear = inferred.block(1);
        Ok(Self {
            n: inferred.n(),
            n_features: inferred.basis().n_features(),
            relative_error: relative_operator_error(inferred, intrusive)?,
            block_errors: block_errors(inferred, intrusive)?,
            cond_p,
            energy_violation: quadratic.map(energy_violation).transpose()?,
            symmetry_violation: linear.and_then(|a| symmetry_violation(a).ok()),
            spectrum_inferred: linear.map(diffusion_spectrum).transpose()?,
            spectrum_intrusive: intrusive.block(1).map(diffusion_spectrum).transpose()?,
        })
    }

    /// CSV header matching [`Self::csv_row`].
    pub fn csv_header(&self) -> String {
        let mut cols = vec!["n".to_string(), "n_f".into(), "relative_error".into()];
        cols.extend(self.block_errors.iter().map(|(name, _)| format!("error_{name}")));
        cols.extend(["cond_P".into(), "energy_violation".into(), "symmetry_violation".into()]);
        cols.join(",")
    }

    pub fn csv_row(&self) -> String {
        let mut cols = vec![self.n.to_string(), self.n_features.to_string(), fmt_f64(self.relative_error)];
        cols.extend(self.block_errors.iter().map(|(_, e)| fmt_f64(*e)));
        cols.push(fmt_f64(self.cond_p));
        cols.push(self.energy_violation.map(fmt_f64).unwrap_or_default());
        cols.push(self.symmetry_violation.map(fmt_f64).unwrap_or_default());
        cols.join(",")
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}
