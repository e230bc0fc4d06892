//! Exact operator inference from single-step snapshot ensembles.
//!
//! For every compressed monomial the reduced state `x̄` is the sum of the unit
//! vectors named by its index tuple, and every input gets one unit-input pair.
//! One explicit Euler step of the full model from `V x̄` then yields the exact
//! projected right-hand side `V^T f(V x̄, ū)`, and the resulting square system
//! `Ô P = Ẋ` is uniquely solvable.

use std::collections::HashMap;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fom::{explicit_euler_step, PolynomialFom, SnapshotMatrix};
use crate::galerkin::AggregatedOperator;
use crate::linalg;
use crate::tensor_poly::{enumerate_monomials, DegreeSet, MonomialBasis, MonomialTuple};

/// Relative pivot threshold of the square solve.
pub const PIVOT_TOL: f64 = 1e-14;

/// Largest deviation allowed between the shared columns of two nested bases.
pub const BASIS_MATCH_TOL: f64 = 1e-14;

/// Where a snapshot pair comes from.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Provenance {
    Monomial(MonomialTuple),
    /// Unit input `e_j` (0-based).
    Input(usize),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Monomial(t) => write!(f, "x{t}"),
            Provenance::Input(j) => write!(f, "u{}", j + 1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RankEnsuringPair {
    pub state: DVector<f64>,
    pub input: DVector<f64>,
    pub provenance: Provenance,
}

fn tuple_state(n: usize, t: &MonomialTuple) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for &j in t.indices() {
        x[j] += 1.0;
    }
    x
}

/// `X^i` for each `i ∈ I` ascending, each in canonical monomial order.
pub fn rank_ensuring_states(n: usize, degrees: &DegreeSet) -> Result<Vec<DVector<f64>>> {
    Ok(rank_ensuring_pairs(n, degrees, 0)?.into_iter().map(|p| p.state).collect())
}

/// State pairs `(x̄, 0)` followed by input pairs `(0, e_j)`; exactly `n_f` of them.
pub fn rank_ensuring_pairs(n: usize, degrees: &DegreeSet, n_inputs: usize) -> Result<Vec<RankEnsuringPair>> {
    if n == 0 {
        return Err(Error::InvalidArgument("reduced dimension must be at least 1".into()));
    }
    let mut pairs = Vec::new();
    for i in degrees.iter() {
        for t in enumerate_monomials(n, i)? {
            pairs.push(RankEnsuringPair {
                state: tuple_state(n, &t),
                input: DVector::zeros(n_inputs),
                provenance: Provenance::Monomial(t),
            });
        }
    }
    for j in 0..n_inputs {
        let mut u = DVector::zeros(n_inputs);
        u[j] = 1.0;
        pairs.push(RankEnsuringPair {
            state: DVector::zeros(n),
            input: u,
            provenance: Provenance::Input(j),
        });
    }
    Ok(pairs)
}

/// Step size from the dominant POD coordinate of a trajectory.
///
/// Returns the reciprocal of `max_k |v_1^T (x_{k+1} − x_k)/(t_{k+1} − t_k)| / ‖p(v_1^T x_k, u(t_k))‖`
/// with `p` the one-dimensional feature map; terms with a vanishing
/// denominator are skipped.
pub fn estimate_dt(snapshots: &SnapshotMatrix, modes: &DMatrix<f64>, degrees: &DegreeSet) -> Result<f64> {
    if snapshots.len() < 2 {
        return Err(Error::InvalidArgument("need at least two snapshots".into()));
    }
    if modes.ncols() == 0 || modes.nrows() != snapshots.state_dim() {
        return Err(Error::DimensionMismatch {
            context: "estimate_dt basis rows",
            expected: snapshots.state_dim(),
            actual: modes.nrows(),
        });
    }
    let basis = MonomialBasis::new(1, degrees.clone(), snapshots.input_dim())?;
    let v1 = modes.column(0);
    let coords = v1.transpose() * &snapshots.states;
    let mut worst = None::<f64>;
    for k in 0..snapshots.len() - 1 {
        let xk = coords[k];
        let u: Vec<f64> = snapshots.inputs.column(k).iter().copied().collect();
        let denom = basis.feature_vector(&[xk], &u)?.norm();
        if denom < 1e-300 {
            continue;
        }
        let rate = ((coords[k + 1] - xk) / (snapshots.times[k + 1] - snapshots.times[k])).abs();
        let q = rate / denom;
        worst = Some(worst.map_or(q, |w| w.max(q)));
    }
    match worst {
        Some(q) if q > 0.0 => Ok(1.0 / q),
        Some(_) => Err(Error::InvalidArgument("trajectory is stationary along the first mode".into())),
        None => Err(Error::CannotEstimate),
    }
}

/// The single-step data `(P, Ẋ)` behind one inference.
#[derive(Clone, Debug)]
pub struct SnapshotEnsemble {
    pub basis: MonomialBasis,
    pub pairs: Vec<RankEnsuringPair>,
    /// `P ∈ R^{n_f×K}`.
    pub features: DMatrix<f64>,
    /// `Ẋ ∈ R^{n×K}`.
    pub derivatives: DMatrix<f64>,
    pub dt: f64,
    /// Full-order increments `x_1 − x_0`, one column per pair, kept for reuse.
    pub increments: Option<DMatrix<f64>>,
    /// The basis used to lift the states; needed to extend the ensemble.
    pub modes: Option<DMatrix<f64>>,
}

impl SnapshotEnsemble {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Assembles an ensemble from stored triples; used to re-run inference offline.
    pub fn from_triples(basis: MonomialBasis, pairs: Vec<RankEnsuringPair>, derivatives: DMatrix<f64>, dt: f64) -> Result<Self> {
        if derivatives.ncols() != pairs.len() || derivatives.nrows() != basis.n() {
            return Err(Error::DimensionMismatch {
                context: "ensemble derivatives",
                expected: pairs.len(),
                actual: derivatives.ncols(),
            });
        }
        let features = feature_matrix(&basis, &pairs)?;
        Ok(Self {
            basis,
            pairs,
            features,
            derivatives,
            dt,
            increments: None,
            modes: None,
        })
    }
}

fn feature_matrix(basis: &MonomialBasis, pairs: &[RankEnsuringPair]) -> Result<DMatrix<f64>> {
    let mut p = DMatrix::zeros(basis.n_features(), pairs.len());
    for (s, pair) in pairs.iter().enumerate() {
        p.set_column(s, &basis.feature_vector(pair.state.as_slice(), pair.input.as_slice())?);
    }
    Ok(p)
}

// V x̄ summed over the nonzero entries only, in index order, so a state lifted
// with a nested basis is bit-identical to the one lifted with the smaller basis.
fn lift(v: &DMatrix<f64>, xbar: &DVector<f64>) -> DVector<f64> {
    let mut x = DVector::zeros(v.nrows());
    for (j, &c) in xbar.iter().enumerate() {
        if c != 0.0 {
            x.axpy(c, &v.column(j), 1.0);
        }
    }
    x
}

fn single_steps(
    fom: &dyn PolynomialFom,
    v: &DMatrix<f64>,
    pairs: &[(usize, &RankEnsuringPair)],
    dt: f64,
) -> Result<Vec<DVector<f64>>> {
    pairs
        .par_iter()
        .map(|&(index, pair)| {
            let x0 = lift(v, &pair.state);
            explicit_euler_step(fom, &x0, &pair.input, dt)
                .map(|x1| x1 - x0)
                .map_err(|e| Error::PairFailed {
                    index,
                    provenance: pair.provenance.to_string(),
                    source: Box::new(e),
                })
        })
        .collect()
}

fn check_basis(fom: &dyn PolynomialFom, v: &DMatrix<f64>, dt: f64) -> Result<()> {
    if v.nrows() != fom.dim() {
        return Err(Error::DimensionMismatch {
            context: "basis rows",
            expected: fom.dim(),
            actual: v.nrows(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

fn assemble(
    basis: MonomialBasis,
    pairs: Vec<RankEnsuringPair>,
    increments: DMatrix<f64>,
    v: &DMatrix<f64>,
    dt: f64,
) -> Result<SnapshotEnsemble> {
    let features = feature_matrix(&basis, &pairs)?;
    let derivatives = (v.transpose() * &increments) / dt;
    Ok(SnapshotEnsemble {
        basis,
        pairs,
        features,
        derivatives,
        dt,
        increments: Some(increments),
        modes: Some(v.clone()),
    })
}

/// One explicit Euler step from `V x̄_s` for every pair; columns in pair order.
pub fn generate_ensemble(
    fom: &dyn PolynomialFom,
    v: &DMatrix<f64>,
    pairs: Vec<RankEnsuringPair>,
    dt: f64,
) -> Result<SnapshotEnsemble> {
    check_basis(fom, v, dt)?;
    let basis = MonomialBasis::new(v.ncols(), fom.degrees().clone(), fom.input_dim())?;
    let indexed: Vec<(usize, &RankEnsuringPair)> = pairs.iter().enumerate().collect();
    let columns = single_steps(fom, v, &indexed, dt)?;
    let mut increments = DMatrix::zeros(fom.dim(), pairs.len());
    for (s, c) in columns.iter().enumerate() {
        increments.set_column(s, c);
    }
    assemble(basis, pairs, increments, v, dt)
}

/// Grows an ensemble to a larger nested basis, stepping the full model only for new pairs.
///
/// Returns the new ensemble and how many full-order steps were reused.
pub fn extend_ensemble(
    old: &SnapshotEnsemble,
    fom: &dyn PolynomialFom,
    v: &DMatrix<f64>,
) -> Result<(SnapshotEnsemble, usize)> {
    let (Some(old_v), Some(old_inc)) = (&old.modes, &old.increments) else {
        return Err(Error::InvalidArgument("ensemble carries no full-order data to reuse".into()));
    };
    let n = old_v.ncols();
    if v.ncols() <= n {
        return Err(Error::InvalidArgument(format!(
            "extension needs more than {n} modes, got {}",
            v.ncols()
        )));
    }
    check_basis(fom, v, old.dt)?;
    let deviation = (v.columns(0, n) - old_v).amax();
    if !(deviation <= BASIS_MATCH_TOL) {
        return Err(Error::BasisMismatch { deviation });
    }

    let pairs = rank_ensuring_pairs(v.ncols(), fom.degrees(), fom.input_dim())?;
    let lookup: HashMap<&Provenance, usize> = old.pairs.iter().enumerate().map(|(s, p)| (&p.provenance, s)).collect();
    let fresh: Vec<(usize, &RankEnsuringPair)> = pairs
        .iter()
        .enumerate()
        .filter(|(_, p)| !lookup.contains_key(&p.provenance))
        .collect();
    let new_columns = single_steps(fom, v, &fresh, old.dt)?;

    let mut increments = DMatrix::zeros(fom.dim(), pairs.len());
    let mut reused = 0;
    for (s, p) in pairs.iter().enumerate() {
        if let Some(&o) = lookup.get(&p.provenance) {
            increments.set_column(s, &old_inc.column(o));
            reused += 1;
        }
    }
    for ((s, _), c) in fresh.iter().zip(&new_columns) {
        increments.set_column(*s, c);
    }
    let basis = MonomialBasis::new(v.ncols(), fom.degrees().clone(), fom.input_dim())?;
    Ok((assemble(basis, pairs, increments, v, old.dt)?, reused))
}

/// Result of the square inference solve.
#[derive(Clone, Debug)]
pub struct Inference {
    pub operator: AggregatedOperator,
    /// `σ_max(P)/σ_min(P)`.
    pub cond_p: f64,
    /// `‖Ô P − Ẋ‖_F`.
    pub residual: f64,
}

/// Solves `Ô P = Ẋ` through one LU factorization of `P^T`.
pub fn infer(ensemble: &SnapshotEnsemble) -> Result<Inference> {
    let (operator, residual) = solve_ensemble(ensemble)?;
    Ok(Inference {
        operator,
        cond_p: linalg::condition_number(&ensemble.features),
        residual,
    })
}

/// [`infer`] without the condition number, whose SVD dominates the cost for large `n_f`.
pub fn solve_ensemble(ensemble: &SnapshotEnsemble) -> Result<(AggregatedOperator, f64)> {
    let p = &ensemble.features;
    if !p.is_square() {
        return Err(Error::DimensionMismatch {
            context: "square feature matrix",
            expected: p.nrows(),
            actual: p.ncols(),
        });
    }
    let op_t = linalg::lu_solve(&p.transpose(), &ensemble.derivatives.transpose(), PIVOT_TOL)?;
    let matrix = op_t.transpose();
    let residual = (&matrix * p - &ensemble.derivatives).norm();
    Ok((AggregatedOperator::new(ensemble.basis.clone(), matrix)?, residual))
}

/// Pairs, single steps and solve in one call.
pub fn exact_opinf(fom: &dyn PolynomialFom, v: &DMatrix<f64>, dt: f64) -> Result<Inference> {
    let pairs = rank_ensuring_pairs(v.ncols(), fom.degrees(), fom.input_dim())?;
    infer(&generate_ensemble(fom, v, pairs, dt)?)
}

/// Reduced trajectory triples `(x̆_k, u_k, ẋ̆_k)` for the least-squares baseline.
#[derive(Clone, Debug)]
pub struct TrajectoryData {
    pub states: DMatrix<f64>,
    pub inputs: DMatrix<f64>,
    pub derivatives: DMatrix<f64>,
}

impl TrajectoryData {
    /// Projects a full-order trajectory and takes forward differences; `K` is one less than the snapshot count.
    pub fn project(trajectory: &SnapshotMatrix, v: &DMatrix<f64>) -> Result<Self> {
        if v.nrows() != trajectory.state_dim() {
            return Err(Error::DimensionMismatch {
                context: "projection basis rows",
                expected: trajectory.state_dim(),
                actual: v.nrows(),
            });
        }
        let reduced = v.transpose() * &trajectory.states;
        Self::from_reduced(&reduced, &trajectory.inputs, &trajectory.times)
    }

    pub fn from_reduced(states: &DMatrix<f64>, inputs: &DMatrix<f64>, times: &[f64]) -> Result<Self> {
        let k = times.len().saturating_sub(1);
        if k == 0 {
            return Err(Error::InvalidArgument("need at least two snapshots".into()));
        }
        let mut derivatives = DMatrix::zeros(states.nrows(), k);
        for c in 0..k {
            let d = (states.column(c + 1) - states.column(c)) / (times[c + 1] - times[c]);
            derivatives.set_column(c, &d);
        }
        Ok(Self {
            states: states.columns(0, k).into_owned(),
            inputs: inputs.columns(0, k).into_owned(),
            derivatives,
        })
    }

    pub fn len(&self) -> usize {
        self.states.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.states.ncols() == 0
    }
}

/// Least-squares baseline with its conditioning diagnostics.
#[derive(Clone, Debug)]
pub struct StandardInference {
    pub operator: AggregatedOperator,
    pub rank: usize,
    pub cond_p: f64,
    pub rank_deficient: bool,
}

/// Minimizes `Σ_k ‖Ô p(x̆_k, u_k) − ẋ̆_k‖² + λ ‖Ô‖_F²`.
///
/// With `λ = 0` the minimum-norm least-squares solution is taken from an SVD
/// of `P^T`; with `λ > 0` the Tikhonov-shifted normal equations are solved.
pub fn standard_opinf(data: &TrajectoryData, basis: &MonomialBasis, lambda: f64) -> Result<StandardInference> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidArgument(format!("regularization must be non-negative, got {lambda}")));
    }
    if data.is_empty() {
        return Err(Error::InvalidArgument("no trajectory data".into()));
    }
    let mut p = DMatrix::zeros(basis.n_features(), data.len());
    for k in 0..data.len() {
        let x: Vec<f64> = data.states.column(k).iter().copied().collect();
        let u: Vec<f64> = data.inputs.column(k).iter().copied().collect();
        p.set_column(k, &basis.feature_vector(&x, &u)?);
    }
    let sv = linalg::singular_values(&p);
    let s1 = sv.first().copied().unwrap_or(0.0);
    let cutoff = s1 * p.nrows().max(p.ncols()) as f64 * f64::EPSILON;
    let rank = sv.iter().filter(|&&s| s > cutoff).count();
    let cond_p = if sv.len() < p.nrows() { f64::INFINITY } else { linalg::condition_number(&p) };
    let rank_deficient = rank < p.nrows();

    let rhs = data.derivatives.transpose();
    let op_t = if lambda == 0.0 {
        p.transpose()
            .svd(true, true)
            .solve(&rhs, cutoff)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
    } else {
        let gram = &p * p.transpose() + DMatrix::identity(p.nrows(), p.nrows()) * lambda;
        let chol = gram.cholesky().ok_or_else(|| Error::InvalidArgument("regularized Gram matrix is not positive definite".into()))?;
        chol.solve(&(&p * rhs))
    };
    Ok(StandardInference {
        operator: AggregatedOperator::new(basis.clone(), op_t.transpose())?,
        rank,
        cond_p,
        rank_deficient,
    })
}
