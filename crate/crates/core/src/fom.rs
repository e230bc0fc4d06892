//! Full-order polynomial models and their time integration.
//!
//! A model is accessed two ways. Inference only ever calls [`PolynomialFom::rhs`],
//! the black-box right-hand side. Intrusive reduction additionally needs the
//! symmetric multilinear maps `H_i` with `H_i(x, ..., x) = A_i x^i`, which the
//! built-in benchmarks supply directly.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, BandedMatrix};
use crate::tensor_poly::{compress_state, monomial_count, DegreeSet, MonomialTuple};

/// A dynamical system `ẋ = Σ_{i∈I} A_i x^i + B u`.
///
/// Implementations must be reentrant: the ensemble generator evaluates the
/// same model from many threads at once.
pub trait PolynomialFom: Send + Sync {
    /// State dimension `N`.
    fn dim(&self) -> usize;

    fn degrees(&self) -> &DegreeSet;

    /// Input dimension `N_u`.
    fn input_dim(&self) -> usize;

    /// Right-hand side `f(x, u)`. Dimensions are checked by the caller.
    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64>;

    /// Symmetric multilinear map `H_i(args...)`, when the model exposes it.
    fn multilinear(&self, _degree: usize, _args: &[&DVector<f64>]) -> Option<DVector<f64>> {
        None
    }

    /// `B u`, when the model exposes it.
    fn input_map(&self, _u: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// Half-bandwidth of the Jacobian `∂f/∂x`, if banded.
    fn jacobian_bandwidth(&self) -> Option<usize> {
        None
    }
}

impl<T: PolynomialFom + ?Sized> PolynomialFom for Arc<T> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn degrees(&self) -> &DegreeSet {
        (**self).degrees()
    }
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }
    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        (**self).rhs(x, u)
    }
    fn multilinear(&self, degree: usize, args: &[&DVector<f64>]) -> Option<DVector<f64>> {
        (**self).multilinear(degree, args)
    }
    fn input_map(&self, u: &DVector<f64>) -> Option<DVector<f64>> {
        (**self).input_map(u)
    }
    fn jacobian_bandwidth(&self) -> Option<usize> {
        (**self).jacobian_bandwidth()
    }
}

/// Input signal `t ↦ u(t)`, held constant over each step from its left endpoint.
#[derive(Clone)]
pub struct InputSignal {
    dim: usize,
    eval: Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>,
}

impl InputSignal {
    pub fn new(dim: usize, eval: impl Fn(f64) -> DVector<f64> + Send + Sync + 'static) -> Self {
        Self {
            dim,
            eval: Arc::new(eval),
        }
    }

    pub fn zero(dim: usize) -> Self {
        Self::new(dim, move |_| DVector::zeros(dim))
    }

    pub fn constant(u: DVector<f64>) -> Self {
        Self::new(u.len(), move |_| u.clone())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn at(&self, t: f64) -> DVector<f64> {
        (self.eval)(t)
    }
}

impl fmt::Debug for InputSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InputSignal").field("dim", &self.dim).finish_non_exhaustive()
    }
}

/// States, inputs and time stamps of one trajectory, one column per time.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotMatrix {
    pub states: DMatrix<f64>,
    pub inputs: DMatrix<f64>,
    pub times: Vec<f64>,
}

impl SnapshotMatrix {
    pub fn new(states: DMatrix<f64>, inputs: DMatrix<f64>, times: Vec<f64>) -> Result<Self> {
        if states.ncols() != times.len() || inputs.ncols() != times.len() {
            return Err(Error::DimensionMismatch {
                context: "snapshot column count",
                expected: times.len(),
                actual: if states.ncols() != times.len() { states.ncols() } else { inputs.ncols() },
            });
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidArgument("snapshot times must be strictly increasing".into()));
        }
        Ok(Self { states, inputs, times })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.states.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.inputs.nrows()
    }
}

/// Time discretization used by [`simulate`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheme {
    ExplicitEuler,
    ImplicitEuler,
}

/// Damped Newton settings for implicit Euler.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 50 }
    }
}

fn check_dims(fom: &dyn PolynomialFom, x: &DVector<f64>, u: &DVector<f64>) -> Result<()> {
    if x.len() != fom.dim() {
        return Err(Error::DimensionMismatch {
            context: "state",
            expected: fom.dim(),
            actual: x.len(),
        });
    }
    if u.len() != fom.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "input",
            expected: fom.input_dim(),
            actual: u.len(),
        });
    }
    Ok(())
}

fn describe_state(x: &DVector<f64>) -> String {
    let head: Vec<String> = x.iter().take(4).map(|v| format!("{v:e}")).collect();
    format!(
        "state of norm {:e} [{}{}]",
        x.norm(),
        head.join(", "),
        if x.len() > 4 { ", ..." } else { "" }
    )
}

/// `f(x, u)` with dimension and finiteness checks.
pub fn eval_rhs(fom: &dyn PolynomialFom, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    check_dims(fom, x, u)?;
    let f = fom.rhs(x, u);
    if f.iter().all(|v| v.is_finite()) {
        Ok(f)
    } else {
        Err(Error::NonFinite { context: describe_state(x) })
    }
}

/// `x + dt f(x, u)`. No stability check; a single step never needs one.
pub fn explicit_euler_step(fom: &dyn PolynomialFom, x: &DVector<f64>, u: &DVector<f64>, dt: f64) -> Result<DVector<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    let f = eval_rhs(fom, x, u)?;
    let y = x + f * dt;
    if y.iter().all(|v| v.is_finite()) {
        Ok(y)
    } else {
        Err(Error::NonFinite { context: describe_state(x) })
    }
}

/// Solves `y = x + dt f(y, u)` by damped Newton with a finite-difference Jacobian.
pub fn implicit_euler_step(
    fom: &dyn PolynomialFom,
    x: &DVector<f64>,
    u: &DVector<f64>,
    dt: f64,
    newton: NewtonOptions,
) -> Result<DVector<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    check_dims(fom, x, u)?;
    let target = newton.tol * (1.0 + x.norm());
    let residual = |y: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
        let f = eval_rhs(fom, y, u)?;
        Ok((y - x - &f * dt, f))
    };
    let mut y = x.clone();
    let (mut r, mut f) = residual(&y)?;
    let mut rnorm = r.norm();
    for _ in 0..newton.max_iter {
        if rnorm < target {
            return Ok(y);
        }
        let delta = newton_direction(fom, &y, u, &f, dt, &r)?;
        // backtrack until the residual decreases
        let mut lambda = 1.0;
        loop {
            let trial = &y - &delta * lambda;
            match residual(&trial) {
                Ok((rt, ft)) if rt.norm() < rnorm || lambda < 1e-4 => {
                    y = trial;
                    r = rt;
                    f = ft;
                    rnorm = r.norm();
                    break;
                }
                _ if lambda < 1e-4 => {
                    return Err(Error::NewtonDivergence {
                        iterations: newton.max_iter,
                        residual: rnorm,
                    })
                }
                _ => lambda *= 0.5,
            }
        }
    }
    if rnorm < target {
        Ok(y)
    } else {
        Err(Error::NewtonDivergence {
            iterations: newton.max_iter,
            residual: rnorm,
        })
    }
}

/// Solves `(I - dt J) δ = r` with `J` from forward differences at `y`.
fn newton_direction(
    fom: &dyn PolynomialFom,
    y: &DVector<f64>,
    u: &DVector<f64>,
    f0: &DVector<f64>,
    dt: f64,
    r: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = y.len();
    let step = |j: usize| 1e-7 * (1.0 + y[j].abs());
    match fom.jacobian_bandwidth() {
        Some(bw) if 2 * bw + 1 < n => {
            // columns 2bw+1 apart touch disjoint rows; perturb them together
            let stride = 2 * bw + 1;
            let mut m = BandedMatrix::zeros(n, bw, bw);
            for color in 0..stride {
                let mut yp = y.clone();
                for j in (color..n).step_by(stride) {
                    yp[j] += step(j);
                }
                let df = eval_rhs(fom, &yp, u)? - f0;
                for j in (color..n).step_by(stride) {
                    let h = step(j);
                    for row in j.saturating_sub(bw)..=(j + bw).min(n - 1) {
                        let identity = if row == j { 1.0 } else { 0.0 };
                        m.set(row, j, identity - dt * df[row] / h);
                    }
                }
            }
            m.solve(r)
        }
        _ => {
            let mut m = DMatrix::<f64>::identity(n, n);
            for j in 0..n {
                let h = step(j);
                let mut yp = y.clone();
                yp[j] += h;
                let df = eval_rhs(fom, &yp, u)? - f0;
                for row in 0..n {
                    m[(row, j)] -= dt * df[row] / h;
                }
            }
            let sol = linalg::lu_solve(&m, &DMatrix::from_column_slice(n, 1, r.as_slice()), 1e-15)?;
            Ok(sol.column(0).into_owned())
        }
    }
}

/// Integrates `K` uniform steps from `x0`; the input is sampled at each step's left endpoint.
pub fn simulate(
    fom: &dyn PolynomialFom,
    x0: &DVector<f64>,
    signal: &InputSignal,
    dt: f64,
    steps: usize,
    scheme: Scheme,
) -> Result<SnapshotMatrix> {
    simulate_with(fom, x0, signal, dt, steps, scheme, NewtonOptions::default())
}

pub fn simulate_with(
    fom: &dyn PolynomialFom,
    x0: &DVector<f64>,
    signal: &InputSignal,
    dt: f64,
    steps: usize,
    scheme: Scheme,
    newton: NewtonOptions,
) -> Result<SnapshotMatrix> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    if signal.dim() != fom.input_dim() {
        return Err(Error::DimensionMismatch {
            context: "input signal",
            expected: fom.input_dim(),
            actual: signal.dim(),
        });
    }
    let n = fom.dim();
    let mut states = DMatrix::zeros(n, steps + 1);
    let mut inputs = DMatrix::zeros(fom.input_dim(), steps + 1);
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let mut x = x0.clone();
    states.set_column(0, &x);
    for k in 0..steps {
        let u = signal.at(times[k]);
        inputs.set_column(k, &u);
        let next = match scheme {
            Scheme::ExplicitEuler => explicit_euler_step(fom, &x, &u, dt),
            Scheme::ImplicitEuler => implicit_euler_step(fom, &x, &u, dt, newton),
        };
        x = next.map_err(|e| Error::StepFailed {
            step: k,
            source: Box::new(e),
        })?;
        states.set_column(k + 1, &x);
    }
    inputs.set_column(steps, &signal.at(times[steps]));
    SnapshotMatrix::new(states, inputs, times)
}

/// Isolates `A_i x^i` from black-box evaluations `f(t x, 0)` at `t = 1, ..., |I|`.
pub fn homogeneous_part(fom: &dyn PolynomialFom, degree: usize, x: &DVector<f64>) -> Result<DVector<f64>> {
    let degrees: Vec<usize> = fom.degrees().iter().collect();
    let Some(slot) = degrees.iter().position(|&d| d == degree) else {
        return Ok(DVector::zeros(fom.dim()));
    };
    let m = degrees.len();
    let zero_u = DVector::zeros(fom.input_dim());
    // rows: scaling nodes; columns: degrees
    let vandermonde = DMatrix::from_fn(m, m, |r, c| ((r + 1) as f64).powi(degrees[c] as i32));
    let mut samples = DMatrix::zeros(m, fom.dim());
    for r in 0..m {
        let f = eval_rhs(fom, &(x * (r + 1) as f64), &zero_u)?;
        samples.set_row(r, &f.transpose());
    }
    let parts = linalg::lu_solve(&vandermonde, &samples, 1e-14)?;
    Ok(parts.row(slot).transpose())
}

/// Recovers the symmetric multilinear map from black-box evaluations by polarization.
pub fn polarize(fom: &dyn PolynomialFom, degree: usize, args: &[&DVector<f64>]) -> Result<DVector<f64>> {
    if args.len() != degree {
        return Err(Error::DimensionMismatch {
            context: "polarize arguments",
            expected: degree,
            actual: args.len(),
        });
    }
    if degree > 8 {
        return Err(Error::InvalidArgument("polarization is limited to degree <= 8".into()));
    }
    if degree == 0 {
        return homogeneous_part(fom, 0, &DVector::zeros(fom.dim()));
    }
    let mut acc = DVector::zeros(fom.dim());
    for mask in 1u32..(1 << degree) {
        let mut sum = DVector::zeros(fom.dim());
        for (j, v) in args.iter().enumerate() {
            if mask & (1 << j) != 0 {
                sum += *v;
            }
        }
        let sign = if (degree - mask.count_ones() as usize) % 2 == 0 { 1.0 } else { -1.0 };
        acc += homogeneous_part(fom, degree, &sum)? * sign;
    }
    let factorial: f64 = (1..=degree).map(|k| k as f64).product();
    Ok(acc / factorial)
}

/// A model defined by dense compressed operators `A_i ∈ R^{N×N_i}` and `B`.
///
/// Only practical for small `N`, which is what tests and the randomized
/// property suites need.
#[derive(Clone, Debug)]
pub struct DenseFom {
    degrees: DegreeSet,
    operators: Vec<DMatrix<f64>>,
    input: DMatrix<f64>,
    // per degree: for every ordered index tuple, (compressed column, 1/multiplicity)
    expansion: Vec<Vec<(usize, f64)>>,
}

impl DenseFom {
    /// `operators[k]` belongs to the `k`-th degree of `degrees`.
    pub fn new(degrees: DegreeSet, operators: Vec<DMatrix<f64>>, input: DMatrix<f64>) -> Result<Self> {
        let n = input.nrows();
        if operators.len() != degrees.len() {
            return Err(Error::DimensionMismatch {
                context: "operator blocks",
                expected: degrees.len(),
                actual: operators.len(),
            });
        }
        let mut expansion = Vec::with_capacity(degrees.len());
        for (i, a) in degrees.iter().zip(&operators) {
            let ni = monomial_count(n, i)?;
            if a.nrows() != n || a.ncols() != ni {
                return Err(Error::DimensionMismatch {
                    context: "operator block columns",
                    expected: ni,
                    actual: a.ncols(),
                });
            }
            let total = n.checked_pow(i as u32).ok_or(Error::Overflow { n, degree: i })?;
            let mut table = Vec::with_capacity(total);
            let mut idx = vec![0usize; i];
            for _ in 0..total {
                let t = MonomialTuple::new(idx.clone());
                table.push((t.rank(n), 1.0 / t.permutations()));
                for slot in (0..i).rev() {
                    idx[slot] += 1;
                    if idx[slot] < n {
                        break;
                    }
                    idx[slot] = 0;
                }
            }
            expansion.push(table);
        }
        Ok(Self {
            degrees,
            operators,
            input,
            expansion,
        })
    }

    /// Random model with entries scaled so short explicit-Euler runs stay bounded.
    pub fn random<R: Rng + ?Sized>(rng: &mut R, n: usize, degrees: DegreeSet, n_inputs: usize) -> Self {
        let operators = degrees
            .iter()
            .map(|i| {
                let ni = monomial_count(n, i).expect("small random model");
                let scale = 1.0 / (ni as f64).sqrt();
                let mut a = DMatrix::from_fn(n, ni, |_, _| rng.random_range(-1.0..1.0) * scale);
                if i == 1 {
                    a -= DMatrix::identity(n, n);
                }
                a
            })
            .collect();
        let input = DMatrix::from_fn(n, n_inputs, |_, _| rng.random_range(-1.0..1.0));
        Self::new(degrees, operators, input).expect("consistent random model")
    }

    pub fn operator(&self, degree: usize) -> Option<&DMatrix<f64>> {
        let k = self.degrees.as_slice().binary_search(&degree).ok()?;
        Some(&self.operators[k])
    }

    pub fn input_matrix(&self) -> &DMatrix<f64> {
        &self.input
    }
}

impl PolynomialFom for DenseFom {
    fn dim(&self) -> usize {
        self.input.nrows()
    }

    fn degrees(&self) -> &DegreeSet {
        &self.degrees
    }

    fn input_dim(&self) -> usize {
        self.input.ncols()
    }

    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        let mut out = &self.input * u;
        for (i, a) in self.degrees.iter().zip(&self.operators) {
            out += a * DVector::from_vec(compress_state(x.as_slice(), i));
        }
        out
    }

    fn multilinear(&self, degree: usize, args: &[&DVector<f64>]) -> Option<DVector<f64>> {
        let k = self.degrees.as_slice().binary_search(&degree).ok()?;
        let n = self.dim();
        // weight of each compressed column: sum over ordered tuples mapping to it
        let mut weights = vec![0.0; self.operators[k].ncols()];
        let mut idx = vec![0usize; degree];
        for &(col, w) in &self.expansion[k] {
            let prod: f64 = idx.iter().zip(args).map(|(&j, v)| v[j]).product();
            weights[col] += w * prod;
            for slot in (0..degree).rev() {
                idx[slot] += 1;
                if idx[slot] < n {
                    break;
                }
                idx[slot] = 0;
            }
        }
        Some(&self.operators[k] * DVector::from_vec(weights))
    }

    fn input_map(&self, u: &DVector<f64>) -> Option<DVector<f64>> {
        Some(&self.input * u)
    }
}

/// Black-box model built from a closure.
pub struct FnFom<F> {
    dim: usize,
    degrees: DegreeSet,
    input_dim: usize,
    f: F,
}

impl<F> FnFom<F>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync,
{
    pub fn new(dim: usize, degrees: DegreeSet, input_dim: usize, f: F) -> Self {
        Self {
            dim,
            degrees,
            input_dim,
            f,
        }
    }
}

impl<F> PolynomialFom for FnFom<F>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }
    fn degrees(&self) -> &DegreeSet {
        &self.degrees
    }
    fn input_dim(&self) -> usize {
        self.input_dim
    }
    fn rhs(&self, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        (self.f)(x, u)
    }
}
