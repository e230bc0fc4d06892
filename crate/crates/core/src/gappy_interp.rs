//! Gappy polynomial interpolation on the unit-vector lattices behind the rank-ensuring states.
//!
//! A polynomial with monomials only in the degrees `I` is determined uniquely by
//! its values on the rank-ensuring states, which is what makes the square
//! inference system solvable. The routines here assemble and solve those
//! interpolation problems directly and provide the univariate building blocks
//! as independent checks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::exact_opinf::rank_ensuring_states;
use crate::linalg;
use crate::tensor_poly::{DegreeSet, MonomialBasis};

const PIVOT_TOL: f64 = 1e-14;

/// `n_p × n_p` matrix whose column `j` is the compressed monomial vector of node `j`.
pub fn interpolation_matrix(n: usize, degrees: &DegreeSet) -> Result<DMatrix<f64>> {
    let basis = MonomialBasis::new(n, degrees.clone(), 0)?;
    let nodes = rank_ensuring_states(n, degrees)?;
    let mut m = DMatrix::zeros(basis.n_poly(), nodes.len());
    for (j, q) in nodes.iter().enumerate() {
        m.set_column(j, &basis.feature_vector(q.as_slice(), &[])?);
    }
    Ok(m)
}

#[derive(Clone, Debug)]
pub struct GappyProblem {
    pub n: usize,
    pub degrees: DegreeSet,
    pub nodes: Vec<DVector<f64>>,
    pub values: DVector<f64>,
}

impl GappyProblem {
    pub fn new(n: usize, degrees: DegreeSet, values: DVector<f64>) -> Result<Self> {
        let nodes = rank_ensuring_states(n, &degrees)?;
        if values.len() != nodes.len() {
            return Err(Error::DimensionMismatch {
                context: "interpolation values",
                expected: nodes.len(),
                actual: values.len(),
            });
        }
        Ok(Self { n, degrees, nodes, values })
    }
}

/// Coefficients `c` (canonical monomial order) with `Σ_α c_α q_j^α = b_j` at every node.
pub fn gappy_interpolate(problem: &GappyProblem) -> Result<DVector<f64>> {
    if problem.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "interpolation values".into(),
        });
    }
    let m = interpolation_matrix(problem.n, &problem.degrees)?;
    let b = DMatrix::from_column_slice(problem.values.len(), 1, problem.values.as_slice());
    let c = linalg::lu_solve(&m.transpose(), &b, PIVOT_TOL)?;
    Ok(c.column(0).into_owned())
}

/// Evaluates the polynomial with coefficients `c` over the degree set at `x`.
pub fn evaluate(degrees: &DegreeSet, c: &DVector<f64>, x: &[f64]) -> Result<f64> {
    let basis = MonomialBasis::new(x.len(), degrees.clone(), 0)?;
    Ok(c.dot(&basis.feature_vector(x, &[])?))
}

/// The full feature matrix rebuilt block-wise as `[P̄ Z; 0 U]`.
///
/// `P̄` is the interpolation matrix, `Z` holds the state features of the zero
/// state (one row of ones for the constant monomial, zeros otherwise) and `U`
/// is the identity over the unit inputs.
pub fn block_triangular_features(n: usize, degrees: &DegreeSet, n_inputs: usize) -> Result<DMatrix<f64>> {
    let pbar = interpolation_matrix(n, degrees)?;
    let np = pbar.nrows();
    let basis = MonomialBasis::new(n, degrees.clone(), 0)?;
    let zero_features = basis.feature_vector(&vec![0.0; n], &[])?;
    let mut full = DMatrix::zeros(np + n_inputs, np + n_inputs);
    full.view_mut((0, 0), (np, np)).copy_from(&pbar);
    for j in 0..n_inputs {
        full.view_mut((0, np + j), (np, 1)).copy_from(&zero_features);
        full[(np + j, np + j)] = 1.0;
    }
    Ok(full)
}

fn binomial(n: usize, k: usize) -> usize {
    (0..k).fold(1usize, |acc, j| acc * (n - j) / (j + 1))
}

/// All points `Σ λ_i X_i` with non-negative integer `λ` summing to `l`.
///
/// The vertices `X_0 … X_m` must span an `m`-dimensional affine hull.
pub fn lattice_nodes(l: usize, vertices: &[DVector<f64>]) -> Result<Vec<DVector<f64>>> {
    let Some(first) = vertices.first() else {
        return Err(Error::InvalidArgument("simplex needs at least one vertex".into()));
    };
    let m = vertices.len() - 1;
    let dim = first.len();
    if vertices.iter().any(|v| v.len() != dim) {
        return Err(Error::InvalidArgument("simplex vertices differ in dimension".into()));
    }
    let edges = DMatrix::from_fn(dim, m, |r, c| vertices[c + 1][r] - first[r]);
    let sv = linalg::singular_values(&edges);
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > 1e-12 * top.max(1.0)).count();
    if rank < m {
        return Err(Error::DegenerateSimplex { rank, dim: m });
    }

    let mut out = Vec::with_capacity(binomial(m + l, m));
    let mut lambda = vec![0usize; m + 1];
    fn recurse(slot: usize, remaining: usize, lambda: &mut [usize], vertices: &[DVector<f64>], out: &mut Vec<DVector<f64>>) {
        if slot + 1 == lambda.len() {
            lambda[slot] = remaining;
            let mut p = DVector::zeros(vertices[0].len());
            for (w, v) in lambda.iter().zip(vertices) {
                if *w != 0 {
                    p.axpy(*w as f64, v, 1.0);
                }
            }
            out.push(p);
            return;
        }
        for w in (0..=remaining).rev() {
            lambda[slot] = w;
            recurse(slot + 1, remaining - w, lambda, vertices, out);
        }
    }
    recurse(0, l, &mut lambda, vertices, &mut out);
    Ok(out)
}

/// Univariate interpolation with monomials `x^d`, `d ∈ degrees`, by a direct solve.
pub fn univariate_interpolate(degrees: &[usize], nodes: &[f64], values: &[f64]) -> Result<Vec<f64>> {
    let m = degrees.len();
    if nodes.len() != m || values.len() != m {
        return Err(Error::DimensionMismatch {
            context: "univariate nodes and values",
            expected: m,
            actual: nodes.len().max(values.len()),
        });
    }
    let a = DMatrix::from_fn(m, m, |j, k| nodes[j].powi(degrees[k] as i32));
    let c = linalg::lu_solve(&a, &DMatrix::from_column_slice(m, 1, values), PIVOT_TOL)?;
    Ok(c.iter().copied().collect())
}

pub fn univariate_eval(degrees: &[usize], c: &[f64], x: f64) -> f64 {
    degrees.iter().zip(c).map(|(&d, &ck)| ck * x.powi(d as i32)).sum()
}

/// Polynomial over `degrees` vanishing at all nodes but the last, where it is one.
pub fn specific_at_nodes(degrees: &[usize], nodes: &[f64]) -> Result<Vec<f64>> {
    let mut values = vec![0.0; nodes.len()];
    if let Some(last) = values.last_mut() {
        *last = 1.0;
    }
    univariate_interpolate(degrees, nodes, &values)
}

/// Polynomial over the shifted degrees `{i − i_star}` with `p(i) = 0` for the other
/// elements of `I` and `p(i_star) = 1`; coefficients follow the shifted degrees ascending.
pub fn univariate_specific(degrees: &DegreeSet, i_star: usize) -> Result<Vec<f64>> {
    if !degrees.contains(i_star) || degrees.iter().any(|i| i < i_star) {
        return Err(Error::InvalidArgument(format!(
            "{i_star} must be the smallest element of {degrees}"
        )));
    }
    let shifted: Vec<usize> = degrees.iter().map(|i| i - i_star).collect();
    let mut nodes: Vec<f64> = degrees.iter().filter(|&i| i != i_star).map(|i| i as f64).collect();
    nodes.push(i_star as f64);
    specific_at_nodes(&shifted, &nodes)
}

/// General interpolation assembled from specific polynomials on growing degree prefixes.
#[derive(Clone, Debug)]
pub struct TriangularComposition {
    /// `A_jk = p_k(x_j)`; unit lower triangular.
    pub a: DMatrix<f64>,
    /// Weights `c` with `A c = f`.
    pub weights: Vec<f64>,
    /// Coefficients of `Σ_k c_k p_k` over the full degree list.
    pub coefficients: Vec<f64>,
}

/// Builds `p̄ = Σ_k c_k p_k`, where `p_k` uses the `k` smallest degrees, vanishes
/// at the first `k − 1` nodes and is one at node `k`.
pub fn triangular_composition(degrees: &[usize], nodes: &[f64], values: &[f64]) -> Result<TriangularComposition> {
    let m = degrees.len();
    if nodes.len() != m || values.len() != m {
        return Err(Error::DimensionMismatch {
            context: "univariate nodes and values",
            expected: m,
            actual: nodes.len().max(values.len()),
        });
    }
    let specific: Vec<Vec<f64>> = (1..=m)
        .map(|k| specific_at_nodes(&degrees[..k], &nodes[..k]))
        .collect::<Result<_>>()?;
    let a = DMatrix::from_fn(m, m, |j, k| univariate_eval(&degrees[..=k], &specific[k], nodes[j]));
    // forward substitution on the unit lower triangular system
    let mut weights = vec![0.0; m];
    for j in 0..m {
        let s: f64 = (0..j).map(|k| a[(j, k)] * weights[k]).sum();
        weights[j] = values[j] - s;
    }
    let mut coefficients = vec![0.0; m];
    for (k, pk) in specific.iter().enumerate() {
        for (d, c) in pk.iter().enumerate() {
            coefficients[d] += weights[k] * c;
        }
    }
    Ok(TriangularComposition { a, weights, coefficients })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_opinf::{rank_ensuring_pairs, SnapshotEnsemble};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_example_block() {
        let m = interpolation_matrix(2, &DegreeSet::new([1, 2])).unwrap();
        #[rustfmt::skip]
        let expect = DMatrix::from_row_slice(5, 5, &[
            1.0, 0.0, 2.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 1.0, 2.0,
            1.0, 0.0, 4.0, 1.0, 0.0,
            0.0, 0.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 1.0, 4.0,
        ]);
        assert_eq!(m, expect);
    }

    #[test]
    fn single_variable_is_vandermonde() {
        let degrees = DegreeSet::new([0, 2, 3]);
        let m = interpolation_matrix(1, &degrees).unwrap();
        // nodes are 0, 2, 3 (sums of 0, 2 and 3 unit vectors)
        let nodes = [0.0f64, 2.0, 3.0];
        let expect = DMatrix::from_fn(3, 3, |r, c| nodes[c].powi(degrees.as_slice()[r] as i32));
        assert_eq!(m, expect);
    }

    #[test]
    fn constant_block_row_is_ones() {
        let m = interpolation_matrix(3, &DegreeSet::new([0, 2])).unwrap();
        assert_eq!(m.shape(), (7, 7));
        assert!(m.row(0).iter().all(|&v| v == 1.0));
    }

    #[test]
    fn interpolation_examples() {
        let p = GappyProblem::new(2, DegreeSet::new([1, 2]), DVector::zeros(5)).unwrap();
        assert_eq!(gappy_interpolate(&p).unwrap(), DVector::zeros(5));

        let p = GappyProblem::new(1, DegreeSet::new([0, 2]), DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let c = gappy_interpolate(&p).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-15 && (c[1] + 0.25).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let degrees = DegreeSet::new([1, 3]);
        let b = DVector::from_fn(13, |_, _| rng.random_range(-1.0..1.0));
        let p = GappyProblem::new(3, degrees.clone(), b.clone()).unwrap();
        let c = gappy_interpolate(&p).unwrap();
        for (q, bj) in p.nodes.iter().zip(b.iter()) {
            assert!((evaluate(&degrees, &c, q.as_slice()).unwrap() - bj).abs() < 1e-10 * (1.0 + b.amax()));
        }
    }

    #[test]
    fn lattice_examples() {
        let simplex = vec![DVector::zeros(2), DVector::from_vec(vec![1.0, 0.0]), DVector::from_vec(vec![0.0, 1.0])];
        let pts = lattice_nodes(1, &simplex).unwrap();
        assert_eq!(pts.len(), 3);
        for v in &simplex {
            assert!(pts.contains(v));
        }
        assert_eq!(lattice_nodes(0, &simplex).unwrap(), vec![DVector::zeros(2)]);
        assert_eq!(lattice_nodes(2, &simplex).unwrap().len(), 6);

        let skew = vec![
            DVector::from_vec(vec![0.3, -1.0]),
            DVector::from_vec(vec![2.0, 0.5]),
            DVector::from_vec(vec![-0.7, 1.9]),
        ];
        assert_eq!(lattice_nodes(4, &skew).unwrap().len(), binomial(6, 2));

        let flat = vec![DVector::zeros(2), DVector::from_vec(vec![1.0, 1.0]), DVector::from_vec(vec![2.0, 2.0])];
        assert!(matches!(lattice_nodes(2, &flat), Err(Error::DegenerateSimplex { rank: 1, dim: 2 })));
    }

    #[test]
    fn specific_examples() {
        assert_eq!(univariate_specific(&DegreeSet::new([0]), 0).unwrap(), vec![1.0]);
        let c = univariate_specific(&DegreeSet::new([0, 2]), 0).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-15 && (c[1] + 0.25).abs() < 1e-15);
        let c = univariate_specific(&DegreeSet::new([1, 3]), 1).unwrap();
        assert!((c[0] - 9.0 / 8.0).abs() < 1e-15 && (c[1] + 1.0 / 8.0).abs() < 1e-15);
        assert!(univariate_specific(&DegreeSet::new([1, 3]), 3).is_err());
    }

    #[test]
    fn composition_is_unit_lower_triangular() {
        let comp = triangular_composition(&[0, 2, 5], &[1.0, 2.5, 0.7], &[1.0, -2.0, 3.0]).unwrap();
        for j in 0..3 {
            assert!((comp.a[(j, j)] - 1.0).abs() < 1e-12);
            for k in j + 1..3 {
                assert!(comp.a[(j, k)].abs() < 1e-12);
            }
        }
    }

    #[test]
    fn block_triangular_identity_matches_ensemble_features() {
        let degrees = DegreeSet::new([0, 1, 3]);
        let (n, nu) = (3, 2);
        let basis = MonomialBasis::new(n, degrees.clone(), nu).unwrap();
        let pairs = rank_ensuring_pairs(n, &degrees, nu).unwrap();
        let k = pairs.len();
        let ens = SnapshotEnsemble::from_triples(basis, pairs, DMatrix::zeros(n, k), 1.0).unwrap();
        assert_eq!(ens.features, block_triangular_features(n, &degrees, nu).unwrap());
    }
}
