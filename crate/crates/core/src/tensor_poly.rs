//! Compressed monomial indexing.
//!
//! A degree-`i` monomial in `n` variables is identified by its non-decreasing
//! index tuple `(j_1 <= ... <= j_i)`. All vectors and operator blocks in this
//! crate use one ordering: degree blocks ascending, and within a block the
//! tuples in lexicographic order. For `n = 2` this gives the familiar layout
//! `x1, x2, x1^2, x1 x2, x2^2`.
//!
//! Indices are zero-based in code; `Display` prints them one-based.

use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};

/// `C(n + i - 1, i)`: number of distinct degree-`i` monomials in `n` variables.
pub fn monomial_count(n: usize, degree: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::InvalidArgument("monomial_count needs n >= 1".into()));
    }
    // C(n+i-1, i) = prod_{k=1..i} (n - 1 + k) / k, exact at every step.
    let mut acc: u128 = 1;
    for k in 1..=degree as u128 {
        acc = acc
            .checked_mul(n as u128 - 1 + k)
            .ok_or(Error::Overflow { n, degree })?
            / k;
    }
    usize::try_from(acc).map_err(|_| Error::Overflow { n, degree })
}

/// Sorted index tuple of one compressed monomial.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MonomialTuple {
    indices: Vec<usize>,
}

impl MonomialTuple {
    /// Builds a tuple from arbitrary indices; they are sorted.
    pub fn new(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        Self { indices }
    }

    pub fn constant() -> Self {
        Self { indices: Vec::new() }
    }

    pub fn degree(&self) -> usize {
        self.indices.len()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    /// Largest variable index used, or `None` for the constant monomial.
    pub fn max_index(&self) -> Option<usize> {
        self.indices.last().copied()
    }

    /// Number of distinct orderings of the tuple, `i! / prod(m_k!)`.
    pub fn permutations(&self) -> f64 {
        let mut count = 1.0;
        let mut run = 0usize;
        for (pos, &j) in self.indices.iter().enumerate() {
            run = if pos > 0 && self.indices[pos - 1] == j { run + 1 } else { 1 };
            // multiply by (pos+1) / run builds i!/prod(m!) incrementally
            count *= (pos + 1) as f64 / run as f64;
        }
        count.round()
    }

    /// Value of the monomial at `x`.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.indices.iter().map(|&j| x[j]).product()
    }

    /// Position of this tuple within `enumerate_monomials(n, degree)`.
    pub fn rank(&self, n: usize) -> usize {
        let degree = self.degree();
        let mut rank = 0;
        let mut lower = 0;
        for (k, &j) in self.indices.iter().enumerate() {
            let remaining = degree - k - 1;
            for v in lower..j {
                rank += monomial_count(n - v, remaining).expect("rank of small tuple");
            }
            lower = j;
        }
        rank
    }

    /// Row index of this tuple in the `i`-fold Kronecker power of an `n`-vector.
    pub fn kron_index(&self, n: usize) -> usize {
        self.indices.iter().fold(0, |acc, &j| acc * n + j)
    }
}

impl fmt::Display for MonomialTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (k, j) in self.indices.iter().enumerate() {
            if k > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{}", j + 1)?;
        }
        f.write_str(")")
    }
}

/// All degree-`i` monomials in `n` variables, in canonical order.
pub fn enumerate_monomials(n: usize, degree: usize) -> Result<Vec<MonomialTuple>> {
    let count = monomial_count(n, degree)?;
    let mut out = Vec::with_capacity(count);
    let mut current = Vec::with_capacity(degree);
    fn recurse(n: usize, degree: usize, start: usize, cur: &mut Vec<usize>, out: &mut Vec<MonomialTuple>) {
        if cur.len() == degree {
            out.push(MonomialTuple { indices: cur.clone() });
            return;
        }
        for j in start..n {
            cur.push(j);
            recurse(n, degree, j, cur, out);
            cur.pop();
        }
    }
    recurse(n, degree, 0, &mut current, &mut out);
    Ok(out)
}

/// Unique degree-`i` products of the entries of `x` (`x^i` in compressed form).
pub fn compress_state(x: &[f64], degree: usize) -> Vec<f64> {
    let n = x.len();
    let mut out = Vec::with_capacity(monomial_count(n.max(1), degree).unwrap_or(0));
    fn recurse(x: &[f64], remaining: usize, start: usize, prod: f64, out: &mut Vec<f64>) {
        if remaining == 0 {
            out.push(prod);
            return;
        }
        for j in start..x.len() {
            recurse(x, remaining - 1, j, prod * x[j], out);
        }
    }
    recurse(x, degree, 0, 1.0, &mut out);
    out
}

/// Expands a compressed degree-`i` vector back to the full Kronecker power.
pub fn kron_expand(compressed: &[f64], n: usize, degree: usize) -> Result<Vec<f64>> {
    let maps = SelectionMaps::new(n, degree)?;
    if compressed.len() != maps.compressed_len() {
        return Err(Error::DimensionMismatch {
            context: "kron_expand",
            expected: maps.compressed_len(),
            actual: compressed.len(),
        });
    }
    Ok(maps.expand(compressed))
}

/// Plain `i`-fold Kronecker power `x ⊗ ... ⊗ x`.
pub fn kron_power(x: &[f64], degree: usize) -> Vec<f64> {
    let mut out = vec![1.0];
    for _ in 0..degree {
        out = out
            .iter()
            .flat_map(|&a| x.iter().map(move |&b| a * b))
            .collect();
    }
    out
}

/// Selection maps between `x^{i⊗}` (length `n^i`) and `x^i` (length `n_i`).
///
/// Both maps are 0/1 matrices with one nonzero per row, stored as index lists.
#[derive(Clone, Debug)]
pub struct SelectionMaps {
    n: usize,
    degree: usize,
    /// For each monomial, the Kronecker row that is kept.
    kept_rows: Vec<usize>,
    /// For each Kronecker row, the monomial it copies.
    source: Vec<usize>,
}

impl SelectionMaps {
    pub fn new(n: usize, degree: usize) -> Result<Self> {
        let monomials = enumerate_monomials(n, degree)?;
        let kron_len = n
            .checked_pow(degree as u32)
            .ok_or(Error::Overflow { n, degree })?;
        let kept_rows = monomials.iter().map(|t| t.kron_index(n)).collect();
        let mut source = Vec::with_capacity(kron_len);
        let mut idx = vec![0usize; degree];
        for _ in 0..kron_len {
            source.push(MonomialTuple::new(idx.clone()).rank(n));
            // odometer increment, last index fastest
            for slot in (0..degree).rev() {
                idx[slot] += 1;
                if idx[slot] < n {
                    break;
                }
                idx[slot] = 0;
            }
        }
        Ok(Self {
            n,
            degree,
            kept_rows,
            source,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn compressed_len(&self) -> usize {
        self.kept_rows.len()
    }

    pub fn kron_len(&self) -> usize {
        self.source.len()
    }

    pub fn kept_rows(&self) -> &[usize] {
        &self.kept_rows
    }

    pub fn sources(&self) -> &[usize] {
        &self.source
    }

    /// Applies the compression map.
    pub fn compress(&self, kron: &[f64]) -> Vec<f64> {
        self.kept_rows.iter().map(|&r| kron[r]).collect()
    }

    /// Applies the expansion map.
    pub fn expand(&self, compressed: &[f64]) -> Vec<f64> {
        self.source.iter().map(|&s| compressed[s]).collect()
    }
}

/// Sorted set of polynomial degrees present in a model.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct DegreeSet(Vec<usize>);

impl DegreeSet {
    pub fn new(degrees: impl IntoIterator<Item = usize>) -> Self {
        let mut v: Vec<usize> = degrees.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, degree: usize) -> bool {
        self.0.binary_search(&degree).is_ok()
    }

    pub fn max_degree(&self) -> Option<usize> {
        self.0.last().copied()
    }

    /// Parses `"1,2,3"` or `"{1, 2, 3}"`.
    pub fn parse(s: &str) -> Result<Self> {
        let trimmed = s.trim().trim_start_matches('{').trim_end_matches('}');
        if trimmed.trim().is_empty() {
            return Ok(Self::default());
        }
        trimmed
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|e| Error::InvalidArgument(format!("degree '{}': {e}", p.trim())))
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl fmt::Display for DegreeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|d| d.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// Layout of the feature vector `p(x, u)`: degree blocks ascending, then inputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MonomialBasis {
    n: usize,
    degrees: DegreeSet,
    n_inputs: usize,
    block_sizes: Vec<usize>,
    block_offsets: Vec<usize>,
    n_poly: usize,
}

impl MonomialBasis {
    pub fn new(n: usize, degrees: DegreeSet, n_inputs: usize) -> Result<Self> {
        let block_sizes = degrees
            .iter()
            .map(|i| monomial_count(n, i))
            .collect::<Result<Vec<_>>>()?;
        let mut block_offsets = Vec::with_capacity(block_sizes.len());
        let mut acc = 0usize;
        for &s in &block_sizes {
            block_offsets.push(acc);
            acc = acc.checked_add(s).ok_or(Error::Overflow { n, degree: 0 })?;
        }
        Ok(Self {
            n,
            degrees,
            n_inputs,
            block_sizes,
            block_offsets,
            n_poly: acc,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn degrees(&self) -> &DegreeSet {
        &self.degrees
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    /// Number of state monomials `n_p`.
    pub fn n_poly(&self) -> usize {
        self.n_poly
    }

    /// Total feature length `n_f = n_p + N_u`.
    pub fn n_features(&self) -> usize {
        self.n_poly + self.n_inputs
    }

    /// Column range of the degree block, if the degree is present.
    pub fn block_range(&self, degree: usize) -> Option<std::ops::Range<usize>> {
        let k = self.degrees.as_slice().binary_search(&degree).ok()?;
        let start = self.block_offsets[k];
        Some(start..start + self.block_sizes[k])
    }

    pub fn input_range(&self) -> std::ops::Range<usize> {
        self.n_poly..self.n_poly + self.n_inputs
    }

    /// `p(x, u)`.
    pub fn feature_vector(&self, x: &[f64], u: &[f64]) -> Result<DVector<f64>> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                context: "feature_vector state",
                expected: self.n,
                actual: x.len(),
            });
        }
        if u.len() != self.n_inputs {
            return Err(Error::DimensionMismatch {
                context: "feature_vector input",
                expected: self.n_inputs,
                actual: u.len(),
            });
        }
        let mut out = Vec::with_capacity(self.n_features());
        for i in self.degrees.iter() {
            out.extend(compress_state(x, i));
        }
        out.extend_from_slice(u);
        Ok(DVector::from_vec(out))
    }

    /// Basis of the same layout at a different state dimension.
    pub fn with_dimension(&self, n: usize) -> Result<Self> {
        Self::new(n, self.degrees.clone(), self.n_inputs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tuples(list: &[&[usize]]) -> Vec<MonomialTuple> {
        list.iter()
            .map(|t| MonomialTuple::new(t.iter().map(|j| j - 1).collect()))
            .collect()
    }

    #[test]
    fn counts() {
        assert_eq!(monomial_count(2, 2).unwrap(), 3);
        assert_eq!(monomial_count(7, 0).unwrap(), 1);
        assert_eq!(monomial_count(14, 3).unwrap(), 560);
        assert_eq!(monomial_count(14, 1).unwrap() + monomial_count(14, 2).unwrap() + 560 + 1, 680);
        assert!(matches!(monomial_count(usize::MAX / 2, 40), Err(Error::Overflow { .. })));
    }

    #[test]
    fn enumeration_order() {
        assert_eq!(enumerate_monomials(2, 2).unwrap(), tuples(&[&[1, 1], &[1, 2], &[2, 2]]));
        assert_eq!(enumerate_monomials(1, 3).unwrap(), tuples(&[&[1, 1, 1]]));
        assert_eq!(
            enumerate_monomials(3, 2).unwrap(),
            tuples(&[&[1, 1], &[1, 2], &[1, 3], &[2, 2], &[2, 3], &[3, 3]])
        );
        assert_eq!(enumerate_monomials(4, 0).unwrap(), vec![MonomialTuple::constant()]);
    }

    #[test]
    fn enumeration_matches_kronecker_dedup() {
        // oracle: walk all n^i ordered tuples, keep the first occurrence of each sorted tuple
        let n = 3;
        let mut seen = Vec::new();
        for a in 0..n {
            for b in 0..n {
                let t = MonomialTuple::new(vec![a, b]);
                if !seen.contains(&t) {
                    seen.push(t);
                }
            }
        }
        seen.sort();
        assert_eq!(enumerate_monomials(n, 2).unwrap(), seen);
    }

    #[test]
    fn rank_and_permutations() {
        for n in 1..5 {
            for i in 0..5 {
                for (k, t) in enumerate_monomials(n, i).unwrap().iter().enumerate() {
                    assert_eq!(t.rank(n), k);
                }
            }
        }
        assert_eq!(MonomialTuple::new(vec![0, 0, 1]).permutations(), 3.0);
        assert_eq!(MonomialTuple::new(vec![0, 1, 2]).permutations(), 6.0);
        assert_eq!(MonomialTuple::new(vec![2, 2, 2, 2]).permutations(), 1.0);
        assert_eq!(MonomialTuple::new(vec![0, 0, 1, 1, 1, 3, 3, 3]).permutations(), 560.0);
        assert_eq!(MonomialTuple::constant().permutations(), 1.0);
        assert_eq!(MonomialTuple::new(vec![1, 0]).to_string(), "(1 2)");
    }

    #[test]
    fn compress_examples() {
        assert_eq!(compress_state(&[1.0, 1.0], 2), vec![1.0, 1.0, 1.0]);
        assert_eq!(compress_state(&[2.0, 0.0], 2), vec![4.0, 0.0, 0.0]);
        assert_eq!(compress_state(&[3.0, -1.0], 0), vec![1.0]);
        assert_eq!(compress_state(&[3.0, -1.0], 1), vec![3.0, -1.0]);
    }

    #[test]
    fn feature_examples() {
        let basis = MonomialBasis::new(2, DegreeSet::new([1, 2]), 2).unwrap();
        assert_eq!(basis.n_features(), 7);
        let p = basis.feature_vector(&[1.0, 0.0], &[0.0, 0.0]).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let p = basis.feature_vector(&[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(p.as_slice(), &[0.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
        assert!(basis.feature_vector(&[0.0], &[1.0, 0.0]).is_err());
        assert!(basis.feature_vector(&[0.0, 0.0], &[1.0]).is_err());

        let constant = MonomialBasis::new(3, DegreeSet::new([0]), 1).unwrap();
        let p = constant.feature_vector(&[5.0, 6.0, 7.0], &[2.5]).unwrap();
        assert_eq!(p.as_slice(), &[1.0, 2.5]);
    }

    #[test]
    fn expand_examples() {
        let c = compress_state(&[1.0, 2.0], 2);
        assert_eq!(kron_expand(&c, 2, 2).unwrap(), vec![1.0, 2.0, 2.0, 4.0]);
        assert_eq!(kron_expand(&[3.0, 4.0, 5.0], 3, 1).unwrap(), vec![3.0, 4.0, 5.0]);
        assert!(kron_expand(&[1.0], 2, 2).is_err());
    }

    #[test]
    fn selection_map_identity_and_rows() {
        for n in 1..5 {
            for i in 0..5 {
                let maps = SelectionMaps::new(n, i).unwrap();
                let probe: Vec<f64> = (0..maps.compressed_len()).map(|k| k as f64).collect();
                assert_eq!(maps.compress(&maps.expand(&probe)), probe);
                assert_eq!(maps.kron_len(), n.pow(i as u32));
                // each kept row maps back to its own monomial
                for (m, &row) in maps.kept_rows().iter().enumerate() {
                    assert_eq!(maps.sources()[row], m);
                }
            }
        }
    }

    #[test]
    fn enumeration_count_sweep() {
        for n in 1..=8 {
            for i in 0..=8 {
                assert_eq!(enumerate_monomials(n, i).unwrap().len(), monomial_count(n, i).unwrap());
            }
        }
    }

    fn state(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-2.0f64..2.0, n)
    }

    proptest! {
        #[test]
        fn compress_is_dedup_of_kron_power(n in 1usize..=5, i in 0usize..=4, seed in state(5)) {
            let x = &seed[..n];
            let maps = SelectionMaps::new(n, i).unwrap();
            let kron = kron_power(x, i);
            let via_maps = maps.compress(&kron);
            let direct = compress_state(x, i);
            for (a, b) in direct.iter().zip(&via_maps) {
                prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(1e-300));
            }
            let back = maps.expand(&direct);
            for (a, b) in back.iter().zip(&kron) {
                prop_assert!((a - b).abs() <= 1e-14 * b.abs().max(1e-300));
            }
        }

        #[test]
        fn feature_blocks_round_trip(n in 1usize..=4, nu in 0usize..=2, mask in 1u8..32, seed in state(6)) {
            let degrees = DegreeSet::new((0..5).filter(|d| mask & (1 << d) != 0));
            let basis = MonomialBasis::new(n, degrees.clone(), nu).unwrap();
            let x = &seed[..n];
            let u = &seed[4..4 + nu];
            let p = basis.feature_vector(x, u).unwrap();
            for i in degrees.iter() {
                let r = basis.block_range(i).unwrap();
                let block = compress_state(x, i);
                prop_assert_eq!(&p.as_slice()[r], block.as_slice());
            }
            prop_assert_eq!(&p.as_slice()[basis.input_range()], u);
        }
    }
}
