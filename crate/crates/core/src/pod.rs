//! Proper orthogonal decomposition of raw (uncentered, unweighted) snapshots.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::fom::SnapshotMatrix;

/// Singular values below this fraction of `σ_1` count as zero.
pub const RANK_TOL: f64 = 1e-13;

/// Column-orthonormal `V ∈ R^{N×n}` plus the full singular value list it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct PodBasis {
    modes: DMatrix<f64>,
    singular_values: Vec<f64>,
}

impl PodBasis {
    /// Wraps externally computed modes after checking orthonormality to 1e−12.
    pub fn from_modes(modes: DMatrix<f64>, singular_values: Vec<f64>) -> Result<Self> {
        let gram = modes.transpose() * &modes;
        let dev = (gram - DMatrix::identity(modes.ncols(), modes.ncols())).amax();
        if !(dev < 1e-12) {
            return Err(Error::InvalidArgument(format!("modes are not orthonormal (max deviation {dev:e})")));
        }
        Ok(Self { modes, singular_values })
    }

    pub fn modes(&self) -> &DMatrix<f64> {
        &self.modes
    }

    pub fn into_modes(self) -> DMatrix<f64> {
        self.modes
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// Full-order dimension `N`.
    pub fn state_dim(&self) -> usize {
        self.modes.nrows()
    }

    /// Number of retained modes.
    pub fn n(&self) -> usize {
        self.modes.ncols()
    }

    pub fn numerical_rank(&self) -> usize {
        numerical_rank(&self.singular_values)
    }

    /// The leading `n` modes, itself a valid basis.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n > self.n() {
            return Err(Error::RankDeficient {
                requested: n,
                rank: self.n(),
            });
        }
        Ok(Self {
            modes: self.modes.columns(0, n).into_owned(),
            singular_values: self.singular_values.clone(),
        })
    }
}

fn numerical_rank(sv: &[f64]) -> usize {
    let Some(&s1) = sv.first() else { return 0 };
    sv.iter().take_while(|&&s| s > RANK_TOL * s1).count()
}

/// Leading `n_max` left singular vectors of the state snapshot matrix.
///
/// Each mode's largest-magnitude entry is made positive (first such row on ties,
/// with magnitudes within a relative 1e−12 treated as tied).
pub fn pod_basis(snapshots: &SnapshotMatrix, n_max: usize) -> Result<PodBasis> {
    pod_from_matrix(&snapshots.states, n_max)
}

pub fn pod_from_matrix(x: &DMatrix<f64>, n_max: usize) -> Result<PodBasis> {
    let limit = x.nrows().min(x.ncols());
    if n_max > limit {
        return Err(Error::RankDeficient {
            requested: n_max,
            rank: limit,
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            context: "POD snapshots".into(),
        });
    }
    let svd = x.clone().svd(true, false);
    let u = svd.u.expect("left singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let singular_values: Vec<f64> = order.iter().map(|&k| svd.singular_values[k]).collect();
    let rank = numerical_rank(&singular_values);
    if n_max > rank {
        return Err(Error::RankDeficient { requested: n_max, rank });
    }
    let mut modes = DMatrix::zeros(x.nrows(), n_max);
    for (j, &k) in order.iter().take(n_max).enumerate() {
        let mut col = u.column(k).into_owned();
        // magnitudes equal up to rounding count as a tie
        let peak = col.amax();
        let lead = col.iter().position(|c| c.abs() >= peak * (1.0 - 1e-12)).unwrap_or(0);
        if col[lead] < 0.0 {
            col.neg_mut();
        }
        modes.set_column(j, &col);
    }
    Ok(PodBasis { modes, singular_values })
}
