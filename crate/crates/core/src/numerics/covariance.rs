//! Dense symmetric matrices, PSD certification, and quadratic forms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::EmbeddingVec;

/// Pivot tolerance for positive-semidefinite certification. A symmetric
/// matrix passes when every Cholesky pivot stays above −PSD_TOL after the
/// accumulated elimination, which matches a smallest-eigenvalue bound of
/// the same order.
pub const PSD_TOL: f64 = 1e-10;

/// Relative tolerance on |Σ_ab − Σ_ba| at construction.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A d×d real symmetric matrix stored row-major.
///
/// Construction checks finiteness and symmetry only; positive
/// semidefiniteness is certified separately via [`CovarianceMatrix::psd_check`]
/// or by factorizing, so that deliberately indefinite matrices can still be
/// built and rejected by the checks that care.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix {
    dim: usize,
    entries: Vec<f64>,
}

/// Factor L with L·Lᵀ equal to the input matrix. Produced by diagonally
/// pivoted Cholesky, so L is lower-triangular up to a row permutation;
/// degenerate directions carry exact zero columns. `rank` counts the
/// accepted pivots.
#[derive(Debug, Clone)]
pub struct SemidefiniteFactor {
    dim: usize,
    lower: Vec<f64>,
    pub rank: usize,
}

impl CovarianceMatrix {
    pub fn try_new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::EmptyInput("covariance matrix"));
        }
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
            });
        }
        if entries.iter().any(|e| !e.is_finite()) {
            return Err(Error::NonFinite("covariance matrix"));
        }
        for a in 0..dim {
            for b in (a + 1)..dim {
                let ab = entries[a * dim + b];
                let ba = entries[b * dim + a];
                if (ab - ba).abs() > SYMMETRY_TOL * ab.abs().max(1.0) {
                    return Err(Error::NotSymmetric);
                }
            }
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = 1.0;
        }
        m
    }

    /// Builds from exactly-symmetric data without re-checking symmetry.
    /// Callers must have produced `entries` by mirroring one triangle.
    pub(crate) fn from_symmetric_unchecked(dim: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), dim * dim);
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, a: usize, b: usize) -> f64 {
        self.entries[a * self.dim + b]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn trace(&self) -> f64 {
        let mut t = 0.0;
        for i in 0..self.dim {
            t += self.entries[i * self.dim + i];
        }
        t
    }

    /// Entrywise scaling, used to apply the covariance strength multiplier.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * factor).collect(),
        }
    }

    /// Matrix-vector product S·q.
    pub fn mul_vec(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for a in 0..self.dim {
            let row = &self.entries[a * self.dim..(a + 1) * self.dim];
            let mut acc = 0.0;
            for b in 0..self.dim {
                acc += row[b] * q[b];
            }
            out[a] = acc;
        }
        out
    }

    /// Diagonally pivoted semidefinite Cholesky: eliminates the largest
    /// remaining diagonal first, stops once every remaining diagonal is
    /// numerically zero, and errors when the leftover block carries a
    /// clearly negative diagonal or off-diagonal mass inconsistent with a
    /// PSD matrix. Pivoting keeps the elimination rank-revealing; unpivoted
    /// elimination on rank-deficient covariances amplifies rounding through
    /// small leading pivots.
    pub fn semidefinite_cholesky(&self) -> Result<SemidefiniteFactor> {
        let d = self.dim;
        let scale = (0..d)
            .map(|i| self.entries[i * d + i].abs())
            .fold(1.0_f64, f64::max);
        let stop_tol = PSD_TOL * scale;
        // For a PSD matrix, |S_ij| <= sqrt(S_ii·S_jj) <= stop_tol inside the
        // terminated block; allow generous slack above that.
        let off_tol = PSD_TOL.sqrt() * scale;

        // Working copy, permuted in place; `perm[i]` is the original index
        // living at permuted position i.
        let mut work = self.entries.clone();
        let mut perm: Vec<usize> = (0..d).collect();
        let mut lower = vec![0.0; d * d];
        let mut rank = d;

        for j in 0..d {
            let mut best = j;
            for i in (j + 1)..d {
                if work[i * d + i] > work[best * d + best] {
                    best = i;
                }
            }
            let pivot = work[best * d + best];
            if pivot <= stop_tol {
                for i in j..d {
                    if work[i * d + i] < -stop_tol {
                        return Err(Error::NotPositiveSemidefinite);
                    }
                    for k in (i + 1)..d {
                        if work[i * d + k].abs() > off_tol {
                            return Err(Error::NotPositiveSemidefinite);
                        }
                    }
                }
                rank = j;
                break;
            }
            if best != j {
                perm.swap(j, best);
                for k in 0..d {
                    work.swap(j * d + k, best * d + k);
                }
                for i in 0..d {
                    work.swap(i * d + j, i * d + best);
                }
                for k in 0..j {
                    lower.swap(j * d + k, best * d + k);
                }
            }
            let ljj = pivot.sqrt();
            lower[j * d + j] = ljj;
            for i in (j + 1)..d {
                lower[i * d + j] = work[i * d + j] / ljj;
            }
            for i in (j + 1)..d {
                for k in (j + 1)..d {
                    work[i * d + k] -= lower[i * d + j] * lower[k * d + j];
                }
            }
        }

        // Scatter rows back to the original ordering: with B = S[π,π] = L̃L̃ᵀ,
        // placing row i of L̃ at original row π(i) gives L·Lᵀ = S directly.
        let mut scattered = vec![0.0; d * d];
        for i in 0..d {
            for k in 0..d {
                scattered[perm[i] * d + k] = lower[i * d + k];
            }
        }
        Ok(SemidefiniteFactor {
            dim: d,
            lower: scattered,
            rank,
        })
    }

    /// PSD certification used as a training-time assertion.
    pub fn psd_check(&self) -> bool {
        self.semidefinite_cholesky().is_ok()
    }
}

impl SemidefiniteFactor {
    /// L·z with fixed accumulation order. Only the first `rank` columns can
    /// be nonzero, so degenerate directions contribute exact zeros.
    pub fn mul_vec(&self, z: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = vec![0.0; d];
        for i in 0..d {
            let mut acc = 0.0;
            for k in 0..self.rank {
                acc += self.lower[i * d + k] * z[k];
            }
            out[i] = acc;
        }
        out
    }
}

/// Quadratic form qᵀ·S·q.
///
/// For any S passing the PSD invariant the result is bounded below by
/// −PSD_TOL·‖q‖².
pub fn quadratic_form(q: &EmbeddingVec, s: &CovarianceMatrix) -> Result<f64> {
    if q.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: q.dim(),
        });
    }
    let qs = q.as_slice();
    let sq = s.mul_vec(qs);
    let mut acc = 0.0;
    for i in 0..qs.len() {
        acc += qs[i] * sq[i];
    }
    Ok(acc)
}
