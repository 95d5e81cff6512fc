//! Per-instance sufficient statistics of positive keys: mean, centering,
//! and the biased covariance used by the closed-form loss.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{CovarianceMatrix, EmbeddingVec};

/// Mean, covariance, and sample count of one instance's positive keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PositiveKeyStats {
    pub mean: EmbeddingVec,
    pub covariance: CovarianceMatrix,
    pub count: usize,
}

impl PositiveKeyStats {
    /// Statistics with zero spread around a given center, the degenerate
    /// single-key case.
    pub fn degenerate(mean: EmbeddingVec) -> Self {
        let dim = mean.dim();
        Self {
            mean,
            covariance: CovarianceMatrix::zeros(dim),
            count: 1,
        }
    }
}

/// Arithmetic mean of the keys.
pub fn compute_mean(keys: &[EmbeddingVec]) -> Result<EmbeddingVec> {
    let first = keys.first().ok_or(Error::EmptyInput("key set"))?;
    let dim = first.dim();
    let mut acc = vec![0.0; dim];
    for key in keys {
        if key.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: key.dim(),
            });
        }
        for (a, k) in acc.iter_mut().zip(key.as_slice()) {
            *a += k;
        }
    }
    let m = keys.len() as f64;
    EmbeddingVec::new(acc.into_iter().map(|a| a / m).collect())
}

/// Centers the keys at their mean and accumulates the biased covariance
/// Σ = (1/M)·Σₘ k̃ₘ k̃ₘᵀ. The 1/M divisor is deliberate (no Bessel
/// correction); the covariance strength multiplier downstream absorbs the
/// difference. The upper triangle is computed once and mirrored, so the
/// output is exactly symmetric.
pub fn compute_covariance(keys: &[EmbeddingVec]) -> Result<PositiveKeyStats> {
    let mean = compute_mean(keys)?;
    let dim = mean.dim();
    let m = keys.len() as f64;
    let mut centered: Vec<Vec<f64>> = Vec::with_capacity(keys.len());
    for key in keys {
        centered.push(
            key.as_slice()
                .iter()
                .zip(mean.as_slice())
                .map(|(k, mu)| k - mu)
                .collect(),
        );
    }
    let mut entries = vec![0.0; dim * dim];
    for a in 0..dim {
        for b in a..dim {
            let mut acc = 0.0;
            for row in &centered {
                acc += row[a] * row[b];
            }
            let v = acc / m;
            entries[a * dim + b] = v;
            entries[b * dim + a] = v;
        }
    }
    Ok(PositiveKeyStats {
        mean,
        covariance: CovarianceMatrix::from_symmetric_unchecked(dim, entries),
        count: keys.len(),
    })
}

/// Training-time assertion that the stored covariance is PSD.
pub fn stats_psd_check(stats: &PositiveKeyStats) -> bool {
    stats.covariance.psd_check()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;

    fn ev(values: &[f64]) -> EmbeddingVec {
        EmbeddingVec::new(values.to_vec()).unwrap()
    }

    #[test]
    fn mean_of_single_key() {
        assert_eq!(compute_mean(&[ev(&[1.0, 0.0])]).unwrap().as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn mean_of_two_orthogonal_keys() {
        let m = compute_mean(&[ev(&[1.0, 0.0]), ev(&[0.0, 1.0])]).unwrap();
        assert_eq!(m.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn mean_of_identical_keys_is_the_key() {
        let v = ev(&[0.25, -0.75, 0.5]);
        let keys = vec![v.clone(); 7];
        assert_eq!(compute_mean(&keys).unwrap().as_slice(), v.as_slice());
    }

    #[test]
    fn mean_of_empty_errors() {
        assert!(matches!(compute_mean(&[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn covariance_of_identical_keys_is_zero() {
        let keys = vec![ev(&[0.3, 0.4]); 5];
        let stats = compute_covariance(&keys).unwrap();
        assert!(stats.covariance.entries().iter().all(|&e| e == 0.0));
        assert_eq!(stats.count, 5);
    }

    #[test]
    fn covariance_of_single_key_is_zero() {
        let stats = compute_covariance(&[ev(&[1.0, 2.0])]).unwrap();
        assert!(stats.covariance.entries().iter().all(|&e| e == 0.0));
    }

    #[test]
    fn covariance_hand_example() {
        let stats = compute_covariance(&[ev(&[1.0, 0.0]), ev(&[0.0, 1.0])]).unwrap();
        assert_eq!(stats.mean.as_slice(), &[0.5, 0.5]);
        let want = [0.25, -0.25, -0.25, 0.25];
        for (got, want) in stats.covariance.entries().iter().zip(&want) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!(stats_psd_check(&stats));
    }

    #[test]
    fn psd_check_examples() {
        let from_keys = compute_covariance(&[ev(&[1.0, 0.2]), ev(&[-0.4, 0.9])]).unwrap();
        assert!(stats_psd_check(&from_keys));

        let indefinite = PositiveKeyStats {
            mean: EmbeddingVec::zeros(2),
            covariance: CovarianceMatrix::try_new(2, vec![1.0, 2.0, 2.0, 1.0]).unwrap(),
            count: 2,
        };
        assert!(!stats_psd_check(&indefinite));

        let zero = PositiveKeyStats::degenerate(ev(&[0.0, 1.0]));
        assert!(stats_psd_check(&zero));
    }

    fn random_keys(rng: &mut Rng, count: usize, dim: usize) -> Vec<EmbeddingVec> {
        (0..count)
            .map(|_| EmbeddingVec::new(rng.normal_vec(dim)).unwrap())
            .collect()
    }

    #[test]
    fn covariance_matches_double_loop_oracle() {
        let mut rng = Rng::from_seed(31);
        for _ in 0..50 {
            let dim = 1 + rng.index(6);
            let count = 1 + rng.index(8);
            let keys = random_keys(&mut rng, count, dim);
            let stats = compute_covariance(&keys).unwrap();

            // Independent oracle: mean and full double loop over both
            // triangles, no mirroring.
            let m = count as f64;
            for a in 0..dim {
                for b in 0..dim {
                    let mu_a: f64 = keys.iter().map(|k| k[a]).sum::<f64>() / m;
                    let mu_b: f64 = keys.iter().map(|k| k[b]).sum::<f64>() / m;
                    let want: f64 = keys
                        .iter()
                        .map(|k| (k[a] - mu_a) * (k[b] - mu_b))
                        .sum::<f64>()
                        / m;
                    assert!((stats.covariance.entry(a, b) - want).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn covariance_is_exactly_symmetric() {
        let mut rng = Rng::from_seed(32);
        let keys = random_keys(&mut rng, 9, 5);
        let stats = compute_covariance(&keys).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                assert_eq!(stats.covariance.entry(a, b), stats.covariance.entry(b, a));
            }
        }
    }

    #[test]
    fn trace_equals_mean_squared_centered_norm() {
        let mut rng = Rng::from_seed(33);
        let keys = random_keys(&mut rng, 12, 4);
        let stats = compute_covariance(&keys).unwrap();
        let mu = &stats.mean;
        let want: f64 = keys
            .iter()
            .map(|k| {
                k.as_slice()
                    .iter()
                    .zip(mu.as_slice())
                    .map(|(x, m)| (x - m) * (x - m))
                    .sum::<f64>()
            })
            .sum::<f64>()
            / keys.len() as f64;
        assert!((stats.covariance.trace() - want).abs() <= 1e-12);
    }

    #[test]
    fn covariance_is_translation_invariant() {
        let mut rng = Rng::from_seed(34);
        let keys = random_keys(&mut rng, 6, 4);
        let shift = rng.normal_vec(4);
        let shifted: Vec<EmbeddingVec> = keys
            .iter()
            .map(|k| {
                EmbeddingVec::new(
                    k.as_slice()
                        .iter()
                        .zip(&shift)
                        .map(|(x, s)| x + s)
                        .collect(),
                )
                .unwrap()
            })
            .collect();
        let base = compute_covariance(&keys).unwrap();
        let moved = compute_covariance(&shifted).unwrap();
        for (a, b) in base
            .covariance
            .entries()
            .iter()
            .zip(moved.covariance.entries())
        {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn rank_bounded_by_count_and_dim() {
        let mut rng = Rng::from_seed(35);
        for &(count, dim) in &[(2usize, 6usize), (3, 8), (1, 4), (10, 3)] {
            let keys = random_keys(&mut rng, count, dim);
            let stats = compute_covariance(&keys).unwrap();
            let factor = stats.covariance.semidefinite_cholesky().unwrap();
            // Centering loses one degree of freedom.
            assert!(factor.rank <= count.min(dim));
        }
    }
}
