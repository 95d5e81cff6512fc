//! Property suites behind `verify-bound`: the Jensen bound against the
//! Monte-Carlo oracle, the tightness equality at zero covariance, the
//! zero-lambda reduction identity, and the finite-difference gradient check.
//! Also hosts the monotonicity and moment-generating-function checks used by
//! the acceptance suite.

use jcl_core::losses::{
    gaussian_log_mgf, jcl_loss, jcl_loss_components, monte_carlo_inf_loss, pair_loss,
    ContrastiveInstance, LossParams,
};
use jcl_core::numerics::{dot, CovarianceMatrix, EmbeddingVec, GaussianSampler, Rng};
use jcl_core::stats::{compute_covariance, PositiveKeyStats};
use jcl_core::trainer::streams;

use crate::report::{fmt_f64, CsvTable};

pub const REDUCTION_TOL: f64 = 1e-12;
pub const TIGHTNESS_TOL: f64 = 1e-12;
pub const GRADIENT_TOL: f64 = 1e-5;
pub const FD_STEP: f64 = 1e-6;

/// A self-owned random contrastive problem; instances in the verification
/// suites stay within d ≤ 16, K ≤ 32, λ in 0..4, τ in 0.1..1.
pub struct RandomSetup {
    pub query: EmbeddingVec,
    pub stats: PositiveKeyStats,
    pub negatives: Vec<EmbeddingVec>,
    pub params: LossParams,
}

impl RandomSetup {
    pub fn instance(&self) -> ContrastiveInstance<'_> {
        ContrastiveInstance {
            query: &self.query,
            stats: &self.stats,
            negatives: &self.negatives,
        }
    }

    /// Evaluate the closed form with the query replaced, for finite
    /// differences.
    fn value_at(&self, query: &EmbeddingVec) -> f64 {
        jcl_loss(
            &ContrastiveInstance {
                query,
                stats: &self.stats,
                negatives: &self.negatives,
            },
            &self.params,
        )
        .expect("finite loss")
        .value
    }
}

pub fn random_setup(rng: &mut Rng) -> RandomSetup {
    let d = 2 + rng.index(15); // 2..=16
    let query = rng.unit_vector(d);
    // Covariance built the same way training produces it: normalized keys.
    let key_count = 2 + rng.index(7);
    let keys: Vec<EmbeddingVec> = (0..key_count).map(|_| rng.unit_vector(d)).collect();
    let stats = compute_covariance(&keys).expect("non-empty key set");
    // Mostly populated negative sets, occasionally empty.
    let k = if rng.uniform(0.0, 1.0) < 0.1 {
        0
    } else {
        1 + rng.index(32)
    };
    let negatives: Vec<EmbeddingVec> = (0..k).map(|_| rng.unit_vector(d)).collect();
    let params = LossParams::new(rng.uniform(0.1, 1.0), rng.uniform(0.0, 4.0))
        .expect("ranges are valid");
    RandomSetup {
        query,
        stats,
        negatives,
        params,
    }
}

/// The worked overflow-regime example: exponent 55 in the positive term.
pub fn overflow_regime_setup() -> RandomSetup {
    RandomSetup {
        query: EmbeddingVec::new(vec![1.0, 0.0]).unwrap(),
        stats: PositiveKeyStats {
            mean: EmbeddingVec::new(vec![1.0, 0.0]).unwrap(),
            covariance: CovarianceMatrix::identity(2),
            count: 2,
        },
        negatives: vec![EmbeddingVec::new(vec![0.0, 1.0]).unwrap()],
        params: LossParams::new(0.2, 4.0).unwrap(),
    }
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub trials: usize,
    pub passes: usize,
    /// Signed worst case: positive means the worst trial violated its bound.
    pub worst_margin: f64,
}

impl SuiteResult {
    pub fn all_passed(&self) -> bool {
        self.passes == self.trials
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub seed: u64,
    pub trials: usize,
    pub mc_samples: usize,
    pub suites: Vec<SuiteResult>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.suites.iter().all(|s| s.all_passed())
    }

    pub fn to_table(&self) -> CsvTable {
        let mut table = CsvTable::new(vec![
            "suite",
            "trials",
            "passes",
            "failures",
            "worst_margin",
            "seed",
        ]);
        for s in &self.suites {
            table.push_row(vec![
                s.name.to_string(),
                s.trials.to_string(),
                s.passes.to_string(),
                (s.trials - s.passes).to_string(),
                fmt_f64(s.worst_margin),
                self.seed.to_string(),
            ]);
        }
        table
    }
}

/// Monte-Carlo estimate ≤ closed form + 3 standard errors, per trial.
/// Margin is mc − (bound + 3·se).
pub fn jensen_bound_suite(trials: usize, mc_samples: usize, rng: &mut Rng) -> SuiteResult {
    let mut passes = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let setup = random_setup(rng);
        let bound = jcl_loss(&setup.instance(), &setup.params)
            .expect("finite loss")
            .value;
        let (mc, se) = monte_carlo_inf_loss(&setup.instance(), &setup.params, mc_samples, rng)
            .expect("sampling succeeds");
        let margin = mc - (bound + 3.0 * se);
        worst = worst.max(margin);
        if margin <= 0.0 {
            passes += 1;
        }
    }
    SuiteResult {
        name: "jensen_bound",
        trials,
        passes,
        worst_margin: worst,
    }
}

/// With Σ = 0 both routes reduce to the pair loss at k⁺ = μ; the Monte-Carlo
/// mean must match the closed form to 1e-12. Margin is |mc − closed| − tol.
pub fn tightness_suite(trials: usize, mc_samples: usize, rng: &mut Rng) -> SuiteResult {
    let mut passes = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let mut setup = random_setup(rng);
        setup.stats.covariance = CovarianceMatrix::zeros(setup.query.dim());
        let closed = jcl_loss(&setup.instance(), &setup.params)
            .expect("finite loss")
            .value;
        let (mc, _) = monte_carlo_inf_loss(&setup.instance(), &setup.params, mc_samples, rng)
            .expect("sampling succeeds");
        let margin = (mc - closed).abs() - TIGHTNESS_TOL;
        worst = worst.max(margin);
        if margin <= 0.0 {
            passes += 1;
        }
    }
    SuiteResult {
        name: "tightness",
        trials,
        passes,
        worst_margin: worst,
    }
}

/// λ = 0 collapses the closed form onto the pair loss with k⁺ = μ. Margin is
/// the relative error minus tolerance (relative with a unit floor).
pub fn reduction_suite(trials: usize, rng: &mut Rng) -> SuiteResult {
    let mut passes = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let mut setup = random_setup(rng);
        setup.params = LossParams::new(setup.params.tau, 0.0).expect("valid");
        let closed = jcl_loss(&setup.instance(), &setup.params)
            .expect("finite loss")
            .value;
        let pair = pair_loss(
            &setup.query,
            &setup.stats.mean,
            &setup.negatives,
            setup.params.tau,
        )
        .expect("finite loss");
        let rel = (closed - pair).abs() / pair.abs().max(1.0);
        let margin = rel - REDUCTION_TOL;
        worst = worst.max(margin);
        if margin <= 0.0 {
            passes += 1;
        }
    }
    SuiteResult {
        name: "reduction",
        trials,
        passes,
        worst_margin: worst,
    }
}

/// Central finite differences on each query coordinate (step 1e-6) against
/// the analytical gradient; the first trial is the overflow-regime worked
/// example. Margin is the relative ℓ2 error minus tolerance.
pub fn gradient_suite(trials: usize, rng: &mut Rng) -> SuiteResult {
    let mut passes = 0;
    let mut worst = f64::NEG_INFINITY;
    for trial in 0..trials {
        let setup = if trial == 0 {
            overflow_regime_setup()
        } else {
            random_setup(rng)
        };
        let analytic = jcl_loss(&setup.instance(), &setup.params).expect("finite loss");
        let d = setup.query.dim();
        let mut fd = vec![0.0; d];
        for i in 0..d {
            let mut plus = setup.query.as_slice().to_vec();
            plus[i] += FD_STEP;
            let mut minus = setup.query.as_slice().to_vec();
            minus[i] -= FD_STEP;
            let vp = setup.value_at(&EmbeddingVec::new(plus).unwrap());
            let vm = setup.value_at(&EmbeddingVec::new(minus).unwrap());
            fd[i] = (vp - vm) / (2.0 * FD_STEP);
        }
        let diff: f64 = analytic
            .grad_query
            .as_slice()
            .iter()
            .zip(&fd)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let scale: f64 = analytic
            .grad_query
            .as_slice()
            .iter()
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
            .max(1.0);
        let margin = diff / scale - GRADIENT_TOL;
        worst = worst.max(margin);
        if margin <= 0.0 {
            passes += 1;
        }
    }
    SuiteResult {
        name: "gradient_check",
        trials,
        passes,
        worst_margin: worst,
    }
}

/// Runs the four suites with one generator stream; the report is
/// byte-deterministic under (trials, seed, mc_samples).
pub fn run_verification(trials: usize, seed: u64, mc_samples: usize) -> VerifyReport {
    let mut rng = Rng::for_stream(seed, streams::VERIFY);
    let suites = vec![
        jensen_bound_suite(trials, mc_samples, &mut rng),
        tightness_suite(trials, mc_samples.min(10_000), &mut rng),
        reduction_suite(trials, &mut rng),
        gradient_suite(trials, &mut rng),
    ];
    VerifyReport {
        seed,
        trials,
        mc_samples,
        suites,
    }
}

/// Monotonicity of the closed form in its reduced components, verified by
/// central finite differences at random points: decreasing in the positive
/// alignment (when negatives are present), increasing in the variance
/// penalty and in the negative mass.
pub fn monotonicity_suite(trials: usize, rng: &mut Rng) -> SuiteResult {
    let mut passes = 0;
    let mut worst = f64::NEG_INFINITY;
    let eps = 1e-4;
    for _ in 0..trials {
        // Keep all three softmax terms within f64 reach of each other so the
        // finite differences resolve the sign.
        let a = rng.uniform(-5.0, 5.0);
        let c = rng.uniform(0.0, 5.0);
        let s_neg = rng.uniform(-5.0f64, 5.0).exp();

        let d_a = (jcl_loss_components(a + eps, c, s_neg)
            - jcl_loss_components(a - eps, c, s_neg))
            / (2.0 * eps);
        let d_c = (jcl_loss_components(a, c + eps, s_neg)
            - jcl_loss_components(a, c - eps, s_neg))
            / (2.0 * eps);
        let h = eps * s_neg;
        let d_s = (jcl_loss_components(a, c, s_neg + h)
            - jcl_loss_components(a, c, s_neg - h))
            / (2.0 * h);

        // All three must hold; margin is how far the worst sign constraint
        // is from holding (negative = satisfied).
        let margin = [d_a, -d_c, -d_s]
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max);
        worst = worst.max(margin);
        if d_a < 0.0 && d_c > 0.0 && d_s > 0.0 {
            passes += 1;
        }
    }
    SuiteResult {
        name: "monotonicity",
        trials,
        passes,
        worst_margin: worst,
    }
}

/// Closed-form log-MGF against a log-mean-exp sampling oracle, within three
/// standard errors (delta method on the exponential mean).
pub fn mgf_suite(trials: usize, mc_samples: usize, rng: &mut Rng) -> SuiteResult {
    let mut passes = 0;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..trials {
        let d = 2 + rng.index(7);
        let direction = EmbeddingVec::new(rng.normal_vec(d).iter().map(|x| 0.6 * x).collect())
            .expect("finite");
        let mean = EmbeddingVec::new(rng.normal_vec(d).iter().map(|x| 0.4 * x).collect())
            .expect("finite");
        let keys: Vec<EmbeddingVec> = (0..d + 2).map(|_| rng.unit_vector(d)).collect();
        let covariance = compute_covariance(&keys).expect("non-empty").covariance;
        let closed = gaussian_log_mgf(&direction, &mean, &covariance).expect("PSD");

        let sampler = GaussianSampler::new(&mean, &covariance).expect("PSD");
        let shift = dot(&direction, &mean).expect("dims match");
        let mut running_mean = 0.0;
        let mut m2 = 0.0;
        for s in 1..=mc_samples {
            let x = sampler.draw(rng);
            let y = (dot(&direction, &x).expect("dims match") - shift).exp();
            let delta = y - running_mean;
            running_mean += delta / s as f64;
            m2 += delta * (y - running_mean);
        }
        let se = (m2 / (mc_samples - 1) as f64).sqrt() / (mc_samples as f64).sqrt();
        let log_mean = shift + running_mean.ln();
        let se_log = se / running_mean;
        let margin = (closed - log_mean).abs() - 3.0 * se_log;
        worst = worst.max(margin);
        if margin <= 0.0 {
            passes += 1;
        }
    }
    SuiteResult {
        name: "gaussian_mgf",
        trials,
        passes,
        worst_margin: worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_is_byte_deterministic() {
        let a = run_verification(5, 123, 2000).to_table().to_csv();
        let b = run_verification(5, 123, 2000).to_table().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn small_run_passes_all_suites() {
        let report = run_verification(10, 0, 5000);
        for s in &report.suites {
            assert!(s.all_passed(), "{}: worst margin {}", s.name, s.worst_margin);
        }
    }

    #[test]
    fn monotonicity_and_mgf_helpers_pass() {
        let mut rng = Rng::for_stream(0, streams::VERIFY);
        let mono = monotonicity_suite(25, &mut rng);
        assert!(mono.all_passed(), "worst {}", mono.worst_margin);
        let mgf = mgf_suite(3, 50_000, &mut rng);
        assert!(mgf.all_passed(), "worst {}", mgf.worst_margin);
    }
}
