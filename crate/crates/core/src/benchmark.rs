//! Monte Carlo comparison of the estimators against bivariate Gaussians with
//! known entropy.
//!
//! Each trial draws a random factor matrix `A`, uses `Sigma = A A^T` as the
//! covariance, samples `N` points and scores every estimator by its absolute
//! percentage error against the analytic entropy. The study reports the mean
//! squared percentage error per method and a one-sided percentile-bootstrap
//! lower bound on `MSE_naive - MSE_rotated`.

use std::collections::BTreeMap;
use std::f64::consts::{E, PI};
use std::fmt::Write as _;

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    entropy_equiprobable_samples, entropy_marginal_equiquantised, entropy_naive, Method,
};
use crate::geometry::SampleSet;
use crate::optimizer::{entropy_rotated, OptimizerConfig};

/// Smallest covariance determinant accepted.
pub const DET_FLOOR: f64 = 1e-2;
/// Redraw budget for [`random_covariance`].
pub const MAX_REDRAWS: usize = 1000;

/// The four methods compared in a study, in report order.
pub const STUDY_METHODS: [Method; 4] = [
    Method::Naive,
    Method::MarginalEquiquantised,
    Method::Equiprobable,
    Method::RotatedEquiprobable,
];

pub const CSV_HEADER: &str =
    "N,B,mse_naive,mse_marginal,mse_equiprobable,mse_rotated,ci_lower_99";

/// A validated covariance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CovarianceRepr", into = "CovarianceRepr")]
pub struct CovarianceSpec {
    sigma: DMatrix<f64>,
    det: f64,
}

#[derive(Serialize, Deserialize)]
struct CovarianceRepr {
    sigma: Vec<Vec<f64>>,
    det: f64,
}

impl From<CovarianceSpec> for CovarianceRepr {
    fn from(c: CovarianceSpec) -> Self {
        let sigma = c
            .sigma
            .row_iter()
            .map(|r| r.iter().copied().collect())
            .collect();
        Self { sigma, det: c.det }
    }
}

impl TryFrom<CovarianceRepr> for CovarianceSpec {
    type Error = Error;

    fn try_from(r: CovarianceRepr) -> Result<Self> {
        let d = r.sigma.len();
        if r.sigma.iter().any(|row| row.len() != d) {
            return Err(Error::InvalidParameter("covariance must be square".into()));
        }
        let flat: Vec<f64> = r.sigma.into_iter().flatten().collect();
        CovarianceSpec::new(DMatrix::from_row_slice(d, d, &flat))
    }
}

impl CovarianceSpec {
    /// Checks symmetry, positive definiteness and the determinant floor.
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        let d = sigma.nrows();
        if d == 0 || sigma.ncols() != d {
            return Err(Error::InvalidParameter("covariance must be square".into()));
        }
        if sigma.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("covariance must be finite".into()));
        }
        for i in 0..d {
            for j in i + 1..d {
                let scale = sigma[(i, j)].abs().max(sigma[(j, i)].abs()).max(1.0);
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidParameter("covariance must be symmetric".into()));
                }
            }
        }
        let chol = Cholesky::new(sigma.clone()).ok_or(Error::NotPositiveDefinite)?;
        let det = chol.l().diagonal().iter().map(|x| x * x).product::<f64>();
        if !(det > DET_FLOOR) {
            return Err(Error::InvalidParameter(format!(
                "det = {det} is not above the floor {DET_FLOOR}"
            )));
        }
        Ok(Self { sigma, det })
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn dims(&self) -> usize {
        self.sigma.nrows()
    }

    /// Pearson correlation between the first two dimensions.
    pub fn correlation(&self) -> f64 {
        self.sigma[(0, 1)] / (self.sigma[(0, 0)] * self.sigma[(1, 1)]).sqrt()
    }
}

/// Gaussian differential entropy `0.5 log2((2 pi e)^d |Sigma|)` in bits.
pub fn theoretical_entropy(sigma: &CovarianceSpec) -> Result<f64> {
    if !(sigma.det > 0.0) {
        return Err(Error::NotPositiveDefinite);
    }
    let d = sigma.dims() as f64;
    Ok(0.5 * (d * (2.0 * PI * E).log2() + sigma.det.log2()))
}

/// Draws `A` with `a11 ~ U(-20, 20)`, `a12 ~ U(0, 30)`, `a21 ~ N(-2, 2)`,
/// `a22 ~ N(-1, 1)` (mean, standard deviation) and returns `A A^T`.
pub fn random_covariance<R: Rng + ?Sized>(rng: &mut R) -> Result<CovarianceSpec> {
    let u11 = Uniform::new(-20.0, 20.0).expect("valid range");
    let u12 = Uniform::new(0.0, 30.0).expect("valid range");
    let n21 = Normal::new(-2.0, 2.0).expect("valid normal");
    let n22 = Normal::new(-1.0, 1.0).expect("valid normal");
    for _ in 0..MAX_REDRAWS {
        let a = DMatrix::from_row_slice(
            2,
            2,
            &[
                u11.sample(rng),
                u12.sample(rng),
                n21.sample(rng),
                n22.sample(rng),
            ],
        );
        let sigma = &a * a.transpose();
        // symmetrise exactly
        let sigma = (&sigma + sigma.transpose()) * 0.5;
        let det = sigma[(0, 0)] * sigma[(1, 1)] - sigma[(0, 1)] * sigma[(1, 0)];
        if det < DET_FLOOR {
            continue;
        }
        if let Ok(cov) = CovarianceSpec::new(sigma) {
            return Ok(cov);
        }
    }
    Err(Error::CovarianceExhausted {
        floor: DET_FLOOR,
        attempts: MAX_REDRAWS,
    })
}

/// `n` draws from `N(0, Sigma)` as the rows of an `n x d` matrix.
pub fn draw_gaussian<R: Rng + ?Sized>(
    sigma: &CovarianceSpec,
    n: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter("N must be >= 1".into()));
    }
    let d = sigma.dims();
    let l = Cholesky::new(sigma.sigma.clone())
        .ok_or(Error::NotPositiveDefinite)?
        .l();
    let mut out = DMatrix::zeros(n, d);
    for i in 0..n {
        let z = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &l * z;
        out.row_mut(i).copy_from(&x.transpose());
    }
    Ok(out)
}

/// Like [`draw_gaussian`], as a sample set (needs `n >= 2`).
pub fn sample_gaussian<R: Rng + ?Sized>(
    sigma: &CovarianceSpec,
    n: usize,
    rng: &mut R,
) -> Result<SampleSet> {
    if n < 2 {
        return Err(Error::TooFewSamples(n));
    }
    SampleSet::from_matrix(&draw_gaussian(sigma, n, rng)?)
}

/// Percentile-bootstrap lower bound for the mean of `diffs`.
pub fn bootstrap_ci_lower<R: Rng + ?Sized>(
    diffs: &[f64],
    level: f64,
    resamples: usize,
    rng: &mut R,
) -> Result<f64> {
    if diffs.is_empty() {
        return Err(Error::EmptyInput);
    }
    if diffs.len() < 2 {
        return Err(Error::InvalidParameter("bootstrap needs at least 2 values".into()));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("level {level} not in (0, 1)")));
    }
    if resamples == 0 {
        return Err(Error::InvalidParameter("resamples must be >= 1".into()));
    }

    let n = diffs.len();
    let shift = diffs[0];
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            // shifted sum: exact when all values are equal
            let s: f64 = (0..n).map(|_| diffs[rng.random_range(0..n)] - shift).sum();
            shift + s / n as f64
        })
        .collect();
    means.sort_by(f64::total_cmp);

    // nearest-rank percentile at 1 - level
    let rank = ((1.0 - level) * resamples as f64 - 1e-9).ceil().max(1.0) as usize;
    Ok(means[rank.min(resamples) - 1])
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub n: usize,
    /// Total bin count `B`, shared by all methods.
    pub bins: usize,
    pub trials: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig,
    pub bootstrap_resamples: usize,
    pub confidence: f64,
}

impl StudyConfig {
    pub fn new(n: usize, bins: usize, trials: usize, seed: u64) -> Self {
        Self {
            n,
            bins,
            trials,
            seed,
            optimizer: OptimizerConfig::default(),
            bootstrap_resamples: 10_000,
            confidence: 0.99,
        }
    }

    /// Tree depth `s` and grid resolution `k` for bivariate data with
    /// `B = 2^(2s) = k^2`.
    pub fn resolve_bins(&self) -> Result<(usize, usize)> {
        let b = self.bins;
        let depth = (1..=20).find(|&s| 1usize << (2 * s) == b).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "B = {b} is not 2^(s*d) for d = 2 and some depth s >= 1"
            ))
        })?;
        if self.n < b {
            return Err(Error::InsufficientSamples {
                n: self.n,
                bins: b,
                depth,
                dims: 2,
            });
        }
        Ok((depth, 1 << depth))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub index: usize,
    pub covariance: CovarianceSpec,
    pub theoretical: f64,
    pub estimates: BTreeMap<Method, f64>,
    pub abs_pct_error: BTreeMap<Method, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub index: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyResult {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "B")]
    pub bins: usize,
    pub depth: usize,
    pub bins_per_dim: usize,
    pub trials: usize,
    pub seed: u64,
    pub mse: BTreeMap<Method, f64>,
    /// `None` when fewer than two trials succeeded.
    pub ci_lower: Option<f64>,
    pub confidence: f64,
    pub records: Vec<TrialResult>,
    pub failures: Vec<TrialFailure>,
}

fn trial_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn run_trial(
    index: usize,
    config: &StudyConfig,
    depth: usize,
    k: usize,
) -> Result<TrialResult> {
    let mut rng = trial_rng(config.seed, index as u64 + 1);
    let covariance = random_covariance(&mut rng)?;
    let samples = sample_gaussian(&covariance, config.n, &mut rng)?;
    let theoretical = theoretical_entropy(&covariance)?;

    let mut estimates = BTreeMap::new();
    estimates.insert(Method::Naive, entropy_naive(&samples, k)?.value);
    estimates.insert(
        Method::MarginalEquiquantised,
        entropy_marginal_equiquantised(&samples, k)?.value,
    );
    estimates.insert(
        Method::Equiprobable,
        entropy_equiprobable_samples(&samples, depth)?.value,
    );
    estimates.insert(
        Method::RotatedEquiprobable,
        entropy_rotated(&samples, depth, &config.optimizer)?.value,
    );

    let abs_pct_error = estimates
        .iter()
        .map(|(&m, &h)| (m, (h - theoretical).abs() / theoretical.abs()))
        .collect();
    Ok(TrialResult {
        index,
        covariance,
        theoretical,
        estimates,
        abs_pct_error,
    })
}

/// Mean over records of each method's squared percentage error.
pub fn aggregate_mse(records: &[TrialResult]) -> BTreeMap<Method, f64> {
    STUDY_METHODS
        .iter()
        .map(|&m| {
            let sum: f64 = records.iter().map(|r| r.abs_pct_error[&m].powi(2)).sum();
            (m, sum / records.len() as f64)
        })
        .collect()
}

/// Runs every trial (in parallel, each with its own seeded stream) and
/// aggregates in trial order.
pub fn run_study(config: &StudyConfig) -> Result<StudyResult> {
    let (depth, k) = config.resolve_bins()?;
    if config.trials == 0 {
        return Err(Error::InvalidParameter("trials must be >= 1".into()));
    }

    let outcomes: Vec<Result<TrialResult>> = (0..config.trials)
        .into_par_iter()
        .map(|i| run_trial(i, config, depth, k))
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (index, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(r) => records.push(r),
            Err(e) => failures.push(TrialFailure {
                index,
                reason: e.to_string(),
            }),
        }
    }
    if records.is_empty() {
        return Err(Error::InvalidParameter(format!(
            "all {} trials failed; first: {}",
            failures.len(),
            failures[0].reason
        )));
    }

    let mse = aggregate_mse(&records);
    let ci_lower = if records.len() >= 2 {
        let diffs: Vec<f64> = records
            .iter()
            .map(|r| {
                r.abs_pct_error[&Method::Naive].powi(2)
                    - r.abs_pct_error[&Method::RotatedEquiprobable].powi(2)
            })
            .collect();
        let mut rng = trial_rng(config.seed, 0);
        Some(bootstrap_ci_lower(
            &diffs,
            config.confidence,
            config.bootstrap_resamples,
            &mut rng,
        )?)
    } else {
        None
    };

    Ok(StudyResult {
        n: config.n,
        bins: config.bins,
        depth,
        bins_per_dim: k,
        trials: config.trials,
        seed: config.seed,
        mse,
        ci_lower,
        confidence: config.confidence,
        records,
        failures,
    })
}

fn sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "nan".to_string()
    }
}

impl StudyResult {
    /// Header plus one row; floats carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(CSV_HEADER);
        out.push('\n');
        let _ = write!(out, "{},{}", self.n, self.bins);
        for m in STUDY_METHODS {
            let _ = write!(out, ",{}", sci(self.mse[&m]));
        }
        let _ = writeln!(out, ",{}", sci(self.ci_lower.unwrap_or(f64::NAN)));
        out
    }

    /// The method with the smallest MSE.
    pub fn best_method(&self) -> Method {
        STUDY_METHODS
            .iter()
            .copied()
            .min_by(|a, b| self.mse[a].total_cmp(&self.mse[b]))
            .expect("four methods")
    }
}
