//! Approximation-set-coding criteria: random two-way splits of the data with a
//! shared anchor set, and the closed-form log posterior agreement
//!
//! ```text
//! log η = log ∫ p(f̃ | D₁) p(f̃ | D₂) p(f̃) df̃
//! ```
//!
//! over the latent values `f̃` at the anchors. The Bayesian variant uses the
//! ordinary GP posteriors; the β-noise variant (β = 1) uses the normalized
//! likelihood of each half as a density over `f̃`.
//!
//! A partition whose evaluation hits a factorization failure is skipped and
//! counted by [`average_log_eta`] rather than aborting the whole score.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{GpError, Result};
use crate::gaussian::{log_product_integral_canonical, maxent_canonical, CanonicalGaussian, GaussianDist};
use crate::gp::{Dataset, GpModel};
use crate::kernels::{kernel_matrix, mean_vector};
use crate::linalg::{vec_add, Cholesky, Matrix};
use crate::scalar::Real;

/// Two disjoint halves of `0..N` plus `M` anchor indices drawn from all of `0..N`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub idx1: Vec<usize>,
    pub idx2: Vec<usize>,
    pub anchor_idx: Vec<usize>,
}

impl Partition {
    /// Checks the split and anchor invariants for a data set of `n` points.
    pub fn validate(&self, n: usize) -> Result<()> {
        let m = self.anchor_idx.len();
        let bad = |msg: &str| Err(GpError::InvalidConfig(format!("invalid partition: {msg}")));
        if m == 0 {
            return bad("no anchors");
        }
        if self.idx1.len().abs_diff(self.idx2.len()) > 1 {
            return bad("halves differ in size by more than one");
        }
        if self.idx1.len() < m || self.idx2.len() < m {
            return bad("a half has fewer points than anchors");
        }
        let mut seen = vec![0u8; n];
        for &i in self.idx1.iter().chain(&self.idx2) {
            if i >= n || seen[i] != 0 {
                return bad("halves overlap or index out of range");
            }
            seen[i] = 1;
        }
        if seen.contains(&0) {
            return bad("halves do not cover every point");
        }
        let mut anchors = self.anchor_idx.clone();
        anchors.sort_unstable();
        anchors.dedup();
        if anchors.len() != m || anchors.last().is_some_and(|&a| a >= n) {
            return bad("anchors repeat or are out of range");
        }
        Ok(())
    }

    /// Same partition with the two halves exchanged.
    pub fn swapped(&self) -> Self {
        Self { idx1: self.idx2.clone(), idx2: self.idx1.clone(), anchor_idx: self.anchor_idx.clone() }
    }
}

/// Agreement dimension `m`, number of partitions `j`, and the partition seed.
/// `beta` is carried for reporting and must equal 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscConfig {
    pub m: usize,
    pub j: usize,
    pub beta: f64,
    pub seed: u64,
}

impl Default for AscConfig {
    fn default() -> Self {
        Self { m: 2, j: 32, beta: 1.0, seed: 0 }
    }
}

impl AscConfig {
    pub fn new(m: usize, j: usize, seed: u64) -> Result<Self> {
        let cfg = Self { m, j, beta: 1.0, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 || self.j == 0 {
            return Err(GpError::InvalidConfig("agreement dimension M and partition count J must be ≥ 1".into()));
        }
        if self.beta != 1.0 {
            return Err(GpError::InvalidConfig(format!("β is fixed at 1, got {}", self.beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AscVariant {
    Bayesian,
    BetaNoise,
}

impl fmt::Display for AscVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AscVariant::Bayesian => "bayesian",
            AscVariant::BetaNoise => "beta-noise",
        })
    }
}

impl FromStr for AscVariant {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bayesian" => Ok(AscVariant::Bayesian),
            "beta-noise" => Ok(AscVariant::BetaNoise),
            other => Err(GpError::InvalidConfig(format!("unknown ASC variant `{other}`"))),
        }
    }
}

/// `J` uniformly random near-equal splits, each with `M` anchors drawn without
/// replacement from all points. Deterministic in `cfg.seed`.
pub fn sample_partitions(n: usize, cfg: &AscConfig) -> Result<Vec<Partition>> {
    cfg.validate()?;
    if n < 2 * cfg.m {
        return Err(GpError::InsufficientData { found: n, required: 2 * cfg.m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut perm: Vec<usize> = (0..n).collect();
    Ok((0..cfg.j)
        .map(|_| {
            perm.shuffle(&mut rng);
            let (a, b) = perm.split_at(n / 2);
            let mut idx1 = a.to_vec();
            let mut idx2 = b.to_vec();
            idx1.sort_unstable();
            idx2.sort_unstable();
            let mut anchor_idx = index::sample(&mut rng, n, cfg.m).into_vec();
            anchor_idx.sort_unstable();
            Partition { idx1, idx2, anchor_idx }
        })
        .collect())
}

/// Intermediate quantities of the Bayesian agreement for one partition.
#[derive(Debug, Clone)]
pub struct BayesianAscTerms<T> {
    /// Posterior mean of `f̃` given each half.
    pub s1: Vec<T>,
    pub s2: Vec<T>,
    /// Posterior covariance of `f̃` given each half.
    pub v1: Matrix<T>,
    pub v2: Matrix<T>,
    /// `V₁⁻¹s₁ + V₂⁻¹s₂ + K̃⁻¹m̃`.
    pub s: Vec<T>,
    /// `V₁⁻¹ + V₂⁻¹ + K̃⁻¹`.
    pub p: Matrix<T>,
    pub log_eta: T,
}

/// Intermediate quantities of the β-noise agreement for one partition.
#[derive(Debug, Clone)]
pub struct BetaNoiseAscTerms<T> {
    pub r1: Vec<T>,
    pub r2: Vec<T>,
    pub lambda1: Matrix<T>,
    pub lambda2: Matrix<T>,
    /// `r₁ + r₂ + K̃⁻¹m̃`.
    pub r: Vec<T>,
    /// `Λ₁ + Λ₂ + K̃⁻¹`.
    pub lambda: Matrix<T>,
    pub log_eta: T,
}

/// Kernel Gram matrix and prior mean over all data, shared by every partition.
struct Prepared<'a, T> {
    model: &'a GpModel<T>,
    y: &'a [T],
    gram: Matrix<T>,
    mean: Vec<T>,
}

struct AnchorPrior<T> {
    mean: Vec<T>,
    cov: Matrix<T>,
    chol: Cholesky<T>,
}

impl<'a, T: Real> Prepared<'a, T> {
    fn new(model: &'a GpModel<T>, data: &'a Dataset<T>) -> Result<Self> {
        Ok(Self {
            model,
            y: data.y(),
            gram: kernel_matrix(&model.kernel, data.x(), data.x())?,
            mean: mean_vector(&model.mean, data.x()),
        })
    }

    fn anchor_prior(&self, anchors: &[usize]) -> Result<AnchorPrior<T>> {
        let cov = self.gram.select(anchors, anchors);
        let chol = Cholesky::new(&cov).map_err(GpError::singular)?;
        let mean = anchors.iter().map(|&a| self.mean[a]).collect();
        Ok(AnchorPrior { mean, cov, chol })
    }

    fn prior_canonical(&self, prior: &AnchorPrior<T>) -> Result<CanonicalGaussian<T>> {
        let lambda = prior.chol.inverse();
        let r = prior.chol.solve(&prior.mean);
        CanonicalGaussian::from_parts(r, lambda)
    }

    /// `(K_i, K̃_i, y_i − m_i)` for one half.
    fn half(&self, idx: &[usize], anchors: &[usize]) -> (Matrix<T>, Matrix<T>, Vec<T>) {
        let mut k = self.gram.select(idx, idx);
        k.add_diagonal(self.model.kernel.noise_variance());
        let cross = self.gram.select(idx, anchors);
        let resid = idx.iter().map(|&i| self.y[i] - self.mean[i]).collect();
        (k, cross, resid)
    }

    /// `f̃ | X_i, y_i ~ N(m̃ + Bᵀ(y_i − m_i), K̃ − K̃_iᵀB)` with `B = K_i⁻¹K̃_i`.
    fn bayesian_posterior(&self, prior: &AnchorPrior<T>, idx: &[usize], anchors: &[usize]) -> Result<GaussianDist<T>> {
        let (k, cross, resid) = self.half(idx, anchors);
        let chol = Cholesky::new(&k).map_err(GpError::singular)?;
        let z = chol.solve_lower_mat(&cross);
        let w = chol.solve_lower(&resid);
        let s = vec_add(&prior.mean, &z.t_matvec(&w));
        let v = prior.cov.sub(&z.t_matmul(&z));
        let scale = prior.cov.trace() / T::from_usize_lossy(anchors.len());
        GaussianDist::with_jitter_scale(s, v, scale)
    }

    /// Normalized `f̃ ↦ N(A_iᵀf̃ | μ_i, Σ_i)` with `A_i = K̃⁻¹K̃_iᵀ`,
    /// `Σ_i = K_i − K̃_iA_i` and `μ_i = y_i − m_i + A_iᵀm̃`.
    fn maxent_posterior(&self, prior: &AnchorPrior<T>, idx: &[usize], anchors: &[usize]) -> Result<CanonicalGaussian<T>> {
        let (k, cross, resid) = self.half(idx, anchors);
        let w = prior.chol.solve_lower_mat(&cross.transpose());
        let a = prior.chol.solve_upper_mat(&w);
        let sigma = k.sub(&w.t_matmul(&w));
        let mu = vec_add(&resid, &a.t_matvec(&prior.mean));
        maxent_canonical(&a, &mu, &sigma)
    }

    fn bayesian(&self, part: &Partition) -> Result<BayesianAscTerms<T>> {
        let prior = self.anchor_prior(&part.anchor_idx)?;
        let p1 = self.bayesian_posterior(&prior, &part.idx1, &part.anchor_idx)?;
        let p2 = self.bayesian_posterior(&prior, &part.idx2, &part.anchor_idx)?;
        let factors = [p1.to_canonical()?, p2.to_canonical()?, self.prior_canonical(&prior)?];
        let pi = log_product_integral_canonical(&factors)?;
        Ok(BayesianAscTerms {
            s1: p1.mean().to_vec(),
            s2: p2.mean().to_vec(),
            v1: p1.cov().clone(),
            v2: p2.cov().clone(),
            s: pi.product.r().to_vec(),
            p: pi.product.lambda().clone(),
            log_eta: pi.log_integral,
        })
    }

    fn beta_noise(&self, part: &Partition) -> Result<BetaNoiseAscTerms<T>> {
        let prior = self.anchor_prior(&part.anchor_idx)?;
        let q1 = self.maxent_posterior(&prior, &part.idx1, &part.anchor_idx)?;
        let q2 = self.maxent_posterior(&prior, &part.idx2, &part.anchor_idx)?;
        let factors = [q1, q2, self.prior_canonical(&prior)?];
        let pi = log_product_integral_canonical(&factors)?;
        let [q1, q2, _] = factors;
        Ok(BetaNoiseAscTerms {
            r1: q1.r().to_vec(),
            r2: q2.r().to_vec(),
            lambda1: q1.lambda().clone(),
            lambda2: q2.lambda().clone(),
            r: pi.product.r().to_vec(),
            lambda: pi.product.lambda().clone(),
            log_eta: pi.log_integral,
        })
    }

    fn log_eta(&self, part: &Partition, variant: AscVariant) -> Result<T> {
        let v = match variant {
            AscVariant::Bayesian => self.bayesian(part)?.log_eta,
            AscVariant::BetaNoise => self.beta_noise(part)?.log_eta,
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(GpError::SingularCovariance { min_pivot: f64::NAN })
        }
    }
}

pub fn bayesian_terms<T: Real>(model: &GpModel<T>, data: &Dataset<T>, part: &Partition) -> Result<BayesianAscTerms<T>> {
    part.validate(data.len())?;
    Prepared::new(model, data)?.bayesian(part)
}

pub fn beta_noise_terms<T: Real>(model: &GpModel<T>, data: &Dataset<T>, part: &Partition) -> Result<BetaNoiseAscTerms<T>> {
    part.validate(data.len())?;
    Prepared::new(model, data)?.beta_noise(part)
}

/// Log posterior agreement of Bayesian ASC for one partition.
pub fn log_eta_bayesian<T: Real>(model: &GpModel<T>, data: &Dataset<T>, part: &Partition) -> Result<T> {
    part.validate(data.len())?;
    Prepared::new(model, data)?.log_eta(part, AscVariant::Bayesian)
}

/// Log posterior agreement of β-noise ASC (β = 1) for one partition.
pub fn log_eta_beta_noise<T: Real>(model: &GpModel<T>, data: &Dataset<T>, part: &Partition) -> Result<T> {
    part.validate(data.len())?;
    Prepared::new(model, data)?.log_eta(part, AscVariant::BetaNoise)
}

/// Log of the mean agreement over the partitions that evaluated, with failure counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscScore<T> {
    pub log_eta: T,
    pub evaluated: usize,
    pub failed: usize,
}

impl<T> AscScore<T> {
    pub fn failed_fraction(&self) -> f64 {
        self.failed as f64 / (self.evaluated + self.failed) as f64
    }
}

/// `log((1/J') Σ η_j)` over the `J'` partitions that evaluate.
///
/// Per-partition values are sorted before the log-sum-exp so the result does not
/// depend on evaluation order.
pub fn average_log_eta<T: Real>(
    model: &GpModel<T>,
    data: &Dataset<T>,
    parts: &[Partition],
    variant: AscVariant,
) -> Result<AscScore<T>> {
    if parts.is_empty() {
        return Err(GpError::InvalidConfig("no partitions to average".into()));
    }
    for p in parts {
        p.validate(data.len())?;
    }
    let prepared = Prepared::new(model, data)?;
    let results: Vec<Result<T>> = parts.par_iter().map(|p| prepared.log_eta(p, variant)).collect();
    let mut values: Vec<T> = results.into_iter().filter_map(Result::ok).collect();
    let failed = parts.len() - values.len();
    if values.is_empty() {
        return Err(GpError::AllPartitionsFailed(parts.len()));
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    Ok(AscScore { log_eta: log_mean_exp(&values), evaluated: values.len(), failed })
}

/// `log((1/n) Σ exp(vᵢ))`, stable for widely spread values.
pub fn log_mean_exp<T: Real>(values: &[T]) -> T {
    let max = values.iter().copied().fold(T::neg_infinity(), T::max);
    if !max.is_finite() {
        return max;
    }
    let sum: T = values.iter().map(|&v| (v - max).exp()).sum();
    max + sum.ln() - T::from_usize_lossy(values.len()).ln()
}
