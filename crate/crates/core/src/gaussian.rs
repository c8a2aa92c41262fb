//! Multivariate Gaussian algebra: densities, block conditioning, and the
//! closed-form Gaussian integrals the posterior-agreement criteria are built on.
//!
//! All integral results are returned as logarithms. Densities are never
//! multiplied in linear space.

use crate::error::{check_dim, GpError, Result};
use crate::linalg::{dot, vec_add, vec_sub, Cholesky, Matrix};
use crate::scalar::Real;

/// `N(mean, cov)` with a cached lower-triangular factor of `cov`.
///
/// The stored covariance is the symmetrized input plus whatever diagonal jitter
/// the factorization needed, so `chol · cholᵀ` always reproduces `cov`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianDist<T> {
    mean: Vec<T>,
    cov: Matrix<T>,
    chol: Cholesky<T>,
}

impl<T: Real> GaussianDist<T> {
    pub fn new(mean: Vec<T>, cov: Matrix<T>) -> Result<Self> {
        let n = cov.nrows().max(1);
        let scale = cov.trace() / T::from_usize_lossy(n);
        Self::with_jitter_scale(mean, cov, scale)
    }

    /// Builds the distribution, sizing any needed jitter from `scale` instead of
    /// the trace of `cov`.
    pub fn with_jitter_scale(mean: Vec<T>, cov: Matrix<T>, scale: T) -> Result<Self> {
        check_dim("covariance rows", mean.len(), cov.nrows())?;
        check_dim("covariance columns", mean.len(), cov.ncols())?;
        let chol = Cholesky::with_jitter_scale(&cov, scale).map_err(GpError::singular)?;
        let mut cov = cov.symmetrized();
        cov.add_diagonal(chol.jitter());
        Ok(Self { mean, cov, chol })
    }

    pub fn standard(n: usize) -> Self {
        Self::new(vec![T::zero(); n], Matrix::identity(n)).expect("identity is SPD")
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix<T> {
        &self.cov
    }

    pub fn chol(&self) -> &Cholesky<T> {
        &self.chol
    }

    /// Marginal variances (diagonal of the covariance).
    pub fn variances(&self) -> Vec<T> {
        self.cov.diagonal()
    }

    /// `log N(x | mean, cov)`.
    pub fn log_density(&self, x: &[T]) -> Result<T> {
        check_dim("log_density point", self.dim(), x.len())?;
        Ok(log_normal_at(&self.chol, &vec_sub(x, &self.mean)))
    }

    /// Interprets the distribution in canonical (information) form.
    ///
    /// Fails only when the inverted covariance is too ill-conditioned to factor.
    pub fn to_canonical(&self) -> Result<CanonicalGaussian<T>> {
        let lambda = self.chol.inverse();
        let r = self.chol.solve(&self.mean);
        CanonicalGaussian::from_parts(r, lambda)
    }
}

/// `log N(diff | 0, Σ)` given the factor of Σ.
fn log_normal_at<T: Real>(chol: &Cholesky<T>, diff: &[T]) -> T {
    let n = T::from_usize_lossy(diff.len());
    let z = chol.solve_lower(diff);
    let half = T::lit(0.5);
    -half * dot(&z, &z) - half * chol.log_det() - half * n * T::ln_two_pi()
}

/// Gaussian `N(Λ⁻¹r, Λ⁻¹)` stored by its precision `Λ` and shift `r`.
///
/// Precision sums are how product integrals combine, so keeping factors in this
/// form avoids inverting a covariance only to invert it back.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalGaussian<T> {
    r: Vec<T>,
    lambda: Matrix<T>,
    chol: Cholesky<T>,
}

impl<T: Real> CanonicalGaussian<T> {
    pub fn from_parts(r: Vec<T>, lambda: Matrix<T>) -> Result<Self> {
        check_dim("precision rows", r.len(), lambda.nrows())?;
        check_dim("precision columns", r.len(), lambda.ncols())?;
        let chol = Cholesky::new(&lambda).map_err(GpError::singular)?;
        let mut lambda = lambda.symmetrized();
        lambda.add_diagonal(chol.jitter());
        Ok(Self { r, lambda, chol })
    }

    fn from_factor(r: Vec<T>, lambda: Matrix<T>, chol: Cholesky<T>) -> Self {
        let mut lambda = lambda.symmetrized();
        lambda.add_diagonal(chol.jitter());
        Self { r, lambda, chol }
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn r(&self) -> &[T] {
        &self.r
    }

    pub fn lambda(&self) -> &Matrix<T> {
        &self.lambda
    }

    /// `Λ⁻¹ r`.
    pub fn mean(&self) -> Vec<T> {
        self.chol.solve(&self.r)
    }

    /// `log N(Λ⁻¹r | 0, Λ⁻¹) = −½ rᵀΛ⁻¹r + ½ log|Λ| − (n/2) log 2π`.
    fn log_normalizer_at_mean(&self) -> T {
        let half = T::lit(0.5);
        let z = self.chol.solve_lower(&self.r);
        let n = T::from_usize_lossy(self.dim());
        -half * dot(&z, &z) + half * self.chol.log_det() - half * n * T::ln_two_pi()
    }

    pub fn to_moment(&self) -> Result<GaussianDist<T>> {
        GaussianDist::new(self.mean(), self.chol.inverse())
    }
}

/// Joint Gaussian over a stacked vector `[top; bottom]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointGaussian<T> {
    pub mean_top: Vec<T>,
    pub mean_bottom: Vec<T>,
    pub cov_tt: Matrix<T>,
    pub cov_bb: Matrix<T>,
    /// Cross block `Cov(bottom, top)`, shape `n × m`.
    pub cov_bt: Matrix<T>,
}

impl<T: Real> JointGaussian<T> {
    pub fn new(
        mean_top: Vec<T>,
        mean_bottom: Vec<T>,
        cov_tt: Matrix<T>,
        cov_bb: Matrix<T>,
        cov_bt: Matrix<T>,
    ) -> Result<Self> {
        let (m, n) = (mean_top.len(), mean_bottom.len());
        check_dim("top covariance rows", m, cov_tt.nrows())?;
        check_dim("top covariance columns", m, cov_tt.ncols())?;
        check_dim("bottom covariance rows", n, cov_bb.nrows())?;
        check_dim("bottom covariance columns", n, cov_bb.ncols())?;
        check_dim("cross block rows", n, cov_bt.nrows())?;
        check_dim("cross block columns", m, cov_bt.ncols())?;
        Ok(Self { mean_top, mean_bottom, cov_tt, cov_bb, cov_bt })
    }

    pub fn top_dim(&self) -> usize {
        self.mean_top.len()
    }

    pub fn bottom_dim(&self) -> usize {
        self.mean_bottom.len()
    }

    /// Full `(m+n)`-dimensional mean and covariance.
    pub fn assemble(&self) -> (Vec<T>, Matrix<T>) {
        let m = self.top_dim();
        let n = self.bottom_dim();
        let mut mean = self.mean_top.clone();
        mean.extend_from_slice(&self.mean_bottom);
        let cov = Matrix::from_fn(m + n, m + n, |r, c| match (r < m, c < m) {
            (true, true) => self.cov_tt[(r, c)],
            (false, false) => self.cov_bb[(r - m, c - m)],
            (false, true) => self.cov_bt[(r - m, c)],
            (true, false) => self.cov_bt[(c - m, r)],
        });
        (mean, cov)
    }

    pub fn to_gaussian(&self) -> Result<GaussianDist<T>> {
        let (mean, cov) = self.assemble();
        GaussianDist::new(mean, cov)
    }

    pub fn top_marginal(&self) -> Result<GaussianDist<T>> {
        GaussianDist::new(self.mean_top.clone(), self.cov_tt.clone())
    }

    pub fn bottom_marginal(&self) -> Result<GaussianDist<T>> {
        GaussianDist::new(self.mean_bottom.clone(), self.cov_bb.clone())
    }

    /// Same joint with the roles of the two blocks exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            mean_top: self.mean_bottom.clone(),
            mean_bottom: self.mean_top.clone(),
            cov_tt: self.cov_bb.clone(),
            cov_bb: self.cov_tt.clone(),
            cov_bt: self.cov_bt.transpose(),
        }
    }
}

/// Distribution of the top block given the bottom block is observed.
///
/// `mean_top + Cᵀ B⁻¹ (u − mean_bottom)` and `cov_tt − Cᵀ B⁻¹ C`, with `B = cov_bb`
/// and `C = cov_bt`.
pub fn condition<T: Real>(j: &JointGaussian<T>, observed_bottom: &[T]) -> Result<GaussianDist<T>> {
    check_dim("observed block", j.bottom_dim(), observed_bottom.len())?;
    let chol = Cholesky::new(&j.cov_bb).map_err(GpError::singular)?;
    let z = chol.solve_lower_mat(&j.cov_bt);
    let w = chol.solve_lower(&vec_sub(observed_bottom, &j.mean_bottom));
    let mean = vec_add(&j.mean_top, &z.t_matvec(&w));
    let cov = j.cov_tt.sub(&z.t_matmul(&z));
    let m = j.top_dim().max(1);
    let scale = j.cov_tt.trace() / T::from_usize_lossy(m);
    GaussianDist::with_jitter_scale(mean, cov, scale)
}

/// `log ∫ exp(xᵀ(μ − ½Λx)) dx = −log|Λ| − log N(μ | 0, Λ)`, with `Λ` placed in
/// the covariance slot of the density.
pub fn log_gaussian_quadratic_integral<T: Real>(mu: &[T], lambda: &Matrix<T>) -> Result<T> {
    check_dim("quadratic integral precision", mu.len(), lambda.nrows())?;
    let chol = Cholesky::new(lambda).map_err(GpError::singular)?;
    Ok(quadratic_integral_from_factor(&chol, mu))
}

fn quadratic_integral_from_factor<T: Real>(chol: &Cholesky<T>, mu: &[T]) -> T {
    -chol.log_det() - log_normal_at(chol, mu)
}

/// Result of multiplying Gaussian factors: the log integral of the product and
/// the normalized product `N(Λ⁻¹r, Λ⁻¹)` in canonical form.
#[derive(Debug, Clone)]
pub struct ProductIntegral<T> {
    pub log_integral: T,
    pub product: CanonicalGaussian<T>,
}

/// `log ∫ ∏ₖ N(x | μₖ, Σₖ) dx` together with the Gaussian the normalized product defines.
pub fn log_product_integral<T: Real>(
    components: &[GaussianDist<T>],
) -> Result<(T, GaussianDist<T>)> {
    let canon = components.iter().map(GaussianDist::to_canonical).collect::<Result<Vec<_>>>()?;
    let pi = log_product_integral_canonical(&canon)?;
    let dist = pi.product.to_moment()?;
    Ok((pi.log_integral, dist))
}

/// Canonical-form version of [`log_product_integral`]. Each factor contributes
/// `Σₖ⁻¹μₖ` and `Σₖ⁻¹` directly; the normalizing constants `N(μₖ | 0, Σₖ)` come from
/// the factor's own precision.
pub fn log_product_integral_canonical<T: Real>(
    components: &[CanonicalGaussian<T>],
) -> Result<ProductIntegral<T>> {
    let first = components
        .first()
        .ok_or_else(|| GpError::InvalidConfig("product integral over an empty list".into()))?;
    let n = first.dim();
    let mut r = vec![T::zero(); n];
    let mut lambda = Matrix::zeros(n, n);
    let mut log_gamma = T::zero();
    for c in components {
        check_dim("product integral component", n, c.dim())?;
        r = vec_add(&r, &c.r);
        lambda = lambda.add(&c.lambda);
        log_gamma = log_gamma + c.log_normalizer_at_mean();
    }
    let chol = Cholesky::new(&lambda).map_err(GpError::singular)?;
    let log_integral = log_gamma + quadratic_integral_from_factor(&chol, &r);
    let product = CanonicalGaussian::from_factor(r, lambda, chol);
    Ok(ProductIntegral { log_integral, product })
}

/// Normalizes `x ↦ N(Aᵀx | μ, Σ)` into a density over `x`, where `A` is `m × n`
/// with full row rank: the result is `N(Λ⁻¹r, Λ⁻¹)` with `r = AΣ⁻¹μ`, `Λ = AΣ⁻¹Aᵀ`.
pub fn maxent_linear_map_posterior<T: Real>(
    a: &Matrix<T>,
    mu: &[T],
    sigma: &Matrix<T>,
) -> Result<GaussianDist<T>> {
    maxent_canonical(a, mu, sigma)?.to_moment()
}

pub fn maxent_canonical<T: Real>(
    a: &Matrix<T>,
    mu: &[T],
    sigma: &Matrix<T>,
) -> Result<CanonicalGaussian<T>> {
    let (m, n) = (a.nrows(), a.ncols());
    check_dim("linear map columns", n, mu.len())?;
    check_dim("noise covariance rows", n, sigma.nrows())?;
    check_dim("noise covariance columns", n, sigma.ncols())?;
    let chol_sigma = Cholesky::new(sigma).map_err(GpError::singular)?;
    let w = chol_sigma.solve_lower_mat(&a.transpose());
    let lambda = w.t_matmul(&w);
    let r = w.t_matvec(&chol_sigma.solve_lower(mu));
    let rel_tol = T::epsilon() * T::from_usize_lossy(4 * m.max(n));
    let chol = Cholesky::strict(&lambda, rel_tol)
        .map_err(|f| GpError::RankDeficient { min_pivot: f.min_pivot })?;
    Ok(CanonicalGaussian::from_factor(r, lambda, chol))
}
