//! GP regression: the latent/output joint, predictive distributions, and the
//! evidence and leave-one-out selection objectives.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, GpError, Result};
use crate::gaussian::{GaussianDist, JointGaussian};
use crate::kernels::{kernel_matrix, mean_vector, noisy_kernel_matrix, KernelSpec, MeanSpec};
use crate::linalg::{vec_add, vec_sub, Cholesky, Matrix};
use crate::scalar::Real;

/// Affine map applied to raw inputs: `standardized = (raw − shift) / scale`, per dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputTransform<T> {
    pub shift: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Real> InputTransform<T> {
    pub fn apply(&self, raw: &Matrix<T>) -> Matrix<T> {
        Matrix::from_fn(raw.nrows(), raw.ncols(), |d, i| (raw[(d, i)] - self.shift[d]) / self.scale[d])
    }

    pub fn invert(&self, standardized: &Matrix<T>) -> Matrix<T> {
        Matrix::from_fn(standardized.nrows(), standardized.ncols(), |d, i| {
            standardized[(d, i)] * self.scale[d] + self.shift[d]
        })
    }
}

/// Inputs `X` (`D × N`, one column per point) with outputs `y` (`N`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    x: Matrix<T>,
    y: Vec<T>,
    input_transform: Option<InputTransform<T>>,
}

impl<T: Real> Dataset<T> {
    pub fn new(x: Matrix<T>, y: Vec<T>) -> Result<Self> {
        check_dim("dataset outputs", x.ncols(), y.len())?;
        if !x.is_finite() || y.iter().any(|v| !v.is_finite()) {
            return Err(GpError::InvalidConfig("dataset contains non-finite values".into()));
        }
        Ok(Self { x, y, input_transform: None })
    }

    /// One-dimensional inputs.
    pub fn from_1d(xs: &[T], ys: &[T]) -> Result<Self> {
        Self::new(Matrix::row_vector(xs), ys.to_vec())
    }

    pub fn with_input_transform(mut self, t: InputTransform<T>) -> Self {
        self.input_transform = Some(t);
        self
    }

    pub fn input_transform(&self) -> Option<&InputTransform<T>> {
        self.input_transform.as_ref()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn x(&self) -> &Matrix<T> {
        &self.x
    }

    pub fn y(&self) -> &[T] {
        &self.y
    }

    /// Points at the given indices, in that order. The transform metadata is kept.
    pub fn subset(&self, idx: &[usize]) -> Self {
        Self {
            x: self.x.select_columns(idx),
            y: idx.iter().map(|&i| self.y[i]).collect(),
            input_transform: self.input_transform.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GpModel<T> {
    pub mean: MeanSpec,
    pub kernel: KernelSpec<T>,
}

impl<T: Real> GpModel<T> {
    /// Zero-mean GP with the given kernel.
    pub fn new(kernel: KernelSpec<T>) -> Self {
        Self { mean: MeanSpec::ZERO, kernel }
    }

    pub fn with_kernel(&self, kernel: KernelSpec<T>) -> Self {
        Self { mean: self.mean, kernel }
    }
}

/// Joint of the noise-free latents at `anchors` (top) and the noisy outputs of
/// `data` (bottom).
pub fn joint_latent_output<T: Real>(model: &GpModel<T>, anchors: &Matrix<T>, data: &Dataset<T>) -> Result<JointGaussian<T>> {
    let k_anchor = kernel_matrix(&model.kernel, anchors, anchors)?;
    Cholesky::new(&k_anchor).map_err(GpError::singular)?;
    let cross = kernel_matrix(&model.kernel, data.x(), anchors)?;
    JointGaussian::new(
        mean_vector(&model.mean, anchors),
        mean_vector(&model.mean, data.x()),
        k_anchor,
        noisy_kernel_matrix(&model.kernel, data.x()),
        cross,
    )
}

/// Prior distribution of the outputs, `N(m(X), k(X,X) + σ_n² I)`.
pub fn output_prior<T: Real>(model: &GpModel<T>, data: &Dataset<T>) -> Result<GaussianDist<T>> {
    GaussianDist::new(mean_vector(&model.mean, data.x()), noisy_kernel_matrix(&model.kernel, data.x()))
}

/// `log p(y | X)`.
pub fn log_evidence<T: Real>(model: &GpModel<T>, data: &Dataset<T>) -> Result<T> {
    if data.is_empty() {
        return Err(GpError::InsufficientData { found: 0, required: 1 });
    }
    output_prior(model, data)?.log_density(data.y())
}

/// Held-out log predictive density of every point given all the others.
///
/// Uses the inverse of the output covariance `C`: the fold-`i` predictive has
/// variance `1 / C⁻¹ᵢᵢ` and mean `yᵢ − [C⁻¹(y − m)]ᵢ / C⁻¹ᵢᵢ`.
pub fn loo_log_predictive<T: Real>(model: &GpModel<T>, data: &Dataset<T>) -> Result<Vec<T>> {
    let n = data.len();
    if n < 2 {
        return Err(GpError::InsufficientData { found: n, required: 2 });
    }
    let prior = output_prior(model, data)?;
    let inv = prior.chol().inverse();
    let resid = vec_sub(data.y(), prior.mean());
    let alpha = prior.chol().solve(&resid);
    let half = T::lit(0.5);
    Ok((0..n)
        .map(|i| {
            let prec = inv[(i, i)];
            let err = alpha[i] / prec;
            half * prec.ln() - half * T::ln_two_pi() - half * err * err * prec
        })
        .collect())
}

/// `−(1/N) Σᵢ log p(yᵢ | X, y₋ᵢ)`; lower is better.
pub fn loo_cv_objective<T: Real>(model: &GpModel<T>, data: &Dataset<T>) -> Result<T> {
    let folds = loo_log_predictive(model, data)?;
    let n = T::from_usize_lossy(folds.len());
    Ok(-folds.into_iter().sum::<T>() / n)
}

/// Predictive distribution of the noisy outputs at the columns of `xstar`.
pub fn predict<T: Real>(model: &GpModel<T>, train: &Dataset<T>, xstar: &Matrix<T>) -> Result<GaussianDist<T>> {
    if xstar.ncols() == 0 {
        return Err(GpError::InsufficientData { found: 0, required: 1 });
    }
    let k = &model.kernel;
    let chol = Cholesky::new(&noisy_kernel_matrix(k, train.x())).map_err(GpError::singular)?;
    let cross = kernel_matrix(k, train.x(), xstar)?;
    let z = chol.solve_lower_mat(&cross);
    let resid = vec_sub(train.y(), &mean_vector(&model.mean, train.x()));
    let w = chol.solve_lower(&resid);
    let mean = vec_add(&mean_vector(&model.mean, xstar), &z.t_matvec(&w));
    let mut prior = kernel_matrix(k, xstar, xstar)?;
    prior.add_diagonal(k.noise_variance());
    let scale = prior.trace() / T::from_usize_lossy(xstar.ncols());
    let cov = prior.sub(&z.t_matmul(&z));
    GaussianDist::with_jitter_scale(mean, cov, scale)
}

/// Mean standardized log loss of a predictive over test outputs, relative to the
/// trivial Gaussian fitted to the training outputs. Uses marginal variances.
pub fn msll<T: Real>(predictive: &GaussianDist<T>, y_test: &[T], train_y: &[T]) -> Result<T> {
    check_dim("test outputs", predictive.dim(), y_test.len())?;
    if train_y.is_empty() || y_test.is_empty() {
        return Err(GpError::DegenerateBaseline);
    }
    let n_train = T::from_usize_lossy(train_y.len());
    let mu0 = train_y.iter().copied().sum::<T>() / n_train;
    let var0 = train_y.iter().map(|&v| (v - mu0) * (v - mu0)).sum::<T>() / n_train;
    if !(var0 > T::zero()) {
        return Err(GpError::DegenerateBaseline);
    }
    let vars = predictive.variances();
    let total: T = y_test
        .iter()
        .zip(predictive.mean())
        .zip(&vars)
        .map(|((&y, &mu), &var)| log_normal_1d(y, mu0, var0) - log_normal_1d(y, mu, var))
        .sum();
    Ok(total / T::from_usize_lossy(y_test.len()))
}

/// MSLL of the trivial predictor itself, i.e. exactly zero loss by construction.
pub fn trivial_predictive<T: Real>(train_y: &[T], n_test: usize) -> Result<GaussianDist<T>> {
    if train_y.is_empty() {
        return Err(GpError::DegenerateBaseline);
    }
    let n = T::from_usize_lossy(train_y.len());
    let mu0 = train_y.iter().copied().sum::<T>() / n;
    let var0 = train_y.iter().map(|&v| (v - mu0) * (v - mu0)).sum::<T>() / n;
    if !(var0 > T::zero()) {
        return Err(GpError::DegenerateBaseline);
    }
    GaussianDist::new(vec![mu0; n_test], Matrix::identity(n_test).scale(var0))
}

#[inline]
fn log_normal_1d<T: Real>(x: T, mu: T, var: T) -> T {
    let half = T::lit(0.5);
    -half * (T::ln_two_pi() + var.ln()) - half * (x - mu) * (x - mu) / var
}
