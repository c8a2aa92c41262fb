//! Stationary covariance kernels and mean functions with log-space hyperparameters.
//!
//! Inputs are `D × P` matrices whose columns are points.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, GpError, Result};
use crate::linalg::Matrix;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum KernelStructure {
    #[serde(rename = "se")]
    SquaredExponential,
    #[serde(rename = "rq")]
    RationalQuadratic,
    #[serde(rename = "exp")]
    Exponential,
    #[serde(rename = "per")]
    Periodic,
}

impl KernelStructure {
    pub const ALL: [KernelStructure; 4] = [
        KernelStructure::SquaredExponential,
        KernelStructure::RationalQuadratic,
        KernelStructure::Exponential,
        KernelStructure::Periodic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelStructure::SquaredExponential => "se",
            KernelStructure::RationalQuadratic => "rq",
            KernelStructure::Exponential => "exp",
            KernelStructure::Periodic => "per",
        }
    }

    /// Names of the entries of `log_params`, in order.
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            KernelStructure::SquaredExponential | KernelStructure::Exponential => &["ell", "sf"],
            KernelStructure::RationalQuadratic => &["ell", "sf", "alpha"],
            KernelStructure::Periodic => &["ell", "period", "sf"],
        }
    }

    pub fn n_params(self) -> usize {
        self.param_names().len()
    }
}

impl fmt::Display for KernelStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for KernelStructure {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        KernelStructure::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| GpError::InvalidConfig(format!("unknown kernel `{s}` (expected se, rq, exp, per)")))
    }
}

/// Kernel structure plus hyperparameters, all stored as natural logarithms.
///
/// `log_params` holds `(ℓ, σ_f)` for se/exp, `(ℓ, σ_f, α)` for rq and `(ℓ, T, σ_f)`
/// for per. `log_noise` is `log σ_n`; `-∞` is accepted and means noise-free.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelSpec<T> {
    structure: KernelStructure,
    log_params: Vec<T>,
    log_noise: T,
}

impl<T: Real> KernelSpec<T> {
    pub fn new(structure: KernelStructure, log_params: Vec<T>, log_noise: T) -> Result<Self> {
        if log_params.len() != structure.n_params() {
            return Err(GpError::InvalidConfig(format!(
                "kernel {structure} takes {} hyperparameters, got {}",
                structure.n_params(),
                log_params.len()
            )));
        }
        for (name, &p) in structure.param_names().iter().zip(&log_params) {
            let v = p.exp();
            if !(v.is_finite() && v > T::zero()) {
                return Err(GpError::InvalidConfig(format!("hyperparameter {name} = exp({p}) is not positive finite")));
            }
        }
        if log_noise.is_nan() || log_noise == T::infinity() {
            return Err(GpError::InvalidConfig(format!("log noise {log_noise} is invalid")));
        }
        Ok(Self { structure, log_params, log_noise })
    }

    /// Builds a spec from natural-scale values (`log_params` order, then σ_n).
    pub fn from_natural(structure: KernelStructure, params: &[T], noise_std: T) -> Result<Self> {
        for &p in params.iter().chain(std::iter::once(&noise_std)) {
            if !(p >= T::zero()) || !p.is_finite() {
                return Err(GpError::InvalidConfig(format!("hyperparameter {p} must be positive and finite")));
            }
        }
        Self::new(structure, params.iter().map(|p| p.ln()).collect(), noise_std.ln())
    }

    pub fn squared_exponential(ell: T, sf: T, sn: T) -> Result<Self> {
        Self::from_natural(KernelStructure::SquaredExponential, &[ell, sf], sn)
    }

    pub fn rational_quadratic(ell: T, sf: T, alpha: T, sn: T) -> Result<Self> {
        Self::from_natural(KernelStructure::RationalQuadratic, &[ell, sf, alpha], sn)
    }

    pub fn exponential(ell: T, sf: T, sn: T) -> Result<Self> {
        Self::from_natural(KernelStructure::Exponential, &[ell, sf], sn)
    }

    pub fn periodic(ell: T, period: T, sf: T, sn: T) -> Result<Self> {
        Self::from_natural(KernelStructure::Periodic, &[ell, period, sf], sn)
    }

    /// Unit-scale starting point: all log-hyperparameters zero.
    pub fn unit(structure: KernelStructure) -> Self {
        Self::new(structure, vec![T::zero(); structure.n_params()], T::zero()).expect("zeros are valid")
    }

    pub fn structure(&self) -> KernelStructure {
        self.structure
    }

    pub fn log_params(&self) -> &[T] {
        &self.log_params
    }

    pub fn log_noise(&self) -> T {
        self.log_noise
    }

    /// Optimizer vector: `log_params` followed by `log σ_n`.
    pub fn theta(&self) -> Vec<T> {
        let mut t = self.log_params.clone();
        t.push(self.log_noise);
        t
    }

    pub fn n_theta(&self) -> usize {
        self.structure.n_params() + 1
    }

    pub fn with_theta(&self, theta: &[T]) -> Result<Self> {
        check_dim("hyperparameter vector", self.n_theta(), theta.len())?;
        let (params, noise) = theta.split_at(theta.len() - 1);
        Self::new(self.structure, params.to_vec(), noise[0])
    }

    fn natural(&self, idx: usize) -> T {
        self.log_params[idx].exp()
    }

    pub fn lengthscale(&self) -> T {
        self.natural(0)
    }

    pub fn signal_std(&self) -> T {
        match self.structure {
            KernelStructure::Periodic => self.natural(2),
            _ => self.natural(1),
        }
    }

    pub fn alpha(&self) -> Option<T> {
        (self.structure == KernelStructure::RationalQuadratic).then(|| self.natural(2))
    }

    pub fn period(&self) -> Option<T> {
        (self.structure == KernelStructure::Periodic).then(|| self.natural(1))
    }

    pub fn noise_std(&self) -> T {
        self.log_noise.exp()
    }

    pub fn noise_variance(&self) -> T {
        (self.log_noise + self.log_noise).exp()
    }

    /// `k(x, x)`, the same at every input for these stationary kernels.
    pub fn prior_variance(&self) -> T {
        self.signal_std().powi(2)
    }

    /// Kernel value as a function of the squared distance between two inputs.
    #[inline]
    pub fn eval_sqdist(&self, r2: T) -> T {
        self.evaluator().eval_sqdist(r2)
    }

    fn evaluator(&self) -> KernelEval<T> {
        let sf2 = (self.log_signal() + self.log_signal()).exp();
        let ell = self.lengthscale();
        let two = T::lit(2.0);
        match self.structure {
            KernelStructure::SquaredExponential => KernelEval::Se { sf2, coef: -T::lit(0.5) / (ell * ell) },
            KernelStructure::RationalQuadratic => {
                let alpha = self.natural(2);
                KernelEval::Rq { sf2, coef: T::one() / (two * alpha * ell * ell), alpha }
            }
            KernelStructure::Exponential => KernelEval::Exp { sf2, inv_ell: T::one() / ell },
            KernelStructure::Periodic => KernelEval::Per {
                sf2,
                freq: T::PI() / self.natural(1),
                coef: -two / (ell * ell),
            },
        }
    }

    fn log_signal(&self) -> T {
        match self.structure {
            KernelStructure::Periodic => self.log_params[2],
            _ => self.log_params[1],
        }
    }

    pub fn eval(&self, a: &[T], b: &[T]) -> T {
        self.eval_sqdist(sqdist(a, b))
    }
}

/// Hyperparameter-derived constants, computed once per kernel matrix.
#[derive(Clone, Copy)]
enum KernelEval<T> {
    Se { sf2: T, coef: T },
    Rq { sf2: T, coef: T, alpha: T },
    Exp { sf2: T, inv_ell: T },
    Per { sf2: T, freq: T, coef: T },
}

impl<T: Real> KernelEval<T> {
    #[inline]
    fn eval_sqdist(self, r2: T) -> T {
        match self {
            KernelEval::Se { sf2, coef } => sf2 * (coef * r2).exp(),
            KernelEval::Rq { sf2, coef, alpha } => sf2 * (T::one() + coef * r2).powf(-alpha),
            KernelEval::Exp { sf2, inv_ell } => sf2 * (-r2.max(T::zero()).sqrt() * inv_ell).exp(),
            KernelEval::Per { sf2, freq, coef } => {
                let s = (freq * r2.max(T::zero()).sqrt()).sin();
                sf2 * (coef * s * s).exp()
            }
        }
    }
}

#[inline]
fn sqdist<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| {
        let d = x - y;
        acc + d * d
    })
}

/// `P × Q` matrix of `k(x_p, x_q)` between the columns of `xa` and `xb`.
pub fn kernel_matrix<T: Real>(spec: &KernelSpec<T>, xa: &Matrix<T>, xb: &Matrix<T>) -> Result<Matrix<T>> {
    check_dim("kernel input dimension", xa.nrows(), xb.nrows())?;
    let pa = xa.transpose();
    let pb = xb.transpose();
    let k = spec.evaluator();
    Ok(Matrix::from_fn(pa.nrows(), pb.nrows(), |p, q| k.eval_sqdist(sqdist(pa.row(p), pb.row(q)))))
}

/// `k(X, X) + σ_n² I`.
pub fn noisy_kernel_matrix<T: Real>(spec: &KernelSpec<T>, x: &Matrix<T>) -> Matrix<T> {
    let mut k = kernel_matrix(spec, x, x).expect("same input matrix");
    k.add_diagonal(spec.noise_variance());
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MeanKind {
    #[default]
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MeanSpec {
    pub kind: MeanKind,
}

impl MeanSpec {
    pub const ZERO: MeanSpec = MeanSpec { kind: MeanKind::Zero };
}

pub fn mean_vector<T: Real>(spec: &MeanSpec, x: &Matrix<T>) -> Vec<T> {
    match spec.kind {
        MeanKind::Zero => vec![T::zero(); x.ncols()],
    }
}
