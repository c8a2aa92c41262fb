//! Test oracles shared by the integration suites: explicit-inverse Gaussian
//! densities (nalgebra), log-space quadrature in one and two dimensions, and
//! random instance generators.

#![allow(dead_code)]

use gpasc::kernels::KernelStructure;
use gpasc::{Dataset, KernelSpec, Matrix, Partition};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)])
}

/// Gaussian density with an explicitly inverted covariance.
#[derive(Clone)]
pub struct NaGaussian {
    pub mean: DVector<f64>,
    pub inv: DMatrix<f64>,
    log_norm: f64,
}

impl NaGaussian {
    pub fn new(mean: &[f64], cov: &DMatrix<f64>) -> Self {
        let n = mean.len();
        let det = cov.clone().lu().determinant();
        assert!(det > 0.0, "covariance must be positive definite (det = {det})");
        let inv = cov.clone().try_inverse().expect("invertible covariance");
        let log_norm = -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + det.ln());
        Self { mean: DVector::from_column_slice(mean), inv, log_norm }
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let d = DVector::from_column_slice(x) - &self.mean;
        self.log_norm - 0.5 * d.dot(&(&self.inv * &d))
    }
}

pub fn na_log_normal(x: &[f64], mean: &[f64], cov: &DMatrix<f64>) -> f64 {
    NaGaussian::new(mean, cov).log_pdf(x)
}

pub fn rel_err(approx: f64, exact: f64) -> f64 {
    (approx - exact).abs() / exact.abs()
}

/// Relative error of `exp(log_a)` against `exp(log_b)`.
pub fn rel_err_from_logs(log_a: f64, log_b: f64) -> f64 {
    (log_a - log_b).exp_m1().abs()
}

// ---------------------------------------------------------------------------
// Quadrature

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

fn gk15(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let d = h * XGK[j];
        let s = f(c - d) + f(c + d);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Adaptive Gauss–Kronrod (7/15) on `[a, b]` to absolute tolerance `tol`,
/// bisecting the interval with the largest error estimate.
pub fn adaptive_gk(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    assert!(a.is_finite() && b.is_finite() && a < b, "bad quadrature interval [{a}, {b}]");
    let (v, e) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    for _ in 0..5000 {
        let total_err: f64 = intervals.iter().map(|iv| iv.3).sum();
        assert!(total_err.is_finite(), "non-finite quadrature error estimate");
        if total_err <= tol {
            break;
        }
        let worst = (0..intervals.len()).max_by(|&i, &j| intervals[i].3.total_cmp(&intervals[j].3)).unwrap();
        let (lo, hi, _, _) = intervals.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    intervals.iter().map(|iv| iv.2).sum()
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pn1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Mode and negative Hessian of a log-concave `logf`, by Newton iterations with
/// central finite differences.
pub fn locate_mode(logf: &impl Fn(&[f64]) -> f64, start: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let n = start.len();
    let mut x = start.to_vec();
    let mut h = vec![1e-2; n];
    let mut hess = DMatrix::zeros(n, n);
    for _ in 0..30 {
        let f0 = logf(&x);
        let mut g = DVector::zeros(n);
        for i in 0..n {
            let mut p = x.clone();
            p[i] += h[i];
            let fp = logf(&p);
            p[i] -= 2.0 * h[i];
            let fm = logf(&p);
            g[i] = (fp - fm) / (2.0 * h[i]);
            hess[(i, i)] = -(fp - 2.0 * f0 + fm) / (h[i] * h[i]);
            for j in 0..i {
                let mut q = x.clone();
                let mut eval = |si: f64, sj: f64| {
                    q.clone_from(&x);
                    q[i] += si * h[i];
                    q[j] += sj * h[j];
                    logf(&q)
                };
                let v = -(eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h[i] * h[j]);
                hess[(i, j)] = v;
                hess[(j, i)] = v;
            }
        }
        let step = hess.clone().lu().solve(&g).expect("non-singular Hessian");
        for i in 0..n {
            x[i] += step[i];
        }
        let cov = hess.clone().try_inverse().expect("invertible Hessian");
        let new_h: Vec<f64> = (0..n).map(|i| 1e-2 * cov[(i, i)].abs().sqrt()).collect();
        let done = (0..n).all(|i| step[i].abs() < 1e-10 * new_h[i] / 1e-2);
        h = new_h;
        if done {
            break;
        }
    }
    (x, hess)
}

/// `log ∫ exp(logf(x)) dx` in one dimension by adaptive Gauss–Kronrod over
/// `mode ± 12σ`, with the integrand rescaled by its peak.
pub fn log_integrate_1d(logf: impl Fn(f64) -> f64, start: f64) -> f64 {
    let (mode, hess) = locate_mode(&|x: &[f64]| logf(x[0]), &[start]);
    let (c, sd) = (mode[0], 1.0 / hess[(0, 0)].sqrt());
    let peak = logf(c);
    let v = adaptive_gk(|x| (logf(x) - peak).exp(), c - 12.0 * sd, c + 12.0 * sd, 1e-14 * sd);
    peak + v.ln()
}

/// `log ∫ exp(logf(x)) dx` in two dimensions on a tensor Gauss–Legendre grid
/// covering ±8σ along the principal axes of the integrand's Laplace fit.
pub fn log_integrate_2d(logf: impl Fn(&[f64]) -> f64, start: &[f64]) -> f64 {
    let (mode, hess) = locate_mode(&logf, start);
    let cov = hess.try_inverse().expect("invertible Hessian");
    let l = cov.clone().cholesky().expect("positive-definite Laplace covariance").l();
    let jac = l[(0, 0)] * l[(1, 1)];
    let peak = logf(&mode);
    let (gx, gw) = gauss_legendre(10);
    let panels = 16;
    let width = 16.0 / panels as f64;
    let mut nodes = Vec::with_capacity(panels * gx.len());
    for p in 0..panels {
        let a = -8.0 + p as f64 * width;
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push((a + 0.5 * width * (x + 1.0), 0.5 * width * w));
        }
    }
    let mut total = 0.0;
    for &(u, wu) in &nodes {
        for &(v, wv) in &nodes {
            let z = [mode[0] + l[(0, 0)] * u, mode[1] + l[(1, 0)] * u + l[(1, 1)] * v];
            total += wu * wv * (logf(&z) - peak).exp();
        }
    }
    peak + (total * jac).ln()
}

/// Dispatches on dimension (1 or 2).
pub fn log_integrate(logf: impl Fn(&[f64]) -> f64, start: &[f64]) -> f64 {
    match start.len() {
        1 => log_integrate_1d(|x| logf(&[x]), start[0]),
        2 => log_integrate_2d(logf, start),
        d => panic!("quadrature oracle supports 1 or 2 dimensions, got {d}"),
    }
}

// ---------------------------------------------------------------------------
// Random instances

pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    &a * a.transpose() + DMatrix::identity(n, n) * rng.random_range(0.2..1.0)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Any structure for 1-D inputs; the periodic kernel is excluded for `dim > 1`,
/// where it is not positive semi-definite under the Euclidean distance.
pub fn random_kernel(rng: &mut ChaCha8Rng, dim: usize) -> KernelSpec {
    let choices = if dim == 1 { 4 } else { 3 };
    let s = [KernelStructure::SquaredExponential, KernelStructure::RationalQuadratic, KernelStructure::Exponential, KernelStructure::Periodic]
        [rng.random_range(0..choices)];
    random_kernel_of(rng, s)
}

pub fn random_kernel_of(rng: &mut ChaCha8Rng, s: KernelStructure) -> KernelSpec {
    let ell = rng.random_range(0.5f64..2.0);
    let sf = rng.random_range(0.5f64..2.0);
    let sn = rng.random_range(0.1f64..0.6);
    let params = match s {
        KernelStructure::SquaredExponential | KernelStructure::Exponential => vec![ell, sf],
        KernelStructure::RationalQuadratic => vec![ell, sf, rng.random_range(0.5..3.0)],
        KernelStructure::Periodic => vec![ell, rng.random_range(2.0..5.0), sf],
    };
    KernelSpec::from_natural(s, &params, sn).unwrap()
}

/// `n` points in `dim` dimensions with inputs on `[0, 5]` and roughly unit outputs.
pub fn random_dataset(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Dataset {
    let x = Matrix::from_fn(dim, n, |_, _| rng.random_range(0.0..5.0));
    let y = (0..n).map(|i| (x[(0, i)]).sin() + rng.random_range(-0.5..0.5)).collect();
    Dataset::new(x, y).unwrap()
}

/// A uniformly random near-equal split with `m` sorted anchors.
pub fn random_partition(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Partition {
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut idx1 = perm[..n / 2].to_vec();
    let mut idx2 = perm[n / 2..].to_vec();
    idx1.sort_unstable();
    idx2.sort_unstable();
    perm.shuffle(rng);
    let mut anchor_idx = perm[..m].to_vec();
    anchor_idx.sort_unstable();
    Partition { idx1, idx2, anchor_idx }
}

// ---------------------------------------------------------------------------
// GP oracles built from explicit densities

pub fn gram(k: &KernelSpec, xa: &Matrix, xb: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(xa.ncols(), xb.ncols(), |i, j| k.eval(&xa.column(i), &xb.column(j)))
}

/// `log N(y | 0, K + σ²I)` by explicit inversion.
pub fn evidence_oracle(k: &KernelSpec, data: &Dataset) -> f64 {
    let mut c = gram(k, data.x(), data.x());
    for i in 0..data.len() {
        c[(i, i)] += k.noise_variance();
    }
    na_log_normal(data.y(), &vec![0.0; data.len()], &c)
}

/// Mean negative log predictive over folds, each conditioned explicitly.
pub fn loo_oracle(k: &KernelSpec, data: &Dataset) -> f64 {
    let n = data.len();
    let mut c = gram(k, data.x(), data.x());
    for i in 0..n {
        c[(i, i)] += k.noise_variance();
    }
    let mut total = 0.0;
    for i in 0..n {
        let rest: Vec<usize> = (0..n).filter(|&j| j != i).collect();
        let c_rr = c.select_rows(&rest).select_columns(&rest);
        let c_ir = DVector::from_iterator(rest.len(), rest.iter().map(|&j| c[(i, j)]));
        let y_r = DVector::from_iterator(rest.len(), rest.iter().map(|&j| data.y()[j]));
        let inv = c_rr.try_inverse().unwrap();
        let mean = c_ir.dot(&(&inv * &y_r));
        let var = c[(i, i)] - c_ir.dot(&(&inv * &c_ir));
        total += na_log_normal(&[data.y()[i]], &[mean], &DMatrix::from_element(1, 1, var));
    }
    -total / n as f64
}

/// Densities entering the agreement integral for one partition, each evaluated
/// without the closed-form conditioning: half-posteriors as joint / marginal
/// density ratios and half-likelihoods as joint / prior ratios.
pub struct AgreementOracle {
    pub m: usize,
    prior: NaGaussian,
    joints: [NaGaussian; 2],
    marginals_y: [f64; 2],
    ys: [Vec<f64>; 2],
}

impl AgreementOracle {
    pub fn new(k: &KernelSpec, data: &Dataset, part: &Partition) -> Self {
        let anchors = data.x().select_columns(&part.anchor_idx);
        let m = part.anchor_idx.len();
        let kt = gram(k, &anchors, &anchors);
        let prior = NaGaussian::new(&vec![0.0; m], &kt);
        let mk = |idx: &[usize]| {
            let xi = data.x().select_columns(idx);
            let yi: Vec<f64> = idx.iter().map(|&j| data.y()[j]).collect();
            let n = idx.len();
            let mut ki = gram(k, &xi, &xi);
            for d in 0..n {
                ki[(d, d)] += k.noise_variance();
            }
            let cross = gram(k, &xi, &anchors);
            let mut joint = DMatrix::zeros(m + n, m + n);
            joint.view_mut((0, 0), (m, m)).copy_from(&kt);
            joint.view_mut((m, m), (n, n)).copy_from(&ki);
            joint.view_mut((m, 0), (n, m)).copy_from(&cross);
            joint.view_mut((0, m), (m, n)).copy_from(&cross.transpose());
            let marg = na_log_normal(&yi, &vec![0.0; n], &ki);
            (NaGaussian::new(&vec![0.0; m + n], &joint), marg, yi)
        };
        let (j1, m1, y1) = mk(&part.idx1);
        let (j2, m2, y2) = mk(&part.idx2);
        Self { m, prior, joints: [j1, j2], marginals_y: [m1, m2], ys: [y1, y2] }
    }

    fn log_joint(&self, i: usize, f: &[f64]) -> f64 {
        let z: Vec<f64> = f.iter().chain(&self.ys[i]).copied().collect();
        self.joints[i].log_pdf(&z)
    }

    pub fn log_prior(&self, f: &[f64]) -> f64 {
        self.prior.log_pdf(f)
    }

    /// `log p(f̃ | y_i)`.
    pub fn log_posterior(&self, i: usize, f: &[f64]) -> f64 {
        self.log_joint(i, f) - self.marginals_y[i]
    }

    /// `log p(y_i | f̃)`.
    pub fn log_likelihood(&self, i: usize, f: &[f64]) -> f64 {
        self.log_joint(i, f) - self.log_prior(f)
    }

    pub fn log_eta_bayesian(&self) -> f64 {
        let zero = vec![0.0; self.m];
        log_integrate(|f| self.log_posterior(0, f) + self.log_posterior(1, f) + self.log_prior(f), &zero)
    }

    pub fn log_eta_beta_noise(&self) -> f64 {
        let zero = vec![0.0; self.m];
        let z1 = log_integrate(|f| self.log_likelihood(0, f), &zero);
        let z2 = log_integrate(|f| self.log_likelihood(1, f), &zero);
        log_integrate(
            |f| self.log_likelihood(0, f) - z1 + self.log_likelihood(1, f) - z2 + self.log_prior(f),
            &zero,
        )
    }
}

/// `∂k/∂θ` for each log-parameter of the kernel (noise excluded) at distance `r`.
fn kernel_log_param_derivs(k: &KernelSpec, r: f64) -> Vec<f64> {
    let sf2 = k.signal_std().powi(2);
    let ell = k.lengthscale();
    match k.structure() {
        KernelStructure::SquaredExponential => {
            let v = sf2 * (-r * r / (2.0 * ell * ell)).exp();
            vec![v * r * r / (ell * ell), 2.0 * v]
        }
        KernelStructure::Exponential => {
            let v = sf2 * (-r / ell).exp();
            vec![v * r / ell, 2.0 * v]
        }
        KernelStructure::RationalQuadratic => {
            let a = k.alpha().unwrap();
            let u = 1.0 + r * r / (2.0 * a * ell * ell);
            let v = sf2 * u.powf(-a);
            vec![sf2 * u.powf(-a - 1.0) * r * r / (ell * ell), 2.0 * v, v * a * (-u.ln() + (u - 1.0) / u)]
        }
        KernelStructure::Periodic => {
            let t = k.period().unwrap();
            let s = (std::f64::consts::PI * r / t).sin();
            let v = sf2 * (-2.0 * s * s / (ell * ell)).exp();
            let dt = v * 2.0 * std::f64::consts::PI * r * (2.0 * std::f64::consts::PI * r / t).sin() / (t * ell * ell);
            vec![v * 4.0 * s * s / (ell * ell), dt, 2.0 * v]
        }
    }
}

/// Analytic `∇θ log N(y | 0, K)` via `½ tr((ααᵀ − K⁻¹) ∂K/∂θⱼ)`.
pub fn evidence_gradient_oracle(k: &KernelSpec, data: &Dataset) -> Vec<f64> {
    let n = data.len();
    let x = data.x();
    let mut c = gram(k, x, x);
    for i in 0..n {
        c[(i, i)] += k.noise_variance();
    }
    let inv = c.try_inverse().unwrap();
    let alpha = &inv * DVector::from_column_slice(data.y());
    let w = &alpha * alpha.transpose() - &inv;
    let p = k.log_params().len();
    let mut grad = vec![0.0; p + 1];
    for i in 0..n {
        for j in 0..n {
            let r: f64 = (0..x.nrows()).map(|d| (x[(d, i)] - x[(d, j)]).powi(2)).sum::<f64>().sqrt();
            for (g, dk) in grad.iter_mut().zip(kernel_log_param_derivs(k, r)) {
                *g += 0.5 * w[(i, j)] * dk;
            }
        }
        grad[p] += 0.5 * w[(i, i)] * 2.0 * k.noise_variance();
    }
    grad
}
