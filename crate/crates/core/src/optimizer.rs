//! Hyperparameter search: L-BFGS with a strong-Wolfe line search over log-space
//! hyperparameters, central finite-difference gradients, and seeded restarts.
//!
//! Every criterion is turned into a loss to minimize. Evaluation failures
//! (factorization errors, all ASC partitions failing) become `+∞` loss, which the
//! line search treats as "step too long".

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asc::{average_log_eta, sample_partitions, AscConfig, AscVariant, Partition};
use crate::error::{GpError, Result};
use crate::gp::{log_evidence, loo_cv_objective};
use crate::kernels::KernelStructure;
use crate::{Dataset, GpModel, KernelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    #[serde(rename = "evidence")]
    Evidence,
    #[serde(rename = "loo")]
    LooCv,
    #[serde(rename = "basc")]
    BayesianAsc,
    #[serde(rename = "bnasc")]
    BetaNoiseAsc,
}

impl Criterion {
    pub const ALL: [Criterion; 4] = [Criterion::Evidence, Criterion::LooCv, Criterion::BayesianAsc, Criterion::BetaNoiseAsc];

    pub fn name(self) -> &'static str {
        match self {
            Criterion::Evidence => "evidence",
            Criterion::LooCv => "loo",
            Criterion::BayesianAsc => "basc",
            Criterion::BetaNoiseAsc => "bnasc",
        }
    }

    /// Evidence and both ASC variants are maximized; the LOO loss is minimized.
    pub fn maximize(self) -> bool {
        !matches!(self, Criterion::LooCv)
    }

    pub fn asc_variant(self) -> Option<AscVariant> {
        match self {
            Criterion::BayesianAsc => Some(AscVariant::Bayesian),
            Criterion::BetaNoiseAsc => Some(AscVariant::BetaNoise),
            _ => None,
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Criterion {
    type Err = GpError;

    fn from_str(s: &str) -> Result<Self> {
        Criterion::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            GpError::InvalidConfig(format!("unknown criterion `{s}` (expected evidence, loo, basc, bnasc)"))
        })
    }
}

/// Criterion to optimize. The direction follows from the criterion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveSpec {
    pub criterion: Criterion,
    pub asc: AscConfig,
}

impl ObjectiveSpec {
    pub fn new(criterion: Criterion, asc: AscConfig) -> Self {
        Self { criterion, asc }
    }

    pub fn maximize(&self) -> bool {
        self.criterion.maximize()
    }
}

/// A criterion value at one hyperparameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub value: f64,
    /// Fraction of ASC partitions that failed to evaluate; `None` for evidence/LOO.
    pub failed_partition_fraction: Option<f64>,
}

/// Scores `model` on `data` under `criterion`. ASC criteria average over `partitions`.
pub fn score(criterion: Criterion, model: &GpModel, data: &Dataset, partitions: &[Partition]) -> Result<Evaluation> {
    match criterion.asc_variant() {
        None => {
            let value = match criterion {
                Criterion::Evidence => log_evidence(model, data)?,
                _ => loo_cv_objective(model, data)?,
            };
            Ok(Evaluation { value, failed_partition_fraction: None })
        }
        Some(variant) => {
            let s = average_log_eta(model, data, partitions, variant)?;
            Ok(Evaluation { value: s.log_eta, failed_partition_fraction: Some(s.failed_fraction()) })
        }
    }
}

/// A criterion bound to a model template, data, and (for ASC) a fixed set of partitions.
pub struct Objective<'a> {
    spec: ObjectiveSpec,
    template: &'a GpModel,
    data: &'a Dataset,
    partitions: Vec<Partition>,
}

impl<'a> Objective<'a> {
    /// Samples ASC partitions once from `spec.asc`; they stay fixed for every evaluation.
    pub fn new(spec: ObjectiveSpec, template: &'a GpModel, data: &'a Dataset) -> Result<Self> {
        let partitions = if spec.criterion.asc_variant().is_some() {
            sample_partitions(data.len(), &spec.asc)?
        } else {
            Vec::new()
        };
        Ok(Self { spec, template, data, partitions })
    }

    pub fn with_partitions(spec: ObjectiveSpec, template: &'a GpModel, data: &'a Dataset, partitions: Vec<Partition>) -> Self {
        Self { spec, template, data, partitions }
    }

    pub fn spec(&self) -> &ObjectiveSpec {
        &self.spec
    }

    pub fn partitions(&self) -> &[Partition] {
        &self.partitions
    }

    pub fn model_at(&self, theta: &[f64]) -> Result<GpModel> {
        Ok(self.template.with_kernel(self.template.kernel.with_theta(theta)?))
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<Evaluation> {
        let model = self.model_at(theta)?;
        let e = score(self.spec.criterion, &model, self.data, &self.partitions)?;
        if e.value.is_finite() {
            Ok(e)
        } else {
            Err(GpError::OptimizationFailed(format!("non-finite objective at {theta:?}")))
        }
    }

    /// Minimization form: the negated value for maximized criteria, `+∞` on failure.
    pub fn loss(&self, theta: &[f64]) -> f64 {
        match self.evaluate(theta) {
            Ok(e) if self.spec.maximize() => -e.value,
            Ok(e) => e.value,
            Err(_) => f64::INFINITY,
        }
    }
}

/// Central-difference gradient. `flagged` lists coordinates where a probe was
/// non-finite; those entries are set to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FdGradient {
    pub grad: Vec<f64>,
    pub flagged: Vec<usize>,
}

/// Step per coordinate is `h_rel · max(|θ_k|, 1)`.
pub fn finite_diff_gradient(f: impl Fn(&[f64]) -> f64, theta: &[f64], h_rel: f64) -> FdGradient {
    let mut probe = theta.to_vec();
    let mut grad = vec![0.0; theta.len()];
    let mut flagged = Vec::new();
    for k in 0..theta.len() {
        let h = h_rel * theta[k].abs().max(1.0);
        probe[k] = theta[k] + h;
        let up = f(&probe);
        probe[k] = theta[k] - h;
        let down = f(&probe);
        probe[k] = theta[k];
        if up.is_finite() && down.is_finite() {
            grad[k] = (up - down) / (2.0 * h);
        } else {
            flagged.push(k);
        }
    }
    FdGradient { grad, flagged }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LbfgsConfig {
    pub history: usize,
    pub max_iter: usize,
    /// Stop when `‖g‖∞` falls below this.
    pub grad_tol: f64,
    /// Stop when the relative loss change stays below this for `stall_iters` iterations.
    pub rel_tol: f64,
    pub stall_iters: usize,
    pub h_rel: f64,
    pub c1: f64,
    pub c2: f64,
    pub max_line_search: usize,
}

impl Default for LbfgsConfig {
    fn default() -> Self {
        Self {
            history: 10,
            max_iter: 200,
            grad_tol: 1e-5,
            rel_tol: 1e-9,
            stall_iters: 3,
            h_rel: 1e-5,
            c1: 1e-4,
            c2: 0.9,
            max_line_search: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LbfgsOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Point {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
}

struct Minimizer<'f, F> {
    f: &'f F,
    cfg: LbfgsConfig,
}

impl<F: Fn(&[f64]) -> f64> Minimizer<'_, F> {
    fn grad(&self, x: &[f64]) -> Vec<f64> {
        finite_diff_gradient(self.f, x, self.cfg.h_rel).grad
    }

    fn point(&self, x: Vec<f64>) -> Point {
        let f = (self.f)(&x);
        let g = if f.is_finite() { self.grad(&x) } else { vec![0.0; x.len()] };
        Point { x, f, g }
    }

    fn step(x: &[f64], d: &[f64], alpha: f64) -> Vec<f64> {
        x.iter().zip(d).map(|(xi, di)| xi + alpha * di).collect()
    }

    /// Strong-Wolfe bracketing search along `d` from `start`.
    fn line_search(&self, start: &Point, d: &[f64], alpha0: f64) -> Option<Point> {
        let dphi0 = dot(&start.g, d);
        if !(dphi0 < 0.0) {
            return None;
        }
        let (c1, c2) = (self.cfg.c1, self.cfg.c2);
        let armijo = |alpha: f64, f: f64| f <= start.f + c1 * alpha * dphi0;

        let mut prev = (0.0, start.f, dphi0);
        let mut alpha = alpha0;
        for i in 0..self.cfg.max_line_search {
            let x = Self::step(&start.x, d, alpha);
            let f = (self.f)(&x);
            if !f.is_finite() || !armijo(alpha, f) || (i > 0 && f >= prev.1) {
                return self.zoom(start, d, dphi0, prev, (alpha, f, f64::NAN));
            }
            let g = self.grad(&x);
            let dphi = dot(&g, d);
            if dphi.abs() <= -c2 * dphi0 {
                return Some(Point { x, f, g });
            }
            if dphi >= 0.0 {
                return self.zoom(start, d, dphi0, (alpha, f, dphi), prev);
            }
            prev = (alpha, f, dphi);
            alpha *= 2.0;
        }
        None
    }

    /// Narrows `[lo, hi]` (each `(alpha, f, dphi)`) until a strong-Wolfe point is
    /// found. Falls back to the best sufficient-decrease point seen.
    fn zoom(&self, start: &Point, d: &[f64], dphi0: f64, mut lo: (f64, f64, f64), mut hi: (f64, f64, f64)) -> Option<Point> {
        let (c1, c2) = (self.cfg.c1, self.cfg.c2);
        let mut best: Option<Point> = None;
        for _ in 0..self.cfg.max_line_search {
            let width = hi.0 - lo.0;
            if width.abs() < 1e-14 * lo.0.abs().max(1e-10) {
                break;
            }
            let alpha = interpolate(lo, hi);
            let x = Self::step(&start.x, d, alpha);
            let f = (self.f)(&x);
            if !f.is_finite() || f > start.f + c1 * alpha * dphi0 || f >= lo.1 {
                hi = (alpha, f, f64::NAN);
                continue;
            }
            let g = self.grad(&x);
            let dphi = dot(&g, d);
            if dphi.abs() <= -c2 * dphi0 {
                return Some(Point { x, f, g });
            }
            if dphi * (hi.0 - lo.0) >= 0.0 {
                hi = lo;
            }
            lo = (alpha, f, dphi);
            best = Some(Point { x, f, g });
        }
        best.filter(|p| p.f < start.f)
    }

    /// L-BFGS two-loop recursion.
    fn direction(memory: &VecDeque<(Vec<f64>, Vec<f64>, f64)>, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &q);
            axpy(&mut q, -a, y);
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|v| *v *= gamma);
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.into_iter().rev()) {
            let b = rho * dot(y, &q);
            axpy(&mut q, a - b, s);
        }
        q.iter_mut().for_each(|v| *v = -*v);
        q
    }

    fn run(&self, x0: Vec<f64>) -> LbfgsOutcome {
        let mut cur = self.point(x0);
        if !cur.f.is_finite() {
            return LbfgsOutcome { x: cur.x, f: cur.f, grad: cur.g, iterations: 0, converged: false };
        }
        let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(self.cfg.history);
        let mut stall = 0;
        let mut converged = false;
        let mut iterations = 0;
        while iterations < self.cfg.max_iter {
            if inf_norm(&cur.g) < self.cfg.grad_tol {
                converged = true;
                break;
            }
            iterations += 1;
            let mut d = Self::direction(&memory, &cur.g);
            if !(dot(&d, &cur.g) < 0.0) {
                memory.clear();
                d = cur.g.iter().map(|v| -v).collect();
            }
            let alpha0 = if memory.is_empty() { (1.0 / l2_norm(&cur.g)).min(1.0) } else { 1.0 };
            let next = match self.line_search(&cur, &d, alpha0) {
                Some(p) => p,
                None if !memory.is_empty() => {
                    memory.clear();
                    continue;
                }
                None => break,
            };
            let s: Vec<f64> = next.x.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = next.g.iter().zip(&cur.g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * l2_norm(&s) * l2_norm(&y) {
                if memory.len() == self.cfg.history {
                    memory.pop_front();
                }
                memory.push_back((s, y, 1.0 / sy));
            }
            let rel = (cur.f - next.f).abs() / cur.f.abs().max(next.f.abs()).max(1.0);
            stall = if rel < self.cfg.rel_tol { stall + 1 } else { 0 };
            cur = next;
            if stall >= self.cfg.stall_iters {
                converged = true;
                break;
            }
        }
        if !converged && inf_norm(&cur.g) < self.cfg.grad_tol {
            converged = true;
        }
        LbfgsOutcome { x: cur.x, f: cur.f, grad: cur.g, iterations, converged }
    }
}

/// Minimizes `f` from `x0`. Non-finite values of `f` are treated as infeasible.
pub fn lbfgs_minimize(f: &impl Fn(&[f64]) -> f64, x0: Vec<f64>, cfg: &LbfgsConfig) -> LbfgsOutcome {
    Minimizer { f, cfg: *cfg }.run(x0)
}

/// Safeguarded cubic interpolation inside the bracket; bisection when a bracket
/// end is infeasible or the cubic has no usable minimizer.
fn interpolate(lo: (f64, f64, f64), hi: (f64, f64, f64)) -> f64 {
    let (a, fa, da) = lo;
    let (b, fb, db) = hi;
    let (left, right) = if a < b { (a, b) } else { (b, a) };
    let margin = 0.1 * (right - left);
    let mid = 0.5 * (a + b);
    if !(fa.is_finite() && fb.is_finite() && da.is_finite() && db.is_finite()) {
        return mid;
    }
    let d1 = da + db - 3.0 * (fa - fb) / (a - b);
    let disc = d1 * d1 - da * db;
    if disc < 0.0 {
        return mid;
    }
    let d2 = disc.sqrt() * (b - a).signum();
    let t = b - (b - a) * ((db + d2 - d1) / (db - da + 2.0 * d2));
    if t.is_finite() {
        t.clamp(left + margin, right - margin)
    } else {
        mid
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn l2_norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Best point over all restarts, in the criterion's own sign convention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub criterion: Criterion,
    pub structure: KernelStructure,
    pub theta: Vec<f64>,
    pub objective_value: f64,
    pub restarts_run: usize,
    pub converged: bool,
    pub iterations: usize,
    pub failed_partition_fraction: Option<f64>,
}

impl OptResult {
    pub fn kernel(&self) -> Result<KernelSpec> {
        KernelSpec::new(self.structure, self.theta[..self.theta.len() - 1].to_vec(), self.theta[self.theta.len() - 1])
    }

    pub fn model(&self, template: &GpModel) -> Result<GpModel> {
        Ok(template.with_kernel(self.kernel()?))
    }
}

/// Range of the uniform draw for each log-hyperparameter at a restart.
pub const INIT_RANGE: (f64, f64) = (-2.0, 2.0);

/// Starting points for `restarts` runs; the first `k` are the same for any `restarts ≥ k`.
pub fn initial_points(dim: usize, restarts: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..restarts)
        .map(|_| (0..dim).map(|_| rng.random_range(INIT_RANGE.0..INIT_RANGE.1)).collect())
        .collect()
}

/// Optimizes the criterion over the template kernel's log-hyperparameters.
pub fn optimize(obj: &ObjectiveSpec, template: &GpModel, data: &Dataset, restarts: usize, seed: u64) -> Result<OptResult> {
    optimize_with(obj, template, data, restarts, seed, &LbfgsConfig::default())
}

pub fn optimize_with(
    obj: &ObjectiveSpec,
    template: &GpModel,
    data: &Dataset,
    restarts: usize,
    seed: u64,
    cfg: &LbfgsConfig,
) -> Result<OptResult> {
    if restarts == 0 {
        return Err(GpError::InvalidConfig("restarts must be ≥ 1".into()));
    }
    if obj.criterion.asc_variant().is_some() {
        obj.asc.validate()?;
    }
    let objective = Objective::new(*obj, template, data)?;
    let starts = initial_points(template.kernel.n_theta(), restarts, seed);
    let loss = |t: &[f64]| objective.loss(t);
    let outcomes: Vec<LbfgsOutcome> = starts.into_par_iter().map(|x0| lbfgs_minimize(&loss, x0, cfg)).collect();

    let mut best: Option<&LbfgsOutcome> = None;
    for o in outcomes.iter().filter(|o| o.f.is_finite()) {
        if best.is_none_or(|b| o.f < b.f - 1e-12) {
            best = Some(o);
        }
    }
    let best = best.ok_or_else(|| GpError::OptimizationFailed(format!("all {restarts} restarts failed to evaluate")))?;
    let eval = objective.evaluate(&best.x)?;
    Ok(OptResult {
        criterion: obj.criterion,
        structure: template.kernel.structure(),
        theta: best.x.clone(),
        objective_value: eval.value,
        restarts_run: restarts,
        converged: best.converged,
        iterations: best.iterations,
        failed_partition_fraction: eval.failed_partition_fraction,
    })
}
