//! Experiment orchestration: teacher–student data generation, fitting students
//! under one criterion, ranking them under every criterion plus test MSLL, and
//! aggregating ranks over replicates.
//!
//! Every replicate derives its own seeds from the master seed and its index, so
//! reports do not depend on how replicates are scheduled across threads.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asc::{sample_partitions, AscConfig, Partition};
use crate::error::{GpError, Result};
use crate::gp::{msll, predict, InputTransform};
use crate::kernels::{kernel_matrix, KernelStructure};
use crate::linalg::Cholesky;
use crate::optimizer::{optimize, score, Criterion, ObjectiveSpec};
use crate::{Dataset, GpModel, KernelSpec, Matrix};

/// Column name of the test-error reference ranking.
pub const MSLL_COLUMN: &str = "msll";

pub const TOOL_NAME: &str = "gpasc";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Teacher GP in natural units (`params` in the order of [`KernelStructure::param_names`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TeacherConfig {
    pub kernel: KernelStructure,
    pub params: Vec<f64>,
    pub noise_std: f64,
}

impl TeacherConfig {
    pub fn squared_exponential(ell: f64, sf: f64, sn: f64) -> Self {
        Self { kernel: KernelStructure::SquaredExponential, params: vec![ell, sf], noise_std: sn }
    }

    pub fn model(&self) -> Result<GpModel> {
        Ok(GpModel::new(KernelSpec::from_natural(self.kernel, &self.params, self.noise_std)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// `None` for real-data experiments.
    pub teacher: Option<TeacherConfig>,
    pub students: Vec<KernelStructure>,
    /// Ranking criteria; test MSLL is always ranked alongside.
    pub criteria: Vec<Criterion>,
    /// Criterion used to fit each student's hyperparameters.
    pub fit_criterion: Criterion,
    pub replicates: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub input_range: (f64, f64),
    pub asc: AscConfig,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            teacher: Some(TeacherConfig::squared_exponential(1.0, 1.0, 0.1)),
            students: KernelStructure::ALL.to_vec(),
            criteria: Criterion::ALL.to_vec(),
            fit_criterion: Criterion::Evidence,
            replicates: 16,
            n_train: 64,
            n_test: 256,
            input_range: (0.0, 10.0),
            asc: AscConfig::default(),
            restarts: 3,
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(GpError::InvalidConfig(m));
        if self.replicates == 0 {
            return bad("replicates must be ≥ 1".into());
        }
        if self.students.is_empty() {
            return bad("at least one student kernel is required".into());
        }
        if self.restarts == 0 {
            return bad("restarts must be ≥ 1".into());
        }
        if self.n_test == 0 {
            return bad("n_test must be ≥ 1".into());
        }
        self.asc.validate()?;
        if self.n_train < 2 * self.asc.m {
            return bad(format!("n_train = {} must be ≥ 2·M = {}", self.n_train, 2 * self.asc.m));
        }
        let (lo, hi) = self.input_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad(format!("invalid input range [{lo}, {hi}]"));
        }
        if let Some(t) = &self.teacher {
            t.model()?;
        }
        Ok(())
    }

    /// Ranking columns: the criteria followed by test MSLL.
    pub fn columns(&self) -> Vec<String> {
        self.criteria.iter().map(|c| c.name().to_string()).chain([MSLL_COLUMN.to_string()]).collect()
    }
}

/// SplitMix64 finalizer over `(master, stream, index)`.
pub fn derive_seed(master: u64, stream: u64, index: u64) -> u64 {
    let mut z = master ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03) ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STREAM_DATA: u64 = 1;
const STREAM_FIT: u64 = 2;
const STREAM_ASC: u64 = 3;

/// Draws 1-D inputs uniformly on `input_range`, a joint latent sample over all
/// points, and noisy outputs; the first `n_train` points form the training set.
pub fn sample_synthetic(
    teacher: &GpModel,
    n_train: usize,
    n_test: usize,
    input_range: (f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset)> {
    let n = n_train + n_test;
    if n_train == 0 || n_test == 0 {
        return Err(GpError::InsufficientData { found: n_train.min(n_test), required: 1 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let xs: Vec<f64> = (0..n).map(|_| rng.random_range(input_range.0..input_range.1)).collect();
    let x = Matrix::row_vector(&xs);
    let k = kernel_matrix(&teacher.kernel, &x, &x)?;
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let latent = if k.trace() > 0.0 {
        let chol = Cholesky::new(&k).map_err(GpError::singular)?;
        chol.factor().matvec(&z)
    } else {
        vec![0.0; n]
    };
    let sn = teacher.kernel.noise_std();
    let y: Vec<f64> = latent.iter().map(|f| f + sn * rng.sample::<f64, _>(StandardNormal)).collect();
    let train = Dataset::from_1d(&xs[..n_train], &y[..n_train])?;
    let test = Dataset::from_1d(&xs[n_train..], &y[n_train..])?;
    Ok((train, test))
}

/// Ranks best-first; `None` and non-finite scores share the worst ranks. Ties
/// receive the average of the ranks they span.
pub fn rank_scores(scores: &[Option<f64>], higher_is_better: bool) -> Vec<f64> {
    let key = |i: usize| match scores[i] {
        Some(v) if v.is_finite() => Some(if higher_is_better { -v } else { v }),
        _ => None,
    };
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| match (key(a), key(b)) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && key(order[end]) == key(order[start]) {
            end += 1;
        }
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = avg;
        }
        start = end;
    }
    ranks
}

/// Outcome of fitting one student.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentFit {
    pub kernel: KernelStructure,
    pub theta: Option<Vec<f64>>,
    pub fit_objective: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

/// One replicate's raw scores, ranks and failure diagnostics, keyed by column name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateResult {
    pub replicate: usize,
    pub data_seed: u64,
    pub fits: Vec<StudentFit>,
    pub scores: BTreeMap<String, Vec<Option<f64>>>,
    pub ranks: BTreeMap<String, Vec<f64>>,
    /// Per ASC criterion, per student: fraction of partitions that failed.
    pub failed_partition_fraction: BTreeMap<String, Vec<Option<f64>>>,
}

/// Fits every student on `train` under `cfg.fit_criterion`, scores each fitted
/// student under every ranking criterion at its own θ, and ranks them. ASC
/// criteria share one set of partitions drawn from `cfg.asc`.
pub fn rank_students(cfg: &ExperimentConfig, train: &Dataset, test: &Dataset) -> Result<ReplicateResult> {
    let fit_spec = ObjectiveSpec::new(cfg.fit_criterion, cfg.asc);
    let fits: Vec<StudentFit> = cfg
        .students
        .iter()
        .map(|&s| {
            let template = GpModel::new(KernelSpec::unit(s));
            match optimize(&fit_spec, &template, train, cfg.restarts, cfg.seed) {
                Ok(r) => StudentFit {
                    kernel: s,
                    theta: Some(r.theta),
                    fit_objective: Some(r.objective_value),
                    converged: r.converged,
                    error: None,
                },
                Err(e) => StudentFit { kernel: s, theta: None, fit_objective: None, converged: false, error: Some(e.to_string()) },
            }
        })
        .collect();
    let models: Vec<Option<GpModel>> = fits
        .iter()
        .map(|f| {
            let theta = f.theta.as_ref()?;
            KernelSpec::unit(f.kernel).with_theta(theta).ok().map(GpModel::new)
        })
        .collect();

    let partitions: Vec<Partition> = if cfg.criteria.iter().any(|c| c.asc_variant().is_some()) {
        sample_partitions(train.len(), &cfg.asc)?
    } else {
        Vec::new()
    };

    let mut scores = BTreeMap::new();
    let mut ranks = BTreeMap::new();
    let mut failed_partition_fraction = BTreeMap::new();
    for &c in &cfg.criteria {
        let evals: Vec<_> = models.iter().map(|m| m.as_ref().and_then(|m| score(c, m, train, &partitions).ok())).collect();
        let values: Vec<Option<f64>> = evals.iter().map(|e| e.map(|e| e.value)).collect();
        if c.asc_variant().is_some() {
            let fr = models
                .iter()
                .zip(&evals)
                .map(|(m, e)| match (m, e) {
                    (Some(_), Some(e)) => e.failed_partition_fraction,
                    (Some(_), None) => Some(1.0),
                    (None, _) => None,
                })
                .collect();
            failed_partition_fraction.insert(c.name().to_string(), fr);
        }
        ranks.insert(c.name().to_string(), rank_scores(&values, c.maximize()));
        scores.insert(c.name().to_string(), values);
    }
    let test_msll: Vec<Option<f64>> = models
        .iter()
        .map(|m| {
            let m = m.as_ref()?;
            let p = predict(m, train, test.x()).ok()?;
            msll(&p, test.y(), train.y()).ok().filter(|v| v.is_finite())
        })
        .collect();
    ranks.insert(MSLL_COLUMN.to_string(), rank_scores(&test_msll, false));
    scores.insert(MSLL_COLUMN.to_string(), test_msll);

    Ok(ReplicateResult { replicate: 0, data_seed: 0, fits, scores, ranks, failed_partition_fraction })
}

/// Mean and normal-approximation 95% half-width `1.96·sd/√R` (sample sd; 0 for R = 1).
pub fn mean_ci(values: &[f64]) -> (f64, f64) {
    let r = values.len() as f64;
    let mean = values.iter().sum::<f64>() / r;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
    (mean, 1.96 * var.sqrt() / r.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankSummary {
    pub criterion: String,
    pub kernel: KernelStructure,
    pub mean_rank: f64,
    pub ci_halfwidth: f64,
    pub ranks: Vec<f64>,
    pub raw: Vec<Option<f64>>,
}

/// Per (column, student) mean rank with CI over the given replicates.
pub fn aggregate_ranks(columns: &[String], students: &[KernelStructure], replicates: &[ReplicateResult]) -> Vec<RankSummary> {
    let mut out = Vec::with_capacity(columns.len() * students.len());
    for col in columns {
        for (s, &kernel) in students.iter().enumerate() {
            let ranks: Vec<f64> = replicates.iter().map(|r| r.ranks[col][s]).collect();
            let raw: Vec<Option<f64>> = replicates.iter().map(|r| r.scores[col][s]).collect();
            let (mean_rank, ci_halfwidth) = mean_ci(&ranks);
            out.push(RankSummary { criterion: col.clone(), kernel, mean_rank, ci_halfwidth, ranks, raw });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateFailure {
    pub replicate: usize,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FailureCounts {
    /// Student fits that failed, per kernel.
    pub fit_failures: BTreeMap<String, usize>,
    /// Scores that could not be computed, per column.
    pub score_failures: BTreeMap<String, usize>,
    pub failed_replicates: usize,
    /// Mean failed-partition fraction per ASC criterion over all scored students.
    pub mean_failed_partition_fraction: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub master_seed: u64,
    pub replicate_seeds: Vec<u64>,
}

/// How real-data replicates were formed; `None` for synthetic runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealDataInfo {
    pub source: String,
    pub n_points: usize,
    pub skipped_rows: usize,
    pub input_columns: Vec<String>,
    pub output_column: String,
    pub input_transform: Option<InputTransform<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub provenance: Provenance,
    pub config: ExperimentConfig,
    pub real_data: Option<RealDataInfo>,
    pub columns: Vec<String>,
    pub summary: Vec<RankSummary>,
    pub replicates: Vec<ReplicateResult>,
    pub replicate_failures: Vec<ReplicateFailure>,
    pub failures: FailureCounts,
}

impl RankingReport {
    pub fn summary_for(&self, column: &str, kernel: KernelStructure) -> Option<&RankSummary> {
        self.summary.iter().find(|s| s.criterion == column && s.kernel == kernel)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut f = BufWriter::new(File::create(path)?);
        f.write_all(self.to_json()?.as_bytes())?;
        f.write_all(b"\n")?;
        f.flush()?;
        Ok(())
    }

    /// Flat `criterion,kernel,mean_rank,ci_halfwidth` table.
    pub fn write_rank_table(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["criterion", "kernel", "mean_rank", "ci_halfwidth"])?;
        for s in &self.summary {
            w.write_record([s.criterion.clone(), s.kernel.to_string(), s.mean_rank.to_string(), s.ci_halfwidth.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn replicate_config(cfg: &ExperimentConfig, r: usize) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.seed = derive_seed(cfg.seed, STREAM_FIT, r as u64);
    c.asc.seed = derive_seed(cfg.seed ^ cfg.asc.seed, STREAM_ASC, r as u64);
    c
}

fn assemble(
    cfg: &ExperimentConfig,
    real_data: Option<RealDataInfo>,
    seeds: Vec<u64>,
    outcomes: Vec<Result<ReplicateResult>>,
) -> Result<RankingReport> {
    let mut replicates = Vec::new();
    let mut replicate_failures = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(mut res) => {
                res.replicate = r;
                res.data_seed = seeds[r];
                replicates.push(res);
            }
            Err(e) => replicate_failures.push(ReplicateFailure { replicate: r, error: e.to_string() }),
        }
    }
    if replicates.is_empty() {
        return Err(GpError::OptimizationFailed(format!(
            "all {} replicates failed; first error: {}",
            cfg.replicates,
            replicate_failures.first().map_or("none", |f| f.error.as_str())
        )));
    }
    let columns = cfg.columns();
    let summary = aggregate_ranks(&columns, &cfg.students, &replicates);

    let mut failures = FailureCounts { failed_replicates: replicate_failures.len(), ..Default::default() };
    for (s, k) in cfg.students.iter().enumerate() {
        let n = replicates.iter().filter(|r| r.fits[s].theta.is_none()).count();
        failures.fit_failures.insert(k.to_string(), n);
    }
    for col in &columns {
        let n = replicates.iter().flat_map(|r| &r.scores[col]).filter(|v| v.is_none()).count();
        failures.score_failures.insert(col.clone(), n);
    }
    for c in cfg.criteria.iter().filter(|c| c.asc_variant().is_some()) {
        let fr: Vec<f64> = replicates.iter().flat_map(|r| r.failed_partition_fraction[c.name()].iter().flatten().copied()).collect();
        if !fr.is_empty() {
            failures.mean_failed_partition_fraction.insert(c.name().to_string(), fr.iter().sum::<f64>() / fr.len() as f64);
        }
    }

    Ok(RankingReport {
        provenance: Provenance {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            master_seed: cfg.seed,
            replicate_seeds: seeds,
        },
        config: cfg.clone(),
        real_data,
        columns,
        summary,
        replicates,
        replicate_failures,
        failures,
    })
}

/// Teacher–student experiment: each replicate draws fresh data from the teacher
/// and ranks the students on it.
pub fn run_synthetic(cfg: &ExperimentConfig) -> Result<RankingReport> {
    cfg.validate()?;
    let teacher = cfg
        .teacher
        .as_ref()
        .ok_or_else(|| GpError::InvalidConfig("synthetic experiment needs a teacher".into()))?
        .model()?;
    let seeds: Vec<u64> = (0..cfg.replicates).map(|r| derive_seed(cfg.seed, STREAM_DATA, r as u64)).collect();
    let outcomes: Vec<Result<ReplicateResult>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let (train, test) = sample_synthetic(&teacher, cfg.n_train, cfg.n_test, cfg.input_range, seeds[r])?;
            rank_students(&replicate_config(cfg, r), &train, &test)
        })
        .collect();
    assemble(cfg, None, seeds, outcomes)
}

/// Real-data experiment: each replicate randomly splits `data` into `n_train`
/// training points and up to `n_test` of the remaining points for testing.
pub fn run_real(cfg: &ExperimentConfig, loaded: &LoadedDataset) -> Result<RankingReport> {
    let mut cfg = cfg.clone();
    cfg.teacher = None;
    cfg.validate()?;
    let data = &loaded.dataset;
    if data.len() <= cfg.n_train {
        return Err(GpError::InsufficientData { found: data.len(), required: cfg.n_train + 1 });
    }
    let seeds: Vec<u64> = (0..cfg.replicates).map(|r| derive_seed(cfg.seed, STREAM_DATA, r as u64)).collect();
    let outcomes: Vec<Result<ReplicateResult>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| {
            let mut idx: Vec<usize> = (0..data.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seeds[r]));
            let n_test = cfg.n_test.min(data.len() - cfg.n_train);
            let train = data.subset(&idx[..cfg.n_train]);
            let test = data.subset(&idx[cfg.n_train..cfg.n_train + n_test]);
            rank_students(&replicate_config(&cfg, r), &train, &test)
        })
        .collect();
    let info = RealDataInfo {
        source: loaded.source.clone(),
        n_points: data.len(),
        skipped_rows: loaded.skipped_rows,
        input_columns: loaded.input_columns.clone(),
        output_column: loaded.output_column.clone(),
        input_transform: data.input_transform().cloned(),
    };
    assemble(&cfg, Some(info), seeds, outcomes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub skipped_rows: usize,
    pub source: String,
    pub input_columns: Vec<String>,
    pub output_column: String,
}

/// Header names of a CSV file.
pub fn csv_headers(path: &Path) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    Ok(rdr.headers()?.iter().map(str::to_string).collect())
}

/// Reads the named columns as raw inputs and output. Rows with a missing or
/// non-numeric requested field are skipped and counted.
pub fn load_csv_raw(path: &Path, input_columns: &[String], output_column: &str) -> Result<LoadedDataset> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_path(path)?;
    let headers = rdr.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| GpError::Schema(format!("column `{name}` not found in {}", path.display())))
    };
    if input_columns.is_empty() {
        return Err(GpError::Schema("no input columns selected".into()));
    }
    let in_idx: Vec<usize> = input_columns.iter().map(|c| find(c)).collect::<Result<_>>()?;
    let out_idx = find(output_column)?;

    let parse = |rec: &csv::StringRecord, i: usize| rec.get(i).and_then(|s| s.parse::<f64>().ok()).filter(|v| v.is_finite());
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); in_idx.len()];
    let mut y = Vec::new();
    let mut skipped = 0;
    for rec in rdr.records() {
        let Ok(rec) = rec else {
            skipped += 1;
            continue;
        };
        let xs: Option<Vec<f64>> = in_idx.iter().map(|&i| parse(&rec, i)).collect();
        match (xs, parse(&rec, out_idx)) {
            (Some(xs), Some(v)) => {
                for (c, x) in cols.iter_mut().zip(xs) {
                    c.push(x);
                }
                y.push(v);
            }
            _ => skipped += 1,
        }
    }
    if y.is_empty() {
        return Err(GpError::EmptyData(format!("no usable rows in {} ({skipped} skipped)", path.display())));
    }
    let x = Matrix::from_rows(&cols);
    Ok(LoadedDataset {
        dataset: Dataset::new(x, y)?,
        skipped_rows: skipped,
        source: path.display().to_string(),
        input_columns: input_columns.to_vec(),
        output_column: output_column.to_string(),
    })
}

/// Like [`load_csv_raw`], then standardizes each input dimension to zero mean and
/// unit variance. The transform is recorded on the dataset; outputs stay raw.
pub fn load_csv_dataset(path: &Path, input_columns: &[String], output_column: &str) -> Result<LoadedDataset> {
    let mut loaded = load_csv_raw(path, input_columns, output_column)?;
    let t = standardization(loaded.dataset.x());
    let x = t.apply(loaded.dataset.x());
    loaded.dataset = Dataset::new(x, loaded.dataset.y().to_vec())?.with_input_transform(t);
    Ok(loaded)
}

/// Per-dimension mean and population standard deviation; constant inputs keep scale 1.
pub fn standardization(x: &Matrix) -> InputTransform<f64> {
    let n = x.ncols() as f64;
    let (shift, scale) = (0..x.nrows())
        .map(|d| {
            let row = x.row(d);
            let mean = row.iter().sum::<f64>() / n;
            let sd = (row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            (mean, if sd > 0.0 { sd } else { 1.0 })
        })
        .unzip();
    InputTransform { shift, scale }
}

/// Writes `x0, …, x{D−1}, y` columns with full round-trip precision.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = (0..data.input_dim()).map(|d| format!("x{d}")).chain(["y".to_string()]).collect();
    w.write_record(&header)?;
    for i in 0..data.len() {
        let rec: Vec<String> = (0..data.input_dim()).map(|d| data.x()[(d, i)].to_string()).chain([data.y()[i].to_string()]).collect();
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
