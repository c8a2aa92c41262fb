use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use gpasc::gp::{msll, predict, trivial_predictive, InputTransform};
use gpasc::harness::{
    csv_headers, load_csv_dataset, load_csv_raw, run_real, run_synthetic, sample_synthetic,
    write_dataset_csv, ExperimentConfig, LoadedDataset, RankingReport, TeacherConfig, TOOL_NAME, TOOL_VERSION,
};
use gpasc::optimizer::optimize;
use gpasc::{AscConfig, Criterion, Dataset, GpError, GpModel, KernelSpec, KernelStructure, ObjectiveSpec, OptResult};
use serde::{Deserialize, Serialize};

use crate::{AscArgs, Cli, ColumnArgs, Command, EvalArgs, Failure, FitArgs, RankArgs, SynthArgs, TeacherArgs};

pub fn run(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be ≥ 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot configure thread pool: {e}")))?;
    }
    let seed = cli.seed.unwrap_or_else(|| {
        let s = rand::random::<u64>();
        eprintln!("seed: {s}");
        s
    });
    let ctx = Ctx { seed, verbose: cli.verbose };
    match cli.command {
        Command::Synth(a) => synth(&ctx, a),
        Command::Fit(a) => fit(&ctx, a),
        Command::Rank(a) => rank(&ctx, a),
        Command::Eval(a) => eval(&ctx, a),
    }
}

struct Ctx {
    seed: u64,
    verbose: bool,
}

impl Ctx {
    fn log(&self, msg: impl AsRef<str>) {
        if self.verbose {
            eprintln!("{}", msg.as_ref());
        }
    }
}

fn structure(name: &str) -> Result<KernelStructure, Failure> {
    name.parse::<KernelStructure>().map_err(Failure::from)
}

fn criterion(name: &str) -> Result<Criterion, Failure> {
    name.parse::<Criterion>().map_err(|e| Failure::usage(e.to_string()))
}

fn positive(name: &str, v: f64) -> Result<(), Failure> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Failure::usage(format!("--{name} must be a positive finite number, got {v}")))
    }
}

fn teacher_config(kernel: &str, ell: f64, sf: f64, sn: f64, alpha: f64, period: f64) -> Result<TeacherConfig, Failure> {
    let kernel = structure(kernel)?;
    positive("ell", ell)?;
    positive("sf", sf)?;
    if !(sn.is_finite() && sn >= 0.0) {
        return Err(Failure::usage(format!("--sn must be a non-negative finite number, got {sn}")));
    }
    let params = match kernel {
        KernelStructure::SquaredExponential | KernelStructure::Exponential => vec![ell, sf],
        KernelStructure::RationalQuadratic => {
            positive("alpha", alpha)?;
            vec![ell, sf, alpha]
        }
        KernelStructure::Periodic => {
            positive("period", period)?;
            vec![ell, period, sf]
        }
    };
    let t = TeacherConfig { kernel, params, noise_std: sn };
    t.model()?;
    Ok(t)
}

fn with_suffix(out: &Path, suffix: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "data".into());
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn synth(ctx: &Ctx, a: SynthArgs) -> Result<(), Failure> {
    let TeacherArgs { kernel, ell, sf, sn, alpha, period } = &a.teacher;
    let teacher = teacher_config(kernel, *ell, *sf, *sn, *alpha, *period)?;
    if a.n_train == 0 || a.n_test == 0 {
        return Err(Failure::usage("--n-train and --n-test must be ≥ 1"));
    }
    if !(a.x_min.is_finite() && a.x_max.is_finite() && a.x_min < a.x_max) {
        return Err(Failure::usage(format!("invalid input range [{}, {}]", a.x_min, a.x_max)));
    }
    let (train, test) = sample_synthetic(&teacher.model()?, a.n_train, a.n_test, (a.x_min, a.x_max), ctx.seed)?;
    let train_path = with_suffix(&a.out, "train.csv");
    let test_path = with_suffix(&a.out, "test.csv");
    write_dataset_csv(&train_path, &train)?;
    write_dataset_csv(&test_path, &test)?;
    println!("{}", train_path.display());
    println!("{}", test_path.display());
    Ok(())
}

/// Resolves the input columns; an empty list selects every column except the output.
fn input_columns(path: &Path, cols: &ColumnArgs) -> Result<Vec<String>, Failure> {
    if !cols.inputs.is_empty() {
        return Ok(cols.inputs.clone());
    }
    Ok(csv_headers(path)?.into_iter().filter(|h| *h != cols.output).collect())
}

fn asc_config(a: &AscArgs, seed: u64) -> Result<AscConfig, Failure> {
    Ok(AscConfig::new(a.m, a.j, seed)?)
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(GpError::from)?;
    match path {
        Some(p) => fs::write(p, text + "\n").map_err(|e| Failure::from(GpError::from(e))),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct FitConfig {
    train: String,
    kernel: KernelStructure,
    criterion: Criterion,
    asc: AscConfig,
    restarts: usize,
    inputs: Vec<String>,
    output: String,
    standardize: bool,
}

/// Saved by `fit` and read back by `eval --fit`.
#[derive(Debug, Serialize, Deserialize)]
struct FitReport {
    tool: String,
    version: String,
    seed: u64,
    config: FitConfig,
    n_train: usize,
    skipped_rows: usize,
    input_transform: Option<InputTransform<f64>>,
    result: Option<OptResult>,
    hyperparameters: Option<BTreeMap<String, f64>>,
    failed_partition_fraction: Option<f64>,
    error: Option<String>,
}

fn natural_hyperparameters(k: &KernelSpec) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = k
        .structure()
        .param_names()
        .iter()
        .zip(k.log_params())
        .map(|(n, v)| (n.to_string(), v.exp()))
        .collect();
    out.insert("sn".into(), k.noise_std());
    out
}

fn require_file(path: &Path) -> Result<(), Failure> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::usage(format!("cannot read {}: no such file", path.display())))
    }
}

fn load(path: &Path, cols: &[String], output: &str, standardize: bool) -> Result<LoadedDataset, Failure> {
    Ok(if standardize { load_csv_dataset(path, cols, output)? } else { load_csv_raw(path, cols, output)? })
}

fn fit(ctx: &Ctx, a: FitArgs) -> Result<(), Failure> {
    let kernel = structure(&a.kernel)?;
    let crit = criterion(&a.criterion)?;
    let asc = asc_config(&a.asc, ctx.seed)?;
    if a.restarts == 0 {
        return Err(Failure::usage("--restarts must be ≥ 1"));
    }
    require_file(&a.train)?;
    let cols = input_columns(&a.train, &a.columns)?;
    let loaded = load(&a.train, &cols, &a.columns.output, a.standardize)?;
    ctx.log(format!(
        "loaded {} rows ({} skipped) from {}",
        loaded.dataset.len(),
        loaded.skipped_rows,
        loaded.source
    ));
    let template = GpModel::new(KernelSpec::unit(kernel));
    let spec = ObjectiveSpec::new(crit, asc);
    let outcome = optimize(&spec, &template, &loaded.dataset, a.restarts, ctx.seed);

    let mut report = FitReport {
        tool: TOOL_NAME.into(),
        version: TOOL_VERSION.into(),
        seed: ctx.seed,
        config: FitConfig {
            train: a.train.display().to_string(),
            kernel,
            criterion: crit,
            asc,
            restarts: a.restarts,
            inputs: cols,
            output: a.columns.output.clone(),
            standardize: a.standardize,
        },
        n_train: loaded.dataset.len(),
        skipped_rows: loaded.skipped_rows,
        input_transform: loaded.dataset.input_transform().cloned(),
        result: None,
        hyperparameters: None,
        failed_partition_fraction: None,
        error: None,
    };
    match outcome {
        Ok(res) => {
            ctx.log(format!("{} = {} after {} iterations", crit, res.objective_value, res.iterations));
            report.hyperparameters = Some(natural_hyperparameters(&res.kernel()?));
            report.failed_partition_fraction = res.failed_partition_fraction;
            report.result = Some(res);
            write_json(&report, a.report.as_deref())
        }
        Err(e) if e.is_numerical() => {
            report.error = Some(e.to_string());
            write_json(&report, a.report.as_deref())?;
            Err(e.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn rank(ctx: &Ctx, a: RankArgs) -> Result<(), Failure> {
    let students = a.students.iter().map(|s| structure(s)).collect::<Result<Vec<_>, _>>()?;
    let criteria = a.criteria.iter().map(|s| criterion(s)).collect::<Result<Vec<_>, _>>()?;
    let mut cfg = ExperimentConfig {
        teacher: None,
        students,
        criteria,
        fit_criterion: criterion(&a.fit_criterion)?,
        replicates: a.replicates,
        n_train: a.n_train,
        n_test: a.n_test,
        asc: asc_config(&a.asc, ctx.seed)?,
        restarts: a.restarts,
        seed: ctx.seed,
        ..ExperimentConfig::default()
    };
    let report: RankingReport = match &a.data {
        Some(path) => {
            require_file(path)?;
            let cols = input_columns(path, &a.columns)?;
            let loaded = load_csv_dataset(path, &cols, &a.columns.output)?;
            ctx.log(format!("loaded {} rows ({} skipped)", loaded.dataset.len(), loaded.skipped_rows));
            if loaded.dataset.len() <= cfg.n_train {
                return Err(Failure::usage(format!(
                    "{} usable rows leave no test points with --n-train {}",
                    loaded.dataset.len(),
                    cfg.n_train
                )));
            }
            cfg.validate()?;
            run_real(&cfg, &loaded)?
        }
        None => {
            cfg.teacher = Some(teacher_config(&a.teacher_kernel, a.ell, a.sf, a.sn, a.alpha, a.period)?);
            cfg.validate()?;
            run_synthetic(&cfg)?
        }
    };
    report.write_json(&a.out)?;
    let table = a.table.clone().unwrap_or_else(|| with_suffix(&a.out, "ranks.csv"));
    report.write_rank_table(&table)?;
    if !report.replicate_failures.is_empty() {
        eprintln!("warning: {} of {} replicates failed", report.replicate_failures.len(), cfg.replicates);
    }
    println!("{:<10} {:<6} {:>10} {:>10}", "criterion", "kernel", "mean_rank", "ci95");
    for s in &report.summary {
        println!("{:<10} {:<6} {:>10.3} {:>10.3}", s.criterion, s.kernel.name(), s.mean_rank, s.ci_halfwidth);
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalReport {
    tool: String,
    version: String,
    train: String,
    test: String,
    model: String,
    theta: Option<Vec<f64>>,
    n_train: usize,
    n_test: usize,
    msll: f64,
}

fn transformed(d: &Dataset, t: Option<&InputTransform<f64>>) -> Result<Dataset, Failure> {
    match t {
        Some(t) => {
            if t.shift.len() != d.input_dim() {
                return Err(Failure::usage(format!(
                    "stored transform has {} dimensions, data has {}",
                    t.shift.len(),
                    d.input_dim()
                )));
            }
            Ok(Dataset::new(t.apply(d.x()), d.y().to_vec())?)
        }
        None => Ok(d.clone()),
    }
}

fn eval(_ctx: &Ctx, a: EvalArgs) -> Result<(), Failure> {
    for p in [Some(&a.train), Some(&a.test), a.fit.as_ref()].into_iter().flatten() {
        require_file(p)?;
    }
    let fit_report: Option<FitReport> = match &a.fit {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(GpError::from)?;
            Some(serde_json::from_str(&text).map_err(|e| Failure::usage(format!("invalid fit report {}: {e}", p.display())))?)
        }
        None => None,
    };
    let (cols, output) = match &fit_report {
        Some(r) if a.columns.inputs.is_empty() => (r.config.inputs.clone(), r.config.output.clone()),
        _ => (input_columns(&a.train, &a.columns)?, a.columns.output.clone()),
    };
    let train = load_csv_raw(&a.train, &cols, &output)?.dataset;
    let test = load_csv_raw(&a.test, &cols, &output)?.dataset;

    let (model, label, theta): (Option<GpModel>, String, Option<Vec<f64>>) = if a.baseline {
        (None, "baseline".into(), None)
    } else if let Some(r) = &fit_report {
        let res = r
            .result
            .as_ref()
            .ok_or_else(|| Failure::usage("fit report has no fitted result"))?;
        (Some(GpModel::new(res.kernel()?)), res.structure.to_string(), Some(res.theta.clone()))
    } else if let Some(k) = &a.kernel {
        let spec = KernelSpec::unit(structure(k)?).with_theta(&a.theta)?;
        (Some(GpModel::new(spec)), k.clone(), Some(a.theta.clone()))
    } else {
        return Err(Failure::usage("one of --fit, --kernel with --theta, or --baseline is required"));
    };

    let transform = match &fit_report {
        Some(r) => r.input_transform.clone(),
        None => None,
    };
    let train_t = transformed(&train, transform.as_ref())?;
    let test_t = transformed(&test, transform.as_ref())?;
    if train_t.input_dim() != test_t.input_dim() {
        return Err(Failure::usage("train and test inputs differ in dimension"));
    }
    let predictive = match &model {
        Some(m) => predict(m, &train_t, test_t.x())?,
        None => trivial_predictive(train_t.y(), test_t.len())?,
    };
    let value = msll(&predictive, test_t.y(), train_t.y())?;
    println!("{value}");
    if let Some(path) = &a.report {
        let report = EvalReport {
            tool: TOOL_NAME.into(),
            version: TOOL_VERSION.into(),
            train: a.train.display().to_string(),
            test: a.test.display().to_string(),
            model: label,
            theta,
            n_train: train_t.len(),
            n_test: test_t.len(),
            msll: value,
        };
        write_json(&report, Some(path))?;
    }
    Ok(())
}

