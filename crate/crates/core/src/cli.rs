//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::benchmark::{fit_method, run_benchmarks, BenchmarkConfig, BenchmarkReport, Method, MethodFit};
use crate::dataio::{self, DatasetSpec, ResponseSource, ResponseTransform};
use crate::error::{AatrError, Result};
use crate::fitter::{log_spaced, FitConfig, InitScope};
use crate::grid::{FunctionalDataset, Grid, GridSpec};
use crate::model::ModelFile;
use crate::optimizer::DeSettings;
use crate::ridge::mse;
use crate::simgen::{simulate, BetaShape, Dependence, SimScenario};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Environment variable that replaces `--seed` when set.
pub const SEED_ENV: &str = "AATR_SEED";

#[derive(Debug, Parser)]
#[command(name = "aatr", version, about = "Functional ridge regression shrunk toward adaptive rectangle templates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a simulated dataset.
    Simulate(SimulateArgs),
    /// Fit a model and export it with its cross-validation table and curves.
    Fit(FitArgs),
    /// Predict responses for new curves with a saved model.
    Predict(PredictArgs),
    /// Compare methods by outer cross-validation.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct ScenarioArgs {
    #[arg(long, default_value = "rect1")]
    pub shape: BetaShape,
    #[arg(long, default_value = "independent")]
    pub dependence: Dependence,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub sigma: f64,
    /// AR(1) correlation of the dependent spline coefficients.
    #[arg(long, default_value_t = 0.9)]
    pub rho: f64,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, default_value_t = 200)]
    pub p: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// Wide CSV with columns `[unit,]y,x_1..x_p`.
    #[arg(long, conflicts_with = "curves")]
    pub data: Option<PathBuf>,
    /// Long CSV with columns `unit,time,value`.
    #[arg(long)]
    pub curves: Option<PathBuf>,
    /// `unit,response` CSV for `--curves`.
    #[arg(long, requires = "curves", conflicts_with = "response_column")]
    pub responses: Option<PathBuf>,
    /// Column of the curve file holding the responses.
    #[arg(long, requires = "curves")]
    pub response_column: Option<String>,
    #[arg(long, default_value = "identity")]
    pub response_transform: ResponseTransform,
    #[arg(long, default_value_t = 4)]
    pub min_points: usize,
    /// Drop units whose measurements vary less than this.
    #[arg(long)]
    pub min_variance: Option<f64>,
    /// Grid size for `--curves` input.
    #[arg(long, default_value_t = 200)]
    pub p: usize,
    /// Interval of the grid.
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true, default_values_t = [-1.0, 1.0])]
    pub domain: Vec<f64>,
}

#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct TuningArgs {
    /// Largest number of rectangles.
    #[arg(long = "Q", default_value_t = 3)]
    pub max_q: usize,
    #[arg(long)]
    pub lambda_min: Option<f64>,
    #[arg(long)]
    pub lambda_max: Option<f64>,
    #[arg(long)]
    pub lambda_count: Option<usize>,
    /// Cross-validation folds for hyperparameter selection.
    #[arg(long, default_value_t = 3)]
    pub folds: usize,
    #[arg(long, default_value_t = 5000)]
    pub de_init_budget: usize,
    #[arg(long, default_value_t = 1000)]
    pub de_reshape_budget: usize,
    #[arg(long, default_value_t = 10)]
    pub max_alt_iters: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub rel_improve_tol: f64,
    #[arg(long, default_value = "full")]
    pub init_scope: InitScope,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub jobs: usize,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub tuning: TuningArgs,
    #[arg(long, default_value = "aatr")]
    pub method: Method,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Wide CSV of new curves; a `y` column is ignored.
    #[arg(long)]
    pub data: PathBuf,
    #[arg(short, long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args)]
pub struct BenchmarkArgs {
    #[command(flatten)]
    pub data: DataArgs,
    /// Simulation used when no data file is given.
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Simulated datasets, with seeds `seed, seed + 1, ...`.
    #[arg(long, default_value_t = 1)]
    pub replicates: u64,
    #[command(flatten)]
    pub tuning: TuningArgs,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "aatr,ridge,roughness,mnlstsq")]
    pub method: Vec<Method>,
    #[arg(long, default_value_t = 3)]
    pub outer_folds: usize,
    #[arg(short, long)]
    pub out: PathBuf,
}

/// Provenance record written next to every command's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seeds: BTreeMap<String, u64>,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub version: String,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// SHA-256 of a file as lowercase hex.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| AatrError::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0.0, |d| d.as_secs_f64())
}

struct Run {
    manifest: RunManifest,
    out: PathBuf,
}

impl Run {
    fn start(command: &str, args: &[String], out: &Path) -> Result<Self> {
        std::fs::create_dir_all(out).map_err(|e| AatrError::io(out, e))?;
        Ok(Run {
            manifest: RunManifest {
                command: command.to_string(),
                args: args.to_vec(),
                config: serde_json::Value::Null,
                seeds: BTreeMap::new(),
                started_unix: unix_now(),
                finished_unix: 0.0,
                version: env!("CARGO_PKG_VERSION").to_string(),
                inputs: Vec::new(),
                outputs: Vec::new(),
            },
            out: out.to_path_buf(),
        })
    }

    fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = file_digest(path)?;
        self.manifest.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    fn output(&mut self, name: &str) -> PathBuf {
        self.manifest.outputs.push(name.to_string());
        self.out.join(name)
    }

    fn finish(mut self) -> Result<()> {
        self.manifest.finished_unix = unix_now();
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        dataio::write_text(self.out.join(MANIFEST_FILE), &text)
    }
}

/// Effective seed: `AATR_SEED` when set, otherwise the flag value.
pub fn resolve_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| AatrError::invalid(format!("{SEED_ENV}={v:?} is not an unsigned integer"))),
        Err(_) => Ok(flag),
    }
}

impl TuningArgs {
    /// Fit settings for `method`; the λ grid defaults depend on the penalty.
    pub fn fit_config(&self, method: Method, seed: u64) -> Result<FitConfig> {
        let (lo, hi, count) = match method {
            Method::Roughness => (1e-8, 1e2, 21),
            _ => (1e-4, 1e4, 20),
        };
        Ok(FitConfig {
            max_q: self.max_q,
            lambda_grid: log_spaced(
                self.lambda_min.unwrap_or(lo),
                self.lambda_max.unwrap_or(hi),
                self.lambda_count.unwrap_or(count),
            )?,
            folds: self.folds,
            de_init: DeSettings::with_budget(self.de_init_budget),
            de_reshape: DeSettings::with_budget(self.de_reshape_budget),
            max_alt_iters: self.max_alt_iters,
            rel_improve_tol: self.rel_improve_tol,
            master_seed: seed,
            jobs: self.jobs,
            init_scope: self.init_scope,
        })
    }
}

/// Dataset and row labels read according to the data flags.
pub struct Input {
    pub dataset: FunctionalDataset,
    pub units: Vec<String>,
    pub files: Vec<PathBuf>,
}

impl DataArgs {
    fn given(&self) -> bool {
        self.data.is_some() || self.curves.is_some()
    }

    fn domain(&self) -> (f64, f64) {
        (self.domain[0], self.domain[1])
    }

    pub fn load(&self) -> Result<Input> {
        let (a, b) = self.domain();
        if let Some(path) = &self.data {
            let table = dataio::read_wide_csv(path)?;
            let y = table.y.clone().ok_or_else(|| {
                AatrError::data(format!("{}: no 'y' column", path.display()))
            })?;
            let grid = Grid::new(table.x.ncols(), a, b)?;
            return Ok(Input {
                units: table.unit_labels(),
                dataset: FunctionalDataset::new(grid, table.x, y)?,
                files: vec![path.clone()],
            });
        }
        let curves = self
            .curves
            .clone()
            .ok_or_else(|| AatrError::invalid("give --data or --curves"))?;
        let responses = match (&self.responses, &self.response_column) {
            (Some(p), _) => ResponseSource::File(p.clone()),
            (None, Some(c)) => ResponseSource::Column(c.clone()),
            (None, None) => {
                return Err(AatrError::invalid("--curves needs --responses or --response-column"))
            }
        };
        let mut files = vec![curves.clone()];
        if let ResponseSource::File(p) = &responses {
            files.push(p.clone());
        }
        let mut spec = DatasetSpec::new(curves, responses, GridSpec { p: self.p, a, b });
        spec.min_points_per_unit = self.min_points;
        spec.response_transform = self.response_transform;
        spec.min_variance = self.min_variance;
        let loaded = dataio::load_dataset(&spec)?;
        for ex in &loaded.excluded {
            eprintln!("excluded unit {}: {}", ex.unit_id, ex.reason);
        }
        Ok(Input {
            dataset: loaded.dataset,
            units: loaded.units,
            files,
        })
    }
}

/// Map an error to its exit code.
pub fn exit_code(err: &AatrError) -> i32 {
    match err {
        AatrError::InvalidArgument(_) => EXIT_USAGE,
        AatrError::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_DATA,
    }
}

/// Parse `args` (program name first), run the command and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let argv: Vec<String> = args.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    match execute(cli.command, &argv) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn execute(command: Command, argv: &[String]) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a, argv),
        Command::Fit(a) => cmd_fit(&a, argv),
        Command::Predict(a) => cmd_predict(&a, argv),
        Command::Benchmark(a) => cmd_benchmark(&a, argv),
    }
}

fn scenario(args: &ScenarioArgs, p: usize, seed: u64) -> SimScenario {
    SimScenario {
        n: args.n,
        p,
        dependence: args.dependence,
        beta_shape: args.shape,
        noise_sd: args.sigma,
        rho: args.rho,
        seed,
    }
}

pub fn cmd_simulate(args: &SimulateArgs, argv: &[String]) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let scn = scenario(&args.scenario, args.p, seed);
    scn.validate()?;
    let mut run = Run::start("simulate", argv, &args.out)?;
    let sim = simulate(&scn)?;
    let ds = &sim.dataset;
    dataio::write_wide_csv(run.output("data.csv"), None, ds.x(), Some(ds.y()))?;
    dataio::write_columns(run.output("true_beta.csv"), &["t", "beta"], &[ds.grid().points(), &sim.true_beta])?;
    run.manifest.config = serde_json::to_value(&scn)?;
    run.manifest.seeds.insert("seed".into(), seed);
    println!("wrote {} observations on {} grid points to {}", ds.n(), ds.p(), args.out.display());
    run.finish()
}

fn cv_rows(fit: &MethodFit, cfg: &FitConfig) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (mut q, mut lambda, mut err) = (Vec::new(), Vec::new(), Vec::new());
    if let Some(res) = &fit.aatr {
        for (qi, row) in res.cv_table.iter().enumerate() {
            for (m, v) in row.iter().enumerate() {
                q.push((qi + 1) as f64);
                lambda.push(res.lambda_grid[m]);
                err.push(*v);
            }
        }
    } else {
        for (m, v) in fit.cv_errors.iter().enumerate() {
            q.push(0.0);
            lambda.push(cfg.lambda_grid[m]);
            err.push(*v);
        }
    }
    (q, lambda, err)
}

pub fn cmd_fit(args: &FitArgs, argv: &[String]) -> Result<()> {
    let seed = resolve_seed(args.tuning.seed)?;
    let cfg = args.tuning.fit_config(args.method, seed)?;
    let input = args.data.load()?;
    let mut run = Run::start("fit", argv, &args.out)?;
    for f in &input.files {
        run.input(f)?;
    }
    let fit = fit_method(&input.dataset, args.method, &cfg)?;
    let model = ModelFile::from_fit(&fit);
    model.save(run.output("model.json"))?;

    let (q, lambda, err) = cv_rows(&fit, &cfg);
    dataio::write_columns(run.output("cv_table.csv"), &["q", "lambda", "cv_mse"], &[&q, &lambda, &err])?;
    let grid = input.dataset.grid();
    dataio::write_columns(
        run.output("curves.csv"),
        &["t", "beta", "gamma", "beta_raw"],
        &[grid.points(), &fit.fit.beta, &fit.fit.gamma, &fit.fit.raw_beta()],
    )?;

    let fitted = fit.predict(input.dataset.x())?;
    let train_mse = mse(fitted.as_slice(), input.dataset.y().as_slice())?;
    run.manifest.config = json!({
        "method": args.method,
        "fit": cfg,
        "data": args.data,
    });
    run.manifest.seeds.insert("master_seed".into(), seed);
    match args.method {
        Method::Aatr => println!("q* = {}  lambda* = {}  train MSE = {train_mse}", model.q, model.lambda),
        Method::Mnlstsq => println!("train MSE = {train_mse}"),
        _ => println!("lambda* = {}  train MSE = {train_mse}", model.lambda),
    }
    run.finish()
}

pub fn cmd_predict(args: &PredictArgs, argv: &[String]) -> Result<()> {
    let model = ModelFile::load(&args.model)?;
    let fit = model.to_fit()?;
    let table = dataio::read_wide_csv(&args.data)?;
    let p = fit.beta.len();
    let x = if table.x.nrows() == 0 {
        DMatrix::zeros(0, p)
    } else {
        table.x.clone()
    };
    if table.x.ncols() != p {
        return Err(AatrError::data(format!(
            "{} has p = {} grid columns but the model was fit with p = {p}",
            args.data.display(),
            table.x.ncols()
        )));
    }
    let mut run = Run::start("predict", argv, &args.out)?;
    run.input(&args.model)?;
    run.input(&args.data)?;
    let pred = fit.predict(&x)?;
    dataio::write_predictions(run.output("predictions.csv"), &table.unit_labels(), pred.as_slice())?;
    run.manifest.config = json!({ "model": args.model, "data": args.data });
    println!("wrote {} prediction(s)", pred.len());
    run.finish()
}

fn stats(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

pub fn cmd_benchmark(args: &BenchmarkArgs, argv: &[String]) -> Result<()> {
    let seed = resolve_seed(args.tuning.seed)?;
    if args.method.is_empty() {
        return Err(AatrError::invalid("no methods requested"));
    }
    let mut run = Run::start("benchmark", argv, &args.out)?;
    let (datasets, seeds): (Vec<FunctionalDataset>, Vec<u64>) = if args.data.given() {
        let input = args.data.load()?;
        for f in &input.files {
            run.input(f)?;
        }
        (vec![input.dataset], vec![seed])
    } else {
        if args.replicates == 0 {
            return Err(AatrError::invalid("--replicates must be at least 1"));
        }
        let seeds: Vec<u64> = (0..args.replicates).map(|r| seed.wrapping_add(r)).collect();
        let ds = seeds
            .iter()
            .map(|&s| {
                let scn = scenario(&args.scenario, args.data.p, s);
                scn.validate()?;
                Ok(simulate(&scn)?.dataset)
            })
            .collect::<Result<Vec<_>>>()?;
        (ds, seeds)
    };

    // The unregularized reference is always reported.
    let mut methods = args.method.clone();
    if !methods.contains(&Method::Mnlstsq) {
        methods.push(Method::Mnlstsq);
    }
    let mut cfg = BenchmarkConfig {
        methods: methods.clone(),
        outer_folds: args.outer_folds,
        fit: args.tuning.fit_config(Method::Ridge, seed)?,
        roughness_lambda_grid: args.tuning.fit_config(Method::Roughness, seed)?.lambda_grid,
    };
    // Each replicate keeps its own seed so that results do not depend on
    // how many replicates run together.
    let reports: Vec<BenchmarkReport> = datasets
        .iter()
        .zip(&seeds)
        .map(|(ds, &s)| {
            cfg.fit.master_seed = s;
            run_benchmarks(std::slice::from_ref(ds), &cfg).map(|mut v| v.remove(0))
        })
        .collect::<Result<_>>()?;
    cfg.fit.master_seed = seed;

    let mut rows = Vec::new();
    let mut header = vec!["replicate".to_string(), "seed".into(), "method".into(), "mean".into(), "sd".into()];
    header.extend((1..=args.outer_folds).map(|k| format!("fold_{k}")));
    rows.push(header);
    for (r, (rep, s)) in reports.iter().zip(&seeds).enumerate() {
        for sc in &rep.scores {
            let mut row = vec![r.to_string(), s.to_string(), sc.method.to_string(), sc.mean.to_string(), sc.sd.to_string()];
            row.extend(sc.fold_mse.iter().map(f64::to_string));
            rows.push(row);
        }
    }
    write_rows(&run.output("results.csv"), &rows)?;

    let mut summary = vec![vec!["method".to_string(), "mean".into(), "sd".into(), "replicates".into()]];
    println!("{:<10} {:>12} {:>12}", "method", "mean MSE", "sd");
    for &m in &methods {
        let per: Vec<f64> = reports.iter().filter_map(|r| r.score(m)).map(|s| s.mean).collect();
        let (mean, sd) = if per.len() == 1 {
            let s = reports[0].score(m).expect("method was run");
            (s.mean, s.sd)
        } else {
            stats(&per)
        };
        println!("{:<10} {:>12.4} {:>12.4}", m.name(), mean, sd);
        summary.push(vec![m.to_string(), mean.to_string(), sd.to_string(), per.len().to_string()]);
    }
    write_rows(&run.output("summary.csv"), &summary)?;

    run.manifest.config = json!({
        "benchmark": cfg,
        "data": args.data,
        "scenario": (!args.data.given()).then_some(&args.scenario),
        "replicates": seeds.len(),
    });
    run.manifest.seeds.insert("master_seed".into(), seed);
    for (r, s) in seeds.iter().enumerate() {
        run.manifest.seeds.insert(format!("replicate_{r}"), *s);
    }
    run.finish()
}

fn write_rows(path: &Path, rows: &[Vec<String>]) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| AatrError::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|e| AatrError::io(path, e))
}
