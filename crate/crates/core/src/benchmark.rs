//! Outer cross-validation comparing the template method with the baselines.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AatrError, Result};
use crate::fitter::{fit_dataset, kfold_split, select_cell, training_indices, FitConfig, FitResult};
use crate::grid::FunctionalDataset;
use crate::ridge::{mse_unchecked, RidgeFit, RidgeSystem, RoughnessSystem};
use crate::seeding::mix;
use crate::template::Template;

const STREAM_OUTER: u64 = 11;
const STREAM_INNER: u64 = 12;
const STREAM_METHOD: u64 = 13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Aatr,
    Ridge,
    Roughness,
    Mnlstsq,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Aatr, Method::Ridge, Method::Roughness, Method::Mnlstsq];

    pub fn name(self) -> &'static str {
        match self {
            Method::Aatr => "aatr",
            Method::Ridge => "ridge",
            Method::Roughness => "roughness",
            Method::Mnlstsq => "mnlstsq",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = AatrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "aatr" => Ok(Method::Aatr),
            "ridge" => Ok(Method::Ridge),
            "roughness" => Ok(Method::Roughness),
            "mnlstsq" => Ok(Method::Mnlstsq),
            other => Err(AatrError::invalid(format!(
                "unknown method '{other}' (expected aatr, ridge, roughness or mnlstsq)"
            ))),
        }
    }
}

/// A fitted model of any method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFit {
    pub method: Method,
    pub fit: RidgeFit,
    /// Shrinkage template (template method only).
    pub template: Option<Template>,
    /// Mean validation MSE per λ for the baselines with a λ search.
    pub cv_errors: Vec<f64>,
    /// Full result of the template method.
    pub aatr: Option<FitResult>,
}

impl MethodFit {
    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<nalgebra::DVector<f64>> {
        self.fit.predict(x_new)
    }
}

/// Fit `method` on an unstandardized dataset, selecting `λ` by K-fold CV
/// where the method has one.
pub fn fit_method(raw: &FunctionalDataset, method: Method, cfg: &FitConfig) -> Result<MethodFit> {
    match method {
        Method::Aatr => {
            let res = fit_dataset(raw, cfg)?;
            Ok(MethodFit {
                method,
                fit: res.fit.clone(),
                template: Some(res.gamma_star.clone()),
                cv_errors: Vec::new(),
                aatr: Some(res),
            })
        }
        Method::Mnlstsq => {
            let full = raw.standardize()?;
            Ok(MethodFit {
                method,
                fit: RidgeSystem::new(&full)?.min_norm()?,
                template: None,
                cv_errors: Vec::new(),
                aatr: None,
            })
        }
        Method::Ridge | Method::Roughness => {
            cfg.validate(raw.n())?;
            let cv_errors = baseline_cv(raw, method, cfg)?;
            let (_, m) = select_cell(std::slice::from_ref(&cv_errors))
                .ok_or_else(|| AatrError::Numerical("every cross-validation cell is NaN".into()))?;
            let full = raw.standardize()?;
            let fit = solve_baseline(&full, method, cfg.lambda_grid[m])?;
            Ok(MethodFit {
                method,
                fit,
                template: None,
                cv_errors,
                aatr: None,
            })
        }
    }
}

fn solve_baseline(train: &FunctionalDataset, method: Method, lambda: f64) -> Result<RidgeFit> {
    match method {
        Method::Ridge => RidgeSystem::new(train)?.solve(&vec![0.0; train.p()], lambda),
        Method::Roughness => RoughnessSystem::new(train)?.solve(lambda),
        _ => unreachable!("not a λ-search baseline"),
    }
}

fn baseline_cv(raw: &FunctionalDataset, method: Method, cfg: &FitConfig) -> Result<Vec<f64>> {
    let folds = kfold_split(raw.n(), cfg.folds, mix(&[cfg.master_seed, STREAM_INNER]))?;
    let m_count = cfg.lambda_grid.len();
    let mut errors = vec![0.0; m_count];
    for k in 0..cfg.folds {
        let train = raw.subset(&training_indices(&folds, k))?.standardize()?;
        let val_x = raw.x().select_rows(&folds[k]);
        let val_y: Vec<f64> = folds[k].iter().map(|&i| raw.y()[i]).collect();
        let fits: Vec<RidgeFit> = match method {
            Method::Ridge => {
                let sys = RidgeSystem::new(&train)?;
                let zero = vec![0.0; train.p()];
                cfg.lambda_grid.iter().map(|&l| sys.solve(&zero, l)).collect::<Result<_>>()?
            }
            _ => {
                let sys = RoughnessSystem::new(&train)?;
                cfg.lambda_grid.iter().map(|&l| sys.solve(l)).collect::<Result<_>>()?
            }
        };
        for (m, fit) in fits.iter().enumerate() {
            let pred = fit.predict(&val_x)?;
            errors[m] += mse_unchecked(pred.as_slice(), &val_y) / cfg.folds as f64;
        }
    }
    Ok(errors)
}

/// Settings of an outer cross-validation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub methods: Vec<Method>,
    pub outer_folds: usize,
    /// Inner (hyperparameter) settings; `fit.folds` is the inner fold count.
    pub fit: FitConfig,
    /// λ grid of the roughness baseline (its penalty has a different scale).
    pub roughness_lambda_grid: Vec<f64>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            methods: Method::ALL.to_vec(),
            outer_folds: 3,
            fit: FitConfig::default(),
            roughness_lambda_grid: crate::fitter::log_spaced(1e-8, 1e2, 21).expect("static grid"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: Method,
    pub fold_mse: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation over folds.
    pub sd: f64,
    /// Accepted-iteration traces of every template-method fit (all cells and
    /// the final refits), empty for baselines.
    pub train_traces: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub scores: Vec<MethodScore>,
}

impl BenchmarkReport {
    pub fn score(&self, method: Method) -> Option<&MethodScore> {
        self.scores.iter().find(|s| s.method == method)
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let sd = if v.len() > 1 {
        (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

/// Outer K-fold test error of every method, with nested hyperparameter
/// selection inside each training split.
pub fn run_benchmark(raw: &FunctionalDataset, cfg: &BenchmarkConfig) -> Result<BenchmarkReport> {
    if cfg.methods.is_empty() {
        return Err(AatrError::invalid("no methods requested"));
    }
    let outer = kfold_split(raw.n(), cfg.outer_folds, mix(&[cfg.fit.master_seed, STREAM_OUTER]))?;
    let mut scores: Vec<MethodScore> = cfg
        .methods
        .iter()
        .map(|&method| MethodScore {
            method,
            fold_mse: Vec::new(),
            mean: 0.0,
            sd: 0.0,
            train_traces: Vec::new(),
        })
        .collect();

    for k in 0..cfg.outer_folds {
        let train = raw.subset(&training_indices(&outer, k))?;
        let test_x = raw.x().select_rows(&outer[k]);
        let test_y: Vec<f64> = outer[k].iter().map(|&i| raw.y()[i]).collect();
        for score in scores.iter_mut() {
            let mut inner = cfg.fit.clone();
            inner.master_seed = mix(&[cfg.fit.master_seed, STREAM_METHOD, k as u64]);
            if score.method == Method::Roughness {
                inner.lambda_grid = cfg.roughness_lambda_grid.clone();
            }
            let fitted = fit_method(&train, score.method, &inner)?;
            let pred = fitted.predict(&test_x)?;
            score.fold_mse.push(mse_unchecked(pred.as_slice(), &test_y));
            if let Some(res) = &fitted.aatr {
                score
                    .train_traces
                    .extend(res.cells.iter().map(|c| c.train_losses.clone()));
                score
                    .train_traces
                    .push(res.trace.iter().map(|s| s.train_mse).collect());
            }
        }
    }
    for s in scores.iter_mut() {
        let (mean, sd) = mean_sd(&s.fold_mse);
        s.mean = mean;
        s.sd = sd;
    }
    Ok(BenchmarkReport { scores })
}

/// Run several independent benchmarks (e.g. scenario seeds) on the worker pool.
pub fn run_benchmarks(datasets: &[FunctionalDataset], cfg: &BenchmarkConfig) -> Result<Vec<BenchmarkReport>> {
    let pool = cfg.fit.pool()?;
    pool.install(|| datasets.par_iter().map(|ds| run_benchmark(ds, cfg)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("lasso".parse::<Method>().is_err());
    }

    #[test]
    fn mean_and_sd() {
        let (m, s) = mean_sd(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
        assert_eq!(mean_sd(&[4.0]), (4.0, 0.0));
    }
}
