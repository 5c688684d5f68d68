//! Cross-validated fitting of the template-shrunk ridge model.
//!
//! 1. For every `q ≤ Q`, fit an initial template to the full (standardized)
//!    data with the hard-constrained problem.
//! 2. For every fold and every `(q, λ)` cell, solve the centered ridge with
//!    the initial template, then alternate template reshaping and ridge
//!    re-solves while the training error keeps dropping; score the result on
//!    the held-out fold.
//! 3. Pick the cell with the lowest mean validation error and repeat the
//!    alternating refinement on the full data.
//!
//! Every cell draws its randomness from `mix(master_seed, fold, q, m)`, so
//! the cross-validation table does not depend on how cells are scheduled.

use nalgebra::DMatrix;
use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AatrError, Result};
use crate::grid::{FunctionalDataset, Grid};
use crate::optimizer::{DeSettings, TemplateObjective};
use crate::ridge::{mse_unchecked, RidgeFit, RidgeSystem};
use crate::seeding::mix;
use crate::template::Template;

const STREAM_INIT: u64 = 1;
const STREAM_CELL: u64 = 2;
const STREAM_FOLDS: u64 = 3;
const STREAM_REFIT: u64 = 4;
const STREAM_FOLD_INIT: u64 = 5;

/// `count` log-spaced values from `min` to `max` inclusive.
pub fn log_spaced(min: f64, max: f64, count: usize) -> Result<Vec<f64>> {
    if !(min > 0.0 && max >= min && max.is_finite()) || count == 0 {
        return Err(AatrError::invalid(format!(
            "log grid needs 0 < min <= max and count >= 1, got ({min}, {max}, {count})"
        )));
    }
    if count == 1 {
        return Ok(vec![min]);
    }
    let (lo, hi) = (min.ln(), max.ln());
    Ok((0..count)
        .map(|k| (lo + (hi - lo) * k as f64 / (count - 1) as f64).exp())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Largest number of rectangles tried.
    pub max_q: usize,
    pub lambda_grid: Vec<f64>,
    pub folds: usize,
    pub de_init: DeSettings,
    pub de_reshape: DeSettings,
    pub max_alt_iters: usize,
    pub rel_improve_tol: f64,
    pub master_seed: u64,
    /// Worker threads for the cell grid; 0 uses all available cores.
    pub jobs: usize,
    /// Data used for the initial templates of the cross-validation cells.
    pub init_scope: InitScope,
}

/// Where the cross-validation cells take their initial templates from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScope {
    /// One set of templates fit on all observations, shared by every fold.
    #[default]
    Full,
    /// Templates refit on each training split.
    PerFold,
}

impl std::str::FromStr for InitScope {
    type Err = AatrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(InitScope::Full),
            "per-fold" => Ok(InitScope::PerFold),
            other => Err(AatrError::invalid(format!(
                "unknown init scope '{other}' (expected full or per-fold)"
            ))),
        }
    }
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            max_q: 3,
            lambda_grid: log_spaced(1e-4, 1e4, 20).expect("static grid"),
            folds: 3,
            de_init: DeSettings::with_budget(5000),
            de_reshape: DeSettings::with_budget(1000),
            max_alt_iters: 10,
            rel_improve_tol: 1e-3,
            master_seed: 0,
            jobs: 0,
            init_scope: InitScope::Full,
        }
    }
}

impl FitConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.max_q == 0 {
            return Err(AatrError::invalid("Q must be at least 1"));
        }
        if self.lambda_grid.is_empty() {
            return Err(AatrError::invalid("lambda grid is empty"));
        }
        if self.lambda_grid.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(AatrError::invalid("lambda grid must be strictly positive"));
        }
        if self.lambda_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(AatrError::invalid("lambda grid must be sorted ascending"));
        }
        check_folds(n, self.folds)?;
        if self.max_alt_iters == 0 {
            return Err(AatrError::invalid("max_alt_iters must be at least 1"));
        }
        if !(self.rel_improve_tol > 0.0) {
            return Err(AatrError::invalid("rel_improve_tol must be positive"));
        }
        Ok(())
    }

    pub(crate) fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.jobs)
            .build()
            .map_err(|e| AatrError::invalid(format!("cannot start worker pool: {e}")))
    }
}

fn check_folds(n: usize, k: usize) -> Result<()> {
    if k < 2 || k > n {
        return Err(AatrError::invalid(format!(
            "fold count must satisfy 2 <= K <= N, got K={k}, N={n}"
        )));
    }
    Ok(())
}

/// Shuffle `0..n` and deal it into `k` folds whose sizes differ by at most one.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    check_folds(n, k)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut fold = idx[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(folds)
}

/// Indices of all folds except `held_out`.
pub fn training_indices(folds: &[Vec<usize>], held_out: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = folds
        .iter()
        .enumerate()
        .filter(|(f, _)| *f != held_out)
        .flat_map(|(_, v)| v.iter().copied())
        .collect();
    idx.sort_unstable();
    idx
}

/// One accepted state of the alternating refinement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub train_mse: f64,
    pub template: Template,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Refinement {
    pub fit: RidgeFit,
    pub template: Template,
    /// Accepted states, starting with the ridge solve on the input template.
    pub trace: Vec<TraceStep>,
    /// Reshape attempts made, including the rejected final one.
    pub attempts: usize,
}

impl Refinement {
    /// Number of accepted reshape iterations.
    pub fn accepted_iterations(&self) -> usize {
        self.trace.len() - 1
    }
}

/// Fit `q = 1..=Q` initial templates on a standardized dataset.
pub fn init_templates(ds: &FunctionalDataset, cfg: &FitConfig) -> Result<Vec<Template>> {
    if !ds.is_standardized() {
        return Err(AatrError::NotStandardized);
    }
    let obj = TemplateObjective::init(ds);
    let pool = cfg.pool()?;
    pool.install(|| {
        (1..=cfg.max_q)
            .into_par_iter()
            .map(|q| {
                let seed = mix(&[cfg.master_seed, STREAM_INIT, q as u64]);
                obj.minimize(q, &cfg.de_init, seed, None)?.to_template(ds.grid())
            })
            .collect()
    })
}

/// Alternate reshape and ridge solves starting from `gamma`, keeping only
/// iterations that lower the training MSE by more than the relative
/// tolerance.
pub fn alternate_refine(ds: &FunctionalDataset, gamma: &Template, lambda: f64, cfg: &FitConfig, seed: u64) -> Result<Refinement> {
    let system = RidgeSystem::new(ds)?;
    refine_with(&system, ds, gamma, lambda, cfg, seed)
}

fn refine_with(
    system: &RidgeSystem,
    ds: &FunctionalDataset,
    gamma: &Template,
    lambda: f64,
    cfg: &FitConfig,
    seed: u64,
) -> Result<Refinement> {
    let grid = ds.grid();
    let mut fit = system.solve(&gamma.eval(grid), lambda)?;
    let mut template = gamma.clone();
    let mut loss = system.train_mse(&fit);
    let mut trace = vec![TraceStep {
        train_mse: loss,
        template: template.clone(),
    }];
    let mut attempts = 0;
    while attempts < cfg.max_alt_iters {
        attempts += 1;
        let obj = TemplateObjective::reshape(ds, &fit.beta, lambda)?;
        let sol = obj.minimize(
            template.q(),
            &cfg.de_reshape,
            mix(&[seed, attempts as u64]),
            Some(&template),
        )?;
        let candidate = sol.to_template(grid)?;
        let new_fit = system.solve(&candidate.eval(grid), lambda)?;
        let new_loss = system.train_mse(&new_fit);
        if new_loss < loss * (1.0 - cfg.rel_improve_tol) {
            fit = new_fit;
            template = candidate;
            loss = new_loss;
            trace.push(TraceStep {
                train_mse: loss,
                template: template.clone(),
            });
        } else {
            break;
        }
    }
    Ok(Refinement {
        fit,
        template,
        trace,
        attempts,
    })
}

/// Summary of one `(fold, q, λ)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub fold: usize,
    pub q: usize,
    pub lambda_index: usize,
    pub validation_mse: f64,
    pub train_losses: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub fit: RidgeFit,
    pub gamma_star: Template,
    pub q_star: usize,
    pub lambda_star: f64,
    pub lambda_grid: Vec<f64>,
    /// Mean validation MSE, indexed `[q - 1][m]`.
    pub cv_table: Vec<Vec<f64>>,
    pub init_templates: Vec<Template>,
    /// Refinement trace of the final refit.
    pub trace: Vec<TraceStep>,
    pub cells: Vec<CellReport>,
}

impl FitResult {
    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.fit.predict(x_new)
    }
}

/// Index of the minimum, ties broken by smaller `q` then larger `λ`.
pub fn select_cell(cv_table: &[Vec<f64>]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize, f64)> = None;
    for (qi, row) in cv_table.iter().enumerate() {
        for m in (0..row.len()).rev() {
            let v = row[m];
            if v.is_nan() {
                continue;
            }
            if best.is_none_or(|(_, _, b)| v < b) {
                best = Some((qi, m, v));
            }
        }
    }
    best.map(|(q, m, _)| (q, m))
}

struct FoldData {
    train: FunctionalDataset,
    system: RidgeSystem,
    val_x: DMatrix<f64>,
    val_y: Vec<f64>,
}

/// Standardize the training part of a split and keep the raw validation part.
fn prepare_fold(raw: &FunctionalDataset, train_idx: &[usize], val_idx: &[usize]) -> Result<FoldData> {
    let train = raw.subset(train_idx)?.standardize()?;
    let system = RidgeSystem::new(&train)?;
    Ok(FoldData {
        train,
        system,
        val_x: raw.x().select_rows(val_idx),
        val_y: val_idx.iter().map(|&i| raw.y()[i]).collect(),
    })
}

/// Fit the model on raw curves `x` (one row per observation) and responses `y`.
pub fn fit_aatr(x: &DMatrix<f64>, y: &DVector<f64>, grid: &Grid, cfg: &FitConfig) -> Result<FitResult> {
    let raw = FunctionalDataset::new(grid.clone(), x.clone(), y.clone())?;
    fit_dataset(&raw, cfg)
}

/// [`fit_aatr`] on an unstandardized dataset.
pub fn fit_dataset(raw: &FunctionalDataset, cfg: &FitConfig) -> Result<FitResult> {
    if raw.is_standardized() {
        return Err(AatrError::AlreadyStandardized);
    }
    let n = raw.n();
    cfg.validate(n)?;
    let full = raw.standardize()?;
    let init = init_templates(&full, cfg)?;

    let folds = kfold_split(n, cfg.folds, mix(&[cfg.master_seed, STREAM_FOLDS]))?;
    let fold_data: Vec<FoldData> = (0..cfg.folds)
        .map(|k| prepare_fold(raw, &training_indices(&folds, k), &folds[k]))
        .collect::<Result<_>>()?;

    let fold_init: Vec<Vec<Template>> = match cfg.init_scope {
        InitScope::Full => Vec::new(),
        InitScope::PerFold => fold_data
            .iter()
            .enumerate()
            .map(|(k, fd)| {
                let mut sub = cfg.clone();
                sub.master_seed = mix(&[cfg.master_seed, STREAM_FOLD_INIT, k as u64]);
                init_templates(&fd.train, &sub)
            })
            .collect::<Result<_>>()?,
    };

    let m_count = cfg.lambda_grid.len();
    let cells: Vec<(usize, usize, usize)> = (0..cfg.folds)
        .flat_map(|k| (0..cfg.max_q).flat_map(move |qi| (0..m_count).map(move |m| (k, qi, m))))
        .collect();

    let pool = cfg.pool()?;
    let reports: Vec<CellReport> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(k, qi, m)| {
                let fd = &fold_data[k];
                let seed = mix(&[cfg.master_seed, STREAM_CELL, k as u64, qi as u64 + 1, m as u64]);
                let start = match cfg.init_scope {
                    InitScope::Full => &init[qi],
                    InitScope::PerFold => &fold_init[k][qi],
                };
                let refined = refine_with(&fd.system, &fd.train, start, cfg.lambda_grid[m], cfg, seed)?;
                let pred = refined.fit.predict(&fd.val_x)?;
                Ok(CellReport {
                    fold: k,
                    q: qi + 1,
                    lambda_index: m,
                    validation_mse: mse_unchecked(pred.as_slice(), &fd.val_y),
                    train_losses: refined.trace.iter().map(|s| s.train_mse).collect(),
                })
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut cv_table = vec![vec![0.0; m_count]; cfg.max_q];
    for r in &reports {
        cv_table[r.q - 1][r.lambda_index] += r.validation_mse / cfg.folds as f64;
    }
    let (qi, m) = select_cell(&cv_table)
        .ok_or_else(|| AatrError::Numerical("every cross-validation cell is NaN".into()))?;

    let refined = alternate_refine(
        &full,
        &init[qi],
        cfg.lambda_grid[m],
        cfg,
        mix(&[cfg.master_seed, STREAM_REFIT]),
    )?;
    Ok(FitResult {
        fit: refined.fit,
        gamma_star: refined.template,
        q_star: qi + 1,
        lambda_star: cfg.lambda_grid[m],
        lambda_grid: cfg.lambda_grid.clone(),
        cv_table,
        init_templates: init,
        trace: refined.trace,
        cells: reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kfold_even_split() {
        let folds = kfold_split(6, 3, 1).unwrap();
        assert!(folds.iter().all(|f| f.len() == 2));
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn kfold_uneven_split() {
        let folds = kfold_split(5, 3, 1).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1, 2, 2]);
    }

    #[test]
    fn kfold_deterministic_and_checked() {
        assert_eq!(kfold_split(50, 5, 9).unwrap(), kfold_split(50, 5, 9).unwrap());
        assert_ne!(kfold_split(50, 5, 9).unwrap(), kfold_split(50, 5, 10).unwrap());
        assert!(kfold_split(5, 1, 0).is_err());
        assert!(kfold_split(5, 6, 0).is_err());
    }

    #[test]
    fn training_indices_complement() {
        let folds = vec![vec![0, 3], vec![1, 4], vec![2]];
        assert_eq!(training_indices(&folds, 1), vec![0, 2, 3]);
    }

    #[test]
    fn selection_tie_breaks() {
        let table = vec![vec![2.0, 1.0, 1.0], vec![1.0, 3.0, 3.0]];
        assert_eq!(select_cell(&table), Some((0, 2)));
        let table = vec![vec![2.0, 1.5], vec![1.0, 1.0]];
        assert_eq!(select_cell(&table), Some((1, 1)));
    }

    #[test]
    fn log_grid_endpoints() {
        let g = log_spaced(1e-4, 1e4, 20).unwrap();
        assert_eq!(g.len(), 20);
        assert!((g[0] - 1e-4).abs() < 1e-16 && (g[19] - 1e4).abs() < 1e-8);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
        assert!(log_spaced(0.0, 1.0, 3).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = FitConfig::default();
        assert!(cfg.validate(100).is_ok());
        assert!(cfg.validate(2).is_err());
        cfg.lambda_grid = vec![1.0, 0.5];
        assert!(cfg.validate(100).is_err());
        cfg.lambda_grid = vec![];
        assert!(cfg.validate(100).is_err());
    }
}
