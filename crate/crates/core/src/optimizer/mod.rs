//! Template search: differential evolution over rectangle centers and widths
//! with the heights recovered in closed form at every candidate.
//!
//! A candidate is packed as `[t0_1, .., t0_q, T_1, .., T_q]`. Centers range
//! over the whole domain and widths over `[2 dt, b - a]`, so every rectangle
//! covers at least one grid cell.

pub mod de;
pub mod heights;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use de::{de_minimize, DeConfig, DeResult};
pub use heights::{closed_form_heights_init, closed_form_heights_reshape};

use crate::error::{AatrError, Result};
use crate::grid::{FunctionalDataset, Grid};
use crate::template::{overlap_gram_unchecked, support_cells, PrefixSums, RowPrefixSums, Template};

/// DE knobs that do not depend on the problem (bounds and seed are filled in
/// per run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeSettings {
    /// `None` means `max(20, 10 * dim)`.
    pub population_size: Option<usize>,
    pub mutation_range: (f64, f64),
    pub crossover_rate: f64,
    pub eval_budget: usize,
}

impl DeSettings {
    pub fn with_budget(eval_budget: usize) -> Self {
        DeSettings {
            population_size: None,
            mutation_range: (0.5, 1.0),
            crossover_rate: 0.9,
            eval_budget,
        }
    }

    pub fn to_config(&self, bounds: Vec<(f64, f64)>, seed: u64) -> DeConfig {
        let mut cfg = DeConfig::new(bounds, self.eval_budget, seed);
        if let Some(np) = self.population_size {
            cfg.population_size = np;
        }
        cfg.mutation_range = self.mutation_range;
        cfg.crossover_rate = self.crossover_rate;
        // a tiny budget still gets one full population
        cfg.eval_budget = cfg.eval_budget.max(cfg.population_size);
        cfg
    }
}

/// Search box for `q` rectangles on `grid`.
pub fn template_bounds(grid: &Grid, q: usize) -> Vec<(f64, f64)> {
    let min_width = (2.0 * grid.dt()).min(grid.length());
    let mut bounds = vec![(grid.a(), grid.b()); q];
    bounds.extend(std::iter::repeat_n((min_width, grid.length()), q));
    bounds
}

/// Best template found by a search, with its heights and objective value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateSolution {
    pub centers: Vec<f64>,
    pub widths: Vec<f64>,
    pub heights: Vec<f64>,
    pub objective: f64,
    pub evaluations: usize,
}

impl TemplateSolution {
    pub fn q(&self) -> usize {
        self.centers.len()
    }

    pub fn to_template(&self, grid: &Grid) -> Result<Template> {
        Template::from_parts(&self.heights, &self.centers, &self.widths, grid)
    }
}

#[derive(Debug, Clone)]
struct ReshapePenalty {
    beta: PrefixSums,
    beta_sq: f64,
    lambda: f64,
}

/// The template objective at fixed `(centers, widths)`, minimized over heights.
///
/// Without a penalty this is the hard-constrained least-squares problem
/// `Σ_i (y_i - ȳ - ∫ x_i γ)²`. With a penalty it adds
/// `λ ∫ (β̃ - γ)²`, where the `γ`-`γ` part uses the exact overlap Gram matrix
/// and the `β̃` parts use grid quadrature.
#[derive(Debug, Clone)]
pub struct TemplateObjective {
    grid: Grid,
    x_prefix: RowPrefixSums,
    y_centered: DVector<f64>,
    penalty: Option<ReshapePenalty>,
}

impl TemplateObjective {
    /// Objective of the initialization problem.
    pub fn init(ds: &FunctionalDataset) -> Self {
        TemplateObjective {
            grid: ds.grid().clone(),
            x_prefix: RowPrefixSums::new(ds.x()),
            y_centered: ds.y_centered(),
            penalty: None,
        }
    }

    /// Objective of the reshape problem around the current coefficient
    /// function `beta_tilde`.
    pub fn reshape(ds: &FunctionalDataset, beta_tilde: &[f64], lambda: f64) -> Result<Self> {
        ds.grid().check_len("beta_tilde", beta_tilde.len())?;
        if beta_tilde.iter().any(|v| !v.is_finite()) {
            return Err(AatrError::invalid("beta_tilde contains non-finite values"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(AatrError::invalid(format!(
                "lambda must be positive and finite, got {lambda}"
            )));
        }
        let beta_sq = ds.grid().dt() * beta_tilde.iter().map(|b| b * b).sum::<f64>();
        let mut obj = TemplateObjective::init(ds);
        obj.penalty = Some(ReshapePenalty {
            beta: PrefixSums::new(beta_tilde),
            beta_sq,
            lambda,
        });
        Ok(obj)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.x_prefix.n()
    }

    /// Objective value and marginally optimal heights.
    pub fn evaluate(&self, centers: &[f64], widths: &[f64]) -> Result<(f64, DVector<f64>)> {
        if centers.len() != widths.len() {
            return Err(AatrError::DimensionMismatch {
                what: "rectangle widths",
                expected: centers.len(),
                actual: widths.len(),
            });
        }
        if widths.iter().any(|w| !(*w > 0.0)) {
            return Err(AatrError::invalid("rectangle widths must be positive"));
        }
        let s = self.x_prefix.s_matrix(&self.grid, centers, widths);
        match &self.penalty {
            None => {
                let a = closed_form_heights_init(&s, &self.y_centered)?;
                Ok((self.residual_ss(&s, &a), a))
            }
            Some(pen) => {
                let sgg = overlap_gram_unchecked(centers, widths, &self.grid);
                let sbg = self.beta_gram(pen, centers, widths);
                let a = closed_form_heights_reshape(&s, &self.y_centered, &sgg, &sbg, pen.lambda)?;
                let value = self.residual_ss(&s, &a) + pen.lambda * penalty_term(pen.beta_sq, &sgg, &sbg, &a);
                Ok((value, a))
            }
        }
    }

    /// Objective at explicit heights (for checking marginal optimality).
    pub fn value_at(&self, centers: &[f64], widths: &[f64], heights: &DVector<f64>) -> Result<f64> {
        let (_, a) = self.evaluate(centers, widths)?;
        if a.len() != heights.len() {
            return Err(AatrError::DimensionMismatch {
                what: "heights",
                expected: a.len(),
                actual: heights.len(),
            });
        }
        let s = self.x_prefix.s_matrix(&self.grid, centers, widths);
        let mut value = self.residual_ss(&s, heights);
        if let Some(pen) = &self.penalty {
            let sgg = overlap_gram_unchecked(centers, widths, &self.grid);
            let sbg = self.beta_gram(pen, centers, widths);
            value += pen.lambda * penalty_term(pen.beta_sq, &sgg, &sbg, heights);
        }
        Ok(value)
    }

    /// Penalty-free part `Σ_i (y_i - ȳ - S_i·A)²`.
    fn residual_ss(&self, s: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
        (&self.y_centered - s * a).norm_squared()
    }

    fn beta_gram(&self, pen: &ReshapePenalty, centers: &[f64], widths: &[f64]) -> DVector<f64> {
        let dt = self.grid.dt();
        DVector::from_iterator(
            centers.len(),
            centers
                .iter()
                .zip(widths)
                .map(|(&c, &w)| dt * pen.beta.range_sum(support_cells(&self.grid, c, w))),
        )
    }

    /// Objective of a packed DE vector; failures map to `+∞`.
    pub fn evaluate_packed(&self, v: &[f64]) -> f64 {
        let q = v.len() / 2;
        match self.evaluate(&v[..q], &v[q..]) {
            Ok((value, _)) if value.is_finite() => value,
            _ => f64::INFINITY,
        }
    }

    /// Run DE over `q` rectangles and return the best template found.
    pub fn minimize(&self, q: usize, settings: &DeSettings, seed: u64, warm: Option<&Template>) -> Result<TemplateSolution> {
        if q == 0 {
            return Err(AatrError::invalid("q must be at least 1"));
        }
        let cfg = settings.to_config(template_bounds(&self.grid, q), seed);
        let initial: Vec<Vec<f64>> = match warm {
            Some(t) if t.q() == q => {
                let mut v = t.centers();
                v.extend(t.widths());
                vec![v]
            }
            Some(t) => {
                return Err(AatrError::DimensionMismatch {
                    what: "warm-start rectangles",
                    expected: q,
                    actual: t.q(),
                })
            }
            None => Vec::new(),
        };
        let res = de_minimize(|v| self.evaluate_packed(v), &cfg, &initial)?;
        let (centers, widths) = res.best.split_at(q);
        let (objective, heights) = self.evaluate(centers, widths)?;
        Ok(TemplateSolution {
            centers: centers.to_vec(),
            widths: widths.to_vec(),
            heights: heights.as_slice().to_vec(),
            objective,
            evaluations: res.evaluations,
        })
    }
}

/// `∫β̃² - 2 Aᵀ Σ_βG + Aᵀ Σ_GG A`.
fn penalty_term(beta_sq: f64, sgg: &DMatrix<f64>, sbg: &DVector<f64>, a: &DVector<f64>) -> f64 {
    beta_sq - 2.0 * a.dot(sbg) + (sgg * a).dot(a)
}

/// Initialization objective at fixed `(centers, widths)`: returns the
/// residual sum of squares and the closed-form heights.
pub fn objective_init(ds: &FunctionalDataset, centers: &[f64], widths: &[f64]) -> Result<(f64, Vec<f64>)> {
    let (v, a) = TemplateObjective::init(ds).evaluate(centers, widths)?;
    Ok((v, a.as_slice().to_vec()))
}

/// Reshape objective at fixed `(centers, widths)`.
pub fn objective_reshape(
    ds: &FunctionalDataset,
    beta_tilde: &[f64],
    lambda: f64,
    centers: &[f64],
    widths: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let (v, a) = TemplateObjective::reshape(ds, beta_tilde, lambda)?.evaluate(centers, widths)?;
    Ok((v, a.as_slice().to_vec()))
}

/// Fit `q` rectangles directly to the centered responses.
pub fn solve_init(ds: &FunctionalDataset, q: usize, settings: &DeSettings, seed: u64) -> Result<TemplateSolution> {
    TemplateObjective::init(ds).minimize(q, settings, seed, None)
}

/// Refit a template of the same size as `current`, attracted to `beta_tilde`.
/// The current rectangles seed one member of the DE population.
pub fn solve_reshape(
    ds: &FunctionalDataset,
    beta_tilde: &[f64],
    lambda: f64,
    current: &Template,
    settings: &DeSettings,
    seed: u64,
) -> Result<TemplateSolution> {
    TemplateObjective::reshape(ds, beta_tilde, lambda)?.minimize(current.q(), settings, seed, Some(current))
}
