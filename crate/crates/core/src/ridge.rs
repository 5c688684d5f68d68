//! Closed-form ridge solvers on the grid basis.
//!
//! All solvers expect a standardized dataset, so the intercept is the mean
//! response and is never penalized. Integrals use the midpoint weight `dt`:
//! the design matrix is `Z = dt * X` and the penalty on `β - γ` is
//! `λ * dt * ‖β - γ‖²`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AatrError, Result};
use crate::grid::{FunctionalDataset, Grid, Standardization};
use crate::linalg::TruncatedSvd;

/// Jitter added to the roughness system so that it stays invertible.
pub const ROUGHNESS_JITTER: f64 = 1e-10;

/// A fitted scalar-on-function linear model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeFit {
    pub beta0: f64,
    /// Coefficient function on the grid, in standardized units.
    pub beta: Vec<f64>,
    pub lambda: f64,
    /// Shrinkage target the fit was computed with (zeros for baselines).
    pub gamma: Vec<f64>,
    pub grid: Grid,
    pub standardization: Standardization,
}

impl RidgeFit {
    /// Predictions for raw (unstandardized) curves.
    pub fn predict(&self, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
        predict(self, x_new)
    }

    /// Coefficient function on the original measurement scale, i.e. the `β`
    /// with `ŷ = β₀' + ∫ x(t) β(t) dt` for raw curves `x`.
    pub fn raw_beta(&self) -> Vec<f64> {
        self.beta
            .iter()
            .zip(&self.standardization.scales)
            .map(|(b, s)| b / s)
            .collect()
    }

    /// Intercept matching [`RidgeFit::raw_beta`].
    pub fn raw_intercept(&self) -> f64 {
        let dt = self.grid.dt();
        self.beta0
            - dt * self
                .raw_beta()
                .iter()
                .zip(&self.standardization.means)
                .map(|(b, m)| b * m)
                .sum::<f64>()
    }
}

fn require_standardized(ds: &FunctionalDataset) -> Result<&Standardization> {
    ds.standardization().ok_or(AatrError::NotStandardized)
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(AatrError::invalid(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    Ok(())
}

/// Reusable factorization of one standardized dataset for centered-ridge
/// solves at any `(γ, λ)`.
///
/// Uses the thin SVD of `Z`: with `r = (y - ȳ) - Zγ`,
/// `β = γ + V diag(s / (s² + λ dt)) Uᵀ r`, which is the exact solution of
/// `(ZᵀZ + λ dt I) β = Zᵀ(y - ȳ) + λ dt γ`.
#[derive(Debug, Clone)]
pub struct RidgeSystem {
    grid: Grid,
    standardization: Standardization,
    z: DMatrix<f64>,
    svd: TruncatedSvd,
    y: DVector<f64>,
    y_mean: f64,
    y_centered: DVector<f64>,
}

impl RidgeSystem {
    pub fn new(ds: &FunctionalDataset) -> Result<Self> {
        let st = require_standardized(ds)?.clone();
        let z = ds.x() * ds.grid().dt();
        let svd = TruncatedSvd::new(&z)?;
        Ok(RidgeSystem {
            grid: ds.grid().clone(),
            standardization: st,
            z,
            svd,
            y: ds.y().clone(),
            y_mean: ds.y_mean(),
            y_centered: ds.y_centered(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn solve(&self, gamma: &[f64], lambda: f64) -> Result<RidgeFit> {
        check_lambda(lambda)?;
        self.grid.check_len("gamma", gamma.len())?;
        if gamma.iter().any(|v| !v.is_finite()) {
            return Err(AatrError::invalid("gamma contains non-finite values"));
        }
        let g = DVector::from_column_slice(gamma);
        let r = &self.y_centered - &self.z * &g;
        let delta = self.svd.ridge_solve(&r, lambda * self.grid.dt());
        let beta = g + delta;
        self.finish(beta, lambda, gamma.to_vec())
    }

    pub fn min_norm(&self) -> Result<RidgeFit> {
        let beta = self.svd.pinv_solve(&self.y_centered);
        self.finish(beta, 0.0, vec![0.0; self.grid.p()])
    }

    fn finish(&self, beta: DVector<f64>, lambda: f64, gamma: Vec<f64>) -> Result<RidgeFit> {
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(AatrError::Numerical("ridge solution is not finite".into()));
        }
        Ok(RidgeFit {
            beta0: self.y_mean,
            beta: beta.as_slice().to_vec(),
            lambda,
            gamma,
            grid: self.grid.clone(),
            standardization: self.standardization.clone(),
        })
    }

    /// In-sample fitted values `ȳ + Zβ`.
    pub fn fitted(&self, fit: &RidgeFit) -> DVector<f64> {
        let beta = DVector::from_column_slice(&fit.beta);
        (&self.z * beta).add_scalar(fit.beta0)
    }

    pub fn train_mse(&self, fit: &RidgeFit) -> f64 {
        let fitted = self.fitted(fit);
        mse_unchecked(fitted.as_slice(), self.y.as_slice())
    }
}

/// Minimizer of `Σ (y_i - β₀ - ∫x_i β)² + λ ∫(β - γ)²` on the grid.
pub fn solve_centered_ridge(ds: &FunctionalDataset, gamma: &[f64], lambda: f64) -> Result<RidgeFit> {
    check_lambda(lambda)?;
    RidgeSystem::new(ds)?.solve(gamma, lambda)
}

/// Pseudoinverse (minimum-norm least-squares) solution.
pub fn solve_min_norm_ls(ds: &FunctionalDataset) -> Result<RidgeFit> {
    RidgeSystem::new(ds)?.min_norm()
}

/// Second-difference operator of shape `(p - 2) × p`.
pub fn second_difference(p: usize) -> Result<DMatrix<f64>> {
    if p < 3 {
        return Err(AatrError::invalid(format!(
            "second differences need p >= 3, got {p}"
        )));
    }
    let mut d = DMatrix::zeros(p - 2, p);
    for i in 0..p - 2 {
        d[(i, i)] = 1.0;
        d[(i, i + 1)] = -2.0;
        d[(i, i + 2)] = 1.0;
    }
    Ok(d)
}

/// Ridge with a penalty on the squared second derivative of `β`,
/// discretized as `λ dt⁻³ ‖D₂β‖²`.
pub fn solve_roughness_ridge(ds: &FunctionalDataset, lambda: f64) -> Result<RidgeFit> {
    RoughnessSystem::new(ds)?.solve(lambda)
}

/// Cached Gram quantities for repeated roughness solves on one dataset.
#[derive(Debug, Clone)]
pub struct RoughnessSystem {
    grid: Grid,
    standardization: Standardization,
    ztz: DMatrix<f64>,
    zty: DVector<f64>,
    dtd: DMatrix<f64>,
    y_mean: f64,
}

impl RoughnessSystem {
    pub fn new(ds: &FunctionalDataset) -> Result<Self> {
        let st = require_standardized(ds)?.clone();
        let d2 = second_difference(ds.p())?;
        let z = ds.x() * ds.grid().dt();
        Ok(RoughnessSystem {
            grid: ds.grid().clone(),
            standardization: st,
            ztz: z.tr_mul(&z),
            zty: z.tr_mul(&ds.y_centered()),
            dtd: d2.tr_mul(&d2),
            y_mean: ds.y_mean(),
        })
    }

    pub fn solve(&self, lambda: f64) -> Result<RidgeFit> {
        check_lambda(lambda)?;
        let weight = lambda / self.grid.dt().powi(3);
        let mut a = &self.ztz + &self.dtd * weight;
        for i in 0..a.nrows() {
            a[(i, i)] += ROUGHNESS_JITTER;
        }
        let beta = match a.clone().cholesky() {
            Some(ch) => ch.solve(&self.zty),
            None => a
                .lu()
                .solve(&self.zty)
                .ok_or_else(|| AatrError::Numerical("roughness system is singular".into()))?,
        };
        if beta.iter().any(|v| !v.is_finite()) {
            return Err(AatrError::Numerical("roughness solution is not finite".into()));
        }
        Ok(RidgeFit {
            beta0: self.y_mean,
            beta: beta.as_slice().to_vec(),
            lambda,
            gamma: vec![0.0; self.grid.p()],
            grid: self.grid.clone(),
            standardization: self.standardization.clone(),
        })
    }
}

/// `β₀ + dt * (standardized x_new) β`.
pub fn predict(fit: &RidgeFit, x_new: &DMatrix<f64>) -> Result<DVector<f64>> {
    if x_new.ncols() != fit.beta.len() {
        return Err(AatrError::DimensionMismatch {
            what: "columns of x_new",
            expected: fit.beta.len(),
            actual: x_new.ncols(),
        });
    }
    if x_new.iter().any(|v| !v.is_finite()) {
        return Err(AatrError::data("x_new contains non-finite values"));
    }
    let xs = fit.standardization.apply(x_new)?;
    let beta = DVector::from_column_slice(&fit.beta);
    Ok((xs * beta * fit.grid.dt()).add_scalar(fit.beta0))
}

/// Mean squared error.
pub fn mse(y_hat: &[f64], y: &[f64]) -> Result<f64> {
    if y_hat.len() != y.len() {
        return Err(AatrError::DimensionMismatch {
            what: "prediction length",
            expected: y.len(),
            actual: y_hat.len(),
        });
    }
    if y.is_empty() {
        return Err(AatrError::invalid("mse of empty vectors"));
    }
    Ok(mse_unchecked(y_hat, y))
}

pub(crate) fn mse_unchecked(y_hat: &[f64], y: &[f64]) -> f64 {
    y_hat.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

/// Discretized centered-ridge objective at `(ȳ, β)`.
pub fn centered_ridge_objective(ds: &FunctionalDataset, beta: &[f64], gamma: &[f64], lambda: f64) -> Result<f64> {
    let grid = ds.grid();
    grid.check_len("beta", beta.len())?;
    grid.check_len("gamma", gamma.len())?;
    let dt = grid.dt();
    let b = DVector::from_column_slice(beta);
    let resid = ds.y_centered() - ds.x() * b * dt;
    let pen: f64 = beta.iter().zip(gamma).map(|(u, v)| (u - v).powi(2)).sum();
    Ok(resid.norm_squared() + lambda * dt * pen)
}
