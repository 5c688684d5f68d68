//! Equispaced grid representation of functions on an interval.
//!
//! A function on `[a, b]` is stored by its values at the midpoints of `p`
//! equal cells, so that integrals reduce to `dt * sum(...)`. This is the
//! piecewise-constant indicator basis: the midpoint rule is exact for any
//! function that is constant on each cell.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AatrError, Result};

/// Columns whose sample standard deviation falls below this (relative to
/// the column magnitude) are treated as constant.
const CONSTANT_COLUMN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GridSpec", into = "GridSpec")]
pub struct Grid {
    p: usize,
    a: f64,
    b: f64,
    dt: f64,
    points: Vec<f64>,
}

/// Serialized form of a [`Grid`]: only `{p, a, b}` are stored.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub p: usize,
    pub a: f64,
    pub b: f64,
}

impl TryFrom<GridSpec> for Grid {
    type Error = AatrError;

    fn try_from(spec: GridSpec) -> Result<Self> {
        Grid::new(spec.p, spec.a, spec.b)
    }
}

impl From<Grid> for GridSpec {
    fn from(grid: Grid) -> Self {
        GridSpec {
            p: grid.p,
            a: grid.a,
            b: grid.b,
        }
    }
}

impl Grid {
    /// Partition `[a, b]` into `p` equal cells represented by their midpoints.
    pub fn new(p: usize, a: f64, b: f64) -> Result<Self> {
        if p < 2 {
            return Err(AatrError::invalid(format!("grid needs p >= 2, got {p}")));
        }
        if !(a.is_finite() && b.is_finite()) || a >= b {
            return Err(AatrError::invalid(format!(
                "grid needs finite a < b, got [{a}, {b}]"
            )));
        }
        let dt = (b - a) / p as f64;
        let points = (0..p).map(|j| a + (j as f64 + 0.5) * dt).collect();
        Ok(Grid { p, a, b, dt, points })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Cell width `(b - a) / p`.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            p: self.p,
            a: self.a,
            b: self.b,
        }
    }

    /// Midpoint-rule approximation of `∫ f(t) g(t) dt`.
    pub fn inner_product(&self, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_len("f", f.len())?;
        self.check_len("g", g.len())?;
        Ok(self.dt * f.iter().zip(g).map(|(x, y)| x * y).sum::<f64>())
    }

    /// Midpoint-rule approximation of `∫ f(t) dt`.
    pub fn integral(&self, f: &[f64]) -> Result<f64> {
        self.check_len("f", f.len())?;
        Ok(self.dt * f.iter().sum::<f64>())
    }

    pub(crate) fn check_len(&self, what: &'static str, len: usize) -> Result<()> {
        if len != self.p {
            return Err(AatrError::DimensionMismatch {
                what,
                expected: self.p,
                actual: len,
            });
        }
        Ok(())
    }
}

/// Per-column centering and scaling learned from a training matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    /// Column means and sample standard deviations (denominator `N - 1`).
    /// Constant columns get scale 1 so that they standardize to zeros.
    pub fn fit(x: &DMatrix<f64>) -> Result<Self> {
        let n = x.nrows();
        if n < 2 {
            return Err(AatrError::invalid(format!(
                "standardization needs at least 2 rows, got {n}"
            )));
        }
        let mut means = Vec::with_capacity(x.ncols());
        let mut scales = Vec::with_capacity(x.ncols());
        for col in x.column_iter() {
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            if sd <= CONSTANT_COLUMN_TOL * (1.0 + mean.abs()) {
                // centering on the observed value makes the column exactly zero
                means.push(col[0]);
                scales.push(1.0);
            } else {
                means.push(mean);
                scales.push(sd);
            }
        }
        Ok(Standardization { means, scales })
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    /// The identity transform on `p` columns.
    pub fn identity(p: usize) -> Self {
        Standardization {
            means: vec![0.0; p],
            scales: vec![1.0; p],
        }
    }

    pub fn apply(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x.ncols() != self.len() {
            return Err(AatrError::DimensionMismatch {
                what: "columns of x",
                expected: self.len(),
                actual: x.ncols(),
            });
        }
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.scales[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }

    pub fn invert(&self, x_std: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if x_std.ncols() != self.len() {
            return Err(AatrError::DimensionMismatch {
                what: "columns of x",
                expected: self.len(),
                actual: x_std.ncols(),
            });
        }
        let mut out = x_std.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.scales[j]);
            col.apply(|v| *v = *v * s + m);
        }
        Ok(out)
    }
}

/// `N` sampled functions on a shared grid together with `N` scalar responses.
#[derive(Debug, Clone)]
pub struct FunctionalDataset {
    grid: Grid,
    x: DMatrix<f64>,
    y: DVector<f64>,
    standardization: Option<Standardization>,
}

impl FunctionalDataset {
    pub fn new(grid: Grid, x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.ncols() != grid.p() {
            return Err(AatrError::DimensionMismatch {
                what: "columns of x",
                expected: grid.p(),
                actual: x.ncols(),
            });
        }
        if y.len() != x.nrows() {
            return Err(AatrError::DimensionMismatch {
                what: "length of y",
                expected: x.nrows(),
                actual: y.len(),
            });
        }
        if x.nrows() == 0 {
            return Err(AatrError::data("dataset has no observations"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(AatrError::data("x contains non-finite values"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(AatrError::data("y contains non-finite values"));
        }
        Ok(FunctionalDataset {
            grid,
            x,
            y,
            standardization: None,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.grid.p()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardization.is_some()
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.standardization.as_ref()
    }

    pub fn y_mean(&self) -> f64 {
        self.y.mean()
    }

    /// Responses minus their mean.
    pub fn y_centered(&self) -> DVector<f64> {
        let m = self.y_mean();
        self.y.map(|v| v - m)
    }

    /// Center and scale each column of `x`, keeping the statistics for
    /// prediction-time reuse.
    pub fn standardize(&self) -> Result<FunctionalDataset> {
        if self.is_standardized() {
            return Err(AatrError::AlreadyStandardized);
        }
        let st = Standardization::fit(&self.x)?;
        let x = st.apply(&self.x)?;
        Ok(FunctionalDataset {
            grid: self.grid.clone(),
            x,
            y: self.y.clone(),
            standardization: Some(st),
        })
    }

    /// Apply an existing standardization (e.g. one learned on a training fold).
    pub fn standardize_with(&self, st: &Standardization) -> Result<FunctionalDataset> {
        if self.is_standardized() {
            return Err(AatrError::AlreadyStandardized);
        }
        Ok(FunctionalDataset {
            grid: self.grid.clone(),
            x: st.apply(&self.x)?,
            y: self.y.clone(),
            standardization: Some(st.clone()),
        })
    }

    /// Rows selected by `idx`, unstandardized copy of the raw data.
    pub fn subset(&self, idx: &[usize]) -> Result<FunctionalDataset> {
        if self.is_standardized() {
            return Err(AatrError::AlreadyStandardized);
        }
        let x = self.x.select_rows(idx);
        let y = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.y[i]));
        FunctionalDataset::new(self.grid.clone(), x, y)
    }
}
