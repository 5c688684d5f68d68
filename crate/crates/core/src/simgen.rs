//! Simulated scalar-on-function regression data.
//!
//! Curves are cubic B-splines with 40 equispaced inner knots on `[-2, 2]`
//! and random coefficients, observed on a grid inside `[-1, 1]`. Responses
//! follow `y = β₀ + ∫ x β + σ ε`.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{AatrError, Result};
use crate::grid::{FunctionalDataset, Grid};
use crate::template::{Rectangle, Template};

pub const SPLINE_DEGREE: usize = 3;
pub const INNER_KNOTS: usize = 40;
pub const KNOT_RANGE: (f64, f64) = (-2.0, 2.0);
pub const SMOOTH_BUMP_SD: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dependence {
    Independent,
    Dependent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BetaShape {
    Rect1,
    Rect2,
    Rect3,
    Smooth,
}

impl std::str::FromStr for Dependence {
    type Err = AatrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "independent" => Ok(Dependence::Independent),
            "dependent" => Ok(Dependence::Dependent),
            other => Err(AatrError::invalid(format!("unknown dependence '{other}'"))),
        }
    }
}

impl std::str::FromStr for BetaShape {
    type Err = AatrError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rect1" => Ok(BetaShape::Rect1),
            "rect2" => Ok(BetaShape::Rect2),
            "rect3" => Ok(BetaShape::Rect3),
            "smooth" => Ok(BetaShape::Smooth),
            other => Err(AatrError::invalid(format!("unknown beta shape '{other}'"))),
        }
    }
}

/// One simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimScenario {
    pub n: usize,
    pub p: usize,
    pub dependence: Dependence,
    pub beta_shape: BetaShape,
    pub noise_sd: f64,
    /// Lag-one correlation of the spline coefficients in dependent mode.
    pub rho: f64,
    pub seed: u64,
}

impl Default for SimScenario {
    fn default() -> Self {
        SimScenario {
            n: 100,
            p: 200,
            dependence: Dependence::Independent,
            beta_shape: BetaShape::Rect1,
            noise_sd: 1.0,
            rho: 0.9,
            seed: 0,
        }
    }
}

impl SimScenario {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(AatrError::invalid(format!("scenario needs n >= 2, got {}", self.n)));
        }
        if self.p < 10 {
            return Err(AatrError::invalid(format!("scenario needs p >= 10, got {}", self.p)));
        }
        if !(self.noise_sd >= 0.0) || !self.noise_sd.is_finite() {
            return Err(AatrError::invalid(format!("noise sd must be >= 0, got {}", self.noise_sd)));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return Err(AatrError::invalid(format!("rho must lie in (-1, 1), got {}", self.rho)));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.p, -1.0, 1.0)
    }
}

/// Output of [`simulate`].
#[derive(Debug, Clone)]
pub struct Simulation {
    pub dataset: FunctionalDataset,
    pub true_beta: Vec<f64>,
    /// Noiseless responses.
    pub signal: DVector<f64>,
}

/// Clamped knot vector: boundary knots repeated `degree + 1` times around
/// `inner` equispaced interior knots.
pub fn clamped_knots(lo: f64, hi: f64, inner: usize, degree: usize) -> Vec<f64> {
    let mut knots = vec![lo; degree + 1];
    let step = (hi - lo) / (inner + 1) as f64;
    knots.extend((1..=inner).map(|k| lo + k as f64 * step));
    knots.extend(std::iter::repeat_n(hi, degree + 1));
    knots
}

/// Values of all B-spline basis functions of `degree` at `t` (Cox-de Boor).
/// `t` must lie in `[knots[degree], knots[len - degree - 1]]`.
pub fn bspline_basis(knots: &[f64], degree: usize, t: f64) -> Vec<f64> {
    let n_basis = knots.len() - degree - 1;
    let last = knots.len() - 1;
    // degree-0 indicators on half-open spans; the right end belongs to the last
    // non-empty span
    let mut vals: Vec<f64> = (0..last)
        .map(|i| {
            let inside = knots[i] <= t && t < knots[i + 1];
            let right_end = t == knots[last] && knots[i] < knots[i + 1] && knots[i + 1] == knots[last];
            if inside || right_end {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    for d in 1..=degree {
        for i in 0..last - d {
            let left_den = knots[i + d] - knots[i];
            let right_den = knots[i + d + 1] - knots[i + 1];
            let left = if left_den > 0.0 {
                (t - knots[i]) / left_den * vals[i]
            } else {
                0.0
            };
            let right = if right_den > 0.0 {
                (knots[i + d + 1] - t) / right_den * vals[i + 1]
            } else {
                0.0
            };
            vals[i] = left + right;
        }
    }
    vals.truncate(n_basis);
    vals
}

/// Basis matrix (`points.len() × 44`) of the simulation spline space.
pub fn simulation_basis(points: &[f64]) -> DMatrix<f64> {
    let knots = clamped_knots(KNOT_RANGE.0, KNOT_RANGE.1, INNER_KNOTS, SPLINE_DEGREE);
    let n_basis = knots.len() - SPLINE_DEGREE - 1;
    let mut b = DMatrix::zeros(points.len(), n_basis);
    for (r, &t) in points.iter().enumerate() {
        for (c, v) in bspline_basis(&knots, SPLINE_DEGREE, t).into_iter().enumerate() {
            b[(r, c)] = v;
        }
    }
    b
}

/// Spline coefficient draws, one row per observation. Dependent mode uses an
/// AR(1) recursion, which has covariance `ρ^|j-k|` exactly.
pub fn gen_coefficients(n: usize, n_basis: usize, dependence: Dependence, rho: f64, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let innovation = (1.0 - rho * rho).sqrt();
    let mut c = DMatrix::zeros(n, n_basis);
    for i in 0..n {
        let mut prev = 0.0;
        for j in 0..n_basis {
            let z: f64 = StandardNormal.sample(rng);
            let v = match dependence {
                Dependence::Independent => z,
                Dependence::Dependent if j == 0 => z,
                Dependence::Dependent => rho * prev + innovation * z,
            };
            c[(i, j)] = v;
            prev = v;
        }
    }
    c
}

/// `N × p` matrix of random spline curves evaluated on the scenario grid.
pub fn gen_curves(scn: &SimScenario) -> Result<DMatrix<f64>> {
    scn.validate()?;
    let grid = scn.grid()?;
    let basis = simulation_basis(grid.points());
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(scn.seed, 0));
    let coef = gen_coefficients(scn.n, basis.ncols(), scn.dependence, scn.rho, &mut rng);
    Ok(coef * basis.transpose())
}

/// The true coefficient template for a rectangle shape.
pub fn true_template(shape: BetaShape) -> Option<Template> {
    let all = [
        Rectangle::new(1.0, 0.0, 0.8),
        Rectangle::new(-1.0, -0.55, 0.5),
        Rectangle::new(0.5, 0.6, 0.4),
    ];
    let q = match shape {
        BetaShape::Rect1 => 1,
        BetaShape::Rect2 => 2,
        BetaShape::Rect3 => 3,
        BetaShape::Smooth => return None,
    };
    Some(Template {
        rects: all[..q].to_vec(),
    })
}

/// True coefficient function on `grid`.
pub fn true_beta(shape: BetaShape, grid: &Grid) -> Vec<f64> {
    match true_template(shape) {
        Some(t) => t.eval(grid),
        None => grid
            .points()
            .iter()
            .map(|t| (-t * t / (2.0 * SMOOTH_BUMP_SD * SMOOTH_BUMP_SD)).exp())
            .collect(),
    }
}

/// `y_i = β₀ + dt Σ_j x_ij β_j + σ ζ_i`.
pub fn gen_responses(x: &DMatrix<f64>, beta: &[f64], beta0: f64, sigma: f64, grid: &Grid, seed: u64) -> Result<DVector<f64>> {
    grid.check_len("beta", beta.len())?;
    if x.ncols() != grid.p() {
        return Err(AatrError::DimensionMismatch {
            what: "columns of x",
            expected: grid.p(),
            actual: x.ncols(),
        });
    }
    if !(sigma >= 0.0) {
        return Err(AatrError::invalid(format!("sigma must be >= 0, got {sigma}")));
    }
    let signal = linear_functional(x, beta, grid).add_scalar(beta0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(signal.map(|s| {
        let z: f64 = StandardNormal.sample(&mut rng);
        s + sigma * z
    }))
}

/// `dt Σ_j x_ij β_j` for every row.
pub fn linear_functional(x: &DMatrix<f64>, beta: &[f64], grid: &Grid) -> DVector<f64> {
    x * DVector::from_column_slice(beta) * grid.dt()
}

/// Curves, true `β`, and responses for one scenario (`β₀ = 0`).
pub fn simulate(scn: &SimScenario) -> Result<Simulation> {
    let grid = scn.grid()?;
    let x = gen_curves(scn)?;
    let beta = true_beta(scn.beta_shape, &grid);
    let signal = linear_functional(&x, &beta, &grid);
    let y = gen_responses(&x, &beta, 0.0, scn.noise_sd, &grid, stream_seed(scn.seed, 1))?;
    Ok(Simulation {
        dataset: FunctionalDataset::new(grid, x, y)?,
        true_beta: beta,
        signal,
    })
}

/// Derive an independent seed for a numbered random stream.
pub fn stream_seed(seed: u64, stream: u64) -> u64 {
    crate::seeding::mix(&[seed, stream, 0x5eed_5eed])
}
