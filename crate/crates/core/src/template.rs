//! Rectangle templates and the Gram quantities used by the closed-form heights.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{AatrError, Result};
use crate::grid::{FunctionalDataset, Grid};

/// Indicator of `|t - center| <= width / 2` (boundary included).
pub fn rect_eval(t: f64, center: f64, width: f64) -> Result<f64> {
    if !(width > 0.0) {
        return Err(AatrError::invalid(format!(
            "rectangle width must be positive, got {width}"
        )));
    }
    Ok(if in_support(t, center, width) { 1.0 } else { 0.0 })
}

#[inline]
fn in_support(t: f64, center: f64, width: f64) -> bool {
    (t - center).abs() <= 0.5 * width
}

/// One rectangle `height * 1{|t - center| <= width/2}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rectangle {
    #[serde(rename = "A")]
    pub height: f64,
    #[serde(rename = "t0")]
    pub center: f64,
    #[serde(rename = "T")]
    pub width: f64,
}

impl Rectangle {
    pub fn new(height: f64, center: f64, width: f64) -> Self {
        Rectangle {
            height,
            center,
            width,
        }
    }

    /// Check the rectangle against the domain of `grid`.
    pub fn validate(&self, grid: &Grid) -> Result<()> {
        if !self.height.is_finite() || !self.center.is_finite() || !self.width.is_finite() {
            return Err(AatrError::invalid("rectangle has non-finite parameters"));
        }
        if !(self.width > 0.0) || self.width > grid.length() * (1.0 + 1e-12) {
            return Err(AatrError::invalid(format!(
                "rectangle width {} outside (0, {}]",
                self.width,
                grid.length()
            )));
        }
        if self.center < grid.a() || self.center > grid.b() {
            return Err(AatrError::invalid(format!(
                "rectangle center {} outside [{}, {}]",
                self.center,
                grid.a(),
                grid.b()
            )));
        }
        Ok(())
    }

    /// Support clipped to the domain, as `(lo, hi)`.
    pub fn clipped_support(&self, grid: &Grid) -> (f64, f64) {
        clipped_support(self.center, self.width, grid)
    }
}

fn clipped_support(center: f64, width: f64, grid: &Grid) -> (f64, f64) {
    let lo = (center - 0.5 * width).max(grid.a());
    let hi = (center + 0.5 * width).min(grid.b());
    (lo, hi.max(lo))
}

/// Grid cells whose midpoints fall inside the rectangle support.
///
/// The support is an interval, so the matching cells are contiguous; the
/// estimate from the cell arithmetic is corrected with the exact predicate
/// so that this agrees with [`rect_eval`] at every grid point.
pub fn support_cells(grid: &Grid, center: f64, width: f64) -> Range<usize> {
    let p = grid.p();
    let pts = grid.points();
    let to_index = |t: f64| ((t - grid.a()) / grid.dt() - 0.5).ceil();
    let lo = center - 0.5 * width;
    let hi = center + 0.5 * width;

    let mut start = to_index(lo).clamp(0.0, p as f64) as usize;
    while start > 0 && in_support(pts[start - 1], center, width) {
        start -= 1;
    }
    while start < p && !in_support(pts[start], center, width) && pts[start] < center {
        start += 1;
    }

    let mut end = (to_index(hi) + 1.0).clamp(0.0, p as f64) as usize;
    end = end.max(start);
    while end < p && in_support(pts[end], center, width) {
        end += 1;
    }
    while end > start && !in_support(pts[end - 1], center, width) {
        end -= 1;
    }
    if start < end && !in_support(pts[start], center, width) {
        // empty support (width below one cell between two midpoints)
        return start..start;
    }
    start..end
}

/// A sum of `q` rectangles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub rects: Vec<Rectangle>,
}

impl Template {
    pub fn new(rects: Vec<Rectangle>, grid: &Grid) -> Result<Self> {
        if rects.is_empty() {
            return Err(AatrError::invalid("template needs at least one rectangle"));
        }
        for r in &rects {
            r.validate(grid)?;
        }
        Ok(Template { rects })
    }

    /// Build from parallel `(heights, centers, widths)` slices.
    pub fn from_parts(heights: &[f64], centers: &[f64], widths: &[f64], grid: &Grid) -> Result<Self> {
        check_params(centers, widths)?;
        if heights.len() != centers.len() {
            return Err(AatrError::DimensionMismatch {
                what: "rectangle heights",
                expected: centers.len(),
                actual: heights.len(),
            });
        }
        let rects = heights
            .iter()
            .zip(centers)
            .zip(widths)
            .map(|((&h, &c), &w)| Rectangle::new(h, c, w))
            .collect();
        Template::new(rects, grid)
    }

    pub fn q(&self) -> usize {
        self.rects.len()
    }

    pub fn heights(&self) -> Vec<f64> {
        self.rects.iter().map(|r| r.height).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.rects.iter().map(|r| r.center).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.rects.iter().map(|r| r.width).collect()
    }

    /// Values of the template at the grid points.
    pub fn eval(&self, grid: &Grid) -> Vec<f64> {
        let mut out = vec![0.0; grid.p()];
        for r in &self.rects {
            for j in support_cells(grid, r.center, r.width) {
                out[j] += r.height;
            }
        }
        out
    }
}

fn check_params(centers: &[f64], widths: &[f64]) -> Result<()> {
    if centers.len() != widths.len() {
        return Err(AatrError::DimensionMismatch {
            what: "rectangle widths",
            expected: centers.len(),
            actual: widths.len(),
        });
    }
    if let Some(w) = widths.iter().find(|w| !(**w > 0.0)) {
        return Err(AatrError::invalid(format!(
            "rectangle width must be positive, got {w}"
        )));
    }
    Ok(())
}

/// Matrix with entry `(i, j) = ∫ x_i(t) g(t; center_j, width_j) dt`.
pub fn s_vectors(ds: &FunctionalDataset, centers: &[f64], widths: &[f64]) -> Result<DMatrix<f64>> {
    check_params(centers, widths)?;
    let prefix = RowPrefixSums::new(ds.x());
    Ok(prefix.s_matrix(ds.grid(), centers, widths))
}

/// Exact `∫ G(t) G(t)ᵀ dt`: pairwise lengths of the clipped support overlaps.
pub fn overlap_gram(centers: &[f64], widths: &[f64], grid: &Grid) -> Result<DMatrix<f64>> {
    check_params(centers, widths)?;
    Ok(overlap_gram_unchecked(centers, widths, grid))
}

pub(crate) fn overlap_gram_unchecked(centers: &[f64], widths: &[f64], grid: &Grid) -> DMatrix<f64> {
    let q = centers.len();
    let supports: Vec<(f64, f64)> = centers
        .iter()
        .zip(widths)
        .map(|(&c, &w)| clipped_support(c, w, grid))
        .collect();
    let mut gram = DMatrix::zeros(q, q);
    for j in 0..q {
        for k in j..q {
            let lo = supports[j].0.max(supports[k].0);
            let hi = supports[j].1.min(supports[k].1);
            let v = (hi - lo).max(0.0);
            gram[(j, k)] = v;
            gram[(k, j)] = v;
        }
    }
    gram
}

/// Quadrature `∫ beta(t) G(t) dt`.
pub fn beta_gram(beta: &[f64], centers: &[f64], widths: &[f64], grid: &Grid) -> Result<DVector<f64>> {
    check_params(centers, widths)?;
    grid.check_len("beta", beta.len())?;
    if beta.iter().any(|v| !v.is_finite()) {
        return Err(AatrError::invalid("beta contains non-finite values"));
    }
    let prefix = PrefixSums::new(beta);
    Ok(DVector::from_iterator(
        centers.len(),
        centers
            .iter()
            .zip(widths)
            .map(|(&c, &w)| grid.dt() * prefix.range_sum(support_cells(grid, c, w))),
    ))
}

/// Cumulative sums of a single vector.
#[derive(Debug, Clone)]
pub(crate) struct PrefixSums {
    cum: Vec<f64>,
}

impl PrefixSums {
    pub(crate) fn new(values: &[f64]) -> Self {
        let mut cum = Vec::with_capacity(values.len() + 1);
        let mut acc = 0.0;
        cum.push(0.0);
        for v in values {
            acc += v;
            cum.push(acc);
        }
        PrefixSums { cum }
    }

    #[inline]
    pub(crate) fn range_sum(&self, r: Range<usize>) -> f64 {
        self.cum[r.end] - self.cum[r.start]
    }
}

/// Row-wise cumulative sums of a matrix, stored column-major by prefix index
/// so that a range sum for all rows is two contiguous slices.
#[derive(Debug, Clone)]
pub(crate) struct RowPrefixSums {
    n: usize,
    // (p + 1) blocks of n values; block k holds Σ_{j<k} x[i, j] for every i.
    cum: Vec<f64>,
}

impl RowPrefixSums {
    pub(crate) fn new(x: &DMatrix<f64>) -> Self {
        let (n, p) = x.shape();
        let mut cum = vec![0.0; n * (p + 1)];
        for j in 0..p {
            let col = x.column(j);
            let (prev, next) = cum.split_at_mut((j + 1) * n);
            let prev = &prev[j * n..];
            for i in 0..n {
                next[i] = prev[i] + col[i];
            }
        }
        RowPrefixSums { n, cum }
    }

    pub(crate) fn n(&self) -> usize {
        self.n
    }

    /// Writes `dt * Σ_{j in r} x[i, j]` for every row `i` into `out`.
    #[inline]
    pub(crate) fn range_sums_into(&self, r: Range<usize>, dt: f64, out: &mut [f64]) {
        let hi = &self.cum[r.end * self.n..(r.end + 1) * self.n];
        let lo = &self.cum[r.start * self.n..(r.start + 1) * self.n];
        for ((o, h), l) in out.iter_mut().zip(hi).zip(lo) {
            *o = dt * (h - l);
        }
    }

    pub(crate) fn s_matrix(&self, grid: &Grid, centers: &[f64], widths: &[f64]) -> DMatrix<f64> {
        let q = centers.len();
        let mut s = DMatrix::zeros(self.n, q);
        for (k, (&c, &w)) in centers.iter().zip(widths).enumerate() {
            let r = support_cells(grid, c, w);
            self.range_sums_into(r, grid.dt(), s.column_mut(k).as_mut_slice());
        }
        s
    }
}
