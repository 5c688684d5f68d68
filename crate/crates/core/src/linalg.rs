//! Small dense linear-algebra helpers built on nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{AatrError, Result};

/// Pseudoinverse solution `M⁺ b` of a symmetric positive semidefinite system.
///
/// Eigenvalues below `cutoff_factor * ε * λ_max` (in absolute value) are
/// treated as zero.
pub fn sym_pinv_solve(m: &DMatrix<f64>, b: &DVector<f64>, cutoff_factor: f64) -> Result<DVector<f64>> {
    let n = m.nrows();
    if m.ncols() != n {
        return Err(AatrError::DimensionMismatch {
            what: "columns of symmetric matrix",
            expected: n,
            actual: m.ncols(),
        });
    }
    if b.len() != n {
        return Err(AatrError::DimensionMismatch {
            what: "right-hand side",
            expected: n,
            actual: b.len(),
        });
    }
    if n == 1 {
        let d = m[(0, 0)];
        return Ok(DVector::from_element(1, if d.abs() > 0.0 { b[0] / d } else { 0.0 }));
    }
    let eig = SymmetricEigen::new(m.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if !max.is_finite() {
        return Err(AatrError::Numerical("non-finite eigenvalue".into()));
    }
    let cutoff = cutoff_factor * f64::EPSILON * max;
    let coords = eig.eigenvectors.tr_mul(b);
    let mut scaled = DVector::zeros(n);
    for k in 0..n {
        let ev = eig.eigenvalues[k];
        if ev.abs() > cutoff && max > 0.0 {
            scaled[k] = coords[k] / ev;
        }
    }
    Ok(&eig.eigenvectors * scaled)
}

/// Thin SVD `Z = U diag(s) Vᵀ` with singular values below
/// `max(N, p) * ε * s_max` dropped.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub u: DMatrix<f64>,
    pub s: DVector<f64>,
    pub v_t: DMatrix<f64>,
}

impl TruncatedSvd {
    pub fn new(z: &DMatrix<f64>) -> Result<Self> {
        let (n, p) = z.shape();
        if z.iter().any(|v| !v.is_finite()) {
            return Err(AatrError::Numerical("non-finite matrix entry".into()));
        }
        let m = faer::Mat::<f64>::from_fn(n, p, |i, j| z[(i, j)]);
        let svd = m
            .thin_svd()
            .map_err(|e| AatrError::Numerical(format!("SVD did not converge: {e:?}")))?;
        let (fu, fv, fs) = (svd.U(), svd.V(), svd.S().column_vector());
        let s_max = (0..fs.nrows()).map(|k| fs[k]).fold(0.0f64, f64::max);
        if !s_max.is_finite() {
            return Err(AatrError::Numerical("non-finite singular value".into()));
        }
        let cutoff = n.max(p) as f64 * f64::EPSILON * s_max;
        let keep: Vec<usize> = (0..fs.nrows()).filter(|&k| fs[k] > cutoff && s_max > 0.0).collect();
        let u = DMatrix::from_fn(n, keep.len(), |i, r| fu[(i, keep[r])]);
        let v_t = DMatrix::from_fn(keep.len(), p, |r, j| fv[(j, keep[r])]);
        let s = DVector::from_iterator(keep.len(), keep.iter().map(|&k| fs[k]));
        Ok(TruncatedSvd { u, s, v_t })
    }

    pub fn rank(&self) -> usize {
        self.s.len()
    }

    /// Minimum-norm least-squares solution `Z⁺ r`.
    pub fn pinv_solve(&self, r: &DVector<f64>) -> DVector<f64> {
        let mut coords = self.u.tr_mul(r);
        for (c, s) in coords.iter_mut().zip(self.s.iter()) {
            *c /= s;
        }
        self.v_t.tr_mul(&coords)
    }

    /// `(ZᵀZ + c I)⁻¹ Zᵀ r` restricted to the retained singular subspace.
    pub fn ridge_solve(&self, r: &DVector<f64>, c: f64) -> DVector<f64> {
        let mut coords = self.u.tr_mul(r);
        for (x, s) in coords.iter_mut().zip(self.s.iter()) {
            *x *= s / (s * s + c);
        }
        self.v_t.tr_mul(&coords)
    }
}
