//! Marginally optimal rectangle heights.
//!
//! Both template problems are quadratic in the heights `A` once the centers
//! and widths are fixed, so `A` follows from a `q × q` pseudoinverse solve.

use nalgebra::{DMatrix, DVector};

use crate::error::{AatrError, Result};
use crate::linalg::sym_pinv_solve;

fn check_shapes(s: &DMatrix<f64>, y_centered: &DVector<f64>) -> Result<()> {
    if s.nrows() != y_centered.len() {
        return Err(AatrError::DimensionMismatch {
            what: "rows of S",
            expected: y_centered.len(),
            actual: s.nrows(),
        });
    }
    if s.ncols() == 0 {
        return Err(AatrError::invalid("S has no columns"));
    }
    Ok(())
}

fn cutoff(q: usize) -> f64 {
    q as f64
}

/// `A = Σ_SS⁺ Σ_yS` with `Σ_SS = SᵀS` and `Σ_yS = Sᵀ(y - ȳ)`.
pub fn closed_form_heights_init(s: &DMatrix<f64>, y_centered: &DVector<f64>) -> Result<DVector<f64>> {
    check_shapes(s, y_centered)?;
    let sss = s.tr_mul(s);
    let sys = s.tr_mul(y_centered);
    sym_pinv_solve(&sss, &sys, cutoff(s.ncols()))
}

/// `A = [Σ_SS + λ Σ_GG]⁺ [Σ_yS + λ Σ_βG]`.
pub fn closed_form_heights_reshape(
    s: &DMatrix<f64>,
    y_centered: &DVector<f64>,
    sgg: &DMatrix<f64>,
    sbg: &DVector<f64>,
    lambda: f64,
) -> Result<DVector<f64>> {
    check_shapes(s, y_centered)?;
    let q = s.ncols();
    if sgg.shape() != (q, q) {
        return Err(AatrError::DimensionMismatch {
            what: "size of Σ_GG",
            expected: q,
            actual: sgg.nrows(),
        });
    }
    if sbg.len() != q {
        return Err(AatrError::DimensionMismatch {
            what: "length of Σ_βG",
            expected: q,
            actual: sbg.len(),
        });
    }
    let scale = sgg.amax().max(1.0);
    if (sgg - sgg.transpose()).amax() > 1e-12 * scale {
        return Err(AatrError::invalid("Σ_GG is not symmetric"));
    }
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(AatrError::invalid(format!(
            "lambda must be positive and finite, got {lambda}"
        )));
    }
    let lhs = s.tr_mul(s) + sgg * lambda;
    let rhs = s.tr_mul(y_centered) + sbg * lambda;
    sym_pinv_solve(&lhs, &rhs, cutoff(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_s(n: usize, q: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DMatrix::from_fn(n, q, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn recovers_exact_heights() {
        let s = random_s(30, 3, 1);
        let truth = DVector::from_vec(vec![1.5, -0.7, 2.2]);
        let y = &s * &truth;
        let a = closed_form_heights_init(&s, &y).unwrap();
        assert!((a - truth).amax() < 1e-8);
    }

    #[test]
    fn zero_s_gives_zero_heights() {
        let s = DMatrix::zeros(10, 2);
        let y = DVector::from_fn(10, |i, _| i as f64 - 4.5);
        assert_eq!(closed_form_heights_init(&s, &y).unwrap(), DVector::zeros(2));
    }

    #[test]
    fn duplicate_columns_split_evenly() {
        let mut s = random_s(20, 2, 4);
        let c = s.column(0).clone_owned();
        s.set_column(1, &c);
        let y = DVector::from_fn(20, |i, _| ((i * 7) % 5) as f64 - 2.0);
        let a = closed_form_heights_init(&s, &y).unwrap();
        assert!((a[0] - a[1]).abs() < 1e-10);
        // oracle: SVD pseudoinverse of S itself
        let oracle = s.clone().pseudo_inverse(1e-12).unwrap() * &y;
        assert!((a - oracle).amax() < 1e-8);
    }

    #[test]
    fn vanishing_penalty_matches_init() {
        let s = random_s(25, 2, 8);
        let y = DVector::from_fn(25, |i, _| (i as f64).sin());
        let sgg = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.3]);
        let sbg = DVector::from_vec(vec![0.2, -0.4]);
        let a0 = closed_form_heights_init(&s, &y).unwrap();
        let a1 = closed_form_heights_reshape(&s, &y, &sgg, &sbg, 1e-12).unwrap();
        assert!((a0 - a1).amax() < 1e-6);
    }

    #[test]
    fn rejects_asymmetric_gram() {
        let s = random_s(5, 2, 0);
        let y = DVector::zeros(5);
        let sgg = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.0, 1.0]);
        let sbg = DVector::zeros(2);
        assert!(closed_form_heights_reshape(&s, &y, &sgg, &sbg, 1.0).is_err());
        assert!(closed_form_heights_init(&s, &DVector::zeros(4)).is_err());
    }
}
