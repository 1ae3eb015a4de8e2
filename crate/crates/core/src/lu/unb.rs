//! Unblocked right-looking LU with partial pivoting.

use crate::error::{Error, Result};
use crate::matrix::MatMut;

/// Factors the `m x n` view in place (`m >= n`) and returns the local pivot
/// rows, one per column. Column `j`'s pivot is the first row of largest
/// magnitude at or below the diagonal; the interchange is applied across the
/// whole width of the view. An exactly zero column is left unscaled.
pub(crate) fn lu_unb_in_place(a: &mut MatMut<'_>) -> Vec<usize> {
    let (m, n) = (a.rows(), a.cols());
    let mut ipiv = Vec::with_capacity(n);
    for j in 0..n.min(m) {
        let col = a.col_mut(j);
        let mut p = j;
        let mut best = col[j].abs();
        for (i, v) in col.iter().enumerate().skip(j + 1) {
            if v.abs() > best {
                best = v.abs();
                p = i;
            }
        }
        ipiv.push(p);
        if p != j {
            for c in 0..n {
                a.col_mut(c).swap(j, p);
            }
        }
        let col = a.col_mut(j);
        let d = col[j];
        if d != 0.0 {
            for v in &mut col[j + 1..] {
                *v /= d;
            }
        }
        let lcol: Vec<f64> = a.col_mut(j)[j + 1..].to_vec();
        for c in j + 1..n {
            let col = a.col_mut(c);
            let u = col[j];
            for (v, &l) in col[j + 1..].iter_mut().zip(&lcol) {
                *v -= l * u;
            }
        }
    }
    ipiv
}

/// Unblocked LU of an `m x n` view with `m >= n`.
pub fn lu_unb(mut a: MatMut<'_>) -> Result<super::LuResult> {
    if a.rows() < a.cols() {
        return Err(Error::DimensionMismatch {
            op: "lu_unb",
            detail: format!("needs m >= n, got {}x{}", a.rows(), a.cols()),
        });
    }
    let ipiv = lu_unb_in_place(&mut a);
    Ok(super::LuResult::complete(ipiv, a.as_ref()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{residual_packed, Matrix};
    use crate::oracle::lu_ref;

    #[test]
    fn one_by_one() {
        let mut a = Matrix::from_rows(&[[4.0]]).unwrap();
        let r = lu_unb(a.as_mut()).unwrap();
        assert_eq!(r.ipiv.as_slice(), &[0]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(r.cols_factored, 1);
    }

    #[test]
    fn forced_pivot() {
        let mut a = Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap();
        let r = lu_unb(a.as_mut()).unwrap();
        assert_eq!(r.ipiv.as_slice(), &[1, 1]);
        assert_eq!(a, Matrix::identity(2));
        assert_eq!(r.zero_pivot, None);
    }

    #[test]
    fn tall_random_residual() {
        let a = Matrix::random(7, 4, 2);
        let mut f = a.clone();
        let r = lu_unb(f.as_mut()).unwrap();
        let res = residual_packed(a.as_ref(), f.as_ref(), &r.ipiv).unwrap();
        assert!(res <= 7.0 * 100.0 * f64::EPSILON, "{res}");
    }

    #[test]
    fn ties_pick_lowest_row() {
        let mut a = Matrix::from_rows(&[[1.0, 0.0], [-3.0, 1.0], [3.0, 2.0]]).unwrap();
        let r = lu_unb(a.as_mut()).unwrap();
        assert_eq!(r.ipiv.as_slice()[0], 1);
    }

    #[test]
    fn zero_column_is_flagged_and_skipped() {
        let mut a = Matrix::from_rows(&[[0.0, 1.0], [0.0, 2.0], [0.0, 3.0]]).unwrap();
        let r = lu_unb(a.as_mut()).unwrap();
        assert_eq!(r.zero_pivot, Some(0));
        assert_eq!(r.cols_factored, 2);
        assert!(a.as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn pivots_match_oracle() {
        let a = Matrix::random(20, 20, 11);
        let mut x = a.clone();
        let mut y = a.clone();
        let r1 = lu_unb(x.as_mut()).unwrap();
        let r2 = lu_ref(y.as_mut()).unwrap();
        assert_eq!(r1.ipiv, r2.ipiv);
        let d = x
            .as_slice()
            .iter()
            .zip(y.as_slice())
            .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        assert!(d <= 1e-12, "{d}");
    }

    #[test]
    fn wide_rejected() {
        let mut a = Matrix::zeros(2, 3);
        assert!(lu_unb(a.as_mut()).is_err());
    }
}
