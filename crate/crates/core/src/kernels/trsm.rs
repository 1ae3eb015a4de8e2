//! `B := L^{-1} B` for unit lower triangular `L`.
//!
//! Forward substitution column by column. Entry `B[i,j]` receives the updates
//! `B[i,j] - L[i,k]*B[k,j]` for `k = 0, 1, ..., i-1` in that order, the same
//! sequence the unblocked factorization applies to it.

use super::COL_CHUNK;
use crate::error::{Error, Result};
use crate::matrix::{MatMut, MatRef, SharedMut};
use crate::team::{TeamCtx, WorkerPool};
use crate::trace::TaskKind;

fn check(l: MatRef<'_>, rows: usize, op: &'static str) -> Result<()> {
    if l.rows() != l.cols() || l.rows() != rows {
        return Err(Error::DimensionMismatch {
            op,
            detail: format!("L is {}x{}, B has {rows} rows", l.rows(), l.cols()),
        });
    }
    Ok(())
}

#[inline]
fn solve_column(l: MatRef<'_>, x: &mut [f64]) {
    let b = l.rows();
    for k in 0..b {
        let xk = x[k];
        let lk = &l.col(k)[k + 1..];
        for (xi, &lik) in x[k + 1..].iter_mut().zip(lk) {
            *xi -= lik * xk;
        }
    }
}

/// Collective solve: columns of `B` are dealt to members in chunks.
pub fn trsm_llu_team(ctx: &mut TeamCtx<'_>, l: MatRef<'_>, b: SharedMut<'_>) -> Result<()> {
    check(l, b.rows(), "trsm_llu")?;
    let n = b.cols();
    let span = ctx.trace_begin(TaskKind::Trsm);
    for c0 in (ctx.rank() * COL_CHUNK..n).step_by(ctx.size() * COL_CHUNK) {
        let w = COL_CHUNK.min(n - c0);
        // SAFETY: this chunk of columns belongs to this member only.
        let mut blk = unsafe { b.sub(0, c0, b.rows(), w).as_mut() };
        for j in 0..w {
            solve_column(l, blk.col_mut(j));
        }
    }
    ctx.trace_end(span);
    ctx.barrier();
    Ok(())
}

pub fn trsm_llu(l: MatRef<'_>, mut b: MatMut<'_>) -> Result<()> {
    check(l, b.rows(), "trsm_llu")?;
    for j in 0..b.cols() {
        solve_column(l, b.col_mut(j));
    }
    Ok(())
}

pub fn trsm_llu_pool(pool: &WorkerPool, l: MatRef<'_>, b: MatMut<'_>) -> Result<()> {
    check(l, b.rows(), "trsm_llu")?;
    let b = b.into_shared();
    pool.run_team(None, |ctx| trsm_llu_team(ctx, l, b).expect("dimensions checked"));
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;

    fn unit_lower(b: usize, seed: u64) -> Matrix {
        let mut l = Matrix::random(b, b, seed);
        for j in 0..b {
            for i in 0..=j {
                l.set(i, j, if i == j { 1.0 } else { 0.0 });
            }
        }
        l
    }

    #[test]
    fn identity_leaves_b() {
        let l = Matrix::identity(6);
        let mut b = Matrix::random(6, 5, 1);
        let before = b.clone();
        trsm_llu(l.as_ref(), b.as_mut()).unwrap();
        assert!(b.bitwise_eq(&before));
    }

    #[test]
    fn two_by_two() {
        let l = Matrix::from_rows(&[[1.0, 0.0], [2.0, 1.0]]).unwrap();
        let mut b = Matrix::from_rows(&[[1.0], [0.0]]).unwrap();
        trsm_llu(l.as_ref(), b.as_mut()).unwrap();
        assert_eq!(b.to_col_major(), vec![1.0, -2.0]);
    }

    #[test]
    fn multiply_back() {
        let (bs, n) = (64, 200);
        let l = unit_lower(bs, 3);
        let b0 = Matrix::random(bs, n, 4);
        let mut x = b0.clone();
        trsm_llu(l.as_ref(), x.as_mut()).unwrap();
        let mut err: f64 = 0.0;
        for j in 0..n {
            for i in 0..bs {
                let mut s = 0.0;
                for k in 0..=i {
                    s += l.get(i, k) * x.get(k, j);
                }
                err = err.max((s - b0.get(i, j)).abs() / b0.as_ref().max_abs().max(1.0));
            }
        }
        let growth = x.as_ref().max_abs().max(1.0);
        assert!(err <= bs as f64 * 8.0 * f64::EPSILON * growth, "err={err}");
    }

    #[test]
    fn team_matches_serial_bits() {
        let l = unit_lower(23, 5);
        let b0 = Matrix::random(23, 77, 6);
        let mut serial = b0.clone();
        trsm_llu(l.as_ref(), serial.as_mut()).unwrap();
        for t in [2, 3] {
            let pool = WorkerPool::new(t).unwrap();
            let mut par = b0.clone();
            trsm_llu_pool(&pool, l.as_ref(), par.as_mut()).unwrap();
            assert!(par.bitwise_eq(&serial));
        }
    }

    #[test]
    fn shape_mismatch() {
        let l = Matrix::identity(3);
        let mut b = Matrix::zeros(4, 2);
        assert!(trsm_llu(l.as_ref(), b.as_mut()).is_err());
    }
}
