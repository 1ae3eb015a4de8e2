//! Blocked right-looking and left-looking LU, executed collectively.
//!
//! Both variants apply to every entry of the matrix the same sequence of
//! updates `a - l*u` (ascending in the eliminated column) as the unblocked
//! algorithm, so for a given input they produce bitwise-identical factors
//! and pivots whatever the block sizes and team sizes.

use std::sync::Mutex;

use super::unb::lu_unb_in_place;
use super::LuResult;
use crate::config::{BlockConfig, CacheConfig};
use crate::error::{Error, Result};
use crate::kernels::{gemm_team, laswp_team, trsm_llu_team};
use crate::matrix::{MatMut, SharedMut};
use crate::pivot::PivotVector;
use crate::team::{TeamCtx, WorkerPool};
use crate::trace::TaskKind;

/// Pivot rows of a factorization in progress, in matrix coordinates,
/// indexed by column. Written by the member that factors a panel, read by
/// the whole team after the following barrier.
pub(crate) struct PivotStore(Mutex<Vec<usize>>);

impl PivotStore {
    pub(crate) fn new(n: usize) -> Self {
        PivotStore(Mutex::new((0..n).collect()))
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, Vec<usize>> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Records the local pivots of a panel whose top-left entry is `(g, g)`.
    fn record(&self, g: usize, local: &[usize]) {
        let mut v = self.lock();
        for (k, &p) in local.iter().enumerate() {
            v[g + k] = g + p;
        }
    }

    /// Interchanges of columns `c..c+len`, for a view whose row 0 is matrix row `base`.
    pub(crate) fn slice(&self, c: usize, len: usize, base: usize) -> PivotVector {
        let v = self.lock();
        PivotVector::from_raw(v[c..c + len].iter().map(|&p| p - c).collect(), c - base)
    }

    pub(crate) fn into_vector(self) -> PivotVector {
        PivotVector::from_raw(self.0.into_inner().unwrap_or_else(|e| e.into_inner()), 0)
    }
}

/// Stop condition polled by the left-looking variant after each block.
pub type StopFn<'s> = &'s (dyn Fn() -> bool + Sync);

/// Unblocked factorization of a panel by the team leader.
fn unb_team(ctx: &mut TeamCtx<'_>, a: SharedMut<'_>, g: usize, piv: &PivotStore) {
    ctx.leader_then_barrier(|_| {
        // SAFETY: the rest of the team waits in the barrier.
        let mut view = unsafe { a.as_mut() };
        let local = lu_unb_in_place(&mut view);
        piv.record(g, &local);
    });
}

/// Right-looking blocked LU of `a`, whose entry `(0,0)` is matrix entry
/// `(g,g)`. `blocks` lists the block size of each nesting level; the
/// innermost panels are factored by the unblocked algorithm.
pub(crate) fn rl_team(
    ctx: &mut TeamCtx<'_>,
    a: SharedMut<'_>,
    g: usize,
    blocks: &[usize],
    cfg: &CacheConfig,
    piv: &PivotStore,
    outer: bool,
) {
    let (m, n) = (a.rows(), a.cols());
    let Some((&b, inner)) = blocks.split_first() else {
        unb_team(ctx, a, g, piv);
        return;
    };
    for (it, j) in (0..n).step_by(b.max(1)).enumerate() {
        let w = b.min(n - j);
        if outer {
            ctx.worker().set_iter(it);
        }
        let span = outer.then(|| ctx.trace_begin(TaskKind::Panel));
        rl_team(ctx, a.sub(j, j, m - j, w), g + j, inner, cfg, piv, false);
        if let Some(s) = span {
            ctx.trace_end(s);
        }
        let pv = piv.slice(g + j, w, g);
        if j > 0 {
            laswp_team(ctx, a.sub(0, 0, m, j), &pv).expect("pivots inside the view");
        }
        let r = j + w;
        if r < n {
            laswp_team(ctx, a.sub(0, r, m, n - r), &pv).expect("pivots inside the view");
            // SAFETY: A11 is read-only while A12 and A22 are updated.
            let l11 = unsafe { a.sub(j, j, w, w).as_ref() };
            let a12 = a.sub(j, r, w, n - r);
            trsm_llu_team(ctx, l11, a12).expect("conformal");
            if r < m {
                let (l21, u12) = unsafe { (a.sub(r, j, m - r, w).as_ref(), a12.as_ref()) };
                gemm_team(ctx, a.sub(r, r, m - r, n - r), l21, u12, 1.0, -1.0, cfg).expect("conformal");
            }
        }
    }
}

/// Left-looking blocked LU with block size `b`, polling `stop` after every
/// block but the last. Returns the number of columns factored; if it is
/// less than `n`, the interchanges found so far have been applied to the
/// remaining columns.
pub(crate) fn ll_team(
    ctx: &mut TeamCtx<'_>,
    a: SharedMut<'_>,
    g: usize,
    b: usize,
    cfg: &CacheConfig,
    piv: &PivotStore,
    stop: Option<StopFn<'_>>,
) -> usize {
    let (m, n) = (a.rows(), a.cols());
    let mut j = 0;
    while j < n {
        let w = b.max(1).min(n - j);
        if j > 0 {
            laswp_team(ctx, a.sub(0, j, m, w), &piv.slice(g, j, g)).expect("pivots inside the view");
            // SAFETY: columns 0..j are read-only during LL1 and LL2.
            let l00 = unsafe { a.sub(0, 0, j, j).as_ref() };
            let a01 = a.sub(0, j, j, w);
            trsm_llu_team(ctx, l00, a01).expect("conformal");
            let (l10, u01) = unsafe { (a.sub(j, 0, m - j, j).as_ref(), a01.as_ref()) };
            gemm_team(ctx, a.sub(j, j, m - j, w), l10, u01, 1.0, -1.0, cfg).expect("conformal");
        }
        unb_team(ctx, a.sub(j, j, m - j, w), g + j, piv);
        if j > 0 {
            laswp_team(ctx, a.sub(0, 0, m, j), &piv.slice(g + j, w, g)).expect("pivots inside the view");
        }
        j += w;
        if j < n {
            if let Some(s) = stop {
                if ctx.agree(s) {
                    break;
                }
            }
        }
    }
    if j < n {
        laswp_team(ctx, a.sub(0, j, m, n - j), &piv.slice(g, j, g)).expect("pivots inside the view");
    }
    j
}

fn check_shape(op: &'static str, a: &MatMut<'_>) -> Result<()> {
    if a.rows() < a.cols() {
        return Err(Error::DimensionMismatch {
            op,
            detail: format!("needs m >= n, got {}x{}", a.rows(), a.cols()),
        });
    }
    Ok(())
}

fn finish(piv: PivotStore, cols: usize, a: MatMut<'_>) -> LuResult {
    let mut ipiv = piv.into_vector().as_slice().to_vec();
    ipiv.truncate(cols);
    LuResult::partial(ipiv, cols, a.as_ref())
}

/// Single-threaded blocked right-looking LU with block size `b`.
pub fn lu_blk_rl(a: MatMut<'_>, b: usize, cfg: &CacheConfig) -> Result<LuResult> {
    check_shape("lu_blk_rl", &a)?;
    if b == 0 {
        return Err(Error::InvalidConfig("block size must be positive".into()));
    }
    let n = a.cols();
    let piv = PivotStore::new(n);
    let s = a.into_shared();
    TeamCtx::solo(|ctx| rl_team(ctx, s, 0, &[b], cfg, &piv, false));
    // SAFETY: the team has finished; this is the only view left.
    Ok(finish(piv, n, unsafe { s.as_mut() }))
}

/// Two-level blocked right-looking LU on every worker of `pool`: outer
/// blocks of `b_outer` columns whose panels are factored with `b_inner`.
pub fn lu_blk_rl_pool(pool: &WorkerPool, a: MatMut<'_>, block: BlockConfig, cfg: &CacheConfig) -> Result<LuResult> {
    check_shape("lu_blk_rl", &a)?;
    let n = a.cols();
    let piv = PivotStore::new(n);
    let s = a.into_shared();
    pool.run_team(None, |ctx| rl_team(ctx, s, 0, &[block.b_outer(), block.b_inner()], cfg, &piv, false));
    Ok(finish(piv, n, unsafe { s.as_mut() }))
}

/// Single-threaded blocked left-looking LU with block size `b`, stopping
/// early when `stop` returns true at the end of a block.
pub fn lu_blk_ll(a: MatMut<'_>, b: usize, stop: Option<StopFn<'_>>, cfg: &CacheConfig) -> Result<LuResult> {
    check_shape("lu_blk_ll", &a)?;
    if b == 0 {
        return Err(Error::InvalidConfig("block size must be positive".into()));
    }
    let piv = PivotStore::new(a.cols());
    let s = a.into_shared();
    let k = TeamCtx::solo(|ctx| ll_team(ctx, s, 0, b, cfg, &piv, stop));
    Ok(finish(piv, k, unsafe { s.as_mut() }))
}

/// [`lu_blk_ll`] on every worker of `pool`.
pub fn lu_blk_ll_pool(
    pool: &WorkerPool,
    a: MatMut<'_>,
    b: usize,
    stop: Option<StopFn<'_>>,
    cfg: &CacheConfig,
) -> Result<LuResult> {
    check_shape("lu_blk_ll", &a)?;
    if b == 0 {
        return Err(Error::InvalidConfig("block size must be positive".into()));
    }
    let piv = PivotStore::new(a.cols());
    let s = a.into_shared();
    let k = std::sync::atomic::AtomicUsize::new(0);
    pool.run_team(None, |ctx| {
        let got = ll_team(ctx, s, 0, b, cfg, &piv, stop);
        if ctx.is_leader() {
            k.store(got, std::sync::atomic::Ordering::Relaxed);
        }
    });
    Ok(finish(piv, k.into_inner(), unsafe { s.as_mut() }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lu::lu_unb;
    use crate::matrix::{residual_packed, Matrix};
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn cfg() -> CacheConfig {
        CacheConfig::new(32, 24, 64, 4, 4).unwrap()
    }

    fn tol(n: usize) -> f64 {
        n as f64 * 100.0 * f64::EPSILON
    }

    #[test]
    fn single_panel_is_unblocked() {
        let a = Matrix::random(40, 30, 1);
        let mut x = a.clone();
        let mut y = a.clone();
        let r1 = lu_unb(x.as_mut()).unwrap();
        let r2 = lu_blk_rl(y.as_mut(), 30, &cfg()).unwrap();
        assert!(x.bitwise_eq(&y));
        assert_eq!(r1.ipiv, r2.ipiv);
    }

    #[test]
    fn block_sizes_agree_and_residual_holds() {
        let n = 300;
        let a = Matrix::random(n, n, 2);
        let mut x = a.clone();
        let mut y = a.clone();
        let r64 = lu_blk_rl(x.as_mut(), 64, &cfg()).unwrap();
        let r32 = lu_blk_rl(y.as_mut(), 32, &cfg()).unwrap();
        assert!(residual_packed(a.as_ref(), x.as_ref(), &r64.ipiv).unwrap() <= tol(n));
        assert!(residual_packed(a.as_ref(), y.as_ref(), &r32.ipiv).unwrap() <= tol(n));
        assert!(x.bitwise_eq(&y));
        assert_eq!(r64.ipiv, r32.ipiv);
    }

    #[test]
    fn diagonally_dominant_integer_matrix_keeps_pivots() {
        let n = 256;
        let mut a = Matrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                a.set(i, j, if i == j { 4.0 * n as f64 } else { ((i + 2 * j) % 5) as f64 - 2.0 });
            }
        }
        let mut x = a.clone();
        let mut y = a.clone();
        let r1 = lu_blk_rl(x.as_mut(), 256, &cfg()).unwrap();
        let r2 = lu_blk_rl(y.as_mut(), 128, &cfg()).unwrap();
        assert_eq!(r1.ipiv, r2.ipiv);
        assert_eq!(r1.ipiv, PivotVector::identity(n));
    }

    #[test]
    fn left_looking_matches_right_looking() {
        let a = Matrix::random(200, 96, 3);
        let mut x = a.clone();
        let mut y = a.clone();
        let rl = lu_blk_rl(x.as_mut(), 32, &cfg()).unwrap();
        let ll = lu_blk_ll(y.as_mut(), 32, None, &cfg()).unwrap();
        assert_eq!(ll.cols_factored, 96);
        assert_eq!(rl.ipiv, ll.ipiv);
        assert!(residual_packed(a.as_ref(), y.as_ref(), &ll.ipiv).unwrap() <= tol(200));
        assert!(x.bitwise_eq(&y));
    }

    #[test]
    fn stop_preset_factors_one_block() {
        let mut a = Matrix::random(100, 64, 4);
        let r = lu_blk_ll(a.as_mut(), 16, Some(&|| true), &cfg()).unwrap();
        assert_eq!(r.cols_factored, 16);
        assert_eq!(r.ipiv.len(), 16);
    }

    #[test]
    fn stop_after_three_polls() {
        let a = Matrix::random(300, 256, 5);
        let mut x = a.clone();
        let polls = AtomicUsize::new(0);
        let stop = || polls.fetch_add(1, Ordering::Relaxed) + 1 >= 3;
        let r = lu_blk_ll(x.as_mut(), 32, Some(&stop), &cfg()).unwrap();
        assert_eq!(r.cols_factored, 96);

        // the stopped panel equals a full factorization of its first 96 columns,
        // with the same interchanges applied to the rest
        let mut y = a.clone();
        let full = lu_blk_ll(y.as_mut().submatrix_mut(0, 0, 300, 96).unwrap(), 32, None, &cfg()).unwrap();
        assert_eq!(full.ipiv, r.ipiv);
        assert!(x.as_ref().sub(0, 0, 300, 96).bitwise_eq(y.as_ref().sub(0, 0, 300, 96)));
        let mut rest = a.as_ref().sub(0, 96, 300, 160).to_matrix();
        r.ipiv.apply(rest.as_mut()).unwrap();
        assert!(x.as_ref().sub(0, 96, 300, 160).bitwise_eq(rest.as_ref()));
    }

    #[test]
    fn pool_variants_match_serial_bits() {
        let a = Matrix::random(150, 150, 6);
        let mut s = a.clone();
        let rs = lu_blk_rl(s.as_mut(), 16, &cfg()).unwrap();
        let pool = WorkerPool::new(3).unwrap();
        let mut p = a.clone();
        let rp = lu_blk_rl_pool(&pool, p.as_mut(), BlockConfig::new(64, 16).unwrap(), &cfg()).unwrap();
        assert!(s.bitwise_eq(&p));
        assert_eq!(rs.ipiv, rp.ipiv);
        let mut q = a.clone();
        let rq = lu_blk_ll_pool(&pool, q.as_mut(), 16, None, &cfg()).unwrap();
        assert!(s.bitwise_eq(&q));
        assert_eq!(rs.ipiv, rq.ipiv);
    }
}
