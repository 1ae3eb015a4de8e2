//! Blocked LU with look-ahead of depth one.
//!
//! Every outer iteration splits the trailing matrix into the next panel
//! (`P`, factored by team PF) and the rest (`R`, updated by team RU):
//!
//! ```text
//! PF1  A12^P := trilu(A11)^{-1} A12^P      RU1  A12^R := trilu(A11)^{-1} A12^R
//! PF2  A22^P := A22^P - A21 A12^P          RU2  A22^R := A22^R - A21 A12^R
//! PF3  factor A22^P
//! ```
//!
//! The policy decides what happens when one team finishes first: nothing
//! (LU_LA), PF joins RU between column blocks of RU2 (LU_WS_STATIC) or at
//! the next GEMM entry point (LU_MB), and additionally RU stops PF3 early
//! when RU finishes first (LU_ET).

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use super::blocked::{ll_team, rl_team, PivotStore, StopFn};
use super::{LuResult, Policy, Variant};
use crate::config::CacheConfig;
use crate::error::{Error, Result};
use crate::kernels::{gemm_malleable, gemm_team, laswp_team, trsm_llu_team};
use crate::matrix::{MatMut, MatRef, SharedMut};
use crate::team::{MergeSource, TeamCtx, TwoTeams, WorkerPool};
use crate::trace::{TaskKind, TraceSink};

/// RU2 of LU_WS_STATIC: `q` column blocks, with a chance for PF to join
/// before each of them.
#[allow(clippy::too_many_arguments)]
fn ws_blocks<'a>(
    ctx: &mut TeamCtx<'_>,
    c: SharedMut<'a>,
    a: MatRef<'a>,
    b: MatRef<'a>,
    q: usize,
    cfg: CacheConfig,
    from: usize,
    joined: bool,
    merge: Option<&MergeSource<'_, 'a>>,
) {
    let n = c.cols();
    let width = n.div_ceil(q.max(1)).max(1);
    let count = n.div_ceil(width);
    for i in from..count {
        if !(joined && i == from) {
            ctx.checkpoint_merge(merge, || {
                Arc::new(move |cx: &mut TeamCtx<'_>| ws_blocks(cx, c, a, b, q, cfg, i, true, None))
            });
        }
        let j0 = i * width;
        let w = width.min(n - j0);
        gemm_team(ctx, c.sub(0, j0, c.rows(), w), a, b.sub(0, j0, b.rows(), w), 1.0, -1.0, &cfg).expect("conformal");
    }
}

/// Factors the panel `a` (top-left entry `(g,g)`) with the inner block size.
fn factor_panel(
    ctx: &mut TeamCtx<'_>,
    policy: &Policy,
    a: SharedMut<'_>,
    g: usize,
    piv: &PivotStore,
    stop: Option<StopFn<'_>>,
) -> usize {
    let b_i = policy.block.b_inner();
    let span = ctx.trace_begin(TaskKind::Panel);
    let k = if policy.variant == Variant::LuEt {
        ll_team(ctx, a, g, b_i, &policy.cache, piv, stop)
    } else {
        rl_team(ctx, a, g, &[b_i], &policy.cache, piv, false);
        a.cols()
    };
    ctx.trace_end(span);
    k
}

/// Look-ahead LU of an `m x n` view (`m >= n`) on `pool` under `policy`.
pub fn lu_la(a: MatMut<'_>, policy: &Policy, pool: &WorkerPool, sink: Option<&TraceSink>) -> Result<LuResult> {
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(Error::DimensionMismatch {
            op: "lu_la",
            detail: format!("needs m >= n, got {m}x{n}"),
        });
    }
    if policy.variant == Variant::Lu {
        return Err(Error::InvalidConfig("lu_la needs a look-ahead variant".into()));
    }
    policy.validate(pool.threads())?;
    let teams = TwoTeams::new(pool.threads(), policy.t_pf)?;
    let s = a.into_shared();
    let piv = PivotStore::new(n);
    let factored = AtomicUsize::new(0);
    let et_widths = Mutex::new(Vec::new());
    let (b_o, b_i) = (policy.block.b_outer(), policy.block.b_inner());
    let cfg = policy.cache;
    let is_et = policy.variant == Variant::LuEt;

    pool.run(sink, |w| {
        w.set_iter(0);
        let w0 = b_o.min(n);
        {
            let mut ctx = teams.all_team(w);
            factor_panel(&mut ctx, policy, s.sub(0, 0, m, w0), 0, &piv, None);
        }
        let (mut c0, mut wc) = (0, w0);
        let mut swapped_end = w0;
        let mut target = b_o;
        let mut iter = 0;
        while c0 + wc < n {
            iter += 1;
            w.set_iter(iter);
            let j = c0 + wc;
            {
                let mut ctx = teams.all_team(w);
                let pv = piv.slice(c0, wc, 0);
                if c0 > 0 {
                    laswp_team(&mut ctx, s.sub(0, 0, m, c0), &pv).expect("pivots inside the matrix");
                }
                if swapped_end < n {
                    laswp_team(&mut ctx, s.sub(0, swapped_end, m, n - swapped_end), &pv)
                        .expect("pivots inside the matrix");
                }
            }
            let wn = target.min(n - j);
            let r0 = j + wn;
            let nr = n - r0;
            // SAFETY: the factored block is read-only during the iteration.
            let l11 = unsafe { s.sub(c0, c0, wc, wc).as_ref() };
            let l21 = unsafe { s.sub(j, c0, m - j, wc).as_ref() };
            let src = MergeSource {
                flag: &teams.pf_done,
                lobby: &teams.lobby,
                donors: teams.pf_members(),
            };
            let stop_fn = || teams.ru_done.is_set();
            teams.run_split(
                w,
                policy.variant != Variant::LuLa,
                |ctx| {
                    let a12 = s.sub(c0, j, wc, wn);
                    trsm_llu_team(ctx, l11, a12).expect("conformal");
                    let u12 = unsafe { a12.as_ref() };
                    gemm_team(ctx, s.sub(j, j, m - j, wn), l21, u12, 1.0, -1.0, &cfg).expect("conformal");
                    let stop: Option<StopFn<'_>> = if is_et && nr > 0 { Some(&stop_fn) } else { None };
                    let k = factor_panel(ctx, policy, s.sub(j, j, m - j, wn), j, &piv, stop);
                    if ctx.is_leader() {
                        factored.store(k, Ordering::Relaxed);
                    }
                },
                |ctx| {
                    if nr == 0 {
                        return;
                    }
                    let a12 = s.sub(c0, r0, wc, nr);
                    trsm_llu_team(ctx, l11, a12).expect("conformal");
                    let u12 = unsafe { a12.as_ref() };
                    let c = s.sub(j, r0, m - j, nr);
                    match policy.variant {
                        Variant::LuWsStatic => ws_blocks(ctx, c, l21, u12, policy.q, cfg, 0, false, Some(&src)),
                        Variant::LuMb | Variant::LuEt => {
                            gemm_malleable(ctx, c, l21, u12, 1.0, -1.0, &cfg, Some(&src)).expect("conformal")
                        }
                        _ => gemm_team(ctx, c, l21, u12, 1.0, -1.0, &cfg).expect("conformal"),
                    }
                },
            );
            let k = factored.load(Ordering::Relaxed);
            if is_et {
                if k < wn {
                    if w.id() == 0 {
                        et_widths.lock().unwrap_or_else(|e| e.into_inner()).push(k);
                    }
                    target = b_i.max(k);
                } else {
                    target = b_o.min(target * 2);
                }
            }
            swapped_end = r0;
            c0 = j;
            wc = k;
        }
        let mut ctx = teams.all_team(w);
        if c0 > 0 {
            laswp_team(&mut ctx, s.sub(0, 0, m, c0), &piv.slice(c0, wc, 0)).expect("pivots inside the matrix");
        }
    });

    let et_widths = et_widths.into_inner().unwrap_or_else(|e| e.into_inner());
    // SAFETY: the pool has finished.
    let mut res = LuResult::complete(piv.into_vector().as_slice().to_vec(), unsafe { s.as_ref() });
    res.et_events = et_widths.len();
    res.et_widths = et_widths;
    Ok(res)
}
