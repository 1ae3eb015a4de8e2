//! Packed five-loop GEMM executed by a team, with optional malleability.
//!
//! ```text
//! Loop 1  for j_c in 0..n step n_c
//! Loop 2    for p_c in 0..k step k_c       pack B_c (slivers round-robin)
//! Loop 3      for i_c in 0..m step m_c     <entry point> pack A_c (slabs round-robin)
//! Loop 4        for j_r in 0..n_c step n_r      round-robin over members
//! Loop 5          for i_r in 0..m_c step m_r    micro-kernel
//! ```
//!
//! Each `(j_c, p_c, i_c)` iteration is a *step*. Membership is frozen inside
//! a step; at the entry point of every step the team checks whether the donor
//! team has finished and, if so, continues the remaining steps with the
//! union of both teams. Every `C` micro-tile of a step is written by exactly
//! one member and `p_c` steps run in order, so the result does not depend on
//! team size or on when a merge happens.

use std::sync::Arc;

use super::micro::{micro_kernel_raw, CInit};
use super::pack::{pack_a_slab, pack_b_sliver};
use crate::config::CacheConfig;
use crate::error::{Error, Result};
use crate::matrix::{MatMut, MatRef, SharedMut};
use crate::team::{MergeSource, TeamCtx, WorkerPool};
use crate::trace::TaskKind;

#[derive(Clone, Copy)]
struct GemmArgs<'a> {
    c: SharedMut<'a>,
    a: MatRef<'a>,
    b: MatRef<'a>,
    alpha: f64,
    beta: f64,
    cfg: CacheConfig,
}

impl GemmArgs<'_> {
    fn m(&self) -> usize {
        self.c.rows()
    }
    fn n(&self) -> usize {
        self.c.cols()
    }
    fn k(&self) -> usize {
        self.a.cols()
    }
    fn n_ic(&self) -> usize {
        self.m().div_ceil(self.cfg.m_c())
    }
    fn n_pc(&self) -> usize {
        self.k().div_ceil(self.cfg.k_c())
    }
    fn n_jc(&self) -> usize {
        self.n().div_ceil(self.cfg.n_c())
    }
    fn steps(&self) -> usize {
        self.n_jc() * self.n_pc() * self.n_ic()
    }
    /// `(j_c, p_c, i_c)` block indices of step `s`.
    fn step(&self, s: usize) -> (usize, usize, usize) {
        let ic = s % self.n_ic();
        let rest = s / self.n_ic();
        (rest / self.n_pc(), rest % self.n_pc(), ic)
    }
}

fn check_dims(c: (usize, usize), a: MatRef<'_>, b: MatRef<'_>) -> Result<()> {
    if a.rows() != c.0 || b.cols() != c.1 || a.cols() != b.rows() {
        return Err(Error::DimensionMismatch {
            op: "gemm",
            detail: format!(
                "C {}x{} = A {}x{} * B {}x{}",
                c.0,
                c.1,
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            ),
        });
    }
    Ok(())
}

/// `C := alpha*C + beta*A*B`, executed collectively by the team in `ctx`.
///
/// Every member must call it with identical arguments. With `merge`, the
/// team checks `merge.flag` at the entry point of every Loop-3 iteration and
/// absorbs the donor workers waiting in `merge.lobby`; the donors then run
/// the remaining iterations with the enlarged team. A malleable call must be
/// the last collective operation of the task that makes it.
#[allow(clippy::too_many_arguments)]
pub fn gemm_malleable<'a>(
    ctx: &mut TeamCtx<'_>,
    c: SharedMut<'a>,
    a: MatRef<'a>,
    b: MatRef<'a>,
    alpha: f64,
    beta: f64,
    cfg: &CacheConfig,
    merge: Option<&MergeSource<'_, 'a>>,
) -> Result<()> {
    check_dims((c.rows(), c.cols()), a, b)?;
    let args = GemmArgs {
        c,
        a,
        b,
        alpha,
        beta,
        cfg: *cfg,
    };
    if args.m() == 0 || args.n() == 0 {
        return Ok(());
    }
    if args.k() == 0 || beta == 0.0 {
        scale_c(ctx, args);
        return Ok(());
    }
    let (a_len, b_len) = (
        cfg.m_c().min(args.m().next_multiple_of(cfg.m_r())) * cfg.k_c().min(args.k()),
        cfg.k_c().min(args.k()) * cfg.n_c().min(args.n().next_multiple_of(cfg.n_r())),
    );
    let sync = ctx.sync().clone();
    ctx.decide(|_| {
        // SAFETY: every other member is blocked in this rendezvous.
        unsafe {
            sync.pack_a.ensure(a_len);
            sync.pack_b.ensure(b_len);
        }
        0
    });
    run_steps(ctx, args, 0, false, merge);
    Ok(())
}

/// `C := alpha*C` (the `k == 0` or `beta == 0` case), columns split over the team.
fn scale_c(ctx: &mut TeamCtx<'_>, args: GemmArgs<'_>) {
    let init = CInit::from_alpha(args.alpha);
    for j in (ctx.rank()..args.n()).step_by(ctx.size()) {
        // SAFETY: column j belongs to this member only.
        let mut col = unsafe { args.c.sub(0, j, args.m(), 1).as_mut() };
        for v in col.col_mut(0) {
            *v = match init {
                CInit::Keep => *v,
                CInit::Zero => 0.0,
                CInit::Scale(s) => s * *v,
            };
        }
    }
    ctx.barrier();
}

fn run_steps<'a>(ctx: &mut TeamCtx<'_>, args: GemmArgs<'a>, first: usize, joined: bool, merge: Option<&MergeSource<'_, 'a>>) {
    let cfg = args.cfg;
    let (m_c, k_c, n_c, m_r, n_r) = (cfg.m_c(), cfg.k_c(), cfg.n_c(), cfg.m_r(), cfg.n_r());
    let (a_ptr, b_ptr) = (ctx.sync().pack_a.ptr(), ctx.sync().pack_b.ptr());

    for s in first..args.steps() {
        if !(joined && s == first) {
            ctx.checkpoint_merge(merge, || {
                Arc::new(move |c: &mut TeamCtx<'_>| run_steps(c, args, s, true, None))
            });
        }
        let (rank, size) = (ctx.rank(), ctx.size());
        let (jc, pc, ic) = args.step(s);
        let (j0, p0, i0) = (jc * n_c, pc * k_c, ic * m_c);
        let nb = n_c.min(args.n() - j0);
        let kb = k_c.min(args.k() - p0);
        let mb = m_c.min(args.m() - i0);
        let slivers = nb.div_ceil(n_r);
        let slabs = mb.div_ceil(m_r);

        if ic == 0 {
            let span = ctx.trace_begin(TaskKind::PackB);
            let src = args.b.sub(p0, j0, kb, nb);
            for sl in (rank..slivers).step_by(size) {
                // SAFETY: sliver `sl` of B_c is written by this member only;
                // nobody reads B_c until the barrier below.
                let dst = unsafe { std::slice::from_raw_parts_mut(b_ptr.add(sl * n_r * kb), n_r * kb) };
                pack_b_sliver(src, sl, n_r, dst);
            }
            ctx.trace_end(span);
        }
        let span = ctx.trace_begin(TaskKind::PackA);
        let src = args.a.sub(i0, p0, mb, kb);
        for slab in (rank..slabs).step_by(size) {
            // SAFETY: as above, for slab `slab` of A_c.
            let dst = unsafe { std::slice::from_raw_parts_mut(a_ptr.add(slab * m_r * kb), m_r * kb) };
            pack_a_slab(src, slab, m_r, args.beta, dst);
        }
        ctx.trace_end(span);
        ctx.barrier();

        let init = if pc == 0 { CInit::from_alpha(args.alpha) } else { CInit::Keep };
        let c_blk = args.c.sub(i0, j0, mb, nb);
        let ldc = c_blk.ld();
        let span = ctx.trace_begin(TaskKind::Gemm);
        for jr in (rank..slivers).step_by(size) {
            let nv = n_r.min(nb - jr * n_r);
            for ir in 0..slabs {
                let mv = m_r.min(mb - ir * m_r);
                // SAFETY: tile (ir, jr) of this step is owned by this member;
                // packed buffers are read-only until the next entry point.
                unsafe {
                    micro_kernel_raw(
                        m_r,
                        n_r,
                        kb,
                        a_ptr.add(ir * m_r * kb),
                        b_ptr.add(jr * n_r * kb),
                        c_blk.ptr().add(ir * m_r + jr * n_r * ldc),
                        ldc,
                        mv,
                        nv,
                        init,
                    );
                }
            }
        }
        ctx.trace_end(span);
    }
    ctx.barrier();
}

/// Non-malleable collective GEMM.
pub fn gemm_team<'a>(
    ctx: &mut TeamCtx<'_>,
    c: SharedMut<'a>,
    a: MatRef<'a>,
    b: MatRef<'a>,
    alpha: f64,
    beta: f64,
    cfg: &CacheConfig,
) -> Result<()> {
    gemm_malleable(ctx, c, a, b, alpha, beta, cfg, None)
}

/// Single-threaded `C := alpha*C + beta*A*B`.
pub fn gemm(c: MatMut<'_>, a: MatRef<'_>, b: MatRef<'_>, alpha: f64, beta: f64, cfg: &CacheConfig) -> Result<()> {
    let c = c.into_shared();
    TeamCtx::solo(|ctx| gemm_team(ctx, c, a, b, alpha, beta, cfg))
}

/// `C := alpha*C + beta*A*B` on every worker of `pool`.
pub fn gemm_pool(
    pool: &WorkerPool,
    c: MatMut<'_>,
    a: MatRef<'_>,
    b: MatRef<'_>,
    alpha: f64,
    beta: f64,
    cfg: &CacheConfig,
) -> Result<()> {
    check_dims((c.rows(), c.cols()), a, b)?;
    let c = c.into_shared();
    pool.run_team(None, |ctx| {
        gemm_team(ctx, c, a, b, alpha, beta, cfg).expect("dimensions checked");
    });
    Ok(())
}
