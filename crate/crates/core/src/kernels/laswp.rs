//! Row interchanges applied to a block of columns.

use super::COL_CHUNK;
use crate::error::{Error, Result};
use crate::matrix::{MatMut, SharedMut};
use crate::pivot::PivotVector;
use crate::team::{TeamCtx, WorkerPool};
use crate::trace::TaskKind;

fn check(piv: &PivotVector, rows: usize) -> Result<()> {
    let top = piv
        .as_slice()
        .iter()
        .enumerate()
        .map(|(k, &p)| k.max(p) + piv.offset())
        .max();
    match top {
        Some(r) if r >= rows => Err(Error::OutOfRange {
            op: "laswp",
            index: r,
            limit: rows.saturating_sub(1),
        }),
        _ => Ok(()),
    }
}

/// Collective `laswp`: columns of `a` are dealt to members in chunks.
pub fn laswp_team(ctx: &mut TeamCtx<'_>, a: SharedMut<'_>, piv: &PivotVector) -> Result<()> {
    check(piv, a.rows())?;
    let n = a.cols();
    let span = ctx.trace_begin(TaskKind::Laswp);
    for c0 in (ctx.rank() * COL_CHUNK..n).step_by(ctx.size() * COL_CHUNK) {
        let w = COL_CHUNK.min(n - c0);
        // SAFETY: this chunk of columns belongs to this member only.
        let mut blk = unsafe { a.sub(0, c0, a.rows(), w).as_mut() };
        for j in 0..w {
            piv.apply_to_column(blk.col_mut(j));
        }
    }
    ctx.trace_end(span);
    ctx.barrier();
    Ok(())
}

pub fn laswp(a: MatMut<'_>, piv: &PivotVector) -> Result<()> {
    piv.apply(a)
}

pub fn laswp_pool(pool: &WorkerPool, a: MatMut<'_>, piv: &PivotVector) -> Result<()> {
    check(piv, a.rows())?;
    let a = a.into_shared();
    pool.run_team(None, |ctx| laswp_team(ctx, a, piv).expect("range checked"));
    Ok(())
}
