//! The `m_r x n_r` micro-kernel.
//!
//! Written as plain scalar loops over a register tile so the compiler can
//! vectorize them. The tile is loaded from `C` first and every product is
//! added to it in ascending `k` order, so an element of `C` receives exactly
//! the sequence of updates `c = c + a_k * b_k` that an unblocked algorithm
//! would apply. Rust never contracts these into fused multiply-adds.

use crate::config::MAX_TILE;
use crate::error::{Error, Result};
use crate::matrix::MatMut;

/// What the tile starts from before the products are added.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CInit {
    /// Accumulate into the current contents of `C`.
    Keep,
    /// Ignore the contents of `C` (treated as zero, NaNs included).
    Zero,
    /// Start from `s * C`.
    Scale(f64),
}

impl CInit {
    pub(crate) fn from_alpha(alpha: f64) -> CInit {
        if alpha == 1.0 {
            CInit::Keep
        } else if alpha == 0.0 {
            CInit::Zero
        } else {
            CInit::Scale(alpha)
        }
    }
}

/// Raw micro-kernel call.
///
/// `a` holds `k` columns of `m_r` entries, `b` holds `k` rows of `n_r`
/// entries, `c` points at an `m_valid x n_valid` tile with column stride `ldc`.
///
/// # Safety
/// `a` and `b` must be valid for `k*m_r` and `k*n_r` reads, `c` for the tile.
#[inline]
#[allow(clippy::too_many_arguments)]
pub(crate) unsafe fn micro_kernel_raw(
    m_r: usize,
    n_r: usize,
    k: usize,
    a: *const f64,
    b: *const f64,
    c: *mut f64,
    ldc: usize,
    m_valid: usize,
    n_valid: usize,
    init: CInit,
) {
    macro_rules! fixed {
        ($($mr:literal x $nr:literal),*) => {
            match (m_r, n_r) {
                $(($mr, $nr) => kernel_fixed::<$mr, $nr>(k, a, b, c, ldc, m_valid, n_valid, init),)*
                _ => kernel_dyn(m_r, n_r, k, a, b, c, ldc, m_valid, n_valid, init),
            }
        };
    }
    fixed!(8 x 4, 4 x 4, 8 x 8, 4 x 8, 6 x 8, 8 x 6, 12 x 4, 16 x 4, 2 x 2)
}

#[inline(always)]
#[allow(clippy::too_many_arguments, clippy::needless_range_loop)]
unsafe fn kernel_fixed<const MR: usize, const NR: usize>(
    k: usize,
    a: *const f64,
    b: *const f64,
    c: *mut f64,
    ldc: usize,
    mv: usize,
    nv: usize,
    init: CInit,
) {
    let mut ab = [[0.0_f64; MR]; NR];
    match init {
        CInit::Zero => {}
        CInit::Keep => {
            for j in 0..nv {
                for i in 0..mv {
                    ab[j][i] = *c.add(i + j * ldc);
                }
            }
        }
        CInit::Scale(s) => {
            for j in 0..nv {
                for i in 0..mv {
                    ab[j][i] = s * *c.add(i + j * ldc);
                }
            }
        }
    }
    for p in 0..k {
        let ap = std::slice::from_raw_parts(a.add(p * MR), MR);
        let bp = std::slice::from_raw_parts(b.add(p * NR), NR);
        for j in 0..NR {
            let bj = bp[j];
            for i in 0..MR {
                ab[j][i] += ap[i] * bj;
            }
        }
    }
    for j in 0..nv {
        for i in 0..mv {
            *c.add(i + j * ldc) = ab[j][i];
        }
    }
}

#[allow(clippy::too_many_arguments)]
unsafe fn kernel_dyn(
    m_r: usize,
    n_r: usize,
    k: usize,
    a: *const f64,
    b: *const f64,
    c: *mut f64,
    ldc: usize,
    mv: usize,
    nv: usize,
    init: CInit,
) {
    assert!(m_r * n_r <= MAX_TILE);
    let mut ab = [0.0_f64; MAX_TILE];
    match init {
        CInit::Zero => {}
        CInit::Keep | CInit::Scale(_) => {
            let s = if let CInit::Scale(s) = init { Some(s) } else { None };
            for j in 0..nv {
                for i in 0..mv {
                    let v = *c.add(i + j * ldc);
                    ab[i + j * m_r] = s.map_or(v, |s| s * v);
                }
            }
        }
    }
    for p in 0..k {
        for j in 0..n_r {
            let bj = *b.add(p * n_r + j);
            for i in 0..m_r {
                ab[i + j * m_r] += *a.add(p * m_r + i) * bj;
            }
        }
    }
    for j in 0..nv {
        for i in 0..mv {
            *c.add(i + j * ldc) = ab[i + j * m_r];
        }
    }
}

/// `C += a * b` (or `C = a * b` when `accumulate` is false) on one tile.
///
/// `a` is a packed `m_r x k` slab, `b` a packed `k x n_r` sliver; `c` may be
/// smaller than `m_r x n_r` at the matrix fringe.
pub fn micro_kernel(m_r: usize, n_r: usize, a: &[f64], b: &[f64], mut c: MatMut<'_>, accumulate: bool) -> Result<()> {
    if m_r == 0 || n_r == 0 || m_r * n_r > MAX_TILE {
        return Err(Error::InvalidConfig(format!("unsupported tile {m_r}x{n_r}")));
    }
    if a.len() % m_r != 0 || b.len() % n_r != 0 || a.len() / m_r != b.len() / n_r {
        return Err(Error::DimensionMismatch {
            op: "micro_kernel",
            detail: format!("slab of {} and sliver of {} entries", a.len(), b.len()),
        });
    }
    if c.rows() > m_r || c.cols() > n_r {
        return Err(Error::DimensionMismatch {
            op: "micro_kernel",
            detail: format!("tile {}x{} larger than {m_r}x{n_r}", c.rows(), c.cols()),
        });
    }
    let k = a.len() / m_r;
    let (mv, nv, ldc) = (c.rows(), c.cols(), c.ld());
    if mv == 0 || nv == 0 {
        return Ok(());
    }
    let init = if accumulate { CInit::Keep } else { CInit::Zero };
    let cp = c.col_mut(0).as_mut_ptr();
    // SAFETY: lengths checked above; the tile is an exclusive view.
    unsafe { micro_kernel_raw(m_r, n_r, k, a.as_ptr(), b.as_ptr(), cp, ldc, mv, nv, init) };
    Ok(())
}
