//! Packing of `A_c` and `B_c` into micro-panel order.
//!
//! `A_c` (`m_c x k_c`) is stored as `ceil(m_c/m_r)` slabs of `m_r x k_c`,
//! column by column inside a slab. `B_c` (`k_c x n_c`) is stored as
//! `ceil(n_c/n_r)` slivers of `k_c x n_r`, row by row inside a sliver. Rows
//! and columns beyond the source window are written as exact zeros so the
//! micro-kernel never needs a fringe case.

use crate::config::CacheConfig;
use crate::error::{Error, Result};
use crate::matrix::{MatRef, Matrix};
use crate::team::WorkerPool;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PackKind {
    /// `m_r`-row slabs of a block of `A`.
    A,
    /// `n_r`-column slivers of a block of `B`.
    B,
}

/// A packed copy of a block together with its shape.
#[derive(Debug, Clone, PartialEq)]
pub struct PackedBuffer {
    pub kind: PackKind,
    /// Rows and columns of the source block.
    pub rows: usize,
    pub cols: usize,
    /// `m_r` for A, `n_r` for B.
    pub width: usize,
    pub data: Vec<f64>,
}

impl PackedBuffer {
    pub fn panels(&self) -> usize {
        match self.kind {
            PackKind::A => self.rows.div_ceil(self.width),
            PackKind::B => self.cols.div_ceil(self.width),
        }
    }

    /// Inverse of the packing map (padding dropped).
    pub fn unpack(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        let r = self.width;
        match self.kind {
            PackKind::A => {
                let k = self.cols;
                for i in 0..self.rows {
                    let (slab, ii) = (i / r, i % r);
                    for p in 0..k {
                        out.set(i, p, self.data[slab * r * k + p * r + ii]);
                    }
                }
            }
            PackKind::B => {
                let k = self.rows;
                for j in 0..self.cols {
                    let (sl, jj) = (j / r, j % r);
                    for p in 0..k {
                        out.set(p, j, self.data[sl * r * k + p * r + jj]);
                    }
                }
            }
        }
        out
    }
}

/// Packs slab `slab` (rows `slab*m_r ..`) of `src` into `dst[.. m_r*k]`,
/// multiplying every entry by `scale`.
#[inline]
pub(crate) fn pack_a_slab(src: MatRef<'_>, slab: usize, m_r: usize, scale: f64, dst: &mut [f64]) {
    let k = src.cols();
    let r0 = slab * m_r;
    let h = m_r.min(src.rows() - r0);
    debug_assert!(dst.len() >= m_r * k);
    for p in 0..k {
        let col = &src.col(p)[r0..r0 + h];
        let out = &mut dst[p * m_r..(p + 1) * m_r];
        if scale == 1.0 {
            out[..h].copy_from_slice(col);
        } else {
            for (o, &v) in out[..h].iter_mut().zip(col) {
                *o = scale * v;
            }
        }
        out[h..].fill(0.0);
    }
}

/// Packs sliver `sl` (columns `sl*n_r ..`) of `src` into `dst[.. n_r*k]`.
#[inline]
pub(crate) fn pack_b_sliver(src: MatRef<'_>, sl: usize, n_r: usize, dst: &mut [f64]) {
    let k = src.rows();
    let c0 = sl * n_r;
    let w = n_r.min(src.cols() - c0);
    debug_assert!(dst.len() >= n_r * k);
    for jj in 0..w {
        let col = src.col(c0 + jj);
        for (p, &v) in col.iter().enumerate() {
            dst[p * n_r + jj] = v;
        }
    }
    if w < n_r {
        for p in 0..k {
            dst[p * n_r + w..(p + 1) * n_r].fill(0.0);
        }
    }
}

fn check_block(op: &'static str, rows: usize, cols: usize, max_rows: usize, max_cols: usize) -> Result<()> {
    if rows > max_rows || cols > max_cols {
        return Err(Error::DimensionMismatch {
            op,
            detail: format!("block {rows}x{cols} exceeds {max_rows}x{max_cols}"),
        });
    }
    Ok(())
}

/// Packs a block of at most `m_c x k_c` entries of `A` into `A_c` order.
pub fn pack_a(block: MatRef<'_>, cfg: &CacheConfig) -> Result<PackedBuffer> {
    check_block("pack_a", block.rows(), block.cols(), cfg.m_c(), cfg.k_c())?;
    let (m_r, k) = (cfg.m_r(), block.cols());
    let slabs = block.rows().div_ceil(m_r);
    let mut data = vec![0.0; slabs * m_r * k];
    if k > 0 {
        for (s, dst) in data.chunks_mut(m_r * k).enumerate() {
            pack_a_slab(block, s, m_r, 1.0, dst);
        }
    }
    Ok(PackedBuffer {
        kind: PackKind::A,
        rows: block.rows(),
        cols: k,
        width: m_r,
        data,
    })
}

/// Packs a block of at most `k_c x n_c` entries of `B` into `B_c` order.
pub fn pack_b(block: MatRef<'_>, cfg: &CacheConfig) -> Result<PackedBuffer> {
    check_block("pack_b", block.rows(), block.cols(), cfg.k_c(), cfg.n_c())?;
    let (n_r, k) = (cfg.n_r(), block.rows());
    let slivers = block.cols().div_ceil(n_r);
    let mut data = vec![0.0; slivers * n_r * k];
    if k > 0 {
        for (s, dst) in data.chunks_mut(n_r * k).enumerate() {
            pack_b_sliver(block, s, n_r, dst);
        }
    }
    Ok(PackedBuffer {
        kind: PackKind::B,
        rows: k,
        cols: block.cols(),
        width: n_r,
        data,
    })
}

struct SendPtr(*mut f64);
// SAFETY: members write disjoint panels of the buffer.
unsafe impl Sync for SendPtr {}

/// [`pack_a`] or [`pack_b`] executed cooperatively by every worker of
/// `pool`, panels distributed round-robin over the workers.
pub fn pack_parallel(kind: PackKind, block: MatRef<'_>, cfg: &CacheConfig, pool: &WorkerPool) -> Result<PackedBuffer> {
    let mut out = match kind {
        PackKind::A => pack_a(block, cfg)?,
        PackKind::B => pack_b(block, cfg)?,
    };
    out.data.fill(f64::NAN);
    let panel_len = out.width * match kind {
        PackKind::A => block.cols(),
        PackKind::B => block.rows(),
    };
    let panels = out.panels();
    let base = SendPtr(out.data.as_mut_ptr());
    let width = out.width;
    pool.run_team(None, |ctx| {
        let base = &base;
        for p in (ctx.rank()..panels).step_by(ctx.size()) {
            // SAFETY: panel p is written by exactly one member.
            let dst = unsafe { std::slice::from_raw_parts_mut(base.0.add(p * panel_len), panel_len) };
            match kind {
                PackKind::A => pack_a_slab(block, p, width, 1.0, dst),
                PackKind::B => pack_b_sliver(block, p, width, dst),
            }
        }
        ctx.barrier();
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> CacheConfig {
        CacheConfig::new(64, 64, 64, 4, 4).unwrap()
    }

    #[test]
    fn one_by_one_block_is_padded() {
        let a = Matrix::from_rows(&[[3.5]]).unwrap();
        let p = pack_a(a.as_ref(), &cfg()).unwrap();
        assert_eq!(p.data, vec![3.5, 0.0, 0.0, 0.0]);
        let p = pack_b(a.as_ref(), &cfg()).unwrap();
        assert_eq!(p.data, vec![3.5, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn slab_layout() {
        // 5x2 block, m_r=4 -> two slabs of 4x2, column by column
        let a = Matrix::from_col_major(5, 2, (1..=10).map(f64::from).collect()).unwrap();
        let p = pack_a(a.as_ref(), &cfg()).unwrap();
        assert_eq!(
            p.data,
            vec![1., 2., 3., 4., 6., 7., 8., 9., 5., 0., 0., 0., 10., 0., 0., 0.]
        );
    }

    #[test]
    fn sliver_layout() {
        // 2x5 block, n_r=4 -> two slivers of 2x4, row by row
        let b = Matrix::from_rows(&[[1., 2., 3., 4., 5.], [6., 7., 8., 9., 10.]]).unwrap();
        let p = pack_b(b.as_ref(), &cfg()).unwrap();
        assert_eq!(
            p.data,
            vec![1., 2., 3., 4., 6., 7., 8., 9., 5., 0., 0., 0., 10., 0., 0., 0.]
        );
    }

    #[test]
    fn unpack_inverts_pack() {
        let cfg = CacheConfig::new(64, 64, 64, 8, 4).unwrap();
        let x = Matrix::random(50, 60, 17);
        let pa = pack_a(x.as_ref().sub(0, 0, 50, 60), &cfg).unwrap();
        assert!(pa.unpack().bitwise_eq(&x));
        let y = x.as_ref().sub(0, 0, 50, 60).to_matrix();
        let pb = pack_b(y.as_ref(), &cfg).unwrap();
        assert!(pb.unpack().bitwise_eq(&y));
    }

    #[test]
    fn oversized_block_rejected() {
        let x = Matrix::zeros(65, 3);
        assert!(pack_a(x.as_ref(), &cfg()).is_err());
        let x = Matrix::zeros(3, 65);
        assert!(pack_b(x.as_ref(), &cfg()).is_err());
    }

    #[test]
    fn parallel_pack_matches_serial() {
        let cfg = CacheConfig::new(64, 64, 64, 8, 4).unwrap();
        let x = Matrix::random(61, 37, 5);
        let pool = WorkerPool::new(4).unwrap();
        for kind in [PackKind::A, PackKind::B] {
            let serial = match kind {
                PackKind::A => pack_a(x.as_ref(), &cfg).unwrap(),
                PackKind::B => pack_b(x.as_ref().sub(0, 0, 37, 37), &cfg).unwrap(),
            };
            let src = match kind {
                PackKind::A => x.as_ref(),
                PackKind::B => x.as_ref().sub(0, 0, 37, 37),
            };
            let par = pack_parallel(kind, src, &cfg, &pool).unwrap();
            assert_eq!(serial.data.len(), par.data.len());
            assert!(serial.data.iter().zip(&par.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
