//! Column-major dense storage and the views every algorithm works on.
//!
//! Element `(i, j)` of a matrix with leading dimension `ld` lives at offset
//! `i + j * ld`. Views are plain windows over a parent buffer:
//!
//! * [`MatRef`] is a shared read-only window.
//! * [`MatMut`] is an exclusive mutable window. It can be split into
//!   disjoint windows (see [`MatMut::partition_2x2`]).
//! * [`SharedMut`] is a mutable window that may be handed to every member of
//!   a worker team. Concurrent writers must target disjoint sub-windows; the
//!   type itself does no locking.

use std::fmt;
use std::marker::PhantomData;

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::pivot::PivotVector;

/// Owned column-major `f64` matrix with an explicit leading dimension.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    ld: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let ld = rows.max(1);
        Matrix {
            rows,
            cols,
            ld,
            data: vec![0.0; ld * cols],
        }
    }

    /// Zero matrix whose columns are `ld` apart. Rows `rows..ld` of each
    /// column are padding that no view ever exposes.
    pub fn zeros_with_ld(rows: usize, cols: usize, ld: usize) -> Result<Self> {
        if ld < rows.max(1) {
            return Err(Error::LeadingDimension { ld, rows });
        }
        Ok(Matrix {
            rows,
            cols,
            ld,
            data: vec![0.0; ld * cols],
        })
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    /// Builds a matrix from a column-major buffer with `ld == rows`.
    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                op: "from_col_major",
                detail: format!("{} values for a {rows}x{cols} matrix", data.len()),
            });
        }
        if rows == 0 {
            return Ok(Matrix::zeros(0, cols));
        }
        Ok(Matrix {
            rows,
            cols,
            ld: rows,
            data,
        })
    }

    /// Builds a matrix from row slices. All rows must have equal length.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, |r| r.as_ref().len());
        let mut out = Matrix::zeros(m, n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    op: "from_rows",
                    detail: format!("row {i} has {} entries, expected {n}", row.len()),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                out.set(i, j, v);
            }
        }
        Ok(out)
    }

    /// Random matrix with entries in the open interval (0, 1); see [`fill_random`].
    pub fn random(rows: usize, cols: usize, seed: u64) -> Self {
        let mut m = Matrix::zeros(rows, cols);
        fill_random(m.as_mut(), seed);
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn ld(&self) -> usize {
        self.ld
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols, "({i},{j}) outside {}x{}", self.rows, self.cols);
        self.data[i + j * self.ld]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.rows && j < self.cols, "({i},{j}) outside {}x{}", self.rows, self.cols);
        self.data[i + j * self.ld] = v;
    }

    /// Raw backing buffer, including any padding rows.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Values in column-major order with padding rows stripped.
    pub fn to_col_major(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.rows * self.cols);
        for j in 0..self.cols {
            out.extend_from_slice(&self.data[j * self.ld..j * self.ld + self.rows]);
        }
        out
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn as_ref(&self) -> MatRef<'_> {
        MatRef {
            ptr: self.data.as_ptr(),
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
            _marker: PhantomData,
        }
    }

    pub fn as_mut(&mut self) -> MatMut<'_> {
        MatMut {
            ptr: self.data.as_mut_ptr(),
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
            _marker: PhantomData,
        }
    }

    /// Bitwise equality of the visible entries (padding ignored).
    pub fn bitwise_eq(&self, other: &Matrix) -> bool {
        self.as_ref().bitwise_eq(other.as_ref())
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} (ld {})", self.rows, self.cols, self.ld)?;
        if self.rows * self.cols <= 64 {
            for i in 0..self.rows {
                write!(f, "\n ")?;
                for j in 0..self.cols {
                    write!(f, " {:>10.4e}", self.get(i, j))?;
                }
            }
        }
        Ok(())
    }
}

fn check_window(op: &'static str, rows: usize, cols: usize, r0: usize, c0: usize, h: usize, w: usize) -> Result<()> {
    if r0 > rows || h > rows - r0 {
        return Err(Error::OutOfRange {
            op,
            index: r0 + h,
            limit: rows,
        });
    }
    if c0 > cols || w > cols - c0 {
        return Err(Error::OutOfRange {
            op,
            index: c0 + w,
            limit: cols,
        });
    }
    Ok(())
}

/// Read-only window of a column-major matrix.
#[derive(Clone, Copy)]
pub struct MatRef<'a> {
    ptr: *const f64,
    rows: usize,
    cols: usize,
    ld: usize,
    _marker: PhantomData<&'a f64>,
}

// SAFETY: a MatRef only hands out shared reads of f64 data borrowed for 'a.
unsafe impl Send for MatRef<'_> {}
unsafe impl Sync for MatRef<'_> {}

impl<'a> MatRef<'a> {
    /// View over a column-major slice with leading dimension `ld`.
    pub fn from_slice(data: &'a [f64], rows: usize, cols: usize, ld: usize) -> Result<Self> {
        if ld < rows.max(1) {
            return Err(Error::LeadingDimension { ld, rows });
        }
        if cols > 0 && data.len() < (cols - 1) * ld + rows {
            return Err(Error::DimensionMismatch {
                op: "MatRef::from_slice",
                detail: format!("buffer of {} too short for {rows}x{cols} ld {ld}", data.len()),
            });
        }
        Ok(MatRef {
            ptr: data.as_ptr(),
            rows,
            cols,
            ld,
            _marker: PhantomData,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn ld(&self) -> usize {
        self.ld
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        assert!(i < self.rows && j < self.cols, "({i},{j}) outside {}x{}", self.rows, self.cols);
        // SAFETY: bounds checked above; the window lies inside the parent buffer.
        unsafe { *self.ptr.add(i + j * self.ld) }
    }

    /// Column `j` as a contiguous slice of `rows` entries.
    #[inline]
    pub fn col(&self, j: usize) -> &'a [f64] {
        assert!(j < self.cols);
        // SAFETY: column j occupies ptr[j*ld .. j*ld+rows] inside the parent buffer.
        unsafe { std::slice::from_raw_parts(self.ptr.add(j * self.ld), self.rows) }
    }

    /// `h x w` window starting at `(r0, c0)`.
    pub fn submatrix(&self, r0: usize, c0: usize, h: usize, w: usize) -> Result<MatRef<'a>> {
        check_window("submatrix", self.rows, self.cols, r0, c0, h, w)?;
        Ok(self.sub(r0, c0, h, w))
    }

    /// Like [`MatRef::submatrix`] but panics on an invalid window.
    #[inline]
    pub fn sub(&self, r0: usize, c0: usize, h: usize, w: usize) -> MatRef<'a> {
        assert!(r0 + h <= self.rows && c0 + w <= self.cols, "window out of bounds");
        MatRef {
            // wrapping_add: an empty window may start one past the end.
            ptr: self.ptr.wrapping_add(r0 + c0 * self.ld),
            rows: h,
            cols: w,
            ld: self.ld,
            _marker: PhantomData,
        }
    }

    /// Splits into `(TL, TR, BL, BR)` where `TL` is `i x j`.
    pub fn partition_2x2(&self, i: usize, j: usize) -> Result<[MatRef<'a>; 4]> {
        check_window("partition_2x2", self.rows, self.cols, i, j, 0, 0)?;
        let (m, n) = (self.rows, self.cols);
        Ok([
            self.sub(0, 0, i, j),
            self.sub(0, j, i, n - j),
            self.sub(i, 0, m - i, j),
            self.sub(i, j, m - i, n - j),
        ])
    }

    pub fn to_matrix(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for j in 0..self.cols {
            out.as_mut().col_mut(j).copy_from_slice(self.col(j));
        }
        out
    }

    pub fn bitwise_eq(&self, other: MatRef<'_>) -> bool {
        if self.rows != other.rows || self.cols != other.cols {
            return false;
        }
        (0..self.cols).all(|j| {
            self.col(j)
                .iter()
                .zip(other.col(j))
                .all(|(a, b)| a.to_bits() == b.to_bits())
        })
    }

    /// Largest absolute entry, 0 for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        (0..self.cols)
            .flat_map(|j| self.col(j).iter())
            .fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

/// Exclusive mutable window of a column-major matrix.
pub struct MatMut<'a> {
    ptr: *mut f64,
    rows: usize,
    cols: usize,
    ld: usize,
    _marker: PhantomData<&'a mut f64>,
}

// SAFETY: MatMut behaves like &'a mut [f64] restricted to its window.
unsafe impl Send for MatMut<'_> {}
unsafe impl Sync for MatMut<'_> {}

impl<'a> MatMut<'a> {
    pub fn from_slice(data: &'a mut [f64], rows: usize, cols: usize, ld: usize) -> Result<Self> {
        MatRef::from_slice(data, rows, cols, ld)?;
        Ok(MatMut {
            ptr: data.as_mut_ptr(),
            rows,
            cols,
            ld,
            _marker: PhantomData,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn ld(&self) -> usize {
        self.ld
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.as_ref().get(i, j)
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.rows && j < self.cols, "({i},{j}) outside {}x{}", self.rows, self.cols);
        // SAFETY: bounds checked; exclusive window.
        unsafe { *self.ptr.add(i + j * self.ld) = v }
    }

    #[inline]
    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        assert!(j < self.cols);
        // SAFETY: column j is inside the exclusive window.
        unsafe { std::slice::from_raw_parts_mut(self.ptr.add(j * self.ld), self.rows) }
    }

    pub fn as_ref(&self) -> MatRef<'_> {
        MatRef {
            ptr: self.ptr,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
            _marker: PhantomData,
        }
    }

    /// Reborrows the window for a shorter lifetime.
    pub fn rb_mut(&mut self) -> MatMut<'_> {
        MatMut {
            ptr: self.ptr,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
            _marker: PhantomData,
        }
    }

    pub fn submatrix_mut(self, r0: usize, c0: usize, h: usize, w: usize) -> Result<MatMut<'a>> {
        check_window("submatrix_mut", self.rows, self.cols, r0, c0, h, w)?;
        Ok(MatMut {
            ptr: self.ptr.wrapping_add(r0 + c0 * self.ld),
            rows: h,
            cols: w,
            ld: self.ld,
            _marker: PhantomData,
        })
    }

    /// Splits into four disjoint windows `(TL, TR, BL, BR)` with `TL` of size `i x j`.
    pub fn partition_2x2(self, i: usize, j: usize) -> Result<[MatMut<'a>; 4]> {
        check_window("partition_2x2", self.rows, self.cols, i, j, 0, 0)?;
        let (m, n, ld, p) = (self.rows, self.cols, self.ld, self.ptr);
        let mk = |r0: usize, c0: usize, h: usize, w: usize| MatMut {
            ptr: p.wrapping_add(r0 + c0 * ld),
            rows: h,
            cols: w,
            ld,
            _marker: PhantomData,
        };
        Ok([mk(0, 0, i, j), mk(0, j, i, n - j), mk(i, 0, m - i, j), mk(i, j, m - i, n - j)])
    }

    /// Converts the exclusive window into one that can be shared by a team.
    pub fn into_shared(self) -> SharedMut<'a> {
        SharedMut {
            ptr: self.ptr,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
            _marker: PhantomData,
        }
    }

    pub fn copy_from(&mut self, src: MatRef<'_>) -> Result<()> {
        if src.rows() != self.rows || src.cols() != self.cols {
            return Err(Error::DimensionMismatch {
                op: "copy_from",
                detail: format!("{}x{} into {}x{}", src.rows(), src.cols(), self.rows, self.cols),
            });
        }
        for j in 0..self.cols {
            self.col_mut(j).copy_from_slice(src.col(j));
        }
        Ok(())
    }
}

/// Mutable window that every member of a worker team may hold at once.
///
/// Writes go through `unsafe` accessors: callers must guarantee that no two
/// threads touch the same element concurrently unless both only read.
#[derive(Clone, Copy)]
pub struct SharedMut<'a> {
    ptr: *mut f64,
    rows: usize,
    cols: usize,
    ld: usize,
    _marker: PhantomData<&'a mut f64>,
}

// SAFETY: access discipline is the caller's contract, see type docs.
unsafe impl Send for SharedMut<'_> {}
unsafe impl Sync for SharedMut<'_> {}

impl<'a> SharedMut<'a> {
    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn ld(&self) -> usize {
        self.ld
    }

    #[inline]
    pub fn sub(&self, r0: usize, c0: usize, h: usize, w: usize) -> SharedMut<'a> {
        assert!(
            r0 + h <= self.rows && c0 + w <= self.cols,
            "window ({r0},{c0}) {h}x{w} outside {}x{}",
            self.rows,
            self.cols
        );
        SharedMut {
            ptr: self.ptr.wrapping_add(r0 + c0 * self.ld),
            rows: h,
            cols: w,
            ld: self.ld,
            _marker: PhantomData,
        }
    }

    #[inline]
    pub(crate) fn ptr(&self) -> *mut f64 {
        self.ptr
    }

    /// Read view of the window.
    ///
    /// # Safety
    /// No other thread may write to the window while the returned view is used.
    #[inline]
    pub unsafe fn as_ref(&self) -> MatRef<'a> {
        MatRef {
            ptr: self.ptr,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
            _marker: PhantomData,
        }
    }

    /// Exclusive view of the window.
    ///
    /// # Safety
    /// The caller must be the only thread touching the window while the
    /// returned view is alive.
    #[inline]
    pub unsafe fn as_mut(&self) -> MatMut<'a> {
        MatMut {
            ptr: self.ptr,
            rows: self.rows,
            cols: self.cols,
            ld: self.ld,
            _marker: PhantomData,
        }
    }
}

/// Splits `a` into `(TL, TR, BL, BR)` with `TL` of size `i x j`.
pub fn partition_2x2(a: MatRef<'_>, i: usize, j: usize) -> Result<[MatRef<'_>; 4]> {
    a.partition_2x2(i, j)
}

/// Maps a 64-bit draw to the open interval (0, 1).
///
/// Only the top 53 bits are used: `(y + 1) / (2^53 + 2)` is never rounded to
/// 0 or 1 in double precision, while the 64-bit analogue can round to 1.
#[inline]
fn unit_open(x: u64) -> f64 {
    const DENOM: f64 = 9007199254740994.0; // 2^53 + 2
    ((x >> 11) as f64 + 1.0) / DENOM
}

/// Fills `a` column by column with uniform values in (0, 1).
///
/// The generator is ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
/// `seed_from_u64`, so a seed reproduces the same matrix bit for bit on every
/// platform.
pub fn fill_random(mut a: MatMut<'_>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for j in 0..a.cols() {
        for v in a.col_mut(j) {
            *v = unit_open(rng.next_u64());
        }
    }
}

pub fn frobenius_norm(a: MatRef<'_>) -> f64 {
    // scaled sum of squares, as in LAPACK dlange/dlassq
    let mut scale = 0.0_f64;
    let mut ssq = 1.0_f64;
    for j in 0..a.cols() {
        for &v in a.col(j) {
            if v != 0.0 {
                let av = v.abs();
                if scale < av {
                    ssq = 1.0 + ssq * (scale / av) * (scale / av);
                    scale = av;
                } else {
                    ssq += (av / scale) * (av / scale);
                }
            }
        }
    }
    scale * ssq.sqrt()
}

/// `||P*A - L*U||_F / ||A||_F` with `P` rebuilt from `ipiv`.
///
/// `l` is `m x k` (its diagonal and upper part are ignored, the diagonal is
/// taken as ones), `u` is `k x n` (strictly lower part ignored), with
/// `k = min(m, n)`.
pub fn residual_lu(a: MatRef<'_>, l: MatRef<'_>, u: MatRef<'_>, ipiv: &PivotVector) -> Result<f64> {
    let (m, n) = (a.rows(), a.cols());
    let k = m.min(n);
    if l.rows() != m || l.cols() < k || u.rows() < k || u.cols() != n {
        return Err(Error::DimensionMismatch {
            op: "residual_lu",
            detail: format!(
                "A {m}x{n}, L {}x{}, U {}x{}",
                l.rows(),
                l.cols(),
                u.rows(),
                u.cols()
            ),
        });
    }
    if ipiv.offset() + ipiv.len() > m {
        return Err(Error::DimensionMismatch {
            op: "residual_lu",
            detail: format!("{} pivots at offset {} for {m} rows", ipiv.len(), ipiv.offset()),
        });
    }
    let mut diff = a.to_matrix();
    ipiv.apply(diff.as_mut())?;

    // diff(:, j) -= sum_p L(:, p) * U(p, j), p <= min(j, k - 1)
    let mut dm = diff.as_mut();
    for j in 0..n {
        let dcol = dm.col_mut(j);
        for p in 0..=j.min(k.saturating_sub(1)) {
            if k == 0 {
                break;
            }
            let upj = u.get(p, j);
            if upj == 0.0 {
                continue;
            }
            dcol[p] -= upj;
            let lcol = l.col(p);
            for i in p + 1..m {
                dcol[i] -= lcol[i] * upj;
            }
        }
    }
    let na = frobenius_norm(a);
    let nd = frobenius_norm(diff.as_ref());
    Ok(if na == 0.0 { nd } else { nd / na })
}

/// Residual of factors stored in place (LAPACK `getrf` layout).
pub fn residual_packed(a: MatRef<'_>, factors: MatRef<'_>, ipiv: &PivotVector) -> Result<f64> {
    if a.rows() != factors.rows() || a.cols() != factors.cols() {
        return Err(Error::DimensionMismatch {
            op: "residual_packed",
            detail: format!(
                "A {}x{} vs factors {}x{}",
                a.rows(),
                a.cols(),
                factors.rows(),
                factors.cols()
            ),
        });
    }
    let k = a.rows().min(a.cols());
    residual_lu(a, factors.sub(0, 0, a.rows(), k), factors.sub(0, 0, k, a.cols()), ipiv)
}

/// Unit lower factor `L` (`m x min(m,n)`) extracted from packed factors.
pub fn unpack_l(factors: MatRef<'_>) -> Matrix {
    let (m, k) = (factors.rows(), factors.rows().min(factors.cols()));
    let mut l = Matrix::zeros(m, k);
    for j in 0..k {
        l.set(j, j, 1.0);
        for i in j + 1..m {
            l.set(i, j, factors.get(i, j));
        }
    }
    l
}

/// Upper factor `U` (`min(m,n) x n`) extracted from packed factors.
pub fn unpack_u(factors: MatRef<'_>) -> Matrix {
    let (k, n) = (factors.rows().min(factors.cols()), factors.cols());
    let mut u = Matrix::zeros(k, n);
    for j in 0..n {
        for i in 0..=j.min(k.saturating_sub(1)) {
            if k > 0 {
                u.set(i, j, factors.get(i, j));
            }
        }
    }
    u
}
