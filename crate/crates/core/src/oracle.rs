//! Slow reference implementations.
//!
//! Everything here is single-threaded, row-at-a-time textbook code written
//! independently of the production kernels. Tests and `--check` treat any
//! disagreement beyond tolerance as a bug in the production twin.

use std::cell::Cell;
use std::ops::{Div, Mul, Sub};

use crate::error::{Error, Result};
use crate::lu::LuResult;
use crate::matrix::{MatMut, MatRef};
use crate::pivot::PivotVector;

fn mismatch(op: &'static str, detail: String) -> Error {
    Error::DimensionMismatch { op, detail }
}

/// `C := alpha*C + beta*A*B` by the ijk triple loop.
pub fn gemm_ref(mut c: MatMut<'_>, a: MatRef<'_>, b: MatRef<'_>, alpha: f64, beta: f64) -> Result<()> {
    if a.rows() != c.rows() || b.cols() != c.cols() || a.cols() != b.rows() {
        return Err(mismatch(
            "gemm_ref",
            format!("{}x{} * {}x{} into {}x{}", a.rows(), a.cols(), b.rows(), b.cols(), c.rows(), c.cols()),
        ));
    }
    for i in 0..c.rows() {
        for j in 0..c.cols() {
            let mut s = 0.0;
            for p in 0..a.cols() {
                s += a.get(i, p) * b.get(p, j);
            }
            let v = if alpha == 0.0 { 0.0 } else { alpha * c.get(i, j) };
            c.set(i, j, v + beta * s);
        }
    }
    Ok(())
}

/// `B := trilu(L)^{-1} B`, one row at a time.
pub fn trsm_ref(l: MatRef<'_>, mut b: MatMut<'_>) -> Result<()> {
    if l.rows() != l.cols() || l.rows() != b.rows() {
        return Err(mismatch("trsm_ref", format!("L {}x{}, B {} rows", l.rows(), l.cols(), b.rows())));
    }
    for i in 0..b.rows() {
        for j in 0..b.cols() {
            let mut s = b.get(i, j);
            for k in 0..i {
                s -= l.get(i, k) * b.get(k, j);
            }
            b.set(i, j, s);
        }
    }
    Ok(())
}

/// Scalars the textbook LU can run on.
trait Field: Copy + Sub<Output = Self> + Mul<Output = Self> + Div<Output = Self> {
    fn magnitude(self) -> f64;
}

impl Field for f64 {
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

thread_local! {
    static FLOPS: Cell<u64> = const { Cell::new(0) };
}

fn tick() {
    FLOPS.with(|f| f.set(f.get() + 1));
}

/// A real number that counts every arithmetic operation applied to it.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Tally(pub f64);

impl Sub for Tally {
    type Output = Tally;
    fn sub(self, o: Tally) -> Tally {
        tick();
        Tally(self.0 - o.0)
    }
}

impl Mul for Tally {
    type Output = Tally;
    fn mul(self, o: Tally) -> Tally {
        tick();
        Tally(self.0 * o.0)
    }
}

impl Div for Tally {
    type Output = Tally;
    fn div(self, o: Tally) -> Tally {
        tick();
        Tally(self.0 / o.0)
    }
}

impl Field for Tally {
    fn magnitude(self) -> f64 {
        self.0.abs()
    }
}

/// Number of [`Tally`] operations performed by `run` on this thread.
pub fn flop_count(run: impl FnOnce()) -> u64 {
    let before = FLOPS.with(|f| f.get());
    run();
    FLOPS.with(|f| f.get()) - before
}

/// Row-major scratch copy for the generic textbook code.
struct Dense<T> {
    m: usize,
    n: usize,
    v: Vec<T>,
}

impl<T: Field> Dense<T> {
    fn at(&self, i: usize, j: usize) -> T {
        self.v[i * self.n + j]
    }
    fn put(&mut self, i: usize, j: usize, x: T) {
        self.v[i * self.n + j] = x;
    }

    fn swap_rows(&mut self, r: usize, s: usize) {
        if r != s {
            for j in 0..self.n {
                self.v.swap(r * self.n + j, s * self.n + j);
            }
        }
    }

    /// Pivot search in column `k` (lowest index on ties), swap, scale.
    /// Returns the pivot row and whether the column was exactly zero.
    fn pivot_and_scale(&mut self, k: usize) -> (usize, bool) {
        let mut p = k;
        for i in k + 1..self.m {
            if self.at(i, k).magnitude() > self.at(p, k).magnitude() {
                p = i;
            }
        }
        self.swap_rows(k, p);
        let d = self.at(k, k);
        if d.magnitude() == 0.0 {
            return (p, true);
        }
        for i in k + 1..self.m {
            let l = self.at(i, k) / d;
            self.put(i, k, l);
        }
        (p, false)
    }

    /// Right-looking elimination of the first `k` columns.
    fn right_looking(&mut self, k: usize) -> (Vec<usize>, Option<usize>) {
        let mut ipiv = Vec::with_capacity(k);
        let mut zero = None;
        for c in 0..k {
            let (p, z) = self.pivot_and_scale(c);
            ipiv.push(p);
            if z && zero.is_none() {
                zero = Some(c);
            }
            for i in c + 1..self.m {
                let l = self.at(i, c);
                for j in c + 1..self.n {
                    let u = self.at(c, j);
                    self.put(i, j, self.at(i, j) - l * u);
                }
            }
        }
        (ipiv, zero)
    }

    /// Left-looking factorization of the first `k` columns; columns `k..`
    /// are left untouched apart from row interchanges.
    fn left_looking(&mut self, k: usize) {
        for c in 0..k {
            for p in 0..c {
                let u = self.at(p, c);
                for i in p + 1..self.m {
                    let x = self.at(i, c) - self.at(i, p) * u;
                    self.put(i, c, x);
                }
            }
            self.pivot_and_scale(c);
        }
    }
}

/// Textbook LU with partial pivoting of an `m x n` view, `m >= n`.
pub fn lu_ref(mut a: MatMut<'_>) -> Result<LuResult> {
    let (m, n) = (a.rows(), a.cols());
    if m < n {
        return Err(mismatch("lu_ref", format!("needs m >= n, got {m}x{n}")));
    }
    let mut d = Dense {
        m,
        n,
        v: (0..m * n).map(|x| a.get(x / n, x % n)).collect(),
    };
    let (ipiv, zero_pivot) = d.right_looking(n);
    for i in 0..m {
        for j in 0..n {
            a.set(i, j, d.at(i, j));
        }
    }
    Ok(LuResult {
        ipiv: PivotVector::from_indices(ipiv, 0)?,
        cols_factored: n,
        zero_pivot,
        et_events: 0,
        et_widths: Vec::new(),
    })
}

fn tally_matrix(m: usize, n: usize) -> Dense<Tally> {
    // strictly diagonally dominant pattern: no exact zeros, mild pivoting
    let v = (0..m * n)
        .map(|x| {
            let (i, j) = (x / n, x % n);
            Tally(if i == j { (m + n) as f64 } else { 1.0 + ((i * 7 + j * 3) % 11) as f64 / 11.0 })
        })
        .collect();
    Dense { m, n, v }
}

/// Operations counted while running [`lu_ref`]'s elimination on `m x n`.
pub fn lu_ref_flops(m: usize, n: usize) -> u64 {
    let mut d = tally_matrix(m, n);
    flop_count(|| {
        d.right_looking(n);
    })
}

/// Operations counted for a left-looking factorization of an `m x n` panel
/// stopped after `k` columns.
pub fn ll_partial_flops(m: usize, n: usize, k: usize) -> u64 {
    let mut d = tally_matrix(m, n);
    flop_count(|| d.left_looking(k.min(n)))
}

/// Operations counted for a right-looking factorization of an `m x n` panel
/// stopped after `k` columns (trailing columns fully updated).
pub fn rl_partial_flops(m: usize, n: usize, k: usize) -> u64 {
    let mut d = tally_matrix(m, n);
    flop_count(|| {
        d.right_looking(k.min(n));
    })
}
