//! Flop model of LU with partial pivoting.
//!
//! The closed forms count a multiply-add as two flops and ignore
//! divisions and other lower-order terms.

/// `m n^2 - n^3/3`: LU of an `m x n` matrix (`2n^3/3` when square).
pub fn flops_lu(m: usize, n: usize) -> f64 {
    let (m, n) = (m as f64, n as f64);
    m * n * n - n * n * n / 3.0
}

/// `n^2 b / 2`: all panel factorizations of blocked LU with block size `b`.
pub fn flops_panel_total(n: usize, b: usize) -> f64 {
    let (n, b) = (n as f64, b as f64);
    n * n * b / 2.0
}

/// `m^2 k - m^3/3`: left-looking panel factorization stopped after `k`
/// columns. `n` does not enter the formula; it is kept for symmetry with
/// [`flops_rl_partial`]. For a count of the work actually done see
/// `oracle::ll_partial_flops`.
pub fn flops_ll_partial(m: usize, _n: usize, k: usize) -> f64 {
    let (m, k) = (m as f64, k as f64);
    m * m * k - m * m * m / 3.0
}

/// Right-looking counterpart of [`flops_ll_partial`]: the same amount plus
/// the trailing update `2(n-k)(mk - k^2/2)` of the remaining `n - k` columns.
pub fn flops_rl_partial(m: usize, n: usize, k: usize) -> f64 {
    let (mf, nf, kf) = (m as f64, n as f64, k as f64);
    flops_ll_partial(m, n, k) + 2.0 * (nf - kf) * (mf * kf - kf * kf / 2.0)
}

/// Flops of each outer iteration of blocked right-looking LU on an `m x n`
/// matrix with block size `b`: panel, triangular solve and trailing update.
pub fn iteration_flops(m: usize, n: usize, b: usize) -> Vec<f64> {
    assert!(b > 0, "block size must be positive");
    (0..n)
        .step_by(b)
        .map(|j| {
            let w = b.min(n - j) as f64;
            let rows = (m - j) as f64;
            let right = (n - j) as f64 - w;
            let below = rows - w;
            let panel = rows * w * w - w * w * w / 3.0;
            let trsm = w * w * right;
            let gemm = 2.0 * below * w * right;
            panel + trsm + gemm
        })
        .collect()
}

/// Share of the total flops done by the first `fraction` of the iterations.
///
/// The iteration count is `n/b` taken as a real number, and the cumulative
/// sum is interpolated linearly inside the iteration the cut falls in.
pub fn cumulative_share(m: usize, n: usize, b: usize, fraction: f64) -> f64 {
    let per = iteration_flops(m, n, b);
    let total: f64 = per.iter().sum();
    let cut = (fraction.clamp(0.0, 1.0) * n as f64 / b as f64).min(per.len() as f64);
    let whole = cut.floor() as usize;
    let mut done: f64 = per[..whole].iter().sum();
    if whole < per.len() {
        done += (cut - whole as f64) * per[whole];
    }
    done / total
}
