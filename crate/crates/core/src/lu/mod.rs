//! LU factorization with partial pivoting.

mod blocked;
pub mod cost;
mod lookahead;
mod unb;

use std::fmt;
use std::str::FromStr;

pub use blocked::{lu_blk_ll, lu_blk_ll_pool, lu_blk_rl, lu_blk_rl_pool, StopFn};
pub use cost::{cumulative_share, flops_ll_partial, flops_lu, flops_panel_total, flops_rl_partial, iteration_flops};
pub use lookahead::lu_la;
pub use unb::lu_unb;

use crate::config::{BlockConfig, CacheConfig};
use crate::error::{Error, Result};
use crate::matrix::{MatMut, MatRef};
use crate::pivot::PivotVector;
use crate::team::WorkerPool;
use crate::trace::TraceSink;

/// Outcome of a factorization; the factors overwrite the input in place
/// (unit lower `L` strictly below the diagonal, `U` on and above it).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LuResult {
    pub ipiv: PivotVector,
    pub cols_factored: usize,
    /// First column whose pivot was exactly zero.
    pub zero_pivot: Option<usize>,
    /// Panels cut short by early termination.
    pub et_events: usize,
    /// Columns factored by each of those panels.
    pub et_widths: Vec<usize>,
}

impl LuResult {
    pub(crate) fn partial(ipiv: Vec<usize>, cols: usize, factors: MatRef<'_>) -> Self {
        let zero_pivot = (0..cols).find(|&j| factors.get(j, j) == 0.0);
        LuResult {
            ipiv: PivotVector::from_raw(ipiv, 0),
            cols_factored: cols,
            zero_pivot,
            et_events: 0,
            et_widths: Vec::new(),
        }
    }

    pub(crate) fn complete(ipiv: Vec<usize>, factors: MatRef<'_>) -> Self {
        let cols = ipiv.len();
        LuResult::partial(ipiv, cols, factors)
    }

    pub fn is_singular(&self) -> bool {
        self.zero_pivot.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    /// Two-level blocked right-looking LU, no look-ahead.
    Lu,
    /// Look-ahead with fixed teams.
    LuLa,
    /// Look-ahead; PF joins RU between static column blocks of the update.
    LuWsStatic,
    /// Look-ahead; PF joins RU inside the malleable GEMM.
    LuMb,
    /// `LuMb` plus early termination of the panel factorization.
    LuEt,
}

impl Variant {
    pub const ALL: [Variant; 5] = [Variant::Lu, Variant::LuLa, Variant::LuWsStatic, Variant::LuMb, Variant::LuEt];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Lu => "lu",
            Variant::LuLa => "lu_la",
            Variant::LuWsStatic => "lu_ws_static",
            Variant::LuMb => "lu_mb",
            Variant::LuEt => "lu_et",
        }
    }

    pub fn is_lookahead(self) -> bool {
        self != Variant::Lu
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown variant {s:?}")))
    }
}

/// Everything that selects and tunes a factorization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Policy {
    pub variant: Variant,
    pub block: BlockConfig,
    /// Workers in the panel team (look-ahead variants).
    pub t_pf: usize,
    /// Column blocks of the remainder update (`LuWsStatic`).
    pub q: usize,
    pub cache: CacheConfig,
}

impl Policy {
    pub fn new(variant: Variant, block: BlockConfig) -> Self {
        Policy {
            variant,
            block,
            t_pf: 1,
            q: 4,
            cache: CacheConfig::default(),
        }
    }

    pub fn with_t_pf(mut self, t_pf: usize) -> Self {
        self.t_pf = t_pf;
        self
    }

    pub fn with_q(mut self, q: usize) -> Self {
        self.q = q;
        self
    }

    pub fn with_cache(mut self, cache: CacheConfig) -> Self {
        self.cache = cache;
        self
    }

    /// Checks the policy against a pool of `threads` workers.
    pub fn validate(&self, threads: usize) -> Result<()> {
        if self.q == 0 {
            return Err(Error::InvalidConfig("q must be at least 1".into()));
        }
        if self.variant.is_lookahead() && (self.t_pf == 0 || self.t_pf >= threads) {
            return Err(Error::InvalidConfig(format!(
                "{} needs 1 <= t_pf < threads, got t_pf={}, threads={threads}",
                self.variant, self.t_pf
            )));
        }
        Ok(())
    }
}

/// Factors `a` in place according to `policy`, using every worker of `pool`.
pub fn lu_factor(a: MatMut<'_>, policy: &Policy, pool: &WorkerPool, sink: Option<&TraceSink>) -> Result<LuResult> {
    policy.validate(pool.threads())?;
    match policy.variant {
        Variant::Lu => {
            if a.rows() < a.cols() {
                return Err(Error::DimensionMismatch {
                    op: "lu_factor",
                    detail: format!("needs m >= n, got {}x{}", a.rows(), a.cols()),
                });
            }
            let n = a.cols();
            let piv = blocked::PivotStore::new(n);
            let s = a.into_shared();
            let blocks = [policy.block.b_outer(), policy.block.b_inner()];
            pool.run_team(sink, |ctx| blocked::rl_team(ctx, s, 0, &blocks, &policy.cache, &piv, true));
            // SAFETY: the pool has finished.
            Ok(LuResult::complete(piv.into_vector().as_slice().to_vec(), unsafe { s.as_ref() }))
        }
        _ => lu_la(a, policy, pool, sink),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{residual_packed, Matrix};

    fn small_cache() -> CacheConfig {
        CacheConfig::new(32, 32, 128, 4, 4).unwrap()
    }

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("lu_xx".parse::<Variant>().is_err());
    }

    #[test]
    fn policy_checks_split() {
        let p = Policy::new(Variant::LuMb, BlockConfig::new(64, 16).unwrap());
        assert!(p.validate(1).is_err());
        assert!(p.validate(2).is_ok());
        assert!(p.with_t_pf(2).validate(2).is_err());
        assert!(Policy::new(Variant::Lu, BlockConfig::new(8, 8).unwrap()).validate(1).is_ok());
        assert!(p.with_q(0).validate(4).is_err());
    }

    #[test]
    fn all_variants_agree_bitwise() {
        let n = 230;
        let a = Matrix::random(n, n, 9);
        let pool = WorkerPool::new(3).unwrap();
        let block = BlockConfig::new(48, 16).unwrap();
        let mut reference: Option<(Matrix, LuResult)> = None;
        for v in Variant::ALL {
            let mut f = a.clone();
            let p = Policy::new(v, block).with_cache(small_cache());
            let r = lu_factor(f.as_mut(), &p, &pool, None).unwrap();
            assert_eq!(r.cols_factored, n);
            let res = residual_packed(a.as_ref(), f.as_ref(), &r.ipiv).unwrap();
            assert!(res <= n as f64 * 100.0 * f64::EPSILON, "{v}: {res}");
            match &reference {
                None => reference = Some((f, r)),
                Some((rf, rr)) => {
                    assert!(f.bitwise_eq(rf), "{v} factors differ");
                    assert_eq!(r.ipiv, rr.ipiv, "{v} pivots differ");
                }
            }
        }
    }

    #[test]
    fn single_panel_matches_left_looking() {
        let a = Matrix::random(60, 60, 4);
        let mut reference = a.clone();
        let rr = lu_blk_ll(reference.as_mut(), 16, None, &small_cache()).unwrap();
        let pool = WorkerPool::new(2).unwrap();
        for v in Variant::ALL {
            let mut f = a.clone();
            let p = Policy::new(v, BlockConfig::new(64, 16).unwrap()).with_cache(small_cache());
            let r = lu_factor(f.as_mut(), &p, &pool, None).unwrap();
            assert!(f.bitwise_eq(&reference), "{v}");
            assert_eq!(r.ipiv, rr.ipiv);
        }
    }

    #[test]
    fn tall_matrix_lookahead() {
        let a = Matrix::random(150, 100, 5);
        let pool = WorkerPool::new(3).unwrap();
        let mut f = a.clone();
        let p = Policy::new(Variant::LuEt, BlockConfig::new(32, 8).unwrap()).with_cache(small_cache());
        let r = lu_factor(f.as_mut(), &p, &pool, None).unwrap();
        assert!(residual_packed(a.as_ref(), f.as_ref(), &r.ipiv).unwrap() <= 150.0 * 100.0 * f64::EPSILON);
    }

    #[test]
    fn singular_input_is_reported() {
        let mut a = Matrix::random(40, 40, 8);
        for i in 0..40 {
            a.set(i, 7, 0.0);
        }
        let pool = WorkerPool::new(2).unwrap();
        let p = Policy::new(Variant::LuMb, BlockConfig::new(16, 8).unwrap()).with_cache(small_cache());
        let r = lu_factor(a.as_mut(), &p, &pool, None).unwrap();
        assert_eq!(r.zero_pivot, Some(7));
        assert!(r.is_singular());
    }

    #[test]
    fn empty_matrix() {
        let mut a = Matrix::zeros(0, 0);
        let pool = WorkerPool::new(2).unwrap();
        for v in Variant::ALL {
            let p = Policy::new(v, BlockConfig::new(16, 8).unwrap());
            let r = lu_factor(a.as_mut(), &p, &pool, None).unwrap();
            assert_eq!(r.cols_factored, 0);
        }
    }
}
