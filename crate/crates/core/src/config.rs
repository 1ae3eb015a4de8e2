use std::env;

use crate::error::{Error, Result};

/// Largest supported register tile, `m_r * n_r`.
pub const MAX_TILE: usize = 256;

/// Cache and register blocking of the packed GEMM.
///
/// `m_c` is rounded down to a multiple of `m_r` and `n_c` to a multiple of
/// `n_r`, so every full macro-panel splits into whole micro-panels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheConfig {
    m_c: usize,
    k_c: usize,
    n_c: usize,
    m_r: usize,
    n_r: usize,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            m_c: 256,
            k_c: 256,
            n_c: 4096,
            m_r: 8,
            n_r: 4,
        }
    }
}

impl CacheConfig {
    pub fn new(m_c: usize, k_c: usize, n_c: usize, m_r: usize, n_r: usize) -> Result<Self> {
        if m_r == 0 || n_r == 0 || k_c == 0 {
            return Err(Error::InvalidConfig(format!(
                "m_r={m_r}, n_r={n_r}, k_c={k_c} must be positive"
            )));
        }
        if m_r * n_r > MAX_TILE {
            return Err(Error::InvalidConfig(format!(
                "register tile {m_r}x{n_r} exceeds {MAX_TILE} entries"
            )));
        }
        let m_c = m_c / m_r * m_r;
        let n_c = n_c / n_r * n_r;
        if m_c == 0 || n_c == 0 {
            return Err(Error::InvalidConfig(format!(
                "m_c must be >= m_r ({m_r}) and n_c >= n_r ({n_r})"
            )));
        }
        Ok(CacheConfig {
            m_c,
            k_c,
            n_c,
            m_r,
            n_r,
        })
    }

    /// Defaults overridden by `MLA_MC`, `MLA_KC`, `MLA_NC`, `MLA_MR`, `MLA_NR`.
    pub fn from_env() -> Result<Self> {
        let d = CacheConfig::default();
        CacheConfig::new(
            env_usize("MLA_MC")?.unwrap_or(d.m_c),
            env_usize("MLA_KC")?.unwrap_or(d.k_c),
            env_usize("MLA_NC")?.unwrap_or(d.n_c),
            env_usize("MLA_MR")?.unwrap_or(d.m_r),
            env_usize("MLA_NR")?.unwrap_or(d.n_r),
        )
    }

    #[inline]
    pub fn m_c(&self) -> usize {
        self.m_c
    }
    #[inline]
    pub fn k_c(&self) -> usize {
        self.k_c
    }
    #[inline]
    pub fn n_c(&self) -> usize {
        self.n_c
    }
    #[inline]
    pub fn m_r(&self) -> usize {
        self.m_r
    }
    #[inline]
    pub fn n_r(&self) -> usize {
        self.n_r
    }
}

/// Outer and inner algorithmic block sizes of the two-level blocked LU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockConfig {
    b_outer: usize,
    b_inner: usize,
}

impl BlockConfig {
    pub fn new(b_outer: usize, b_inner: usize) -> Result<Self> {
        if b_inner == 0 || b_inner > b_outer {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= b_inner <= b_outer, got b_outer={b_outer}, b_inner={b_inner}"
            )));
        }
        Ok(BlockConfig { b_outer, b_inner })
    }

    #[inline]
    pub fn b_outer(&self) -> usize {
        self.b_outer
    }

    #[inline]
    pub fn b_inner(&self) -> usize {
        self.b_inner
    }
}

pub(crate) fn env_usize(name: &str) -> Result<Option<usize>> {
    match env::var(name) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::InvalidConfig(format!("{name}={v:?} is not a non-negative integer"))),
        Err(_) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rounds_cache_blocks_down() {
        let c = CacheConfig::new(100, 64, 70, 8, 4).unwrap();
        assert_eq!(c.m_c(), 96);
        assert_eq!(c.n_c(), 68);
        assert_eq!(c.k_c(), 64);
    }

    #[test]
    fn rejects_degenerate_cache_config() {
        assert!(CacheConfig::new(4, 64, 64, 8, 4).is_err());
        assert!(CacheConfig::new(64, 0, 64, 8, 4).is_err());
        assert!(CacheConfig::new(64, 64, 64, 0, 4).is_err());
        assert!(CacheConfig::new(512, 64, 512, 32, 16).is_err());
    }

    #[test]
    fn default_config_is_within_usual_ranges() {
        let c = CacheConfig::default();
        assert_eq!((c.m_r(), c.n_r(), c.m_c(), c.k_c(), c.n_c()), (8, 4, 256, 256, 4096));
        assert_eq!(c, CacheConfig::new(256, 256, 4096, 8, 4).unwrap());
    }

    #[test]
    fn block_config_invariant() {
        assert!(BlockConfig::new(256, 32).is_ok());
        assert!(BlockConfig::new(32, 32).is_ok());
        assert!(BlockConfig::new(16, 32).is_err());
        assert!(BlockConfig::new(16, 0).is_err());
    }
}
