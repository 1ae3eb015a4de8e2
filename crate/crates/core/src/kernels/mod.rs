//! Team-collective building blocks of the factorization.

pub mod gemm;
pub mod laswp;
pub mod micro;
pub mod pack;
pub mod trsm;

pub use gemm::{gemm, gemm_malleable, gemm_pool, gemm_team};
pub use laswp::{laswp, laswp_pool, laswp_team};
pub use micro::{micro_kernel, CInit};
pub use pack::{pack_a, pack_b, pack_parallel, PackKind, PackedBuffer};
pub use trsm::{trsm_llu, trsm_llu_pool, trsm_llu_team};

/// Columns handed to one member at a time by the column-split kernels.
pub(crate) const COL_CHUNK: usize = 16;
