//! Dense LU factorization with partial pivoting on top of a malleable,
//! BLIS-style GEMM.
//!
//! The library is organised bottom-up:
//!
//! * [`matrix`], [`pivot`], [`config`]: column-major storage, views,
//!   row interchanges and blocking parameters.
//! * [`team`]: the worker pool, PF/RU teams, completion flags and the merge
//!   protocol that lets a finished team join a kernel already in flight.
//! * [`kernels`]: packed GEMM (malleable at every `i_c` entry point), unit
//!   lower triangular solve and row interchanges, all executed collectively
//!   by a team.
//! * [`lu`]: unblocked, right-looking and left-looking blocked LU, the
//!   look-ahead driver with its execution policies, and the flop model.
//! * [`oracle`]: slow reference implementations used by tests and `--check`.
//! * [`bench`]: the benchmark harness behind the `mla-bench` binary.

pub mod bench;
pub mod config;
pub mod error;
pub mod kernels;
pub mod lu;
pub mod matrix;
pub mod oracle;
pub mod pivot;
pub mod team;
pub mod trace;

pub use config::{BlockConfig, CacheConfig};
pub use error::{Error, Result};
pub use lu::{lu_factor, LuResult, Policy, Variant};
pub use matrix::{fill_random, frobenius_norm, partition_2x2, residual_lu, residual_packed, MatMut, MatRef, Matrix, SharedMut};
pub use pivot::PivotVector;
pub use team::{CompletionFlag, Team, TeamCtx, TeamId, WorkerPool};
pub use trace::{TaskKind, TraceEvent, TraceSink};
