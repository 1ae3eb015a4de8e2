//! Benchmark harness behind `mla-bench`.
//!
//! CSV schema (one row per factorization):
//!
//! ```text
//! variant,n,b_outer,b_inner,threads,t_pf,seed,wall_seconds,gflops,residual,et_events
//! ```
//!
//! `gflops` is `2n^3/3` divided by the wall time of the factorization call
//! for every variant; `residual` is empty unless `--check` is given. The
//! GEPP sweep writes `k,gflops`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

use crate::config::{BlockConfig, CacheConfig};
use crate::error::{Error, Result};
use crate::kernels::gemm_pool;
use crate::lu::{flops_lu, lu_factor, Policy, Variant};
use crate::matrix::{residual_packed, Matrix};
use crate::team::WorkerPool;
use crate::trace::{write_jsonl, TraceSink};

pub const CSV_HEADER: &str = "variant,n,b_outer,b_inner,threads,t_pf,seed,wall_seconds,gflops,residual,et_events";
pub const GEPP_HEADER: &str = "k,gflops";

/// Default `k` values of the GEPP sweep.
pub const GEPP_KS: [usize; 13] = [1, 8, 16, 32, 48, 64, 96, 128, 144, 160, 192, 224, 256];

#[derive(Debug, Clone, Parser)]
#[command(name = "mla-bench", about = "Benchmark LU variants and GEPP")]
pub struct Cli {
    #[arg(long, default_value = "lu", value_parser = parse_variant)]
    pub algo: Variant,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long = "b-outer", default_value_t = 256)]
    pub b_outer: usize,
    #[arg(long = "b-inner", default_value_t = 32)]
    pub b_inner: usize,
    /// Defaults to MLA_THREADS, then to the number of cores.
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long = "t-pf", default_value_t = 1)]
    pub t_pf: usize,
    #[arg(long, default_value_t = 4)]
    pub q: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Compute the backward error and fail if it exceeds n*100*eps.
    #[arg(long)]
    pub check: bool,
    /// Write a JSON-lines execution trace here.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Sweep b_outer over lo:hi:step.
    #[arg(long = "sweep-b", value_parser = parse_range)]
    pub sweep_b: Option<Steps>,
    /// Sweep n over lo:hi:step.
    #[arg(long = "sweep-n", value_parser = parse_range)]
    pub sweep_n: Option<Steps>,
    /// Run the GEPP sweep (m = n = --n, k from --sweep-b or a default list).
    #[arg(long)]
    pub gepp: bool,
}

fn parse_variant(s: &str) -> std::result::Result<Variant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

/// Values of a `lo:hi:step` sweep, both ends inclusive.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Steps(pub Vec<usize>);

pub fn parse_range(s: &str) -> std::result::Result<Steps, String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("expected lo:hi:step, got {s:?}"));
    }
    let num = |p: &str| p.trim().parse::<usize>().map_err(|_| format!("bad number {p:?} in {s:?}"));
    let (lo, hi, step) = (num(parts[0])?, num(parts[1])?, num(parts[2])?);
    if step == 0 || lo == 0 || lo > hi {
        return Err(format!("need 0 < lo <= hi and step > 0, got {s:?}"));
    }
    Ok(Steps((lo..=hi).step_by(step).collect()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub variant: Variant,
    pub n: usize,
    pub b_outer: usize,
    pub b_inner: usize,
    pub threads: usize,
    pub t_pf: usize,
    pub seed: u64,
    pub wall_seconds: f64,
    pub gflops: f64,
    pub residual: Option<f64>,
    pub et_events: usize,
}

impl BenchRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{:.6},{:.3},{},{}",
            self.variant,
            self.n,
            self.b_outer,
            self.b_inner,
            self.threads,
            self.t_pf,
            self.seed,
            self.wall_seconds,
            self.gflops,
            self.residual.map_or(String::new(), |r| format!("{r:.3e}")),
            self.et_events
        )
    }

    /// Backward-error bound used by `--check`.
    pub fn tolerance(&self) -> f64 {
        self.n.max(1) as f64 * 100.0 * f64::EPSILON
    }

    pub fn passed(&self) -> bool {
        self.residual.is_none_or(|r| r <= self.tolerance())
    }
}

/// One factorization of a seeded random `n x n` matrix.
pub fn run_one(
    policy: &Policy,
    n: usize,
    seed: u64,
    check: bool,
    pool: &WorkerPool,
    sink: Option<&TraceSink>,
) -> Result<BenchRecord> {
    let a = Matrix::random(n, n, seed);
    let mut f = a.clone();
    let t0 = Instant::now();
    let r = lu_factor(f.as_mut(), policy, pool, sink)?;
    let wall = t0.elapsed().as_secs_f64().max(1e-9);
    let residual = if check {
        Some(residual_packed(a.as_ref(), f.as_ref(), &r.ipiv)?)
    } else {
        None
    };
    Ok(BenchRecord {
        variant: policy.variant,
        n,
        b_outer: policy.block.b_outer(),
        b_inner: policy.block.b_inner(),
        threads: pool.threads(),
        t_pf: if policy.variant.is_lookahead() { policy.t_pf } else { 0 },
        seed,
        wall_seconds: wall,
        gflops: flops_lu(n, n) / wall / 1e9,
        residual,
        et_events: r.et_events,
    })
}

/// GFLOPS of `C(m x m) -= A(m x k) B(k x m)` for each `k`.
pub fn gepp_bench(m: usize, ks: &[usize], pool: &WorkerPool, cfg: &CacheConfig) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let a = Matrix::random(m, k, 1);
        let b = Matrix::random(k, m, 2);
        let mut c = Matrix::random(m, m, 3);
        // warm-up, then best of three
        gemm_pool(pool, c.as_mut(), a.as_ref(), b.as_ref(), 1.0, -1.0, cfg)?;
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let t0 = Instant::now();
            gemm_pool(pool, c.as_mut(), a.as_ref(), b.as_ref(), 1.0, -1.0, cfg)?;
            best = best.min(t0.elapsed().as_secs_f64());
        }
        out.push((k, 2.0 * (m * m * k) as f64 / best.max(1e-9) / 1e9));
    }
    Ok(out)
}

/// Runs the command line; returns whether every residual check passed.
pub fn run_cli<W: Write>(cli: &Cli, out: &mut W) -> Result<bool> {
    let pool = match cli.threads {
        Some(t) => WorkerPool::new(t)?,
        None => WorkerPool::from_env()?,
    };
    let cache = CacheConfig::from_env()?;
    let io = |e: std::io::Error| Error::InvalidConfig(format!("I/O error: {e}"));

    if cli.gepp {
        let ks = cli.sweep_b.clone().map_or_else(|| GEPP_KS.to_vec(), |s| s.0);
        writeln!(out, "{GEPP_HEADER}").map_err(io)?;
        for (k, g) in gepp_bench(cli.n, &ks, &pool, &cache)? {
            writeln!(out, "{k},{g:.3}").map_err(io)?;
        }
        return Ok(true);
    }

    let ns = cli.sweep_n.clone().map_or_else(|| vec![cli.n], |s| s.0);
    let bs = cli.sweep_b.clone().map_or_else(|| vec![cli.b_outer], |s| s.0);
    let mut policies = Vec::new();
    for &b_o in &bs {
        let block = BlockConfig::new(b_o, cli.b_inner.min(b_o))?;
        let p = Policy::new(cli.algo, block).with_t_pf(cli.t_pf).with_q(cli.q).with_cache(cache);
        p.validate(pool.threads())?;
        policies.push(p);
    }

    let sink = cli.trace.as_ref().map(|_| TraceSink::new());
    writeln!(out, "{CSV_HEADER}").map_err(io)?;
    let mut ok = true;
    for &n in &ns {
        for p in &policies {
            let rec = run_one(p, n, cli.seed, cli.check, &pool, sink.as_ref())?;
            ok &= rec.passed();
            writeln!(out, "{}", rec.csv_row()).map_err(io)?;
        }
    }
    if let (Some(path), Some(sink)) = (&cli.trace, &sink) {
        let mut events = sink.take();
        events.sort_by_key(|e| (e.worker, e.t_start));
        let file = File::create(path).map_err(io)?;
        let mut w = BufWriter::new(file);
        write_jsonl(&events, &mut w).map_err(io)?;
        w.flush().map_err(io)?;
    }
    Ok(ok)
}
