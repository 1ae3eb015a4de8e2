//! Per-worker execution traces.
//!
//! Every worker records the top-level spans it executes (nested spans are
//! folded into the enclosing one, so one worker's events never overlap).
//! Buffers are local to the worker and are handed to a shared [`TraceSink`]
//! when the worker leaves the pool. The on-disk format is JSON lines, one
//! [`TraceEvent`] per line.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Which team a worker belonged to when it executed an event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TeamId {
    /// Panel factorization team.
    Pf,
    /// Remainder update team.
    Ru,
    /// RU after absorbing the PF workers.
    Merged,
    /// Every worker of the pool (non look-ahead phases).
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TaskKind {
    PackA,
    PackB,
    Gemm,
    Trsm,
    Laswp,
    Panel,
    Barrier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub worker: usize,
    pub team: TeamId,
    pub task: TaskKind,
    /// Nanoseconds since the start of the run.
    pub t_start: u64,
    pub t_end: u64,
    /// Outer-iteration index (0 for the prologue and non look-ahead runs).
    pub iter: usize,
}

/// Collects the buffers of all workers of one or more pool runs.
#[derive(Debug)]
pub struct TraceSink {
    start: Instant,
    events: Mutex<Vec<TraceEvent>>,
}

impl Default for TraceSink {
    fn default() -> Self {
        TraceSink::new()
    }
}

impl TraceSink {
    pub fn new() -> Self {
        TraceSink {
            start: Instant::now(),
            events: Mutex::new(Vec::new()),
        }
    }

    pub(crate) fn recorder(&self, worker: usize) -> TraceRecorder {
        TraceRecorder {
            worker,
            start: Some(self.start),
            depth: 0,
            iter: 0,
            events: Vec::new(),
        }
    }

    pub(crate) fn absorb(&self, rec: TraceRecorder) {
        let mut all = self.events.lock().unwrap_or_else(|e| e.into_inner());
        all.extend(rec.events);
    }

    /// Events sorted by `(worker, t_start)`.
    pub fn events(&self) -> Vec<TraceEvent> {
        let mut ev = self.events.lock().unwrap_or_else(|e| e.into_inner()).clone();
        ev.sort_by_key(|e| (e.worker, e.t_start, e.t_end));
        ev
    }

    pub fn take(&self) -> Vec<TraceEvent> {
        let mut ev = std::mem::take(&mut *self.events.lock().unwrap_or_else(|e| e.into_inner()));
        ev.sort_by_key(|e| (e.worker, e.t_start, e.t_end));
        ev
    }
}

/// Open span returned by [`TraceRecorder::begin`].
#[derive(Debug)]
#[must_use]
pub struct Span {
    team: TeamId,
    task: TaskKind,
    t_start: u64,
    top: bool,
}

/// Worker-local trace buffer. Disabled recorders cost one branch per span.
#[derive(Debug)]
pub struct TraceRecorder {
    worker: usize,
    start: Option<Instant>,
    depth: u32,
    iter: usize,
    events: Vec<TraceEvent>,
}

impl TraceRecorder {
    pub(crate) fn disabled(worker: usize) -> Self {
        TraceRecorder {
            worker,
            start: None,
            depth: 0,
            iter: 0,
            events: Vec::new(),
        }
    }

    #[inline]
    fn now(&self) -> u64 {
        self.start.map_or(0, |s| s.elapsed().as_nanos() as u64)
    }

    pub fn set_iter(&mut self, iter: usize) {
        self.iter = iter;
    }

    pub fn iter(&self) -> usize {
        self.iter
    }

    #[inline]
    pub fn begin(&mut self, team: TeamId, task: TaskKind) -> Span {
        let top = self.depth == 0;
        self.depth += 1;
        Span {
            team,
            task,
            t_start: if top && self.start.is_some() { self.now() } else { 0 },
            top,
        }
    }

    #[inline]
    pub fn end(&mut self, span: Span) {
        self.depth -= 1;
        if span.top && self.start.is_some() {
            let t_end = self.now().max(span.t_start);
            self.events.push(TraceEvent {
                worker: self.worker,
                team: span.team,
                task: span.task,
                t_start: span.t_start,
                t_end,
                iter: self.iter,
            });
        }
    }
}

pub fn write_jsonl<W: Write>(events: &[TraceEvent], mut out: W) -> io::Result<()> {
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead>(input: R) -> io::Result<Vec<TraceEvent>> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(io::Error::other)?);
    }
    Ok(out)
}

/// Checks `t_end >= t_start` and that each worker's events do not overlap.
pub fn check_well_formed(events: &[TraceEvent]) -> Result<(), String> {
    let mut per_worker: BTreeMap<usize, Vec<&TraceEvent>> = BTreeMap::new();
    for e in events {
        if e.t_end < e.t_start {
            return Err(format!("event ends before it starts: {e:?}"));
        }
        per_worker.entry(e.worker).or_default().push(e);
    }
    for (w, mut evs) in per_worker {
        evs.sort_by_key(|e| (e.t_start, e.t_end));
        for pair in evs.windows(2) {
            if pair[1].t_start < pair[0].t_end {
                return Err(format!("worker {w}: {:?} overlaps {:?}", pair[0], pair[1]));
            }
        }
    }
    Ok(())
}

/// Every MERGED event executed by a PF worker must start after that worker
/// finished its PANEL event in the same iteration.
pub fn check_merge_causality(events: &[TraceEvent]) -> Result<(), String> {
    let mut panel_end: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    for e in events.iter().filter(|e| e.task == TaskKind::Panel && e.team == TeamId::Pf) {
        let slot = panel_end.entry((e.worker, e.iter)).or_insert(0);
        *slot = (*slot).max(e.t_end);
    }
    let pf_workers: std::collections::BTreeSet<usize> =
        panel_end.keys().map(|&(w, _)| w).collect();
    for e in events.iter().filter(|e| e.team == TeamId::Merged && pf_workers.contains(&e.worker)) {
        match panel_end.get(&(e.worker, e.iter)) {
            Some(&end) if e.t_start >= end => {}
            Some(&end) => {
                return Err(format!(
                    "worker {} merged at {} before its panel ended at {end}",
                    e.worker, e.t_start
                ))
            }
            None => return Err(format!("merged event without a preceding panel: {e:?}")),
        }
    }
    Ok(())
}

/// Per-iteration timing summary derived from a trace.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationSummary {
    pub iter: usize,
    /// First event start to last event end over all workers.
    pub span_ns: u64,
    /// Number of distinct workers that ran MERGED events.
    pub merged_workers: usize,
    /// For each PF worker: time from the end of its PANEL event until it next
    /// executes a non-barrier task in the same iteration; runs to the end of
    /// the iteration when it never does.
    pub pf_idle_ns: Vec<u64>,
}

impl IterationSummary {
    pub fn max_pf_idle_fraction(&self) -> f64 {
        let idle = self.pf_idle_ns.iter().copied().max().unwrap_or(0);
        if self.span_ns == 0 {
            0.0
        } else {
            idle as f64 / self.span_ns as f64
        }
    }
}

pub fn summarize_iterations(events: &[TraceEvent]) -> Vec<IterationSummary> {
    let mut by_iter: BTreeMap<usize, Vec<&TraceEvent>> = BTreeMap::new();
    for e in events {
        by_iter.entry(e.iter).or_default().push(e);
    }
    by_iter
        .into_iter()
        .map(|(iter, evs)| {
            let t0 = evs.iter().map(|e| e.t_start).min().unwrap_or(0);
            let t1 = evs.iter().map(|e| e.t_end).max().unwrap_or(0);
            let merged: std::collections::BTreeSet<usize> = evs
                .iter()
                .filter(|e| e.team == TeamId::Merged)
                .map(|e| e.worker)
                .collect();
            let mut panel_end: BTreeMap<usize, u64> = BTreeMap::new();
            for e in evs.iter().filter(|e| e.task == TaskKind::Panel) {
                let s = panel_end.entry(e.worker).or_insert(0);
                *s = (*s).max(e.t_end);
            }
            let pf_idle_ns = panel_end
                .iter()
                .map(|(&w, &end)| {
                    let next = evs
                        .iter()
                        .filter(|e| e.worker == w && e.task != TaskKind::Barrier && e.t_start >= end)
                        .map(|e| e.t_start)
                        .min()
                        .unwrap_or(t1);
                    next - end
                })
                .collect();
            IterationSummary {
                iter,
                span_ns: t1 - t0,
                merged_workers: merged.len(),
                pf_idle_ns,
            }
        })
        .collect()
}
