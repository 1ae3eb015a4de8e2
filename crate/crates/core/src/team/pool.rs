use std::any::Any;
use std::panic::{self, AssertUnwindSafe};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;

use super::sync::TeamAborted;
use super::{donate, CompletionFlag, Lobby, Team, TeamCtx, TeamId, TeamSync, Worker};
use crate::config::env_usize;
use crate::error::{Error, Result};
use crate::trace::{TraceRecorder, TraceSink};

/// Fixed set of `t` workers with stable ids `0..t`.
///
/// Threads are spawned per [`WorkerPool::run`] call (scoped, so kernels may
/// borrow the caller's matrices) and pinned one per core when the platform
/// allows it.
#[derive(Debug, Clone)]
pub struct WorkerPool {
    threads: usize,
    pin: bool,
}

impl WorkerPool {
    pub fn new(threads: usize) -> Result<Self> {
        if threads == 0 {
            return Err(Error::InvalidConfig("a pool needs at least one worker".into()));
        }
        Ok(WorkerPool { threads, pin: true })
    }

    /// Size from `MLA_THREADS`, else the number of available cores.
    pub fn from_env() -> Result<Self> {
        let t = match env_usize("MLA_THREADS")? {
            Some(t) => t,
            None => thread::available_parallelism().map_or(1, |n| n.get()),
        };
        WorkerPool::new(t)
    }

    pub fn with_pinning(mut self, pin: bool) -> Self {
        self.pin = pin;
        self
    }

    #[inline]
    pub fn threads(&self) -> usize {
        self.threads
    }

    /// Runs `f` once on every worker and returns when all have finished.
    ///
    /// A panic in any worker makes the others abandon their rendezvous; the
    /// first original panic is re-raised once every worker has stopped.
    pub fn run<F>(&self, sink: Option<&TraceSink>, f: F)
    where
        F: Fn(&mut Worker) + Sync,
    {
        let abort = Arc::new(AtomicBool::new(false));
        let ncores = thread::available_parallelism().map_or(1, |n| n.get());
        let body = |id: usize| -> Option<Box<dyn Any + Send>> {
            if self.pin && self.threads > 1 {
                pin_to_core(id % ncores);
            }
            let rec = sink.map_or_else(|| TraceRecorder::disabled(id), |s| s.recorder(id));
            let mut worker = Worker::new(id, abort.clone(), rec);
            let res = panic::catch_unwind(AssertUnwindSafe(|| f(&mut worker)));
            if let Some(s) = sink {
                s.absorb(std::mem::replace(&mut worker.trace, TraceRecorder::disabled(id)));
            }
            match res {
                Ok(()) => None,
                Err(p) => {
                    abort.store(true, Ordering::Release);
                    Some(p)
                }
            }
        };

        let mut panics: Vec<Box<dyn Any + Send>> = Vec::new();
        if self.threads == 1 {
            panics.extend(body(0));
        } else {
            thread::scope(|s| {
                let handles: Vec<_> = (1..self.threads)
                    .map(|id| {
                        let body = &body;
                        thread::Builder::new()
                            .name(format!("mla-worker-{id}"))
                            .spawn_scoped(s, move || body(id))
                            .expect("failed to spawn worker thread")
                    })
                    .collect();
                panics.extend(body(0));
                for h in handles {
                    match h.join() {
                        Ok(p) => panics.extend(p),
                        Err(p) => panics.push(p),
                    }
                }
            });
        }
        if !panics.is_empty() {
            let idx = panics.iter().position(|p| !p.is::<TeamAborted>()).unwrap_or(0);
            panic::resume_unwind(panics.swap_remove(idx));
        }
    }

    /// Runs `f` as a collective routine of one team containing every worker.
    pub fn run_team<F>(&self, sink: Option<&TraceSink>, f: F)
    where
        F: Fn(&mut TeamCtx<'_>) + Sync,
    {
        let team = Team::new(TeamId::All, (0..self.threads).collect());
        let sync = TeamSync::new(team.clone());
        self.run(sink, |w| {
            let mut ctx = TeamCtx::new(w, sync.clone(), team.clone());
            f(&mut ctx);
        });
    }

    /// One round of two concurrent tasks: `task_pf` on a team of `t_pf`
    /// workers and `task_ru` on the remaining ones. PF workers that finish
    /// first wait to be absorbed by RU's malleable kernels.
    pub fn run_two_tasks<FP, FR>(&self, t_pf: usize, sink: Option<&TraceSink>, task_pf: FP, task_ru: FR) -> Result<()>
    where
        FP: Fn(&mut TeamCtx<'_>, &TwoTeams<'_>) + Sync,
        FR: Fn(&mut TeamCtx<'_>, &TwoTeams<'_>) + Sync,
    {
        let teams = TwoTeams::new(self.threads, t_pf)?;
        self.run(sink, |w| {
            teams.run_split(w, true, |ctx| task_pf(ctx, &teams), |ctx| task_ru(ctx, &teams));
        });
        Ok(())
    }
}

#[cfg(target_os = "linux")]
fn pin_to_core(core: usize) {
    // SAFETY: plain libc call on a zero-initialised cpu_set_t for this thread.
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(core, &mut set);
        let _ = libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set);
    }
}

#[cfg(not(target_os = "linux"))]
fn pin_to_core(_core: usize) {}

/// Shared state of a run that alternates between a whole-pool team and a
/// PF/RU split.
///
/// Worker ids `0..t_pf` form PF, `t_pf..t` form RU. `pf_done` is written by
/// PF's coordinator once every PF member has finished; `ru_done` likewise by
/// RU's coordinator. At the closing barrier of each round both flags, the
/// lobby and RU's membership are reset to the configured split.
pub struct TwoTeams<'a> {
    t: usize,
    t_pf: usize,
    all: Arc<TeamSync>,
    pf: Arc<TeamSync>,
    ru: Arc<TeamSync>,
    pf_members: Vec<usize>,
    ru_members: Vec<usize>,
    pub pf_done: CompletionFlag,
    pub ru_done: CompletionFlag,
    pub lobby: Lobby<'a>,
}

impl<'a> TwoTeams<'a> {
    pub fn new(t: usize, t_pf: usize) -> Result<Self> {
        if t_pf == 0 || t_pf >= t {
            return Err(Error::InvalidConfig(format!(
                "need 1 <= t_pf < threads, got t_pf={t_pf}, threads={t}"
            )));
        }
        let pf_members: Vec<usize> = (0..t_pf).collect();
        let ru_members: Vec<usize> = (t_pf..t).collect();
        Ok(TwoTeams {
            t,
            t_pf,
            all: TeamSync::new(Team::new(TeamId::All, (0..t).collect())),
            pf: TeamSync::new(Team::new(TeamId::Pf, pf_members.clone())),
            ru: TeamSync::new(Team::new(TeamId::Ru, ru_members.clone())),
            pf_members,
            ru_members,
            pf_done: CompletionFlag::new(),
            ru_done: CompletionFlag::new(),
            lobby: Lobby::new(),
        })
    }

    pub fn threads(&self) -> usize {
        self.t
    }

    pub fn t_pf(&self) -> usize {
        self.t_pf
    }

    pub fn pf_members(&self) -> &[usize] {
        &self.pf_members
    }

    pub fn ru_members(&self) -> &[usize] {
        &self.ru_members
    }

    /// Context of `worker` in the whole-pool team.
    pub fn all_team<'w>(&self, worker: &'w mut Worker) -> TeamCtx<'w> {
        let team = self.all.team();
        TeamCtx::new(worker, self.all.clone(), team)
    }

    /// Collective over all workers: PF members run `task_pf`, RU members run
    /// `task_ru`, then everyone meets at the round barrier. With `donate`,
    /// PF workers that finish wait in the lobby for RU to absorb them.
    pub fn run_split<FP, FR>(&self, worker: &mut Worker, donate_workers: bool, task_pf: FP, task_ru: FR)
    where
        FP: FnOnce(&mut TeamCtx<'_>),
        FR: FnOnce(&mut TeamCtx<'_>),
    {
        let id = worker.id();
        if id < self.t_pf {
            {
                let team = self.pf.team();
                let mut ctx = TeamCtx::new(worker, self.pf.clone(), team);
                task_pf(&mut ctx);
                ctx.barrier();
                if ctx.is_leader() {
                    self.pf_done.signal_complete();
                }
            }
            if donate_workers {
                donate(worker, &self.lobby);
            }
        } else {
            let team = self.ru.team();
            let mut ctx = TeamCtx::new(worker, self.ru.clone(), team);
            task_ru(&mut ctx);
            ctx.barrier();
            if id == self.t_pf {
                self.ru_done.signal_complete();
                self.lobby.close();
            }
        }
        self.round_barrier(worker);
    }

    /// Whole-pool barrier that also resets the per-round state.
    pub fn round_barrier(&self, worker: &mut Worker) {
        let mut ctx = self.all_team(worker);
        ctx.decide(|_| {
            self.pf_done.reset();
            self.ru_done.reset();
            self.lobby.reset();
            let mut ru = self.ru.team();
            if ru.id != TeamId::Ru {
                let epoch = ru.epoch + 1;
                ru = Team::new(TeamId::Ru, self.ru_members.clone());
                ru.epoch = epoch;
            }
            self.ru.reset(ru);
            0
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::atomic::AtomicUsize;
    use std::sync::Mutex;
    use std::time::{Duration, Instant};

    #[test]
    fn rejects_bad_split() {
        assert!(WorkerPool::new(0).is_err());
        let pool = WorkerPool::new(2).unwrap();
        assert!(pool.run_two_tasks(2, None, |_, _| {}, |_, _| {}).is_err());
        assert!(pool.run_two_tasks(0, None, |_, _| {}, |_, _| {}).is_err());
    }

    #[test]
    fn every_worker_runs_once() {
        let pool = WorkerPool::new(4).unwrap();
        let seen = Mutex::new(Vec::new());
        pool.run(None, |w| seen.lock().unwrap().push(w.id()));
        let mut s = seen.into_inner().unwrap();
        s.sort();
        assert_eq!(s, vec![0, 1, 2, 3]);
    }

    #[test]
    fn noop_tasks_leave_flags_untouched() {
        let pool = WorkerPool::new(2).unwrap();
        let teams = TwoTeams::new(2, 1).unwrap();
        let ran = AtomicUsize::new(0);
        pool.run(None, |w| {
            teams.run_split(
                w,
                false,
                |_| {
                    ran.fetch_add(1, Ordering::Relaxed);
                },
                |ctx| {
                    assert_eq!(ctx.team().id, TeamId::Ru);
                    ran.fetch_add(1, Ordering::Relaxed);
                },
            )
        });
        assert_eq!(ran.load(Ordering::Relaxed), 2);
        assert!(!teams.pf_done.is_set() && !teams.ru_done.is_set());
    }

    #[test]
    fn flag_set_and_poll_same_worker() {
        let f = CompletionFlag::new();
        assert!(!f.is_set());
        f.signal_complete();
        f.signal_complete();
        assert!(f.is_set());
        f.reset();
        assert!(!f.is_set());
    }

    #[test]
    fn teams_are_disjoint_and_cover_pool() {
        let teams = TwoTeams::new(6, 1).unwrap();
        assert_eq!(teams.pf_members(), &[0]);
        assert_eq!(teams.ru_members(), &[1, 2, 3, 4, 5]);
    }

    #[test]
    fn merge_with_five_plus_one() {
        let pool = WorkerPool::new(6).unwrap();
        let teams = TwoTeams::new(6, 1).unwrap();
        let sizes = Mutex::new(Vec::new());
        pool.run(None, |w| {
            teams.run_split(
                w,
                true,
                |_| {},
                |ctx| {
                    // wait until PF has signalled before the entry point
                    while !teams.pf_done.is_set() {
                        thread::yield_now();
                    }
                    let src = super::super::MergeSource {
                        flag: &teams.pf_done,
                        lobby: &teams.lobby,
                        donors: teams.pf_members(),
                    };
                    let epoch0 = ctx.team().epoch;
                    let merged = ctx.checkpoint_merge(Some(&src), || {
                        Arc::new(|c: &mut TeamCtx<'_>| {
                            assert_eq!(c.team().id, TeamId::Merged);
                            // mirrors RU's second entry point below
                            c.barrier();
                        })
                    });
                    assert!(merged);
                    assert_eq!(ctx.team().epoch, epoch0 + 1);
                    sizes.lock().unwrap().push((ctx.size(), ctx.team().id));
                    // second entry point: already merged, nothing changes
                    let again = ctx.checkpoint_merge(Some(&src), || unreachable!());
                    assert!(!again);
                    assert_eq!(ctx.team().epoch, epoch0 + 1);
                },
            )
        });
        let s = sizes.into_inner().unwrap();
        assert_eq!(s.len(), 5);
        assert!(s.iter().all(|&(n, id)| n == 6 && id == TeamId::Merged));
    }

    #[test]
    fn unset_flag_keeps_team() {
        let pool = WorkerPool::new(3).unwrap();
        let teams = TwoTeams::new(3, 1).unwrap();
        let never = CompletionFlag::new();
        pool.run(None, |w| {
            teams.run_split(
                w,
                true,
                |_| {},
                |ctx| {
                    let src = super::super::MergeSource {
                        flag: &never,
                        lobby: &teams.lobby,
                        donors: teams.pf_members(),
                    };
                    for _ in 0..10 {
                        let before = ctx.team().clone();
                        assert!(!ctx.checkpoint_merge(Some(&src), || unreachable!()));
                        assert_eq!(ctx.team(), &before);
                    }
                    assert_eq!(ctx.size(), 2);
                },
            )
        });
    }

    #[test]
    fn merged_team_resets_next_round() {
        let pool = WorkerPool::new(3).unwrap();
        let teams = TwoTeams::new(3, 1).unwrap();
        let sizes = Mutex::new(Vec::new());
        pool.run(None, |w| {
            for _round in 0..3 {
                teams.run_split(
                    w,
                    true,
                    |_| {},
                    |ctx| {
                        let start = ctx.size();
                        while !teams.pf_done.is_set() {
                            thread::yield_now();
                        }
                        let src = super::super::MergeSource {
                            flag: &teams.pf_done,
                            lobby: &teams.lobby,
                            donors: teams.pf_members(),
                        };
                        ctx.checkpoint_merge(Some(&src), || Arc::new(|_: &mut TeamCtx<'_>| {}));
                        // rank 0 of the merged team is a donor, so report from worker 1
                        if ctx.worker_id() == 1 {
                            sizes.lock().unwrap().push((start, ctx.size()));
                        }
                    },
                );
            }
        });
        assert_eq!(sizes.into_inner().unwrap(), vec![(2, 3); 3]);
    }

    #[test]
    fn merge_happens_soon_after_signal() {
        // PF sleeps ~1 ms; RU runs 100 entry points. The merge must occur at
        // the first entry point reached after the flag was raised.
        let pool = WorkerPool::new(4).unwrap();
        let teams = TwoTeams::new(4, 1).unwrap();
        let t0 = Instant::now();
        let signal_at = Mutex::new(None);
        let steps = Mutex::new(Vec::new());
        let merged_at = Mutex::new(None);
        pool.run(None, |w| {
            teams.run_split(
                w,
                true,
                |_| {
                    thread::sleep(Duration::from_millis(1));
                    *signal_at.lock().unwrap() = Some(t0.elapsed());
                },
                |ctx| {
                    let src = super::super::MergeSource {
                        flag: &teams.pf_done,
                        lobby: &teams.lobby,
                        donors: teams.pf_members(),
                    };
                    for step in 0..100usize {
                        let entered = t0.elapsed();
                        let m = ctx.checkpoint_merge(Some(&src), || {
                            Arc::new(move |c: &mut TeamCtx<'_>| {
                                for _ in step + 1..100 {
                                    c.barrier();
                                }
                            })
                        });
                        if ctx.is_leader() {
                            steps.lock().unwrap().push(entered);
                            if m {
                                *merged_at.lock().unwrap() = Some(step);
                            }
                        }
                        thread::sleep(Duration::from_micros(100));
                    }
                },
            )
        });
        let signal = signal_at.into_inner().unwrap().unwrap();
        let steps = steps.into_inner().unwrap();
        let merged = merged_at.into_inner().unwrap();
        // first step whose entry began after the flag could have been set,
        // plus one step of rendezvous slack
        let bound = steps.iter().position(|&t| t > signal).map_or(100, |p| p + 1);
        if let Some(m) = merged {
            assert!(m <= bound, "merged at step {m}, flag visible by step {bound}");
        } else {
            // only legal if RU never reached an entry point after the signal
            assert_eq!(bound, 100);
        }
    }

    #[test]
    fn panic_in_one_team_propagates() {
        let pool = WorkerPool::new(3).unwrap();
        let r = panic::catch_unwind(AssertUnwindSafe(|| {
            pool.run_team(None, |ctx| {
                if ctx.rank() == 1 {
                    panic!("boom");
                }
                ctx.barrier();
            })
        }));
        let err = r.unwrap_err();
        assert_eq!(err.downcast_ref::<&str>(), Some(&"boom"));
    }
}
