//! Worker teams.
//!
//! The pool is the only place that creates threads. Everything else is
//! written as a collective routine: each member of a team calls it with the
//! same arguments and the members meet at rendezvous points. Two teams (PF
//! and RU) can be live at once; when the PF team has finished, its workers
//! wait in a [`Lobby`] until the RU team reaches an entry point of a
//! malleable kernel and absorbs them ([`TeamCtx::checkpoint_merge`]).

mod pool;
mod sync;

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

pub use pool::{TwoTeams, WorkerPool};
pub use sync::Lobby;
pub(crate) use sync::TeamSync;

pub use crate::trace::TeamId;
use crate::trace::{Span, TaskKind, TraceRecorder};

/// Team membership. `epoch` increases at every membership change.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Team {
    pub id: TeamId,
    /// Worker ids, sorted ascending. A member's rank is its position here.
    pub members: Vec<usize>,
    pub epoch: u64,
}

impl Team {
    pub fn new(id: TeamId, mut members: Vec<usize>) -> Self {
        members.sort_unstable();
        members.dedup();
        Team {
            id,
            members,
            epoch: 0,
        }
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }

    pub fn rank_of(&self, worker: usize) -> Option<usize> {
        self.members.binary_search(&worker).ok()
    }
}

/// Single-writer completion signal.
///
/// The designated writer sets it once per round with release ordering;
/// readers poll it with acquire ordering at their entry points, so anything
/// the writer did before signalling is visible to a reader that sees `true`.
#[derive(Debug, Default)]
pub struct CompletionFlag {
    done: AtomicBool,
}

impl CompletionFlag {
    pub fn new() -> Self {
        CompletionFlag::default()
    }

    /// Idempotent.
    pub fn signal_complete(&self) {
        self.done.store(true, Ordering::Release);
    }

    #[inline]
    pub fn is_set(&self) -> bool {
        self.done.load(Ordering::Acquire)
    }

    /// Coordinator only, between rounds.
    pub fn reset(&self) {
        self.done.store(false, Ordering::Release);
    }
}

/// Work handed to donor workers: they run it as members of the merged team.
pub type JoinFn<'a> = Arc<dyn Fn(&mut TeamCtx<'_>) + Send + Sync + 'a>;

/// Everything a malleable kernel needs to absorb the other team.
#[derive(Clone, Copy)]
pub struct MergeSource<'s, 'a> {
    /// Set by the donor team once all its members have finished their task.
    pub flag: &'s CompletionFlag,
    pub lobby: &'s Lobby<'a>,
    pub donors: &'s [usize],
}

/// A pool thread.
pub struct Worker {
    id: usize,
    abort: Arc<AtomicBool>,
    pub(crate) trace: TraceRecorder,
}

impl Worker {
    pub(crate) fn new(id: usize, abort: Arc<AtomicBool>, trace: TraceRecorder) -> Self {
        Worker { id, abort, trace }
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn set_iter(&mut self, iter: usize) {
        self.trace.set_iter(iter);
    }

    pub(crate) fn abort_flag(&self) -> &AtomicBool {
        &self.abort
    }

    pub fn trace_begin(&mut self, team: TeamId, task: TaskKind) -> Span {
        self.trace.begin(team, task)
    }

    pub fn trace_end(&mut self, span: Span) {
        self.trace.end(span)
    }
}

/// A worker acting as a member of a team.
pub struct TeamCtx<'w> {
    worker: &'w mut Worker,
    sync: Arc<TeamSync>,
    team: Team,
    rank: usize,
}

impl<'w> TeamCtx<'w> {
    pub(crate) fn new(worker: &'w mut Worker, sync: Arc<TeamSync>, team: Team) -> Self {
        let rank = team
            .rank_of(worker.id())
            .expect("worker is not a member of the team it joins");
        TeamCtx {
            worker,
            sync,
            team,
            rank,
        }
    }

    /// A team of one that never blocks: used for calls made outside a pool.
    pub fn solo<R>(f: impl FnOnce(&mut TeamCtx<'_>) -> R) -> R {
        let mut w = Worker::new(0, Arc::new(AtomicBool::new(false)), TraceRecorder::disabled(0));
        let team = Team::new(TeamId::All, vec![0]);
        let sync = TeamSync::new(team.clone());
        let mut ctx = TeamCtx::new(&mut w, sync, team);
        f(&mut ctx)
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.rank
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.team.members.len()
    }

    #[inline]
    pub fn is_leader(&self) -> bool {
        self.rank == 0
    }

    pub fn team(&self) -> &Team {
        &self.team
    }

    pub fn worker_id(&self) -> usize {
        self.worker.id()
    }

    pub fn worker(&mut self) -> &mut Worker {
        self.worker
    }

    pub(crate) fn sync(&self) -> &Arc<TeamSync> {
        &self.sync
    }

    fn adopt(&mut self, team: Team) {
        if team.epoch != self.team.epoch || team.members != self.team.members {
            self.rank = team
                .rank_of(self.worker.id())
                .expect("membership change dropped a member");
            self.team = team;
        }
    }

    /// Team-wide rendezvous in which one member (the last to arrive) runs
    /// `decide`; every member receives its result.
    pub fn decide<F>(&mut self, decide: F) -> u64
    where
        F: FnOnce(&mut Team) -> u64,
    {
        if self.team.members.len() == 1 {
            // completes at once; still under the lock, so a donor posted a
            // ticket by `decide` sees the new membership
            let (word, team) = self.sync.rendezvous(&self.worker.abort, decide);
            self.adopt(team);
            return word;
        }
        let span = self.worker.trace.begin(self.team.id, TaskKind::Barrier);
        let (word, team) = self.sync.rendezvous(&self.worker.abort, decide);
        self.worker.trace.end(span);
        self.adopt(team);
        word
    }

    pub fn barrier(&mut self) {
        if self.team.members.len() > 1 {
            self.decide(|_| 0);
        }
    }

    /// Collective broadcast of a boolean evaluated by one member.
    pub fn agree(&mut self, f: impl FnOnce() -> bool) -> bool {
        self.decide(|_| f() as u64) != 0
    }

    /// Entry point of a malleable kernel.
    ///
    /// Must be called by every member. If `source` is given, its flag is set
    /// (the donor team has quiesced) and this team has not merged yet, the
    /// donors are added to the membership, the epoch is bumped and the join
    /// closure built by `join` is posted to the lobby for the donors to run.
    /// Returns `true` for every member iff the merge happened at this call.
    pub fn checkpoint_merge<'a>(
        &mut self,
        source: Option<&MergeSource<'_, 'a>>,
        join: impl FnOnce() -> JoinFn<'a>,
    ) -> bool {
        let Some(src) = source else {
            self.barrier();
            return false;
        };
        let sync = self.sync.clone();
        let merged = self.decide(|team| {
            if team.id == TeamId::Merged || !src.flag.is_set() {
                return 0;
            }
            team.members.extend_from_slice(src.donors);
            team.members.sort_unstable();
            team.members.dedup();
            team.id = TeamId::Merged;
            team.epoch += 1;
            src.lobby.post(join(), sync, team.clone());
            1
        });
        merged != 0
    }

    pub fn trace_begin(&mut self, task: TaskKind) -> Span {
        let id = self.team.id;
        self.worker.trace.begin(id, task)
    }

    pub fn trace_end(&mut self, span: Span) {
        self.worker.trace.end(span)
    }

    /// Runs `f` on rank 0 only, then synchronizes the team.
    pub fn leader_then_barrier<R>(&mut self, f: impl FnOnce(&mut Self) -> R) -> Option<R> {
        let r = if self.is_leader() { Some(f(self)) } else { None };
        self.barrier();
        r
    }
}

/// Waits in `lobby` and, if a ticket is posted, runs it as a member of the
/// merged team. Returns whether the worker was absorbed.
pub(crate) fn donate(worker: &mut Worker, lobby: &Lobby<'_>) -> bool {
    let span = worker.trace.begin(TeamId::Pf, TaskKind::Barrier);
    let ticket = lobby.wait(worker.abort_flag());
    worker.trace.end(span);
    match ticket {
        Some((job, sync, team)) => {
            let mut ctx = TeamCtx::new(worker, sync, team);
            job(&mut ctx);
            ctx.barrier();
            true
        }
        None => false,
    }
}
