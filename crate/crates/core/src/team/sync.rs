use std::cell::UnsafeCell;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Condvar, Mutex, MutexGuard};
use std::time::Duration;

use super::{JoinFn, Team};

const POLL: Duration = Duration::from_millis(10);

/// Panic payload used when a worker gives up because another one panicked.
#[derive(Debug)]
pub(crate) struct TeamAborted;

pub(crate) fn check_abort(abort: &AtomicBool) {
    if abort.load(Ordering::Acquire) {
        std::panic::panic_any(TeamAborted);
    }
}

struct SyncState {
    arrived: usize,
    generation: u64,
    team: Team,
    word: u64,
}

/// Shared packing buffer of a team. Resized only by the deciding member of a
/// rendezvous, while every other member is blocked in that rendezvous.
pub(crate) struct Scratch(UnsafeCell<Vec<f64>>);

// SAFETY: resizing happens under the rendezvous protocol above; element
// writes target disjoint micro-panels per member (see kernels::pack).
unsafe impl Sync for Scratch {}
unsafe impl Send for Scratch {}

impl Scratch {
    fn new() -> Self {
        Scratch(UnsafeCell::new(Vec::new()))
    }

    /// # Safety
    /// Only the decider of a rendezvous may call this.
    pub(crate) unsafe fn ensure(&self, len: usize) {
        let v = &mut *self.0.get();
        if v.len() < len {
            v.resize(len, 0.0);
        }
    }

    pub(crate) fn ptr(&self) -> *mut f64 {
        // SAFETY: only the pointer is taken; the Vec is not resized concurrently.
        unsafe { (*self.0.get()).as_mut_ptr() }
    }
}

/// Rendezvous point, membership record and packing buffers of one team.
pub(crate) struct TeamSync {
    state: Mutex<SyncState>,
    cv: Condvar,
    pub(crate) pack_a: Scratch,
    pub(crate) pack_b: Scratch,
}

impl TeamSync {
    pub(crate) fn new(team: Team) -> Arc<Self> {
        Arc::new(TeamSync {
            state: Mutex::new(SyncState {
                arrived: 0,
                generation: 0,
                team,
                word: 0,
            }),
            cv: Condvar::new(),
            pack_a: Scratch::new(),
            pack_b: Scratch::new(),
        })
    }

    fn lock(&self) -> MutexGuard<'_, SyncState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub(crate) fn team(&self) -> Team {
        self.lock().team.clone()
    }

    /// Every current member must call this. The last one to arrive runs
    /// `decide` with exclusive access to the membership record; its return
    /// value and the (possibly updated) membership are returned to all.
    pub(crate) fn rendezvous<F>(&self, abort: &AtomicBool, decide: F) -> (u64, Team)
    where
        F: FnOnce(&mut Team) -> u64,
    {
        let mut st = self.lock();
        st.arrived += 1;
        debug_assert!(
            st.arrived <= st.team.members.len(),
            "more arrivals than team members: rendezvous called outside the team"
        );
        if st.arrived == st.team.members.len() {
            st.word = decide(&mut st.team);
            st.arrived = 0;
            st.generation = st.generation.wrapping_add(1);
            self.cv.notify_all();
            return (st.word, st.team.clone());
        }
        let gen = st.generation;
        while st.generation == gen {
            if abort.load(Ordering::Acquire) {
                drop(st);
                check_abort(abort);
                unreachable!();
            }
            st = self
                .cv
                .wait_timeout(st, POLL)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
        (st.word, st.team.clone())
    }

    /// Replaces the membership record. Only valid while no member of this
    /// team is inside a rendezvous.
    pub(crate) fn reset(&self, team: Team) {
        let mut st = self.lock();
        debug_assert_eq!(st.arrived, 0);
        st.team = team;
    }
}

enum LobbyState<'a> {
    Open,
    Ticket { job: JoinFn<'a>, sync: Arc<TeamSync>, team: Team },
    Closed,
}

/// Where finished donor workers wait to be absorbed into an in-flight kernel
/// of the other team.
pub struct Lobby<'a> {
    state: Mutex<LobbyState<'a>>,
    cv: Condvar,
}

impl Default for Lobby<'_> {
    fn default() -> Self {
        Lobby::new()
    }
}

impl<'a> Lobby<'a> {
    pub fn new() -> Self {
        Lobby {
            state: Mutex::new(LobbyState::Open),
            cv: Condvar::new(),
        }
    }

    fn lock(&self) -> MutexGuard<'_, LobbyState<'a>> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub(crate) fn post(&self, job: JoinFn<'a>, sync: Arc<TeamSync>, team: Team) {
        let mut st = self.lock();
        if matches!(*st, LobbyState::Open) {
            *st = LobbyState::Ticket { job, sync, team };
            self.cv.notify_all();
        }
    }

    /// No further tickets will be posted in this round.
    pub fn close(&self) {
        let mut st = self.lock();
        if matches!(*st, LobbyState::Open) {
            *st = LobbyState::Closed;
        }
        self.cv.notify_all();
    }

    pub fn reset(&self) {
        *self.lock() = LobbyState::Open;
    }

    /// Blocks until a ticket is posted (returned) or the lobby is closed (`None`).
    pub(crate) fn wait(&self, abort: &AtomicBool) -> Option<(JoinFn<'a>, Arc<TeamSync>, Team)> {
        let mut st = self.lock();
        loop {
            match &*st {
                LobbyState::Open => {}
                LobbyState::Closed => return None,
                LobbyState::Ticket { job, sync, team } => {
                    return Some((job.clone(), sync.clone(), team.clone()));
                }
            }
            if abort.load(Ordering::Acquire) {
                drop(st);
                check_abort(abort);
                unreachable!();
            }
            st = self
                .cv
                .wait_timeout(st, POLL)
                .unwrap_or_else(|e| e.into_inner())
                .0;
        }
    }
}
