//! Deterministic discrete-event engine.
//!
//! Events are totally ordered by `(fire_at, seq)`, where `seq` is assigned in
//! scheduling order. Every processed event is folded into a running FNV-1a
//! trace hash so two runs can be compared bit for bit.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::ops::{Add, Sub};

use fnv::FnvHasher;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

/// Simulation time in integer nanoseconds since start.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);
    pub const MAX: SimTime = SimTime(u64::MAX);

    pub const fn from_nanos(ns: u64) -> Self {
        SimTime(ns)
    }

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us * 1_000)
    }

    pub const fn from_millis(ms: u64) -> Self {
        SimTime(ms * 1_000_000)
    }

    pub const fn from_secs(s: u64) -> Self {
        SimTime(s * 1_000_000_000)
    }

    /// Rounds to the nearest nanosecond. Negative or non-finite input is a
    /// caller bug and yields `None`.
    pub fn from_secs_f64(s: f64) -> Option<Self> {
        if !s.is_finite() || s < 0.0 {
            return None;
        }
        let ns = (s * 1e9).round();
        if ns > u64::MAX as f64 {
            return None;
        }
        Some(SimTime(ns as u64))
    }

    pub const fn as_nanos(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e9
    }

    pub fn as_millis_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.9}s", self.as_secs_f64())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SimError {
    #[error("event scheduled in the past: fire_at {fire_at} < now {now}")]
    ScheduledInPast { fire_at: SimTime, now: SimTime },
}

/// Handle returned by [`Scheduler::schedule`]; permits cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EventHandle(u64);

#[derive(Debug)]
struct Queued<E> {
    fire_at: SimTime,
    seq: u64,
    payload: E,
}

impl<E> PartialEq for Queued<E> {
    fn eq(&self, other: &Self) -> bool {
        (self.fire_at, self.seq) == (other.fire_at, other.seq)
    }
}
impl<E> Eq for Queued<E> {}
impl<E> PartialOrd for Queued<E> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Queued<E> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.fire_at, self.seq).cmp(&(other.fire_at, other.seq))
    }
}

/// Event queue plus clock.
pub struct Scheduler<E> {
    now: SimTime,
    next_seq: u64,
    queue: BinaryHeap<Reverse<Queued<E>>>,
    cancelled: HashSet<u64>,
    processed: u64,
    trace: FnvHasher,
}

impl<E> Default for Scheduler<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> Scheduler<E> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            queue: BinaryHeap::new(),
            cancelled: HashSet::new(),
            processed: 0,
            trace: FnvHasher::default(),
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn processed(&self) -> u64 {
        self.processed
    }

    pub fn pending(&self) -> usize {
        self.queue.len() - self.cancelled.len()
    }

    pub fn schedule(&mut self, payload: E, fire_at: SimTime) -> Result<EventHandle, SimError> {
        if fire_at < self.now {
            return Err(SimError::ScheduledInPast {
                fire_at,
                now: self.now,
            });
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push(Reverse(Queued {
            fire_at,
            seq,
            payload,
        }));
        Ok(EventHandle(seq))
    }

    /// Schedules relative to the current clock. Cannot fail.
    pub fn schedule_in(&mut self, payload: E, delay: SimTime) -> EventHandle {
        let at = self.now + delay;
        self.schedule(payload, at)
            .expect("relative scheduling is never in the past")
    }

    /// Returns true if the handle was still pending.
    pub fn cancel(&mut self, handle: EventHandle) -> bool {
        if handle.0 >= self.next_seq {
            return false;
        }
        let live = self.queue.iter().any(|q| q.0.seq == handle.0);
        live && self.cancelled.insert(handle.0)
    }

    fn pop_until(&mut self, until: SimTime) -> Option<(SimTime, u64, E)> {
        loop {
            let head = self.queue.peek()?;
            if head.0.fire_at > until {
                return None;
            }
            let Reverse(q) = self.queue.pop().expect("peeked");
            if self.cancelled.remove(&q.seq) {
                continue;
            }
            self.now = q.fire_at;
            self.processed += 1;
            return Some((q.fire_at, q.seq, q.payload));
        }
    }

    /// Digest of every event processed so far.
    pub fn trace_hash(&self) -> u64 {
        self.trace.finish()
    }
}

impl<E: Hash> Scheduler<E> {
    /// Processes every event with `fire_at <= until` in `(fire_at, seq)` order,
    /// then sets the clock to `until`. Returns the number of events processed.
    pub fn run<F>(&mut self, until: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Scheduler<E>, SimTime, E),
    {
        let before = self.processed;
        while let Some((at, seq, payload)) = self.pop_until(until) {
            at.hash(&mut self.trace);
            seq.hash(&mut self.trace);
            payload.hash(&mut self.trace);
            handler(self, at, payload);
        }
        if until > self.now {
            self.now = until;
        }
        self.processed - before
    }

    /// Pops the next event with `fire_at <= until`, if any, and advances the clock
    /// to it. The clock is left untouched when nothing is due.
    pub fn step(&mut self, until: SimTime) -> Option<(SimTime, E)> {
        let (at, seq, payload) = self.pop_until(until)?;
        at.hash(&mut self.trace);
        seq.hash(&mut self.trace);
        payload.hash(&mut self.trace);
        Some((at, payload))
    }

    /// Sets the clock to `t` if it is later than now.
    pub fn advance_to(&mut self, t: SimTime) {
        if t > self.now {
            self.now = t;
        }
    }
}

/// Seeded stream of uniform draws.
///
/// Backed by ChaCha8 keyed with `seed` (expanded by `SeedableRng::seed_from_u64`)
/// and with the 64-bit ChaCha stream selector set to `stream_id`. Each draw takes
/// the top 53 bits of the next `u64` output and scales by 2^-53, so the value
/// for a given `(seed, stream_id, draw index)` is identical on every platform.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RandomStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform value in `[0, 1)`.
    pub fn next_random(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`; `n` must be non-zero.
    pub fn below(&mut self, n: u32) -> u32 {
        debug_assert!(n > 0);
        ((self.next_random() * n as f64) as u32).min(n - 1)
    }
}
