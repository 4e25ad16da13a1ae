//! Contention-based MAC: beacon-interval timing, TXOP-bounded A-MPDU
//! exchanges, per-frame retry limits and ARF rate control.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{frame_airtime, McsIndex, McsTable};
use crate::routing::ControlMessage;
use crate::sim::{RandomStream, SimTime};
use crate::StaId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MacError {
    #[error("queue to {0} is full")]
    QueueFull(StaId),
    #[error("{0} is not a neighbor")]
    UnknownNeighbor(StaId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MacConfig {
    pub beacon_interval_ms: f64,
    pub bhi_ms: f64,
    pub txop_us: f64,
    pub max_ampdu: u32,
    pub short_retry_limit: u32,
    pub long_retry_limit: u32,
    pub cw_min: u32,
    pub cw_max: u32,
    pub slot_us: f64,
    pub sifs_us: f64,
    pub ack_timeout_us: f64,
    pub queue_capacity: usize,
    pub arf_up_after: u32,
    pub arf_down_after: u32,
}

impl Default for MacConfig {
    fn default() -> Self {
        MacConfig {
            beacon_interval_ms: 100.0,
            bhi_ms: 5.0,
            txop_us: 300.0,
            max_ampdu: 64,
            short_retry_limit: 7,
            long_retry_limit: 4,
            cw_min: 16,
            cw_max: 1024,
            slot_us: 5.0,
            sifs_us: 3.0,
            ack_timeout_us: 10.0,
            queue_capacity: 4096,
            arf_up_after: 10,
            arf_down_after: 2,
        }
    }
}

fn us(v: f64) -> SimTime {
    SimTime::from_secs_f64(v * 1e-6).unwrap_or(SimTime::ZERO)
}

impl MacConfig {
    pub fn validate(&self) -> Result<(), String> {
        let times = [
            ("beacon_interval_ms", self.beacon_interval_ms),
            ("bhi_ms", self.bhi_ms),
            ("txop_us", self.txop_us),
            ("slot_us", self.slot_us),
            ("sifs_us", self.sifs_us),
            ("ack_timeout_us", self.ack_timeout_us),
        ];
        for (name, v) in times {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("mac.{name} must be >= 0"));
            }
        }
        if self.beacon_interval_ms <= 0.0 || self.txop_us <= 0.0 || self.slot_us <= 0.0 {
            return Err("mac.beacon_interval_ms, txop_us and slot_us must be > 0".into());
        }
        if self.bhi_ms >= self.beacon_interval_ms {
            return Err("mac.bhi_ms must be shorter than the beacon interval".into());
        }
        if self.txop() > self.dti() {
            return Err("mac.txop_us must fit in the DTI".into());
        }
        if self.txop() <= self.exchange_overhead() {
            return Err("mac.txop_us must exceed sifs_us + ack_timeout_us".into());
        }
        if self.max_ampdu == 0 {
            return Err("mac.max_ampdu must be >= 1".into());
        }
        if self.short_retry_limit == 0 || self.long_retry_limit == 0 {
            return Err("mac retry limits must be >= 1".into());
        }
        if self.cw_min == 0 || self.cw_min > self.cw_max {
            return Err("mac contention window needs 1 <= cw_min <= cw_max".into());
        }
        if self.queue_capacity == 0 {
            return Err("mac.queue_capacity must be >= 1".into());
        }
        if self.arf_up_after == 0 || self.arf_down_after == 0 {
            return Err("mac ARF thresholds must be >= 1".into());
        }
        Ok(())
    }

    pub fn beacon_interval(&self) -> SimTime {
        us(self.beacon_interval_ms * 1e3)
    }
    pub fn bhi(&self) -> SimTime {
        us(self.bhi_ms * 1e3)
    }
    pub fn dti(&self) -> SimTime {
        self.beacon_interval() - self.bhi()
    }
    pub fn txop(&self) -> SimTime {
        us(self.txop_us)
    }
    pub fn slot(&self) -> SimTime {
        us(self.slot_us)
    }
    pub fn sifs(&self) -> SimTime {
        us(self.sifs_us)
    }
    pub fn difs(&self) -> SimTime {
        self.sifs() + self.slot() + self.slot()
    }
    pub fn ack_timeout(&self) -> SimTime {
        us(self.ack_timeout_us)
    }
    /// Time after the data PPDU until the exchange completes.
    pub fn exchange_overhead(&self) -> SimTime {
        self.sifs() + self.ack_timeout()
    }

    pub fn retry_limit(&self, class: FrameClass) -> u32 {
        match class {
            FrameClass::Short => self.short_retry_limit,
            FrameClass::Long => self.long_retry_limit,
        }
    }

    pub fn in_bhi(&self, t: SimTime) -> bool {
        t.as_nanos() % self.beacon_interval().as_nanos() < self.bhi().as_nanos()
    }

    /// `t` itself if it lies in a DTI, else the end of the current BHI.
    pub fn next_dti_start(&self, t: SimTime) -> SimTime {
        let bi = self.beacon_interval().as_nanos();
        let off = t.as_nanos() % bi;
        if off < self.bhi().as_nanos() {
            SimTime::from_nanos(t.as_nanos() - off) + self.bhi()
        } else {
            t
        }
    }

    /// Start of the first BHI strictly after `t`.
    pub fn next_bhi_start(&self, t: SimTime) -> SimTime {
        let bi = self.beacon_interval().as_nanos();
        SimTime::from_nanos((t.as_nanos() / bi + 1) * bi)
    }
}

/// Per-neighbor link state at the transmitter.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinkState {
    pub neighbor: StaId,
    /// Rate-control MCS used for transmissions to `neighbor`.
    pub mcs: McsIndex,
    /// MCS supported by the last reception from `neighbor`.
    pub rx_mcs: McsIndex,
    pub consecutive_successes: u32,
    pub consecutive_failures: u32,
    pub retries_current_frame: u32,
    pub alive: bool,
    pub last_hello_rx: Option<SimTime>,
}

impl LinkState {
    pub fn new(neighbor: StaId, mcs: McsIndex) -> Self {
        LinkState {
            neighbor,
            mcs,
            rx_mcs: mcs,
            consecutive_successes: 0,
            consecutive_failures: 0,
            retries_current_frame: 0,
            alive: true,
            last_hello_rx: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FrameClass {
    Short,
    Long,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum FrameKind {
    Data,
    Rreq,
    Rrep,
    Rerr,
    Hello,
    Ack,
}

impl FrameKind {
    pub fn class(self) -> FrameClass {
        match self {
            FrameKind::Data => FrameClass::Long,
            _ => FrameClass::Short,
        }
    }
}

/// An application packet of a flow.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DataPacket {
    pub flow: u32,
    pub seq: u64,
    pub src: StaId,
    pub dst: StaId,
    pub bytes: u32,
    pub born_at: SimTime,
    /// Link-level transmissions so far.
    pub hops: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Data(DataPacket),
    Control(ControlMessage),
}

/// A link-level frame queued from `src` to `dst`.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub src: StaId,
    pub dst: StaId,
    pub payload: Payload,
}

impl Frame {
    pub fn kind(&self) -> FrameKind {
        match &self.payload {
            Payload::Data(_) => FrameKind::Data,
            Payload::Control(ControlMessage::Rreq(_)) => FrameKind::Rreq,
            Payload::Control(ControlMessage::Rrep(_)) => FrameKind::Rrep,
            Payload::Control(ControlMessage::Rerr(_)) => FrameKind::Rerr,
            Payload::Control(ControlMessage::Hello(_)) => FrameKind::Hello,
        }
    }

    pub fn class(&self) -> FrameClass {
        self.kind().class()
    }

    pub fn payload_bytes(&self) -> u32 {
        match &self.payload {
            Payload::Data(p) => p.bytes,
            Payload::Control(m) => m.wire_size(),
        }
    }

    pub fn flow_id(&self) -> Option<u32> {
        match &self.payload {
            Payload::Data(p) => Some(p.flow),
            Payload::Control(_) => None,
        }
    }

    pub fn born_at(&self) -> Option<SimTime> {
        match &self.payload {
            Payload::Data(p) => Some(p.born_at),
            Payload::Control(_) => None,
        }
    }
}

/// One bounded FIFO per neighbor. Control and data share the FIFO.
#[derive(Debug, Clone)]
pub struct MacQueues {
    capacity: usize,
    queues: BTreeMap<StaId, VecDeque<Frame>>,
    drops: u64,
}

impl MacQueues {
    pub fn new(neighbors: impl IntoIterator<Item = StaId>, capacity: usize) -> Self {
        MacQueues {
            capacity,
            queues: neighbors.into_iter().map(|n| (n, VecDeque::new())).collect(),
            drops: 0,
        }
    }

    /// Appends `frame` to the FIFO toward `frame.dst`; returns the new depth.
    /// A full queue drops the new frame.
    pub fn enqueue(&mut self, frame: Frame) -> Result<usize, MacError> {
        let nb = frame.dst;
        let q = self
            .queues
            .get_mut(&nb)
            .ok_or(MacError::UnknownNeighbor(nb))?;
        if q.len() >= self.capacity {
            self.drops += 1;
            return Err(MacError::QueueFull(nb));
        }
        q.push_back(frame);
        Ok(q.len())
    }

    pub fn depth(&self, nb: StaId) -> usize {
        self.queues.get(&nb).map_or(0, VecDeque::len)
    }

    pub fn total(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.total() == 0
    }

    pub fn drops(&self) -> u64 {
        self.drops
    }

    pub fn queue(&self, nb: StaId) -> Option<&VecDeque<Frame>> {
        self.queues.get(&nb)
    }

    pub fn pop_front(&mut self, nb: StaId, n: usize) -> Vec<Frame> {
        match self.queues.get_mut(&nb) {
            Some(q) => q.drain(..n.min(q.len())).collect(),
            None => Vec::new(),
        }
    }

    /// Puts frames back at the head of the FIFO toward `nb`, keeping their
    /// order. Capacity is not enforced since the frames were already queued.
    pub fn requeue_front(&mut self, nb: StaId, frames: Vec<Frame>) {
        if let Some(q) = self.queues.get_mut(&nb) {
            for f in frames.into_iter().rev() {
                q.push_front(f);
            }
        }
    }

    pub fn drain(&mut self, nb: StaId) -> Vec<Frame> {
        self.queues
            .get_mut(&nb)
            .map(|q| q.drain(..).collect())
            .unwrap_or_default()
    }

    /// First non-empty queue in round-robin order after `last`.
    pub fn next_backlogged(&self, last: Option<StaId>) -> Option<StaId> {
        let after = last.map_or(
            self.queues.range(..).find(|(_, q)| !q.is_empty()),
            |l| {
                self.queues
                    .range((std::ops::Bound::Excluded(l), std::ops::Bound::Unbounded))
                    .find(|(_, q)| !q.is_empty())
            },
        );
        after
            .or_else(|| self.queues.iter().find(|(_, q)| !q.is_empty()))
            .map(|(&n, _)| n)
    }
}

/// Airtime of one PPDU carrying `frames` at `mcs`.
pub fn batch_airtime(
    frames: &[&Frame],
    mcs: McsIndex,
    table: &McsTable,
    phy_overhead: SimTime,
) -> Option<SimTime> {
    let bytes: u64 = frames.iter().map(|f| f.payload_bytes() as u64).sum();
    frame_airtime(bytes, mcs, table, phy_overhead).ok()
}

/// Number of frames from the head of `queue` forming the next A-MPDU: the
/// longest prefix of at most `max_ampdu` frames whose airtime fits `budget`.
/// 0 when the head alone does not fit or `mcs` has no rate.
pub fn build_ampdu<'a>(
    queue: impl IntoIterator<Item = &'a Frame>,
    mcs: McsIndex,
    budget: SimTime,
    table: &McsTable,
    phy_overhead: SimTime,
    max_ampdu: u32,
) -> usize {
    let Ok(rate) = crate::channel::phy_rate(mcs, table) else {
        return 0;
    };
    let mut bits = 0u64;
    let mut n = 0usize;
    for f in queue.into_iter().take(max_ampdu as usize) {
        let next = bits + f.payload_bytes() as u64 * 8;
        let air = phy_overhead + SimTime::from_nanos((next as f64 * 1e9 / rate).ceil() as u64);
        if air > budget {
            break;
        }
        bits = next;
        n += 1;
    }
    n
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TxResult {
    Ok,
    Retry,
    LinkBreak,
}

/// Classic ARF step. Returns the new MCS.
pub fn arf_update(link: &mut LinkState, success: bool, table: &McsTable, cfg: &MacConfig) -> McsIndex {
    if success {
        link.consecutive_failures = 0;
        link.consecutive_successes += 1;
        if link.consecutive_successes >= cfg.arf_up_after {
            link.consecutive_successes = 0;
            link.mcs = table.step_up(link.mcs);
        }
    } else {
        link.consecutive_successes = 0;
        link.consecutive_failures += 1;
        if link.consecutive_failures >= cfg.arf_down_after {
            link.consecutive_failures = 0;
            link.mcs = table.step_down(link.mcs);
        }
    }
    link.mcs
}

/// Accounts one completed transmission of the head frame of class `class`.
/// On the retry limit the link is declared broken and rate control restarts
/// from the lowest MCS.
pub fn on_tx_result(
    link: &mut LinkState,
    success: bool,
    class: FrameClass,
    table: &McsTable,
    cfg: &MacConfig,
) -> TxResult {
    arf_update(link, success, table, cfg);
    if success {
        link.retries_current_frame = 0;
        link.alive = true;
        return TxResult::Ok;
    }
    link.retries_current_frame += 1;
    if link.retries_current_frame >= cfg.retry_limit(class) {
        link.retries_current_frame = 0;
        link.consecutive_failures = 0;
        link.consecutive_successes = 0;
        link.alive = false;
        link.mcs = table.min_index();
        TxResult::LinkBreak
    } else {
        TxResult::Retry
    }
}

/// Deterministic error model.
pub fn transmission_outcome(sender_mcs: McsIndex, supported_mcs: McsIndex, collided: bool) -> bool {
    supported_mcs > 0 && sender_mcs <= supported_mcs && !collided
}

pub fn next_cw(cw: u32, cfg: &MacConfig) -> u32 {
    cw.saturating_mul(2).min(cfg.cw_max)
}

/// Uniform draw from `[0, cw)` slots.
pub fn draw_backoff(rng: &mut RandomStream, cw: u32) -> u32 {
    rng.below(cw.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Access {
    /// Start now; the exchange must fit in `budget`.
    Granted { budget: SimTime },
    /// Retry at `at`.
    Defer { at: SimTime },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct ActiveTx {
    id: u64,
    from: usize,
    to: usize,
    end: SimTime,
    collided: bool,
}

/// Shared medium among `n` STAs with a carrier-sense relation.
#[derive(Debug, Clone)]
pub struct Medium {
    sense: Vec<Vec<bool>>,
    nav: Vec<SimTime>,
    active: Vec<ActiveTx>,
    next_id: u64,
}

impl Medium {
    pub fn new(sense: Vec<Vec<bool>>) -> Self {
        let n = sense.len();
        Medium {
            sense,
            nav: vec![SimTime::ZERO; n],
            active: Vec::new(),
            next_id: 0,
        }
    }

    pub fn set_sense(&mut self, sense: Vec<Vec<bool>>) {
        assert_eq!(sense.len(), self.nav.len());
        self.sense = sense;
    }

    pub fn senses(&self, a: usize, b: usize) -> bool {
        self.sense[a][b]
    }

    pub fn busy_until(&self, sta: usize) -> SimTime {
        self.nav[sta]
    }

    pub fn is_idle(&self, sta: usize, t: SimTime) -> bool {
        self.nav[sta] <= t
    }

    /// Channel access decision for `sta` at `t`. `backoff_slots` is used only
    /// when access is deferred.
    pub fn try_start_txop(
        &self,
        sta: usize,
        t: SimTime,
        backoff_slots: u32,
        cfg: &MacConfig,
    ) -> Access {
        let backoff = SimTime::from_nanos(cfg.slot().as_nanos() * backoff_slots as u64);
        if cfg.in_bhi(t) {
            return Access::Defer {
                at: cfg.next_dti_start(t) + backoff,
            };
        }
        if !self.is_idle(sta, t) {
            return Access::Defer {
                at: self.nav[sta] + cfg.difs() + backoff,
            };
        }
        let until_bhi = cfg.next_bhi_start(t) - t;
        Access::Granted {
            budget: cfg.txop().min(until_bhi),
        }
    }

    /// Registers a transmission `from -> to` over `[start, end)`. Returns its id.
    pub fn begin(&mut self, from: usize, to: usize, start: SimTime, end: SimTime) -> u64 {
        self.active.retain(|a| a.end > start);
        let mut collided = false;
        for a in self.active.iter_mut() {
            let shared = a.from == from || a.from == to || a.to == from || a.to == to;
            if shared || self.sense[to][a.from] || self.sense[a.to][from] {
                a.collided = true;
                collided = true;
            }
        }
        for (s, nav) in self.nav.iter_mut().enumerate() {
            if s == from || s == to || self.sense[s][from] || self.sense[s][to] {
                *nav = (*nav).max(end);
            }
        }
        let id = self.next_id;
        self.next_id += 1;
        self.active.push(ActiveTx {
            id,
            from,
            to,
            end,
            collided,
        });
        id
    }

    /// Ends transmission `id`; returns whether it collided.
    pub fn finish(&mut self, id: u64) -> bool {
        match self.active.iter().position(|a| a.id == id) {
            Some(i) => self.active.swap_remove(i).collided,
            None => false,
        }
    }
}
