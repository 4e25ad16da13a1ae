//! Whole-network simulation: stations with MAC queues and routers on a shared
//! medium, driven by one event scheduler.

use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;
use thiserror::Error;

use crate::channel::{
    mcs_from_snr, rx_power_dbm, snr_db, ChannelError, McsIndex, McsTable,
};
use crate::mac::{
    batch_airtime, build_ampdu, draw_backoff, next_cw, on_tx_result, transmission_outcome,
    Access, DataPacket, Frame, FrameKind, LinkState, MacQueues, Medium, Payload, TxResult,
};
use crate::routing::{
    link_cost, BreakCause, ControlMessage, Cost, Outbox, RouteEvent, RouteEventKind, Router,
};
use crate::scenario::{Mode, Scenario};
use crate::sim::{RandomStream, Scheduler, SimTime};
use crate::traffic::{DeliveryRecord, Flow, FlowMetrics};
use crate::StaId;

/// Stream id of the hello phase jitter; MAC backoff of STA `i` uses
/// `BACKOFF_STREAM_BASE + i`.
pub const HELLO_STREAM: u64 = 1;
pub const BACKOFF_STREAM_BASE: u64 = 1000;

/// Data packets are dropped after this many link transmissions.
pub const MAX_HOPS: u32 = 32;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("scenario: {0}")]
    Scenario(#[from] crate::scenario::ScenarioError),
    #[error("channel: {0}")]
    Channel(#[from] ChannelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Ev {
    FlowEmit { flow: usize, seq: u64 },
    Access { sta: usize },
    ExchangeEnd { sta: usize, tx: u64 },
    HelloTick { sta: usize },
    RouteRefresh,
    ChannelUpdate,
    PendingCheck { sta: usize },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct NetStats {
    pub batches: u64,
    pub failed_batches: u64,
    pub collisions: u64,
    pub data_frames_tx: u64,
    pub control_frames_tx: u64,
    pub rreq_tx: u64,
    pub rrep_tx: u64,
    pub rerr_tx: u64,
    pub hello_tx: u64,
    pub queue_drops: u64,
    pub retry_drops: u64,
    pub no_route_drops: u64,
    pub hop_limit_drops: u64,
}

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub scenario: String,
    pub mode: Mode,
    pub seed: u64,
    pub duration: SimTime,
    pub flows: Vec<Flow>,
    pub metrics: FlowMetrics,
    pub route_events: Vec<RouteEvent>,
    pub stats: NetStats,
    pub trace_hash: u64,
    pub events_processed: u64,
    pub transmissions: Vec<TxRecord>,
}

/// One A-MPDU exchange on the medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TxRecord {
    pub start: SimTime,
    pub end: SimTime,
    pub from: StaId,
    pub to: StaId,
    pub frames: usize,
    pub mcs: McsIndex,
    pub success: bool,
}

#[derive(Debug, Clone)]
struct Exchange {
    nb: StaId,
    frames: Vec<Frame>,
    mcs: McsIndex,
    supported: McsIndex,
    tx: u64,
    start: SimTime,
}

#[derive(Debug, Clone)]
struct Station {
    id: StaId,
    links: BTreeMap<StaId, LinkState>,
    queues: MacQueues,
    router: Option<Router>,
    cw: u32,
    rng: RandomStream,
    access_at: Option<SimTime>,
    current: Option<Exchange>,
    last_served: Option<StaId>,
    pending: VecDeque<(DataPacket, SimTime)>,
    pending_check: bool,
}

pub struct Network {
    sc: Scenario,
    table: McsTable,
    ids: Vec<StaId>,
    index: BTreeMap<StaId, usize>,
    stas: Vec<Station>,
    supported: Vec<Vec<McsIndex>>,
    medium: Medium,
    edge_costs: BTreeMap<(StaId, StaId), f64>,
    sched: Scheduler<Ev>,
    metrics: FlowMetrics,
    events: Vec<RouteEvent>,
    stats: NetStats,
    transmissions: Vec<TxRecord>,
}

fn pair(a: StaId, b: StaId) -> (StaId, StaId) {
    (a.min(b), a.max(b))
}

impl Network {
    pub fn new(sc: &Scenario) -> Result<Network, NetError> {
        sc.validate()?;
        let table = McsTable::default();
        let mut ids: Vec<StaId> = sc.nodes.iter().map(|n| n.id).collect();
        ids.sort();
        let index: BTreeMap<StaId, usize> = ids.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let edge_costs: BTreeMap<(StaId, StaId), f64> =
            sc.edges.iter().map(|e| (pair(e.a, e.b), e.cost)).collect();

        let mut net = Network {
            sc: sc.clone(),
            table,
            ids: ids.clone(),
            index,
            stas: Vec::new(),
            supported: Vec::new(),
            medium: Medium::new(vec![vec![false; ids.len()]; ids.len()]),
            edge_costs,
            sched: Scheduler::new(),
            metrics: FlowMetrics::new(sc.flows.iter().map(|f| f.id)),
            events: Vec::new(),
            stats: NetStats::default(),
            transmissions: Vec::new(),
        };
        net.update_channel(SimTime::ZERO)?;

        for (i, &me) in ids.iter().enumerate() {
            let neighbors: Vec<StaId> = if net.edge_costs.is_empty() {
                ids.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i && net.supported[i][j] >= 1)
                    .map(|(_, &s)| s)
                    .collect()
            } else {
                ids.iter()
                    .filter(|&&s| s != me && net.edge_costs.contains_key(&pair(me, s)))
                    .copied()
                    .collect()
            };
            let links = neighbors
                .iter()
                .map(|&nb| {
                    let j = net.index[&nb];
                    let mcs = net.supported[i][j].max(net.table.min_index());
                    (nb, LinkState::new(nb, mcs))
                })
                .collect();
            let router = (sc.mode == Mode::MultiHop)
                .then(|| Router::new(me, neighbors.iter().copied(), sc.routing.clone()));
            net.stas.push(Station {
                id: me,
                links,
                queues: MacQueues::new(neighbors.iter().copied(), sc.mac.queue_capacity),
                router,
                cw: sc.mac.cw_min,
                rng: RandomStream::new(sc.seed, BACKOFF_STREAM_BASE + i as u64),
                access_at: None,
                current: None,
                last_served: None,
                pending: VecDeque::new(),
                pending_check: false,
            });
        }
        net.schedule_initial();
        Ok(net)
    }

    fn schedule_initial(&mut self) {
        let end = self.sc.duration;
        let starts: Vec<(usize, SimTime)> = self
            .sc
            .flows
            .iter()
            .enumerate()
            .filter(|(_, f)| f.packet_count() > 0)
            .map(|(k, f)| (k, f.start))
            .collect();
        for (k, t) in starts {
            self.at(Ev::FlowEmit { flow: k, seq: 0 }, t);
        }
        let mut bounds: Vec<SimTime> = self
            .sc
            .blockers
            .iter()
            .flat_map(|b| b.active.iter().flat_map(|&(s, e)| [s, e]))
            .filter(|&t| t > SimTime::ZERO && t <= end)
            .collect();
        bounds.sort();
        bounds.dedup();
        for t in bounds {
            self.at(Ev::ChannelUpdate, t);
        }
        if self.sc.mode != Mode::MultiHop {
            return;
        }
        let now = SimTime::ZERO;
        let flows = self.sc.flows.clone();
        for f in &flows {
            let i = self.index[&f.src];
            let mut out = Outbox::new();
            let r = self.stas[i].router.as_mut().expect("multi-hop");
            r.add_source(f.dst);
            if !r.is_discovering(f.dst) {
                r.originate_discovery(now, f.dst, &mut out);
            }
            self.apply(i, out);
        }
        let interval = self.sc.routing.hello_interval();
        let mut jitter = RandomStream::new(self.sc.seed, HELLO_STREAM);
        for i in 0..self.stas.len() {
            let phase = SimTime::from_nanos((jitter.next_random() * interval.as_nanos() as f64) as u64);
            self.at(Ev::HelloTick { sta: i }, interval + phase);
        }
        self.at(Ev::RouteRefresh, self.sc.routing.refresh_interval());
    }

    fn at(&mut self, ev: Ev, t: SimTime) {
        if t <= self.sc.duration {
            self.sched
                .schedule(ev, t)
                .expect("events are never scheduled in the past");
        }
    }

    fn update_channel(&mut self, t: SimTime) -> Result<(), ChannelError> {
        let n = self.ids.len();
        let pos: Vec<_> = self
            .ids
            .iter()
            .map(|id| self.sc.node(*id).expect("known node").position)
            .collect();
        let mut sup = vec![vec![0; n]; n];
        let mut sense = vec![vec![false; n]; n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let snr = snr_db(&pos[i], &pos[j], &self.sc.blockers, t, &self.sc.channel)?;
                sup[i][j] = mcs_from_snr(snr, &self.table);
                let rx = rx_power_dbm(&pos[i], &pos[j], &self.sc.blockers, t, &self.sc.channel)?;
                sense[j][i] = rx >= self.sc.channel.energy_detect_dbm;
            }
        }
        self.supported = sup;
        self.medium.set_sense(sense);
        Ok(())
    }

    /// Runs to the scenario duration.
    pub fn run(mut self) -> RunResult {
        let end = self.sc.duration;
        while let Some((now, ev)) = self.sched.step(end) {
            self.handle(now, ev);
        }
        self.sched.advance_to(end);
        RunResult {
            scenario: self.sc.name.clone(),
            mode: self.sc.mode,
            seed: self.sc.seed,
            duration: end,
            flows: self.sc.flows.clone(),
            metrics: self.metrics,
            route_events: self.events,
            stats: self.stats,
            trace_hash: self.sched.trace_hash(),
            events_processed: self.sched.processed(),
            transmissions: self.transmissions,
        }
    }

    fn handle(&mut self, now: SimTime, ev: Ev) {
        match ev {
            Ev::FlowEmit { flow, seq } => self.on_emit(now, flow, seq),
            Ev::Access { sta } => {
                self.stas[sta].access_at = None;
                self.on_access(now, sta);
            }
            Ev::ExchangeEnd { sta, tx } => self.on_exchange_end(now, sta, tx),
            Ev::HelloTick { sta } => {
                let mut out = Outbox::new();
                if let Some(r) = self.stas[sta].router.as_mut() {
                    r.hello_tick(now, &mut out);
                }
                self.apply(sta, out);
                self.at(Ev::HelloTick { sta }, now + self.sc.routing.hello_interval());
            }
            Ev::RouteRefresh => {
                for i in 0..self.stas.len() {
                    let mut out = Outbox::new();
                    if let Some(r) = self.stas[i].router.as_mut() {
                        r.refresh_routes(now, &mut out);
                    }
                    self.apply(i, out);
                }
                self.at(Ev::RouteRefresh, now + self.sc.routing.refresh_interval());
            }
            Ev::ChannelUpdate => {
                self.update_channel(now)
                    .expect("positions were validated at construction");
            }
            Ev::PendingCheck { sta } => {
                self.stas[sta].pending_check = false;
                self.flush_pending(now, sta);
            }
        }
    }

    fn on_emit(&mut self, now: SimTime, k: usize, seq: u64) {
        let f = &self.sc.flows[k];
        let pkt = DataPacket {
            flow: f.id,
            seq,
            src: f.src,
            dst: f.dst,
            bytes: f.packet_bytes,
            born_at: now,
            hops: 0,
        };
        let next = seq + 1;
        let next_t = (next < f.packet_count()).then(|| f.emit_time(next));
        let i = self.index[&f.src];
        self.metrics.record_emit(pkt.flow);
        if let Some(t) = next_t {
            self.at(Ev::FlowEmit { flow: k, seq: next }, t);
        }
        self.route_data(now, i, pkt);
    }

    /// Hands a data packet to station `i`: deliver, forward, or buffer.
    fn route_data(&mut self, now: SimTime, i: usize, pkt: DataPacket) {
        let me = self.stas[i].id;
        if pkt.dst == me {
            let rec = DeliveryRecord {
                flow: pkt.flow,
                seq: pkt.seq,
                born_at: pkt.born_at,
                delivered_at: now,
                bytes: pkt.bytes,
            };
            // duplicates cannot occur: a batch is delivered once
            let _ = self.metrics.record_delivery(rec);
            return;
        }
        if pkt.hops >= MAX_HOPS {
            self.stats.hop_limit_drops += 1;
            self.metrics.record_drop(pkt.flow);
            return;
        }
        let hop = match self.stas[i].router.as_ref() {
            None => self.stas[i].links.contains_key(&pkt.dst).then_some(pkt.dst),
            Some(r) => r.next_hop_for(pkt.dst),
        };
        match hop {
            Some(nb) => {
                if let Some(r) = self.stas[i].router.as_mut() {
                    r.note_forwarded(pkt.dst, now);
                }
                self.enqueue(now, i, nb, Payload::Data(pkt));
            }
            None if self.stas[i].router.is_none() => {
                self.stats.no_route_drops += 1;
                self.metrics.record_drop(pkt.flow);
            }
            None => {
                let dst = pkt.dst;
                let deadline = now + self.sc.routing.pending_buffer();
                self.stas[i].pending.push_back((pkt, deadline));
                let mut out = Outbox::new();
                self.stas[i]
                    .router
                    .as_mut()
                    .expect("checked")
                    .route_miss(now, dst, &mut out);
                self.apply(i, out);
                if !self.stas[i].pending_check {
                    self.stas[i].pending_check = true;
                    self.at(Ev::PendingCheck { sta: i }, deadline);
                }
            }
        }
    }

    fn flush_pending(&mut self, now: SimTime, i: usize) {
        let waiting = std::mem::take(&mut self.stas[i].pending);
        let mut keep = VecDeque::new();
        for (pkt, deadline) in waiting {
            let routable = self.stas[i]
                .router
                .as_ref()
                .and_then(|r| r.next_hop_for(pkt.dst))
                .is_some();
            if routable {
                self.route_data(now, i, pkt);
            } else if now >= deadline {
                self.stats.no_route_drops += 1;
                self.metrics.record_drop(pkt.flow);
            } else {
                keep.push_back((pkt, deadline));
            }
        }
        let next = keep.front().map(|p| p.1);
        self.stas[i].pending.extend(keep);
        if let Some(t) = next {
            if !self.stas[i].pending_check {
                self.stas[i].pending_check = true;
                self.at(Ev::PendingCheck { sta: i }, t);
            }
        }
    }

    fn enqueue(&mut self, now: SimTime, i: usize, nb: StaId, payload: Payload) {
        let st = &mut self.stas[i];
        let frame = Frame {
            src: st.id,
            dst: nb,
            payload,
        };
        let flow = frame.flow_id();
        match st.queues.enqueue(frame) {
            Ok(_) => self.wake(now, i),
            Err(_) => {
                self.stats.queue_drops += 1;
                if let Some(f) = flow {
                    self.metrics.record_drop(f);
                }
            }
        }
    }

    fn wake(&mut self, now: SimTime, i: usize) {
        let st = &self.stas[i];
        if st.current.is_some() || st.access_at.is_some() {
            return;
        }
        self.stas[i].access_at = Some(now);
        self.at(Ev::Access { sta: i }, now);
    }

    fn schedule_access(&mut self, i: usize, t: SimTime) {
        if self.stas[i].access_at.is_none() {
            self.stas[i].access_at = Some(t);
            self.at(Ev::Access { sta: i }, t);
        }
    }

    fn backoff(&mut self, i: usize) -> u32 {
        let cw = self.stas[i].cw;
        draw_backoff(&mut self.stas[i].rng, cw)
    }

    fn on_access(&mut self, now: SimTime, i: usize) {
        if self.stas[i].current.is_some() {
            return;
        }
        let Some(nb) = self.stas[i].queues.next_backlogged(self.stas[i].last_served) else {
            return;
        };
        let slots = self.backoff(i);
        let cfg = &self.sc.mac;
        let budget = match self.medium.try_start_txop(i, now, slots, cfg) {
            Access::Defer { at } => {
                self.schedule_access(i, at);
                return;
            }
            Access::Granted { budget } => budget,
        };
        let overhead = cfg.exchange_overhead();
        let j = self.index[&nb];
        let mcs = self.stas[i].links[&nb].mcs;
        let phy = self.sc.channel.phy_overhead();
        let n = if budget > overhead {
            let q = self.stas[i].queues.queue(nb).expect("backlogged");
            build_ampdu(q, mcs, budget - overhead, &self.table, phy, cfg.max_ampdu)
        } else {
            0
        };
        if n == 0 {
            if budget < cfg.txop() {
                // too close to the next BHI
                let at = cfg.next_dti_start(cfg.next_bhi_start(now))
                    + SimTime::from_nanos(cfg.slot().as_nanos() * slots as u64);
                self.schedule_access(i, at);
            } else {
                // head frame can never fit a TXOP at this MCS
                let dropped = self.stas[i].queues.pop_front(nb, 1);
                self.count_drop(&dropped);
                self.schedule_access(i, now);
            }
            return;
        }
        let frames = self.stas[i].queues.pop_front(nb, n);
        let refs: Vec<&Frame> = frames.iter().collect();
        let air = batch_airtime(&refs, mcs, &self.table, phy).expect("mcs has a rate");
        let end = now + air + overhead;
        let tx = self.medium.begin(i, j, now, end);
        self.stats.batches += 1;
        for f in &frames {
            match f.kind() {
                FrameKind::Data => self.stats.data_frames_tx += 1,
                k => {
                    self.stats.control_frames_tx += 1;
                    match k {
                        FrameKind::Rreq => self.stats.rreq_tx += 1,
                        FrameKind::Rrep => self.stats.rrep_tx += 1,
                        FrameKind::Rerr => self.stats.rerr_tx += 1,
                        FrameKind::Hello => self.stats.hello_tx += 1,
                        _ => {}
                    }
                }
            }
        }
        self.note_backup_tx(now, i, nb, &frames);
        self.stas[i].last_served = Some(nb);
        self.stas[i].current = Some(Exchange {
            nb,
            frames,
            mcs,
            supported: self.supported[i][j],
            tx,
            start: now,
        });
        self.at(Ev::ExchangeEnd { sta: i, tx }, end);
    }

    fn note_backup_tx(&mut self, now: SimTime, i: usize, nb: StaId, frames: &[Frame]) {
        let me = self.stas[i].id;
        let Some(r) = self.stas[i].router.as_mut() else {
            return;
        };
        let mut hits = Vec::new();
        for f in frames {
            if let Payload::Data(p) = &f.payload {
                if r.take_repaired(p.dst, nb) {
                    hits.push(p.dst);
                }
            }
        }
        for dst in hits {
            self.events.push(RouteEvent {
                t: now,
                sta: me,
                kind: RouteEventKind::BackupTx {
                    destination: dst,
                    via: nb,
                },
            });
        }
    }

    fn count_drop(&mut self, frames: &[Frame]) {
        for f in frames {
            if let Some(flow) = f.flow_id() {
                self.stats.retry_drops += 1;
                self.metrics.record_drop(flow);
            }
        }
    }

    fn on_exchange_end(&mut self, now: SimTime, i: usize, tx: u64) {
        let collided = self.medium.finish(tx);
        let Some(ex) = self.stas[i].current.take() else {
            return;
        };
        debug_assert_eq!(ex.tx, tx);
        let me = self.stas[i].id;
        let j = self.index[&ex.nb];
        let success = transmission_outcome(ex.mcs, ex.supported, collided);
        if collided {
            self.stats.collisions += 1;
        } else if let Some(l) = self.stas[j].links.get_mut(&me) {
            l.rx_mcs = ex.supported;
        }
        self.transmissions.push(TxRecord {
            start: ex.start,
            end: now,
            from: me,
            to: ex.nb,
            frames: ex.frames.len(),
            mcs: ex.mcs,
            success,
        });
        let class = ex.frames[0].class();
        let link = self.stas[i].links.get_mut(&ex.nb).expect("neighbor link");
        let old_mcs = link.mcs;
        let res = on_tx_result(link, success, class, &self.table, &self.sc.mac);
        let new_mcs = link.mcs;
        let mut frames = ex.frames;
        if success {
            self.stas[i].cw = self.sc.mac.cw_min;
        } else {
            self.stats.failed_batches += 1;
            self.stas[i].cw = next_cw(self.stas[i].cw, &self.sc.mac);
            if res == TxResult::LinkBreak {
                let head: Vec<Frame> = frames.drain(..1).collect();
                self.count_drop(&head);
            }
            self.stas[i].queues.requeue_front(ex.nb, frames);
            frames = Vec::new();
        }

        let mut out = Outbox::new();
        if let Some(r) = self.stas[i].router.as_mut() {
            if res == TxResult::LinkBreak {
                r.notify_link_break(now, ex.nb, BreakCause::RetryLimit, &mut out);
                r.note_mcs(ex.nb, new_mcs);
            } else if new_mcs != old_mcs {
                r.mcs_trigger(now, ex.nb, new_mcs, &mut out);
            }
        } else if res == TxResult::LinkBreak {
            out.events.push(RouteEventKind::LinkBreak {
                neighbor: ex.nb,
                cause: BreakCause::RetryLimit,
            });
        }
        self.apply(i, out);

        for f in frames {
            self.receive(now, j, me, f);
        }

        if !self.stas[i].queues.is_empty() {
            let slots = self.backoff(i);
            let at = now
                + self.sc.mac.difs()
                + SimTime::from_nanos(self.sc.mac.slot().as_nanos() * slots as u64);
            self.schedule_access(i, at);
        }
    }

    fn cost_at(&self, j: usize, from: StaId) -> Cost {
        let me = self.stas[j].id;
        let Some(link) = self.stas[j].links.get(&from) else {
            return Cost::INFINITE;
        };
        match self.edge_costs.get(&pair(me, from)) {
            Some(&c) if link.alive => Cost::new(c).unwrap_or(Cost::INFINITE),
            Some(_) => Cost::INFINITE,
            None => link_cost(link, &self.table),
        }
    }

    fn receive(&mut self, now: SimTime, j: usize, from: StaId, frame: Frame) {
        match frame.payload {
            Payload::Data(mut p) => {
                p.hops += 1;
                self.route_data(now, j, p);
            }
            Payload::Control(msg) => {
                let cost = self.cost_at(j, from);
                let mut out = Outbox::new();
                if let ControlMessage::Hello(_) = &msg {
                    if let Some(l) = self.stas[j].links.get_mut(&from) {
                        l.last_hello_rx = Some(now);
                    }
                }
                let Some(r) = self.stas[j].router.as_mut() else {
                    return;
                };
                match &msg {
                    ControlMessage::Rreq(m) => r.handle_rreq(now, m, from, cost, &mut out),
                    ControlMessage::Rrep(m) => r.handle_rrep(now, m, from, cost, &mut out),
                    ControlMessage::Rerr(m) => r.handle_rerr(now, m, from, &mut out),
                    ControlMessage::Hello(m) => r.handle_hello(now, m, from, cost, &mut out),
                }
                self.apply(j, out);
            }
        }
    }

    /// Carries out a router's requested side effects at station `i`.
    fn apply(&mut self, i: usize, out: Outbox) {
        let now = self.sched.now();
        let me = self.stas[i].id;
        let mut routes_changed = !out.routes_ready.is_empty();
        for kind in out.events {
            match &kind {
                RouteEventKind::LinkBreak { neighbor, .. } => {
                    if let Some(l) = self.stas[i].links.get_mut(neighbor) {
                        l.alive = false;
                    }
                }
                RouteEventKind::RouteChange { .. } | RouteEventKind::Repair { .. } => {
                    routes_changed = true;
                }
                _ => {}
            }
            self.events.push(RouteEvent {
                t: now,
                sta: me,
                kind,
            });
        }
        for nb in out.link_ups {
            if let Some(l) = self.stas[i].links.get_mut(&nb) {
                l.alive = true;
            }
        }
        for (to, msg) in out.sends {
            if self.stas[i].links.contains_key(&to) {
                self.enqueue(now, i, to, Payload::Control(msg));
            }
        }
        for nb in out.reroute_from {
            let frames = self.stas[i].queues.drain(nb);
            let mut control = Vec::new();
            for f in frames {
                match f.payload {
                    Payload::Data(p) => self.route_data(now, i, p),
                    Payload::Control(_) => control.push(f),
                }
            }
            self.stas[i].queues.requeue_front(nb, control);
        }
        if routes_changed && !self.stas[i].pending.is_empty() {
            self.flush_pending(now, i);
        }
    }

    pub fn router(&self, id: StaId) -> Option<&Router> {
        self.index.get(&id).and_then(|&i| self.stas[i].router.as_ref())
    }

    pub fn link(&self, from: StaId, to: StaId) -> Option<&LinkState> {
        self.index.get(&from).and_then(|&i| self.stas[i].links.get(&to))
    }
}

/// Builds and runs `sc` to completion.
pub fn simulate(sc: &Scenario) -> Result<RunResult, NetError> {
    Ok(Network::new(sc)?.run())
}
