use std::collections::{BTreeMap, BTreeSet};

use super::events::{BreakCause, RouteEventKind};
use super::forwarding::{ForwardingKey, ForwardingTable};
use super::messages::{ControlMessage, Hello, RouteError, RouteReply, RouteRequest, RreqId};
use super::table::{RoutingTable, RoutingTableEntry};
use super::{Cost, RoutingConfig};
use crate::sim::SimTime;
use crate::StaId;

/// Routing view of a 1-hop neighbor.
#[derive(Debug, Clone, PartialEq)]
pub struct NeighborStatus {
    pub alive: bool,
    /// Cleared by the MCS trigger while the link runs below the MCS floor.
    pub useful: bool,
    pub missed_hellos: u32,
    pub heard_since_tick: bool,
    pub last_hello_rx: Option<SimTime>,
}

impl Default for NeighborStatus {
    fn default() -> Self {
        NeighborStatus {
            alive: true,
            useful: true,
            missed_hellos: 0,
            heard_since_tick: false,
            last_hello_rx: None,
        }
    }
}

/// Side effects requested by a [`Router`] call.
#[derive(Debug, Default)]
pub struct Outbox {
    pub sends: Vec<(StaId, ControlMessage)>,
    pub events: Vec<RouteEventKind>,
    /// Destinations whose discovery completed at this STA.
    pub routes_ready: Vec<StaId>,
    /// Neighbors that must no longer carry data; queued frames should be re-routed.
    pub reroute_from: Vec<StaId>,
    /// Neighbors re-established after a declared break.
    pub link_ups: Vec<StaId>,
}

impl Outbox {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.sends.is_empty()
            && self.events.is_empty()
            && self.routes_ready.is_empty()
            && self.reroute_from.is_empty()
            && self.link_ups.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RouterStats {
    pub discoveries: u64,
    pub rreq_rx: u64,
    pub rrep_rx: u64,
    pub rerr_rx: u64,
    pub rrep_dropped: u64,
}

#[derive(Debug, Clone)]
struct ReplyRound {
    created_at: SimTime,
    best_per_hop: BTreeMap<StaId, Cost>,
    replied: BTreeSet<StaId>,
}

/// Per-STA routing agent. Pure state machine: every input returns its effects
/// through an [`Outbox`].
#[derive(Debug, Clone)]
pub struct Router {
    me: StaId,
    cfg: RoutingConfig,
    neighbors: BTreeMap<StaId, NeighborStatus>,
    table: RoutingTable,
    forwarding: ForwardingTable,
    seq: u32,
    hello_seq: u64,
    reply_rounds: BTreeMap<RreqId, ReplyRound>,
    sources: BTreeSet<StaId>,
    discovering: BTreeMap<StaId, SimTime>,
    last_mcs_trigger: Option<SimTime>,
    rerr_announced: BTreeSet<StaId>,
    stats: RouterStats,
}

impl Router {
    pub fn new(me: StaId, neighbors: impl IntoIterator<Item = StaId>, cfg: RoutingConfig) -> Self {
        Router {
            me,
            cfg,
            neighbors: neighbors
                .into_iter()
                .filter(|&n| n != me)
                .map(|n| (n, NeighborStatus::default()))
                .collect(),
            table: RoutingTable::new(),
            forwarding: ForwardingTable::default(),
            seq: 0,
            hello_seq: 0,
            reply_rounds: BTreeMap::new(),
            sources: BTreeSet::new(),
            discovering: BTreeMap::new(),
            last_mcs_trigger: None,
            rerr_announced: BTreeSet::new(),
            stats: RouterStats::default(),
        }
    }

    pub fn id(&self) -> StaId {
        self.me
    }

    pub fn config(&self) -> &RoutingConfig {
        &self.cfg
    }

    pub fn stats(&self) -> &RouterStats {
        &self.stats
    }

    pub fn sequence(&self) -> u32 {
        self.seq
    }

    /// Full table including invalidated entries.
    pub fn table(&self) -> &RoutingTable {
        &self.table
    }

    /// Valid entry for `dest`, if any.
    pub fn entry(&self, dest: StaId) -> Option<&RoutingTableEntry> {
        self.table.get(&dest).filter(|e| e.valid)
    }

    pub fn forwarding_table(&self) -> &ForwardingTable {
        &self.forwarding
    }

    pub fn neighbor(&self, nb: StaId) -> Option<&NeighborStatus> {
        self.neighbors.get(&nb)
    }

    pub fn neighbor_ids(&self) -> impl Iterator<Item = StaId> + '_ {
        self.neighbors.keys().copied()
    }

    pub fn is_discovering(&self, dest: StaId) -> bool {
        self.discovering.contains_key(&dest)
    }

    fn usable(&self, nb: StaId) -> bool {
        self.neighbors.get(&nb).is_some_and(|s| s.alive && s.useful)
    }

    fn usable_neighbors_except(&self, skip: Option<StaId>) -> Vec<StaId> {
        self.neighbors
            .iter()
            .filter(|(&n, s)| s.alive && s.useful && Some(n) != skip)
            .map(|(&n, _)| n)
            .collect()
    }

    /// Marks `dest` as the destination of a flow originated here.
    pub fn add_source(&mut self, dest: StaId) {
        if dest != self.me {
            self.sources.insert(dest);
        }
    }

    pub fn is_active(&self, dest: StaId, now: SimTime) -> bool {
        self.sources.contains(&dest)
            || self
                .table
                .get(&dest)
                .and_then(|e| e.last_used)
                .is_some_and(|t| now < t + self.cfg.route_lifetime())
    }

    fn route_change_event(&self, dest: StaId, out: &mut Outbox) {
        if let Some(e) = self.table.get(&dest) {
            out.events.push(RouteEventKind::RouteChange {
                destination: dest,
                next_hop: e.next_hop,
                metric: e.metric,
                backup: e.backup(),
            });
        }
    }

    /// Installs or refreshes the direct route to a neighbor we just heard from.
    /// Routes learned from a discovery round take precedence.
    fn touch_neighbor(&mut self, now: SimTime, nb: StaId, cost: Cost, out: &mut Outbox) {
        if !cost.is_finite() || nb == self.me {
            return;
        }
        match self.table.get_mut(&nb) {
            Some(e) if e.valid && e.round.is_some() => {}
            Some(e) if e.valid && e.next_hop == nb => {
                e.metric = cost;
                e.refreshed_at = now;
            }
            Some(e) if e.valid => {}
            _ => {
                let last_used = self.table.get(&nb).and_then(|e| e.last_used);
                let mut e = RoutingTableEntry::new(nb, nb, cost, None, now);
                e.last_used = last_used;
                self.table.insert(nb, e);
                self.route_change_event(nb, out);
            }
        }
    }

    fn update_route(
        &mut self,
        now: SimTime,
        dest: StaId,
        hop: StaId,
        metric: Cost,
        round: RreqId,
        out: &mut Outbox,
    ) {
        if dest == self.me {
            return;
        }
        let changed = match self.table.get_mut(&dest) {
            Some(e) if e.valid && e.round == Some(round) => e.offer(hop, metric, now),
            Some(e)
                if e.valid
                    && e.round
                        .is_some_and(|r| r.origin == round.origin && r.seq > round.seq) =>
            {
                false
            }
            Some(e) if e.valid && e.round.is_some_and(|r| r.origin != round.origin) => {
                e.offer(hop, metric, now)
            }
            existing => {
                let last_used = existing.and_then(|e| e.last_used);
                let mut e = RoutingTableEntry::new(dest, hop, metric, Some(round), now);
                e.last_used = last_used;
                self.table.insert(dest, e);
                true
            }
        };
        if changed {
            self.rerr_announced.remove(&dest);
            self.route_change_event(dest, out);
        }
    }

    /// Starts a new discovery round for `dest`. Returns the number of RREQs sent.
    pub fn originate_discovery(&mut self, now: SimTime, dest: StaId, out: &mut Outbox) -> usize {
        if dest == self.me {
            return 0;
        }
        self.seq += 1;
        let id = RreqId {
            origin: self.me,
            seq: self.seq,
        };
        let key = ForwardingKey::Request(id);
        self.forwarding
            .observe(key, Cost::ZERO, self.me, now, self.cfg.forwarding_lifetime());
        self.discovering.insert(dest, now);
        self.stats.discoveries += 1;
        out.events.push(RouteEventKind::DiscoveryStart {
            destination: dest,
            seq: self.seq,
        });
        let targets = self.usable_neighbors_except(None);
        for &nb in &targets {
            out.sends.push((
                nb,
                ControlMessage::Rreq(RouteRequest {
                    id,
                    destination: dest,
                    accumulated_metric: Cost::ZERO,
                    hop_count: 0,
                }),
            ));
        }
        self.forwarding.record_forward(&key, targets.iter().copied());
        targets.len()
    }

    /// Starts discovery unless one for `dest` is already in flight.
    fn maybe_discover(&mut self, now: SimTime, dest: StaId, out: &mut Outbox) {
        let in_flight = self
            .discovering
            .get(&dest)
            .is_some_and(|&t| now < t + self.cfg.discovery_timeout());
        if !in_flight {
            self.originate_discovery(now, dest, out);
        }
    }

    pub fn handle_rreq(
        &mut self,
        now: SimTime,
        rreq: &RouteRequest,
        prev: StaId,
        cost: Cost,
        out: &mut Outbox,
    ) {
        self.stats.rreq_rx += 1;
        if !cost.is_finite() || !self.usable(prev) {
            return;
        }
        self.touch_neighbor(now, prev, cost, out);
        if rreq.origin() == self.me {
            return;
        }
        let metric = rreq.accumulated_metric + cost;
        self.update_route(now, rreq.origin(), prev, metric, rreq.id, out);
        let key = ForwardingKey::Request(rreq.id);
        let new_best =
            self.forwarding
                .observe(key, metric, prev, now, self.cfg.forwarding_lifetime());
        if rreq.destination == self.me {
            self.maybe_reply(now, rreq, prev, metric, out);
            return;
        }
        if new_best {
            let targets = self.usable_neighbors_except(Some(prev));
            for &nb in &targets {
                out.sends.push((
                    nb,
                    ControlMessage::Rreq(RouteRequest {
                        id: rreq.id,
                        destination: rreq.destination,
                        accumulated_metric: metric,
                        hop_count: rreq.hop_count + 1,
                    }),
                ));
            }
            self.forwarding.record_forward(&key, targets);
        }
    }

    /// Destination side: reply once to each distinct previous hop whose copy is
    /// among the two best of the round, up to the per-round cap.
    fn maybe_reply(
        &mut self,
        now: SimTime,
        rreq: &RouteRequest,
        prev: StaId,
        metric: Cost,
        out: &mut Outbox,
    ) {
        let cap = self.cfg.max_replies_per_round as usize;
        let round = self.reply_rounds.entry(rreq.id).or_insert_with(|| ReplyRound {
            created_at: now,
            best_per_hop: BTreeMap::new(),
            replied: BTreeSet::new(),
        });
        let slot = round.best_per_hop.entry(prev).or_insert(metric);
        if metric < *slot {
            *slot = metric;
        }
        let mut ranked: Vec<(Cost, StaId)> =
            round.best_per_hop.iter().map(|(&h, &m)| (m, h)).collect();
        ranked.sort();
        let in_top_two = ranked.iter().take(2).any(|&(_, h)| h == prev);
        if in_top_two && !round.replied.contains(&prev) && round.replied.len() < cap {
            round.replied.insert(prev);
            out.sends.push((
                prev,
                ControlMessage::Rrep(RouteReply {
                    id: rreq.id,
                    destination: self.me,
                    accumulated_metric: Cost::ZERO,
                    hop_count: 0,
                }),
            ));
        }
    }

    pub fn handle_rrep(
        &mut self,
        now: SimTime,
        rrep: &RouteReply,
        prev: StaId,
        cost: Cost,
        out: &mut Outbox,
    ) {
        self.stats.rrep_rx += 1;
        if !cost.is_finite() || !self.usable(prev) {
            return;
        }
        self.touch_neighbor(now, prev, cost, out);
        if rrep.destination == self.me {
            return;
        }
        let at_origin = rrep.origin() == self.me;
        if !at_origin
            && self
                .forwarding
                .get(&ForwardingKey::Request(rrep.id), now)
                .is_none()
        {
            self.stats.rrep_dropped += 1;
            out.events.push(RouteEventKind::ReplyDropped {
                origin: rrep.origin(),
                destination: rrep.destination,
            });
            return;
        }
        let metric = rrep.accumulated_metric + cost;
        self.update_route(now, rrep.destination, prev, metric, rrep.id, out);
        if at_origin {
            if self.discovering.remove(&rrep.destination).is_some() {
                if let Some(e) = self.entry(rrep.destination) {
                    out.events.push(RouteEventKind::DiscoveryComplete {
                        destination: rrep.destination,
                        next_hop: e.next_hop,
                        metric: e.metric,
                    });
                }
            }
            out.routes_ready.push(rrep.destination);
            return;
        }
        let key = ForwardingKey::Reply(rrep.id);
        if self
            .forwarding
            .observe(key, metric, prev, now, self.cfg.forwarding_lifetime())
        {
            let targets = self.usable_neighbors_except(Some(prev));
            for &nb in &targets {
                out.sends.push((
                    nb,
                    ControlMessage::Rrep(RouteReply {
                        id: rrep.id,
                        destination: rrep.destination,
                        accumulated_metric: metric,
                        hop_count: rrep.hop_count + 1,
                    }),
                ));
            }
            self.forwarding.record_forward(&key, targets);
        }
    }

    /// Per-packet forwarding decision: primary if usable, else backup.
    pub fn next_hop_for(&self, dest: StaId) -> Option<StaId> {
        let e = self.entry(dest)?;
        if self.usable(e.next_hop) {
            return Some(e.next_hop);
        }
        e.backup_next_hop.filter(|&b| self.usable(b))
    }

    pub fn note_forwarded(&mut self, dest: StaId, now: SimTime) {
        if let Some(e) = self.table.get_mut(&dest) {
            e.last_used = Some(now);
        }
    }

    /// True the first time data leaves on a next hop installed by local repair.
    pub fn take_repaired(&mut self, dest: StaId, via: StaId) -> bool {
        match self.table.get_mut(&dest) {
            Some(e) if e.valid && e.repaired && e.next_hop == via => {
                e.repaired = false;
                true
            }
            _ => false,
        }
    }

    /// A packet for `dest` found no usable next hop.
    pub fn route_miss(&mut self, now: SimTime, dest: StaId, out: &mut Outbox) {
        if dest == self.me {
            return;
        }
        if let Some(e) = self.table.get_mut(&dest) {
            e.last_used = Some(now);
        }
        if self.rerr_announced.insert(dest) {
            self.send_rerr(vec![dest], None, out);
        }
        self.maybe_discover(now, dest, out);
    }

    fn send_rerr(&mut self, unreachable: Vec<StaId>, skip: Option<StaId>, out: &mut Outbox) {
        for nb in self.usable_neighbors_except(skip) {
            out.sends.push((
                nb,
                ControlMessage::Rerr(RouteError {
                    reporter: self.me,
                    unreachable: unreachable.clone(),
                }),
            ));
        }
        out.events.push(RouteEventKind::RerrSent { unreachable });
    }

    /// The link to `nb` is gone (retry limit or HELLO loss).
    pub fn notify_link_break(
        &mut self,
        now: SimTime,
        nb: StaId,
        cause: BreakCause,
        out: &mut Outbox,
    ) {
        let Some(st) = self.neighbors.get_mut(&nb) else {
            return;
        };
        if !st.alive {
            return;
        }
        st.alive = false;
        st.missed_hellos = 0;
        out.events.push(RouteEventKind::LinkBreak {
            neighbor: nb,
            cause,
        });
        self.local_repair(now, nb, out);
    }

    /// Moves every route off `nb`: backups are promoted, routes without one are
    /// invalidated and announced in a single RERR.
    fn local_repair(&mut self, now: SimTime, nb: StaId, out: &mut Outbox) {
        let mut unreachable = Vec::new();
        let dests: Vec<StaId> = self
            .table
            .iter()
            .filter(|(_, e)| e.valid)
            .map(|(&d, _)| d)
            .collect();
        for dest in dests {
            let usable_backup = {
                let e = &self.table[&dest];
                e.backup_next_hop
                    .filter(|&b| b != nb && self.usable(b))
                    .is_some()
            };
            let e = self.table.get_mut(&dest).expect("listed");
            if e.backup_next_hop == Some(nb) {
                e.set_backup(None);
            }
            if e.next_hop != nb {
                continue;
            }
            if usable_backup {
                let to = e.promote_backup().expect("checked");
                out.events.push(RouteEventKind::Repair {
                    destination: dest,
                    from: nb,
                    to,
                });
                self.route_change_event(dest, out);
            } else {
                e.valid = false;
                e.set_backup(None);
                unreachable.push(dest);
                out.events.push(RouteEventKind::RouteLost { destination: dest });
            }
        }
        out.reroute_from.push(nb);
        if !unreachable.is_empty() {
            self.rerr_announced.extend(unreachable.iter().copied());
            self.send_rerr(unreachable.clone(), Some(nb), out);
            for dest in unreachable {
                if self.is_active(dest, now) {
                    self.maybe_discover(now, dest, out);
                }
            }
        }
    }

    /// Re-establishes a neighbor after a declared break.
    pub fn link_up(&mut self, nb: StaId, out: &mut Outbox) {
        if let Some(st) = self.neighbors.get_mut(&nb) {
            if !st.alive {
                st.alive = true;
                st.missed_hellos = 0;
                out.events.push(RouteEventKind::LinkUp { neighbor: nb });
                out.link_ups.push(nb);
            }
        }
    }

    pub fn handle_rerr(&mut self, now: SimTime, rerr: &RouteError, prev: StaId, out: &mut Outbox) {
        self.stats.rerr_rx += 1;
        out.events.push(RouteEventKind::RerrReceived {
            from: prev,
            unreachable: rerr.unreachable.clone(),
        });
        let mut lost = Vec::new();
        for &dest in &rerr.unreachable {
            if dest == self.me {
                continue;
            }
            let backup_ok = match self.table.get(&dest) {
                Some(e) if e.valid => e
                    .backup_next_hop
                    .is_some_and(|b| b != prev && self.usable(b)),
                _ => continue,
            };
            let e = self.table.get_mut(&dest).expect("checked");
            if e.next_hop == prev {
                if backup_ok {
                    let to = e.promote_backup().expect("checked");
                    out.events.push(RouteEventKind::Repair {
                        destination: dest,
                        from: prev,
                        to,
                    });
                    self.route_change_event(dest, out);
                } else {
                    e.valid = false;
                    e.set_backup(None);
                    lost.push(dest);
                    out.events.push(RouteEventKind::RouteLost { destination: dest });
                }
            } else if e.backup_next_hop == Some(prev) {
                e.set_backup(None);
                self.route_change_event(dest, out);
            }
        }
        if !lost.is_empty() {
            self.rerr_announced.extend(lost.iter().copied());
            self.send_rerr(lost.clone(), Some(prev), out);
            for dest in lost {
                if self.is_active(dest, now) {
                    self.maybe_discover(now, dest, out);
                }
            }
        }
    }

    /// Periodic HELLO: counts a miss for every live neighbor not heard from
    /// since the previous tick, breaks links at the threshold, then sends a
    /// HELLO to every neighbor (dead ones included, so they can come back).
    pub fn hello_tick(&mut self, now: SimTime, out: &mut Outbox) {
        self.hello_seq += 1;
        let threshold = self.cfg.hello_miss_threshold;
        let mut broken = Vec::new();
        for (&nb, st) in self.neighbors.iter_mut() {
            if st.alive {
                if st.heard_since_tick {
                    st.missed_hellos = 0;
                } else {
                    st.missed_hellos += 1;
                    if st.missed_hellos >= threshold {
                        broken.push(nb);
                    }
                }
            }
            st.heard_since_tick = false;
        }
        for nb in broken {
            self.notify_link_break(now, nb, BreakCause::HelloTimeout, out);
        }
        let hello = Hello {
            sender: self.me,
            sequence: self.hello_seq,
        };
        for nb in self.neighbors.keys() {
            out.sends.push((*nb, ControlMessage::Hello(hello.clone())));
        }
    }

    pub fn handle_hello(
        &mut self,
        now: SimTime,
        _hello: &Hello,
        prev: StaId,
        cost: Cost,
        out: &mut Outbox,
    ) {
        let Some(st) = self.neighbors.get_mut(&prev) else {
            return;
        };
        st.heard_since_tick = true;
        st.missed_hellos = 0;
        st.last_hello_rx = Some(now);
        self.link_up(prev, out);
        if self.usable(prev) {
            self.touch_neighbor(now, prev, cost, out);
        }
    }

    /// Called on every rate-control MCS change toward `nb`. Below the floor on
    /// a link carrying an active route the link is taken out of routing, routes
    /// are repaired locally and re-discovered. Returns true if it fired.
    pub fn mcs_trigger(&mut self, now: SimTime, nb: StaId, mcs: u8, out: &mut Outbox) -> bool {
        if mcs >= self.cfg.mcs_floor {
            if let Some(st) = self.neighbors.get_mut(&nb) {
                st.useful = true;
            }
            return false;
        }
        if let Some(st) = self.neighbors.get_mut(&nb) {
            st.useful = false;
        }
        let affected: Vec<StaId> = self
            .table
            .values()
            .filter(|e| e.valid && e.next_hop == nb && self.is_active(e.destination, now))
            .map(|e| e.destination)
            .collect();
        if affected.is_empty() {
            return false;
        }
        if self
            .last_mcs_trigger
            .is_some_and(|t| now < t + self.cfg.discovery_cooldown())
        {
            out.events
                .push(RouteEventKind::McsTriggerSuppressed { neighbor: nb, mcs });
            return false;
        }
        self.last_mcs_trigger = Some(now);
        out.events.push(RouteEventKind::McsTrigger { neighbor: nb, mcs });
        self.local_repair(now, nb, out);
        for dest in affected {
            self.maybe_discover(now, dest, out);
        }
        true
    }

    /// Records the link MCS toward `nb` without triggering any repair.
    pub fn note_mcs(&mut self, nb: StaId, mcs: u8) {
        if let Some(st) = self.neighbors.get_mut(&nb) {
            st.useful = mcs >= self.cfg.mcs_floor;
        }
    }

    /// Periodic maintenance: re-discovers stale routes to destinations this STA
    /// sends to, drops stale unused ones, and expires discovery bookkeeping.
    pub fn refresh_routes(&mut self, now: SimTime, out: &mut Outbox) {
        self.forwarding.purge(now);
        let keep = self.cfg.forwarding_lifetime();
        self.reply_rounds.retain(|_, r| now < r.created_at + keep);

        let timeout = self.cfg.discovery_timeout();
        let expired: Vec<StaId> = self
            .discovering
            .iter()
            .filter(|(_, &t)| now >= t + timeout)
            .map(|(&d, _)| d)
            .collect();
        for dest in expired {
            self.discovering.remove(&dest);
            if self.entry(dest).is_none() {
                out.events
                    .push(RouteEventKind::DiscoveryFailed { destination: dest });
            }
        }

        let lifetime = self.cfg.route_lifetime();
        let mut rediscover = Vec::new();
        let mut stale = Vec::new();
        for (&dest, e) in &self.table {
            if !e.valid || e.round.is_none() || now < e.refreshed_at + lifetime {
                continue;
            }
            if self.sources.contains(&dest) {
                rediscover.push(dest);
            } else if !self.is_active(dest, now) {
                stale.push(dest);
            }
        }
        for dest in stale {
            if let Some(e) = self.table.get_mut(&dest) {
                e.valid = false;
            }
            out.events.push(RouteEventKind::RouteLost { destination: dest });
        }
        for &dest in &self.sources {
            if self.entry(dest).is_none() && !rediscover.contains(&dest) {
                rediscover.push(dest);
            }
        }
        for dest in rediscover {
            self.maybe_discover(now, dest, out);
        }
    }
}
