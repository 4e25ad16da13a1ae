//! Loss-free message network for exercising [`Router`]s without a MAC.
//!
//! A control message sent over a link arrives after `cost` microseconds, so
//! copies propagate in shortest-path order. Used by the protocol tests.

use std::collections::BTreeMap;

use super::events::{BreakCause, RouteEvent};
use super::messages::ControlMessage;
use super::router::{Outbox, Router};
use super::{Cost, RoutingConfig};
use crate::sim::{Scheduler, SimTime};
use crate::StaId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Delivery(usize);

pub struct LossFreeNetwork {
    routers: BTreeMap<StaId, Router>,
    links: BTreeMap<(StaId, StaId), Cost>,
    sched: Scheduler<Delivery>,
    in_flight: Vec<Option<(StaId, StaId, ControlMessage)>>,
    events: Vec<RouteEvent>,
    delivered: u64,
}

fn key(a: StaId, b: StaId) -> (StaId, StaId) {
    (a.min(b), a.max(b))
}

fn delay(cost: Cost) -> SimTime {
    SimTime::from_nanos((cost.value() * 1000.0).round().max(1.0) as u64)
}

impl LossFreeNetwork {
    /// Builds the network from undirected `(a, b, cost)` edges.
    pub fn new(edges: &[(u32, u32, f64)], cfg: RoutingConfig) -> Self {
        let mut links = BTreeMap::new();
        let mut adj: BTreeMap<StaId, Vec<StaId>> = BTreeMap::new();
        for &(a, b, c) in edges {
            let (a, b) = (StaId(a), StaId(b));
            let c = Cost::new(c).expect("edge cost must be >= 0");
            links.insert(key(a, b), c);
            adj.entry(a).or_default().push(b);
            adj.entry(b).or_default().push(a);
        }
        let routers = adj
            .into_iter()
            .map(|(id, nbs)| (id, Router::new(id, nbs, cfg.clone())))
            .collect();
        LossFreeNetwork {
            routers,
            links,
            sched: Scheduler::new(),
            in_flight: Vec::new(),
            events: Vec::new(),
            delivered: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.sched.now()
    }

    pub fn router(&self, id: u32) -> &Router {
        &self.routers[&StaId(id)]
    }

    pub fn routers(&self) -> impl Iterator<Item = &Router> {
        self.routers.values()
    }

    pub fn events(&self) -> &[RouteEvent] {
        &self.events
    }

    pub fn delivered(&self) -> u64 {
        self.delivered
    }

    pub fn link_cost(&self, a: StaId, b: StaId) -> Option<Cost> {
        self.links.get(&key(a, b)).copied()
    }

    fn flush(&mut self, from: StaId, out: Outbox) {
        let now = self.sched.now();
        for kind in out.events {
            self.events.push(RouteEvent {
                t: now,
                sta: from,
                kind,
            });
        }
        for (to, msg) in out.sends {
            let Some(c) = self.link_cost(from, to) else {
                continue;
            };
            let idx = self.in_flight.len();
            self.in_flight.push(Some((from, to, msg)));
            self.sched.schedule_in(Delivery(idx), delay(c));
        }
    }

    pub fn discover(&mut self, origin: u32, dest: u32) {
        let now = self.sched.now();
        let mut out = Outbox::new();
        let r = self.routers.get_mut(&StaId(origin)).expect("known origin");
        r.add_source(StaId(dest));
        r.originate_discovery(now, StaId(dest), &mut out);
        self.flush(StaId(origin), out);
    }

    /// Removes the link and tells both ends.
    pub fn break_link(&mut self, a: u32, b: u32) {
        let (a, b) = (StaId(a), StaId(b));
        self.links.remove(&key(a, b));
        let now = self.sched.now();
        for (me, nb) in [(a, b), (b, a)] {
            let mut out = Outbox::new();
            if let Some(r) = self.routers.get_mut(&me) {
                r.notify_link_break(now, nb, BreakCause::RetryLimit, &mut out);
            }
            self.flush(me, out);
        }
    }

    /// Delivers messages until none are in flight.
    pub fn run_to_quiescence(&mut self) {
        while let Some((_, Delivery(idx))) = self.sched.step(SimTime::MAX) {
            let Some((from, to, msg)) = self.in_flight[idx].take() else {
                continue;
            };
            let Some(cost) = self.link_cost(from, to) else {
                continue;
            };
            self.delivered += 1;
            let now = self.sched.now();
            let mut out = Outbox::new();
            let r = self.routers.get_mut(&to).expect("known receiver");
            match &msg {
                ControlMessage::Rreq(m) => r.handle_rreq(now, m, from, cost, &mut out),
                ControlMessage::Rrep(m) => r.handle_rrep(now, m, from, cost, &mut out),
                ControlMessage::Rerr(m) => r.handle_rerr(now, m, from, &mut out),
                ControlMessage::Hello(m) => r.handle_hello(now, m, from, cost, &mut out),
            }
            self.flush(to, out);
        }
    }
}
