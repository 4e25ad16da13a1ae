//! Hop-by-hop multi-path routing.
//!
//! Every STA keeps one primary and at most one backup next hop per
//! destination. Discovery floods directional RREQs; each STA forwards only the
//! best copy of a round it has seen (re-forwarding when a strictly better copy
//! arrives) and remembers the best copy that came in over a different first hop
//! as its backup. Replies travel back the same way. When the link to a primary
//! next hop fails the STA switches to the backup on its own (local repair) and
//! only reports upstream if no backup is left.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Add;

use serde::{Deserialize, Serialize};

use crate::channel::{phy_rate, McsTable};
use crate::mac::LinkState;
use crate::sim::SimTime;

mod events;
mod forwarding;
pub mod harness;
mod messages;
mod router;
mod table;

pub use events::{BreakCause, RouteEvent, RouteEventKind};
pub use forwarding::{ForwardingKey, ForwardingTable, ForwardingTableEntry};
pub use messages::{ControlMessage, Hello, RouteError, RouteReply, RouteRequest, RreqId};
pub use router::{NeighborStatus, Outbox, Router, RouterStats};
pub use table::{RoutingTable, RoutingTableEntry};

/// Additive route cost. Totally ordered; `INFINITE` marks an unusable link.
#[derive(Debug, Clone, Copy, Serialize)]
#[serde(transparent)]
pub struct Cost(f64);

impl Cost {
    pub const ZERO: Cost = Cost(0.0);
    pub const INFINITE: Cost = Cost(f64::INFINITY);

    /// `None` for NaN or negative values.
    pub fn new(v: f64) -> Option<Cost> {
        (v >= 0.0).then_some(Cost(v))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl PartialEq for Cost {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0) == Ordering::Equal
    }
}
impl Eq for Cost {}
impl PartialOrd for Cost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cost {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl Add for Cost {
    type Output = Cost;
    fn add(self, rhs: Cost) -> Cost {
        Cost(self.0 + rhs.0)
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.fract() == 0.0 && self.0.is_finite() {
            write!(f, "{}", self.0 as i64)
        } else {
            write!(f, "{:.4}", self.0)
        }
    }
}

/// Airtime cost of a link: `max_rate / rate(mcs)`, so the fastest MCS costs
/// 1.0. Dead links and MCS 0 cost `INFINITE`. The MCS used is the lower of the
/// transmit-side rate-control MCS and the MCS supported by the last measured
/// reception.
pub fn link_cost(link: &LinkState, table: &McsTable) -> Cost {
    if !link.alive {
        return Cost::INFINITE;
    }
    match phy_rate(link.mcs.min(link.rx_mcs), table) {
        Ok(rate) => Cost(table.max_rate_bps() / rate),
        Err(_) => Cost::INFINITE,
    }
}

/// Protocol timers and thresholds. None of these values is given by the
/// protocol description; all are configurable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoutingConfig {
    pub hello_interval_ms: f64,
    pub hello_miss_threshold: u32,
    pub mcs_floor: u8,
    pub discovery_cooldown_ms: f64,
    pub forwarding_lifetime_ms: f64,
    pub route_lifetime_ms: f64,
    pub refresh_interval_ms: f64,
    pub pending_buffer_ms: f64,
    pub discovery_timeout_ms: f64,
    pub max_replies_per_round: u32,
}

impl Default for RoutingConfig {
    fn default() -> Self {
        RoutingConfig {
            hello_interval_ms: 100.0,
            hello_miss_threshold: 3,
            mcs_floor: 2,
            discovery_cooldown_ms: 50.0,
            forwarding_lifetime_ms: 500.0,
            route_lifetime_ms: 1000.0,
            refresh_interval_ms: 100.0,
            pending_buffer_ms: 10.0,
            discovery_timeout_ms: 100.0,
            max_replies_per_round: 3,
        }
    }
}

fn ms(v: f64) -> SimTime {
    SimTime::from_secs_f64(v * 1e-3).unwrap_or(SimTime::ZERO)
}

impl RoutingConfig {
    pub fn validate(&self) -> Result<(), String> {
        let times = [
            ("hello_interval_ms", self.hello_interval_ms),
            ("discovery_cooldown_ms", self.discovery_cooldown_ms),
            ("forwarding_lifetime_ms", self.forwarding_lifetime_ms),
            ("route_lifetime_ms", self.route_lifetime_ms),
            ("refresh_interval_ms", self.refresh_interval_ms),
            ("pending_buffer_ms", self.pending_buffer_ms),
            ("discovery_timeout_ms", self.discovery_timeout_ms),
        ];
        for (name, v) in times {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("routing.{name} must be >= 0"));
            }
        }
        if self.hello_interval_ms <= 0.0 || self.refresh_interval_ms <= 0.0 {
            return Err("routing timer periods must be > 0".into());
        }
        if self.hello_miss_threshold == 0 {
            return Err("routing.hello_miss_threshold must be >= 1".into());
        }
        if self.max_replies_per_round == 0 {
            return Err("routing.max_replies_per_round must be >= 1".into());
        }
        Ok(())
    }

    pub fn hello_interval(&self) -> SimTime {
        ms(self.hello_interval_ms)
    }
    pub fn discovery_cooldown(&self) -> SimTime {
        ms(self.discovery_cooldown_ms)
    }
    pub fn forwarding_lifetime(&self) -> SimTime {
        ms(self.forwarding_lifetime_ms)
    }
    pub fn route_lifetime(&self) -> SimTime {
        ms(self.route_lifetime_ms)
    }
    pub fn refresh_interval(&self) -> SimTime {
        ms(self.refresh_interval_ms)
    }
    pub fn pending_buffer(&self) -> SimTime {
        ms(self.pending_buffer_ms)
    }
    pub fn discovery_timeout(&self) -> SimTime {
        ms(self.discovery_timeout_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::StaId;

    #[test]
    fn airtime_cost_from_mcs() {
        let t = McsTable::default();
        let mut l = LinkState::new(StaId(2), 12);
        assert_eq!(link_cost(&l, &t), Cost(1.0));
        l.mcs = 8;
        l.rx_mcs = 8;
        assert_eq!(link_cost(&l, &t), Cost(2.0));
        l.alive = false;
        assert_eq!(link_cost(&l, &t), Cost::INFINITE);
        let dead = LinkState::new(StaId(3), 0);
        assert_eq!(link_cost(&dead, &t), Cost::INFINITE);
    }

    #[test]
    fn measured_mcs_caps_cost() {
        let t = McsTable::default();
        let mut l = LinkState::new(StaId(2), 12);
        l.rx_mcs = 1;
        assert_eq!(link_cost(&l, &t), Cost(12.0));
    }

    #[test]
    fn cost_ordering_is_total() {
        assert!(Cost::new(1.0).unwrap() < Cost::INFINITE);
        assert!(Cost::new(-1.0).is_none());
        assert!(Cost::new(f64::NAN).is_none());
        assert_eq!(Cost(2.0) + Cost(3.0), Cost(5.0));
    }
}
