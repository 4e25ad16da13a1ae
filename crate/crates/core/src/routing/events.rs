use std::fmt;

use serde::Serialize;

use super::Cost;
use crate::sim::SimTime;
use crate::StaId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BreakCause {
    RetryLimit,
    HelloTimeout,
    McsFloor,
}

impl fmt::Display for BreakCause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BreakCause::RetryLimit => "retry-limit",
            BreakCause::HelloTimeout => "hello-timeout",
            BreakCause::McsFloor => "mcs-floor",
        })
    }
}

/// Something that happened to a STA's routing state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum RouteEventKind {
    DiscoveryStart { destination: StaId, seq: u32 },
    DiscoveryComplete { destination: StaId, next_hop: StaId, metric: Cost },
    DiscoveryFailed { destination: StaId },
    RouteChange { destination: StaId, next_hop: StaId, metric: Cost, backup: Option<(StaId, Cost)> },
    LinkBreak { neighbor: StaId, cause: BreakCause },
    LinkUp { neighbor: StaId },
    Repair { destination: StaId, from: StaId, to: StaId },
    RouteLost { destination: StaId },
    RerrSent { unreachable: Vec<StaId> },
    RerrReceived { from: StaId, unreachable: Vec<StaId> },
    /// First data transmission over a next hop installed by local repair.
    BackupTx { destination: StaId, via: StaId },
    McsTrigger { neighbor: StaId, mcs: u8 },
    McsTriggerSuppressed { neighbor: StaId, mcs: u8 },
    ReplyDropped { origin: StaId, destination: StaId },
}

fn ids(v: &[StaId]) -> String {
    v.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(" ")
}

impl RouteEventKind {
    pub fn name(&self) -> &'static str {
        match self {
            RouteEventKind::DiscoveryStart { .. } => "discovery-start",
            RouteEventKind::DiscoveryComplete { .. } => "discovery-complete",
            RouteEventKind::DiscoveryFailed { .. } => "discovery-failed",
            RouteEventKind::RouteChange { .. } => "route-change",
            RouteEventKind::LinkBreak { .. } => "link-break",
            RouteEventKind::LinkUp { .. } => "link-up",
            RouteEventKind::Repair { .. } => "repair",
            RouteEventKind::RouteLost { .. } => "route-lost",
            RouteEventKind::RerrSent { .. } => "rerr-sent",
            RouteEventKind::RerrReceived { .. } => "rerr-received",
            RouteEventKind::BackupTx { .. } => "backup-tx",
            RouteEventKind::McsTrigger { .. } => "mcs-trigger",
            RouteEventKind::McsTriggerSuppressed { .. } => "mcs-trigger-suppressed",
            RouteEventKind::ReplyDropped { .. } => "rrep-dropped",
        }
    }

    pub fn detail(&self) -> String {
        use RouteEventKind::*;
        match self {
            DiscoveryStart { destination, seq } => format!("dst={destination} seq={seq}"),
            DiscoveryComplete { destination, next_hop, metric } => {
                format!("dst={destination} via={next_hop} metric={metric}")
            }
            DiscoveryFailed { destination } => format!("dst={destination}"),
            RouteChange { destination, next_hop, metric, backup } => match backup {
                Some((b, m)) => {
                    format!("dst={destination} via={next_hop} metric={metric} backup={b} backup_metric={m}")
                }
                None => format!("dst={destination} via={next_hop} metric={metric} backup=none"),
            },
            LinkBreak { neighbor, cause } => format!("neighbor={neighbor} cause={cause}"),
            LinkUp { neighbor } => format!("neighbor={neighbor}"),
            Repair { destination, from, to } => format!("dst={destination} from={from} to={to}"),
            RouteLost { destination } => format!("dst={destination}"),
            RerrSent { unreachable } => format!("unreachable={}", ids(unreachable)),
            RerrReceived { from, unreachable } => {
                format!("from={from} unreachable={}", ids(unreachable))
            }
            BackupTx { destination, via } => format!("dst={destination} via={via}"),
            McsTrigger { neighbor, mcs } | McsTriggerSuppressed { neighbor, mcs } => {
                format!("neighbor={neighbor} mcs={mcs}")
            }
            ReplyDropped { origin, destination } => format!("origin={origin} dst={destination}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteEvent {
    pub t: SimTime,
    pub sta: StaId,
    pub kind: RouteEventKind,
}
