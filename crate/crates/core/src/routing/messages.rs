//! Routing control frames.

use serde::Serialize;

use super::Cost;
use crate::StaId;

/// Identifies one discovery round: the originating STA plus its sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RreqId {
    pub origin: StaId,
    pub seq: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteRequest {
    pub id: RreqId,
    pub destination: StaId,
    pub accumulated_metric: Cost,
    pub hop_count: u32,
}

impl RouteRequest {
    pub fn origin(&self) -> StaId {
        self.id.origin
    }
}

/// Reply for round `id`, advertising a route to `destination`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteReply {
    pub id: RreqId,
    pub destination: StaId,
    pub accumulated_metric: Cost,
    pub hop_count: u32,
}

impl RouteReply {
    pub fn origin(&self) -> StaId {
        self.id.origin
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RouteError {
    pub reporter: StaId,
    pub unreachable: Vec<StaId>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Hello {
    pub sender: StaId,
    pub sequence: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum ControlMessage {
    Rreq(RouteRequest),
    Rrep(RouteReply),
    Rerr(RouteError),
    Hello(Hello),
}

impl ControlMessage {
    /// Bytes on air, excluding PHY overhead.
    pub fn wire_size(&self) -> u32 {
        match self {
            ControlMessage::Rreq(_) => 32,
            ControlMessage::Rrep(_) => 32,
            ControlMessage::Rerr(e) => 16 + 4 * e.unreachable.len() as u32,
            ControlMessage::Hello(_) => 16,
        }
    }
}
