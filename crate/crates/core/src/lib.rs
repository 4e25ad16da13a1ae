//! Deterministic discrete-event simulator for indoor 60 GHz multi-hop
//! networks running hop-by-hop multi-path routing (one primary and one backup
//! next hop per destination, with local repair) over a contention-based
//! 802.11ad-style MAC and a geometric blockage channel.

use std::fmt;

use serde::{Deserialize, Serialize};

pub mod channel;
pub mod mac;
pub mod network;
pub mod routing;
pub mod scenario;
pub mod sim;
pub mod traffic;
pub mod artifacts;

/// Station identifier.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct StaId(pub u32);

impl fmt::Display for StaId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for StaId {
    fn from(v: u32) -> Self {
        StaId(v)
    }
}
