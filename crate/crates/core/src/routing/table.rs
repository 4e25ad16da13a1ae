use std::collections::BTreeMap;

use serde::Serialize;

use super::messages::RreqId;
use super::Cost;
use crate::sim::SimTime;
use crate::StaId;

/// Per-destination route with an optional backup next hop.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoutingTableEntry {
    pub destination: StaId,
    pub next_hop: StaId,
    pub metric: Cost,
    pub backup_next_hop: Option<StaId>,
    pub backup_metric: Option<Cost>,
    pub refreshed_at: SimTime,
    pub valid: bool,
    /// Discovery round the entry was learned from; `None` for a plain
    /// 1-hop neighbor route.
    pub round: Option<RreqId>,
    pub last_used: Option<SimTime>,
    /// Set by local repair until the first data frame goes out on the new hop.
    pub repaired: bool,
}

impl RoutingTableEntry {
    pub fn new(
        destination: StaId,
        next_hop: StaId,
        metric: Cost,
        round: Option<RreqId>,
        now: SimTime,
    ) -> Self {
        RoutingTableEntry {
            destination,
            next_hop,
            metric,
            backup_next_hop: None,
            backup_metric: None,
            refreshed_at: now,
            valid: true,
            round,
            last_used: None,
            repaired: false,
        }
    }

    pub fn backup(&self) -> Option<(StaId, Cost)> {
        self.backup_next_hop.zip(self.backup_metric)
    }

    pub fn set_backup(&mut self, backup: Option<(StaId, Cost)>) {
        self.backup_next_hop = backup.map(|b| b.0);
        self.backup_metric = backup.map(|b| b.1);
    }

    /// Folds one more copy of the same round into the entry: the best copy
    /// overall is primary, the best copy via a different first hop is backup.
    /// Ties on metric go to the lower STA id. Returns true if anything changed.
    pub fn offer(&mut self, hop: StaId, metric: Cost, now: SimTime) -> bool {
        self.refreshed_at = now;
        let cand = (metric, hop);
        if cand < (self.metric, self.next_hop) {
            if hop != self.next_hop {
                self.set_backup(Some((self.next_hop, self.metric)));
            }
            self.next_hop = hop;
            self.metric = metric;
            return true;
        }
        if hop == self.next_hop {
            return false;
        }
        let beats_backup = match self.backup() {
            None => true,
            Some((bh, bm)) => cand < (bm, bh),
        };
        if beats_backup {
            self.set_backup(Some((hop, metric)));
            return true;
        }
        false
    }

    /// Promotes the backup to primary. Returns the new next hop.
    pub fn promote_backup(&mut self) -> Option<StaId> {
        let (hop, metric) = self.backup()?;
        self.next_hop = hop;
        self.metric = metric;
        self.set_backup(None);
        self.repaired = true;
        Some(hop)
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        if let Some((bh, bm)) = self.backup() {
            if bh == self.next_hop {
                return Err(format!("dst {}: backup equals primary", self.destination));
            }
            if bm < self.metric {
                return Err(format!("dst {}: backup metric below primary", self.destination));
            }
        }
        if self.backup_next_hop.is_some() != self.backup_metric.is_some() {
            return Err(format!("dst {}: half-set backup", self.destination));
        }
        if !(self.metric > Cost::ZERO) {
            return Err(format!("dst {}: metric must be positive", self.destination));
        }
        Ok(())
    }
}

pub type RoutingTable = BTreeMap<StaId, RoutingTableEntry>;
