//! Records which discovery copies a STA has already forwarded.

use std::collections::{BTreeMap, BTreeSet};

use super::messages::RreqId;
use super::Cost;
use crate::sim::SimTime;
use crate::StaId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ForwardingKey {
    Request(RreqId),
    Reply(RreqId),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardingTableEntry {
    pub key: ForwardingKey,
    /// Best copy seen, as (metric, previous hop).
    pub best_metric_seen: (Cost, StaId),
    pub second_best_metric_seen: Option<(Cost, StaId)>,
    pub forwarded: bool,
    pub forwarded_to: BTreeSet<StaId>,
    pub expires_at: SimTime,
}

impl ForwardingTableEntry {
    /// Records a copy; returns true if it is a new best (which is what gets
    /// forwarded).
    fn observe(&mut self, metric: Cost, prev: StaId) -> bool {
        let cand = (metric, prev);
        if cand < self.best_metric_seen {
            self.second_best_metric_seen = Some(self.best_metric_seen);
            self.best_metric_seen = cand;
            true
        } else {
            if cand != self.best_metric_seen
                && self.second_best_metric_seen.is_none_or(|s| cand < s)
            {
                self.second_best_metric_seen = Some(cand);
            }
            false
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ForwardingTable {
    entries: BTreeMap<ForwardingKey, ForwardingTableEntry>,
}

impl ForwardingTable {
    pub fn get(&self, key: &ForwardingKey, now: SimTime) -> Option<&ForwardingTableEntry> {
        self.entries.get(key).filter(|e| e.expires_at > now)
    }

    /// Records a received copy and reports whether it should be forwarded.
    /// Expired entries are treated as a fresh round.
    pub fn observe(
        &mut self,
        key: ForwardingKey,
        metric: Cost,
        prev: StaId,
        now: SimTime,
        lifetime: SimTime,
    ) -> bool {
        match self.entries.get_mut(&key) {
            Some(e) if e.expires_at > now => e.observe(metric, prev),
            _ => {
                self.entries.insert(
                    key,
                    ForwardingTableEntry {
                        key,
                        best_metric_seen: (metric, prev),
                        second_best_metric_seen: None,
                        forwarded: false,
                        forwarded_to: BTreeSet::new(),
                        expires_at: now + lifetime,
                    },
                );
                true
            }
        }
    }

    pub fn record_forward(&mut self, key: &ForwardingKey, to: impl IntoIterator<Item = StaId>) {
        if let Some(e) = self.entries.get_mut(key) {
            e.forwarded = true;
            e.forwarded_to.extend(to);
        }
    }

    pub fn purge(&mut self, now: SimTime) {
        self.entries.retain(|_, e| e.expires_at > now);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
