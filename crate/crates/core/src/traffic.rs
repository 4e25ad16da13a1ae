//! CBR flows and per-flow delivery metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::routing::{RouteEvent, RouteEventKind};
use crate::sim::SimTime;
use crate::StaId;

pub const DEFAULT_PACKET_BYTES: u32 = 1500;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MetricsError {
    #[error("flow {0} is not registered")]
    UnknownFlow(u32),
    #[error("flow {flow} seq {seq} delivered twice")]
    Duplicate { flow: u32, seq: u64 },
    #[error("flow {flow} seq {seq} delivered before it was born")]
    NegativeDelay { flow: u32, seq: u64 },
    #[error("flow {0} has no deliveries")]
    Empty(u32),
    #[error("percentile {0} outside (0, 1]")]
    BadPercentile(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: u32,
    pub src: StaId,
    pub dst: StaId,
    pub rate_bps: f64,
    pub packet_bytes: u32,
    pub start: SimTime,
    pub stop: SimTime,
}

impl Flow {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rate_bps.is_finite() && self.rate_bps > 0.0) {
            return Err(format!("flow {}: rate must be > 0", self.id));
        }
        if self.packet_bytes == 0 {
            return Err(format!("flow {}: packet_bytes must be > 0", self.id));
        }
        if self.start > self.stop {
            return Err(format!("flow {}: start after stop", self.id));
        }
        if self.src == self.dst {
            return Err(format!("flow {}: src equals dst", self.id));
        }
        Ok(())
    }

    /// Inter-packet gap in nanoseconds (not rounded).
    pub fn interval_ns(&self) -> f64 {
        self.packet_bytes as f64 * 8.0 * 1e9 / self.rate_bps
    }

    pub fn interval(&self) -> SimTime {
        SimTime::from_nanos(self.interval_ns().round() as u64)
    }

    /// Emission time of packet `seq`. Computed from `start` for every packet so
    /// rounding never accumulates.
    pub fn emit_time(&self, seq: u64) -> SimTime {
        self.start + SimTime::from_nanos((seq as f64 * self.interval_ns()).round() as u64)
    }

    /// Number of packets emitted in `[start, stop)`.
    pub fn packet_count(&self) -> u64 {
        if self.stop <= self.start {
            return 0;
        }
        let span = (self.stop - self.start).as_nanos() as f64;
        let mut n = (span / self.interval_ns()).ceil() as u64;
        while n > 0 && self.emit_time(n - 1) >= self.stop {
            n -= 1;
        }
        while self.emit_time(n) < self.stop {
            n += 1;
        }
        n
    }

    /// `(seq, born_at)` of every packet.
    pub fn cbr_schedule(&self) -> impl Iterator<Item = (u64, SimTime)> + '_ {
        (0..self.packet_count()).map(|k| (k, self.emit_time(k)))
    }

    pub fn offered_bits_between(&self, a: SimTime, b: SimTime) -> u64 {
        self.cbr_schedule()
            .filter(|&(_, t)| t >= a && t < b)
            .count() as u64
            * self.packet_bytes as u64
            * 8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DeliveryRecord {
    pub flow: u32,
    pub seq: u64,
    pub born_at: SimTime,
    pub delivered_at: SimTime,
    pub bytes: u32,
}

impl DeliveryRecord {
    pub fn delay(&self) -> SimTime {
        self.delivered_at - self.born_at
    }
}

#[derive(Debug, Clone, Default)]
struct FlowLog {
    deliveries: Vec<DeliveryRecord>,
    seen: Vec<u64>,
    emitted: u64,
    dropped: u64,
}

impl FlowLog {
    fn mark(&mut self, seq: u64) -> bool {
        let (w, b) = ((seq / 64) as usize, seq % 64);
        if self.seen.len() <= w {
            self.seen.resize(w + 1, 0);
        }
        let fresh = self.seen[w] & (1 << b) == 0;
        self.seen[w] |= 1 << b;
        fresh
    }
}

/// Per-flow delivery logs.
#[derive(Debug, Clone, Default)]
pub struct FlowMetrics {
    logs: BTreeMap<u32, FlowLog>,
}

impl FlowMetrics {
    pub fn new(flows: impl IntoIterator<Item = u32>) -> Self {
        FlowMetrics {
            logs: flows.into_iter().map(|f| (f, FlowLog::default())).collect(),
        }
    }

    pub fn flow_ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.logs.keys().copied()
    }

    fn log(&self, flow: u32) -> Result<&FlowLog, MetricsError> {
        self.logs.get(&flow).ok_or(MetricsError::UnknownFlow(flow))
    }

    pub fn record_emit(&mut self, flow: u32) {
        if let Some(l) = self.logs.get_mut(&flow) {
            l.emitted += 1;
        }
    }

    pub fn record_drop(&mut self, flow: u32) {
        if let Some(l) = self.logs.get_mut(&flow) {
            l.dropped += 1;
        }
    }

    pub fn record_delivery(&mut self, rec: DeliveryRecord) -> Result<(), MetricsError> {
        let l = self
            .logs
            .get_mut(&rec.flow)
            .ok_or(MetricsError::UnknownFlow(rec.flow))?;
        if rec.delivered_at < rec.born_at {
            return Err(MetricsError::NegativeDelay {
                flow: rec.flow,
                seq: rec.seq,
            });
        }
        if !l.mark(rec.seq) {
            return Err(MetricsError::Duplicate {
                flow: rec.flow,
                seq: rec.seq,
            });
        }
        l.deliveries.push(rec);
        Ok(())
    }

    pub fn deliveries(&self, flow: u32) -> &[DeliveryRecord] {
        self.logs.get(&flow).map_or(&[], |l| &l.deliveries)
    }

    pub fn emitted(&self, flow: u32) -> u64 {
        self.logs.get(&flow).map_or(0, |l| l.emitted)
    }

    pub fn dropped(&self, flow: u32) -> u64 {
        self.logs.get(&flow).map_or(0, |l| l.dropped)
    }

    pub fn delivered_bits(&self, flow: u32) -> u64 {
        self.deliveries(flow).iter().map(|d| d.bytes as u64 * 8).sum()
    }

    /// Delivered bits with `delivered_at` in `[a, b)` divided by `b - a`.
    pub fn throughput_between(&self, flow: u32, a: SimTime, b: SimTime) -> f64 {
        if b <= a {
            return 0.0;
        }
        let bits: u64 = self
            .deliveries(flow)
            .iter()
            .filter(|d| d.delivered_at >= a && d.delivered_at < b)
            .map(|d| d.bytes as u64 * 8)
            .sum();
        bits as f64 / (b - a).as_secs_f64()
    }

    /// `(bin_start, bps)` for consecutive bins covering `[0, end)`.
    pub fn throughput_series(&self, flow: u32, bin: SimTime, end: SimTime) -> Vec<(SimTime, f64)> {
        let w = bin.as_nanos().max(1);
        let n = end.as_nanos().div_ceil(w) as usize;
        let mut bits = vec![0u64; n];
        for d in self.deliveries(flow) {
            let i = (d.delivered_at.as_nanos() / w) as usize;
            if i < n {
                bits[i] += d.bytes as u64 * 8;
            }
        }
        let secs = bin.as_secs_f64();
        bits.into_iter()
            .enumerate()
            .map(|(i, b)| (SimTime::from_nanos(i as u64 * w), b as f64 / secs))
            .collect()
    }

    /// Running average: bits delivered up to the end of each bin divided by
    /// the elapsed time.
    pub fn cumulative_series(&self, flow: u32, bin: SimTime, end: SimTime) -> Vec<(SimTime, f64)> {
        let binned = self.throughput_series(flow, bin, end);
        let secs = bin.as_secs_f64();
        let mut total = 0.0;
        binned
            .into_iter()
            .enumerate()
            .map(|(i, (t, bps))| {
                total += bps * secs;
                (t, total / (secs * (i + 1) as f64))
            })
            .collect()
    }

    /// Nearest-rank percentile of per-packet delay, `p` in (0, 1].
    pub fn delay_percentile(&self, flow: u32, p: f64) -> Result<SimTime, MetricsError> {
        let mut d: Vec<SimTime> = self.log(flow)?.deliveries.iter().map(|r| r.delay()).collect();
        nearest_rank(&mut d, p).ok_or_else(|| {
            if d.is_empty() {
                MetricsError::Empty(flow)
            } else {
                MetricsError::BadPercentile(p.to_string())
            }
        })
    }

    pub fn mean_delay(&self, flow: u32) -> Result<SimTime, MetricsError> {
        let d = &self.log(flow)?.deliveries;
        if d.is_empty() {
            return Err(MetricsError::Empty(flow));
        }
        let sum: u128 = d.iter().map(|r| r.delay().as_nanos() as u128).sum();
        Ok(SimTime::from_nanos((sum / d.len() as u128) as u64))
    }
}

/// Nearest-rank percentile: the `ceil(p * n)`-th smallest sample.
pub fn nearest_rank(samples: &mut [SimTime], p: f64) -> Option<SimTime> {
    if samples.is_empty() || !(p > 0.0 && p <= 1.0) {
        return None;
    }
    samples.sort_unstable();
    let rank = (p * samples.len() as f64).ceil() as usize;
    Some(samples[rank.clamp(1, samples.len()) - 1])
}

/// Decomposition of a local repair after a blockage onset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RepairLatency {
    /// Onset to the first data frame sent via the backup next hop.
    pub total: SimTime,
    /// Onset to the first link break or MCS trigger, if logged.
    pub detection: Option<SimTime>,
    pub sta: StaId,
}

/// `None` when no backup transmission follows the onset.
pub fn repair_latency(events: &[RouteEvent], onset: SimTime) -> Option<RepairLatency> {
    let backup = events
        .iter()
        .find(|e| e.t >= onset && matches!(e.kind, RouteEventKind::BackupTx { .. }))?;
    let detection = events
        .iter()
        .filter(|e| e.t >= onset && e.t <= backup.t && e.sta == backup.sta)
        .find(|e| {
            matches!(
                e.kind,
                RouteEventKind::LinkBreak { .. } | RouteEventKind::McsTrigger { .. }
            )
        })
        .map(|e| e.t - onset);
    Some(RepairLatency {
        total: backup.t - onset,
        detection,
        sta: backup.sta,
    })
}
