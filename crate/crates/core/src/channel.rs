//! Geometric propagation model: free-space loss, box occlusion, SNR and the
//! SNR -> MCS -> PHY rate mapping.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::sim::SimTime;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// MCS index; 0 means "no usable link".
pub type McsIndex = u8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChannelError {
    #[error("transmitter and receiver are co-located")]
    ZeroDistance,
    #[error("MCS 0 has no PHY rate (no link)")]
    NoLink,
    #[error("MCS {0} is not in the table")]
    UnknownMcs(McsIndex),
    #[error("invalid MCS table: {0}")]
    InvalidTable(String),
    #[error("invalid position: {0}")]
    InvalidPosition(String),
    #[error("invalid blocker: {0}")]
    InvalidBlocker(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Position { x, y, z }
    }

    pub fn validate(&self) -> Result<(), ChannelError> {
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(ChannelError::InvalidPosition(format!("{self:?} is not finite")));
        }
        if self.z < 0.0 {
            return Err(ChannelError::InvalidPosition(format!("z = {} < 0", self.z)));
        }
        Ok(())
    }

    pub fn distance(&self, other: &Position) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2) + (self.z - other.z).powi(2))
            .sqrt()
    }
}

/// An axis-aligned obstacle. `center` is the middle of the footprint on the
/// floor of the box: the box spans `center.z ..= center.z + height`.
#[derive(Debug, Clone, PartialEq)]
pub struct Blocker {
    pub center: Position,
    pub length: f64,
    pub width: f64,
    pub height: f64,
    /// Half-open `[start, end)` activity windows, disjoint and ordered.
    pub active: Vec<(SimTime, SimTime)>,
    pub extra_loss_db: f64,
}

impl Blocker {
    pub fn validate(&self) -> Result<(), ChannelError> {
        self.center.validate()?;
        for (name, v) in [("length", self.length), ("width", self.width), ("height", self.height)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ChannelError::InvalidBlocker(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.extra_loss_db.is_finite() && self.extra_loss_db >= 0.0) {
            return Err(ChannelError::InvalidBlocker(format!(
                "extra_loss_db must be >= 0, got {}",
                self.extra_loss_db
            )));
        }
        let mut prev_end: Option<SimTime> = None;
        for &(s, e) in &self.active {
            if s >= e {
                return Err(ChannelError::InvalidBlocker(format!(
                    "window [{s}, {e}) is empty"
                )));
            }
            if prev_end.is_some_and(|p| s < p) {
                return Err(ChannelError::InvalidBlocker(
                    "activity windows overlap or are out of order".into(),
                ));
            }
            prev_end = Some(e);
        }
        Ok(())
    }

    pub fn is_active(&self, t: SimTime) -> bool {
        self.active.iter().any(|&(s, e)| s <= t && t < e)
    }

    pub fn min_corner(&self) -> [f64; 3] {
        [
            self.center.x - self.length / 2.0,
            self.center.y - self.width / 2.0,
            self.center.z,
        ]
    }

    pub fn max_corner(&self) -> [f64; 3] {
        [
            self.center.x + self.length / 2.0,
            self.center.y + self.width / 2.0,
            self.center.z + self.height,
        ]
    }

    /// Slab test of the closed segment `a -> b` against the box.
    pub fn intersects_segment(&self, a: &Position, b: &Position) -> bool {
        segment_hits_box(a, b, self.min_corner(), self.max_corner())
    }
}

fn segment_hits_box(a: &Position, b: &Position, lo: [f64; 3], hi: [f64; 3]) -> bool {
    let origin = [a.x, a.y, a.z];
    let dir = [b.x - a.x, b.y - a.y, b.z - a.z];
    let mut t_min = 0.0_f64;
    let mut t_max = 1.0_f64;
    for axis in 0..3 {
        if dir[axis].abs() < 1e-15 {
            if origin[axis] < lo[axis] || origin[axis] > hi[axis] {
                return false;
            }
            continue;
        }
        let inv = 1.0 / dir[axis];
        let mut t0 = (lo[axis] - origin[axis]) * inv;
        let mut t1 = (hi[axis] - origin[axis]) * inv;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        t_min = t_min.max(t0);
        t_max = t_max.min(t1);
        if t_min > t_max {
            return false;
        }
    }
    true
}

/// True iff the segment crosses any blocker active at `t`.
pub fn los_blocked(tx: &Position, rx: &Position, blockers: &[Blocker], t: SimTime) -> bool {
    blockers
        .iter()
        .any(|b| b.is_active(t) && b.intersects_segment(tx, rx))
}

/// Sum of extra losses of every active blocker the segment crosses.
pub fn blockage_loss_db(tx: &Position, rx: &Position, blockers: &[Blocker], t: SimTime) -> f64 {
    blockers
        .iter()
        .filter(|b| b.is_active(t) && b.intersects_segment(tx, rx))
        .map(|b| b.extra_loss_db)
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub tx_power_dbm: f64,
    pub noise_dbm: f64,
    pub preamble_detect_dbm: f64,
    pub energy_detect_dbm: f64,
    pub antenna_gain_tx_dbi: f64,
    pub antenna_gain_rx_dbi: f64,
    pub carrier_hz: f64,
    /// Fixed preamble + header time per PPDU.
    pub phy_overhead_us: f64,
}

impl ChannelConfig {
    pub fn validate(&self) -> Result<(), String> {
        let finite = [
            self.tx_power_dbm,
            self.noise_dbm,
            self.preamble_detect_dbm,
            self.energy_detect_dbm,
            self.antenna_gain_tx_dbi,
            self.antenna_gain_rx_dbi,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err("channel levels must be finite".into());
        }
        if !(self.carrier_hz.is_finite() && self.carrier_hz > 0.0) {
            return Err(format!("carrier_hz must be > 0, got {}", self.carrier_hz));
        }
        if !(self.phy_overhead_us.is_finite() && self.phy_overhead_us >= 0.0) {
            return Err("phy_overhead_us must be >= 0".into());
        }
        Ok(())
    }

    pub fn phy_overhead(&self) -> SimTime {
        SimTime::from_secs_f64(self.phy_overhead_us * 1e-6).unwrap_or(SimTime::ZERO)
    }

    pub fn total_gain_db(&self) -> f64 {
        self.antenna_gain_tx_dbi + self.antenna_gain_rx_dbi
    }
}

impl Default for ChannelConfig {
    fn default() -> Self {
        shipped_defaults().channel.clone()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McsRow {
    pub index: McsIndex,
    pub min_snr_db: f64,
    pub rate_mbps: f64,
}

impl McsRow {
    pub fn rate_bps(&self) -> f64 {
        self.rate_mbps * 1e6
    }
}

/// Ordered MCS rows; index 0 is implicit and means no link.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<McsRow>", into = "Vec<McsRow>")]
pub struct McsTable {
    rows: Vec<McsRow>,
}

impl TryFrom<Vec<McsRow>> for McsTable {
    type Error = ChannelError;
    fn try_from(rows: Vec<McsRow>) -> Result<Self, Self::Error> {
        McsTable::new(rows)
    }
}

impl From<McsTable> for Vec<McsRow> {
    fn from(t: McsTable) -> Self {
        t.rows
    }
}

impl McsTable {
    pub fn new(rows: Vec<McsRow>) -> Result<Self, ChannelError> {
        if rows.is_empty() {
            return Err(ChannelError::InvalidTable("no rows".into()));
        }
        if rows[0].index == 0 {
            return Err(ChannelError::InvalidTable("index 0 is reserved".into()));
        }
        for r in &rows {
            if !(r.min_snr_db.is_finite() && r.rate_mbps.is_finite() && r.rate_mbps > 0.0) {
                return Err(ChannelError::InvalidTable(format!("row {} not finite", r.index)));
            }
        }
        for w in rows.windows(2) {
            if w[1].index <= w[0].index {
                return Err(ChannelError::InvalidTable("indices must strictly increase".into()));
            }
            if w[1].min_snr_db <= w[0].min_snr_db {
                return Err(ChannelError::InvalidTable(
                    "SNR thresholds must strictly increase".into(),
                ));
            }
            if w[1].rate_mbps <= w[0].rate_mbps {
                return Err(ChannelError::InvalidTable("rates must strictly increase".into()));
            }
        }
        Ok(McsTable { rows })
    }

    pub fn rows(&self) -> &[McsRow] {
        &self.rows
    }

    pub fn max_index(&self) -> McsIndex {
        self.rows.last().expect("non-empty").index
    }

    pub fn min_index(&self) -> McsIndex {
        self.rows[0].index
    }

    pub fn max_rate_bps(&self) -> f64 {
        self.rows.last().expect("non-empty").rate_bps()
    }

    pub fn row(&self, mcs: McsIndex) -> Option<&McsRow> {
        self.rows.iter().find(|r| r.index == mcs)
    }

    /// Next index above `mcs`, capped at the top.
    pub fn step_up(&self, mcs: McsIndex) -> McsIndex {
        self.rows
            .iter()
            .map(|r| r.index)
            .find(|&i| i > mcs)
            .unwrap_or(self.max_index())
    }

    /// Next index below `mcs`, floored at the lowest usable index.
    pub fn step_down(&self, mcs: McsIndex) -> McsIndex {
        self.rows
            .iter()
            .rev()
            .map(|r| r.index)
            .find(|&i| i < mcs)
            .unwrap_or(self.min_index())
    }
}

impl Default for McsTable {
    fn default() -> Self {
        shipped_defaults().mcs.clone()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DefaultsFile {
    schema: u32,
    channel: ChannelConfig,
    mcs: McsTable,
}

pub const DEFAULTS_TOML: &str = include_str!("../config/defaults.toml");

fn shipped_defaults() -> &'static DefaultsFile {
    static CELL: OnceLock<DefaultsFile> = OnceLock::new();
    CELL.get_or_init(|| {
        let file: DefaultsFile =
            toml::from_str(DEFAULTS_TOML).expect("shipped defaults.toml must parse");
        assert_eq!(file.schema, 1, "unsupported defaults schema");
        file
    })
}

pub fn free_space_loss_db(distance_m: f64, carrier_hz: f64) -> f64 {
    20.0 * distance_m.log10() + 20.0 * carrier_hz.log10() + 20.0 * (4.0 * PI / SPEED_OF_LIGHT).log10()
}

/// Friis free-space loss plus `blockage_db` of extra attenuation.
pub fn path_loss_db(
    tx: &Position,
    rx: &Position,
    blockage_db: f64,
    cfg: &ChannelConfig,
) -> Result<f64, ChannelError> {
    let d = tx.distance(rx);
    if d <= 0.0 {
        return Err(ChannelError::ZeroDistance);
    }
    Ok(free_space_loss_db(d, cfg.carrier_hz) + blockage_db)
}

pub fn rx_power_dbm(
    tx: &Position,
    rx: &Position,
    blockers: &[Blocker],
    t: SimTime,
    cfg: &ChannelConfig,
) -> Result<f64, ChannelError> {
    let loss = path_loss_db(tx, rx, blockage_loss_db(tx, rx, blockers, t), cfg)?;
    Ok(cfg.tx_power_dbm + cfg.total_gain_db() - loss)
}

pub fn snr_db(
    tx: &Position,
    rx: &Position,
    blockers: &[Blocker],
    t: SimTime,
    cfg: &ChannelConfig,
) -> Result<f64, ChannelError> {
    Ok(rx_power_dbm(tx, rx, blockers, t, cfg)? - cfg.noise_dbm)
}

/// Highest index whose threshold is at or below `snr`; 0 if none.
pub fn mcs_from_snr(snr: f64, table: &McsTable) -> McsIndex {
    table
        .rows
        .iter()
        .rev()
        .find(|r| r.min_snr_db <= snr)
        .map_or(0, |r| r.index)
}

pub fn phy_rate(mcs: McsIndex, table: &McsTable) -> Result<f64, ChannelError> {
    if mcs == 0 {
        return Err(ChannelError::NoLink);
    }
    table
        .row(mcs)
        .map(McsRow::rate_bps)
        .ok_or(ChannelError::UnknownMcs(mcs))
}

/// `overhead + payload_bytes * 8 / rate`, rounded up to the nanosecond.
pub fn frame_airtime(
    payload_bytes: u64,
    mcs: McsIndex,
    table: &McsTable,
    overhead: SimTime,
) -> Result<SimTime, ChannelError> {
    let rate = phy_rate(mcs, table)?;
    let ns = (payload_bytes as f64 * 8.0 * 1e9 / rate).ceil() as u64;
    Ok(overhead + SimTime::from_nanos(ns))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn human(x: f64, y: f64) -> Blocker {
        Blocker {
            center: Position::new(x, y, 0.0),
            length: 0.5,
            width: 0.5,
            height: 1.8,
            active: vec![(SimTime::from_secs(5), SimTime::from_secs(30))],
            extra_loss_db: 20.0,
        }
    }

    fn cfg() -> ChannelConfig {
        ChannelConfig::default()
    }

    #[test]
    fn segment_through_active_blocker_center() {
        let b = human(5.0, 0.0);
        let a = Position::new(0.0, 0.0, 1.0);
        let c = Position::new(10.0, 0.0, 1.0);
        assert!(los_blocked(&a, &c, &[b.clone()], SimTime::from_secs(6)));
        assert!(!los_blocked(&a, &c, &[b], SimTime::from_secs(4)));
        assert!(!los_blocked(&a, &c, &[], SimTime::from_secs(6)));
    }

    #[test]
    fn segment_over_the_head_is_clear() {
        let b = human(5.0, 0.0);
        let a = Position::new(0.0, 0.0, 2.0);
        let c = Position::new(10.0, 0.0, 2.0);
        assert!(!los_blocked(&a, &c, &[b], SimTime::from_secs(6)));
    }

    #[test]
    fn friis_reference_values() {
        let c = cfg();
        let o = Position::new(0.0, 0.0, 1.0);
        let pl1 = path_loss_db(&o, &Position::new(1.0, 0.0, 1.0), 0.0, &c).unwrap();
        let pl10 = path_loss_db(&o, &Position::new(10.0, 0.0, 1.0), 0.0, &c).unwrap();
        assert!((pl1 - 68.0).abs() < 0.1, "{pl1}");
        assert!((pl10 - 88.0).abs() < 0.1, "{pl10}");
        assert_eq!(path_loss_db(&o, &o, 0.0, &c), Err(ChannelError::ZeroDistance));
    }

    #[test]
    fn blocker_adds_exactly_its_loss() {
        let c = cfg();
        let a = Position::new(0.0, 0.0, 1.0);
        let b = Position::new(10.0, 0.0, 1.0);
        let blockers = [human(5.0, 0.0)];
        let t = SimTime::from_secs(6);
        let free = snr_db(&a, &b, &[], t, &c).unwrap();
        let blocked = snr_db(&a, &b, &blockers, t, &c).unwrap();
        assert!((free - blocked - 20.0).abs() < 1e-9);
    }

    #[test]
    fn snr_worked_example() {
        // 18 dBm, 30 dBi total gain, 5 m, -70.6 dBm noise
        let c = cfg();
        let a = Position::new(0.0, 0.0, 1.0);
        let b = Position::new(5.0, 0.0, 1.0);
        let snr = snr_db(&a, &b, &[], SimTime::ZERO, &c).unwrap();
        assert!((snr - 36.6).abs() < 0.1, "{snr}");
        let blocked = snr_db(&a, &b, &[human(2.5, 0.0)], SimTime::from_secs(6), &c).unwrap();
        assert!((blocked - 16.6).abs() < 0.1, "{blocked}");
        let mut no_gain = c.clone();
        no_gain.antenna_gain_tx_dbi = 0.0;
        no_gain.antenna_gain_rx_dbi = 0.0;
        let s0 = snr_db(&a, &b, &[], SimTime::ZERO, &no_gain).unwrap();
        assert!((snr - s0 - 30.0).abs() < 1e-9);
    }

    #[test]
    fn mcs_lookup_boundaries() {
        let t = McsTable::default();
        assert_eq!(mcs_from_snr(-5.0, &t), 0);
        for r in t.rows() {
            assert_eq!(mcs_from_snr(r.min_snr_db, &t), r.index);
        }
        assert_eq!(mcs_from_snr(37.0, &t), 12);
    }

    #[test]
    fn default_rates() {
        let t = McsTable::default();
        assert_eq!(phy_rate(1, &t).unwrap(), 385e6);
        assert_eq!(phy_rate(12, &t).unwrap(), 4620e6);
        assert_eq!(phy_rate(0, &t), Err(ChannelError::NoLink));
        assert!(t.rows().windows(2).all(|w| w[0].rate_mbps < w[1].rate_mbps));
    }

    #[test]
    fn airtime_examples() {
        let t = McsTable::default();
        let oh = SimTime::from_nanos(4300);
        assert_eq!(frame_airtime(0, 12, &t, oh).unwrap(), oh);
        let a = frame_airtime(1500, 12, &t, oh).unwrap();
        assert!((a.as_nanos() as f64 - 6900.0).abs() < 50.0, "{a}");
        let v1 = frame_airtime(3000, 1, &t, oh).unwrap() - oh;
        let v2 = frame_airtime(6000, 1, &t, oh).unwrap() - oh;
        assert_eq!(v2.as_nanos(), 2 * v1.as_nanos());
        assert!(frame_airtime(10, 0, &t, oh).is_err());
    }

    #[test]
    fn table_validation() {
        let row = |index, min_snr_db, rate_mbps| McsRow { index, min_snr_db, rate_mbps };
        assert!(McsTable::new(vec![]).is_err());
        assert!(McsTable::new(vec![row(0, 1.0, 10.0)]).is_err());
        assert!(McsTable::new(vec![row(1, 1.0, 10.0), row(2, 1.0, 20.0)]).is_err());
        assert!(McsTable::new(vec![row(1, 1.0, 10.0), row(2, 2.0, 5.0)]).is_err());
        assert!(McsTable::new(vec![row(2, 1.0, 10.0), row(1, 2.0, 20.0)]).is_err());
        let t = McsTable::new(vec![row(1, 1.0, 10.0), row(3, 2.0, 20.0)]).unwrap();
        assert_eq!(t.step_up(1), 3);
        assert_eq!(t.step_up(3), 3);
        assert_eq!(t.step_down(3), 1);
        assert_eq!(t.step_down(1), 1);
    }

    #[test]
    fn blocker_validation() {
        let mut b = human(0.0, 0.0);
        assert!(b.validate().is_ok());
        b.height = 0.0;
        assert!(b.validate().is_err());
        let mut b = human(0.0, 0.0);
        b.active = vec![
            (SimTime::from_secs(2), SimTime::from_secs(4)),
            (SimTime::from_secs(3), SimTime::from_secs(5)),
        ];
        assert!(b.validate().is_err());
        let mut b = human(0.0, 0.0);
        b.extra_loss_db = -1.0;
        assert!(b.validate().is_err());
    }

    /// Steps the segment at <= 1 mm and checks point containment.
    fn sampled_hit(a: &Position, b: &Position, lo: [f64; 3], hi: [f64; 3]) -> bool {
        let len = a.distance(b);
        let steps = (len / 1e-3).ceil().max(1.0) as usize;
        (0..=steps).any(|i| {
            let s = i as f64 / steps as f64;
            let p = [
                a.x + (b.x - a.x) * s,
                a.y + (b.y - a.y) * s,
                a.z + (b.z - a.z) * s,
            ];
            (0..3).all(|k| p[k] >= lo[k] && p[k] <= hi[k])
        })
    }

    #[test]
    fn occlusion_matches_sampling_oracle() {
        use crate::sim::RandomStream;
        let mut rng = RandomStream::new(99, 0);
        let mut u = |lo: f64, hi: f64| lo + (hi - lo) * rng.next_random();
        let mut checked = 0;
        let mut hits = 0;
        for _ in 0..10_000 {
            let a = Position::new(u(0.0, 6.0), u(0.0, 6.0), u(0.0, 3.0));
            let b = Position::new(u(0.0, 6.0), u(0.0, 6.0), u(0.0, 3.0));
            let blk = Blocker {
                center: Position::new(u(1.0, 5.0), u(1.0, 5.0), u(0.0, 0.5)),
                length: u(0.2, 1.5),
                width: u(0.2, 1.5),
                height: u(0.5, 2.0),
                active: vec![(SimTime::ZERO, SimTime::MAX)],
                extra_loss_db: 20.0,
            };
            let (lo, hi) = (blk.min_corner(), blk.max_corner());
            // Skip grazing cases the 1 mm sampler cannot resolve.
            let grow = |v: [f64; 3], d: f64| [v[0] + d, v[1] + d, v[2] + d];
            let outer = sampled_hit(&a, &b, grow(lo, -2e-3), grow(hi, 2e-3));
            let inner = sampled_hit(&a, &b, grow(lo, 2e-3), grow(hi, -2e-3));
            if outer != inner {
                continue;
            }
            checked += 1;
            hits += inner as usize;
            assert_eq!(
                los_blocked(&a, &b, &[blk.clone()], SimTime::ZERO),
                inner,
                "{a:?} {b:?} {blk:?}"
            );
        }
        assert!(checked > 9_800, "checked {checked}");
        assert!(hits > 500, "too few intersecting samples: {hits}");
    }

    proptest! {
        #[test]
        fn path_loss_monotone_and_symmetric(
            x in 0.1f64..50.0, extra in 0.01f64..20.0,
            ax in -5.0f64..5.0, ay in -5.0f64..5.0, bx in -5.0f64..5.0, by in -5.0f64..5.0,
        ) {
            let c = cfg();
            let o = Position::new(0.0, 0.0, 1.0);
            let near = path_loss_db(&o, &Position::new(x, 0.0, 1.0), 0.0, &c).unwrap();
            let far = path_loss_db(&o, &Position::new(x + extra, 0.0, 1.0), 0.0, &c).unwrap();
            prop_assert!(far > near);
            let a = Position::new(ax, ay, 1.0);
            let b = Position::new(bx, by, 1.5);
            let ab = path_loss_db(&a, &b, 20.0, &c).unwrap();
            let ba = path_loss_db(&b, &a, 20.0, &c).unwrap();
            prop_assert_eq!(ab, ba);
            let free = path_loss_db(&a, &b, 0.0, &c).unwrap();
            prop_assert!((ab - free - 20.0).abs() < 1e-9);
        }

        #[test]
        fn mcs_monotone_in_snr(s1 in -10.0f64..40.0, s2 in -10.0f64..40.0) {
            let t = McsTable::default();
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            prop_assert!(mcs_from_snr(lo, &t) <= mcs_from_snr(hi, &t));
        }
    }
}
