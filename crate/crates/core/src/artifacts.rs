//! Run orchestration and artifact emission.
//!
//! A run directory holds `throughput.csv`, `delays.csv`, `route_events.csv`,
//! `summary.json` and the resolved `scenario.toml`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::thread;

use serde::Serialize;
use thiserror::Error;

use crate::network::{simulate, NetError, NetStats, RunResult};
use crate::scenario::{Mode, Scenario};
use crate::sim::SimTime;
use crate::traffic::repair_latency;
use crate::StaId;

pub const THROUGHPUT_CSV: &str = "throughput.csv";
pub const DELAYS_CSV: &str = "delays.csv";
pub const ROUTE_EVENTS_CSV: &str = "route_events.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const SCENARIO_TOML: &str = "scenario.toml";

/// Quantiles tabulated in `delay_cdf.csv`.
const CDF_POINTS: usize = 100;

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error(transparent)]
    Sim(#[from] NetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("run thread panicked")]
    Panicked,
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> ArtifactError + '_ {
    move |source| ArtifactError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct FlowSummary {
    pub flow_id: u32,
    pub src: StaId,
    pub dst: StaId,
    pub offered_bps: f64,
    pub emitted: u64,
    pub delivered: u64,
    pub dropped: u64,
    pub delivered_bits: u64,
    /// Delivered bits over the flow's active interval.
    pub mean_throughput_bps: f64,
    pub delay_p50_ms: Option<f64>,
    pub delay_p95_ms: Option<f64>,
    pub delay_p99_ms: Option<f64>,
    pub delay_mean_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RepairSummary {
    pub onset_s: f64,
    pub sta: StaId,
    pub total_ms: f64,
    pub detection_ms: Option<f64>,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct Summary {
    pub scenario: String,
    pub mode: Mode,
    pub seed: u64,
    pub duration_s: f64,
    pub trace_hash: String,
    pub events_processed: u64,
    pub flows: Vec<FlowSummary>,
    /// `None` when the scenario has no blockage or no repair followed it.
    pub repair: Option<RepairSummary>,
    pub stats: NetStats,
}

impl Summary {
    pub fn from_run(sc: &Scenario, r: &RunResult) -> Summary {
        let m = &r.metrics;
        let ms = |t: SimTime| t.as_millis_f64();
        let flows = r
            .flows
            .iter()
            .map(|f| {
                let active = (f.stop - f.start).as_secs_f64();
                let bits = m.delivered_bits(f.id);
                FlowSummary {
                    flow_id: f.id,
                    src: f.src,
                    dst: f.dst,
                    offered_bps: f.rate_bps,
                    emitted: m.emitted(f.id),
                    delivered: m.deliveries(f.id).len() as u64,
                    dropped: m.dropped(f.id),
                    delivered_bits: bits,
                    mean_throughput_bps: if active > 0.0 { bits as f64 / active } else { 0.0 },
                    delay_p50_ms: m.delay_percentile(f.id, 0.50).ok().map(ms),
                    delay_p95_ms: m.delay_percentile(f.id, 0.95).ok().map(ms),
                    delay_p99_ms: m.delay_percentile(f.id, 0.99).ok().map(ms),
                    delay_mean_ms: m.mean_delay(f.id).ok().map(ms),
                }
            })
            .collect();
        let repair = sc.first_blockage().and_then(|onset| {
            repair_latency(&r.route_events, onset).map(|l| RepairSummary {
                onset_s: onset.as_secs_f64(),
                sta: l.sta,
                total_ms: ms(l.total),
                detection_ms: l.detection.map(ms),
            })
        });
        Summary {
            scenario: r.scenario.clone(),
            mode: r.mode,
            seed: r.seed,
            duration_s: r.duration.as_secs_f64(),
            trace_hash: format!("{:016x}", r.trace_hash),
            events_processed: r.events_processed,
            flows,
            repair,
            stats: r.stats.clone(),
        }
    }
}

/// Paths and headline numbers of one emitted run.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub dir: PathBuf,
    pub throughput_csv: PathBuf,
    pub delays_csv: PathBuf,
    pub route_events_csv: PathBuf,
    pub summary_json: PathBuf,
    pub trace_hash: u64,
    pub summary: Summary,
}

/// Simulates `sc` and writes its artifacts into `out_dir`.
pub fn run_scenario(sc: &Scenario, out_dir: &Path) -> Result<(RunArtifacts, RunResult), ArtifactError> {
    let r = simulate(sc)?;
    let art = write_run(sc, &r, out_dir)?;
    Ok((art, r))
}

/// Writes the artifacts of an already completed run.
pub fn write_run(sc: &Scenario, r: &RunResult, out_dir: &Path) -> Result<RunArtifacts, ArtifactError> {
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let throughput_csv = out_dir.join(THROUGHPUT_CSV);
    let delays_csv = out_dir.join(DELAYS_CSV);
    let route_events_csv = out_dir.join(ROUTE_EVENTS_CSV);
    let summary_json = out_dir.join(SUMMARY_JSON);

    let bin = sc.metrics.bin();
    {
        let p = &throughput_csv;
        let mut w = csv::Writer::from_path(p).map_err(csv_err(p))?;
        w.write_record(["flow_id", "bin_start_s", "bps"]).map_err(csv_err(p))?;
        for f in &r.flows {
            let series = if sc.metrics.cumulative {
                r.metrics.cumulative_series(f.id, bin, r.duration)
            } else {
                r.metrics.throughput_series(f.id, bin, r.duration)
            };
            for (t, bps) in series {
                w.write_record([f.id.to_string(), fmt_s(t), bps.to_string()])
                    .map_err(csv_err(p))?;
            }
        }
        w.flush().map_err(io_err(p))?;
    }
    {
        let p = &delays_csv;
        let mut w = csv::Writer::from_path(p).map_err(csv_err(p))?;
        w.write_record(["flow_id", "seq", "born_s", "delivered_s", "delay_ms"])
            .map_err(csv_err(p))?;
        for f in &r.flows {
            for d in r.metrics.deliveries(f.id) {
                w.write_record([
                    d.flow.to_string(),
                    d.seq.to_string(),
                    fmt_s(d.born_at),
                    fmt_s(d.delivered_at),
                    format!("{:.6}", d.delay().as_millis_f64()),
                ])
                .map_err(csv_err(p))?;
            }
        }
        w.flush().map_err(io_err(p))?;
    }
    {
        let p = &route_events_csv;
        let mut w = csv::Writer::from_path(p).map_err(csv_err(p))?;
        w.write_record(["t_s", "sta", "kind", "detail"]).map_err(csv_err(p))?;
        for e in &r.route_events {
            w.write_record([fmt_s(e.t), e.sta.to_string(), e.kind.name().to_string(), e.kind.detail()])
                .map_err(csv_err(p))?;
        }
        w.flush().map_err(io_err(p))?;
    }
    let summary = Summary::from_run(sc, r);
    let json = serde_json::to_string_pretty(&summary).map_err(|source| ArtifactError::Json {
        path: summary_json.clone(),
        source,
    })?;
    fs::write(&summary_json, json + "\n").map_err(io_err(&summary_json))?;
    let toml_path = out_dir.join(SCENARIO_TOML);
    fs::write(&toml_path, sc.emit()).map_err(io_err(&toml_path))?;

    Ok(RunArtifacts {
        dir: out_dir.to_path_buf(),
        throughput_csv,
        delays_csv,
        route_events_csv,
        summary_json,
        trace_hash: r.trace_hash,
        summary,
    })
}

fn fmt_s(t: SimTime) -> String {
    format!("{:.9}", t.as_secs_f64())
}

/// Side-by-side output of both modes under one seed.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub multi_hop: RunArtifacts,
    pub single_hop: RunArtifacts,
    pub throughput_csv: PathBuf,
    pub delay_csv: PathBuf,
    pub delay_cdf_csv: PathBuf,
}

/// Runs `sc` in both modes concurrently, each into its own subdirectory,
/// and writes comparison tables into `out_dir`.
pub fn compare(sc: &Scenario, out_dir: &Path) -> Result<Comparison, ArtifactError> {
    let multi = sc.with_mode(Mode::MultiHop);
    let single = sc.with_mode(Mode::SingleHop);
    let multi_dir = out_dir.join(Mode::MultiHop.to_string());
    let single_dir = out_dir.join(Mode::SingleHop.to_string());
    let (m, s) = thread::scope(|scope| {
        let hm = scope.spawn(|| run_scenario(&multi, &multi_dir));
        let hs = scope.spawn(|| run_scenario(&single, &single_dir));
        (hm.join(), hs.join())
    });
    let (m_art, m_run) = m.map_err(|_| ArtifactError::Panicked)??;
    let (s_art, s_run) = s.map_err(|_| ArtifactError::Panicked)??;

    let throughput_csv = out_dir.join("comparison_throughput.csv");
    let delay_csv = out_dir.join("comparison_delay.csv");
    let delay_cdf_csv = out_dir.join("comparison_delay_cdf.csv");
    let bin = sc.metrics.bin();
    {
        let p = &throughput_csv;
        let mut w = csv::Writer::from_path(p).map_err(csv_err(p))?;
        w.write_record(["flow_id", "bin_start_s", "multi_hop_bps", "single_hop_bps"])
            .map_err(csv_err(p))?;
        for f in &m_run.flows {
            let a = m_run.metrics.throughput_series(f.id, bin, m_run.duration);
            let b = s_run.metrics.throughput_series(f.id, bin, s_run.duration);
            for ((t, x), (_, y)) in a.into_iter().zip(b) {
                w.write_record([f.id.to_string(), fmt_s(t), x.to_string(), y.to_string()])
                    .map_err(csv_err(p))?;
            }
        }
        w.flush().map_err(io_err(p))?;
    }
    {
        let p = &delay_csv;
        let mut w = csv::Writer::from_path(p).map_err(csv_err(p))?;
        w.write_record([
            "flow_id",
            "mode",
            "delivered",
            "mean_throughput_bps",
            "delay_p50_ms",
            "delay_p95_ms",
            "delay_p99_ms",
            "delay_mean_ms",
        ])
        .map_err(csv_err(p))?;
        let opt = |v: Option<f64>| v.map(|x| format!("{x:.6}")).unwrap_or_default();
        for art in [&m_art, &s_art] {
            for f in &art.summary.flows {
                w.write_record([
                    f.flow_id.to_string(),
                    art.summary.mode.to_string(),
                    f.delivered.to_string(),
                    f.mean_throughput_bps.to_string(),
                    opt(f.delay_p50_ms),
                    opt(f.delay_p95_ms),
                    opt(f.delay_p99_ms),
                    opt(f.delay_mean_ms),
                ])
                .map_err(csv_err(p))?;
            }
        }
        w.flush().map_err(io_err(p))?;
    }
    {
        let p = &delay_cdf_csv;
        let mut w = csv::Writer::from_path(p).map_err(csv_err(p))?;
        w.write_record(["flow_id", "quantile", "multi_hop_ms", "single_hop_ms"])
            .map_err(csv_err(p))?;
        for f in &m_run.flows {
            let a = cdf(&m_run, f.id);
            let b = cdf(&s_run, f.id);
            for k in 0..CDF_POINTS {
                let q = (k + 1) as f64 / CDF_POINTS as f64;
                let cell = |v: &Option<Vec<f64>>| {
                    v.as_ref().map(|v| format!("{:.6}", v[k])).unwrap_or_default()
                };
                w.write_record([f.id.to_string(), format!("{q:.2}"), cell(&a), cell(&b)])
                    .map_err(csv_err(p))?;
            }
        }
        w.flush().map_err(io_err(p))?;
    }
    Ok(Comparison {
        multi_hop: m_art,
        single_hop: s_art,
        throughput_csv,
        delay_csv,
        delay_cdf_csv,
    })
}

fn cdf(r: &RunResult, flow: u32) -> Option<Vec<f64>> {
    let mut d: Vec<SimTime> = r.metrics.deliveries(flow).iter().map(|x| x.delay()).collect();
    if d.is_empty() {
        return None;
    }
    d.sort_unstable();
    let n = d.len();
    Some(
        (1..=CDF_POINTS)
            .map(|k| {
                let rank = (k * n).div_ceil(CDF_POINTS).clamp(1, n);
                d[rank - 1].as_millis_f64()
            })
            .collect(),
    )
}

/// Runs one copy of `sc` per seed, concurrently, into `out_dir/seed-<n>`.
pub fn sweep(sc: &Scenario, seeds: &[u64], out_dir: &Path) -> Result<Vec<RunArtifacts>, ArtifactError> {
    let runs: Vec<(Scenario, PathBuf)> = seeds
        .iter()
        .map(|&seed| {
            let mut s = sc.clone();
            s.seed = seed;
            (s, out_dir.join(format!("seed-{seed}")))
        })
        .collect();
    let results: Vec<_> = thread::scope(|scope| {
        let handles: Vec<_> = runs
            .iter()
            .map(|(s, dir)| scope.spawn(move || run_scenario(s, dir).map(|(a, _)| a)))
            .collect();
        handles.into_iter().map(|h| h.join()).collect()
    });
    results
        .into_iter()
        .map(|r| r.map_err(|_| ArtifactError::Panicked)?)
        .collect()
}
