//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion outside `KNOWN_SHORTFALLS` fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use hopsim::network::{simulate, RunResult};
use hopsim::routing::harness::LossFreeNetwork;
use hopsim::routing::RoutingConfig;
use hopsim::scenario::{shipped_scenario, Mode};
use hopsim::sim::SimTime;
use hopsim::traffic::repair_latency;
use hopsim::StaId;

/// Criteria this model does not meet; reported as FAIL but not fatal.
const KNOWN_SHORTFALLS: &[&str] = &["AC4", "AC5"];

const GOLDEN: &str = include_str!("golden/trace_hashes.txt");

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

fn secs(s: u64) -> SimTime {
    SimTime::from_secs(s)
}

fn ms(t: SimTime) -> f64 {
    t.as_millis_f64()
}

type Runs = BTreeMap<(&'static str, Mode), (RunResult, Duration)>;

fn run_all() -> Runs {
    let jobs: Vec<(&'static str, Mode)> = ["blocker-single-flow", "blocker-multi-flow", "nlos-relay"]
        .into_iter()
        .flat_map(|n| [(n, Mode::MultiHop), (n, Mode::SingleHop)])
        .collect();
    thread::scope(|s| {
        let handles: Vec<_> = jobs
            .iter()
            .map(|&(name, mode)| {
                s.spawn(move || {
                    let sc = shipped_scenario(name).unwrap().with_mode(mode);
                    let t0 = Instant::now();
                    let r = simulate(&sc).unwrap();
                    ((name, mode), (r, t0.elapsed()))
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    })
}

fn ac1() -> Outcome {
    let t0 = Instant::now();
    let mut net = LossFreeNetwork::new(
        &[(1, 3, 4.0), (1, 2, 5.0), (2, 3, 2.0), (3, 4, 3.0), (2, 4, 3.0)],
        RoutingConfig::default(),
    );
    net.discover(1, 4);
    net.run_to_quiescence();
    let row = |dest: u32| {
        net.router(3).entry(StaId(dest)).map(|e| {
            (
                e.next_hop.0,
                e.metric.value(),
                e.backup().map(|(h, m)| (h.0, m.value())),
            )
        })
    };
    let got = [row(1), row(2), row(4)];
    let want = [
        Some((1, 4.0, Some((2, 7.0)))),
        Some((2, 2.0, None)),
        Some((4, 3.0, Some((2, 5.0)))),
    ];
    let elapsed = t0.elapsed();
    Outcome {
        id: "AC1",
        pass: got == want && elapsed < Duration::from_secs(1),
        detail: format!("B's table {got:?} in {elapsed:?} (S=1 A=2 B=3 D=4)"),
    }
}

fn ac2(runs: &Runs) -> Outcome {
    let (r, wall) = &runs[&("blocker-single-flow", Mode::MultiHop)];
    let lat = repair_latency(&r.route_events, secs(5));
    let pass = lat.is_some_and(|l| l.total <= SimTime::from_millis(15)) && *wall < Duration::from_secs(30);
    Outcome {
        id: "AC2",
        pass,
        detail: match lat {
            Some(l) => format!(
                "backup next hop used {:.3} ms after onset (detection {:?} ms, limit 15 ms), run {wall:?}",
                ms(l.total),
                l.detection.map(ms)
            ),
            None => "no repair after onset".into(),
        },
    }
}

fn ac3(runs: &Runs) -> Outcome {
    let (m, _) = &runs[&("blocker-single-flow", Mode::MultiHop)];
    let (s, _) = &runs[&("blocker-single-flow", Mode::SingleHop)];
    let offered = m.flows[0].rate_bps;
    let multi = m.metrics.throughput_between(1, secs(6), secs(25));
    let pre = s.metrics.throughput_between(1, secs(1), secs(5));
    let post = s.metrics.throughput_between(1, secs(5), secs(25));
    Outcome {
        id: "AC3",
        pass: multi >= 0.95 * offered && post <= 0.7 * pre,
        detail: format!(
            "multi-hop 6-25 s {:.1}% of offer (>= 95%); single-hop {:.1} -> {:.1} Mb/s ({:.1}% drop, >= 30%)",
            100.0 * multi / offered,
            pre / 1e6,
            post / 1e6,
            100.0 * (1.0 - post / pre)
        ),
    }
}

fn p99(r: &RunResult, flow: u32) -> Option<SimTime> {
    r.metrics.delay_percentile(flow, 0.99).ok()
}

fn ac4(runs: &Runs) -> Outcome {
    let (m, _) = &runs[&("blocker-single-flow", Mode::MultiHop)];
    let p = p99(m, 1);
    Outcome {
        id: "AC4",
        pass: p.is_some_and(|p| p < SimTime::from_millis(5)),
        detail: format!("multi-hop p99 {:?} ms (< 5 ms)", p.map(ms)),
    }
}

fn ac5(runs: &Runs) -> Outcome {
    let (m, _) = &runs[&("nlos-relay", Mode::MultiHop)];
    let (s, _) = &runs[&("nlos-relay", Mode::SingleHop)];
    let f = &m.flows[0];
    let single = s.metrics.delivered_bits(f.id);
    let share = m.metrics.throughput_between(f.id, f.start, f.stop) / f.rate_bps;
    let p = p99(m, f.id);
    let parts = [single == 0, share >= 0.90, p.is_some_and(|p| p < SimTime::from_millis(5))];
    Outcome {
        id: "AC5",
        pass: parts.iter().all(|&x| x),
        detail: format!(
            "single-hop bits {single} [{}]; multi-hop {:.1}% of 1.1 Gb/s [{}]; p99 {:?} ms [{}]",
            ok(parts[0]),
            100.0 * share,
            ok(parts[1]),
            p.map(ms),
            ok(parts[2])
        ),
    }
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "not met"
    }
}

fn ac6(runs: &Runs) -> Outcome {
    let (m, _) = &runs[&("blocker-multi-flow", Mode::MultiHop)];
    let (s, _) = &runs[&("blocker-multi-flow", Mode::SingleHop)];
    let mut pass = true;
    let mut parts = Vec::new();
    for f in &m.flows {
        let share = m.metrics.throughput_between(f.id, f.start, f.stop) / f.rate_bps;
        pass &= share >= 0.90;
        parts.push(format!("{}->{} {:.1}%", f.src, f.dst, 100.0 * share));
    }
    let main = m.flows.iter().find(|f| f.src == StaId(5)).unwrap().id;
    let dm = m.metrics.mean_delay(main).ok();
    let ds = s.metrics.mean_delay(main).ok();
    pass &= matches!((dm, ds), (Some(a), Some(b)) if a < b);
    Outcome {
        id: "AC6",
        pass,
        detail: format!(
            "multi-hop delivery {} (>= 90%); 5->1 mean delay {:?} ms multi vs {:?} ms single",
            parts.join(", "),
            dm.map(ms),
            ds.map(ms)
        ),
    }
}

fn ac7() -> Outcome {
    let t0 = Instant::now();
    let (passed, failures) = common::oracle_sweep(2024, 100);
    let elapsed = t0.elapsed();
    Outcome {
        id: "AC7",
        pass: passed == 100 && elapsed < Duration::from_secs(60),
        detail: format!(
            "{passed}/100 random graphs match shortest-path and flooding oracles in {elapsed:?}{}",
            failures.first().map(|f| format!("; first failure: {f}")).unwrap_or_default()
        ),
    }
}

fn ac8() -> Outcome {
    use hopsim::channel::McsTable;
    use hopsim::mac::{on_tx_result, FrameClass, LinkState, MacConfig, TxResult};
    use hopsim::routing::{BreakCause, Outbox, RouteEventKind, Router};

    let table = McsTable::default();
    let cfg = MacConfig::default();
    let breaks_at = |class| {
        let mut l = LinkState::new(StaId(2), 12);
        (1..=20).find(|_| on_tx_result(&mut l, false, class, &table, &cfg) == TxResult::LinkBreak)
    };
    let short = breaks_at(FrameClass::Short);
    let long = breaks_at(FrameClass::Long);

    let mut r = Router::new(StaId(1), [StaId(2)], RoutingConfig::default());
    let mut hello_break = None;
    for k in 1..=5u64 {
        let mut out = Outbox::new();
        r.hello_tick(SimTime::from_millis(100 * k), &mut out);
        let broke = out.events.iter().any(|e| {
            matches!(e, RouteEventKind::LinkBreak { cause: BreakCause::HelloTimeout, .. })
        });
        if broke && hello_break.is_none() {
            hello_break = Some(k);
        }
    }

    let mut r = Router::new(StaId(1), [StaId(2)], RoutingConfig::default());
    let mut out = Outbox::new();
    let idle = r.mcs_trigger(SimTime::ZERO, StaId(2), 0, &mut out);

    let pass = short == Some(7) && long == Some(4) && hello_break == Some(3) && !idle;
    Outcome {
        id: "AC8",
        pass,
        detail: format!(
            "retry break at short {short:?} / long {long:?}; hello break at miss {hello_break:?}; \
             idle-link MCS trigger {idle} (see triggers test target for floor and cooldown cases)"
        ),
    }
}

fn ac9(runs: &Runs) -> Outcome {
    let sc = shipped_scenario("nlos-relay").unwrap();
    let hashes: Vec<u64> = thread::scope(|s| {
        let hs: Vec<_> = (0..5).map(|_| s.spawn(|| simulate(&sc).unwrap().trace_hash)).collect();
        hs.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let repeat_ok = hashes.iter().all(|&h| h == hashes[0]);
    let mut golden_ok = true;
    let mut checked = 0;
    for line in GOLDEN.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()) {
        let f: Vec<&str> = line.split_whitespace().collect();
        let mode: Mode = f[1].parse().unwrap();
        let want = u64::from_str_radix(f[3], 16).unwrap();
        let key = runs.keys().find(|(n, m)| *n == f[0] && *m == mode).copied().unwrap();
        golden_ok &= runs[&key].0.trace_hash == want;
        checked += 1;
    }
    let profile = if cfg!(debug_assertions) { "debug-assertions" } else { "release" };
    Outcome {
        id: "AC9",
        pass: repeat_ok && golden_ok && checked == 6,
        detail: format!(
            "5 repeats identical: {repeat_ok} ({:016x}); {checked} runs match golden hashes recorded from a release build: {golden_ok} (this build: {profile})",
            hashes[0]
        ),
    }
}

fn main() -> ExitCode {
    let t0 = Instant::now();
    let runs = run_all();
    let outcomes = [
        ac1(),
        ac2(&runs),
        ac3(&runs),
        ac4(&runs),
        ac5(&runs),
        ac6(&runs),
        ac7(),
        ac8(),
        ac9(&runs),
    ];
    let mut fatal = false;
    for o in &outcomes {
        let known = KNOWN_SHORTFALLS.contains(&o.id);
        let tag = match (o.pass, known) {
            (true, _) => "PASS",
            (false, true) => "FAIL (known shortfall)",
            (false, false) => "FAIL",
        };
        println!("{} {tag}: {}", o.id, o.detail);
        fatal |= !o.pass && !known;
    }
    let passed = outcomes.iter().filter(|o| o.pass).count();
    println!("acceptance: {passed}/{} criteria met in {:?}", outcomes.len(), t0.elapsed());
    if fatal {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
