use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use hopsim::artifacts::{compare, run_scenario, sweep, Summary};
use hopsim::scenario::{resolve_scenario, Mode, Scenario, SHIPPED};
use hopsim::sim::SimTime;

#[derive(Parser)]
#[command(name = "hopsim", version, about = "Indoor 60 GHz multi-hop network simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its artifacts.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        mode: Option<Mode>,
        /// Run this many consecutive seeds concurrently, starting at the scenario seed.
        #[arg(long, value_name = "N")]
        sweep: Option<u64>,
        /// Write cumulative instead of binned throughput.
        #[arg(long)]
        cumulative: bool,
    },
    /// Run single-hop and multi-hop side by side under the same seed.
    Compare {
        #[command(flatten)]
        common: Common,
    },
    /// Check scenario files without running them.
    Validate {
        #[arg(required = true)]
        scenarios: Vec<String>,
    },
    /// Print the names of the shipped scenarios.
    ListScenarios,
}

#[derive(Args)]
struct Common {
    /// Shipped scenario name or path to a scenario file.
    scenario: String,
    #[arg(long)]
    seed: Option<u64>,
    /// Override the simulated duration, in seconds.
    #[arg(long, value_name = "SECONDS")]
    duration: Option<f64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

fn load(c: &Common) -> Result<Scenario, Failure> {
    let mut sc = resolve_scenario(&c.scenario)
        .with_context(|| c.scenario.clone())
        .map_err(Failure::Invalid)?;
    if let Some(seed) = c.seed {
        sc.seed = seed;
    }
    if let Some(d) = c.duration {
        sc.duration = SimTime::from_secs_f64(d)
            .ok_or_else(|| Failure::Invalid(anyhow::anyhow!("invalid duration {d}")))?;
    }
    sc.validate()
        .with_context(|| c.scenario.clone())
        .map_err(Failure::Invalid)?;
    Ok(sc)
}

fn print_summary(s: &Summary) {
    println!(
        "{} [{}] seed={} trace={} events={}",
        s.scenario, s.mode, s.seed, s.trace_hash, s.events_processed
    );
    for f in &s.flows {
        let ms = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
        println!(
            "  flow {} {}->{}: {:.1}/{:.1} Mb/s delivered={} dropped={} p50={} p99={} mean={} ms",
            f.flow_id,
            f.src,
            f.dst,
            f.mean_throughput_bps / 1e6,
            f.offered_bps / 1e6,
            f.delivered,
            f.dropped,
            ms(f.delay_p50_ms),
            ms(f.delay_p99_ms),
            ms(f.delay_mean_ms),
        );
    }
    if let Some(r) = &s.repair {
        println!("  repair at sta {}: {:.3} ms after onset", r.sta, r.total_ms);
    }
}

fn execute(cmd: Cmd) -> Result<(), Failure> {
    match cmd {
        Cmd::Run {
            common,
            mode,
            sweep: n,
            cumulative,
        } => {
            let mut sc = load(&common)?;
            if let Some(m) = mode {
                sc = sc.with_mode(m);
            }
            sc.metrics.cumulative |= cumulative;
            match n {
                Some(n) if n > 1 => {
                    let seeds: Vec<u64> = (0..n).map(|k| sc.seed.wrapping_add(k)).collect();
                    let arts = sweep(&sc, &seeds, &common.out_dir)
                        .context("sweep failed")
                        .map_err(Failure::Runtime)?;
                    for a in &arts {
                        print_summary(&a.summary);
                    }
                }
                _ => {
                    let (art, _) = run_scenario(&sc, &common.out_dir)
                        .context("run failed")
                        .map_err(Failure::Runtime)?;
                    print_summary(&art.summary);
                    println!("artifacts in {}", art.dir.display());
                }
            }
        }
        Cmd::Compare { common } => {
            let sc = load(&common)?;
            let c = compare(&sc, &common.out_dir)
                .context("compare failed")
                .map_err(Failure::Runtime)?;
            print_summary(&c.multi_hop.summary);
            print_summary(&c.single_hop.summary);
            println!("tables in {}", common.out_dir.display());
        }
        Cmd::Validate { scenarios } => {
            let mut bad = 0;
            for s in &scenarios {
                match resolve_scenario(s) {
                    Ok(sc) => println!("{s}: ok ({} nodes, {} flows)", sc.nodes.len(), sc.flows.len()),
                    Err(e) => {
                        bad += 1;
                        eprintln!("{s}: {:#}", anyhow::Error::from(e));
                    }
                }
            }
            if bad > 0 {
                return Err(Failure::Invalid(anyhow::anyhow!(
                    "{bad} of {} scenarios invalid",
                    scenarios.len()
                )));
            }
        }
        Cmd::ListScenarios => {
            for (name, _) in SHIPPED {
                println!("{name}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
