//! Command-line front end: run single arms or the full comparison plan,
//! dump scenes, channels and trajectories, and run the built-in
//! validation suites.

mod plan;
mod validate;

use anyhow::{bail, Context, Result};
use clap::Parser;
use miab_sim::config::{Deployment, PatternChoice, Regime, RunConfig};
use miab_sim::engine::Simulation;
use plan::ExperimentPlan;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;

#[derive(Parser, Debug)]
#[command(
    name = "miab",
    about = "System-level simulator for mobile IAB networks under TDD frame patterns"
)]
struct Cli {
    /// Run-config file (key = value format)
    #[arg(long)]
    config: Option<PathBuf>,

    /// Layout regime: not_limited | limited
    #[arg(long)]
    regime: Option<String>,

    /// Deployment: only_macros | macros_picos | miab
    #[arg(long)]
    deployment: Option<String>,

    /// Frame pattern: builtin name (no_silence, with_silence, macro_only)
    /// or a pattern file path
    #[arg(long)]
    pattern: Option<String>,

    /// Seeds per arm (seed values are 1..=N)
    #[arg(long, default_value_t = 10)]
    seeds: u64,

    /// Base seed for single runs
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Simulated duration per run in milliseconds
    #[arg(long)]
    duration_ms: Option<u64>,

    /// Use the full 8000 ms duration
    #[arg(long, default_value_t = false)]
    full: bool,

    /// Output directory
    #[arg(long, default_value = "out")]
    out: PathBuf,

    /// Disable the block-fading term
    #[arg(long, default_value_t = false)]
    no_fading: bool,

    /// Disable uplink mirror flows
    #[arg(long, default_value_t = false)]
    no_uplink: bool,

    /// Write node positions for the configured scene and exit
    #[arg(long, default_value_t = false)]
    dump_scene: bool,

    /// Run this many slots, then write the channel link table and exit
    #[arg(long)]
    dump_channel: Option<u64>,

    /// Write entity trajectories for this many slots and exit
    #[arg(long)]
    dump_trajectories: Option<u64>,

    /// Run a validation suite: frame | channel | mobility | olla | all
    #[arg(long)]
    validate: Option<String>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();

    if let Some(suite) = &cli.validate {
        return run_validation(suite);
    }

    let duration_ms = cli
        .duration_ms
        .unwrap_or(if cli.full { 8000 } else { 2000 });

    let single_arm = cli.regime.is_some() || cli.deployment.is_some() || cli.pattern.is_some();
    if cli.config.is_some() || single_arm {
        let mut cfg = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                RunConfig::parse_file(&text)?
            }
            None => {
                let regime = Regime::parse(cli.regime.as_deref().unwrap_or("not_limited"))?;
                let deployment =
                    Deployment::parse(cli.deployment.as_deref().unwrap_or("only_macros"))?;
                let pattern = PatternChoice::parse(cli.pattern.as_deref().unwrap_or(
                    if deployment == Deployment::Miab {
                        "with_silence"
                    } else {
                        "macro_only"
                    },
                ));
                RunConfig::new(regime, deployment, pattern)?
            }
        };
        if cli.duration_ms.is_some() || cli.full {
            cfg.duration_ms = duration_ms;
        }
        if cli.config.is_none() {
            cfg.seed = cli.seed;
        }
        if cli.no_fading {
            cfg.fading = false;
            cfg.channel.fading_enabled = false;
        }
        if cli.no_uplink {
            cfg.uplink_flows = false;
        }
        cfg.validate()?;

        if cli.dump_scene {
            return dump_scene(cfg, &cli.out);
        }
        if let Some(slots) = cli.dump_channel {
            return dump_channel(cfg, slots, &cli.out);
        }
        if let Some(slots) = cli.dump_trajectories {
            return dump_trajectories(cfg, slots, &cli.out);
        }

        let dir = cli.out.join(format!(
            "{}/{}__{}/seed_{}",
            cfg.regime.label(),
            cfg.deployment.label(),
            cfg.pattern_name,
            cfg.seed
        ));
        let bundle = plan::run_single(cfg, &dir)?;
        println!(
            "run complete: {} slots, outputs in {}",
            bundle.duration_slots,
            dir.display()
        );
        return Ok(());
    }

    // default: the full comparison plan
    let seeds: Vec<u64> = (1..=cli.seeds).collect();
    let plan = ExperimentPlan::comparison(cli.out.clone(), seeds, duration_ms);
    let started = std::time::Instant::now();
    let summaries = plan.run()?;
    println!(
        "{} arms x {} seeds in {:.1}s; comparison table: {}",
        plan.arms.len(),
        plan.seeds.len(),
        started.elapsed().as_secs_f64(),
        cli.out.join("comparison.csv").display()
    );
    for s in &summaries {
        println!(
            "  {:40} median thr pass {:>10.0} ped {:>10.0} | delivered pass {:.3} ped {:.3}",
            s.arm.label(),
            s.median_thr_passenger_bps,
            s.median_thr_pedestrian_bps,
            s.delivered_frac_passenger,
            s.delivered_frac_pedestrian,
        );
    }
    Ok(())
}

fn run_validation(suite: &str) -> Result<()> {
    let suites: Vec<&str> = if suite == "all" {
        vec!["frame", "channel", "mobility", "olla"]
    } else {
        vec![suite]
    };
    let mut all_ok = true;
    for s in suites {
        let Some(results) = validate::run_suite(s) else {
            bail!("unknown validation suite {s:?} (frame, channel, mobility, olla, all)");
        };
        all_ok &= validate::print_results(s, &results);
    }
    if !all_ok {
        std::process::exit(1);
    }
    Ok(())
}

fn dump_scene(cfg: RunConfig, out: &PathBuf) -> Result<()> {
    let sim = Simulation::new(cfg)?;
    fs::create_dir_all(out)?;
    let path = out.join("scene.csv");
    let mut buf = Vec::new();
    sim.scene().dump_csv(&mut buf)?;
    fs::write(&path, buf)?;
    println!("scene written to {}", path.display());
    Ok(())
}

fn dump_channel(cfg: RunConfig, slots: u64, out: &PathBuf) -> Result<()> {
    let mut sim = Simulation::new(cfg)?;
    for _ in 0..slots {
        sim.step();
    }
    fs::create_dir_all(out)?;
    let path = out.join("channel.csv");
    let mut buf = Vec::new();
    sim.dump_channel_csv(&mut buf)?;
    fs::write(&path, buf)?;
    println!("channel table after {slots} slots written to {}", path.display());
    Ok(())
}

fn dump_trajectories(cfg: RunConfig, slots: u64, out: &PathBuf) -> Result<()> {
    let mut sim = Simulation::new(cfg)?;
    fs::create_dir_all(out)?;
    let path = out.join("trajectories.csv");
    let mut file = fs::File::create(&path)?;
    writeln!(file, "slot,entity,x,y,heading_deg")?;
    for _ in 0..slots {
        let slot = sim.current_slot();
        for row in sim.trajectory_snapshot() {
            writeln!(
                file,
                "{},{},{:.3},{:.3},{:.1}",
                slot, row.entity, row.x, row.y, row.heading_deg
            )?;
        }
        sim.step();
    }
    println!("{slots} slots of trajectories written to {}", path.display());
    Ok(())
}
