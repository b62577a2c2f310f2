//! Experiment plans: the arms of the evaluation (regime x deployment x
//! frame pattern), multi-seed execution, per-arm export and the cross-arm
//! comparison table.

use anyhow::{Context, Result};
use miab_sim::config::{Deployment, PatternChoice, Regime, RunConfig};
use miab_sim::engine::Simulation;
use miab_sim::metrics::{self, MetricsBundle, UeClass};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExperimentArm {
    pub regime: Regime,
    pub deployment: Deployment,
    pub pattern: String,
}

impl ExperimentArm {
    pub fn label(&self) -> String {
        format!(
            "{}/{}__{}",
            self.regime.label(),
            self.deployment.label(),
            self.pattern
        )
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentPlan {
    pub arms: Vec<ExperimentArm>,
    pub seeds: Vec<u64>,
    pub duration_ms: u64,
    pub out_root: PathBuf,
    pub fading: bool,
    pub uplink_flows: bool,
}

impl ExperimentPlan {
    /// The default comparison plan: both layouts, the two fiber baselines
    /// on the macro pattern and mIAB under both frame patterns.
    pub fn comparison(out_root: PathBuf, seeds: Vec<u64>, duration_ms: u64) -> Self {
        let mut arms = Vec::new();
        for regime in Regime::ALL {
            for (deployment, pattern) in [
                (Deployment::OnlyMacros, "macro_only"),
                (Deployment::MacrosPicos, "macro_only"),
                (Deployment::Miab, "no_silence"),
                (Deployment::Miab, "with_silence"),
            ] {
                arms.push(ExperimentArm {
                    regime,
                    deployment,
                    pattern: pattern.to_string(),
                });
            }
        }
        Self {
            arms,
            seeds,
            duration_ms,
            out_root,
            fading: true,
            uplink_flows: true,
        }
    }

    pub fn config_for(&self, arm: &ExperimentArm, seed: u64) -> Result<RunConfig> {
        let mut cfg = RunConfig::new(
            arm.regime,
            arm.deployment,
            PatternChoice::parse(&arm.pattern),
        )
        .with_context(|| format!("arm {}", arm.label()))?;
        cfg.duration_ms = self.duration_ms;
        cfg.seed = seed;
        cfg.fading = self.fading;
        cfg.channel.fading_enabled = self.fading;
        cfg.uplink_flows = self.uplink_flows;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reject invalid arm combinations before any run starts.
    pub fn validate(&self) -> Result<()> {
        for arm in &self.arms {
            self.config_for(arm, 1)?;
        }
        Ok(())
    }

    pub fn seed_dir(&self, arm: &ExperimentArm, seed: u64) -> PathBuf {
        self.out_root
            .join(arm.regime.label())
            .join(format!("{}__{}", arm.deployment.label(), arm.pattern))
            .join(format!("seed_{seed}"))
    }

    /// Run every (arm, seed), export per-run outputs, and write the
    /// cross-arm comparison table. Arms and seeds execute in parallel;
    /// each run is seeded independently so the outputs do not depend on
    /// scheduling.
    pub fn run(&self) -> Result<Vec<ArmSummary>> {
        self.validate()?;
        let jobs: Vec<(usize, u64)> = (0..self.arms.len())
            .flat_map(|a| self.seeds.iter().map(move |&s| (a, s)))
            .collect();
        let results: Vec<Result<(usize, u64, MetricsBundle)>> = jobs
            .par_iter()
            .map(|&(arm_idx, seed)| {
                let arm = &self.arms[arm_idx];
                let cfg = self.config_for(arm, seed)?;
                let bundle = Simulation::new(cfg)?.run();
                let dir = self.seed_dir(arm, seed);
                metrics::export(&bundle, &dir)?;
                Ok((arm_idx, seed, bundle))
            })
            .collect();

        let mut by_arm: Vec<Vec<MetricsBundle>> = vec![Vec::new(); self.arms.len()];
        for r in results {
            let (arm_idx, _seed, bundle) = r?;
            by_arm[arm_idx].push(bundle);
        }
        let summaries: Vec<ArmSummary> = self
            .arms
            .iter()
            .zip(by_arm)
            .map(|(arm, mut bundles)| {
                bundles.sort_by_key(|b| b.seed);
                ArmSummary::pooled(arm.clone(), bundles)
            })
            .collect();
        self.write_comparison(&summaries)?;
        Ok(summaries)
    }

    fn write_comparison(&self, summaries: &[ArmSummary]) -> Result<()> {
        fs::create_dir_all(&self.out_root)?;
        let mut s = String::from(
            "regime,deployment,pattern,seeds,median_thr_passenger_bps,median_thr_pedestrian_bps,\
             frac_passengers_above_3p2mbps,p90_latency_passenger_ms,p90_latency_pedestrian_ms,\
             delivered_frac_passenger,delivered_frac_pedestrian\n",
        );
        for a in summaries {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.3},{:.3},{:.6},{},{},{:.6},{:.6}",
                a.arm.regime.label(),
                a.arm.deployment.label(),
                a.arm.pattern,
                a.seeds,
                a.median_thr_passenger_bps,
                a.median_thr_pedestrian_bps,
                a.frac_passengers_above_3p2,
                a.p90_latency_passenger_ms
                    .map(|v| format!("{v:.3}"))
                    .unwrap_or_else(|| "none".into()),
                a.p90_latency_pedestrian_ms
                    .map(|v| format!("{v:.3}"))
                    .unwrap_or_else(|| "none".into()),
                a.delivered_frac_passenger,
                a.delivered_frac_pedestrian,
            );
        }
        let path = self.out_root.join("comparison.csv");
        fs::write(&path, s).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Seed-pooled headline statistics of one arm.
#[derive(Debug, Clone)]
pub struct ArmSummary {
    pub arm: ExperimentArm,
    pub seeds: usize,
    pub median_thr_passenger_bps: f64,
    pub median_thr_pedestrian_bps: f64,
    pub frac_passengers_above_3p2: f64,
    pub p90_latency_passenger_ms: Option<f64>,
    pub p90_latency_pedestrian_ms: Option<f64>,
    pub delivered_frac_passenger: f64,
    pub delivered_frac_pedestrian: f64,
}

impl ArmSummary {
    pub fn pooled(arm: ExperimentArm, bundles: Vec<MetricsBundle>) -> Self {
        let throughputs = |class: UeClass| -> Vec<f64> {
            bundles.iter().flat_map(|b| b.throughputs_bps(class)).collect()
        };
        let latencies = |class: UeClass| -> Vec<f64> {
            bundles
                .iter()
                .flat_map(|b| b.latencies_ms[class.index()].iter().copied())
                .collect()
        };
        let delivered = |class: UeClass| -> f64 {
            let gen: u64 = bundles.iter().map(|b| b.generated_bits[class.index()]).sum();
            let del: u64 = bundles.iter().map(|b| b.delivered_bits[class.index()]).sum();
            if gen == 0 {
                0.0
            } else {
                del as f64 / gen as f64
            }
        };
        let median = |mut v: Vec<f64>| -> f64 {
            if v.is_empty() {
                return 0.0;
            }
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let n = v.len();
            if n % 2 == 1 {
                v[n / 2]
            } else {
                (v[n / 2 - 1] + v[n / 2]) / 2.0
            }
        };
        let p90 = |mut v: Vec<f64>| -> Option<f64> {
            if v.is_empty() {
                return None;
            }
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            Some(metrics::quantile_sorted(&v, 0.9))
        };
        let pass_thr = throughputs(UeClass::Passenger);
        let frac = if pass_thr.is_empty() {
            0.0
        } else {
            pass_thr.iter().filter(|&&t| t > 3.2e6).count() as f64 / pass_thr.len() as f64
        };
        Self {
            arm,
            seeds: bundles.len(),
            median_thr_passenger_bps: median(pass_thr),
            median_thr_pedestrian_bps: median(throughputs(UeClass::Pedestrian)),
            frac_passengers_above_3p2: frac,
            p90_latency_passenger_ms: p90(latencies(UeClass::Passenger)),
            p90_latency_pedestrian_ms: p90(latencies(UeClass::Pedestrian)),
            delivered_frac_passenger: delivered(UeClass::Passenger),
            delivered_frac_pedestrian: delivered(UeClass::Pedestrian),
        }
    }
}

/// Run one configuration and export its outputs into `dir`.
pub fn run_single(cfg: RunConfig, dir: &Path) -> Result<MetricsBundle> {
    let bundle = Simulation::new(cfg)?.run();
    metrics::export(&bundle, dir)?;
    Ok(bundle)
}
