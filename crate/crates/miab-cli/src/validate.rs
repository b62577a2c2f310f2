//! Built-in validation suites with machine-readable output. The channel
//! suite carries its own independently written evaluation of the path
//! loss and LOS-probability formulas, so the library implementation is
//! checked against a second transcription rather than against itself.

use miab_sim::channel::pathloss::{self, ScenarioClass};
use miab_sim::frame::{
    self, CaseStatus, FramePattern, LinkRole, RoleUsage, SlotCases, SlotDirection,
};
use miab_sim::mobility::{choose_turn, TurnOutcome};
use miab_sim::radio::{select_mcs, McsTable, OllaState};
use miab_sim::rng::substream;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub fn run_suite(suite: &str) -> Option<Vec<CheckResult>> {
    match suite {
        "frame" => Some(validate_frame()),
        "channel" => Some(validate_channel()),
        "mobility" => Some(validate_mobility()),
        "olla" => Some(validate_olla()),
        _ => None,
    }
}

pub fn print_results(suite: &str, results: &[CheckResult]) -> bool {
    let mut all_ok = true;
    for r in results {
        println!(
            "suite={} check={} status={} detail={}",
            suite,
            r.name,
            if r.passed { "PASS" } else { "FAIL" },
            r.detail
        );
        all_ok &= r.passed;
    }
    all_ok
}

fn check(name: &str, passed: bool, detail: String) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        detail,
    }
}

fn validate_frame() -> Vec<CheckResult> {
    let mut out = Vec::new();
    let patterns = frame::builtin_patterns();

    let expect = [
        ("no_silence", [(50, 50, 100); 3]),
        (
            "with_silence",
            [(40, 30, 70), (30, 30, 60), (40, 30, 70)],
        ),
        ("macro_only", [(50, 50, 100), (0, 0, 0), (0, 0, 0)]),
    ];
    for (name, rows) in expect {
        let usage = patterns[name].compute_usage();
        let ok = LinkRole::ALL.iter().zip(rows).all(|(role, (dl, ul, total))| {
            usage.role(*role) == RoleUsage::percent(dl, ul, total)
        });
        out.push(check(
            &format!("usage_{name}"),
            ok,
            format!("exact rational usage rows for {name}"),
        ));
    }

    for name in ["no_silence", "with_silence"] {
        let ok = patterns[name].is_self_interference_free();
        out.push(check(
            &format!("self_interference_{name}"),
            ok,
            "no slot mixes MT and DU transmit/receive actions".into(),
        ));
    }

    // exhaustive 4^3 oracle for the cross-link case analyzer
    let dirs = [
        SlotDirection::Downlink,
        SlotDirection::Uplink,
        SlotDirection::SpecialDownlink,
        SlotDirection::Silent,
    ];
    let mut mismatches = 0u32;
    for donor in dirs {
        for backhaul in dirs {
            for access in dirs {
                let pattern =
                    FramePattern::new(vec![donor], vec![backhaul], vec![access]).unwrap();
                let analysis = pattern.case_analysis()[0];
                let oracle = oracle_cases(donor, access);
                if analysis != oracle {
                    mismatches += 1;
                }
            }
        }
    }
    out.push(check(
        "case_analysis_oracle",
        mismatches == 0,
        format!("{mismatches} mismatches over 64 direction triples"),
    ));
    out
}

/// Independent re-derivation of the per-slot case analysis.
fn oracle_cases(donor: SlotDirection, access: SlotDirection) -> SlotCases {
    let dl = |d: SlotDirection| matches!(d, SlotDirection::Downlink | SlotDirection::SpecialDownlink);
    let ul = |d: SlotDirection| d == SlotDirection::Uplink;
    let silent = |d: SlotDirection| d == SlotDirection::Silent;
    let status = |possible: bool| {
        if possible {
            CaseStatus::Possible
        } else if silent(donor) || silent(access) {
            CaseStatus::AvoidedBySilence
        } else {
            CaseStatus::AvoidedByAlignment
        }
    };
    SlotCases {
        statuses: [
            status(dl(donor) && ul(access)),
            status(dl(donor) && ul(access)),
            status(ul(donor) && dl(access)),
            status(ul(donor) && dl(access)),
        ],
    }
}

/// Second transcription of the large-scale formulas, written against the
/// published tables without reference to the library code.
mod oracle {
    pub fn d3d(d2d: f64, h1: f64, h2: f64) -> f64 {
        (d2d.powi(2) + (h1 - h2).powi(2)).sqrt()
    }

    fn dbp(fc_ghz: f64, hb: f64, hu: f64) -> f64 {
        4.0 * (hb - 1.0) * (hu - 1.0) * (fc_ghz * 1e9) / 3.0e8
    }

    pub fn uma(los: bool, fc: f64, d2d: f64, hb: f64, hu: f64) -> f64 {
        let d3 = d3d(d2d, hb, hu);
        let los_pl = if d2d <= dbp(fc, hb, hu) {
            28.0 + 22.0 * d3.log10() + 20.0 * fc.log10()
        } else {
            let bp = dbp(fc, hb, hu);
            28.0 + 40.0 * d3.log10() + 20.0 * fc.log10()
                - 9.0 * (bp.powi(2) + (hb - hu).powi(2)).log10()
        };
        if los {
            los_pl
        } else {
            los_pl.max(13.54 + 39.08 * d3.log10() + 20.0 * fc.log10() - 0.6 * (hu - 1.5))
        }
    }

    pub fn umi(los: bool, fc: f64, d2d: f64, hb: f64, hu: f64) -> f64 {
        let d3 = d3d(d2d, hb, hu);
        let los_pl = if d2d <= dbp(fc, hb, hu) {
            32.4 + 21.0 * d3.log10() + 20.0 * fc.log10()
        } else {
            let bp = dbp(fc, hb, hu);
            32.4 + 40.0 * d3.log10() + 20.0 * fc.log10()
                - 9.5 * (bp.powi(2) + (hb - hu).powi(2)).log10()
        };
        if los {
            los_pl
        } else {
            los_pl.max(35.3 * d3.log10() + 22.4 + 21.3 * fc.log10() - 0.3 * (hu - 1.5))
        }
    }

    pub fn inh(los: bool, fc: f64, d3: f64) -> f64 {
        let los_pl = 32.4 + 17.3 * d3.log10() + 20.0 * fc.log10();
        if los {
            los_pl
        } else {
            los_pl.max(17.30 + 38.3 * d3.log10() + 24.9 * fc.log10())
        }
    }

    pub fn p_los_uma(d2d: f64, hu: f64) -> f64 {
        if d2d <= 18.0 {
            return 1.0;
        }
        let base = 18.0 / d2d + (-d2d / 63.0).exp() * (1.0 - 18.0 / d2d);
        let c = if hu <= 13.0 {
            0.0
        } else {
            ((hu.min(23.0) - 13.0) / 10.0).powf(1.5)
        };
        base * (1.0 + c * 1.25 * (d2d / 100.0).powi(3) * (-d2d / 150.0).exp())
    }

    pub fn p_los_umi(d2d: f64) -> f64 {
        if d2d <= 18.0 {
            1.0
        } else {
            18.0 / d2d + (-d2d / 36.0).exp() * (1.0 - 18.0 / d2d)
        }
    }

    pub fn p_los_inh(d2d: f64) -> f64 {
        if d2d <= 5.0 {
            1.0
        } else if d2d <= 49.0 {
            (-(d2d - 5.0) / 70.8).exp()
        } else {
            0.54 * (-(d2d - 49.0) / 211.7).exp()
        }
    }
}

fn validate_channel() -> Vec<CheckResult> {
    let mut rng = substream(20240, "channel-validate", &[]);
    let mut max_pl_err: f64 = 0.0;
    let mut max_los_err: f64 = 0.0;
    let fc = 28.0;
    for _ in 0..1000 {
        let class = match rng.gen_range(0..3) {
            0 => ScenarioClass::UMa,
            1 => ScenarioClass::UMi,
            _ => ScenarioClass::InH,
        };
        let los = rng.gen_bool(0.5);
        let (d2d, hb, hu) = match class {
            ScenarioClass::UMa => (
                rng.gen_range(10.0..5000.0),
                25.0,
                rng.gen_range(1.5..22.5),
            ),
            ScenarioClass::UMi => (
                rng.gen_range(10.0..5000.0),
                10.0,
                rng.gen_range(1.5..10.0),
            ),
            ScenarioClass::InH => (rng.gen_range(1.0..100.0), 3.0, 1.5),
        };
        let (got, _) = pathloss::path_loss_db(class, los, fc, d2d, hb, hu);
        let want = match class {
            ScenarioClass::UMa => oracle::uma(los, fc, d2d, hb, hu),
            ScenarioClass::UMi => oracle::umi(los, fc, d2d, hb, hu),
            ScenarioClass::InH => oracle::inh(los, fc, oracle::d3d(d2d, hb, hu)),
        };
        max_pl_err = max_pl_err.max((got - want).abs());

        let got_p = pathloss::los_probability(class, d2d, hu);
        let want_p = match class {
            ScenarioClass::UMa => oracle::p_los_uma(d2d, hu),
            ScenarioClass::UMi => oracle::p_los_umi(d2d),
            ScenarioClass::InH => oracle::p_los_inh(d2d),
        };
        max_los_err = max_los_err.max((got_p - want_p).abs());
    }
    vec![
        check(
            "path_loss_oracle",
            max_pl_err <= 1e-9,
            format!("max |impl - oracle| = {max_pl_err:.3e} dB over 1000 geometries"),
        ),
        check(
            "los_probability_oracle",
            max_los_err <= 1e-12,
            format!("max |impl - oracle| = {max_los_err:.3e} over 1000 geometries"),
        ),
    ]
}

fn validate_mobility() -> Vec<CheckResult> {
    let mut rng = substream(20240, "mobility-validate", &[]);
    let n = 10_000;
    let mut counts = [0u32; 3];
    for _ in 0..n {
        match choose_turn(true, true, true, &mut rng) {
            TurnOutcome::Straight => counts[0] += 1,
            TurnOutcome::Left => counts[1] += 1,
            TurnOutcome::Right => counts[2] += 1,
            TurnOutcome::UTurn => {}
        }
    }
    let f = |c: u32| c as f64 / n as f64;
    let errs = [
        (f(counts[0]) - 0.6).abs(),
        (f(counts[1]) - 0.2).abs(),
        (f(counts[2]) - 0.2).abs(),
    ];
    let max = errs.iter().cloned().fold(0.0f64, f64::max);
    vec![check(
        "turn_probabilities",
        max <= 0.03,
        format!(
            "empirical (straight,left,right)=({:.3},{:.3},{:.3}) over {n} events",
            f(counts[0]),
            f(counts[1]),
            f(counts[2])
        ),
    )]
}

fn validate_olla() -> Vec<CheckResult> {
    let table = McsTable::bundled();
    let mut olla = OllaState::new();
    let mut rng = substream(20240, "olla-validate", &[]);
    let base = 12.0;
    let sigma = 2.0;
    let mut realized: f64 = base;
    let (mut errors, mut counted) = (0u32, 0u32);
    let n = 200_000;
    let warmup = 2_000;
    for i in 0..(n + warmup) {
        let estimate = realized;
        let jitter: f64 = StandardNormal.sample(&mut rng);
        realized = base + sigma * jitter;
        let mcs = select_mcs(estimate, &olla, &table);
        let ok = realized >= table.min_sinr_db(mcs.index);
        olla.update(ok);
        if i >= warmup {
            counted += 1;
            if !ok {
                errors += 1;
            }
        }
    }
    let bler = errors as f64 / counted as f64;
    vec![check(
        "bler_fixed_point",
        (0.07..=0.11).contains(&bler),
        format!("long-run BLER {bler:.4} on a jittering synthetic link (target 0.0909)"),
    )]
}
