//! TR 38.901 large-scale channel formulas: Table 7.4.1-1 path loss,
//! Table 7.4.2-1 LOS probabilities, and the per-class shadowing
//! parameters.
//!
//! All functions are pure; heights in meters, carrier frequency in GHz,
//! output in dB. Out-of-validity geometries clamp to the formula range
//! and report the clamp to the caller.

pub const SPEED_OF_LIGHT_M_S: f64 = 3.0e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioClass {
    UMa,
    UMi,
    InH,
}

impl ScenarioClass {
    pub fn label(&self) -> &'static str {
        match self {
            ScenarioClass::UMa => "UMa",
            ScenarioClass::UMi => "UMi",
            ScenarioClass::InH => "InH",
        }
    }
}

/// Breakpoint distance for the two-slope LOS models. The effective
/// environment height is 1 m for the UE heights in this scenario.
fn breakpoint_distance_m(fc_ghz: f64, h_bs: f64, h_ut: f64) -> f64 {
    let fc_hz = fc_ghz * 1e9;
    4.0 * (h_bs - 1.0).max(0.0) * (h_ut - 1.0).max(0.0) * fc_hz / SPEED_OF_LIGHT_M_S
}

/// Path loss in dB for a link of the given class and LOS state.
///
/// `h_a` and `h_b` are the two endpoint heights; the higher endpoint
/// plays the base-station role of the formulas. Returns the loss and
/// whether the geometry had to be clamped into the validity range.
pub fn path_loss_db(
    class: ScenarioClass,
    los: bool,
    fc_ghz: f64,
    d2d_m: f64,
    h_a: f64,
    h_b: f64,
) -> (f64, bool) {
    let h_bs = h_a.max(h_b);
    let h_ut = h_a.min(h_b);
    match class {
        ScenarioClass::UMa => {
            let (d2d, clamped) = clamp(d2d_m, 10.0, 5000.0);
            let d3d = d3d(d2d, h_bs, h_ut);
            let pl_los = uma_los(fc_ghz, d2d, d3d, h_bs, h_ut);
            if los {
                (pl_los, clamped)
            } else {
                let nl = 13.54 + 39.08 * d3d.log10() + 20.0 * fc_ghz.log10()
                    - 0.6 * (h_ut - 1.5);
                (pl_los.max(nl), clamped)
            }
        }
        ScenarioClass::UMi => {
            let (d2d, clamped) = clamp(d2d_m, 10.0, 5000.0);
            let d3d = d3d(d2d, h_bs, h_ut);
            let pl_los = umi_los(fc_ghz, d2d, d3d, h_bs, h_ut);
            if los {
                (pl_los, clamped)
            } else {
                let nl = 35.3 * d3d.log10() + 22.4 + 21.3 * fc_ghz.log10()
                    - 0.3 * (h_ut - 1.5);
                (pl_los.max(nl), clamped)
            }
        }
        ScenarioClass::InH => {
            let raw_d3d = d3d(d2d_m, h_bs, h_ut);
            let (d3d, clamped) = clamp(raw_d3d, 1.0, 150.0);
            let pl_los = 32.4 + 17.3 * d3d.log10() + 20.0 * fc_ghz.log10();
            if los {
                (pl_los, clamped)
            } else {
                let nl = 38.3 * d3d.log10() + 17.30 + 24.9 * fc_ghz.log10();
                (pl_los.max(nl), clamped)
            }
        }
    }
}

fn d3d(d2d: f64, h_bs: f64, h_ut: f64) -> f64 {
    (d2d * d2d + (h_bs - h_ut) * (h_bs - h_ut)).sqrt()
}

fn clamp(v: f64, lo: f64, hi: f64) -> (f64, bool) {
    if v < lo {
        (lo, true)
    } else if v > hi {
        (hi, true)
    } else {
        (v, false)
    }
}

fn uma_los(fc_ghz: f64, d2d: f64, d3d_m: f64, h_bs: f64, h_ut: f64) -> f64 {
    let d_bp = breakpoint_distance_m(fc_ghz, h_bs, h_ut);
    if d2d <= d_bp {
        28.0 + 22.0 * d3d_m.log10() + 20.0 * fc_ghz.log10()
    } else {
        28.0 + 40.0 * d3d_m.log10() + 20.0 * fc_ghz.log10()
            - 9.0 * (d_bp * d_bp + (h_bs - h_ut) * (h_bs - h_ut)).log10()
    }
}

fn umi_los(fc_ghz: f64, d2d: f64, d3d_m: f64, h_bs: f64, h_ut: f64) -> f64 {
    let d_bp = breakpoint_distance_m(fc_ghz, h_bs, h_ut);
    if d2d <= d_bp {
        32.4 + 21.0 * d3d_m.log10() + 20.0 * fc_ghz.log10()
    } else {
        32.4 + 40.0 * d3d_m.log10() + 20.0 * fc_ghz.log10()
            - 9.5 * (d_bp * d_bp + (h_bs - h_ut) * (h_bs - h_ut)).log10()
    }
}

/// LOS probability as a function of 2D distance. The InH class uses the
/// open-office variant, which fits the short in-bus distances.
pub fn los_probability(class: ScenarioClass, d2d_m: f64, h_ut: f64) -> f64 {
    match class {
        ScenarioClass::UMa => {
            if d2d_m <= 18.0 {
                1.0
            } else {
                let base = 18.0 / d2d_m + (-d2d_m / 63.0).exp() * (1.0 - 18.0 / d2d_m);
                let c = if h_ut <= 13.0 {
                    0.0
                } else {
                    ((h_ut.min(23.0) - 13.0) / 10.0).powf(1.5)
                };
                base * (1.0
                    + c * 1.25 * (d2d_m / 100.0).powi(3) * (-d2d_m / 150.0).exp())
            }
        }
        ScenarioClass::UMi => {
            if d2d_m <= 18.0 {
                1.0
            } else {
                18.0 / d2d_m + (-d2d_m / 36.0).exp() * (1.0 - 18.0 / d2d_m)
            }
        }
        ScenarioClass::InH => {
            if d2d_m <= 5.0 {
                1.0
            } else if d2d_m <= 49.0 {
                (-(d2d_m - 5.0) / 70.8).exp()
            } else {
                (-(d2d_m - 49.0) / 211.7).exp() * 0.54
            }
        }
    }
}

/// Lognormal shadowing standard deviation in dB.
pub fn shadow_sigma_db(class: ScenarioClass, los: bool) -> f64 {
    match (class, los) {
        (ScenarioClass::UMa, true) => 4.0,
        (ScenarioClass::UMa, false) => 6.0,
        (ScenarioClass::UMi, true) => 4.0,
        (ScenarioClass::UMi, false) => 7.82,
        (ScenarioClass::InH, true) => 3.0,
        (ScenarioClass::InH, false) => 8.03,
    }
}

/// Shadowing decorrelation distance in meters.
pub fn shadow_decorrelation_m(class: ScenarioClass, los: bool) -> f64 {
    match (class, los) {
        (ScenarioClass::UMa, true) => 37.0,
        (ScenarioClass::UMa, false) => 50.0,
        (ScenarioClass::UMi, true) => 10.0,
        (ScenarioClass::UMi, false) => 13.0,
        (ScenarioClass::InH, _) => 6.0,
    }
}

/// Distance over which a sampled LOS state persists before being redrawn.
pub fn los_decorrelation_m(class: ScenarioClass) -> f64 {
    match class {
        ScenarioClass::UMa | ScenarioClass::UMi => 50.0,
        ScenarioClass::InH => 10.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn umi_los_probability_is_one_below_breakpoint() {
        assert_eq!(los_probability(ScenarioClass::UMi, 18.0, 1.5), 1.0);
        assert_eq!(los_probability(ScenarioClass::UMi, 5.0, 1.5), 1.0);
        assert!(los_probability(ScenarioClass::UMi, 18.001, 1.5) < 1.0);
    }

    #[test]
    fn los_probability_decreases_with_distance() {
        for class in [ScenarioClass::UMa, ScenarioClass::UMi, ScenarioClass::InH] {
            let mut last = 1.0;
            for d in [1.0, 20.0, 50.0, 100.0, 300.0, 1000.0] {
                let p = los_probability(class, d, 1.5);
                assert!(p <= last + 1e-12, "{class:?} at {d}");
                assert!((0.0..=1.0).contains(&p));
                last = p;
            }
        }
    }

    #[test]
    fn path_loss_monotone_in_distance() {
        for class in [ScenarioClass::UMa, ScenarioClass::UMi, ScenarioClass::InH] {
            for los in [true, false] {
                let mut last = 0.0;
                for i in 1..200 {
                    let d = 10.0 + i as f64 * 5.0;
                    let (pl, _) = path_loss_db(class, los, 28.0, d, 25.0, 1.5);
                    assert!(
                        pl >= last - 1e-9,
                        "{class:?} los={los} non-monotone at d={d}: {pl} < {last}"
                    );
                    last = pl;
                }
            }
        }
    }

    #[test]
    fn nlos_never_below_los() {
        for class in [ScenarioClass::UMa, ScenarioClass::UMi, ScenarioClass::InH] {
            for i in 1..100 {
                let d = 12.0 + i as f64 * 11.0;
                let (los, _) = path_loss_db(class, true, 28.0, d, 25.0, 1.5);
                let (nlos, _) = path_loss_db(class, false, 28.0, d, 25.0, 1.5);
                assert!(nlos >= los - 1e-9, "{class:?} at {d}: {nlos} < {los}");
            }
        }
    }

    #[test]
    fn short_distances_clamp_with_flag() {
        let (_, clamped) = path_loss_db(ScenarioClass::UMa, true, 28.0, 2.0, 25.0, 1.5);
        assert!(clamped);
        let (pl_clamped, _) = path_loss_db(ScenarioClass::UMa, true, 28.0, 2.0, 25.0, 1.5);
        let (pl_min, _) = path_loss_db(ScenarioClass::UMa, true, 28.0, 10.0, 25.0, 1.5);
        assert_eq!(pl_clamped, pl_min);
        // InH clamps on 3D distance
        let (_, clamped) = path_loss_db(ScenarioClass::InH, true, 28.0, 0.3, 2.5, 1.8);
        assert!(clamped);
    }

    #[test]
    fn uma_los_slope_is_22_per_decade_before_breakpoint() {
        // 28 GHz, hBS 25, hUT 1.5: breakpoint = 4*24*0.5*28e9/3e8 = 4480 m
        let (p1, _) = path_loss_db(ScenarioClass::UMa, true, 28.0, 100.0, 25.0, 1.5);
        let (p2, _) = path_loss_db(ScenarioClass::UMa, true, 28.0, 1000.0, 25.0, 1.5);
        let d3 = |d2d: f64| (d2d * d2d + 23.5 * 23.5).sqrt();
        let expected = 22.0 * (d3(1000.0) / d3(100.0)).log10();
        assert!((p2 - p1 - expected).abs() < 1e-9, "slope {}", p2 - p1);
        // far from the height offset, doubling distance costs ~22*log10(2)
        let (q1, _) = path_loss_db(ScenarioClass::UMa, true, 28.0, 1000.0, 25.0, 1.5);
        let (q2, _) = path_loss_db(ScenarioClass::UMa, true, 28.0, 2000.0, 25.0, 1.5);
        assert!((q2 - q1 - 22.0 * 2f64.log10()).abs() < 0.01);
    }

    #[test]
    fn shadow_parameters_cover_all_states() {
        for class in [ScenarioClass::UMa, ScenarioClass::UMi, ScenarioClass::InH] {
            for los in [true, false] {
                assert!(shadow_sigma_db(class, los) > 0.0);
                assert!(shadow_decorrelation_m(class, los) > 0.0);
            }
            assert!(los_decorrelation_m(class) > 0.0);
        }
    }
}
