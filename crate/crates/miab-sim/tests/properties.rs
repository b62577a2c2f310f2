//! Property tests for the structural invariants.

use miab_sim::engine::{capped_weighted_split, weighted_split};
use miab_sim::frame::{FramePattern, LinkRole, SlotDirection};
use miab_sim::metrics::cdf;
use miab_sim::radio::{select_mcs, McsTable, OllaState};
use num_rational::Ratio;
use proptest::prelude::*;

fn direction() -> impl Strategy<Value = SlotDirection> {
    prop_oneof![
        Just(SlotDirection::Downlink),
        Just(SlotDirection::Uplink),
        Just(SlotDirection::SpecialDownlink),
        Just(SlotDirection::Silent),
    ]
}

fn pattern(max_len: usize) -> impl Strategy<Value = FramePattern> {
    (1..=max_len).prop_flat_map(|len| {
        (
            prop::collection::vec(direction(), len),
            prop::collection::vec(direction(), len),
            prop::collection::vec(direction(), len),
        )
            .prop_map(|(d, b, a)| FramePattern::new(d, b, a).unwrap())
    })
}

proptest! {
    #[test]
    fn usage_fractions_sum_and_stay_bounded(p in pattern(24)) {
        let usage = p.compute_usage();
        for role in LinkRole::ALL {
            let r = usage.role(role);
            prop_assert_eq!(r.dl + r.ul, r.total);
            prop_assert!(r.total <= Ratio::new(1, 1));
            // exact rational: total equals active slots over length
            let active = p.row(role).iter().filter(|d| d.is_active()).count() as u32;
            prop_assert_eq!(r.total, Ratio::new(active, p.len() as u32));
        }
    }

    #[test]
    fn silent_access_always_avoids_case01(p in pattern(24)) {
        let cases = p.case_analysis();
        for (slot, analysis) in cases.iter().enumerate() {
            let access = p.row(LinkRole::MiabAccess)[slot];
            let donor = p.row(LinkRole::DonorAccess)[slot];
            use miab_sim::frame::{CaseStatus, CrossLinkCase};
            if access == SlotDirection::Silent {
                prop_assert_eq!(
                    analysis.status(CrossLinkCase::Case01),
                    CaseStatus::AvoidedBySilence
                );
            }
            if donor == SlotDirection::Silent {
                prop_assert_eq!(
                    analysis.status(CrossLinkCase::Case03),
                    CaseStatus::AvoidedBySilence
                );
            }
        }
    }

    #[test]
    fn mcs_selection_is_monotone(a in -40.0f64..40.0, b in -40.0f64..40.0) {
        let table = McsTable::bundled();
        let olla = OllaState::new();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let d_lo = select_mcs(lo, &olla, &table);
        let d_hi = select_mcs(hi, &olla, &table);
        prop_assert!(d_hi.index >= d_lo.index);
    }

    #[test]
    fn rb_splits_conserve_blocks(
        weights in prop::collection::vec(0usize..8, 1..20),
        needs in prop::collection::vec(1usize..100, 1..20),
    ) {
        let n = weights.len().min(needs.len());
        let weights = &weights[..n];
        let needs = &needs[..n];
        if weights.iter().sum::<usize>() > 0 {
            let plain = weighted_split(66, weights);
            prop_assert_eq!(plain.iter().sum::<usize>(), 66);
            let capped = capped_weighted_split(66, weights, needs);
            prop_assert!(capped.iter().sum::<usize>() <= 66);
            for (i, &s) in capped.iter().enumerate() {
                prop_assert!(s <= needs[i]);
                if weights[i] == 0 {
                    prop_assert_eq!(s, 0);
                }
            }
        }
    }

    #[test]
    fn cdf_is_monotone_and_bounded(
        mut values in prop::collection::vec(-1.0e6f64..1.0e6, 1..200),
        grid in prop::collection::vec(-1.5e6f64..1.5e6, 1..50),
    ) {
        values.iter_mut().for_each(|v| *v = v.trunc());
        let mut grid = grid;
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let out = cdf(&values, &grid).unwrap();
        let mut last = 0.0;
        for (_, f) in out {
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!(f >= last);
            last = f;
        }
    }
}
