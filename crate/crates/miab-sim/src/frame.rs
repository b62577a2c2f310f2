//! TDD frame patterns for the three link roles of an IAB deployment:
//! donor access, mIAB backhaul, and mIAB access.
//!
//! A pattern is a cyclic assignment of slot directions per role. Silent
//! slots disable a role entirely, which is the mechanism used to avoid
//! cross-link interference between donor access and mIAB access when the
//! two run opposite directions in the same slot. Usage statistics are
//! exact rationals so table comparisons are equality tests.

use num_rational::Ratio;
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

pub type Fraction = Ratio<u32>;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame pattern must have at least one slot")]
    Empty,
    #[error("role rows have different lengths: donor {donor}, backhaul {backhaul}, access {access}")]
    LengthMismatch {
        donor: usize,
        backhaul: usize,
        access: usize,
    },
    #[error("unknown slot token {0:?} (expected DL, UL, S or -)")]
    BadToken(String),
    #[error("pattern file must have 1 or 3 non-empty rows, found {0}")]
    BadRowCount(usize),
    #[error("unknown builtin pattern {0:?}")]
    UnknownBuiltin(String),
}

/// Direction of one slot for one link role.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SlotDirection {
    Downlink,
    Uplink,
    /// Special slot carrying downlink data; counted as downlink for
    /// usage and scheduling.
    SpecialDownlink,
    /// Role disabled this slot: no transmission or reception.
    Silent,
}

impl SlotDirection {
    pub fn counts_as_downlink(self) -> bool {
        matches!(self, SlotDirection::Downlink | SlotDirection::SpecialDownlink)
    }

    pub fn is_uplink(self) -> bool {
        self == SlotDirection::Uplink
    }

    pub fn is_active(self) -> bool {
        self != SlotDirection::Silent
    }

    pub fn token(self) -> &'static str {
        match self {
            SlotDirection::Downlink => "DL",
            SlotDirection::Uplink => "UL",
            SlotDirection::SpecialDownlink => "S",
            SlotDirection::Silent => "-",
        }
    }

    pub fn parse_token(tok: &str) -> Result<Self, FrameError> {
        match tok.trim() {
            "DL" => Ok(SlotDirection::Downlink),
            "UL" => Ok(SlotDirection::Uplink),
            "S" => Ok(SlotDirection::SpecialDownlink),
            "-" => Ok(SlotDirection::Silent),
            other => Err(FrameError::BadToken(other.to_string())),
        }
    }
}

impl fmt::Display for SlotDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// The three link roles a pattern row can belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinkRole {
    DonorAccess,
    Backhaul,
    MiabAccess,
}

impl LinkRole {
    pub const ALL: [LinkRole; 3] = [LinkRole::DonorAccess, LinkRole::Backhaul, LinkRole::MiabAccess];
}

/// Cyclic per-role slot-direction sequences. All rows share one length.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePattern {
    donor_access: Vec<SlotDirection>,
    backhaul: Vec<SlotDirection>,
    miab_access: Vec<SlotDirection>,
}

impl FramePattern {
    pub fn new(
        donor_access: Vec<SlotDirection>,
        backhaul: Vec<SlotDirection>,
        miab_access: Vec<SlotDirection>,
    ) -> Result<Self, FrameError> {
        if donor_access.is_empty() {
            return Err(FrameError::Empty);
        }
        if donor_access.len() != backhaul.len() || donor_access.len() != miab_access.len() {
            return Err(FrameError::LengthMismatch {
                donor: donor_access.len(),
                backhaul: backhaul.len(),
                access: miab_access.len(),
            });
        }
        Ok(Self {
            donor_access,
            backhaul,
            miab_access,
        })
    }

    /// A pattern with only a donor-access row; the mIAB rows are silent.
    pub fn donor_only(donor_access: Vec<SlotDirection>) -> Result<Self, FrameError> {
        let silent = vec![SlotDirection::Silent; donor_access.len()];
        Self::new(donor_access, silent.clone(), silent)
    }

    pub fn len(&self) -> usize {
        self.donor_access.len()
    }

    pub fn is_empty(&self) -> bool {
        self.donor_access.is_empty()
    }

    pub fn row(&self, role: LinkRole) -> &[SlotDirection] {
        match role {
            LinkRole::DonorAccess => &self.donor_access,
            LinkRole::Backhaul => &self.backhaul,
            LinkRole::MiabAccess => &self.miab_access,
        }
    }

    /// Direction for `role` at absolute slot index `slot` (cyclic).
    pub fn direction(&self, role: LinkRole, slot: u64) -> SlotDirection {
        self.row(role)[(slot % self.len() as u64) as usize]
    }

    /// Exact DL/UL/total usage fractions per role over one cycle.
    /// SpecialDownlink counts as downlink; Silent counts as nothing.
    pub fn compute_usage(&self) -> UsageReport {
        let usage = |row: &[SlotDirection]| {
            let len = row.len() as u32;
            let dl = row.iter().filter(|d| d.counts_as_downlink()).count() as u32;
            let ul = row.iter().filter(|d| d.is_uplink()).count() as u32;
            RoleUsage {
                dl: Fraction::new(dl, len),
                ul: Fraction::new(ul, len),
                total: Fraction::new(dl + ul, len),
            }
        };
        UsageReport {
            donor_access: usage(&self.donor_access),
            backhaul: usage(&self.backhaul),
            miab_access: usage(&self.miab_access),
        }
    }

    /// Per-slot simultaneous operation of the mIAB node (its MT on the
    /// backhaul row, its DU on the access row).
    pub fn self_interference(&self) -> Vec<SimultaneousMode> {
        (0..self.len())
            .map(|i| SimultaneousMode::of(self.backhaul[i], self.miab_access[i]))
            .collect()
    }

    /// True when no slot puts the mIAB node's MT and DU in opposite
    /// transmit/receive actions.
    pub fn is_self_interference_free(&self) -> bool {
        self.self_interference()
            .iter()
            .all(|m| !m.is_self_interference())
    }

    /// Per-slot status of the four cross-link interference cases between
    /// donor access and mIAB access.
    pub fn case_analysis(&self) -> Vec<SlotCases> {
        (0..self.len())
            .map(|i| SlotCases::of(self.donor_access[i], self.miab_access[i]))
            .collect()
    }

    /// Slots where donor access and backhaul are both active with opposite
    /// directions, which would require the donor to transmit and receive
    /// simultaneously on one carrier.
    pub fn donor_duplex_conflicts(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| {
                let a = self.donor_access[i];
                let b = self.backhaul[i];
                a.is_active() && b.is_active() && a.counts_as_downlink() != b.counts_as_downlink()
            })
            .collect()
    }

    /// Parse the plain-text pattern format: one role per line (donor
    /// access, backhaul, mIAB access), comma-separated tokens from
    /// {DL, UL, S, -}. A single-line file is a donor-only pattern.
    pub fn parse(text: &str) -> Result<Self, FrameError> {
        let rows: Vec<Vec<SlotDirection>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|line| {
                line.split(',')
                    .map(SlotDirection::parse_token)
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<_, _>>()?;
        match rows.len() {
            1 => Self::donor_only(rows.into_iter().next().unwrap()),
            3 => {
                let mut it = rows.into_iter();
                Self::new(it.next().unwrap(), it.next().unwrap(), it.next().unwrap())
            }
            n => Err(FrameError::BadRowCount(n)),
        }
    }

    /// Render back to the plain-text pattern format.
    pub fn to_text(&self) -> String {
        let fmt_row = |row: &[SlotDirection]| {
            row.iter().map(|d| d.token()).collect::<Vec<_>>().join(",")
        };
        format!(
            "{}\n{}\n{}\n",
            fmt_row(&self.donor_access),
            fmt_row(&self.backhaul),
            fmt_row(&self.miab_access)
        )
    }
}

/// Usage fractions for one role.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoleUsage {
    pub dl: Fraction,
    pub ul: Fraction,
    pub total: Fraction,
}

impl RoleUsage {
    pub fn percent(dl: u32, ul: u32, total: u32) -> Self {
        Self {
            dl: Fraction::new(dl, 100),
            ul: Fraction::new(ul, 100),
            total: Fraction::new(total, 100),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UsageReport {
    pub donor_access: RoleUsage,
    pub backhaul: RoleUsage,
    pub miab_access: RoleUsage,
}

impl UsageReport {
    pub fn role(&self, role: LinkRole) -> RoleUsage {
        match role {
            LinkRole::DonorAccess => self.donor_access,
            LinkRole::Backhaul => self.backhaul,
            LinkRole::MiabAccess => self.miab_access,
        }
    }
}

/// Simultaneous operation of an mIAB node's MT (backhaul row) and DU
/// (access row) within one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SimultaneousMode {
    /// MT receives (backhaul DL) while DU receives (access UL).
    BothReceive,
    /// MT transmits (backhaul UL) while DU transmits (access DL).
    BothTransmit,
    /// One part transmits while the other receives: self-interference.
    Mixed,
    /// Either role is silent, so no simultaneous operation occurs.
    SafeBySilence,
}

impl SimultaneousMode {
    pub fn of(backhaul: SlotDirection, access: SlotDirection) -> Self {
        if !backhaul.is_active() || !access.is_active() {
            return SimultaneousMode::SafeBySilence;
        }
        // On the backhaul the MT transmits in UL; on access the DU
        // transmits in DL.
        let mt_transmits = backhaul.is_uplink();
        let du_transmits = access.counts_as_downlink();
        match (mt_transmits, du_transmits) {
            (false, false) => SimultaneousMode::BothReceive,
            (true, true) => SimultaneousMode::BothTransmit,
            _ => SimultaneousMode::Mixed,
        }
    }

    pub fn is_self_interference(&self) -> bool {
        matches!(self, SimultaneousMode::Mixed)
    }
}

/// The four cross-link interference cases between donor access and mIAB
/// access running opposite directions in the same slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum CrossLinkCase {
    /// Access-UL UE (passenger) into a donor-DL UE (pedestrian).
    Case01,
    /// Donor DL into a DU receiving access UL.
    Case02,
    /// Donor-UL UE (pedestrian) into an access-DL UE (passenger).
    Case03,
    /// DU transmitting access DL into a donor receiving UL.
    Case04,
}

impl CrossLinkCase {
    pub const ALL: [CrossLinkCase; 4] = [
        CrossLinkCase::Case01,
        CrossLinkCase::Case02,
        CrossLinkCase::Case03,
        CrossLinkCase::Case04,
    ];

    /// Required (donor access, mIAB access) directions for the case to be
    /// structurally possible. DL requirements admit SpecialDownlink.
    pub fn required_directions(&self) -> (SlotDirection, SlotDirection) {
        match self {
            CrossLinkCase::Case01 | CrossLinkCase::Case02 => {
                (SlotDirection::Downlink, SlotDirection::Uplink)
            }
            CrossLinkCase::Case03 | CrossLinkCase::Case04 => {
                (SlotDirection::Uplink, SlotDirection::Downlink)
            }
        }
    }
}

impl fmt::Display for CrossLinkCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CrossLinkCase::Case01 => "Case01",
            CrossLinkCase::Case02 => "Case02",
            CrossLinkCase::Case03 => "Case03",
            CrossLinkCase::Case04 => "Case04",
        };
        f.write_str(s)
    }
}

/// Whether a case can occur in a slot, and if not, why not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseStatus {
    Possible,
    /// One of the two roles involved is silent.
    AvoidedBySilence,
    /// Both roles are active but not in the opposite-direction combination
    /// the case requires.
    AvoidedByAlignment,
}

impl CaseStatus {
    pub fn is_avoided(&self) -> bool {
        !matches!(self, CaseStatus::Possible)
    }
}

/// Case statuses for one slot, indexed by [`CrossLinkCase::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotCases {
    pub statuses: [CaseStatus; 4],
}

impl SlotCases {
    pub fn of(donor: SlotDirection, access: SlotDirection) -> Self {
        let status = |case: CrossLinkCase| {
            let (need_donor, need_access) = case.required_directions();
            let donor_ok = match need_donor {
                SlotDirection::Downlink => donor.counts_as_downlink(),
                SlotDirection::Uplink => donor.is_uplink(),
                _ => unreachable!(),
            };
            let access_ok = match need_access {
                SlotDirection::Downlink => access.counts_as_downlink(),
                SlotDirection::Uplink => access.is_uplink(),
                _ => unreachable!(),
            };
            if donor_ok && access_ok {
                CaseStatus::Possible
            } else if !donor.is_active() || !access.is_active() {
                CaseStatus::AvoidedBySilence
            } else {
                CaseStatus::AvoidedByAlignment
            }
        };
        SlotCases {
            statuses: [
                status(CrossLinkCase::Case01),
                status(CrossLinkCase::Case02),
                status(CrossLinkCase::Case03),
                status(CrossLinkCase::Case04),
            ],
        }
    }

    pub fn status(&self, case: CrossLinkCase) -> CaseStatus {
        self.statuses[CrossLinkCase::ALL.iter().position(|c| *c == case).unwrap()]
    }

    pub fn possible(&self) -> Vec<CrossLinkCase> {
        CrossLinkCase::ALL
            .iter()
            .copied()
            .filter(|c| self.status(*c) == CaseStatus::Possible)
            .collect()
    }
}

/// Names of the built-in patterns.
pub const PATTERN_NO_SILENCE: &str = "no_silence";
pub const PATTERN_WITH_SILENCE: &str = "with_silence";
pub const PATTERN_MACRO_ONLY: &str = "macro_only";

/// The three built-in patterns: the 2-slot self-interference-free IAB
/// scheme, the 10-slot scheme with slots of silence, and the 10-slot
/// macro-only scheme.
pub fn builtin_patterns() -> BTreeMap<&'static str, FramePattern> {
    use SlotDirection::{Downlink as DL, Silent as SI, SpecialDownlink as S, Uplink as UL};
    let mut map = BTreeMap::new();
    map.insert(
        PATTERN_NO_SILENCE,
        FramePattern::new(vec![DL, UL], vec![DL, UL], vec![UL, DL]).unwrap(),
    );
    map.insert(
        PATTERN_WITH_SILENCE,
        FramePattern::new(
            vec![DL, UL, SI, DL, SI, UL, DL, SI, UL, DL],
            vec![DL, SI, UL, DL, UL, SI, SI, UL, SI, DL],
            vec![SI, UL, DL, SI, DL, UL, DL, DL, UL, SI],
        )
        .unwrap(),
    );
    map.insert(
        PATTERN_MACRO_ONLY,
        FramePattern::donor_only(vec![DL, S, UL, UL, UL, DL, S, UL, UL, DL]).unwrap(),
    );
    map
}

/// Look up a built-in pattern by name.
pub fn builtin(name: &str) -> Result<FramePattern, FrameError> {
    builtin_patterns()
        .remove(name)
        .ok_or_else(|| FrameError::UnknownBuiltin(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use SlotDirection::{Downlink as DL, Silent as SI, SpecialDownlink as S, Uplink as UL};

    #[test]
    fn usage_no_silence_is_all_50_50_100() {
        let p = builtin(PATTERN_NO_SILENCE).unwrap();
        let u = p.compute_usage();
        for role in LinkRole::ALL {
            assert_eq!(u.role(role).dl, Fraction::new(1, 2));
            assert_eq!(u.role(role).ul, Fraction::new(1, 2));
            assert_eq!(u.role(role).total, Fraction::new(1, 1));
        }
    }

    #[test]
    fn usage_with_silence_matches_row_totals() {
        let p = builtin(PATTERN_WITH_SILENCE).unwrap();
        let u = p.compute_usage();
        assert_eq!(u.donor_access, RoleUsage::percent(40, 30, 70));
        assert_eq!(u.backhaul, RoleUsage::percent(30, 30, 60));
        assert_eq!(u.miab_access, RoleUsage::percent(40, 30, 70));
    }

    #[test]
    fn usage_macro_only_counts_special_as_downlink() {
        let p = builtin(PATTERN_MACRO_ONLY).unwrap();
        let u = p.compute_usage();
        assert_eq!(u.donor_access, RoleUsage::percent(50, 50, 100));
        assert_eq!(u.backhaul, RoleUsage::percent(0, 0, 0));
        assert_eq!(u.miab_access, RoleUsage::percent(0, 0, 0));
    }

    #[test]
    fn usage_all_silent_is_zero() {
        let p = FramePattern::new(vec![SI], vec![SI], vec![SI]).unwrap();
        let u = p.compute_usage();
        for role in LinkRole::ALL {
            assert_eq!(u.role(role).total, Fraction::new(0, 1));
        }
    }

    #[test]
    fn empty_pattern_rejected() {
        assert_eq!(
            FramePattern::new(vec![], vec![], vec![]).unwrap_err(),
            FrameError::Empty
        );
    }

    #[test]
    fn mismatched_rows_rejected() {
        let err = FramePattern::new(vec![DL], vec![DL, UL], vec![DL]).unwrap_err();
        assert!(matches!(err, FrameError::LengthMismatch { .. }));
    }

    #[test]
    fn self_interference_modes_of_builtin_patterns() {
        let no_silence = builtin(PATTERN_NO_SILENCE).unwrap();
        let modes = no_silence.self_interference();
        assert_eq!(modes[0], SimultaneousMode::BothReceive);
        assert_eq!(modes[1], SimultaneousMode::BothTransmit);
        assert!(no_silence.is_self_interference_free());

        let with_silence = builtin(PATTERN_WITH_SILENCE).unwrap();
        let modes = with_silence.self_interference();
        assert_eq!(modes[1], SimultaneousMode::SafeBySilence); // slot 2: backhaul silent
        assert!(with_silence.is_self_interference_free());
    }

    #[test]
    fn mixed_actions_flag_self_interference() {
        // backhaul DL (MT receives) with access DL (DU transmits)
        let p = FramePattern::new(vec![DL], vec![DL], vec![DL]).unwrap();
        assert_eq!(p.self_interference()[0], SimultaneousMode::Mixed);
        assert!(!p.is_self_interference_free());
    }

    #[test]
    fn case_analysis_on_with_silence_pattern() {
        let p = builtin(PATTERN_WITH_SILENCE).unwrap();
        let cases = p.case_analysis();
        // slot 1: donor DL, access silent: Case01 avoided by silence
        assert_eq!(cases[0].status(CrossLinkCase::Case01), CaseStatus::AvoidedBySilence);
        // slot 3: donor silent, access DL: Case03 avoided by silence
        assert_eq!(cases[2].status(CrossLinkCase::Case03), CaseStatus::AvoidedBySilence);
        // no slot leaves any case possible in this pattern
        for slot in &cases {
            assert!(slot.possible().is_empty());
        }
    }

    #[test]
    fn case_analysis_on_no_silence_pattern() {
        let p = builtin(PATTERN_NO_SILENCE).unwrap();
        let cases = p.case_analysis();
        // slot 1: donor DL, access UL: Cases 01 and 02 possible
        assert_eq!(
            cases[0].possible(),
            vec![CrossLinkCase::Case01, CrossLinkCase::Case02]
        );
        // slot 2: donor UL, access DL: Cases 03 and 04 possible
        assert_eq!(
            cases[1].possible(),
            vec![CrossLinkCase::Case03, CrossLinkCase::Case04]
        );
    }

    #[test]
    fn silence_of_each_role_avoids_its_cases() {
        let dirs = [DL, UL, S, SI];
        for &donor in &dirs {
            for &access in &dirs {
                let slot = SlotCases::of(donor, access);
                if access == SI {
                    assert_eq!(slot.status(CrossLinkCase::Case01), CaseStatus::AvoidedBySilence);
                    assert_eq!(slot.status(CrossLinkCase::Case04), CaseStatus::AvoidedBySilence);
                }
                if donor == SI {
                    assert_eq!(slot.status(CrossLinkCase::Case02), CaseStatus::AvoidedBySilence);
                    assert_eq!(slot.status(CrossLinkCase::Case03), CaseStatus::AvoidedBySilence);
                }
            }
        }
    }

    #[test]
    fn builtin_lookup_unknown_name_errors() {
        assert!(matches!(builtin("nope"), Err(FrameError::UnknownBuiltin(_))));
    }

    #[test]
    fn builtin_with_silence_matches_rows() {
        let p = builtin(PATTERN_WITH_SILENCE).unwrap();
        assert_eq!(p.len(), 10);
        assert_eq!(
            p.row(LinkRole::DonorAccess),
            &[DL, UL, SI, DL, SI, UL, DL, SI, UL, DL]
        );
        assert_eq!(
            p.row(LinkRole::Backhaul),
            &[DL, SI, UL, DL, UL, SI, SI, UL, SI, DL]
        );
        assert_eq!(
            p.row(LinkRole::MiabAccess),
            &[SI, UL, DL, SI, DL, UL, DL, DL, UL, SI]
        );
    }

    #[test]
    fn parse_round_trip_and_donor_only() {
        let p = builtin(PATTERN_WITH_SILENCE).unwrap();
        let parsed = FramePattern::parse(&p.to_text()).unwrap();
        assert_eq!(parsed, p);

        let single = FramePattern::parse("DL,S,UL,UL,UL,DL,S,UL,UL,DL\n").unwrap();
        assert_eq!(single, builtin(PATTERN_MACRO_ONLY).unwrap());
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(matches!(
            FramePattern::parse("DL,XX\nDL,UL\nUL,DL"),
            Err(FrameError::BadToken(_))
        ));
        assert!(matches!(
            FramePattern::parse("DL,UL\nDL,UL"),
            Err(FrameError::BadRowCount(2))
        ));
    }

    #[test]
    fn cyclic_direction_lookup() {
        let p = builtin(PATTERN_NO_SILENCE).unwrap();
        assert_eq!(p.direction(LinkRole::DonorAccess, 0), DL);
        assert_eq!(p.direction(LinkRole::DonorAccess, 1), UL);
        assert_eq!(p.direction(LinkRole::DonorAccess, 2), DL);
        assert_eq!(p.direction(LinkRole::MiabAccess, 7), DL);
    }

    #[test]
    fn donor_duplex_conflicts_detected() {
        // donor access DL while backhaul UL would require full duplex
        let p = FramePattern::new(vec![DL, UL], vec![UL, UL], vec![SI, SI]).unwrap();
        assert_eq!(p.donor_duplex_conflicts(), vec![0]);
        for pat in builtin_patterns().values() {
            assert!(pat.donor_duplex_conflicts().is_empty());
        }
    }

    #[test]
    fn usage_fractions_are_consistent() {
        // dl + ul == total and total <= 1, across assorted patterns
        let patterns: Vec<FramePattern> = builtin_patterns().values().cloned().collect();
        for p in patterns {
            let u = p.compute_usage();
            for role in LinkRole::ALL {
                let r = u.role(role);
                assert_eq!(r.dl + r.ul, r.total);
                assert!(r.total <= Fraction::new(1, 1));
            }
        }
    }
}
