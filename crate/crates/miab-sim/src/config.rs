//! Run configuration: the experiment arm (layout regime, deployment,
//! frame pattern), duration, seed and model flags, with a plain
//! `key = value` file format and arm-validity rules.

use crate::channel::ChannelParams;
use crate::frame::{self, FrameError, FramePattern, LinkRole};
use crate::radio::{McsTable, McsTableError, SLOTS_PER_MS};
use crate::rng::fnv1a;
use crate::scenario::{PlacementParams, PopulationCounts, ScenarioError};
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown regime {0:?} (expected not_limited or limited)")]
    BadRegime(String),
    #[error("unknown deployment {0:?} (expected only_macros, macros_picos or miab)")]
    BadDeployment(String),
    #[error("deployment {deployment} cannot run frame pattern {pattern}: {reason}")]
    InvalidArm {
        deployment: String,
        pattern: String,
        reason: String,
    },
    #[error("duration must be positive")]
    ZeroDuration,
    #[error("config line {0}: expected 'key = value'")]
    BadLine(usize),
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error(transparent)]
    Frame(#[from] FrameError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    McsTable(#[from] McsTableError),
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Regime {
    NotLimited,
    Limited,
}

impl Regime {
    pub const ALL: [Regime; 2] = [Regime::NotLimited, Regime::Limited];

    pub fn is_limited(&self) -> bool {
        matches!(self, Regime::Limited)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regime::NotLimited => "not_limited",
            Regime::Limited => "limited",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "not_limited" => Ok(Regime::NotLimited),
            "limited" => Ok(Regime::Limited),
            other => Err(ConfigError::BadRegime(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Deployment {
    OnlyMacros,
    MacrosPicos,
    Miab,
}

impl Deployment {
    pub const ALL: [Deployment; 3] =
        [Deployment::OnlyMacros, Deployment::MacrosPicos, Deployment::Miab];

    pub fn label(&self) -> &'static str {
        match self {
            Deployment::OnlyMacros => "only_macros",
            Deployment::MacrosPicos => "macros_picos",
            Deployment::Miab => "miab",
        }
    }

    pub fn parse(s: &str) -> Result<Self, ConfigError> {
        match s {
            "only_macros" => Ok(Deployment::OnlyMacros),
            "macros_picos" => Ok(Deployment::MacrosPicos),
            "miab" => Ok(Deployment::Miab),
            other => Err(ConfigError::BadDeployment(other.to_string())),
        }
    }

    pub fn with_picos(&self) -> bool {
        matches!(self, Deployment::MacrosPicos)
    }

    pub fn with_miab(&self) -> bool {
        matches!(self, Deployment::Miab)
    }
}

/// A frame pattern selection: a built-in name or a pattern file path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PatternChoice {
    Builtin(String),
    File(String),
}

impl PatternChoice {
    /// Built-in names resolve directly; anything else is read as a
    /// pattern file path.
    pub fn parse(value: &str) -> PatternChoice {
        if frame::builtin_patterns().contains_key(value) {
            PatternChoice::Builtin(value.to_string())
        } else {
            PatternChoice::File(value.to_string())
        }
    }

    pub fn label(&self) -> &str {
        match self {
            PatternChoice::Builtin(name) => name,
            PatternChoice::File(path) => path,
        }
    }

    pub fn resolve(&self) -> Result<FramePattern, ConfigError> {
        match self {
            PatternChoice::Builtin(name) => Ok(frame::builtin(name)?),
            PatternChoice::File(path) => {
                let text =
                    std::fs::read_to_string(Path::new(path)).map_err(|source| ConfigError::Io {
                        path: path.clone(),
                        source,
                    })?;
                Ok(FramePattern::parse(&text)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub regime: Regime,
    pub deployment: Deployment,
    pub pattern_name: String,
    pub pattern: FramePattern,
    pub duration_ms: u64,
    pub seed: u64,
    pub fading: bool,
    pub uplink_flows: bool,
    pub counts: PopulationCounts,
    pub placement: PlacementParams,
    pub hysteresis_db: f64,
    pub topology_period_slots: u64,
    /// Cadence of channel staleness checks.
    pub channel_check_slots: u64,
    pub channel: ChannelParams,
    pub mcs_table: McsTable,
}

impl RunConfig {
    pub fn new(
        regime: Regime,
        deployment: Deployment,
        pattern: PatternChoice,
    ) -> Result<Self, ConfigError> {
        let resolved = pattern.resolve()?;
        let cfg = Self {
            regime,
            deployment,
            pattern_name: pattern.label().to_string(),
            pattern: resolved,
            duration_ms: 2000,
            seed: 1,
            fading: true,
            uplink_flows: true,
            counts: PopulationCounts::default(),
            placement: PlacementParams::default(),
            hysteresis_db: 3.0,
            topology_period_slots: 100,
            channel_check_slots: 10,
            channel: ChannelParams::default(),
            mcs_table: McsTable::bundled(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Arm validity: non-mIAB deployments need a donor-only pattern (no
    /// active mIAB rows); mIAB runs need active mIAB rows, no
    /// self-interference slots and no donor transmit/receive conflicts.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.duration_ms == 0 {
            return Err(ConfigError::ZeroDuration);
        }
        self.counts.validate()?;
        let arm_err = |reason: &str| ConfigError::InvalidArm {
            deployment: self.deployment.label().to_string(),
            pattern: self.pattern_name.clone(),
            reason: reason.to_string(),
        };
        let miab_rows_active = [LinkRole::Backhaul, LinkRole::MiabAccess]
            .iter()
            .any(|&r| self.pattern.row(r).iter().any(|d| d.is_active()));
        match self.deployment {
            Deployment::OnlyMacros | Deployment::MacrosPicos => {
                if miab_rows_active {
                    return Err(arm_err(
                        "pattern drives mIAB rows but the deployment has no mIAB nodes",
                    ));
                }
            }
            Deployment::Miab => {
                if !miab_rows_active {
                    return Err(arm_err("pattern never activates the mIAB rows"));
                }
                if !self.pattern.is_self_interference_free() {
                    return Err(arm_err(
                        "pattern has slots where the mIAB MT and DU run opposite actions",
                    ));
                }
                if !self.pattern.donor_duplex_conflicts().is_empty() {
                    return Err(arm_err(
                        "pattern makes the donor transmit and receive in the same slot",
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn total_slots(&self) -> u64 {
        self.duration_ms * SLOTS_PER_MS
    }

    /// Canonical text form used for hashing and reproducibility stamps.
    pub fn canonical_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "regime={}", self.regime.label());
        let _ = writeln!(s, "deployment={}", self.deployment.label());
        let _ = writeln!(s, "pattern_name={}", self.pattern_name);
        let _ = write!(s, "pattern=");
        let _ = writeln!(s, "{}", self.pattern.to_text().replace('\n', ";"));
        let _ = writeln!(s, "duration_ms={}", self.duration_ms);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "fading={}", self.fading);
        let _ = writeln!(s, "uplink_flows={}", self.uplink_flows);
        let _ = writeln!(
            s,
            "counts={},{},{},{}",
            self.counts.buses,
            self.counts.passengers_per_bus,
            self.counts.passengers,
            self.counts.pedestrians
        );
        let _ = writeln!(
            s,
            "placement={},{},{}",
            self.placement.macro_ring_radius,
            self.placement.pico_ring_radius_not_limited,
            self.placement.pico_ring_radius_limited
        );
        let _ = writeln!(s, "hysteresis_db={}", self.hysteresis_db);
        let _ = writeln!(s, "topology_period_slots={}", self.topology_period_slots);
        let _ = writeln!(s, "channel_check_slots={}", self.channel_check_slots);
        let _ = writeln!(
            s,
            "channel={},{},{},{},{},{}",
            self.channel.fc_ghz,
            self.channel.fading_enabled,
            self.channel.refresh_max_slots,
            self.channel.refresh_distance_m,
            self.channel.fading_interval_slots,
            self.channel.rician_k_db
        );
        for e in self.mcs_table.entries() {
            let _ = writeln!(s, "mcs={},{},{}", e.index, e.min_sinr_db, e.spectral_efficiency);
        }
        s
    }

    pub fn config_hash(&self) -> u64 {
        fnv1a(self.canonical_string().as_bytes())
    }

    /// Parse the `key = value` run-config format. Unset keys keep their
    /// defaults; `#` starts a comment.
    pub fn parse_file(text: &str) -> Result<Self, ConfigError> {
        let mut regime = Regime::NotLimited;
        let mut deployment = Deployment::OnlyMacros;
        let mut pattern = PatternChoice::Builtin(frame::PATTERN_MACRO_ONLY.to_string());
        let mut overrides: Vec<(String, String)> = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(ConfigError::BadLine(lineno + 1))?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            match key.as_str() {
                "regime" => regime = Regime::parse(&value)?,
                "deployment" => deployment = Deployment::parse(&value)?,
                "pattern" => pattern = PatternChoice::parse(&value),
                "duration_ms" | "seed" | "fading" | "uplink_flows" | "buses"
                | "passengers_per_bus" | "pedestrians" | "hysteresis_db" => {
                    overrides.push((key, value))
                }
                other => return Err(ConfigError::UnknownKey(other.to_string())),
            }
        }
        let mut cfg = Self::new(regime, deployment, pattern)?;
        for (key, value) in overrides {
            let bad = || ConfigError::BadValue {
                key: key.clone(),
                value: value.clone(),
            };
            match key.as_str() {
                "duration_ms" => cfg.duration_ms = value.parse().map_err(|_| bad())?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad())?,
                "fading" => {
                    cfg.fading = parse_bool(&value).ok_or_else(bad)?;
                    cfg.channel.fading_enabled = cfg.fading;
                }
                "uplink_flows" => cfg.uplink_flows = parse_bool(&value).ok_or_else(bad)?,
                "buses" => cfg.counts.buses = value.parse().map_err(|_| bad())?,
                "passengers_per_bus" => {
                    cfg.counts.passengers_per_bus = value.parse().map_err(|_| bad())?
                }
                "pedestrians" => cfg.counts.pedestrians = value.parse().map_err(|_| bad())?,
                "hysteresis_db" => cfg.hysteresis_db = value.parse().map_err(|_| bad())?,
                _ => unreachable!(),
            }
        }
        cfg.counts.passengers = cfg.counts.buses * cfg.counts.passengers_per_bus;
        cfg.validate()?;
        Ok(cfg)
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s {
        "true" | "on" | "1" | "yes" => Some(true),
        "false" | "off" | "0" | "no" => Some(false),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{PATTERN_MACRO_ONLY, PATTERN_NO_SILENCE, PATTERN_WITH_SILENCE};

    fn choice(name: &str) -> PatternChoice {
        PatternChoice::parse(name)
    }

    #[test]
    fn valid_arms_construct() {
        for (dep, pat) in [
            (Deployment::OnlyMacros, PATTERN_MACRO_ONLY),
            (Deployment::MacrosPicos, PATTERN_MACRO_ONLY),
            (Deployment::Miab, PATTERN_NO_SILENCE),
            (Deployment::Miab, PATTERN_WITH_SILENCE),
        ] {
            for regime in Regime::ALL {
                assert!(RunConfig::new(regime, dep, choice(pat)).is_ok());
            }
        }
    }

    #[test]
    fn invalid_arms_rejected() {
        let err = RunConfig::new(
            Regime::NotLimited,
            Deployment::MacrosPicos,
            choice(PATTERN_WITH_SILENCE),
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::InvalidArm { .. }));
        let err = RunConfig::new(
            Regime::Limited,
            Deployment::Miab,
            choice(PATTERN_MACRO_ONLY),
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::InvalidArm { .. }));
    }

    #[test]
    fn miab_patterns_with_self_interference_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.pattern");
        // backhaul DL with access DL: MT receives while DU transmits
        std::fs::write(&path, "DL,UL\nDL,UL\nDL,DL\n").unwrap();
        let err = RunConfig::new(
            Regime::NotLimited,
            Deployment::Miab,
            PatternChoice::parse(path.to_str().unwrap()),
        )
        .unwrap_err();
        assert!(matches!(err, ConfigError::InvalidArm { .. }));
    }

    #[test]
    fn config_hash_distinguishes_arms_and_seeds() {
        let a = RunConfig::new(Regime::NotLimited, Deployment::Miab, choice(PATTERN_NO_SILENCE))
            .unwrap();
        let mut b = a.clone();
        b.seed = 2;
        let c = RunConfig::new(Regime::Limited, Deployment::Miab, choice(PATTERN_NO_SILENCE))
            .unwrap();
        assert_ne!(a.config_hash(), b.config_hash());
        assert_ne!(a.config_hash(), c.config_hash());
        assert_eq!(a.config_hash(), a.clone().config_hash());
    }

    #[test]
    fn parse_file_round_trip() {
        let text = "\
# comparison arm
regime = limited
deployment = miab
pattern = with_silence
duration_ms = 500
seed = 9
fading = off
uplink_flows = on
";
        let cfg = RunConfig::parse_file(text).unwrap();
        assert_eq!(cfg.regime, Regime::Limited);
        assert_eq!(cfg.deployment, Deployment::Miab);
        assert_eq!(cfg.pattern_name, "with_silence");
        assert_eq!(cfg.duration_ms, 500);
        assert_eq!(cfg.seed, 9);
        assert!(!cfg.fading);
        assert!(!cfg.channel.fading_enabled);
    }

    #[test]
    fn parse_file_rejects_unknown_keys_and_bad_counts() {
        assert!(matches!(
            RunConfig::parse_file("bogus = 1\n"),
            Err(ConfigError::UnknownKey(_))
        ));
        let err = RunConfig::parse_file(
            "deployment = miab\npattern = no_silence\nbuses = 5\npedestrians = 36\n",
        );
        // 5 buses x 6 per bus = 30 passengers; consistent, so this is fine
        assert!(err.is_ok());
        let err = RunConfig::parse_file("duration_ms = 0\n");
        assert!(matches!(err, Err(ConfigError::ZeroDuration)));
    }

    #[test]
    fn total_slots_is_four_per_ms() {
        let cfg = RunConfig::new(
            Regime::NotLimited,
            Deployment::OnlyMacros,
            choice(PATTERN_MACRO_ONLY),
        )
        .unwrap();
        assert_eq!(cfg.total_slots(), 8000);
        let mut full = cfg;
        full.duration_ms = 8000;
        assert_eq!(full.total_slots(), 32_000);
    }
}
