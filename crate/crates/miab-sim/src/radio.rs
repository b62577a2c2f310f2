//! Link-level radio functions: RSRP, cell attachment, SINR bookkeeping,
//! CQI/MCS selection with outer-loop link adaptation, and transport-block
//! sizing.
//!
//! Power bookkeeping uses a fixed spectral density: a node's total power
//! is spread evenly over all 792 subcarriers regardless of how many RBs
//! it is scheduled on, so per-resource-element quantities compose by
//! simple linear sums.

use crate::scenario::{NodeId, NodeKind};
use thiserror::Error;

pub const NUM_RBS: usize = 66;
pub const SUBCARRIERS_PER_RB: usize = 12;
pub const SYMBOLS_PER_SLOT: usize = 14;
pub const SUBCARRIER_SPACING_HZ: f64 = 60_000.0;
pub const TOTAL_SUBCARRIERS: usize = NUM_RBS * SUBCARRIERS_PER_RB;
pub const SLOT_DURATION_MS: f64 = 0.25;
pub const SLOTS_PER_MS: u64 = 4;
pub const NOISE_DENSITY_DBM_PER_HZ: f64 = -174.0;
pub const NOISE_FIGURE_DB: f64 = 9.0;

pub const OLLA_STEP_DOWN_DB: f64 = 1.0;
pub const OLLA_STEP_UP_DB: f64 = 0.1;
pub const OLLA_MIN_DB: f64 = -30.0;
pub const OLLA_MAX_DB: f64 = 5.0;

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn lin_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

/// Transmit power per resource element for a node's total power.
pub fn per_re_tx_power_dbm(total_power_dbm: f64) -> f64 {
    total_power_dbm - 10.0 * (TOTAL_SUBCARRIERS as f64).log10()
}

/// Thermal noise plus noise figure over `n_subcarriers`.
pub fn noise_power_dbm(n_subcarriers: usize) -> f64 {
    NOISE_DENSITY_DBM_PER_HZ
        + 10.0 * (n_subcarriers as f64 * SUBCARRIER_SPACING_HZ).log10()
        + NOISE_FIGURE_DB
}

/// Received power per resource element across one link, given the
/// transmitter's per-RE spectral density. Downlink transmitters spread
/// their power over the full carrier; uplink transmitters concentrate it
/// on their allocated subcarriers.
pub fn rx_power_per_re_dbm(
    tx_psd_dbm_per_re: f64,
    tx_elem_db: f64,
    tx_array_db: f64,
    rx_elem_db: f64,
    rx_array_db: f64,
    propagation_loss_db: f64,
) -> f64 {
    tx_psd_dbm_per_re + tx_elem_db + tx_array_db + rx_elem_db + rx_array_db
        - propagation_loss_db
}

/// RSRP of a candidate cell: per-RE power (reference signals span the
/// whole carrier) with serving-beam gains at both ends, minus the link
/// loss. Interference and noise are excluded.
pub fn rsrp_dbm(
    tx_power_dbm: f64,
    tx_elem_db: f64,
    tx_array_db: f64,
    rx_elem_db: f64,
    rx_array_db: f64,
    propagation_loss_db: f64,
) -> f64 {
    rx_power_per_re_dbm(
        per_re_tx_power_dbm(tx_power_dbm),
        tx_elem_db,
        tx_array_db,
        rx_elem_db,
        rx_array_db,
        propagation_loss_db,
    )
}

/// SINR over an RB allocation: `signal_dbm` and the interference sum are
/// totals over the allocated subcarriers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinrSample {
    pub signal_dbm: f64,
    pub interference_mw_sum: f64,
    pub noise_dbm: f64,
    pub sinr_db: f64,
}

pub fn sinr_sample(signal_dbm: f64, interference_mw_sum: f64, n_subcarriers: usize) -> SinrSample {
    let noise_dbm = noise_power_dbm(n_subcarriers);
    let denom_mw = db_to_lin(noise_dbm) + interference_mw_sum;
    SinrSample {
        signal_dbm,
        interference_mw_sum,
        noise_dbm,
        sinr_db: signal_dbm - lin_to_db(denom_mw),
    }
}

/// Highest-RSRP cell selection with handover hysteresis. MT nodes may
/// only be served by fixed gNBs, so DU candidates are filtered out before
/// the argmax. Returns `None` when no candidate remains (unattached).
pub fn attach(
    node_kind: NodeKind,
    current: Option<NodeId>,
    candidates: &[(NodeId, NodeKind, f64)],
    hysteresis_db: f64,
) -> Option<NodeId> {
    let mut best: Option<(NodeId, f64)> = None;
    let mut current_rsrp = None;
    for &(id, kind, rsrp) in candidates {
        if node_kind == NodeKind::MiabMt && !kind.is_fixed_gnb() {
            continue;
        }
        if Some(id) == current {
            current_rsrp = Some(rsrp);
        }
        let better = match best {
            None => true,
            Some((best_id, best_rsrp)) => {
                rsrp > best_rsrp || (rsrp == best_rsrp && id < best_id)
            }
        };
        if better {
            best = Some((id, rsrp));
        }
    }
    let (best_id, best_rsrp) = best?;
    match (current, current_rsrp) {
        (Some(cur), Some(cur_rsrp)) if best_id != cur => {
            if best_rsrp > cur_rsrp + hysteresis_db {
                Some(best_id)
            } else {
                Some(cur)
            }
        }
        _ => Some(best_id),
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum McsTableError {
    #[error("MCS table is empty")]
    Empty,
    #[error("MCS table line {0}: expected 'index, min_sinr_db, spectral_efficiency'")]
    BadLine(usize),
    #[error("MCS table indices must be 0..n in order (line {0})")]
    BadIndex(usize),
    #[error("MCS table must be strictly increasing in SINR and efficiency (line {0})")]
    NotMonotonic(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McsEntry {
    pub index: u8,
    pub min_sinr_db: f64,
    pub spectral_efficiency: f64,
}

/// Ordered MCS table loaded from a data file; strictly increasing in both
/// SINR threshold and spectral efficiency.
#[derive(Debug, Clone, PartialEq)]
pub struct McsTable {
    entries: Vec<McsEntry>,
}

impl McsTable {
    pub fn parse(text: &str) -> Result<Self, McsTableError> {
        let mut entries = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').map(str::trim).collect();
            if parts.len() != 3 {
                return Err(McsTableError::BadLine(lineno + 1));
            }
            let index: u8 = parts[0].parse().map_err(|_| McsTableError::BadLine(lineno + 1))?;
            let min_sinr_db: f64 = parts[1].parse().map_err(|_| McsTableError::BadLine(lineno + 1))?;
            let spectral_efficiency: f64 =
                parts[2].parse().map_err(|_| McsTableError::BadLine(lineno + 1))?;
            if index as usize != entries.len() {
                return Err(McsTableError::BadIndex(lineno + 1));
            }
            if let Some(prev) = entries.last() {
                let prev: &McsEntry = prev;
                if min_sinr_db <= prev.min_sinr_db
                    || spectral_efficiency <= prev.spectral_efficiency
                {
                    return Err(McsTableError::NotMonotonic(lineno + 1));
                }
            }
            entries.push(McsEntry {
                index,
                min_sinr_db,
                spectral_efficiency,
            });
        }
        if entries.is_empty() {
            return Err(McsTableError::Empty);
        }
        Ok(Self { entries })
    }

    /// The bundled 29-level table.
    pub fn bundled() -> Self {
        Self::parse(include_str!("../data/mcs_table.csv")).expect("bundled MCS table is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[McsEntry] {
        &self.entries
    }

    pub fn min_sinr_db(&self, index: u8) -> f64 {
        self.entries[index as usize].min_sinr_db
    }

    pub fn spectral_efficiency(&self, index: u8) -> f64 {
        self.entries[index as usize].spectral_efficiency
    }

    pub fn top_index(&self) -> u8 {
        (self.entries.len() - 1) as u8
    }
}

/// Outer-loop link adaptation state: a signed SINR offset nudged up on
/// successful decodes and backed off on errors, holding the BLER near
/// step_up / (step_up + step_down).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OllaState {
    pub offset_db: f64,
}

impl Default for OllaState {
    fn default() -> Self {
        Self::new()
    }
}

impl OllaState {
    pub fn new() -> Self {
        Self { offset_db: 0.0 }
    }

    pub fn update(&mut self, decode_ok: bool) {
        if decode_ok {
            self.offset_db += OLLA_STEP_UP_DB;
        } else {
            self.offset_db -= OLLA_STEP_DOWN_DB;
        }
        self.offset_db = self.offset_db.clamp(OLLA_MIN_DB, OLLA_MAX_DB);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct McsDecision {
    pub index: u8,
    /// No threshold was met; the lowest entry is used as a robust floor.
    pub fallback: bool,
}

/// Highest MCS whose threshold is at or below the OLLA-adjusted SINR
/// estimate (ties at a threshold resolve upward to that index).
pub fn select_mcs(estimated_sinr_db: f64, olla: &OllaState, table: &McsTable) -> McsDecision {
    let adjusted = estimated_sinr_db + olla.offset_db;
    let mut chosen = None;
    for e in table.entries() {
        if e.min_sinr_db <= adjusted {
            chosen = Some(e.index);
        } else {
            break;
        }
    }
    match chosen {
        Some(index) => McsDecision {
            index,
            fallback: false,
        },
        None => McsDecision {
            index: 0,
            fallback: true,
        },
    }
}

/// Transport block size over `n_rb` resource blocks at the given MCS; no
/// control overhead is subtracted.
pub fn transport_block_bits(n_rb: usize, mcs: u8, table: &McsTable) -> u64 {
    let re = (n_rb * SUBCARRIERS_PER_RB * SYMBOLS_PER_SLOT) as f64;
    (re * table.spectral_efficiency(mcs)).floor() as u64
}
