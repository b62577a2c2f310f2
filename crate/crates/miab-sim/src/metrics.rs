//! Result accumulation and export: DL throughput CDFs, DL latency CDFs,
//! delivered-bit totals, and MCS-usage histograms, split by UE class and
//! link category.

use crate::scenario::NodeId;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("cannot build a CDF from an empty value set")]
    EmptyValues,
    #[error("failed to write {path}: {source}")]
    Io {
        path: PathBuf,
        source: io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum UeClass {
    Pedestrian,
    Passenger,
}

impl UeClass {
    pub const ALL: [UeClass; 2] = [UeClass::Pedestrian, UeClass::Passenger];

    pub fn label(&self) -> &'static str {
        match self {
            UeClass::Pedestrian => "pedestrian",
            UeClass::Passenger => "passenger",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            UeClass::Pedestrian => 0,
            UeClass::Passenger => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum LinkCategory {
    Access,
    Backhaul,
}

impl LinkCategory {
    pub const ALL: [LinkCategory; 2] = [LinkCategory::Access, LinkCategory::Backhaul];

    pub fn label(&self) -> &'static str {
        match self {
            LinkCategory::Access => "access",
            LinkCategory::Backhaul => "backhaul",
        }
    }

    pub fn index(&self) -> usize {
        match self {
            LinkCategory::Access => 0,
            LinkCategory::Backhaul => 1,
        }
    }
}

/// Per-UE downlink accounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UeStats {
    pub node_id: NodeId,
    pub class: UeClass,
    pub generated_bits: u64,
    pub delivered_bits: u64,
    /// Slots in which the UE had undelivered DL data anywhere in the
    /// network; throughput divides by this active time.
    pub active_slots: u64,
    pub throughput_bps: f64,
    /// 90th percentile of this UE's delivered-packet latencies.
    pub p90_latency_ms: Option<f64>,
}

/// Complete results of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsBundle {
    pub config_hash: u64,
    pub seed: u64,
    pub duration_slots: u64,
    pub per_ue: Vec<UeStats>,
    /// DL per-packet latencies in ms, by UE class index.
    pub latencies_ms: [Vec<f64>; 2],
    /// MCS usage counts by link category index.
    pub mcs_hist: [Vec<u64>; 2],
    pub transmissions: [u64; 2],
    pub decode_errors: [u64; 2],
    /// DL totals by UE class index.
    pub generated_bits: [u64; 2],
    pub delivered_bits: [u64; 2],
    pub ul_generated_bits: u64,
    pub ul_delivered_bits: u64,
}

impl MetricsBundle {
    pub fn throughputs_bps(&self, class: UeClass) -> Vec<f64> {
        self.per_ue
            .iter()
            .filter(|u| u.class == class)
            .map(|u| u.throughput_bps)
            .collect()
    }

    pub fn median_throughput_bps(&self, class: UeClass) -> f64 {
        median(self.throughputs_bps(class))
    }

    /// Fraction of UEs of the class with throughput strictly above the
    /// threshold.
    pub fn frac_above_bps(&self, class: UeClass, threshold_bps: f64) -> f64 {
        let v = self.throughputs_bps(class);
        if v.is_empty() {
            return 0.0;
        }
        v.iter().filter(|&&t| t > threshold_bps).count() as f64 / v.len() as f64
    }

    pub fn p90_latency_ms(&self, class: UeClass) -> Option<f64> {
        let v = &self.latencies_ms[class.index()];
        if v.is_empty() {
            return None;
        }
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        Some(quantile_sorted(&sorted, 0.9))
    }

    /// Fraction of the class's UEs whose per-UE P90 latency is below the
    /// bound; UEs with no delivered packets count as failing the bound.
    pub fn frac_ues_p90_below(&self, class: UeClass, bound_ms: f64) -> f64 {
        let ues: Vec<_> = self.per_ue.iter().filter(|u| u.class == class).collect();
        if ues.is_empty() {
            return 0.0;
        }
        let ok = ues
            .iter()
            .filter(|u| matches!(u.p90_latency_ms, Some(p) if p < bound_ms))
            .count();
        ok as f64 / ues.len() as f64
    }

    pub fn delivered_fraction(&self, class: UeClass) -> f64 {
        let g = self.generated_bits[class.index()];
        if g == 0 {
            return 0.0;
        }
        self.delivered_bits[class.index()] as f64 / g as f64
    }

    pub fn bler(&self, category: LinkCategory) -> f64 {
        let t = self.transmissions[category.index()];
        if t == 0 {
            return 0.0;
        }
        self.decode_errors[category.index()] as f64 / t as f64
    }
}

/// Empirical CDF of `values` evaluated on `grid`: F(x) = P(value <= x).
pub fn cdf(values: &[f64], grid: &[f64]) -> Result<Vec<(f64, f64)>, MetricsError> {
    if values.is_empty() {
        return Err(MetricsError::EmptyValues);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    Ok(grid
        .iter()
        .map(|&x| {
            let count = sorted.partition_point(|&v| v <= x);
            (x, count as f64 / n)
        })
        .collect())
}

/// Nearest-rank quantile of an ascending-sorted slice.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// File names written by [`export`].
pub const EXPORT_FILES: [&str; 5] = [
    "throughput_cdf.csv",
    "latency_cdf.csv",
    "totals.csv",
    "mcs_hist.csv",
    "summary.txt",
];

/// Write the bundle to `out_dir` as the four CSV families plus a summary,
/// each stamped with the config hash.
pub fn export(bundle: &MetricsBundle, out_dir: &Path) -> Result<Vec<PathBuf>, MetricsError> {
    fs::create_dir_all(out_dir).map_err(|source| MetricsError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let header = format!(
        "# config_hash=0x{:016x}\n# seed={}\n",
        bundle.config_hash, bundle.seed
    );
    let mut written = Vec::new();

    let mut s = header.clone();
    s.push_str("class,throughput_bps,cdf\n");
    for class in UeClass::ALL {
        let values = bundle.throughputs_bps(class);
        if values.is_empty() {
            continue;
        }
        let mut grid = values.clone();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        for (x, f) in cdf(&values, &grid).expect("nonempty") {
            let _ = writeln!(s, "{},{:.3},{:.6}", class.label(), x, f);
        }
    }
    written.push(write_file(out_dir, "throughput_cdf.csv", &s)?);

    let mut s = header.clone();
    s.push_str("class,latency_ms,cdf\n");
    for class in UeClass::ALL {
        let values = &bundle.latencies_ms[class.index()];
        if values.is_empty() {
            continue;
        }
        let mut grid = values.clone();
        grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
        grid.dedup();
        for (x, f) in cdf(values, &grid).expect("nonempty") {
            let _ = writeln!(s, "{},{:.3},{:.6}", class.label(), x, f);
        }
    }
    written.push(write_file(out_dir, "latency_cdf.csv", &s)?);

    let mut s = header.clone();
    s.push_str("key,value\n");
    for class in UeClass::ALL {
        let _ = writeln!(
            s,
            "generated_{}_bits,{}",
            class.label(),
            bundle.generated_bits[class.index()]
        );
        let _ = writeln!(
            s,
            "delivered_{}_bits,{}",
            class.label(),
            bundle.delivered_bits[class.index()]
        );
    }
    let _ = writeln!(s, "ul_generated_bits,{}", bundle.ul_generated_bits);
    let _ = writeln!(s, "ul_delivered_bits,{}", bundle.ul_delivered_bits);
    for cat in LinkCategory::ALL {
        let _ = writeln!(
            s,
            "transmissions_{},{}",
            cat.label(),
            bundle.transmissions[cat.index()]
        );
        let _ = writeln!(
            s,
            "decode_errors_{},{}",
            cat.label(),
            bundle.decode_errors[cat.index()]
        );
    }
    written.push(write_file(out_dir, "totals.csv", &s)?);

    let mut s = header.clone();
    s.push_str("category,mcs,count\n");
    for cat in LinkCategory::ALL {
        for (mcs, count) in bundle.mcs_hist[cat.index()].iter().enumerate() {
            let _ = writeln!(s, "{},{},{}", cat.label(), mcs, count);
        }
    }
    written.push(write_file(out_dir, "mcs_hist.csv", &s)?);

    let mut s = header.clone();
    let _ = writeln!(s, "duration_slots = {}", bundle.duration_slots);
    for class in UeClass::ALL {
        let _ = writeln!(
            s,
            "median_throughput_bps_{} = {:.3}",
            class.label(),
            bundle.median_throughput_bps(class)
        );
        let _ = writeln!(
            s,
            "frac_above_3200000bps_{} = {:.6}",
            class.label(),
            bundle.frac_above_bps(class, 3.2e6)
        );
        let _ = writeln!(
            s,
            "p90_latency_ms_{} = {}",
            class.label(),
            bundle
                .p90_latency_ms(class)
                .map(|v| format!("{v:.3}"))
                .unwrap_or_else(|| "none".into())
        );
        let _ = writeln!(
            s,
            "delivered_fraction_{} = {:.6}",
            class.label(),
            bundle.delivered_fraction(class)
        );
    }
    for cat in LinkCategory::ALL {
        let _ = writeln!(s, "bler_{} = {:.6}", cat.label(), bundle.bler(cat));
    }
    written.push(write_file(out_dir, "summary.txt", &s)?);

    Ok(written)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, MetricsError> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|source| MetricsError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_bundle() -> MetricsBundle {
        MetricsBundle {
            config_hash: 0xabcd,
            seed: 7,
            duration_slots: 100,
            per_ue: vec![
                UeStats {
                    node_id: 10,
                    class: UeClass::Pedestrian,
                    generated_bits: 1000,
                    delivered_bits: 800,
                    active_slots: 50,
                    throughput_bps: 2.0e6,
                    p90_latency_ms: Some(10.0),
                },
                UeStats {
                    node_id: 11,
                    class: UeClass::Passenger,
                    generated_bits: 1000,
                    delivered_bits: 1000,
                    active_slots: 20,
                    throughput_bps: 5.0e6,
                    p90_latency_ms: Some(0.75),
                },
            ],
            latencies_ms: [vec![1.0, 2.0, 10.0], vec![0.5, 0.75]],
            mcs_hist: [vec![0; 29], vec![0; 29]],
            transmissions: [10, 5],
            decode_errors: [1, 0],
            generated_bits: [1000, 1000],
            delivered_bits: [800, 1000],
            ul_generated_bits: 0,
            ul_delivered_bits: 0,
        }
    }

    #[test]
    fn cdf_counts_fractions() {
        let values = [1.0, 2.0, 3.0];
        let out = cdf(&values, &[2.0]).unwrap();
        assert_eq!(out, vec![(2.0, 2.0 / 3.0)]);
    }

    #[test]
    fn cdf_of_constant_steps_zero_to_one() {
        let values = [5.0; 8];
        let out = cdf(&values, &[4.999, 5.0, 5.001]).unwrap();
        assert_eq!(out[0].1, 0.0);
        assert_eq!(out[1].1, 1.0);
        assert_eq!(out[2].1, 1.0);
    }

    #[test]
    fn cdf_rejects_empty_values() {
        assert!(matches!(cdf(&[], &[1.0]), Err(MetricsError::EmptyValues)));
    }

    #[test]
    fn cdf_is_nondecreasing_and_bounded() {
        let values: Vec<f64> = (0..100).map(|i| ((i * 37) % 100) as f64).collect();
        let grid: Vec<f64> = (0..150).map(|i| i as f64 - 20.0).collect();
        let out = cdf(&values, &grid).unwrap();
        let mut last = 0.0;
        for (_, f) in out {
            assert!((0.0..=1.0).contains(&f));
            assert!(f >= last);
            last = f;
        }
        assert_eq!(last, 1.0);
    }

    #[test]
    fn fraction_above_threshold_is_complement_of_cdf() {
        let b = tiny_bundle();
        // passenger throughputs: [5.0e6]; fraction above 3.2e6 = 1
        assert_eq!(b.frac_above_bps(UeClass::Passenger, 3.2e6), 1.0);
        assert_eq!(b.frac_above_bps(UeClass::Pedestrian, 3.2e6), 0.0);
    }

    #[test]
    fn delivered_fraction_in_unit_interval() {
        let b = tiny_bundle();
        for class in UeClass::ALL {
            let f = b.delivered_fraction(class);
            assert!((0.0..=1.0).contains(&f));
        }
        assert_eq!(b.delivered_fraction(UeClass::Pedestrian), 0.8);
    }

    #[test]
    fn export_writes_all_files_with_config_hash() {
        let dir = tempfile::tempdir().unwrap();
        let b = tiny_bundle();
        let files = export(&b, dir.path()).unwrap();
        assert_eq!(files.len(), 5);
        for name in EXPORT_FILES {
            let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
            assert!(
                text.starts_with("# config_hash=0x000000000000abcd"),
                "{name} missing hash header"
            );
        }
    }

    #[test]
    fn export_is_byte_stable() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let b = tiny_bundle();
        export(&b, dir_a.path()).unwrap();
        export(&b, dir_b.path()).unwrap();
        for name in EXPORT_FILES {
            let a = std::fs::read(dir_a.path().join(name)).unwrap();
            let bb = std::fs::read(dir_b.path().join(name)).unwrap();
            assert_eq!(a, bb, "{name} differs");
        }
    }

    #[test]
    fn quantiles_and_medians() {
        let sorted: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        assert_eq!(quantile_sorted(&sorted, 0.9), 9.0);
        assert_eq!(quantile_sorted(&sorted, 1.0), 10.0);
        let b = tiny_bundle();
        assert_eq!(b.p90_latency_ms(UeClass::Pedestrian), Some(10.0));
        assert_eq!(b.median_throughput_bps(UeClass::Passenger), 5.0e6);
    }
}
