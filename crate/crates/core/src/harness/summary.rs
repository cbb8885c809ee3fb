//! Seed-averaged comparison of runs against a reference run.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::Serialize;
use statrs::statistics::Statistics;

use super::HarnessError;
use crate::sim::metrics::{fmt_num, time_averages, BASE_COLUMNS};
use crate::sim::MetricsSample;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub label: String,
    pub seeds: usize,
    pub delay_mean: f64,
    pub delay_sd: f64,
    pub density_mean: f64,
    pub density_sd: f64,
    /// Positive when the run has less delay than the reference.
    pub delay_change_pct: f64,
    pub density_change_pct: f64,
}

pub const SUMMARY_COLUMNS: [&str; 8] = [
    "label",
    "seeds",
    "delay_mean_s_per_km",
    "delay_sd",
    "density_mean_veh_per_km",
    "density_sd",
    "delay_change_pct",
    "density_change_pct",
];

impl SummaryRow {
    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.label.clone(),
            self.seeds.to_string(),
            fmt_num(self.delay_mean),
            fmt_num(self.delay_sd),
            fmt_num(self.density_mean),
            fmt_num(self.density_sd),
            fmt_num(self.delay_change_pct),
            fmt_num(self.density_change_pct),
        ]
    }
}

/// `(reference - run) / reference * 100`.
pub fn percent_change(reference: f64, run: f64) -> f64 {
    (reference - run) / reference * 100.0
}

/// Mean and sample standard deviation; the deviation of one value is 0.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let mean = xs.mean();
    let sd = if xs.len() < 2 { 0.0 } else { xs.std_dev() };
    (mean, sd)
}

/// `runs` holds `(label, per-seed (delay, density))` in output order.
pub fn summarize(runs: &[(String, Vec<(f64, f64)>)], reference: &str) -> Result<Vec<SummaryRow>, HarnessError> {
    let stats: Vec<_> = runs
        .iter()
        .map(|(label, v)| {
            if v.is_empty() {
                return Err(HarnessError::Format(format!("run '{label}' has no seeds")));
            }
            let d: Vec<f64> = v.iter().map(|p| p.0).collect();
            let r: Vec<f64> = v.iter().map(|p| p.1).collect();
            Ok((label, v.len(), mean_sd(&d), mean_sd(&r)))
        })
        .collect::<Result<_, _>>()?;
    let (_, _, (ref_delay, _), (ref_density, _)) = stats
        .iter()
        .find(|s| s.0 == reference)
        .ok_or_else(|| HarnessError::Spec(format!("reference run '{reference}' not found")))?;
    if *ref_delay == 0.0 || *ref_density == 0.0 {
        return Err(HarnessError::Format(format!("reference run '{reference}' has zero delay or density")));
    }
    Ok(stats
        .iter()
        .map(|(label, n, (dm, dsd), (rm, rsd))| SummaryRow {
            label: label.to_string(),
            seeds: *n,
            delay_mean: *dm,
            delay_sd: *dsd,
            density_mean: *rm,
            density_sd: *rsd,
            delay_change_pct: percent_change(*ref_delay, *dm),
            density_change_pct: percent_change(*ref_density, *rm),
        })
        .collect())
}

pub fn write_summary_csv(path: &Path, rows: &[SummaryRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(SUMMARY_COLUMNS).map_err(csv_err)?;
    for r in rows {
        w.write_record(r.csv_fields()).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> HarnessError {
    HarnessError::Format(e.to_string())
}

/// Reads a metrics CSV back into samples; returns the header too.
pub fn read_metrics_csv(path: &Path) -> Result<(Vec<String>, Vec<MetricsSample>), HarnessError> {
    let fmt = |msg: String| HarnessError::Format(format!("{}: {msg}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(|e| fmt(e.to_string()))?;
    let header: Vec<String> = r.headers().map_err(|e| fmt(e.to_string()))?.iter().map(str::to_string).collect();
    if header.len() < BASE_COLUMNS.len() || header[..BASE_COLUMNS.len()] != BASE_COLUMNS || (header.len() - BASE_COLUMNS.len()) % 2 != 0 {
        return Err(fmt(format!("not a metrics file, header {header:?}")));
    }
    let num = |s: &str| s.parse::<f64>().map_err(|e| fmt(format!("bad number '{s}': {e}")));
    let opt = |s: &str| if s.is_empty() { Ok(None) } else { num(s).map(Some) };
    let mut samples = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        let per = (BASE_COLUMNS.len()..rec.len())
            .step_by(2)
            .map(|i| Ok((opt(&rec[i])?, num(&rec[i + 1])?)))
            .collect::<Result<_, HarnessError>>()?;
        samples.push(MetricsSample { t: num(&rec[0])?, avg_delay: opt(&rec[1])?, avg_density: num(&rec[2])?, per_intersection: per });
    }
    Ok((header, samples))
}

/// Summarises an experiment directory laid out as `runs/<label>/seed_<n>.csv`.
/// Every file must share one header.
pub fn summarize_dir(dir: &Path, reference: &str) -> Result<Vec<SummaryRow>, HarnessError> {
    let runs_dir = dir.join("runs");
    if !runs_dir.is_dir() {
        return Err(HarnessError::Missing(format!("{} has no runs/ directory", dir.display())));
    }
    let mut header: Option<(Vec<String>, std::path::PathBuf)> = None;
    let mut runs: BTreeMap<String, Vec<(u64, (f64, f64))>> = BTreeMap::new();
    for entry in fs::read_dir(&runs_dir)? {
        let entry = entry?;
        if !entry.file_type()?.is_dir() {
            continue;
        }
        let label = entry.file_name().to_string_lossy().into_owned();
        let seeds = runs.entry(label.clone()).or_default();
        for file in fs::read_dir(entry.path())? {
            let path = file?.path();
            let Some(seed) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_prefix("seed_"))
                .and_then(|n| n.strip_suffix(".csv"))
                .and_then(|n| n.parse::<u64>().ok())
            else {
                continue;
            };
            let (h, samples) = read_metrics_csv(&path)?;
            match &header {
                None => header = Some((h, path.clone())),
                Some((first, at)) if *first != h => {
                    return Err(HarnessError::Format(format!(
                        "{} has columns {h:?} but {} has {first:?}",
                        path.display(),
                        at.display()
                    )))
                }
                Some(_) => {}
            }
            seeds.push((seed, time_averages(&samples)));
        }
        if seeds.is_empty() {
            return Err(HarnessError::Format(format!("run '{label}' has no seed_<n>.csv files")));
        }
    }
    let mut seed_lists = runs.values().map(|v| {
        let mut s: Vec<u64> = v.iter().map(|p| p.0).collect();
        s.sort_unstable();
        s
    });
    if let Some(first) = seed_lists.next() {
        if seed_lists.any(|s| s != first) {
            return Err(HarnessError::Format("runs do not share one seed list".into()));
        }
    }
    let runs: Vec<(String, Vec<(f64, f64)>)> = runs
        .into_iter()
        .map(|(label, mut v)| {
            v.sort_by_key(|p| p.0);
            (label, v.into_iter().map(|p| p.1).collect())
        })
        .collect();
    summarize(&runs, reference)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percent_change_sign() {
        assert_eq!(percent_change(200.0, 150.0), 25.0);
        assert_eq!(percent_change(100.0, 120.0), -20.0);
    }

    #[test]
    fn mean_and_sample_sd() {
        let (m, sd) = mean_sd(&[40.0, 50.0, 60.0]);
        assert_eq!(m, 50.0);
        assert!((sd - 10.0).abs() < 1e-12);
        assert_eq!(mean_sd(&[3.0]), (3.0, 0.0));
    }

    #[test]
    fn reference_row_is_zero_change() {
        let runs = vec![
            ("FST60".to_string(), vec![(100.0, 10.0), (120.0, 14.0)]),
            ("agent".to_string(), vec![(80.0, 9.0), (90.0, 9.0)]),
        ];
        let rows = summarize(&runs, "FST60").unwrap();
        assert_eq!(rows[0].delay_change_pct, 0.0);
        assert!((rows[1].delay_change_pct - 22.727272727272727).abs() < 1e-9);
        assert!((rows[1].density_change_pct - 25.0).abs() < 1e-9);
        assert!(matches!(summarize(&runs, "nope"), Err(HarnessError::Spec(_))));
    }
}
