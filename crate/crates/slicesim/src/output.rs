//! Result serialization. CSV is the canonical tabular format; JSON mirrors
//! it for programmatic use. Every float is printed with 9 significant
//! digits so repeated runs stay byte-identical; absent KPI values print as
//! empty fields, never as zeros.
//!
//! File schemas (headers are fixed):
//! * `kpi_summary.csv` — `slice,kpi,mean,ci95` (global rows use slice `all`)
//! * `slot_trace.csv` — `trial,slot,slice,h_db,burst,arrival_bps,cqi,bw_prb,power_w,rate_bps,deviation,slack,status`
//! * `sweep_table.csv` — `knob,knob_value,slice,kpi,mean,ci95,normalized`
//! * `manifest.json` — artifact version, master seed, fully resolved config

use crate::config::{Manifest, ScenarioConfig};
use crate::harness::TrialRecord;
use crate::kpi::{KpiReport, Stat};
use std::io::Write;
use std::path::Path;

/// 9-significant-digit scientific notation, the fixed float format of every
/// CSV emitted by this crate.
pub fn fmt_sig9(x: f64) -> String {
    format!("{:.8e}", x)
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_sig9).unwrap_or_default()
}

fn stat_cells(stat: Option<Stat>) -> (String, String) {
    match stat {
        Some(s) => (fmt_sig9(s.mean), fmt_opt(s.ci95)),
        None => (String::new(), String::new()),
    }
}

/// Renders the KPI summary table: one row per (slice, kpi), then the global
/// KPIs under the pseudo-slice `all`.
pub fn kpi_summary_csv(report: &KpiReport) -> String {
    let mut out = String::from("slice,kpi,mean,ci95\n");
    for slice in &report.slices {
        for (kpi, stat) in slice.fields() {
            let (mean, ci) = stat_cells(stat);
            out.push_str(&format!("{},{},{},{}\n", slice.name, kpi, mean, ci));
        }
    }
    for (kpi, stat) in report.global_fields() {
        let (mean, ci) = stat_cells(stat);
        out.push_str(&format!("all,{},{},{}\n", kpi, mean, ci));
    }
    out
}

/// Long-format per-slot trace across all trials.
pub fn slot_trace_csv(trials: &[TrialRecord], slice_names: &[String]) -> String {
    let mut out = String::from(
        "trial,slot,slice,h_db,burst,arrival_bps,cqi,bw_prb,power_w,rate_bps,deviation,slack,status\n",
    );
    for trial in trials {
        for slot in &trial.slots {
            for (i, s) in slot.slices.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                    trial.trial,
                    slot.slot,
                    slice_names[i],
                    fmt_sig9(s.h_db),
                    if s.burst { 1 } else { 0 },
                    fmt_sig9(s.arrival_bps),
                    s.cqi.map(|c| c.to_string()).unwrap_or_else(|| "0".into()),
                    fmt_sig9(s.bw_prb),
                    fmt_sig9(s.power_w),
                    fmt_sig9(s.rate_bps),
                    fmt_opt(s.deviation_bps),
                    fmt_opt(s.slack_bps),
                    slot.status.as_str(),
                ));
            }
        }
    }
    out
}

/// Long-format sweep table with a min-max normalized column per
/// (slice, kpi) series across the knob values. A degenerate series (single
/// value or zero range) normalizes to 0.
pub fn sweep_table_csv(knob: &str, results: &[(f64, KpiReport)]) -> String {
    let mut out = String::from("knob,knob_value,slice,kpi,mean,ci95,normalized\n");
    if results.is_empty() {
        return out;
    }

    // rows: (knob_value, slice, kpi, stat)
    let mut rows: Vec<(f64, String, &'static str, Option<Stat>)> = Vec::new();
    for (value, report) in results {
        for slice in &report.slices {
            for (kpi, stat) in slice.fields() {
                rows.push((*value, slice.name.clone(), kpi, stat));
            }
        }
        for (kpi, stat) in report.global_fields() {
            rows.push((*value, "all".into(), kpi, stat));
        }
    }

    let normalized = |slice: &str, kpi: &str, mean: f64| -> f64 {
        let series: Vec<f64> = rows
            .iter()
            .filter(|(_, s, k, st)| s == slice && *k == kpi && st.is_some())
            .map(|(_, _, _, st)| st.unwrap().mean)
            .collect();
        let (lo, hi) = series
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if hi > lo {
            (mean - lo) / (hi - lo)
        } else {
            0.0
        }
    };

    for (value, slice, kpi, stat) in &rows {
        let (mean_cell, ci_cell) = stat_cells(*stat);
        let norm_cell = stat
            .map(|s| fmt_sig9(normalized(slice, kpi, s.mean)))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            knob,
            fmt_sig9(*value),
            slice,
            kpi,
            mean_cell,
            ci_cell,
            norm_cell,
        ));
    }
    out
}

/// Serializes the manifest for a resolved config.
pub fn manifest_json(config: &ScenarioConfig) -> String {
    let manifest = Manifest::new(config.clone());
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    text
}

/// Serializes the KPI report.
pub fn kpi_summary_json(report: &KpiReport) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

pub fn write_file(path: &Path, contents: &str) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(contents.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::baseline_preset;
    use crate::harness::run_campaign;

    fn tiny_result() -> (crate::harness::CampaignResult, Vec<String>) {
        let mut cfg = baseline_preset();
        cfg.sim.trials = 2;
        cfg.sim.slots_per_trial = 5;
        let names = cfg.slice_names();
        (run_campaign(&cfg), names)
    }

    #[test]
    fn sig9_formatting() {
        assert_eq!(fmt_sig9(1234567.89), "1.23456789e6");
        assert_eq!(fmt_sig9(0.5), "5.00000000e-1");
        assert_eq!(fmt_sig9(0.0), "0.00000000e0");
    }

    #[test]
    fn kpi_summary_has_fixed_header_and_slice_rows() {
        let (result, _) = tiny_result();
        let csv = kpi_summary_csv(&result.report);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("slice,kpi,mean,ci95"));
        assert!(csv.contains("eMBB,tcr,"));
        assert!(csv.contains("URLLC,mean_delay_s,"));
        assert!(csv.contains("all,feasibility_rate,"));
        // 3 slices × 8 KPIs + 3 global + header
        assert_eq!(csv.lines().count(), 1 + 3 * 8 + 3);
    }

    #[test]
    fn slot_trace_shape() {
        let (result, names) = tiny_result();
        let csv = slot_trace_csv(&result.trials, &names);
        // header + trials × slots × slices
        assert_eq!(csv.lines().count(), 1 + 2 * 5 * 3);
        assert!(csv.starts_with("trial,slot,slice,h_db,burst,"));
    }

    #[test]
    fn serialization_is_deterministic() {
        let (a, names_a) = tiny_result();
        let (b, names_b) = tiny_result();
        assert_eq!(kpi_summary_csv(&a.report), kpi_summary_csv(&b.report));
        assert_eq!(
            slot_trace_csv(&a.trials, &names_a),
            slot_trace_csv(&b.trials, &names_b)
        );
        assert_eq!(kpi_summary_json(&a.report), kpi_summary_json(&b.report));
    }

    #[test]
    fn sweep_normalization_bounds() {
        let mut cfg = baseline_preset();
        cfg.sim.trials = 1;
        cfg.sim.slots_per_trial = 4;
        let results =
            crate::harness::run_sweep(&cfg, crate::harness::SweepKnob::PCapScale, &[0.5, 1.0, 2.0]);
        let csv = sweep_table_csv("p_cap_scale", &results);
        for line in csv.lines().skip(1) {
            let norm = line.split(',').nth(6).unwrap();
            if !norm.is_empty() {
                let v: f64 = norm.parse().unwrap();
                assert!((0.0..=1.0).contains(&v), "normalized out of range: {line}");
            }
        }
    }

    #[test]
    fn manifest_embeds_full_config() {
        let cfg = baseline_preset();
        let text = manifest_json(&cfg);
        let manifest: crate::config::Manifest = serde_json::from_str(&text).unwrap();
        assert_eq!(manifest.config, cfg);
        assert_eq!(manifest.master_seed, cfg.master_seed);
    }
}
