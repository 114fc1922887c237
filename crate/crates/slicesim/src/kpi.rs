//! Per-slice queues and the KPI suite: Little's-law delay, task completion,
//! energy efficiency, timing-estimation variance, utilization, feasibility,
//! and Jain fairness, with across-trial aggregation.
//!
//! KPIs that are undefined for a trial (no arrivals, no energy spent, no
//! transmission) are carried as absent values — never as zeros — so they
//! cannot silently distort the across-trial averages.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Slot duration and campaign shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    /// Slot duration Δt in seconds.
    pub delta_t_s: f64,
    /// Slots per trial.
    pub slots_per_trial: u32,
    /// Independent trials per campaign.
    pub trials: u32,
}

impl SimParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.delta_t_s > 0.0) {
            return Err("delta_t_s must be positive".into());
        }
        if self.slots_per_trial < 1 {
            return Err("slots_per_trial must be >= 1".into());
        }
        if self.trials < 1 {
            return Err("trials must be >= 1".into());
        }
        Ok(())
    }
}

/// Backlog and cumulative accounting for one slice queue.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueueState {
    /// Current backlog in bits.
    pub q_bits: f64,
    /// Total offered traffic in bits.
    pub cum_arrival_bits: f64,
    /// Total traffic actually drained from the queue, in bits. Per slot this
    /// is min(R·Δt, backlog + arrivals), so it can never exceed what was
    /// offered plus what was already queued.
    pub cum_served_bits: f64,
    /// Total allocated service ΣR·Δt in bits (may exceed what was offered).
    pub cum_allocated_bits: f64,
    /// Total transmit energy in joules.
    pub cum_energy_joule: f64,
    /// Slots accumulated.
    pub slots: u64,
}

impl QueueState {
    /// Advances the queue one slot: backlog moves by the arrival/service
    /// difference and clamps at zero. Returns the bits served this slot.
    pub fn update(&mut self, arrival_bps: f64, rate_bps: f64, power_w: f64, delta_t: f64) -> f64 {
        debug_assert!(arrival_bps >= 0.0 && rate_bps >= 0.0 && power_w >= 0.0 && delta_t > 0.0);
        let arrived = arrival_bps * delta_t;
        let served = (rate_bps * delta_t).min(self.q_bits + arrived);
        self.q_bits = (self.q_bits + arrived - served).max(0.0);
        self.cum_arrival_bits += arrived;
        self.cum_served_bits += served;
        self.cum_allocated_bits += rate_bps * delta_t;
        self.cum_energy_joule += power_w * delta_t;
        self.slots += 1;
        served
    }
}

/// Average delay via Little's law: mean backlog over mean arrival rate.
/// Undefined (None) when no traffic was offered.
pub fn little_delay(q_history_bits: &[f64], arrival_history_bps: &[f64]) -> Option<f64> {
    assert_eq!(q_history_bits.len(), arrival_history_bps.len());
    if q_history_bits.is_empty() {
        return None;
    }
    let mean_q = q_history_bits.iter().sum::<f64>() / q_history_bits.len() as f64;
    let mean_a = arrival_history_bps.iter().sum::<f64>() / arrival_history_bps.len() as f64;
    if mean_a > 0.0 {
        Some(mean_q / mean_a)
    } else {
        None
    }
}

/// Served-over-offered ratio, capped at one for reporting. Undefined when
/// nothing was offered.
pub fn task_completion_ratio(cum_served_bits: f64, cum_arrival_bits: f64) -> Option<f64> {
    if cum_arrival_bits > 0.0 {
        Some((cum_served_bits / cum_arrival_bits).min(1.0))
    } else {
        None
    }
}

/// Bits delivered per joule. Undefined when no energy was spent.
pub fn energy_efficiency(bits: f64, energy_joule: f64) -> Option<f64> {
    if energy_joule > 0.0 {
        Some(bits / energy_joule)
    } else {
        None
    }
}

/// Time-delay estimation variance bound for a rectangular spectrum:
/// σ_τ² = 1 / (8π²·β²·SNR), in seconds².
pub fn crlb_timing(bandwidth_hz: f64, snr_linear: f64) -> f64 {
    assert!(bandwidth_hz > 0.0, "bandwidth must be positive");
    assert!(snr_linear > 0.0, "SNR must be positive");
    1.0 / (8.0 * PI * PI * bandwidth_hz * bandwidth_hz * snr_linear)
}

/// Jain fairness index (Σr)²/(S·Σr²). Undefined for an all-zero vector.
pub fn jain_index(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let sum: f64 = values.iter().sum();
    let sumsq: f64 = values.iter().map(|v| v * v).sum();
    if sumsq > 0.0 {
        Some(sum * sum / (values.len() as f64 * sumsq))
    } else {
        None
    }
}

/// Jain index of the element-wise ratios r/r_ideal; reflects how evenly
/// slices reach their own targets.
pub fn jain_normalized(rates: &[f64], ideals: &[f64]) -> Option<f64> {
    assert_eq!(rates.len(), ideals.len());
    assert!(ideals.iter().all(|&x| x > 0.0), "ideals must be positive");
    let ratios: Vec<f64> = rates.iter().zip(ideals).map(|(r, i)| r / i).collect();
    jain_index(&ratios)
}

/// Per-slice KPI vector of a single trial. Absent entries mean the KPI was
/// undefined for this trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceTrialKpis {
    pub mean_delay_s: Option<f64>,
    pub tcr: Option<f64>,
    /// Allocated-over-offered ratio ΣR/ΣA, uncapped.
    pub tcr_raw: Option<f64>,
    pub energy_eff_bits_per_joule: Option<f64>,
    pub crlb_tau_s2: Option<f64>,
    pub bw_util_frac: f64,
    pub power_util_frac: f64,
    pub expected_rate_given_feasible_bps: Option<f64>,
}

/// KPI vector of a single trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialKpis {
    pub per_slice: Vec<SliceTrialKpis>,
    pub feasibility_rate: f64,
    pub jain_absolute: Option<f64>,
    pub jain_normalized: Option<f64>,
}

/// Across-trial sample statistics for one KPI: mean, 95% normal-approximation
/// half-width (absent for a single sample), and the number of trials that
/// reported the KPI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub ci95: Option<f64>,
    pub n: usize,
}

fn aggregate(samples: impl Iterator<Item = Option<f64>>) -> Option<Stat> {
    let xs: Vec<f64> = samples.flatten().collect();
    if xs.is_empty() {
        return None;
    }
    let n = xs.len();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let ci95 = if n >= 2 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Some(1.96 * var.sqrt() / (n as f64).sqrt())
    } else {
        None
    };
    Some(Stat { mean, ci95, n })
}

/// Aggregated per-slice KPI statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceKpiStats {
    pub name: String,
    pub mean_delay_s: Option<Stat>,
    pub tcr: Option<Stat>,
    pub tcr_raw: Option<Stat>,
    pub energy_eff_bits_per_joule: Option<Stat>,
    pub crlb_tau_s2: Option<Stat>,
    pub bw_util_frac: Option<Stat>,
    pub power_util_frac: Option<Stat>,
    pub expected_rate_given_feasible_bps: Option<Stat>,
}

impl SliceKpiStats {
    /// (kpi name, statistic) pairs in the fixed reporting order.
    pub fn fields(&self) -> Vec<(&'static str, Option<Stat>)> {
        vec![
            ("mean_delay_s", self.mean_delay_s),
            ("tcr", self.tcr),
            ("tcr_raw", self.tcr_raw),
            ("energy_eff_bits_per_joule", self.energy_eff_bits_per_joule),
            ("crlb_tau_s2", self.crlb_tau_s2),
            ("bw_util_frac", self.bw_util_frac),
            ("power_util_frac", self.power_util_frac),
            (
                "expected_rate_given_feasible_bps",
                self.expected_rate_given_feasible_bps,
            ),
        ]
    }
}

/// Across-trial KPI report: one row of statistics per slice plus the global
/// feasibility and fairness figures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    pub slices: Vec<SliceKpiStats>,
    pub feasibility_rate: Option<Stat>,
    pub jain_absolute: Option<Stat>,
    pub jain_normalized: Option<Stat>,
}

impl KpiReport {
    /// Global (kpi name, statistic) pairs in the fixed reporting order.
    pub fn global_fields(&self) -> Vec<(&'static str, Option<Stat>)> {
        vec![
            ("feasibility_rate", self.feasibility_rate),
            ("jain_absolute", self.jain_absolute),
            ("jain_normalized", self.jain_normalized),
        ]
    }
}

/// Across-trial aggregation: mean and 95% half-width per KPI, computed over
/// the trials where the KPI was defined.
pub fn aggregate_trials(trials: &[TrialKpis], slice_names: &[String]) -> KpiReport {
    assert!(!trials.is_empty(), "at least one trial required");
    let num_slices = slice_names.len();
    let slices = (0..num_slices)
        .map(|s| SliceKpiStats {
            name: slice_names[s].clone(),
            mean_delay_s: aggregate(trials.iter().map(|t| t.per_slice[s].mean_delay_s)),
            tcr: aggregate(trials.iter().map(|t| t.per_slice[s].tcr)),
            tcr_raw: aggregate(trials.iter().map(|t| t.per_slice[s].tcr_raw)),
            energy_eff_bits_per_joule: aggregate(
                trials
                    .iter()
                    .map(|t| t.per_slice[s].energy_eff_bits_per_joule),
            ),
            crlb_tau_s2: aggregate(trials.iter().map(|t| t.per_slice[s].crlb_tau_s2)),
            bw_util_frac: aggregate(trials.iter().map(|t| Some(t.per_slice[s].bw_util_frac))),
            power_util_frac: aggregate(trials.iter().map(|t| Some(t.per_slice[s].power_util_frac))),
            expected_rate_given_feasible_bps: aggregate(
                trials
                    .iter()
                    .map(|t| t.per_slice[s].expected_rate_given_feasible_bps),
            ),
        })
        .collect();
    KpiReport {
        slices,
        feasibility_rate: aggregate(trials.iter().map(|t| Some(t.feasibility_rate))),
        jain_absolute: aggregate(trials.iter().map(|t| t.jain_absolute)),
        jain_normalized: aggregate(trials.iter().map(|t| t.jain_normalized)),
    }
}
