//! Monte Carlo orchestration: N independent trials of T slots each,
//! parallel across trials, deterministic regardless of worker count.
//!
//! Within a slot the pipeline order is fixed so seeds reproduce exactly:
//! traffic step → fading step → demand/problem assembly → solve → queue and
//! energy accounting. Slots within a trial are sequential (they are coupled
//! through the fading state and the queues); trials own disjoint
//! environment substreams and run in any order, with results collected by
//! trial index.

use crate::config::{ScenarioConfig, SliceScenario};
use crate::env::{make_env, slot_demand};
use crate::kpi::{
    aggregate_trials, crlb_timing, energy_efficiency, jain_index, jain_normalized, little_delay,
    task_completion_ratio, KpiReport, QueueState, SliceTrialKpis, TrialKpis,
};
use crate::phy::{effective_se_table, feasibility_mask, power_slope_table, NUM_CQI};
use crate::solver::{solve_slot, SliceProblem, SlotProblem, SolveStatus};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::str::FromStr;
use std::time::Instant;

/// Per-slice data recorded for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceSlotRecord {
    pub h_db: f64,
    pub burst: bool,
    pub arrival_bps: f64,
    pub r_min_bps: f64,
    pub r_ideal_bps: f64,
    pub cqi: Option<u8>,
    pub bw_prb: f64,
    pub power_w: f64,
    pub rate_bps: f64,
    pub deviation_bps: Option<f64>,
    pub slack_bps: Option<f64>,
    /// Backlog after this slot's service, bits.
    pub queue_bits: f64,
}

/// One slot across all slices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord {
    pub slot: u32,
    pub status: SolveStatus,
    pub slices: Vec<SliceSlotRecord>,
}

/// Wall-time statistics of the per-slot solves within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveTimeStats {
    pub mean_s: f64,
    pub max_s: f64,
}

/// Full record of one trial: the per-slot time series and the trial's KPI
/// vector. Slot records are immutable once written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub slots: Vec<SlotRecord>,
    pub kpis: TrialKpis,
    pub solve_time: SolveTimeStats,
}

/// Campaign output: aggregated KPIs plus every trial record in trial order.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub report: KpiReport,
    pub trials: Vec<TrialRecord>,
}

/// Runs one trial: steps the environment, assembles and solves each slot,
/// and accumulates queues, energy, and KPIs. The solver never aborts a
/// trial — infeasible slots fall back to the least-violation relaxation.
pub fn run_trial(config: &ScenarioConfig, trial: u64) -> TrialRecord {
    let table = config.cqi_table().expect("validated config");
    let link = config.link.to_link_budget();
    let num_slices = config.slices.len();
    let delta_t = config.sim.delta_t_s;
    let slots_per_trial = config.sim.slots_per_trial;

    // The effective-SE table depends only on the CQI table and each slice's
    // short-packet regime, so it is hoisted out of the slot loop.
    let se_eff: Vec<[f64; NUM_CQI]> = config
        .slices
        .iter()
        .map(|s| {
            let se = effective_se_table(&table, &s.fbl);
            std::array::from_fn(|m| se[m] * link.prb_width_hz)
        })
        .collect();

    let env_params: Vec<_> = config
        .slices
        .iter()
        .map(|s| (s.fading, s.traffic))
        .collect();
    let mut env = make_env(config.master_seed, trial, &env_params);

    let mut queues = vec![QueueState::default(); num_slices];
    let mut slots = Vec::with_capacity(slots_per_trial as usize);
    let mut q_hist = vec![Vec::with_capacity(slots_per_trial as usize); num_slices];
    let mut a_hist = vec![Vec::with_capacity(slots_per_trial as usize); num_slices];
    let mut rate_sum = vec![0.0f64; num_slices];
    let mut bw_util_sum = vec![0.0f64; num_slices];
    let mut p_util_sum = vec![0.0f64; num_slices];
    let mut crlb_sum = vec![0.0f64; num_slices];
    let mut crlb_count = vec![0u64; num_slices];
    let mut feas_rate_sum = vec![0.0f64; num_slices];
    let mut feasible_slots = 0u64;
    let mut solve_total = 0.0f64;
    let mut solve_max = 0.0f64;

    for slot_idx in 0..slots_per_trial {
        // 1. traffic, then fading (fixed pipeline order)
        let bursts: Vec<bool> = (0..num_slices)
            .map(|i| env.step_traffic(i, &config.slices[i].traffic))
            .collect();
        let gains: Vec<(f64, f64)> = (0..num_slices)
            .map(|i| env.step_fading(i, &config.slices[i].fading))
            .collect();

        // 2. demand and per-slice problem assembly
        let demands: Vec<_> = config
            .slices
            .iter()
            .enumerate()
            .map(|(i, s)| slot_demand(s.r_min_bps, s.r_ideal_bps, s.traffic.kappa, bursts[i]))
            .collect();
        let slices: Vec<SliceProblem> = config
            .slices
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let alpha = power_slope_table(gains[i].1, &table, &link)
                    .expect("linear gain is positive by construction");
                let usable =
                    feasibility_mask(&alpha, link.psd_min_w_per_prb, s.b_cap_prb, s.p_cap_w);
                SliceProblem {
                    se_eff_bps_per_prb: se_eff[i],
                    alpha_w_per_prb: alpha,
                    usable,
                    b_cap_prb: s.b_cap_prb,
                    p_cap_w: s.p_cap_w,
                    r_min_bps: demands[i].r_min_bps,
                    r_ideal_bps: demands[i].r_ideal_bps,
                    beta: s.beta,
                    psd_min_w_per_prb: link.psd_min_w_per_prb,
                }
            })
            .collect();
        let problem = SlotProblem {
            slices,
            weights: config.weights,
        };

        // 3. solve
        let t0 = Instant::now();
        let alloc = solve_slot(&problem, config.mode);
        let dt = t0.elapsed().as_secs_f64();
        solve_total += dt;
        solve_max = solve_max.max(dt);

        let feasible = alloc.status != SolveStatus::FallbackRelaxed;
        if feasible {
            feasible_slots += 1;
        }

        // 4. queues, energy, KPI accumulators
        let mut slice_records = Vec::with_capacity(num_slices);
        for i in 0..num_slices {
            let a = &alloc.slices[i];
            queues[i].update(demands[i].arrival_bps, a.rate_bps, a.power_w, delta_t);
            q_hist[i].push(queues[i].q_bits);
            a_hist[i].push(demands[i].arrival_bps);
            rate_sum[i] += a.rate_bps;
            bw_util_sum[i] += a.bw_prb / config.slices[i].b_cap_prb;
            p_util_sum[i] += a.power_w / config.slices[i].p_cap_w;
            if feasible {
                feas_rate_sum[i] += a.rate_bps;
            }
            if a.bw_prb > 0.0 && a.power_w > 0.0 {
                let beta_hz = a.bw_prb * link.prb_width_hz;
                let snr = gains[i].1 * a.power_w / (link.n0_per_prb_w * a.bw_prb);
                crlb_sum[i] += crlb_timing(beta_hz, snr);
                crlb_count[i] += 1;
            }
            slice_records.push(SliceSlotRecord {
                h_db: gains[i].0,
                burst: bursts[i],
                arrival_bps: demands[i].arrival_bps,
                r_min_bps: demands[i].r_min_bps,
                r_ideal_bps: demands[i].r_ideal_bps,
                cqi: a.cqi,
                bw_prb: a.bw_prb,
                power_w: a.power_w,
                rate_bps: a.rate_bps,
                deviation_bps: a.deviation_bps,
                slack_bps: a.slack_bps,
                queue_bits: queues[i].q_bits,
            });
        }
        slots.push(SlotRecord {
            slot: slot_idx,
            status: alloc.status,
            slices: slice_records,
        });
    }

    let t = slots_per_trial as f64;
    let mean_rates: Vec<f64> = rate_sum.iter().map(|r| r / t).collect();
    let ideals: Vec<f64> = config.slices.iter().map(|s| s.r_ideal_bps).collect();
    let per_slice = (0..num_slices)
        .map(|i| SliceTrialKpis {
            mean_delay_s: little_delay(&q_hist[i], &a_hist[i]),
            tcr: task_completion_ratio(queues[i].cum_served_bits, queues[i].cum_arrival_bits),
            tcr_raw: if queues[i].cum_arrival_bits > 0.0 {
                Some(queues[i].cum_allocated_bits / queues[i].cum_arrival_bits)
            } else {
                None
            },
            energy_eff_bits_per_joule: energy_efficiency(
                queues[i].cum_allocated_bits,
                queues[i].cum_energy_joule,
            ),
            crlb_tau_s2: if crlb_count[i] > 0 {
                Some(crlb_sum[i] / crlb_count[i] as f64)
            } else {
                None
            },
            bw_util_frac: bw_util_sum[i] / t,
            power_util_frac: p_util_sum[i] / t,
            expected_rate_given_feasible_bps: if feasible_slots > 0 {
                Some(feas_rate_sum[i] / feasible_slots as f64)
            } else {
                None
            },
        })
        .collect();

    TrialRecord {
        trial,
        slots,
        kpis: TrialKpis {
            per_slice,
            feasibility_rate: feasible_slots as f64 / t,
            jain_absolute: jain_index(&mean_rates),
            jain_normalized: jain_normalized(&mean_rates, &ideals),
        },
        solve_time: SolveTimeStats {
            mean_s: solve_total / t,
            max_s: solve_max,
        },
    }
}

/// Runs the whole campaign on the global thread pool. Trials execute in
/// parallel; results are ordered by trial index regardless of completion
/// order, so the report is invariant to the worker count.
pub fn run_campaign(config: &ScenarioConfig) -> CampaignResult {
    let trials: Vec<TrialRecord> = (0..config.sim.trials as u64)
        .into_par_iter()
        .map(|t| run_trial(config, t))
        .collect();
    let kpi_vectors: Vec<TrialKpis> = trials.iter().map(|t| t.kpis.clone()).collect();
    let report = aggregate_trials(&kpi_vectors, &config.slice_names());
    CampaignResult { report, trials }
}

/// Same as [`run_campaign`] but on a dedicated pool of `workers` threads.
pub fn run_campaign_with_workers(config: &ScenarioConfig, workers: usize) -> CampaignResult {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("failed to build worker pool");
    pool.install(|| run_campaign(config))
}

/// Scalars that [`run_sweep`] can scale across campaign runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKnob {
    /// Scale every slice's tracking weight β.
    BetaScale,
    /// Scale the per-PRB penalty λ_B.
    LambdaBScale,
    /// Scale the per-watt penalty λ_P.
    LambdaPScale,
    /// Scale every slice's power cap.
    PCapScale,
    /// Scale every slice's bandwidth cap.
    BCapScale,
}

impl SweepKnob {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepKnob::BetaScale => "beta_scale",
            SweepKnob::LambdaBScale => "lambda_b_scale",
            SweepKnob::LambdaPScale => "lambda_p_scale",
            SweepKnob::PCapScale => "p_cap_scale",
            SweepKnob::BCapScale => "b_cap_scale",
        }
    }

    pub fn apply(&self, config: &ScenarioConfig, value: f64) -> ScenarioConfig {
        let mut cfg = config.clone();
        match self {
            SweepKnob::BetaScale => {
                for s in &mut cfg.slices {
                    s.beta *= value;
                }
            }
            SweepKnob::LambdaBScale => cfg.weights.lambda_b *= value,
            SweepKnob::LambdaPScale => cfg.weights.lambda_p *= value,
            SweepKnob::PCapScale => {
                for s in &mut cfg.slices {
                    s.p_cap_w *= value;
                }
            }
            SweepKnob::BCapScale => {
                for s in &mut cfg.slices {
                    s.b_cap_prb *= value;
                }
            }
        }
        cfg
    }
}

impl FromStr for SweepKnob {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "beta_scale" => Ok(SweepKnob::BetaScale),
            "lambda_b_scale" => Ok(SweepKnob::LambdaBScale),
            "lambda_p_scale" => Ok(SweepKnob::LambdaPScale),
            "p_cap_scale" => Ok(SweepKnob::PCapScale),
            "b_cap_scale" => Ok(SweepKnob::BCapScale),
            other => Err(format!(
                "unknown sweep knob '{other}' (expected one of beta_scale, lambda_b_scale, \
                 lambda_p_scale, p_cap_scale, b_cap_scale)"
            )),
        }
    }
}

/// Runs one campaign per knob value, all from the same master seed, and
/// returns the per-value reports in input order. An empty value list yields
/// an empty result.
pub fn run_sweep(base: &ScenarioConfig, knob: SweepKnob, values: &[f64]) -> Vec<(f64, KpiReport)> {
    values
        .iter()
        .map(|&v| {
            let cfg = knob.apply(base, v);
            (v, run_campaign(&cfg).report)
        })
        .collect()
}

/// Slices of a [`ScenarioConfig`] in the `(fading, traffic)` form consumed
/// by [`make_env`]; exposed for tests that drive the environment directly.
pub fn env_params(
    slices: &[SliceScenario],
) -> Vec<(crate::env::FadingParams, crate::env::TrafficParams)> {
    slices.iter().map(|s| (s.fading, s.traffic)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{baseline_preset, chaser_preset};

    fn tiny(config: &ScenarioConfig, trials: u32, slots: u32) -> ScenarioConfig {
        let mut cfg = config.clone();
        cfg.sim.trials = trials;
        cfg.sim.slots_per_trial = slots;
        cfg
    }

    #[test]
    fn static_feasible_channel_repeats_allocation() {
        let mut cfg = tiny(&baseline_preset(), 1, 10);
        for s in &mut cfg.slices {
            s.fading.sigma_db = 0.0; // deterministic channel
            s.traffic.p_off_to_on = 0.0; // no bursts
        }
        let rec = run_trial(&cfg, 0);
        let first = &rec.slots[0];
        for slot in &rec.slots {
            assert_eq!(slot.status, SolveStatus::Phase1Feasible);
            for (a, b) in slot.slices.iter().zip(&first.slices) {
                assert_eq!(a.cqi, b.cqi);
                assert_eq!(a.bw_prb, b.bw_prb);
                assert_eq!(a.rate_bps, b.rate_bps);
            }
        }
    }

    #[test]
    fn dead_channel_falls_back_every_slot() {
        let mut cfg = tiny(&baseline_preset(), 1, 8);
        for s in &mut cfg.slices {
            s.fading.mean_db = -300.0;
        }
        let rec = run_trial(&cfg, 0);
        assert_eq!(rec.kpis.feasibility_rate, 0.0);
        for slot in &rec.slots {
            assert_eq!(slot.status, SolveStatus::FallbackRelaxed);
        }
        for sk in &rec.kpis.per_slice {
            assert_eq!(sk.tcr, Some(0.0));
            assert_eq!(sk.expected_rate_given_feasible_bps, None);
            assert_eq!(sk.crlb_tau_s2, None);
        }
    }

    #[test]
    fn trials_are_reproducible() {
        let cfg = tiny(&chaser_preset(), 1, 12);
        let a = run_trial(&cfg, 3);
        let b = run_trial(&cfg, 3);
        assert_eq!(a.slots, b.slots);
        assert_eq!(a.kpis, b.kpis);
    }

    #[test]
    fn single_trial_report_echoes_trial_kpis() {
        let cfg = tiny(&baseline_preset(), 1, 10);
        let result = run_campaign(&cfg);
        assert_eq!(result.trials.len(), 1);
        let trial = &result.trials[0].kpis;
        let report = &result.report;
        let tcr = report.slices[0].tcr.unwrap();
        assert_eq!(Some(tcr.mean), trial.per_slice[0].tcr);
        assert_eq!(tcr.ci95, None); // single sample
        assert_eq!(tcr.n, 1);
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let cfg = tiny(&chaser_preset(), 6, 10);
        let a = run_campaign_with_workers(&cfg, 1);
        let b = run_campaign_with_workers(&cfg, 8);
        assert_eq!(a.report, b.report);
        // everything but wall-clock solve timings is bit-identical
        for (ta, tb) in a.trials.iter().zip(&b.trials) {
            assert_eq!(ta.trial, tb.trial);
            assert_eq!(ta.slots, tb.slots);
            assert_eq!(ta.kpis, tb.kpis);
        }
    }

    #[test]
    fn sweep_empty_values_empty_output() {
        let cfg = tiny(&baseline_preset(), 1, 4);
        assert!(run_sweep(&cfg, SweepKnob::PCapScale, &[]).is_empty());
    }

    #[test]
    fn sweep_knob_parsing() {
        assert_eq!("p_cap_scale".parse::<SweepKnob>(), Ok(SweepKnob::PCapScale));
        assert!("bogus".parse::<SweepKnob>().is_err());
    }

    #[test]
    fn sweep_applies_scales() {
        let cfg = baseline_preset();
        let scaled = SweepKnob::PCapScale.apply(&cfg, 2.0);
        assert_eq!(scaled.slices[0].p_cap_w, 18.0);
        let scaled = SweepKnob::LambdaPScale.apply(&cfg, 0.5);
        assert_eq!(scaled.weights.lambda_p, 5e-4);
    }

    #[test]
    fn every_slot_gets_exactly_one_status() {
        let cfg = tiny(&chaser_preset(), 2, 9);
        let result = run_campaign(&cfg);
        for trial in &result.trials {
            assert_eq!(trial.slots.len(), 9);
        }
    }

    #[test]
    fn raising_power_penalty_never_raises_power_use() {
        // chaser operation with growing λ_P shifts the allocator toward
        // cheaper-power operating points
        let mut cfg = tiny(&baseline_preset(), 8, 20);
        cfg.mode = crate::solver::Mode::IdealChaser;
        let results = run_sweep(&cfg, SweepKnob::LambdaPScale, &[1.0, 1e3, 1e6, 1e9]);
        for s in 0..cfg.slices.len() {
            let utils: Vec<f64> = results
                .iter()
                .map(|(_, r)| r.slices[s].power_util_frac.unwrap().mean)
                .collect();
            for w in utils.windows(2) {
                assert!(
                    w[1] <= w[0] + 1e-12,
                    "slice {s}: power utilization rose with lambda_p: {utils:?}"
                );
            }
        }
    }
}
