//! Per-slot random environment: correlated dB-domain fading, ON/OFF burst
//! states, and burst-adjusted demand, all reproducible from a master seed.
//!
//! Every (trial, slice, process) triple owns its own ChaCha stream so that
//! trials can run on any number of workers without sharing state: the
//! generator is keyed by the master seed and the 64-bit stream id
//! `trial << 16 | slice << 8 | process`. Two runs with equal seeds produce
//! identical draws regardless of scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// First-order autoregressive fading parameters (dB domain).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FadingParams {
    /// Temporal correlation coefficient ρ in [0, 1).
    pub rho: f64,
    /// Innovation standard deviation in dB; with the √(1−ρ²) scaling this
    /// is also the stationary standard deviation of the gain in dB.
    pub sigma_db: f64,
    /// Long-run mean gain in dB.
    pub mean_db: f64,
}

impl FadingParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err("rho must lie in [0, 1)".into());
        }
        if !(self.sigma_db >= 0.0) {
            return Err("sigma_db must be >= 0".into());
        }
        if !self.mean_db.is_finite() {
            return Err("mean_db must be finite".into());
        }
        Ok(())
    }
}

/// Burst state of the ON/OFF Markov traffic model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BurstState {
    On,
    Off,
}

/// ON/OFF Markov traffic parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrafficParams {
    pub p_on_to_off: f64,
    pub p_off_to_on: f64,
    /// Demand amplification κ ≥ 1 applied to the rate target during bursts.
    pub kappa: f64,
    pub initial_state: BurstState,
}

impl TrafficParams {
    pub fn validate(&self) -> Result<(), String> {
        for (name, p) in [
            ("p_on_to_off", self.p_on_to_off),
            ("p_off_to_on", self.p_off_to_on),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        if !(self.kappa >= 1.0) {
            return Err("kappa must be >= 1".into());
        }
        Ok(())
    }
}

/// Demand figures for one slice in one slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlotDemand {
    /// Offered traffic A = R_min + δ·κ·R_ideal, bit/s.
    pub arrival_bps: f64,
    /// Burst-adjusted rate target, bit/s.
    pub r_ideal_bps: f64,
    /// Rate floor, bit/s (never burst-amplified).
    pub r_min_bps: f64,
}

/// Offered traffic and the burst-adjusted targets for a slot. The floor is
/// untouched by bursts; during OFF periods the slice is driven at its
/// minimum rate through the arrival term alone.
pub fn slot_demand(r_min_bps: f64, r_ideal_bps: f64, kappa: f64, burst: bool) -> SlotDemand {
    let delta = if burst { 1.0 } else { 0.0 };
    SlotDemand {
        arrival_bps: r_min_bps + delta * kappa * r_ideal_bps,
        r_ideal_bps: if burst {
            kappa * r_ideal_bps
        } else {
            r_ideal_bps
        },
        r_min_bps,
    }
}

const PROCESS_FADING: u64 = 0;
const PROCESS_TRAFFIC: u64 = 1;

fn stream_rng(master_seed: u64, trial: u64, slice: usize, process: u64) -> ChaCha12Rng {
    assert!(trial < 1 << 48, "trial index exceeds the stream id budget");
    assert!(slice < 256, "slice index exceeds the stream id budget");
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream((trial << 16) | ((slice as u64) << 8) | process);
    rng
}

/// Environment state for one slice within one trial.
#[derive(Debug, Clone)]
struct SliceEnv {
    h_db: f64,
    burst: bool,
    fading_rng: ChaCha12Rng,
    traffic_rng: ChaCha12Rng,
}

/// Per-trial environment: confined to one trial worker, no cross-trial
/// synchronization. The gain starts at the configured mean and the burst
/// flag at the configured initial state.
#[derive(Debug, Clone)]
pub struct EnvState {
    slices: Vec<SliceEnv>,
}

/// Derives independent per-(trial, slice, process) substreams from the
/// master seed. Equal arguments produce identical streams.
pub fn make_env(
    master_seed: u64,
    trial: u64,
    slices: &[(FadingParams, TrafficParams)],
) -> EnvState {
    let slices = slices
        .iter()
        .enumerate()
        .map(|(i, (fading, traffic))| SliceEnv {
            h_db: fading.mean_db,
            burst: traffic.initial_state == BurstState::On,
            fading_rng: stream_rng(master_seed, trial, i, PROCESS_FADING),
            traffic_rng: stream_rng(master_seed, trial, i, PROCESS_TRAFFIC),
        })
        .collect();
    EnvState { slices }
}

impl EnvState {
    pub fn num_slices(&self) -> usize {
        self.slices.len()
    }

    /// Advances the mean-centered AR(1) gain of slice `idx`:
    /// h ← μ + ρ(h − μ) + √(1−ρ²)·σ·ξ with ξ drawn from the slice's fading
    /// stream. Returns (gain in dB, linear gain). Exactly one normal draw
    /// per call keeps streams aligned across parameterizations.
    pub fn step_fading(&mut self, idx: usize, params: &FadingParams) -> (f64, f64) {
        let env = &mut self.slices[idx];
        let xi: f64 = env.fading_rng.sample(StandardNormal);
        env.h_db = params.mean_db
            + params.rho * (env.h_db - params.mean_db)
            + (1.0 - params.rho * params.rho).sqrt() * params.sigma_db * xi;
        (env.h_db, 10f64.powf(env.h_db / 10.0))
    }

    /// Advances the ON/OFF Markov chain of slice `idx` and returns the new
    /// burst flag. Exactly one uniform draw per call.
    pub fn step_traffic(&mut self, idx: usize, params: &TrafficParams) -> bool {
        let env = &mut self.slices[idx];
        let u: f64 = env.traffic_rng.gen();
        env.burst = if env.burst {
            u >= params.p_on_to_off
        } else {
            u < params.p_off_to_on
        };
        env.burst
    }

    pub fn gain_db(&self, idx: usize) -> f64 {
        self.slices[idx].h_db
    }

    pub fn burst(&self, idx: usize) -> bool {
        self.slices[idx].burst
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fading(rho: f64, sigma: f64, mean: f64) -> FadingParams {
        FadingParams {
            rho,
            sigma_db: sigma,
            mean_db: mean,
        }
    }

    fn traffic(on_off: f64, off_on: f64) -> TrafficParams {
        TrafficParams {
            p_on_to_off: on_off,
            p_off_to_on: off_on,
            kappa: 2.0,
            initial_state: BurstState::Off,
        }
    }

    #[test]
    fn degenerate_fading_stays_at_mean() {
        let f = fading(0.0, 0.0, -93.5);
        let mut env = make_env(1, 0, &[(f, traffic(0.5, 0.5))]);
        for _ in 0..100 {
            let (h_db, h) = env.step_fading(0, &f);
            assert_eq!(h_db, -93.5);
            assert!(h > 0.0);
        }
    }

    #[test]
    fn gain_is_always_positive_linear() {
        let f = fading(0.9, 6.0, -120.0);
        let mut env = make_env(3, 0, &[(f, traffic(0.5, 0.5))]);
        for _ in 0..1000 {
            let (_, h) = env.step_fading(0, &f);
            assert!(h > 0.0);
        }
    }

    #[test]
    fn absorbing_on_state() {
        let t = TrafficParams {
            p_on_to_off: 0.0,
            p_off_to_on: 1.0,
            kappa: 1.5,
            initial_state: BurstState::On,
        };
        let mut env = make_env(5, 0, &[(fading(0.5, 1.0, 0.0), t)]);
        for _ in 0..200 {
            assert!(env.step_traffic(0, &t));
        }
    }

    #[test]
    fn demand_follows_burst_flag() {
        let d = slot_demand(0.1e9, 1.0e9, 2.0, true);
        assert!((d.arrival_bps - 2.1e9).abs() < 1.0);
        assert_eq!(d.r_ideal_bps, 2.0e9);
        assert_eq!(d.r_min_bps, 0.1e9);

        let d = slot_demand(0.1e9, 1.0e9, 2.0, false);
        assert_eq!(d.arrival_bps, 0.1e9);
        assert_eq!(d.r_ideal_bps, 1.0e9);

        // κ = 1 burst: arrival is floor + ideal
        let d = slot_demand(2.0, 3.0, 1.0, true);
        assert_eq!(d.arrival_bps, 5.0);
    }

    #[test]
    fn identical_seeds_identical_streams() {
        let f = fading(0.8, 2.0, -90.0);
        let t = traffic(0.3, 0.2);
        let mut a = make_env(42, 7, &[(f, t)]);
        let mut b = make_env(42, 7, &[(f, t)]);
        for _ in 0..1000 {
            assert_eq!(a.step_fading(0, &f), b.step_fading(0, &f));
            assert_eq!(a.step_traffic(0, &t), b.step_traffic(0, &t));
        }
    }

    #[test]
    fn different_seeds_differ() {
        let f = fading(0.8, 2.0, -90.0);
        let t = traffic(0.3, 0.2);
        let mut a = make_env(42, 0, &[(f, t)]);
        let mut b = make_env(43, 0, &[(f, t)]);
        let same = (0..100)
            .filter(|_| a.step_fading(0, &f) == b.step_fading(0, &f))
            .count();
        assert!(same < 5);
    }

    #[test]
    fn trials_use_uncorrelated_streams() {
        let f = fading(0.0, 1.0, 0.0);
        let t = traffic(0.5, 0.5);
        let mut a = make_env(42, 0, &[(f, t)]);
        let mut b = make_env(42, 1, &[(f, t)]);
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| a.step_fading(0, &f).0).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.step_fading(0, &f).0).collect();
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let (mx, my) = (mean(&xs), mean(&ys));
        let cov: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (x - mx) * (y - my))
            .sum::<f64>();
        let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>();
        let r = cov / (vx * vy).sqrt();
        assert!(r.abs() < 0.05, "cross-trial correlation {r}");
    }
}
