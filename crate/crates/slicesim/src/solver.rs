//! Exact per-slot allocator.
//!
//! Each slot poses a small mixed-integer program: pick at most one CQI per
//! slice plus a bandwidth/power split subject to SINR/PSD coupling, rate
//! floors, and per-slice caps. Nothing couples slices — budgets, floors and
//! objective terms all separate — so the global optimum is assembled from
//! per-slice optima: enumerate the (at most 15) admissible CQIs, solve the
//! one-dimensional inner problem in closed form, and keep the best. That
//! makes the allocator exact, deterministic, and O(slices × CQIs) per slot
//! with no external solver.
//!
//! Ties between CQIs of equal objective are broken toward the lowest index
//! so identical inputs always produce bit-identical allocations.

use crate::phy::NUM_CQI;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Anti-waste objective weights ("small, positive constants").
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverWeights {
    /// Cost per allocated PRB.
    pub lambda_b: f64,
    /// Cost per allocated watt.
    pub lambda_p: f64,
}

impl SolverWeights {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lambda_b > 0.0) || !(self.lambda_p > 0.0) {
            return Err("lambda_b and lambda_p must be positive".into());
        }
        Ok(())
    }
}

/// Operating regime of the per-slot controller.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Resource-frugal feasibility only (Phase 1).
    Baseline,
    /// Feasibility gate, then target tracking (Phase 1 + Phase 2).
    IdealChaser,
}

/// Everything the allocator needs for one slice in one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceProblem {
    /// Effective rate per PRB for each CQI, in bit/s per PRB
    /// (spectral efficiency already multiplied by the PRB width).
    pub se_eff_bps_per_prb: [f64; NUM_CQI],
    /// Required power per PRB for each CQI, W/PRB.
    pub alpha_w_per_prb: [f64; NUM_CQI],
    /// Admissible CQIs (false entries are never selected).
    pub usable: [bool; NUM_CQI],
    /// Bandwidth cap in PRBs.
    pub b_cap_prb: f64,
    /// Power cap in W.
    pub p_cap_w: f64,
    /// Rate floor for this slot, bit/s (burst-adjusted by the caller).
    pub r_min_bps: f64,
    /// Rate target for this slot, bit/s (burst-adjusted by the caller).
    pub r_ideal_bps: f64,
    /// Tracking weight β ≥ 0.
    pub beta: f64,
    /// PSD floor, W/PRB.
    pub psd_min_w_per_prb: f64,
}

impl SliceProblem {
    /// Effective power slope for CQI `m`: the SINR requirement or the PSD
    /// floor, whichever binds.
    fn slope(&self, m: usize) -> f64 {
        self.alpha_w_per_prb[m].max(self.psd_min_w_per_prb)
    }
}

/// One slot's allocation problem across all slices.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotProblem {
    pub slices: Vec<SliceProblem>,
    pub weights: SolverWeights,
}

/// Which path produced an allocation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Phase1Feasible,
    Phase2Optimal,
    FallbackRelaxed,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Phase1Feasible => "phase1_feasible",
            SolveStatus::Phase2Optimal => "phase2_optimal",
            SolveStatus::FallbackRelaxed => "fallback_relaxed",
        }
    }
}

/// Per-slice allocator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceAllocation {
    /// Selected CQI index (1..=15); `None` when the slice stays silent.
    pub cqi: Option<u8>,
    /// Allocated bandwidth in PRBs.
    pub bw_prb: f64,
    /// Allocated power in W.
    pub power_w: f64,
    /// Achieved rate in bit/s.
    pub rate_bps: f64,
    /// Tracking deviation |rate − target| (phase 2 only).
    pub deviation_bps: Option<f64>,
    /// Rate shortfall below the floor (fallback only).
    pub slack_bps: Option<f64>,
}

impl SliceAllocation {
    fn silent() -> Self {
        SliceAllocation {
            cqi: None,
            bw_prb: 0.0,
            power_w: 0.0,
            rate_bps: 0.0,
            deviation_bps: None,
            slack_bps: None,
        }
    }
}

/// Full-slot allocator output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Allocation {
    pub slices: Vec<SliceAllocation>,
    pub status: SolveStatus,
}

/// Phase 1 found no feasible allocation; lists the offending slices.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("no feasible CQI for slice(s) {slices:?}")]
pub struct Infeasible {
    /// Indices of slices whose rate floor cannot be met within caps.
    pub slices: Vec<usize>,
}

/// Cheapest feasible point for one slice: for each admissible CQI the rate
/// floor binds (B = R_min / se), power sits on the coupling envelope, and
/// the cheapest CQI wins. A zero floor yields the silent allocation.
fn phase1_slice(sp: &SliceProblem, w: &SolverWeights) -> Option<SliceAllocation> {
    if sp.r_min_bps <= 0.0 {
        return Some(SliceAllocation::silent());
    }
    let mut best: Option<(f64, usize, f64, f64)> = None; // (cost, m, b, p)
    for m in 0..NUM_CQI {
        let se = sp.se_eff_bps_per_prb[m];
        if !sp.usable[m] || se <= 0.0 {
            continue;
        }
        let b = sp.r_min_bps / se;
        if b > sp.b_cap_prb {
            continue;
        }
        let p = sp.slope(m) * b;
        if p > sp.p_cap_w {
            continue;
        }
        let cost = w.lambda_b * b + w.lambda_p * p;
        if best.is_none_or(|(c, ..)| cost < c) {
            best = Some((cost, m, b, p));
        }
    }
    best.map(|(_, m, b, p)| SliceAllocation {
        cqi: Some((m + 1) as u8),
        bw_prb: b,
        power_w: p,
        rate_bps: sp.se_eff_bps_per_prb[m] * b,
        deviation_bps: None,
        slack_bps: None,
    })
}

/// Most resource-efficient feasible allocation: minimize
/// λ_B·ΣB + λ_P·ΣP subject to the coupling, floor, single-CQI and cap
/// constraints. Returns the failing slice set when some floor is
/// unreachable.
pub fn solve_phase1(problem: &SlotProblem) -> Result<Allocation, Infeasible> {
    let mut slices = Vec::with_capacity(problem.slices.len());
    let mut failed = Vec::new();
    for (i, sp) in problem.slices.iter().enumerate() {
        match phase1_slice(sp, &problem.weights) {
            Some(a) => slices.push(a),
            None => failed.push(i),
        }
    }
    if failed.is_empty() {
        Ok(Allocation {
            slices,
            status: SolveStatus::Phase1Feasible,
        })
    } else {
        Err(Infeasible { slices: failed })
    }
}

/// Target-tracking optimum for one slice. For a fixed CQI the objective
/// β·|se·B − R_ideal| + λ_B·B + λ_P·a·B is piecewise-linear convex in B over
/// [B_lo, B_hi], so the optimum sits at B_lo, B_hi, or the zero-deviation
/// point; power always sits on the coupling envelope because λ_P > 0.
fn phase2_slice(sp: &SliceProblem, w: &SolverWeights) -> Option<SliceAllocation> {
    let mut best: Option<(f64, Option<usize>, f64)> = None; // (obj, cqi, b)
    let consider =
        |obj: f64, cqi: Option<usize>, b: f64, best: &mut Option<(f64, Option<usize>, f64)>| {
            if best.is_none_or(|(o, ..)| obj < o) {
                *best = Some((obj, cqi, b));
            }
        };

    // Staying silent is admissible only when the floor is zero.
    if sp.r_min_bps <= 0.0 {
        consider(sp.beta * sp.r_ideal_bps, None, 0.0, &mut best);
    }

    for m in 0..NUM_CQI {
        let se = sp.se_eff_bps_per_prb[m];
        if !sp.usable[m] || se <= 0.0 {
            continue;
        }
        let a = sp.slope(m);
        let b_lo = if sp.r_min_bps > 0.0 {
            sp.r_min_bps / se
        } else {
            0.0
        };
        let b_hi = sp.b_cap_prb.min(sp.p_cap_w / a);
        if b_lo > b_hi {
            continue;
        }
        let mut candidates = [b_lo, f64::NAN, b_hi];
        let b_star = sp.r_ideal_bps / se;
        if b_star > b_lo && b_star < b_hi {
            candidates[1] = b_star;
        }
        for &b in candidates.iter().filter(|b| !b.is_nan()) {
            let rate = se * b;
            let obj = sp.beta * (rate - sp.r_ideal_bps).abs() + w.lambda_b * b + w.lambda_p * a * b;
            consider(obj, Some(m), b, &mut best);
        }
    }

    best.map(|(_, cqi, b)| match cqi {
        Some(m) if b > 0.0 => {
            let rate = sp.se_eff_bps_per_prb[m] * b;
            SliceAllocation {
                cqi: Some((m + 1) as u8),
                bw_prb: b,
                power_w: sp.slope(m) * b,
                rate_bps: rate,
                deviation_bps: Some((rate - sp.r_ideal_bps).abs()),
                slack_bps: None,
            }
        }
        _ => SliceAllocation {
            deviation_bps: Some(sp.r_ideal_bps),
            ..SliceAllocation::silent()
        },
    })
}

/// Ideal-chaser refinement: minimize Σ β·v + λ_B·ΣB + λ_P·ΣP over the
/// Phase-1 constraint set plus v ≥ |R − R_ideal|.
///
/// Re-optimizes over the same constraints rather than locking the Phase-1
/// objective value; the `phase1` argument documents the feasibility gate.
pub fn solve_phase2(problem: &SlotProblem, phase1: &Allocation) -> Allocation {
    assert_eq!(
        phase1.status,
        SolveStatus::Phase1Feasible,
        "phase 2 requires a feasible phase 1"
    );
    let slices = problem
        .slices
        .iter()
        .map(|sp| {
            phase2_slice(sp, &problem.weights)
                .expect("phase-1 feasibility guarantees a phase-2 candidate")
        })
        .collect();
    Allocation {
        slices,
        status: SolveStatus::Phase2Optimal,
    }
}

/// Least-violation relaxation: minimize Σd subject to R + d ≥ R_min and the
/// physical constraints. Slices whose floor is reachable keep their Phase-1
/// point with d = 0; the rest sit at the rate-maximizing corner with
/// d = R_min − R_max. Always returns, even with every CQI masked.
pub fn solve_fallback(problem: &SlotProblem) -> Allocation {
    let slices = problem
        .slices
        .iter()
        .map(|sp| {
            if let Some(mut a) = phase1_slice(sp, &problem.weights) {
                a.slack_bps = Some(0.0);
                return a;
            }
            // Rate-maximizing corner across admissible CQIs.
            let mut best: Option<(f64, usize, f64)> = None; // (rate, m, b)
            for m in 0..NUM_CQI {
                let se = sp.se_eff_bps_per_prb[m];
                if !sp.usable[m] || se <= 0.0 {
                    continue;
                }
                let b = sp.b_cap_prb.min(sp.p_cap_w / sp.slope(m));
                let rate = se * b;
                if best.is_none_or(|(r, ..)| rate > r) {
                    best = Some((rate, m, b));
                }
            }
            match best {
                Some((rate, m, b)) if rate > 0.0 => SliceAllocation {
                    cqi: Some((m + 1) as u8),
                    bw_prb: b,
                    power_w: sp.slope(m) * b,
                    rate_bps: rate,
                    deviation_bps: None,
                    slack_bps: Some((sp.r_min_bps - rate).max(0.0)),
                },
                _ => SliceAllocation {
                    slack_bps: Some(sp.r_min_bps),
                    ..SliceAllocation::silent()
                },
            }
        })
        .collect();
    Allocation {
        slices,
        status: SolveStatus::FallbackRelaxed,
    }
}

/// Per-slot controller: Phase 1 gates feasibility; the ideal chaser then
/// refines with Phase 2; an infeasible Phase 1 routes to the fallback in
/// either mode. The status records the path taken.
pub fn solve_slot(problem: &SlotProblem, mode: Mode) -> Allocation {
    match solve_phase1(problem) {
        Ok(phase1) => match mode {
            Mode::Baseline => phase1,
            Mode::IdealChaser => solve_phase2(problem, &phase1),
        },
        Err(_) => solve_fallback(problem),
    }
}

/// Objective value of an allocation under the Phase-1 or Phase-2 form.
pub fn objective(problem: &SlotProblem, alloc: &Allocation, phase2: bool) -> f64 {
    let mut total = 0.0;
    for (sp, a) in problem.slices.iter().zip(&alloc.slices) {
        total += problem.weights.lambda_b * a.bw_prb + problem.weights.lambda_p * a.power_w;
        if phase2 {
            total += sp.beta * (a.rate_bps - sp.r_ideal_bps).abs();
        }
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform_slice(
        se: f64,
        alpha: f64,
        b_cap: f64,
        p_cap: f64,
        r_min: f64,
        r_ideal: f64,
    ) -> SliceProblem {
        SliceProblem {
            se_eff_bps_per_prb: [se; NUM_CQI],
            alpha_w_per_prb: [alpha; NUM_CQI],
            usable: [true; NUM_CQI],
            b_cap_prb: b_cap,
            p_cap_w: p_cap,
            r_min_bps: r_min,
            r_ideal_bps: r_ideal,
            beta: 1.0,
            psd_min_w_per_prb: 0.0,
        }
    }

    fn single_cqi_slice(
        m: usize,
        se: f64,
        alpha: f64,
        b_cap: f64,
        p_cap: f64,
        r_min: f64,
        r_ideal: f64,
    ) -> SliceProblem {
        let mut sp = uniform_slice(0.0, alpha, b_cap, p_cap, r_min, r_ideal);
        sp.usable = [false; NUM_CQI];
        sp.usable[m] = true;
        sp.se_eff_bps_per_prb[m] = se;
        sp
    }

    fn weights() -> SolverWeights {
        SolverWeights {
            lambda_b: 1e-3,
            lambda_p: 1e-3,
        }
    }

    #[test]
    fn phase1_zero_floor_stays_silent() {
        let problem = SlotProblem {
            slices: vec![uniform_slice(2.0, 0.1, 10.0, 10.0, 0.0, 5.0); 3],
            weights: weights(),
        };
        let alloc = solve_phase1(&problem).unwrap();
        assert_eq!(alloc.status, SolveStatus::Phase1Feasible);
        for a in &alloc.slices {
            assert_eq!(a.cqi, None);
            assert_eq!(a.bw_prb, 0.0);
            assert_eq!(a.power_w, 0.0);
            assert_eq!(a.rate_bps, 0.0);
        }
        assert_eq!(objective(&problem, &alloc, false), 0.0);
    }

    #[test]
    fn phase1_binding_floor_single_cqi() {
        // se = 2 bit/s per PRB, floor 4 → B = 2 PRB, P = 2·max(α, psd)
        let sp = single_cqi_slice(4, 2.0, 0.3, 10.0, 10.0, 4.0, 4.0);
        let problem = SlotProblem {
            slices: vec![sp],
            weights: weights(),
        };
        let alloc = solve_phase1(&problem).unwrap();
        let a = &alloc.slices[0];
        assert_eq!(a.cqi, Some(5));
        assert!((a.bw_prb - 2.0).abs() < 1e-12);
        assert!((a.power_w - 0.6).abs() < 1e-12);
        assert!((a.rate_bps - 4.0).abs() < 1e-12);
    }

    #[test]
    fn phase1_respects_psd_floor() {
        let mut sp = single_cqi_slice(4, 2.0, 0.3, 10.0, 10.0, 4.0, 4.0);
        sp.psd_min_w_per_prb = 0.5;
        let problem = SlotProblem {
            slices: vec![sp],
            weights: weights(),
        };
        let a = solve_phase1(&problem).unwrap().slices[0].clone();
        assert!((a.power_w - 1.0).abs() < 1e-12); // 2 PRB × 0.5 W/PRB floor
    }

    #[test]
    fn phase1_reports_failing_slices() {
        let bad = uniform_slice(1.0, 1e9, 5.0, 5.0, 10.0, 10.0); // power-impossible
        let good = uniform_slice(2.0, 0.1, 10.0, 10.0, 4.0, 5.0);
        let problem = SlotProblem {
            slices: vec![good.clone(), bad, good],
            weights: weights(),
        };
        let err = solve_phase1(&problem).unwrap_err();
        assert_eq!(err.slices, vec![1]);
    }

    #[test]
    fn phase1_tie_breaks_to_lowest_cqi() {
        // Two CQIs with identical se and alpha → identical cost; index 3 wins
        // over index 9 because enumeration replaces only on strict improvement.
        let mut sp = uniform_slice(0.0, 0.2, 10.0, 10.0, 3.0, 3.0);
        sp.usable = [false; NUM_CQI];
        sp.usable[2] = true;
        sp.usable[8] = true;
        sp.se_eff_bps_per_prb[2] = 1.5;
        sp.se_eff_bps_per_prb[8] = 1.5;
        let problem = SlotProblem {
            slices: vec![sp],
            weights: weights(),
        };
        let alloc = solve_phase1(&problem).unwrap();
        assert_eq!(alloc.slices[0].cqi, Some(3));
    }

    #[test]
    fn phase2_hits_reachable_target_exactly() {
        let sp = single_cqi_slice(9, 2.0, 0.2, 10.0, 10.0, 2.0, 12.0);
        let problem = SlotProblem {
            slices: vec![sp],
            weights: weights(),
        };
        let p1 = solve_phase1(&problem).unwrap();
        let alloc = solve_phase2(&problem, &p1);
        let a = &alloc.slices[0];
        assert_eq!(alloc.status, SolveStatus::Phase2Optimal);
        assert!((a.rate_bps - 12.0).abs() < 1e-9);
        assert_eq!(a.deviation_bps, Some((a.rate_bps - 12.0_f64).abs()));
        // power on the envelope
        assert!((a.power_w - 0.2 * a.bw_prb).abs() < 1e-12);
    }

    #[test]
    fn phase2_unreachable_target_sits_at_best_corner() {
        // bandwidth-capped: max rate = 2 * 10 = 20 < target 50
        let sp = single_cqi_slice(9, 2.0, 0.2, 10.0, 10.0, 2.0, 50.0);
        let problem = SlotProblem {
            slices: vec![sp],
            weights: weights(),
        };
        let p1 = solve_phase1(&problem).unwrap();
        let a = solve_phase2(&problem, &p1).slices[0].clone();
        assert!((a.bw_prb - 10.0).abs() < 1e-12);
        assert!((a.rate_bps - 20.0).abs() < 1e-12);
        assert_eq!(a.deviation_bps, Some(30.0));
    }

    #[test]
    fn phase2_zero_floor_zero_target_stays_silent() {
        let sp = uniform_slice(2.0, 0.2, 10.0, 10.0, 0.0, 0.0);
        let problem = SlotProblem {
            slices: vec![sp],
            weights: weights(),
        };
        let p1 = solve_phase1(&problem).unwrap();
        let a = solve_phase2(&problem, &p1).slices[0].clone();
        assert_eq!(a.cqi, None);
        assert_eq!(a.rate_bps, 0.0);
        assert_eq!(a.deviation_bps, Some(0.0));
    }

    #[test]
    fn fallback_matches_phase1_when_feasible() {
        let problem = SlotProblem {
            slices: vec![
                uniform_slice(2.0, 0.1, 10.0, 10.0, 4.0, 5.0),
                uniform_slice(1.0, 0.2, 10.0, 10.0, 3.0, 5.0),
            ],
            weights: weights(),
        };
        let p1 = solve_phase1(&problem).unwrap();
        let fb = solve_fallback(&problem);
        assert_eq!(fb.status, SolveStatus::FallbackRelaxed);
        for (a, b) in p1.slices.iter().zip(&fb.slices) {
            assert_eq!(a.cqi, b.cqi);
            assert_eq!(a.bw_prb, b.bw_prb);
            assert_eq!(b.slack_bps, Some(0.0));
        }
    }

    #[test]
    fn fallback_all_masked_reports_full_shortfall() {
        let mut sp = uniform_slice(2.0, 0.1, 10.0, 10.0, 6.0, 6.0);
        sp.usable = [false; NUM_CQI];
        let problem = SlotProblem {
            slices: vec![sp],
            weights: weights(),
        };
        let fb = solve_fallback(&problem);
        let a = &fb.slices[0];
        assert_eq!(a.cqi, None);
        assert_eq!(a.rate_bps, 0.0);
        assert_eq!(a.slack_bps, Some(6.0));
    }

    #[test]
    fn fallback_partial_shortfall_at_rate_max_corner() {
        // capacity caps the rate at 0.8·r_min → d = 0.2·r_min
        let r_min = 10.0;
        let sp = single_cqi_slice(7, 2.0, 0.2, 4.0, 10.0, r_min, r_min); // max rate 8.0
        let problem = SlotProblem {
            slices: vec![sp],
            weights: weights(),
        };
        assert!(solve_phase1(&problem).is_err());
        let fb = solve_fallback(&problem);
        let a = &fb.slices[0];
        assert!((a.rate_bps - 8.0).abs() < 1e-12);
        assert_eq!(a.slack_bps, Some(2.0));
    }

    #[test]
    fn solve_slot_status_paths() {
        let feasible = SlotProblem {
            slices: vec![uniform_slice(2.0, 0.1, 10.0, 10.0, 4.0, 6.0)],
            weights: weights(),
        };
        assert_eq!(
            solve_slot(&feasible, Mode::Baseline).status,
            SolveStatus::Phase1Feasible
        );
        assert_eq!(
            solve_slot(&feasible, Mode::IdealChaser).status,
            SolveStatus::Phase2Optimal
        );
        let infeasible = SlotProblem {
            slices: vec![uniform_slice(1.0, 1e9, 5.0, 5.0, 10.0, 10.0)],
            weights: weights(),
        };
        for mode in [Mode::Baseline, Mode::IdealChaser] {
            let a = solve_slot(&infeasible, mode);
            assert_eq!(a.status, SolveStatus::FallbackRelaxed);
            assert!(a.slices[0].slack_bps.unwrap() > 0.0);
        }
    }

    #[test]
    fn phase2_objective_never_worse_than_phase1_point() {
        let problem = SlotProblem {
            slices: vec![
                uniform_slice(2.0, 0.1, 10.0, 10.0, 4.0, 12.0),
                uniform_slice(1.5, 0.4, 8.0, 6.0, 3.0, 9.0),
            ],
            weights: weights(),
        };
        let p1 = solve_phase1(&problem).unwrap();
        let p2 = solve_phase2(&problem, &p1);
        assert!(objective(&problem, &p2, true) <= objective(&problem, &p1, true) + 1e-12);
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let problem = SlotProblem {
            slices: vec![uniform_slice(1.7, 0.23, 9.0, 8.5, 3.3, 7.7)],
            weights: weights(),
        };
        let a = solve_slot(&problem, Mode::IdealChaser);
        let b = solve_slot(&problem, Mode::IdealChaser);
        assert_eq!(a, b);
    }
}
