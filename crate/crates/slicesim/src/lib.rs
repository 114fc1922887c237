//! Slot-level network-slicing simulator.
//!
//! The crate models a radio access network carved into service slices
//! (eMBB / URLLC / mMTC style), each with its own bandwidth and power
//! budget, rate floor, and rate target. Every scheduling slot an exact
//! two-phase allocator picks one modulation-and-coding operating point
//! per slice together with a bandwidth and power split:
//!
//! * **Phase 1** finds the cheapest feasible allocation that meets every
//!   slice's minimum rate.
//! * **Phase 2** (ideal-chaser operation) re-optimizes over the same
//!   constraint set to track per-slice rate targets.
//! * A slack-based **fallback** produces least-violation allocations and
//!   per-slice shortfall diagnostics when the floors cannot all be met.
//!
//! The allocator is embedded in a Monte Carlo environment with correlated
//! dB-domain fading, ON/OFF bursty traffic, and per-slice queues, and the
//! harness aggregates delay, task-completion, energy-efficiency, timing
//! and fairness KPIs across independent trials.
//!
//! Module map:
//!
//! * [`phy`] — CQI/MCS table, finite-blocklength spectral efficiency,
//!   link-budget power slopes, and the a-priori CQI feasibility mask.
//! * [`solver`] — the exact per-slot two-phase allocator and fallback.
//! * [`oracle`] — a brute-force grid-search reference used to verify the
//!   solver, plus a random instance generator.
//! * [`env`] — seeded AR(1) fading and Markov burst processes.
//! * [`kpi`] — queues and the full KPI suite with across-trial statistics.
//! * [`harness`] — trial/campaign/sweep orchestration (parallel over trials).
//! * [`config`] — scenario file schema, presets, validation, manifests.
//! * [`output`] — CSV/JSON serialization of reports and traces.

// Validation predicates are written as `!(x > 0.0)` so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod env;
pub mod harness;
pub mod kpi;
pub mod oracle;
pub mod output;
pub mod phy;
pub mod solver;

pub use config::{ScenarioConfig, SliceScenario};
pub use harness::{run_campaign, run_campaign_with_workers, run_sweep, CampaignResult};
pub use kpi::KpiReport;
pub use solver::{solve_slot, Allocation, Mode, SlotProblem};
