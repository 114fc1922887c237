//! Scenario configuration: JSON schema, presets, validation, and the run
//! manifest. A manifest echoes every resolved parameter, so re-running from
//! it alone reproduces all outputs byte-for-byte.

use crate::env::{BurstState, FadingParams, TrafficParams};
use crate::kpi::SimParams;
use crate::phy::{CqiEntry, CqiTable, FblParams, LinkBudget};
use crate::solver::{Mode, SolverWeights};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid JSON in {path}: {source}")]
    Parse {
        path: String,
        source: serde_json::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Link-budget section of the scenario file. Noise is specified as a
/// density in dBm/Hz and converted to per-PRB watts via the PRB width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub noise_density_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub interference_margin_db: f64,
    pub misreport_inflation: f64,
    pub psd_min_w_per_prb: f64,
    pub prb_width_hz: f64,
}

impl LinkConfig {
    /// Thermal noise power per PRB in W.
    pub fn n0_per_prb_w(&self) -> f64 {
        let dbm = self.noise_density_dbm_hz + 10.0 * self.prb_width_hz.log10();
        10f64.powf(dbm / 10.0) / 1000.0
    }

    pub fn to_link_budget(&self) -> LinkBudget {
        LinkBudget {
            n0_per_prb_w: self.n0_per_prb_w(),
            noise_figure_db: self.noise_figure_db,
            interference_margin_db: self.interference_margin_db,
            misreport_inflation: self.misreport_inflation,
            psd_min_w_per_prb: self.psd_min_w_per_prb,
            prb_width_hz: self.prb_width_hz,
        }
    }
}

/// One slice: budgets, QoS targets, tracking weight, short-packet regime,
/// and its fading/traffic processes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceScenario {
    pub name: String,
    /// Bandwidth cap in PRBs.
    pub b_cap_prb: f64,
    /// Power cap in W.
    pub p_cap_w: f64,
    /// Guaranteed minimum rate in bit/s.
    pub r_min_bps: f64,
    /// Nominal (pre-burst) rate target in bit/s.
    pub r_ideal_bps: f64,
    /// Tracking weight β ≥ 0.
    pub beta: f64,
    pub fbl: FblParams,
    pub fading: FadingParams,
    pub traffic: TrafficParams,
}

/// Complete, self-contained description of a campaign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub mode: Mode,
    pub master_seed: u64,
    pub sim: SimParams,
    pub weights: SolverWeights,
    pub link: LinkConfig,
    /// Optional CQI table override; `None` selects the built-in NR table
    /// with inverted-Shannon thresholds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cqi_table: Option<Vec<CqiEntry>>,
    pub slices: Vec<SliceScenario>,
}

impl ScenarioConfig {
    /// Resolves the CQI table (override or default), validating overrides.
    pub fn cqi_table(&self) -> Result<CqiTable, ConfigError> {
        match &self.cqi_table {
            None => Ok(CqiTable::nr_default()),
            Some(entries) => CqiTable::from_entries(entries.clone())
                .map_err(|e| ConfigError::Invalid(e.to_string())),
        }
    }

    /// Checks every cross-field invariant; error messages name the offending
    /// field path.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if self.slices.is_empty() {
            return fail("slices: at least one slice is required".into());
        }
        self.sim
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("sim: {e}")))?;
        self.weights
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("weights: {e}")))?;
        self.link
            .to_link_budget()
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("link: {e}")))?;
        self.cqi_table()?;
        for (i, s) in self.slices.iter().enumerate() {
            let ctx = |field: &str, msg: String| format!("slices[{i}].{field} ({}): {msg}", s.name);
            if !(s.b_cap_prb > 0.0) {
                return fail(ctx("b_cap_prb", "must be positive".into()));
            }
            if !(s.p_cap_w > 0.0) {
                return fail(ctx("p_cap_w", "must be positive".into()));
            }
            if !(s.r_min_bps >= 0.0) {
                return fail(ctx("r_min_bps", "must be >= 0".into()));
            }
            if !(s.r_ideal_bps >= s.r_min_bps) {
                return fail(ctx("r_ideal_bps", "must be >= r_min_bps".into()));
            }
            if !(s.beta >= 0.0) {
                return fail(ctx("beta", "must be >= 0".into()));
            }
            s.fbl
                .validate()
                .map_err(|e| ConfigError::Invalid(ctx("fbl", e.to_string())))?;
            s.fading
                .validate()
                .map_err(|e| ConfigError::Invalid(ctx("fading", e)))?;
            s.traffic
                .validate()
                .map_err(|e| ConfigError::Invalid(ctx("traffic", e)))?;
        }
        Ok(())
    }

    pub fn slice_names(&self) -> Vec<String> {
        self.slices.iter().map(|s| s.name.clone()).collect()
    }
}

/// Named presets reproducing the two operating regimes (resource-frugal
/// baseline vs. ideal chaser) on a three-slice scenario.
pub fn preset(name: &str) -> Result<ScenarioConfig, ConfigError> {
    match name {
        "baseline" => Ok(baseline_preset()),
        "chaser" => Ok(chaser_preset()),
        other => Err(ConfigError::Invalid(format!(
            "unknown preset '{other}' (expected 'baseline' or 'chaser')"
        ))),
    }
}

#[allow(clippy::too_many_arguments)]
fn slice(
    name: &str,
    b_cap: f64,
    p_cap: f64,
    r_min: f64,
    r_ideal: f64,
    fbl_enabled: bool,
    fading: (f64, f64, f64),
    traffic: (f64, f64, f64),
) -> SliceScenario {
    SliceScenario {
        name: name.into(),
        b_cap_prb: b_cap,
        p_cap_w: p_cap,
        r_min_bps: r_min,
        r_ideal_bps: r_ideal,
        beta: 1.0,
        fbl: FblParams {
            enabled: fbl_enabled,
            blocklength: 168,
            target_pep: 1e-5,
        },
        fading: FadingParams {
            rho: fading.0,
            sigma_db: fading.1,
            mean_db: fading.2,
        },
        traffic: TrafficParams {
            p_on_to_off: traffic.0,
            p_off_to_on: traffic.1,
            kappa: traffic.2,
            initial_state: BurstState::Off,
        },
    }
}

fn base_link() -> LinkConfig {
    LinkConfig {
        noise_density_dbm_hz: -174.0,
        noise_figure_db: 9.0,
        interference_margin_db: 6.0,
        misreport_inflation: 1.12,
        psd_min_w_per_prb: 1e-4,
        prb_width_hz: 180e3,
    }
}

/// Resource-frugal operation: every slice rides its rate floor on a healthy
/// channel, leaving utilization orders of magnitude below the caps.
pub fn baseline_preset() -> ScenarioConfig {
    ScenarioConfig {
        mode: Mode::Baseline,
        master_seed: 42,
        sim: SimParams {
            delta_t_s: 1e-3,
            slots_per_trial: 40,
            trials: 200,
        },
        weights: SolverWeights {
            lambda_b: 1e-3,
            lambda_p: 1e-3,
        },
        link: base_link(),
        cqi_table: None,
        slices: vec![
            slice(
                "eMBB",
                9.0,
                9.0,
                1.0e6,
                7.4e6,
                false,
                (0.95, 2.0, -85.0),
                (0.2, 0.2, 1.5),
            ),
            slice(
                "URLLC",
                7.0,
                8.5,
                1.8e6,
                2.8e6,
                true,
                (0.8, 4.0, -85.0),
                (0.5, 0.3, 2.0),
            ),
            slice(
                "mMTC",
                4.0,
                4.0,
                0.5e6,
                1.2e6,
                false,
                (0.85, 3.0, -85.0),
                (0.4, 0.05, 3.0),
            ),
        ],
    }
}

/// Target-chasing operation: the full bandwidth and power budgets are
/// leveraged by raising the PSD floor to the eMBB cap ratio (1 W/PRB), so
/// active allocations run at full per-PRB power density, and the eMBB
/// channel is pinned at a capacity-limited operating point where the
/// tracker saturates its budgets chasing the target.
pub fn chaser_preset() -> ScenarioConfig {
    let mut cfg = baseline_preset();
    cfg.mode = Mode::IdealChaser;
    cfg.link.psd_min_w_per_prb = 1.0;
    cfg.slices[0].fading = FadingParams {
        rho: 0.95,
        sigma_db: 2.0,
        mean_db: -121.6,
    };
    cfg
}

/// Run manifest: artifact version plus the fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifact_version: String,
    pub master_seed: u64,
    pub config: ScenarioConfig,
}

impl Manifest {
    pub fn new(config: ScenarioConfig) -> Self {
        Manifest {
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: config.master_seed,
            config,
        }
    }
}

/// Loads a scenario from a JSON file. The file may be either a bare
/// [`ScenarioConfig`] or a [`Manifest`] (whose embedded config is used), so
/// a previous run's `manifest.json` replays directly.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| ConfigError::Parse {
        path: path.display().to_string(),
        source: e,
    })?;
    let config: ScenarioConfig = if value.get("config").is_some() {
        let manifest: Manifest = serde_json::from_value(value).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            source: e,
        })?;
        manifest.config
    } else {
        serde_json::from_value(value).map_err(|e| ConfigError::Parse {
            path: path.display().to_string(),
            source: e,
        })?
    };
    config.validate()?;
    Ok(config)
}

/// One-slot snapshot for the `solve` command: per-slice channel gains and
/// slot-level targets (already burst-adjusted), plus the shared link budget
/// and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveSnapshot {
    pub mode: Mode,
    pub weights: SolverWeights,
    pub link: LinkConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cqi_table: Option<Vec<CqiEntry>>,
    pub slices: Vec<SnapshotSlice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSlice {
    pub name: String,
    /// Channel gain for this slot in dB.
    pub h_db: f64,
    pub b_cap_prb: f64,
    pub p_cap_w: f64,
    /// Rate floor for this slot, bit/s.
    pub r_min_bps: f64,
    /// Rate target for this slot, bit/s.
    pub r_ideal_bps: f64,
    pub beta: f64,
    pub fbl: FblParams,
}

impl SolveSnapshot {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.slices.is_empty() {
            return Err(ConfigError::Invalid("slices: at least one required".into()));
        }
        self.weights
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("weights: {e}")))?;
        self.link
            .to_link_budget()
            .validate()
            .map_err(|e| ConfigError::Invalid(format!("link: {e}")))?;
        for (i, s) in self.slices.iter().enumerate() {
            if !(s.b_cap_prb > 0.0) || !(s.p_cap_w > 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "slices[{i}]: caps must be positive"
                )));
            }
            if !(s.r_min_bps >= 0.0) || !(s.r_ideal_bps >= 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "slices[{i}]: rates must be >= 0"
                )));
            }
            if !(s.beta >= 0.0) {
                return Err(ConfigError::Invalid(format!(
                    "slices[{i}]: beta must be >= 0"
                )));
            }
            s.fbl
                .validate()
                .map_err(|e| ConfigError::Invalid(format!("slices[{i}].fbl: {e}")))?;
            if !s.h_db.is_finite() {
                return Err(ConfigError::Invalid(format!(
                    "slices[{i}]: h_db must be finite"
                )));
            }
        }
        Ok(())
    }
}
