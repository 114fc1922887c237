//! Physical-layer model: CQI/MCS table, finite-blocklength spectral
//! efficiency, link-budget power slopes, and the a-priori CQI mask.
//!
//! Everything in this module is a pure function of immutable inputs and is
//! safe to call concurrently from any number of trial workers.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use thiserror::Error;

/// Number of CQI operating points (NR 4-bit CQI, indices 1..=15).
pub const NUM_CQI: usize = 15;

/// Spectral efficiencies (bit/s/Hz) of the NR 4-bit CQI table, QPSK..64QAM.
const NR_CQI_SE: [f64; NUM_CQI] = [
    0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141, 2.4063, 2.7305, 3.3223, 3.9023,
    4.5234, 5.1152, 5.5547,
];

#[derive(Debug, Error, PartialEq)]
pub enum PhyError {
    #[error("probability {0} outside the open interval (0, 1)")]
    ProbabilityOutOfRange(f64),
    #[error("SNR must be positive, got {0}")]
    NonPositiveSnr(f64),
    #[error("channel gain must be positive, got {0}")]
    NonPositiveGain(f64),
    #[error("invalid CQI table: {0}")]
    InvalidCqiTable(String),
    #[error("invalid link budget: {0}")]
    InvalidLinkBudget(String),
    #[error("invalid finite-blocklength parameters: {0}")]
    InvalidFblParams(String),
}

/// One row of the CQI/MCS table: spectral efficiency and the linear SINR
/// threshold at which the MCS is decoded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CqiEntry {
    /// CQI index, 1..=15.
    pub index: u8,
    /// Spectral efficiency in bit/s/Hz.
    pub se_shannon: f64,
    /// Linear SINR threshold Γ (dimensionless).
    pub sinr_threshold: f64,
}

/// Validated table of [`NUM_CQI`] entries with strictly increasing
/// efficiencies and thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct CqiTable {
    entries: Vec<CqiEntry>,
}

impl CqiTable {
    /// Default table: NR 4-bit CQI efficiencies with inverted-Shannon
    /// thresholds Γ = 2^SE − 1. Both columns can be overridden through the
    /// scenario config.
    pub fn nr_default() -> Self {
        let entries = NR_CQI_SE
            .iter()
            .enumerate()
            .map(|(i, &se)| CqiEntry {
                index: (i + 1) as u8,
                se_shannon: se,
                sinr_threshold: 2f64.powf(se) - 1.0,
            })
            .collect();
        CqiTable { entries }
    }

    /// Builds a table from explicit entries, enforcing the invariants:
    /// exactly [`NUM_CQI`] rows indexed 1..=15, positive values, and both
    /// columns strictly increasing.
    pub fn from_entries(entries: Vec<CqiEntry>) -> Result<Self, PhyError> {
        if entries.len() != NUM_CQI {
            return Err(PhyError::InvalidCqiTable(format!(
                "expected {NUM_CQI} entries, got {}",
                entries.len()
            )));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.index as usize != i + 1 {
                return Err(PhyError::InvalidCqiTable(format!(
                    "entry {} has index {}, expected {}",
                    i,
                    e.index,
                    i + 1
                )));
            }
            if !(e.se_shannon > 0.0) || !(e.sinr_threshold > 0.0) {
                return Err(PhyError::InvalidCqiTable(format!(
                    "entry {} must have positive efficiency and threshold",
                    e.index
                )));
            }
            if i > 0 {
                let prev = &entries[i - 1];
                if e.se_shannon <= prev.se_shannon || e.sinr_threshold <= prev.sinr_threshold {
                    return Err(PhyError::InvalidCqiTable(format!(
                        "columns must be strictly increasing at index {}",
                        e.index
                    )));
                }
            }
        }
        Ok(CqiTable { entries })
    }

    pub fn entries(&self) -> &[CqiEntry] {
        &self.entries
    }

    pub fn entry(&self, m: usize) -> &CqiEntry {
        &self.entries[m]
    }
}

/// Link-budget terms shared by all slices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    /// Thermal noise power per PRB in W.
    pub n0_per_prb_w: f64,
    /// Receiver noise figure in dB.
    pub noise_figure_db: f64,
    /// Interference margin in dB.
    pub interference_margin_db: f64,
    /// SINR inflation covering CQI misreporting, ≥ 1 (dimensionless).
    pub misreport_inflation: f64,
    /// Power-spectral-density floor in W per PRB.
    pub psd_min_w_per_prb: f64,
    /// PRB bandwidth in Hz.
    pub prb_width_hz: f64,
}

impl LinkBudget {
    pub fn validate(&self) -> Result<(), PhyError> {
        if !(self.n0_per_prb_w > 0.0) {
            return Err(PhyError::InvalidLinkBudget(
                "n0_per_prb_w must be positive".into(),
            ));
        }
        if !(self.misreport_inflation >= 1.0) {
            return Err(PhyError::InvalidLinkBudget(
                "misreport_inflation must be >= 1".into(),
            ));
        }
        if !(self.psd_min_w_per_prb >= 0.0) {
            return Err(PhyError::InvalidLinkBudget(
                "psd_min_w_per_prb must be >= 0".into(),
            ));
        }
        if !(self.prb_width_hz > 0.0) {
            return Err(PhyError::InvalidLinkBudget(
                "prb_width_hz must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Combined linear margin 10^(NF/10) · 10^(IM/10) · γ_mis applied on top
    /// of each CQI's SINR threshold.
    pub fn margin_factor(&self) -> f64 {
        10f64.powf(self.noise_figure_db / 10.0)
            * 10f64.powf(self.interference_margin_db / 10.0)
            * self.misreport_inflation
    }
}

/// Finite-blocklength regime parameters for one slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FblParams {
    /// Whether the short-packet correction applies to this slice.
    pub enabled: bool,
    /// Blocklength n in channel uses.
    pub blocklength: u32,
    /// Target packet error probability ε.
    pub target_pep: f64,
}

impl FblParams {
    pub fn disabled() -> Self {
        FblParams {
            enabled: false,
            blocklength: 168,
            target_pep: 1e-5,
        }
    }

    pub fn validate(&self) -> Result<(), PhyError> {
        if self.blocklength < 1 {
            return Err(PhyError::InvalidFblParams(
                "blocklength must be >= 1".into(),
            ));
        }
        if !(self.target_pep > 0.0 && self.target_pep < 0.5) {
            return Err(PhyError::InvalidFblParams(
                "target_pep must lie in (0, 0.5)".into(),
            ));
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Gaussian tail machinery
// ---------------------------------------------------------------------------

const THRESH: f64 = 0.46875;
const SQRPI: f64 = 5.641895835477563e-1; // 1/sqrt(pi)

/// Complementary error function, rational Chebyshev approximation
/// (W. J. Cody, Math. Comp. 1969), relative error below 1e-16 per regime.
#[allow(clippy::excessive_precision)] // coefficients kept at published precision
fn erfc(x: f64) -> f64 {
    const A: [f64; 5] = [
        3.16112374387056560e0,
        1.13864154151050156e2,
        3.77485237685302021e2,
        3.20937758913846947e3,
        1.85777706184603153e-1,
    ];
    const B: [f64; 4] = [
        2.36012909523441209e1,
        2.44024637934444173e2,
        1.28261652607737228e3,
        2.84423683343917062e3,
    ];
    const C: [f64; 9] = [
        5.64188496988670089e-1,
        8.88314979438837594e0,
        6.61191906371416295e1,
        2.98635138197400131e2,
        8.81952221241769090e2,
        1.71204761263407058e3,
        2.05107837782607147e3,
        1.23033935479799725e3,
        2.15311535474403846e-8,
    ];
    const D: [f64; 8] = [
        1.57449261107098347e1,
        1.17693950891312499e2,
        5.37181101862009858e2,
        1.62138957456669019e3,
        3.29079923573345963e3,
        4.36261909014324716e3,
        3.43936767414372164e3,
        1.23033935480374942e3,
    ];
    const P: [f64; 6] = [
        3.05326634961232344e-1,
        3.60344899949804439e-1,
        1.25781726111229246e-1,
        1.60837851487422766e-2,
        6.58749161529837803e-4,
        1.63153871373020978e-2,
    ];
    const Q: [f64; 5] = [
        2.56852019228982242e0,
        1.87295284992346047e0,
        5.27905102951428412e-1,
        6.05183413124413191e-2,
        2.33520497626869185e-3,
    ];

    let y = x.abs();
    let result = if y <= THRESH {
        let z = y * y;
        let mut xnum = A[4] * z;
        let mut xden = z;
        for i in 0..3 {
            xnum = (xnum + A[i]) * z;
            xden = (xden + B[i]) * z;
        }
        // erf(x) on this branch; convert to erfc before returning
        return 1.0 - x * (xnum + A[3]) / (xden + B[3]);
    } else if y <= 4.0 {
        let mut xnum = C[8] * y;
        let mut xden = y;
        for i in 0..7 {
            xnum = (xnum + C[i]) * y;
            xden = (xden + D[i]) * y;
        }
        let result = (xnum + C[7]) / (xden + D[7]);
        scale_by_exp(y, result)
    } else if y < 26.543 {
        let z = 1.0 / (y * y);
        let mut xnum = P[5] * z;
        let mut xden = z;
        for i in 0..4 {
            xnum = (xnum + P[i]) * z;
            xden = (xden + Q[i]) * z;
        }
        let result = z * (xnum + P[4]) / (xden + Q[4]);
        scale_by_exp(y, (SQRPI - result) / y)
    } else {
        0.0
    };

    if x < 0.0 {
        2.0 - result
    } else {
        result
    }
}

/// Multiplies by exp(-y^2) using the split y^2 = ysq^2 + del that keeps the
/// exponent argument exactly representable for the dominant part.
fn scale_by_exp(y: f64, result: f64) -> f64 {
    let ysq = (y * 16.0).trunc() / 16.0;
    let del = (y - ysq) * (y + ysq);
    (-ysq * ysq).exp() * (-del).exp() * result
}

/// Upper-tail standard normal CDF Q(x) = P(Z > x).
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Initial guess for the normal quantile (Acklam's rational approximation,
/// |relative error| < 1.15e-9 over (0,1)). Returns Φ⁻¹(p).
#[allow(clippy::excessive_precision)] // coefficients kept at published precision
fn norm_ppf_approx(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383577518672690e2,
        -3.066479806614716e1,
        2.506628277459239e0,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838e0,
        -2.549732539343734e0,
        4.374664141464968e0,
        2.938163982698783e0,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996e0,
        3.754408661907416e0,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Inverse of the upper-tail normal CDF: returns x with Q(x) = p.
///
/// A rational initial guess is refined by two Halley steps against
/// [`q_function`]; the residual |Q(x) − p| stays below 1e-9 over the whole
/// open interval and is at machine-precision level for p in [1e-300, 1−1e-16].
pub fn inverse_q(p: f64) -> Result<f64, PhyError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(PhyError::ProbabilityOutOfRange(p));
    }
    // Q⁻¹(p) = −Φ⁻¹(p)
    let mut x = -norm_ppf_approx(p);
    for _ in 0..2 {
        let pdf = normal_pdf(x);
        if pdf == 0.0 {
            break;
        }
        let u = (q_function(x) - p) / pdf;
        x += u * (1.0 + 0.5 * x * u);
    }
    Ok(x)
}

// ---------------------------------------------------------------------------
// Spectral efficiency and link budget
// ---------------------------------------------------------------------------

/// Achievable spectral efficiency at linear SNR `gamma` (bit/s/Hz).
///
/// With the finite-blocklength correction enabled this is the normal
/// approximation log2(1+γ) − √(V(γ)/n)/ln2 · Q⁻¹(ε) with channel dispersion
/// V(γ) = (γ/(1+γ))², clamped at zero; disabled it is plain Shannon.
pub fn fbl_spectral_efficiency(gamma: f64, fbl: &FblParams) -> Result<f64, PhyError> {
    if !(gamma > 0.0) {
        return Err(PhyError::NonPositiveSnr(gamma));
    }
    let shannon = (1.0 + gamma).log2();
    if !fbl.enabled {
        return Ok(shannon);
    }
    let dispersion = (gamma / (1.0 + gamma)).powi(2);
    let penalty = (dispersion / fbl.blocklength as f64).sqrt() / LN_2 * inverse_q(fbl.target_pep)?;
    Ok((shannon - penalty).max(0.0))
}

/// Per-CQI effective spectral efficiency (bit/s/Hz).
///
/// Each MCS is provisioned at its decoding threshold, so with the
/// finite-blocklength correction enabled the entry is
/// [`fbl_spectral_efficiency`] evaluated at Γ_m; disabled, the tabulated
/// efficiency is returned verbatim. Entries that clamp to zero are unusable.
pub fn effective_se_table(table: &CqiTable, fbl: &FblParams) -> [f64; NUM_CQI] {
    let mut out = [0.0; NUM_CQI];
    for (m, e) in table.entries().iter().enumerate() {
        out[m] = if fbl.enabled {
            // table invariants guarantee Γ > 0, so this cannot fail
            fbl_spectral_efficiency(e.sinr_threshold, fbl).unwrap_or(0.0)
        } else {
            e.se_shannon
        };
    }
    out
}

/// Required transmit power per PRB (W/PRB) for CQI entry `entry` at linear
/// channel gain `h`: α = Γ · 10^(NF/10) · 10^(IM/10) · γ_mis · N0 / h.
pub fn power_slope(h: f64, entry: &CqiEntry, link: &LinkBudget) -> Result<f64, PhyError> {
    if !(h > 0.0) {
        return Err(PhyError::NonPositiveGain(h));
    }
    Ok(entry.sinr_threshold * link.margin_factor() * link.n0_per_prb_w / h)
}

/// Per-CQI power slopes for the whole table.
pub fn power_slope_table(
    h: f64,
    table: &CqiTable,
    link: &LinkBudget,
) -> Result<[f64; NUM_CQI], PhyError> {
    if !(h > 0.0) {
        return Err(PhyError::NonPositiveGain(h));
    }
    let scale = link.margin_factor() * link.n0_per_prb_w / h;
    let mut out = [0.0; NUM_CQI];
    for (m, e) in table.entries().iter().enumerate() {
        out[m] = e.sinr_threshold * scale;
    }
    Ok(out)
}

/// A-priori CQI admissibility: entry m stays usable iff its effective power
/// slope (including the PSD floor) does not exceed the cap ratio,
/// max(α_m, PSD_min) ≤ P_cap / B_cap. The comparison is strict on the
/// masking side, so a slope exactly at the ratio remains usable.
pub fn feasibility_mask(
    alpha: &[f64; NUM_CQI],
    psd_min: f64,
    b_cap: f64,
    p_cap: f64,
) -> [bool; NUM_CQI] {
    let ratio = p_cap / b_cap;
    let mut mask = [false; NUM_CQI];
    for m in 0..NUM_CQI {
        mask[m] = alpha[m].max(psd_min) <= ratio;
    }
    mask
}
