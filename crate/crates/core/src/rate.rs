//! Certified asymptotic key rates.
//!
//! The general rate is
//!
//! ```text
//! R_Z ≥ η_Z (q_ph / q_Z) [1 − h(δ̃_ph)] − h(δ_Z)
//! ```
//!
//! and the detector-only rate (perfect source) is the same expression with
//! `q_X` for `q_ph` and `δ_X + ε_Z/(q_X η_Z)` for `δ̃_ph`. When a leakage
//! correction is present the bound is only proven for arguments up to
//! [`VALIDITY_LIMIT`]; beyond it the bracket is replaced by zero and the
//! certificate is marked outside the valid region.

use serde::{Deserialize, Serialize};

use crate::characterization::ImperfectionParams;
use crate::error::{Error, Result};
use crate::numerics::{binary_entropy, Probability};
use crate::phase::{apply_leakage, solve_delta_ph, EstimatedStats, PhaseErrorBound};

/// Largest leakage-corrected error rate for which the rate bound is proven.
pub const VALIDITY_LIMIT: f64 = 0.277;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    /// Perfect source (Δ = 0), imperfect detectors.
    DetectorOnly,
    /// Imperfect source and detectors.
    General,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateInputs {
    pub stats: EstimatedStats,
    pub imperfections: ImperfectionParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateCertificate {
    pub model: RateModel,
    /// Lower bound on R_Z; negative values are kept as-is.
    pub rate: f64,
    pub delta_ph: f64,
    pub delta_ph_tilde: f64,
    pub clamped: bool,
    pub valid_region: bool,
    pub positive: bool,
    pub inputs: CertificateInputs,
}

fn entropy(x: f64) -> f64 {
    binary_entropy(Probability::saturating(x))
}

/// Shared assembly of `η (q_num/q_Z) [1 − h(arg)] − h(δ_Z)`.
///
/// The fraction of reversed detections `η q_num / q_Z` cannot exceed one, so
/// it is capped there.
fn assemble(q_num: f64, q_z: f64, eta_z: f64, arg: f64, leakage: bool, delta_z: f64) -> (f64, bool) {
    let valid = !leakage || arg <= VALIDITY_LIMIT;
    let bracket = if valid && arg < 0.5 { 1.0 - entropy(arg) } else { 0.0 };
    let factor = (eta_z * q_num / q_z).min(1.0);
    (factor * bracket - entropy(delta_z), valid)
}

fn require_sifted_key(stats: &EstimatedStats) -> Result<f64> {
    let q_z = stats.q_z.value();
    if q_z <= 0.0 {
        return Err(Error::NoSiftedKey);
    }
    Ok(q_z)
}

/// Rate for a perfect source and arbitrarily imperfect detectors.
pub fn rate_detector_only(stats: &EstimatedStats, eta_z: f64, epsilon_z: f64) -> Result<RateCertificate> {
    let imperfections = ImperfectionParams::new(0.0, eta_z, epsilon_z)?;
    let q_z = require_sifted_key(stats)?;
    let q_x = stats.q_x.value();
    let dx = stats.delta_x.value();

    let denom = q_x * eta_z;
    let arg = if epsilon_z <= 0.0 {
        dx
    } else if denom <= 0.0 {
        f64::INFINITY
    } else {
        dx + epsilon_z / denom
    };
    let (rate, valid_region) = assemble(q_x, q_z, eta_z, arg, epsilon_z > 0.0, stats.delta_z.value());
    Ok(RateCertificate {
        model: RateModel::DetectorOnly,
        rate,
        delta_ph: dx,
        delta_ph_tilde: arg.min(0.5).max(dx),
        clamped: arg > 0.5,
        valid_region,
        positive: valid_region && rate > 0.0,
        inputs: CertificateInputs {
            stats: *stats,
            imperfections,
        },
    })
}

/// Rate from an already solved (and leakage-corrected) phase error bound.
pub fn rate_general(
    stats: &EstimatedStats,
    bound: &PhaseErrorBound,
    imperfections: &ImperfectionParams,
) -> Result<RateCertificate> {
    imperfections.validate()?;
    let q_z = require_sifted_key(stats)?;
    if !bound.feasible {
        return Err(Error::InvalidParameter {
            name: "bound",
            reason: "phase error bound is infeasible".into(),
        });
    }
    let (rate, valid_region) = assemble(
        stats.q_ph.value(),
        q_z,
        imperfections.eta_z,
        bound.delta_ph_tilde,
        imperfections.epsilon_z > 0.0,
        stats.delta_z.value(),
    );
    Ok(RateCertificate {
        model: RateModel::General,
        rate,
        delta_ph: bound.delta_ph,
        delta_ph_tilde: bound.delta_ph_tilde,
        clamped: bound.clamped,
        valid_region,
        positive: valid_region && rate > 0.0,
        inputs: CertificateInputs {
            stats: *stats,
            imperfections: *imperfections,
        },
    })
}

/// Full pipeline: phase error bound, leakage correction, rate.
pub fn certify(stats: &EstimatedStats, imperfections: &ImperfectionParams) -> Result<RateCertificate> {
    imperfections.validate()?;
    require_sifted_key(stats)?;
    let bound = solve_delta_ph(stats, imperfections.delta)?;
    let bound = apply_leakage(bound, stats.q_ph, imperfections.eta_z, imperfections.epsilon_z);
    rate_general(stats, &bound, imperfections)
}

/// `1 − h(δ_X) − h(δ_Z)`, the textbook BB84 rate.
pub fn rate_ideal(delta_x: Probability, delta_z: Probability) -> f64 {
    1.0 - binary_entropy(delta_x) - binary_entropy(delta_z)
}
