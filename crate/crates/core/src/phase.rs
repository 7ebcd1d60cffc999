//! Worst-case phase error rate from observed statistics and source basis
//! dependence.
//!
//! The phase error rate δ_ph is the largest value compatible with
//!
//! ```text
//! 1 − 2Δ ≤ √(q_X(1−δ_X) q_ph(1−δ_ph)) + √(q_X δ_X q_ph δ_ph) + √((1−q_X)(1−q_ph))
//! ```
//!
//! capped at 1/2. Detector leakage then adds `ε_Z / (q_ph η_Z)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{bisect_decreasing, Probability};

/// Bisection tolerance on δ_ph.
pub const SOLVER_TOL: f64 = 1e-10;

/// Rounding slack when testing the inequality at its maximum δ = δ_X.
const FEASIBILITY_SLACK: f64 = 1e-12;

/// Measured fractions and error rates from the parameter-estimation step.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatedStats {
    /// Non-vacuum fraction for a = X, b = X.
    pub q_x: Probability,
    /// Non-vacuum fraction for a = Z, b = Z.
    pub q_z: Probability,
    /// Non-vacuum fraction for a = Z, b = X.
    pub q_ph: Probability,
    pub delta_x: Probability,
    pub delta_z: Probability,
}

impl EstimatedStats {
    pub fn new(q_x: f64, q_z: f64, q_ph: f64, delta_x: f64, delta_z: f64) -> Result<Self> {
        Ok(EstimatedStats {
            q_x: Probability::new(q_x)?,
            q_z: Probability::new(q_z)?,
            q_ph: Probability::new(q_ph)?,
            delta_x: Probability::new(delta_x)?,
            delta_z: Probability::new(delta_z)?,
        })
    }

    /// Equal detection fractions `q` and equal error rates `δ` in both bases.
    pub fn symmetric(q: f64, delta: f64) -> Result<Self> {
        Self::new(q, q, q, delta, delta)
    }
}

/// Solution of the phase-error inequality, before and after the leakage term.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseErrorBound {
    pub delta_ph: f64,
    pub delta_ph_tilde: f64,
    /// The raw solution exceeded 1/2 and was capped.
    pub clamped: bool,
    pub feasible: bool,
}

/// Right-hand side of the phase-error inequality evaluated at `δ_ph = delta`.
pub fn rhs_g(delta: f64, q_x: Probability, delta_x: Probability, q_ph: Probability) -> f64 {
    let (qx, dx, qph) = (q_x.value(), delta_x.value(), q_ph.value());
    let delta = delta.clamp(0.0, 1.0);
    (qx * (1.0 - dx) * qph * (1.0 - delta)).sqrt()
        + (qx * dx * qph * delta).sqrt()
        + ((1.0 - qx) * (1.0 - qph)).sqrt()
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.is_finite() && (0.0..=0.5).contains(&delta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "delta",
            reason: format!("{delta} is outside [0, 0.5]"),
        })
    }
}

fn solve(q_x: Probability, q_ph: Probability, delta_x: Probability, delta: f64) -> Result<PhaseErrorBound> {
    check_delta(delta)?;
    if q_x.value() <= 0.0 && q_ph.value() <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "q_x, q_ph",
            reason: "at least one of q_x and q_ph must be positive".into(),
        });
    }
    let target = 1.0 - 2.0 * delta;
    let g = |d: f64| rhs_g(d, q_x, delta_x, q_ph);

    // By Cauchy-Schwarz the right-hand side peaks at δ_ph = δ_X.
    let lo = delta_x.value();
    let rhs_max = g(lo);
    if rhs_max < target - FEASIBILITY_SLACK {
        return Err(Error::InconsistentStatistics { rhs_max, target });
    }

    // A target at the peak leaves δ_X as the only feasible point.
    let raw = if rhs_max - target <= FEASIBILITY_SLACK {
        lo
    } else if g(1.0) >= target || lo >= 1.0 {
        1.0
    } else {
        let f = |d: f64| if d <= lo { 0.0 } else { g(d) - target };
        bisect_decreasing(f, lo, 1.0, SOLVER_TOL)?
    };
    let clamped = raw > 0.5;
    let delta_ph = raw.min(0.5);
    Ok(PhaseErrorBound {
        delta_ph,
        delta_ph_tilde: delta_ph,
        clamped,
        feasible: true,
    })
}

/// Largest δ_ph satisfying the inequality, capped at 1/2.
///
/// Returns [`Error::InconsistentStatistics`] when the observed data violate the
/// inequality even at its maximum; the protocol run should then be aborted.
pub fn solve_delta_ph(stats: &EstimatedStats, delta: f64) -> Result<PhaseErrorBound> {
    solve(stats.q_x, stats.q_ph, stats.delta_x, delta)
}

/// [`solve_delta_ph`] with `q_X = q_ph = q`.
pub fn solve_delta_ph_symmetric(q: Probability, delta_x: Probability, delta: f64) -> Result<PhaseErrorBound> {
    if q.value() <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: "must be positive".into(),
        });
    }
    solve(q, q, delta_x, delta)
}

/// The published closed-form estimate for the symmetric channel,
///
/// `min{1/2, δ_X + 8x((1−x)(1−2δ_X) + √(x(1−x)δ_X(1−δ_X)))}` with `x = Δ/q`.
///
/// At δ_X = 0 this is twice the exact solution of the symmetric inequality, so
/// it is kept for comparison only and never feeds a certificate.
pub fn closed_form_delta_ph(q: Probability, delta_x: Probability, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let q = q.value();
    if q <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "q",
            reason: "must be positive".into(),
        });
    }
    let x = delta / q;
    if x > 1.0 {
        return Err(Error::InvalidParameter {
            name: "delta / q",
            reason: format!("{x} exceeds 1"),
        });
    }
    let dx = delta_x.value();
    let inner = (1.0 - x) * (1.0 - 2.0 * dx) + (x * (1.0 - x) * dx * (1.0 - dx)).sqrt();
    Ok((dx + 8.0 * x * inner).min(0.5))
}

/// Adds the detector leakage term `ε_Z / (q_ph η_Z)`, capped at 1/2.
pub fn apply_leakage(bound: PhaseErrorBound, q_ph: Probability, eta_z: f64, epsilon_z: f64) -> PhaseErrorBound {
    let denom = q_ph.value() * eta_z;
    let tilde = if epsilon_z <= 0.0 {
        bound.delta_ph
    } else if denom <= 0.0 || !bound.feasible {
        0.5
    } else {
        (bound.delta_ph + epsilon_z / denom).min(0.5)
    };
    PhaseErrorBound {
        delta_ph_tilde: tilde.max(bound.delta_ph),
        ..bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn p(v: f64) -> Probability {
        Probability::new(v).unwrap()
    }

    /// Exact solution via `√((1−a)(1−b)) + √(ab) = cos(θ_b − θ_a)` with
    /// `a = sin²θ_a`: the feasible δ_ph form an arc around θ_X.
    fn arc_oracle(q_x: f64, q_ph: f64, dx: f64, delta: f64) -> f64 {
        let c = ((1.0 - q_x) * (1.0 - q_ph)).sqrt();
        let k = ((1.0 - 2.0 * delta - c) / (q_x * q_ph).sqrt()).clamp(-1.0, 1.0);
        let theta = dx.sqrt().asin() + k.acos();
        if theta >= std::f64::consts::FRAC_PI_2 {
            0.5
        } else {
            theta.sin().powi(2).min(0.5)
        }
    }

    #[test]
    fn rhs_examples() {
        assert_eq!(rhs_g(0.05, p(1.0), p(0.05), p(1.0)), 1.0);
        assert_eq!(rhs_g(0.0, p(1.0), p(0.0), p(1.0)), 1.0);
        assert!((rhs_g(0.19, p(1.0), p(0.0), p(1.0)) - 0.9).abs() < 1e-9);
    }

    #[test]
    fn solver_examples() {
        let s = EstimatedStats::new(1.0, 1.0, 1.0, 0.05, 0.05).unwrap();
        let b = solve_delta_ph(&s, 0.0).unwrap();
        assert!((b.delta_ph - 0.05).abs() < 1e-7, "{}", b.delta_ph);

        let s = EstimatedStats::new(1.0, 1.0, 1.0, 0.0, 0.0).unwrap();
        let b = solve_delta_ph(&s, 0.05).unwrap();
        assert!((b.delta_ph - 0.19).abs() < 1e-8);
        assert!(!b.clamped && b.feasible);

        let threshold = (2f64.sqrt() - 1.0) / (2.0 * 2f64.sqrt());
        let b = solve_delta_ph(&s, threshold).unwrap();
        assert!((b.delta_ph - 0.5).abs() < 1e-6);

        let b = solve_delta_ph(&s, 0.3).unwrap();
        assert!(b.clamped && b.delta_ph == 0.5);
    }

    #[test]
    fn solver_flags_inconsistent_statistics() {
        // Δ = 0 forces identical detection statistics in both bases.
        let s = EstimatedStats::new(1.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(
            solve_delta_ph(&s, 0.0),
            Err(Error::InconsistentStatistics { .. })
        ));
        let s = EstimatedStats::new(0.9, 1.0, 0.8, 0.0, 0.0).unwrap();
        assert!(solve_delta_ph(&s, 0.0).is_err());
        assert!(solve_delta_ph(&s, 0.01).is_ok());
    }

    #[test]
    fn solver_rejects_bad_arguments() {
        let s = EstimatedStats::new(0.0, 1.0, 0.0, 0.0, 0.0).unwrap();
        assert!(matches!(solve_delta_ph(&s, 0.1), Err(Error::InvalidParameter { .. })));
        let s = EstimatedStats::symmetric(1.0, 0.0).unwrap();
        assert!(solve_delta_ph(&s, 0.6).is_err());
        assert!(solve_delta_ph(&s, -0.1).is_err());
        assert!(solve_delta_ph_symmetric(p(0.0), p(0.0), 0.1).is_err());
    }

    #[test]
    fn symmetric_examples() {
        let b = solve_delta_ph_symmetric(p(1.0), p(0.0), 0.05).unwrap();
        assert!((b.delta_ph - 0.19).abs() < 1e-8);
        let b = solve_delta_ph_symmetric(p(0.5), p(0.0), 0.025).unwrap();
        assert!((b.delta_ph - 0.19).abs() < 1e-8);
        let b = solve_delta_ph_symmetric(p(1.0), p(0.1), 0.0).unwrap();
        assert!((b.delta_ph - 0.1).abs() < 1e-7);
    }

    #[test]
    fn closed_form_examples() {
        assert_eq!(closed_form_delta_ph(p(1.0), p(0.0), 0.0).unwrap(), 0.0);
        assert!((closed_form_delta_ph(p(1.0), p(0.0), 0.05).unwrap() - 0.38).abs() < 1e-12);
        assert!((closed_form_delta_ph(p(1.0), p(0.0), 0.0625).unwrap() - 0.46875).abs() < 1e-12);
        assert_eq!(closed_form_delta_ph(p(1.0), p(0.0), 0.1).unwrap(), 0.5);
        assert!(closed_form_delta_ph(p(0.0), p(0.0), 0.1).is_err());
        assert!(closed_form_delta_ph(p(0.1), p(0.0), 0.2).is_err());
    }

    #[test]
    fn leakage_examples() {
        let base = PhaseErrorBound { delta_ph: 0.05, delta_ph_tilde: 0.05, clamped: false, feasible: true };
        assert_eq!(apply_leakage(base, p(0.5), 0.8, 0.0).delta_ph_tilde, 0.05);
        assert!((apply_leakage(base, p(0.5), 0.8, 0.01).delta_ph_tilde - 0.075).abs() < 1e-12);
        let high = PhaseErrorBound { delta_ph: 0.4, delta_ph_tilde: 0.4, ..base };
        assert_eq!(apply_leakage(high, p(0.1), 0.1, 0.01).delta_ph_tilde, 0.5);
        assert_eq!(apply_leakage(base, p(0.0), 0.8, 0.01).delta_ph_tilde, 0.5);
        assert_eq!(apply_leakage(base, p(0.5), 0.0, 0.01).delta_ph_tilde, 0.5);
    }

    #[test]
    fn solver_matches_arc_oracle() {
        for &(qx, qph, dx, delta) in &[
            (1.0, 1.0, 0.0, 0.05),
            (0.8, 0.7, 0.03, 0.05),
            (0.3, 0.35, 0.1, 0.02),
            (0.05, 0.06, 0.02, 0.01),
            (0.9, 0.9, 0.2, 0.001),
        ] {
            let s = EstimatedStats::new(qx, 1.0, qph, dx, 0.0).unwrap();
            let got = solve_delta_ph(&s, delta).unwrap().delta_ph;
            let want = arc_oracle(qx, qph, dx, delta);
            assert!((got - want).abs() < 1e-8, "{qx} {qph} {dx} {delta}: {got} vs {want}");
        }
    }

    #[test]
    fn solver_monotone_on_grid() {
        for i in 0..20 {
            let dx = 0.2 * i as f64 / 19.0;
            let mut prev_in_delta = 0.0;
            for j in 0..20 {
                let delta = 0.1 * j as f64 / 19.0;
                let s = EstimatedStats::new(0.6, 1.0, 0.6, dx, 0.0).unwrap();
                let v = solve_delta_ph(&s, delta).unwrap().delta_ph;
                assert!(v + 1e-9 >= prev_in_delta, "Δ monotonicity at δ_X={dx}, Δ={delta}");
                prev_in_delta = v;
            }
        }
        for j in 0..20 {
            let delta = 0.1 * j as f64 / 19.0;
            let mut prev = 0.0;
            for i in 0..20 {
                let dx = 0.2 * i as f64 / 19.0;
                let s = EstimatedStats::new(0.6, 1.0, 0.6, dx, 0.0).unwrap();
                let v = solve_delta_ph(&s, delta).unwrap().delta_ph;
                assert!(v + 1e-9 >= prev, "δ_X monotonicity at δ_X={dx}, Δ={delta}");
                prev = v;
            }
        }
    }

    #[test]
    fn symmetric_depends_only_on_delta_over_q() {
        for &x in &[0.005, 0.02, 0.05, 0.1, 0.14] {
            for &dx in &[0.0, 0.01, 0.05] {
                let reference = solve_delta_ph_symmetric(p(1.0), p(dx), x).unwrap().delta_ph;
                for &q in &[0.9, 0.5, 0.3] {
                    if x * q > 0.5 {
                        continue;
                    }
                    let v = solve_delta_ph_symmetric(p(q), p(dx), x * q).unwrap().delta_ph;
                    assert!((v - reference).abs() < 1e-9, "x={x} q={q} dx={dx}");
                }
            }
        }
    }

    proptest! {
        #[test]
        fn symmetric_is_general_with_equal_q(q in 0.01f64..1.0, dx in 0.0f64..0.3, delta in 0.0f64..0.5) {
            let s = EstimatedStats::new(q, 1.0, q, dx, 0.0).unwrap();
            let a = solve_delta_ph_symmetric(p(q), p(dx), delta).unwrap();
            let b = solve_delta_ph(&s, delta).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn leakage_never_decreases(dph in 0.0f64..0.5, qph in 0.0f64..1.0, eta in 0.0f64..1.0, eps in 0.0f64..1.0) {
            let b = PhaseErrorBound { delta_ph: dph, delta_ph_tilde: dph, clamped: false, feasible: true };
            let out = apply_leakage(b, p(qph), eta, eps);
            prop_assert!(out.delta_ph_tilde >= dph);
            prop_assert!(out.delta_ph_tilde <= 0.5);
        }
    }
}
