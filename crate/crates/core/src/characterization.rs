//! Setup-characterizing parameters computed from explicit operator models.
//!
//! * Δ, the basis dependence of the source, from the fidelity of the average
//!   emitted states in the two bases (`F(ρ_Z, ρ_X) = 1 − 2Δ`).
//! * η_Z, the blinding parameter, as the smallest probability that a state in
//!   the non-vacuum subspace `Q` produces the detection outcome `E`.
//! * Trace distances, for bounding the leakage parameter ε_Z by hand. The
//!   leakage parameter itself is always supplied by the caller.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{hermitian_eigensystem, psd_sqrt, HermitianOperator, Probability};

const POVM_TOL: f64 = 1e-9;

/// The three bounds that characterize a practical setup.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImperfectionParams {
    /// Source basis dependence Δ, in `[0, 0.5]`.
    pub delta: f64,
    /// Detector blinding parameter η_Z, in `[0, 1]`.
    pub eta_z: f64,
    /// Detector leakage parameter ε_Z, in `[0, 1]`.
    pub epsilon_z: f64,
}

impl ImperfectionParams {
    pub const IDEAL: ImperfectionParams = ImperfectionParams {
        delta: 0.0,
        eta_z: 1.0,
        epsilon_z: 0.0,
    };

    pub fn new(delta: f64, eta_z: f64, epsilon_z: f64) -> Result<Self> {
        let p = ImperfectionParams {
            delta,
            eta_z,
            epsilon_z,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_range("delta", self.delta, 0.0, 0.5)?;
        check_range("eta_z", self.eta_z, 0.0, 1.0)?;
        check_range("epsilon_z", self.epsilon_z, 0.0, 1.0)
    }
}

fn check_range(name: &'static str, v: f64, lo: f64, hi: f64) -> Result<()> {
    if v.is_finite() && v >= lo && v <= hi {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("{v} is outside [{lo}, {hi}]"),
        })
    }
}

fn check_pair(rho: &HermitianOperator, sigma: &HermitianOperator) -> Result<()> {
    if rho.dim() != sigma.dim() {
        return Err(Error::DimensionMismatch(rho.dim(), sigma.dim()));
    }
    rho.check_density()?;
    sigma.check_density()
}

/// Uhlmann fidelity `Tr[(√ρ σ √ρ)^{1/2}]`.
pub fn fidelity(rho: &HermitianOperator, sigma: &HermitianOperator) -> Result<f64> {
    check_pair(rho, sigma)?;
    let root = psd_sqrt(rho)?;
    let inner = root.matrix() * sigma.matrix() * root.matrix();
    let inner = HermitianOperator::new(hermitize(inner))?;
    let f: f64 = hermitian_eigensystem(&inner)
        .values
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .sum();
    Ok(f.clamp(0.0, 1.0))
}

// Products of Hermitian matrices pick up rounding asymmetry of order 1e-16.
fn hermitize(m: DMatrix<Complex64>) -> DMatrix<Complex64> {
    let adj = m.adjoint();
    (m + adj).scale(0.5)
}

/// Tightest Δ with `F(ρ_Z, ρ_X) ≥ 1 − 2Δ`.
pub fn basis_dependence(rho_z: &HermitianOperator, rho_x: &HermitianOperator) -> Result<f64> {
    Ok(((1.0 - fidelity(rho_z, rho_x)?) / 2.0).max(0.0))
}

/// `½ Σ |λ_i|` over the eigenvalues of `ρ − σ`.
pub fn trace_distance(rho: &HermitianOperator, sigma: &HermitianOperator) -> Result<f64> {
    check_pair(rho, sigma)?;
    let diff = rho.sub(sigma)?;
    let d: f64 = hermitian_eigensystem(&diff)
        .values
        .iter()
        .map(|l| l.abs())
        .sum::<f64>()
        / 2.0;
    Ok(d.clamp(0.0, 1.0))
}

/// Minimum of `⟨Φ|E|Φ⟩` over unit vectors `Φ` in the support of the projector `Q`.
pub fn blinding_parameter(e: &HermitianOperator, q: &HermitianOperator) -> Result<f64> {
    if e.dim() != q.dim() {
        return Err(Error::DimensionMismatch(e.dim(), q.dim()));
    }
    let e_eig = hermitian_eigensystem(e);
    let (lo, hi) = (e_eig.values[0], e_eig.values[e_eig.values.len() - 1]);
    if lo < -POVM_TOL {
        return Err(Error::InvalidPovm(lo));
    }
    if hi > 1.0 + POVM_TOL {
        return Err(Error::InvalidPovm(hi));
    }
    q.check_projector()?;

    // Orthonormal basis of the support of Q, from its unit eigenvalues.
    let q_eig = hermitian_eigensystem(q);
    let support: Vec<usize> = (0..q.dim()).filter(|&j| q_eig.values[j] > 0.5).collect();
    if support.is_empty() {
        return Err(Error::EmptySubspace);
    }
    let basis = q_eig.vectors.select_columns(&support);
    let block = HermitianOperator::new(hermitize(basis.adjoint() * e.matrix() * &basis))?;
    Ok(hermitian_eigensystem(&block).values[0].clamp(0.0, 1.0))
}

/// Splits a pair of beamsplitter-model detector efficiencies into a common loss
/// (absorbed into the channel) and the residual blinding parameter.
pub fn factor_common_loss(eta0: Probability, eta1: Probability) -> Result<(f64, f64)> {
    let (a, b) = (eta0.value(), eta1.value());
    let common = a.max(b);
    if common <= 0.0 {
        return Err(Error::FullyBlinded);
    }
    Ok((common, a.min(b) / common))
}
