//! Key-rate certification for BB84 with characterized source and detector
//! imperfections.
//!
//! The crate turns measured detection statistics plus three device parameters
//! (basis dependence Δ, blinding parameter η_Z, leakage ε_Z) into a bound on the
//! phase error rate and an asymptotic secret key rate. It also ships a seeded
//! protocol simulator and a parameter-space sweeper that traces where the rate
//! stays positive.

pub mod boundary;
pub mod characterization;
pub mod cli;
pub mod error;
pub mod numerics;
pub mod phase;
pub mod rate;
pub mod sim;

pub use characterization::ImperfectionParams;
pub use error::{Error, Result};
pub use numerics::Probability;
pub use phase::{EstimatedStats, PhaseErrorBound};
pub use rate::{certify, RateCertificate};
