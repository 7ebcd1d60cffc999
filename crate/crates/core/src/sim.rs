//! Seeded Monte Carlo simulation of the prepare-and-measure protocol.
//!
//! Each signal is a qubit described by its Bloch vector in the x–z plane.
//! Z-basis states are ideal; the two X-basis states are tilted toward |0⟩ by
//! `x_tilt`, which makes the pair non-orthogonal and the source basis
//! dependent. Loss, misalignment and depolarization act in the channel, an
//! optional eavesdropper intercepts or blinds, and Bob's threshold detectors
//! have per-bit efficiencies and dark counts. Double clicks give a random bit.
//!
//! Every random decision for signal `i` is drawn from a ChaCha8 stream keyed by
//! `(seed, i)`, with a fixed slot per decision, so the tallies do not depend on
//! how signals are distributed over threads.

use std::f64::consts::FRAC_PI_4;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characterization::{basis_dependence, factor_common_loss, ImperfectionParams};
use crate::error::{Error, Result};
use crate::numerics::{HermitianOperator, Probability};
use crate::phase::EstimatedStats;
use crate::rate::{certify, RateCertificate};

const CHUNK: u64 = 1 << 13;

fn half() -> Probability {
    Probability::HALF
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceModel {
    /// Probability that Alice picks the Z basis.
    pub p_basis_z: Probability,
    /// Probability of bit 0 in the Z basis.
    pub p_z: Probability,
    /// Probability of bit 0 (the |+⟩ state) in the X basis.
    pub p_x: Probability,
    /// Tilt of both X-basis Bloch vectors toward |0⟩, in radians, `[0, π/4]`.
    pub x_tilt: f64,
}

impl Default for SourceModel {
    fn default() -> Self {
        SourceModel {
            p_basis_z: half(),
            p_z: half(),
            p_x: half(),
            x_tilt: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelModel {
    pub transmittance: Probability,
    /// Probability that the qubit is replaced by the maximally mixed state.
    pub depolarizing: Probability,
    /// Fixed misalignment: rotation of the Bloch vector about the y axis.
    pub rotation: f64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            transmittance: Probability::ONE,
            depolarizing: Probability::ZERO,
            rotation: 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoubleClickRule {
    #[default]
    RandomBit,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorModel {
    /// Detection efficiency of the bit-0 detector.
    pub eta0: Probability,
    /// Detection efficiency of the bit-1 detector.
    pub eta1: Probability,
    /// Per-detector dark count probability per gate.
    pub dark: Probability,
    /// Probability that Bob measures in the Z basis.
    pub p_basis_z: Probability,
    pub double_click_rule: DoubleClickRule,
}

impl Default for DetectorModel {
    fn default() -> Self {
        DetectorModel {
            eta0: Probability::ONE,
            eta1: Probability::ONE,
            dark: Probability::ZERO,
            p_basis_z: half(),
            double_click_rule: DoubleClickRule::RandomBit,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EveStrategy {
    #[default]
    None,
    /// Measure every arriving signal in a random basis and resend the result.
    InterceptResend,
    /// Suppress the photonic signal at Bob's detectors with this probability.
    /// Dark counts are unaffected.
    BlindFraction(Probability),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    pub n: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub source: SourceModel,
    #[serde(default)]
    pub channel: ChannelModel,
    #[serde(default)]
    pub detector: DetectorModel,
    #[serde(default)]
    pub eve: EveStrategy,
}

impl ProtocolConfig {
    /// Lossless, noiseless, unattacked configuration.
    pub fn ideal(n: u64, seed: u64) -> Self {
        ProtocolConfig {
            n,
            seed,
            source: SourceModel::default(),
            channel: ChannelModel::default(),
            detector: DetectorModel::default(),
            eve: EveStrategy::None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("n must be at least 1".into()));
        }
        let tilt = self.source.x_tilt;
        if !(tilt.is_finite() && (0.0..=FRAC_PI_4).contains(&tilt)) {
            return Err(Error::InvalidConfig(format!(
                "source.x_tilt = {tilt} is outside [0, pi/4]"
            )));
        }
        if !self.channel.rotation.is_finite() {
            return Err(Error::InvalidConfig("channel.rotation must be finite".into()));
        }
        Ok(())
    }
}

/// Outcome counts for one (Alice basis, Bob basis) combination.
///
/// `correct` and `error` compare Bob's bit with Alice's bit; they are only
/// meaningful as error counts when the bases match.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellTally {
    pub total: u64,
    pub vacuum: u64,
    pub correct: u64,
    pub error: u64,
}

impl CellTally {
    pub fn nonvacuum(&self) -> u64 {
        self.correct + self.error
    }

    fn merge(self, o: CellTally) -> CellTally {
        CellTally {
            total: self.total + o.total,
            vacuum: self.vacuum + o.vacuum,
            correct: self.correct + o.correct,
            error: self.error + o.error,
        }
    }
}

/// Tallies keyed by Alice's basis then Bob's basis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tallies {
    pub zz: CellTally,
    pub zx: CellTally,
    pub xz: CellTally,
    pub xx: CellTally,
}

impl Tallies {
    fn cell_mut(&mut self, alice: Basis, bob: Basis) -> &mut CellTally {
        match (alice, bob) {
            (Basis::Z, Basis::Z) => &mut self.zz,
            (Basis::Z, Basis::X) => &mut self.zx,
            (Basis::X, Basis::Z) => &mut self.xz,
            (Basis::X, Basis::X) => &mut self.xx,
        }
    }

    fn merge(self, o: Tallies) -> Tallies {
        Tallies {
            zz: self.zz.merge(o.zz),
            zx: self.zx.merge(o.zx),
            xz: self.xz.merge(o.xz),
            xx: self.xx.merge(o.xx),
        }
    }

    pub fn total(&self) -> u64 {
        self.zz.total + self.zx.total + self.xz.total + self.xx.total
    }
}

/// Δ and η_Z implied by a configuration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DerivedImperfections {
    pub delta: f64,
    pub eta_z: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationReport {
    pub config: ProtocolConfig,
    pub counts: Tallies,
    pub stats: EstimatedStats,
    pub derived_imperfections: DerivedImperfections,
    pub certificate: RateCertificate,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Basis {
    Z,
    X,
}

// Random slots per signal.
const ALICE_BASIS: usize = 0;
const ALICE_BIT: usize = 1;
const LOSS: usize = 2;
const DEPOLARIZE: usize = 3;
const EVE_BASIS: usize = 4;
const EVE_OUTCOME: usize = 5;
const BLIND: usize = 6;
const BOB_BASIS: usize = 7;
const PROJECTION: usize = 8;
const SIGNAL_CLICK: usize = 9;
const DARK0: usize = 10;
const DARK1: usize = 11;
const COINCIDENCE: usize = 12;
const DRAWS: usize = 13;

/// Bloch vector restricted to the x–z plane.
#[derive(Clone, Copy, Debug)]
struct Bloch {
    x: f64,
    z: f64,
}

impl Bloch {
    fn eigenstate(basis: Basis, bit: u8) -> Bloch {
        let s = if bit == 0 { 1.0 } else { -1.0 };
        match basis {
            Basis::Z => Bloch { x: 0.0, z: s },
            Basis::X => Bloch { x: s, z: 0.0 },
        }
    }

    /// Probability of outcome 0 for a projective measurement in `basis`.
    fn p0(self, basis: Basis) -> f64 {
        match basis {
            Basis::Z => (1.0 + self.z) / 2.0,
            Basis::X => (1.0 + self.x) / 2.0,
        }
    }

    fn rotate(self, angle: f64) -> Bloch {
        let (s, c) = angle.sin_cos();
        Bloch {
            x: c * self.x + s * self.z,
            z: -s * self.x + c * self.z,
        }
    }
}

fn prepared_state(basis: Basis, bit: u8, tilt: f64) -> Bloch {
    match basis {
        Basis::Z => Bloch::eigenstate(Basis::Z, bit),
        Basis::X => {
            let s = if bit == 0 { 1.0 } else { -1.0 };
            Bloch {
                x: s * tilt.cos(),
                z: tilt.sin(),
            }
        }
    }
}

enum Outcome {
    Vacuum,
    Bit(u8),
}

struct SignalDraws([f64; DRAWS]);

impl SignalDraws {
    fn new(key: &ChaCha8Rng, index: u64) -> Self {
        let mut rng = key.clone();
        rng.set_stream(index);
        rng.set_word_pos(0);
        SignalDraws(std::array::from_fn(|_| rng.random::<f64>()))
    }

    #[inline]
    fn below(&self, slot: usize, p: f64) -> bool {
        self.0[slot] < p
    }
}

fn simulate_signal(cfg: &ProtocolConfig, u: &SignalDraws, tallies: &mut Tallies) {
    let src = &cfg.source;
    let alice = if u.below(ALICE_BASIS, src.p_basis_z.value()) { Basis::Z } else { Basis::X };
    let p_bit0 = match alice {
        Basis::Z => src.p_z.value(),
        Basis::X => src.p_x.value(),
    };
    let bit: u8 = if u.below(ALICE_BIT, p_bit0) { 0 } else { 1 };

    let mut state = Some(prepared_state(alice, bit, src.x_tilt));
    if !u.below(LOSS, cfg.channel.transmittance.value()) {
        state = None;
    }
    state = state.map(|s| {
        let s = s.rotate(cfg.channel.rotation);
        if u.below(DEPOLARIZE, cfg.channel.depolarizing.value()) {
            Bloch { x: 0.0, z: 0.0 }
        } else {
            s
        }
    });

    let mut blinded = false;
    match cfg.eve {
        EveStrategy::None => {}
        EveStrategy::InterceptResend => {
            state = state.map(|s| {
                let eb = if u.below(EVE_BASIS, 0.5) { Basis::Z } else { Basis::X };
                let r = if u.below(EVE_OUTCOME, s.p0(eb)) { 0 } else { 1 };
                Bloch::eigenstate(eb, r)
            });
        }
        EveStrategy::BlindFraction(f) => blinded = u.below(BLIND, f.value()),
    }

    let det = &cfg.detector;
    let bob = if u.below(BOB_BASIS, det.p_basis_z.value()) { Basis::Z } else { Basis::X };
    let signal_click = match state {
        Some(s) if !blinded => {
            let k: u8 = if u.below(PROJECTION, s.p0(bob)) { 0 } else { 1 };
            let eta = if k == 0 { det.eta0 } else { det.eta1 };
            u.below(SIGNAL_CLICK, eta.value()).then_some(k)
        }
        _ => None,
    };
    let click0 = signal_click == Some(0) || u.below(DARK0, det.dark.value());
    let click1 = signal_click == Some(1) || u.below(DARK1, det.dark.value());
    let outcome = match (click0, click1) {
        (false, false) => Outcome::Vacuum,
        (true, false) => Outcome::Bit(0),
        (false, true) => Outcome::Bit(1),
        (true, true) => Outcome::Bit(if u.below(COINCIDENCE, 0.5) { 0 } else { 1 }),
    };

    let cell = tallies.cell_mut(alice, bob);
    cell.total += 1;
    match outcome {
        Outcome::Vacuum => cell.vacuum += 1,
        Outcome::Bit(b) if b == bit => cell.correct += 1,
        Outcome::Bit(_) => cell.error += 1,
    }
}

/// Runs `config.n` signals on the current rayon pool and returns the raw tallies.
///
/// The result depends only on the configuration (including its seed).
pub fn run_protocol(config: &ProtocolConfig) -> Result<Tallies> {
    config.validate()?;
    let key = ChaCha8Rng::seed_from_u64(config.seed);
    let n = config.n;
    let chunks = n.div_ceil(CHUNK);
    let tallies = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut t = Tallies::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(n) {
                simulate_signal(config, &SignalDraws::new(&key, i), &mut t);
            }
            t
        })
        .reduce(Tallies::default, Tallies::merge);
    Ok(tallies)
}

fn ratio(num: u64, den: u64) -> Result<Probability> {
    Probability::new(num as f64 / den as f64)
}

/// Detection fractions and matched-basis error rates from raw tallies.
///
/// With no detections in the a = b = X cell, δ_X is reported as 0; it then
/// carries no weight in the phase-error inequality.
pub fn estimate_stats(counts: &Tallies) -> Result<EstimatedStats> {
    for (name, cell) in [("a=X,b=X", &counts.xx), ("a=Z,b=X", &counts.zx), ("a=Z,b=Z", &counts.zz)] {
        if cell.total == 0 {
            return Err(Error::InsufficientStatistics(format!("no signals in cell {name}")));
        }
    }
    if counts.zz.nonvacuum() == 0 {
        return Err(Error::InsufficientStatistics(
            "no detections in cell a=Z,b=Z".into(),
        ));
    }
    let xx = &counts.xx;
    Ok(EstimatedStats {
        q_x: ratio(xx.nonvacuum(), xx.total)?,
        q_z: ratio(counts.zz.nonvacuum(), counts.zz.total)?,
        q_ph: ratio(counts.zx.nonvacuum(), counts.zx.total)?,
        delta_x: if xx.nonvacuum() > 0 {
            ratio(xx.error, xx.nonvacuum())?
        } else {
            Probability::ZERO
        },
        delta_z: ratio(counts.zz.error, counts.zz.nonvacuum())?,
    })
}

/// Average emitted states `(ρ_Z, ρ_X)` of the configured source.
pub fn source_states(source: &SourceModel) -> Result<(HermitianOperator, HermitianOperator)> {
    let p_z = source.p_z.value();
    let rho_z = HermitianOperator::diagonal(&[p_z, 1.0 - p_z])?;
    let polar = |b: Bloch| {
        // polar angle from +z for a vector in the x–z plane
        let phi = b.x.atan2(b.z);
        HermitianOperator::from_real_rows(&[
            vec![(phi / 2.0).cos().powi(2), (phi / 2.0).cos() * (phi / 2.0).sin()],
            vec![(phi / 2.0).cos() * (phi / 2.0).sin(), (phi / 2.0).sin().powi(2)],
        ])
    };
    let plus = polar(prepared_state(Basis::X, 0, source.x_tilt))?;
    let minus = polar(prepared_state(Basis::X, 1, source.x_tilt))?;
    let p_x = source.p_x.value();
    let rho_x = HermitianOperator::mixture(&[(p_x, &plus), (1.0 - p_x, &minus)])?;
    Ok((rho_z, rho_x))
}

/// Honest characterization of the configured models.
///
/// Δ comes from the fidelity of the source's average states; η_Z is the ratio
/// of the smaller to the larger detector efficiency, reduced by the blinded
/// fraction.
pub fn derived_imperfections(config: &ProtocolConfig) -> Result<DerivedImperfections> {
    config.validate()?;
    let (rho_z, rho_x) = source_states(&config.source)?;
    let delta = basis_dependence(&rho_z, &rho_x)?.min(0.5);
    let residual = match factor_common_loss(config.detector.eta0, config.detector.eta1) {
        Ok((_, r)) => r,
        Err(Error::FullyBlinded) => 0.0,
        Err(e) => return Err(e),
    };
    let blind = match config.eve {
        EveStrategy::BlindFraction(f) => f.value(),
        _ => 0.0,
    };
    Ok(DerivedImperfections {
        delta,
        eta_z: residual * (1.0 - blind),
    })
}

/// Simulates, estimates and certifies with the derived Δ and η_Z (ε_Z = 0).
pub fn simulate_and_certify(config: &ProtocolConfig) -> Result<SimulationReport> {
    let derived = derived_imperfections(config)?;
    let counts = run_protocol(config)?;
    let stats = estimate_stats(&counts)?;
    let params = ImperfectionParams::new(derived.delta, derived.eta_z, 0.0)?;
    let certificate = certify(&stats, &params)?;
    Ok(SimulationReport {
        config: *config,
        counts,
        stats,
        derived_imperfections: derived,
        certificate,
    })
}
