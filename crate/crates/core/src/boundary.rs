//! Parameter sweeps: rate surfaces and the boundary of the positive-rate region.
//!
//! A sweep varies two parameters over a rectangular grid while the rest stay
//! fixed. For each grid row (fixed `y`) the boundary tracer finds every change
//! between positive and non-positive certified rate and refines it by
//! bisection on the positivity predicate.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::characterization::ImperfectionParams;
use crate::error::{Error, Result};
use crate::numerics::bisect_decreasing;
use crate::phase::EstimatedStats;
use crate::rate::{certify, RateCertificate};

/// Width in `x` to which each crossing is refined.
pub const CROSSING_TOL: f64 = 1e-12;

/// Significant digits written to CSV output.
pub const CSV_DIGITS: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Delta,
    /// Δ divided by the reference detection fraction `q`.
    DeltaOverQ,
    EtaZ,
    EpsilonZ,
    DeltaX,
    DeltaZ,
}

impl SweepParam {
    fn name(self) -> &'static str {
        match self {
            SweepParam::Delta => "delta",
            SweepParam::DeltaOverQ => "delta_over_q",
            SweepParam::EtaZ => "eta_z",
            SweepParam::EpsilonZ => "epsilon_z",
            SweepParam::DeltaX => "delta_x",
            SweepParam::DeltaZ => "delta_z",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Square(usize),
    PerAxis([usize; 2]),
}

impl Resolution {
    fn dims(self) -> (usize, usize) {
        match self {
            Resolution::Square(n) => (n, n),
            Resolution::PerAxis([nx, ny]) => (nx, ny),
        }
    }
}

/// Values held constant during a sweep.
///
/// `q` is the reference detection fraction. It fills any of `q_x`, `q_z`,
/// `q_ph` left unset and converts `delta_over_q` into Δ. Missing values
/// default to an ideal device: q = 1, Δ = δ_X = δ_Z = ε_Z = 0, η_Z = 1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParams {
    pub q: Option<f64>,
    pub q_x: Option<f64>,
    pub q_z: Option<f64>,
    pub q_ph: Option<f64>,
    pub delta: Option<f64>,
    pub delta_over_q: Option<f64>,
    pub eta_z: Option<f64>,
    pub epsilon_z: Option<f64>,
    pub delta_x: Option<f64>,
    pub delta_z: Option<f64>,
}

impl FixedParams {
    fn get(&self, p: SweepParam) -> Option<f64> {
        match p {
            SweepParam::Delta => self.delta,
            SweepParam::DeltaOverQ => self.delta_over_q,
            SweepParam::EtaZ => self.eta_z,
            SweepParam::EpsilonZ => self.epsilon_z,
            SweepParam::DeltaX => self.delta_x,
            SweepParam::DeltaZ => self.delta_z,
        }
    }
}

/// Two-parameter sweep description.
///
/// In symmetric mode `q_X = q_Z = q_ph = q`, `δ_X = δ_Z`, and ε_Z = 0.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis_x: SweepParam,
    pub axis_y: SweepParam,
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub resolution: Resolution,
    #[serde(default)]
    pub fixed: FixedParams,
    #[serde(default)]
    pub symmetric: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    /// The statistics contradict the assumed Δ, or no key is sifted.
    Infeasible,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfacePoint {
    pub x: f64,
    pub y: f64,
    pub rate: Option<f64>,
    pub status: PointStatus,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryPoint {
    pub y: f64,
    pub x: f64,
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidSweep(msg.into())
}

fn in_unit(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {v} is outside [0, 1]")))
    }
}

/// Parameters that a sweep axis writes to, for conflict detection.
fn targets(p: SweepParam, symmetric: bool) -> &'static [&'static str] {
    match p {
        SweepParam::Delta | SweepParam::DeltaOverQ => &["delta"],
        SweepParam::EtaZ => &["eta_z"],
        SweepParam::EpsilonZ => &["epsilon_z"],
        SweepParam::DeltaX if symmetric => &["delta_x", "delta_z"],
        SweepParam::DeltaZ if symmetric => &["delta_x", "delta_z"],
        SweepParam::DeltaX => &["delta_x"],
        SweepParam::DeltaZ => &["delta_z"],
    }
}

impl SweepSpec {
    fn reference_q(&self) -> f64 {
        self.fixed.q.unwrap_or(1.0)
    }

    fn domain(&self, p: SweepParam) -> (f64, f64) {
        match p {
            SweepParam::Delta => (0.0, 0.5),
            SweepParam::DeltaOverQ => (0.0, 0.5 / self.reference_q()),
            _ => (0.0, 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.fixed;
        let q = self.reference_q();
        if !(q.is_finite() && q > 0.0 && q <= 1.0) {
            return Err(invalid(format!("fixed.q = {q} must lie in (0, 1]")));
        }
        for (name, v) in [
            ("fixed.q_x", f.q_x),
            ("fixed.q_z", f.q_z),
            ("fixed.q_ph", f.q_ph),
            ("fixed.eta_z", f.eta_z),
            ("fixed.epsilon_z", f.epsilon_z),
            ("fixed.delta_x", f.delta_x),
            ("fixed.delta_z", f.delta_z),
        ] {
            if let Some(v) = v {
                in_unit(name, v)?;
            }
        }
        if f.delta.is_some() && f.delta_over_q.is_some() {
            return Err(invalid("fixed.delta and fixed.delta_over_q are mutually exclusive"));
        }

        let tx = targets(self.axis_x, self.symmetric);
        let ty = targets(self.axis_y, self.symmetric);
        if tx.iter().any(|t| ty.contains(t)) {
            return Err(invalid(format!(
                "axes {} and {} control the same parameter",
                self.axis_x.name(),
                self.axis_y.name()
            )));
        }
        for axis in [self.axis_x, self.axis_y] {
            let clash = match axis {
                SweepParam::Delta | SweepParam::DeltaOverQ => f.delta.is_some() || f.delta_over_q.is_some(),
                SweepParam::DeltaX | SweepParam::DeltaZ if self.symmetric => {
                    f.delta_x.is_some() || f.delta_z.is_some()
                }
                other => f.get(other).is_some(),
            };
            if clash {
                return Err(invalid(format!("{} is both an axis and fixed", axis.name())));
            }
        }

        if self.symmetric {
            if self.axis_x == SweepParam::EpsilonZ || self.axis_y == SweepParam::EpsilonZ {
                return Err(invalid("symmetric sweeps have epsilon_z = 0 and cannot sweep it"));
            }
            if f.epsilon_z.is_some_and(|e| e != 0.0) {
                return Err(invalid("symmetric sweeps require epsilon_z = 0"));
            }
            if f.q_x.is_some() || f.q_z.is_some() || f.q_ph.is_some() {
                return Err(invalid("symmetric sweeps take a single q; remove q_x, q_z, q_ph"));
            }
            if f.delta_x.is_some() && f.delta_z.is_some() && f.delta_x != f.delta_z {
                return Err(invalid("symmetric sweeps require delta_x = delta_z"));
            }
        }

        for (label, axis, [lo, hi]) in [("x_range", self.axis_x, self.x_range), ("y_range", self.axis_y, self.y_range)] {
            let (dlo, dhi) = self.domain(axis);
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(invalid(format!("{label} = [{lo}, {hi}] must be increasing")));
            }
            if lo < dlo || hi > dhi {
                return Err(invalid(format!(
                    "{label} = [{lo}, {hi}] leaves the domain [{dlo}, {dhi}] of {}",
                    axis.name()
                )));
            }
        }
        let (nx, ny) = self.resolution.dims();
        if nx < 2 || ny < 2 {
            return Err(invalid("resolution must be at least 2 per axis"));
        }
        Ok(())
    }

    /// Grid coordinates along each axis.
    pub fn grid(&self) -> (Vec<f64>, Vec<f64>) {
        let (nx, ny) = self.resolution.dims();
        (linspace(self.x_range, nx), linspace(self.y_range, ny))
    }

    /// Statistics and device parameters at one sweep point.
    pub fn point(&self, x: f64, y: f64) -> Result<(EstimatedStats, ImperfectionParams)> {
        let f = &self.fixed;
        let q = self.reference_q();
        let mut delta = f.delta.or(f.delta_over_q.map(|r| r * q)).unwrap_or(0.0);
        let mut eta_z = f.eta_z.unwrap_or(1.0);
        let mut epsilon_z = f.epsilon_z.unwrap_or(0.0);
        let mut delta_x = f.delta_x.or(if self.symmetric { f.delta_z } else { None }).unwrap_or(0.0);
        let mut delta_z = f.delta_z.or(if self.symmetric { f.delta_x } else { None }).unwrap_or(0.0);
        for (axis, v) in [(self.axis_x, x), (self.axis_y, y)] {
            match axis {
                SweepParam::Delta => delta = v,
                SweepParam::DeltaOverQ => delta = v * q,
                SweepParam::EtaZ => eta_z = v,
                SweepParam::EpsilonZ => epsilon_z = v,
                SweepParam::DeltaX | SweepParam::DeltaZ if self.symmetric => {
                    delta_x = v;
                    delta_z = v;
                }
                SweepParam::DeltaX => delta_x = v,
                SweepParam::DeltaZ => delta_z = v,
            }
        }
        let stats = if self.symmetric {
            EstimatedStats::symmetric(q, delta_x)?
        } else {
            EstimatedStats::new(
                f.q_x.unwrap_or(q),
                f.q_z.unwrap_or(q),
                f.q_ph.unwrap_or(q),
                delta_x,
                delta_z,
            )?
        };
        // Δ·q round-off can step just past 1/2 at the top of the range.
        let imperfections = ImperfectionParams::new(delta.min(0.5), eta_z, epsilon_z)?;
        Ok((stats, imperfections))
    }

    /// Certificate at one point; `None` when the point is infeasible.
    pub fn evaluate(&self, x: f64, y: f64) -> Result<Option<RateCertificate>> {
        let (stats, imp) = self.point(x, y)?;
        match certify(&stats, &imp) {
            Ok(c) => Ok(Some(c)),
            Err(Error::InconsistentStatistics { .. } | Error::NoSiftedKey) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn positive(&self, x: f64, y: f64) -> Result<bool> {
        Ok(self.evaluate(x, y)?.is_some_and(|c| c.positive))
    }
}

fn linspace([lo, hi]: [f64; 2], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
        .collect()
}

/// Certified rate on every grid point, row by row (`y` outer, `x` inner).
pub fn rate_surface(spec: &SweepSpec) -> Result<Vec<SurfacePoint>> {
    spec.validate()?;
    let (xs, ys) = spec.grid();
    let rows: Vec<Vec<SurfacePoint>> = ys
        .par_iter()
        .map(|&y| {
            xs.iter()
                .map(|&x| {
                    Ok(match spec.evaluate(x, y)? {
                        Some(c) => SurfacePoint { x, y, rate: Some(c.rate), status: PointStatus::Ok },
                        None => SurfacePoint { x, y, rate: None, status: PointStatus::Infeasible },
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

fn refine_crossing(spec: &SweepSpec, y: f64, lo: f64, hi: f64, positive_at_lo: bool) -> Result<f64> {
    let sign = |x: f64| -> f64 {
        match spec.positive(x, y) {
            Ok(p) if p == positive_at_lo => 1.0,
            _ => -1.0,
        }
    };
    let mid = bisect_decreasing(sign, lo, hi, CROSSING_TOL)?;
    // Report whichever end of the final bracket sits closer to R = 0.
    let half = 0.5 * CROSSING_TOL;
    let candidates = [(mid - half).max(lo), mid, (mid + half).min(hi)];
    let mut best = (f64::INFINITY, mid);
    for x in candidates {
        if let Some(c) = spec.evaluate(x, y)? {
            if c.rate.abs() < best.0 {
                best = (c.rate.abs(), x);
            }
        }
    }
    Ok(best.1)
}

/// Every crossing of the positive-rate region's edge along each grid row.
///
/// Rows are ordered by `y`; crossings within a row by `x`.
pub fn trace_boundary(spec: &SweepSpec) -> Result<Vec<BoundaryPoint>> {
    spec.validate()?;
    let (xs, ys) = spec.grid();
    let rows: Vec<Vec<BoundaryPoint>> = ys
        .par_iter()
        .map(|&y| {
            let flags = xs.iter().map(|&x| spec.positive(x, y)).collect::<Result<Vec<_>>>()?;
            let mut out = Vec::new();
            for i in 1..xs.len() {
                if flags[i] != flags[i - 1] {
                    let x = refine_crossing(spec, y, xs[i - 1], xs[i], flags[i - 1])?;
                    out.push(BoundaryPoint { y, x });
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Formats `v` with `digits` significant digits, trimming trailing zeros.
pub fn format_sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let exp = v.abs().log10().floor() as i32;
    let digits = digits.max(1) as i32;
    if (-5..digits).contains(&exp) {
        let decimals = (digits - 1 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let prec = (digits - 1) as usize;
        let s = format!("{v:.prec$e}");
        let (mantissa, e) = s.split_once('e').unwrap_or((&s, "0"));
        let mantissa = if mantissa.contains('.') {
            mantissa.trim_end_matches('0').trim_end_matches('.')
        } else {
            mantissa
        };
        format!("{mantissa}e{e}")
    }
}

pub fn surface_csv(points: &[SurfacePoint]) -> String {
    let mut s = String::from("x,y,rate\n");
    for p in points {
        let rate = p.rate.map_or_else(|| "nan".to_string(), |r| format_sig(r, CSV_DIGITS));
        let _ = writeln!(s, "{},{},{}", format_sig(p.x, CSV_DIGITS), format_sig(p.y, CSV_DIGITS), rate);
    }
    s
}

pub fn boundary_csv(points: &[BoundaryPoint]) -> String {
    let mut s = String::from("y,x_boundary\n");
    for p in points {
        let _ = writeln!(s, "{},{}", format_sig(p.y, CSV_DIGITS), format_sig(p.x, CSV_DIGITS));
    }
    s
}
