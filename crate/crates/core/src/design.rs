//! Closed-form design and rate formulas.
//!
//! `log` below is base 2 and `ln` natural, matching how the bounds are stated.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::codec::{build_design, quantizer_resolution};
use crate::error::{invalid, Error, Result};
use crate::model::PlantParams;

/// Feasibility floor on `J`: `(M / (A rho0)) (e^{A gamma} - 1)`. Designs need `J` strictly above it.
pub fn min_j(p: &PlantParams, rho0: f64, gamma: f64) -> f64 {
    p.m / (p.a * rho0) * (p.a * gamma).exp_m1()
}

/// The three readings of the closed-form packet-size bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedFormPacketSize {
    /// `1 + log(A b gamma / ln(...))` before clamping; `-inf` at `gamma = 0`.
    pub raw: f64,
    /// `max{0, raw}`.
    pub bound: f64,
    /// Integer packet actually usable: `max{1, ceil(raw)}`.
    pub integer: u32,
}

pub fn packet_size_closed_form(p: &PlantParams, j: f64, rho0: f64, b: f64, gamma: f64) -> Result<ClosedFormPacketSize> {
    if !(b.is_finite() && b > 1.0) {
        return Err(invalid("b", format!("must be finite and > 1, got {b}")));
    }
    let delta = quantizer_resolution(p, j, rho0, gamma)?;
    // A b gamma / ln(1 + ...) with ln(1 + ...) = A delta
    let raw = 1.0 + (p.a * b * gamma / (p.a * delta)).log2();
    let integer = if raw.is_finite() { raw.ceil().max(1.0) as u32 } else { 1 };
    Ok(ClosedFormPacketSize {
        raw,
        bound: raw.max(0.0),
        integer,
    })
}

fn check_rate_inputs(j: f64, rho0: f64) -> Result<()> {
    if !(j.is_finite() && j > 0.0) {
        return Err(invalid("J", format!("must be finite and > 0, got {j}")));
    }
    if !(rho0 > 0.0 && rho0 < 1.0) {
        return Err(invalid("rho0", format!("must lie in (0, 1), got {rho0}")));
    }
    Ok(())
}

/// Lower bound on every triggering interval: `(1/A) ln((J + M/A) / (rho0 J + M/A))`.
pub fn min_inter_event(p: &PlantParams, j: f64, rho0: f64) -> Result<f64> {
    check_rate_inputs(j, rho0)?;
    let drift = p.m / p.a;
    Ok(((j + drift) / (rho0 * j + drift)).ln() / p.a)
}

/// Upper bound on the triggering rate; reciprocal of [`min_inter_event`].
pub fn max_trigger_rate(p: &PlantParams, j: f64, rho0: f64) -> Result<f64> {
    Ok(1.0 / min_inter_event(p, j, rho0)?)
}

/// Sufficient information rate in bits/s: triggering-rate bound times the clamped packet bound.
pub fn sufficient_rate(p: &PlantParams, j: f64, rho0: f64, b: f64, gamma: f64) -> Result<f64> {
    let g = packet_size_closed_form(p, j, rho0, b, gamma)?;
    if g.bound == 0.0 {
        return Ok(0.0);
    }
    Ok(max_trigger_rate(p, j, rho0)? * g.bound)
}

/// Classical data-rate threshold `A / ln 2` bits/s.
pub fn datarate_threshold(a: f64) -> f64 {
    a / std::f64::consts::LN_2
}

/// How `J` is chosen for a given delay bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JRule {
    /// `J = min_j(gamma) + offset`.
    MinPlus(f64),
    /// Fixed `J` regardless of `gamma`.
    Fixed(f64),
}

impl JRule {
    /// Rate-curve illustration preset: `min_j + 0.1`.
    pub const RATE_CURVE: JRule = JRule::MinPlus(0.1);
    /// Case-study preset: `min_j + 0.005`.
    pub const CASE_STUDY: JRule = JRule::MinPlus(0.005);

    pub fn j(&self, p: &PlantParams, rho0: f64, gamma: f64) -> f64 {
        match *self {
            JRule::MinPlus(offset) => min_j(p, rho0, gamma) + offset,
            JRule::Fixed(j) => j,
        }
    }
}

impl FromStr for JRule {
    type Err = Error;

    /// `rate-curve`, `case-study`, `min-plus:<offset>` or `fixed:<J>`.
    fn from_str(s: &str) -> Result<Self> {
        let parse = |v: &str| {
            v.parse::<f64>()
                .map_err(|_| Error::Config(format!("bad number `{v}` in J rule `{s}`")))
        };
        match s {
            "rate-curve" => Ok(Self::RATE_CURVE),
            "case-study" => Ok(Self::CASE_STUDY),
            _ => {
                if let Some(v) = s.strip_prefix("min-plus:") {
                    Ok(Self::MinPlus(parse(v)?))
                } else if let Some(v) = s.strip_prefix("fixed:") {
                    Ok(Self::Fixed(parse(v)?))
                } else {
                    Err(Error::Config(format!(
                        "unknown J rule `{s}` (expected rate-curve, case-study, min-plus:<x>, fixed:<x>)"
                    )))
                }
            }
        }
    }
}

impl fmt::Display for JRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            JRule::MinPlus(o) => write!(f, "min-plus:{o}"),
            JRule::Fixed(j) => write!(f, "fixed:{j}"),
        }
    }
}

/// One row of the rate-versus-delay curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateCurvePoint {
    pub gamma: f64,
    pub j: f64,
    pub delta: f64,
    pub g_paper_real: f64,
    pub g_paper_int: u32,
    pub g_constructive: u32,
    pub tau_min: f64,
    pub rtr_bound: f64,
    /// Sufficient rate, bits/s.
    pub rs_bound: f64,
    pub datarate_threshold: f64,
}

impl RateCurvePoint {
    pub const CSV_HEADER: [&'static str; 10] = [
        "gamma",
        "J",
        "delta",
        "g_paper_real",
        "g_paper_int",
        "g_constructive",
        "tau_min",
        "Rtr_bound",
        "Rs_bound",
        "datarate_threshold",
    ];

    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.gamma.to_string(),
            self.j.to_string(),
            self.delta.to_string(),
            self.g_paper_real.to_string(),
            self.g_paper_int.to_string(),
            self.g_constructive.to_string(),
            self.tau_min.to_string(),
            self.rtr_bound.to_string(),
            self.rs_bound.to_string(),
            self.datarate_threshold.to_string(),
        ]
    }
}

/// Evaluates every design quantity at one delay bound.
pub fn rate_curve_point(p: &PlantParams, rho0: f64, b: f64, rule: JRule, gamma: f64) -> Result<RateCurvePoint> {
    let j = rule.j(p, rho0, gamma);
    let design = build_design(p, j, rho0, b, gamma)?;
    let closed = packet_size_closed_form(p, j, rho0, b, gamma)?;
    let tau_min = min_inter_event(p, j, rho0)?;
    Ok(RateCurvePoint {
        gamma,
        j,
        delta: design.delta,
        g_paper_real: closed.raw,
        g_paper_int: closed.integer,
        g_constructive: design.bits,
        tau_min,
        rtr_bound: 1.0 / tau_min,
        rs_bound: if closed.bound == 0.0 { 0.0 } else { closed.bound / tau_min },
        datarate_threshold: datarate_threshold(p.a),
    })
}

/// Evaluates the curve on a strictly increasing grid. Points are computed in
/// parallel; the result is in grid order.
pub fn rate_curve_sweep(p: &PlantParams, rho0: f64, b: f64, rule: JRule, grid: &[f64]) -> Result<Vec<RateCurvePoint>> {
    if grid.is_empty() {
        return Err(invalid("gamma grid", "must not be empty"));
    }
    if let Some(i) = grid.windows(2).position(|w| !(w[1] > w[0])) {
        return Err(invalid(
            "gamma grid",
            format!("must be strictly increasing (index {})", i + 1),
        ));
    }
    grid.par_iter()
        .enumerate()
        .map(|(index, &gamma)| {
            rate_curve_point(p, rho0, b, rule, gamma).map_err(|e| Error::SweepPoint {
                index,
                gamma,
                source: Box::new(e),
            })
        })
        .collect()
}

/// Bisects for the delay bound at which `f(gamma)` first reaches `level`.
///
/// Requires `f(lo) < level <= f(hi)`; returns the right end of the final bracket.
pub fn bisect_crossing<F>(mut f: F, level: f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(f(lo)? < level && f(hi)? >= level) {
        return Err(invalid("bracket", format!("[{lo}, {hi}] does not bracket the level {level}")));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)? >= level {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
