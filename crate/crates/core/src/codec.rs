//! Triggering rule, packet codec and jump update.
//!
//! A trigger fires when the estimation error reaches `|z| = J`. The packet
//! carries the sign of `z` and, when the delay bound is not already below the
//! quantizer resolution, the index of the time cell containing the trigger time
//! modulo a wrap period `P`. The receiver knows `t_c - gamma <= t_s <= t_c` and
//! picks the unique cell edge consistent with that window.

use std::fmt;

use crate::design;
use crate::error::{invalid, Error, Result};
use crate::model::PlantParams;

/// Relative slack on the decoder window edges; absorbs rounding in `mod`/`floor`.
const WINDOW_EPS: f64 = 1e-9;

/// Sign of the estimation error at the trigger instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// Zero maps to `Plus`.
    pub fn of(z: f64) -> Self {
        if z < 0.0 {
            Sign::Minus
        } else {
            Sign::Plus
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// Triggering threshold, contraction target and the quantizer geometry derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerDesign {
    /// Plant growth rate the design was built for.
    pub a: f64,
    /// Disturbance bound the design was built for.
    pub m: f64,
    /// Triggering threshold.
    pub j: f64,
    /// Post-jump contraction, `|z(t_c+)| <= rho0 J`.
    pub rho0: f64,
    /// Slack factor; only enters the closed-form packet-size bound.
    pub b: f64,
    /// Worst-case channel delay.
    pub gamma: f64,
    /// Quantizer resolution: largest admissible `|t_s - q|`.
    pub delta: f64,
    /// Number of time cells; 1 when only the sign is sent.
    pub cells: u64,
    /// Wrap period `cells * delta`; `None` for sign-only designs.
    pub period: Option<f64>,
    /// Packet size in bits.
    pub bits: u32,
}

impl TriggerDesign {
    pub fn sign_only(&self) -> bool {
        self.period.is_none()
    }

    /// Worst error magnitude reachable while a packet is in flight.
    pub fn z_max(&self) -> f64 {
        let grow = (self.a * self.gamma).exp();
        self.j * grow + self.m * crate::model::phi(self.a, self.gamma)
    }
}

/// A transmitted packet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Packet {
    pub sign: Sign,
    /// Cell index in `[0, cells)`; absent for sign-only designs.
    pub cell_index: Option<u64>,
    pub bits: u32,
    /// True send time. Simulation bookkeeping only: [`decode`] never reads it.
    pub meta_t_send: f64,
}

impl Packet {
    /// Wire fields as written to logs: `g`, sign, cell index (empty when absent).
    pub fn wire_fields(&self) -> (u32, String, String) {
        (
            self.bits,
            self.sign.to_string(),
            self.cell_index.map(|c| c.to_string()).unwrap_or_default(),
        )
    }
}

/// Discrete crossing rule: fire at `|z| >= J` unless a packet is already in flight.
pub fn should_trigger(z: f64, design: &TriggerDesign, in_flight: bool) -> bool {
    !in_flight && z.abs() >= design.j
}

/// Largest trigger-time error `|t_s - q|` for which the jump lands within `rho0 J`.
pub fn quantizer_resolution(p: &PlantParams, j: f64, rho0: f64, gamma: f64) -> Result<f64> {
    check_design_inputs(j, rho0, gamma)?;
    let floor = design::min_j(p, rho0, gamma);
    if j <= floor {
        return Err(Error::Infeasible { j, min_j: floor });
    }
    let grow_m1 = (p.a * gamma).exp_m1();
    let slack = rho0 - (p.m / (j * p.a)) * grow_m1;
    if !(slack > 0.0) {
        return Err(Error::Infeasible {
            j,
            min_j: design::min_j(p, rho0, gamma),
        });
    }
    let delta = (slack / (grow_m1 + 1.0)).ln_1p() / p.a;
    if !(delta > 0.0) {
        return Err(Error::Infeasible {
            j,
            min_j: design::min_j(p, rho0, gamma),
        });
    }
    Ok(delta)
}

fn check_design_inputs(j: f64, rho0: f64, gamma: f64) -> Result<()> {
    if !(j.is_finite() && j > 0.0) {
        return Err(invalid("J", format!("must be finite and > 0, got {j}")));
    }
    if !(rho0 > 0.0 && rho0 < 1.0) {
        return Err(invalid("rho0", format!("must lie in (0, 1), got {rho0}")));
    }
    if !(gamma.is_finite() && gamma >= 0.0) {
        return Err(invalid("gamma", format!("must be finite and >= 0, got {gamma}")));
    }
    Ok(())
}

/// Builds the constructive quantizer.
///
/// Sign-only when `gamma <= delta`; otherwise `cells = ceil(gamma/delta) + 2`,
/// which keeps the wrap period at least `gamma + 2 delta` so the receiver
/// window never contains two cell edges.
pub fn build_design(p: &PlantParams, j: f64, rho0: f64, b: f64, gamma: f64) -> Result<TriggerDesign> {
    if !(b.is_finite() && b > 1.0) {
        return Err(invalid("b", format!("must be finite and > 1, got {b}")));
    }
    let delta = quantizer_resolution(p, j, rho0, gamma)?;
    let (cells, period, bits) = if gamma <= delta {
        (1, None, 1)
    } else {
        let cells = (gamma / delta).ceil() as u64 + 2;
        let idx_bits = 64 - (cells - 1).leading_zeros();
        (cells, Some(cells as f64 * delta), 1 + idx_bits)
    };
    Ok(TriggerDesign {
        a: p.a,
        m: p.m,
        j,
        rho0,
        b,
        gamma,
        delta,
        cells,
        period,
        bits,
    })
}

/// Encodes the sign of `z(t_s)` and the cell of `t_s mod P`.
pub fn encode(t_s: f64, z_sign: Sign, design: &TriggerDesign) -> Packet {
    let cell_index = design.period.map(|period| {
        let rem = t_s.rem_euclid(period);
        let idx = (rem / design.delta).floor() as u64;
        idx.min(design.cells - 1)
    });
    Packet {
        sign: z_sign,
        cell_index,
        bits: design.bits,
        meta_t_send: t_s,
    }
}

/// Reconstructs the quantized trigger time from the packet and its reception time.
///
/// Sign-only packets decode to `t_c - gamma`. Otherwise the result is the unique
/// `cell_index * delta + m P` in the window `(t_c - gamma - delta, t_c]`.
pub fn decode(pkt: &Packet, t_c: f64, design: &TriggerDesign) -> Result<f64> {
    let (cell, period) = match (pkt.cell_index, design.period) {
        (None, None) => return Ok(t_c - design.gamma),
        (Some(c), Some(p)) => (c, p),
        _ => {
            return Err(invalid(
                "packet",
                "packet layout does not match the design (sign-only vs indexed)",
            ))
        }
    };
    let edge = cell as f64 * design.delta;
    let eps = WINDOW_EPS * design.delta;
    let lo = t_c - design.gamma - design.delta - eps;
    let hi = t_c + eps;
    // smallest m with edge + m P > lo, largest m with edge + m P <= hi
    let mut m_lo = ((lo - edge) / period).floor() as i64;
    while edge + m_lo as f64 * period <= lo {
        m_lo += 1;
    }
    let mut m_hi = ((hi - edge) / period).floor() as i64;
    while edge + (m_hi + 1) as f64 * period <= hi {
        m_hi += 1;
    }
    while m_hi >= m_lo && edge + m_hi as f64 * period > hi {
        m_hi -= 1;
    }
    let count = m_hi - m_lo + 1;
    if count != 1 {
        return Err(Error::DecoderAmbiguity {
            t_c,
            candidates: count.max(0),
        });
    }
    Ok(edge + m_lo as f64 * period)
}

/// Controller-side estimate of `z(t_c)`: `sign * J * e^{A (t_c - q)}`.
pub fn reconstruct_zbar(z_sign: Sign, j: f64, a: f64, t_c: f64, q: f64) -> f64 {
    z_sign.value() * j * (a * (t_c - q)).exp()
}

/// Jump strategy: `xhat(t_c+) = xhat(t_c) + zbar`.
pub fn apply_jump(xhat: f64, zbar: f64) -> f64 {
    xhat + zbar
}
