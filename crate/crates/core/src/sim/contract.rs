//! Worst-case check of the post-reception error.
//!
//! A packet sent when `z(t_s) = s J` and delivered after `delay` under a constant
//! disturbance leaves `z(t_c+) = s J e^{A delay} + phi(A, delay) w - zbar`. The
//! largest magnitude comes from `w = -M s` (opposing the sign of the trigger),
//! the full delay bound, and a trigger time just before the next cell edge.

use crate::codec::{self, Sign, TriggerDesign};
use crate::error::{invalid, Result};
use crate::model::phi;

/// Constant disturbance applied while the packet is in flight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisturbanceMode {
    None,
    /// `w = M s`.
    Aligned,
    /// `w = -M s`.
    Opposed,
}

impl DisturbanceMode {
    pub const ALL: [DisturbanceMode; 3] = [DisturbanceMode::None, DisturbanceMode::Aligned, DisturbanceMode::Opposed];

    fn value(self, sign: Sign, m: f64) -> f64 {
        match self {
            DisturbanceMode::None => 0.0,
            DisturbanceMode::Aligned => m * sign.value(),
            DisturbanceMode::Opposed => -m * sign.value(),
        }
    }
}

/// `z(t_c+)` for a trigger at `t_s` with sign `sign`, delivered after `delay`.
pub fn post_jump_error(design: &TriggerDesign, t_s: f64, delay: f64, sign: Sign, mode: DisturbanceMode) -> Result<f64> {
    if !(delay >= 0.0 && delay <= design.gamma) {
        return Err(invalid("delay", format!("must lie in [0, {}], got {delay}", design.gamma)));
    }
    let w = mode.value(sign, design.m);
    let z_tc = sign.value() * design.j * (design.a * delay).exp() + phi(design.a, delay) * w;
    let t_c = t_s + delay;
    let pkt = codec::encode(t_s, sign, design);
    let q = codec::decode(&pkt, t_c, design)?;
    let zbar = codec::reconstruct_zbar(sign, design.j, design.a, t_c, q);
    Ok(z_tc - zbar)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractReport {
    pub checked: usize,
    /// Largest `|z(t_c+)|`.
    pub worst: f64,
    /// `worst / (rho0 J)`.
    pub worst_ratio: f64,
    pub worst_t_s: f64,
    pub worst_delay: f64,
    pub worst_mode: DisturbanceMode,
    /// Cases above `rho0 J + 1e-9 J`.
    pub violations: usize,
}

/// `n` evenly spaced delays covering `[0, gamma]`.
pub fn delay_grid(gamma: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![gamma],
        _ => (0..n).map(|i| gamma * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Trigger times spread over two wrap periods starting at the cell edge at or below
/// `base`, hitting each cell at its left edge, interior points, and just before its
/// right edge.
pub fn send_time_grid(design: &TriggerDesign, base: f64) -> Vec<f64> {
    let offsets = [0.0, 0.25, 0.5, 0.75, 1.0 - 1e-9];
    let cells = if design.sign_only() { 1 } else { 2 * design.cells };
    let first = (base / design.delta).floor();
    let mut out = Vec::with_capacity(cells as usize * offsets.len());
    for c in 0..cells {
        for f in offsets {
            out.push((first + c as f64 + f) * design.delta);
        }
    }
    out
}

/// Evaluates every combination of send time, delay, sign and disturbance mode.
pub fn sweep(design: &TriggerDesign, send_times: &[f64], delays: &[f64]) -> Result<ContractReport> {
    let limit = design.rho0 * design.j + 1e-9 * design.j;
    let mut rep = ContractReport {
        checked: 0,
        worst: 0.0,
        worst_ratio: 0.0,
        worst_t_s: f64::NAN,
        worst_delay: f64::NAN,
        worst_mode: DisturbanceMode::None,
        violations: 0,
    };
    for &t_s in send_times {
        for &delay in delays {
            for sign in [Sign::Plus, Sign::Minus] {
                for mode in DisturbanceMode::ALL {
                    let z = post_jump_error(design, t_s, delay, sign, mode)?.abs();
                    rep.checked += 1;
                    if z > limit {
                        rep.violations += 1;
                    }
                    if z > rep.worst {
                        rep.worst = z;
                        rep.worst_t_s = t_s;
                        rep.worst_delay = delay;
                        rep.worst_mode = mode;
                    }
                }
            }
        }
    }
    rep.worst_ratio = rep.worst / (design.rho0 * design.j);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::build_design;
    use crate::model::PlantParams;

    fn design(gamma: f64) -> TriggerDesign {
        let p = PlantParams::new(5.5651, 2.2513, 0.05, 0.1).unwrap();
        build_design(&p, 0.0124335, 0.9, 1.0001, gamma).unwrap()
    }

    #[test]
    fn worst_case_approaches_the_contract() {
        let d = design(0.1);
        let rep = sweep(&d, &send_time_grid(&d, 1.3), &delay_grid(d.gamma, 100)).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.worst_mode, DisturbanceMode::Opposed);
        assert!(rep.worst_delay == d.gamma);
        // the edge offset 1 - 1e-9 puts t_s - q within 1e-9 delta of delta
        assert!(rep.worst_ratio > 1.0 - 1e-6, "ratio {}", rep.worst_ratio);
    }

    #[test]
    fn zero_delay_without_disturbance_is_exact_for_sign_only() {
        let d = design(0.001);
        assert!(d.sign_only());
        let z = post_jump_error(&d, 0.7, d.gamma, Sign::Minus, DisturbanceMode::None).unwrap();
        assert!(z.abs() < 1e-15);
    }

    #[test]
    fn delay_outside_bound_is_rejected() {
        let d = design(0.1);
        assert!(post_jump_error(&d, 0.0, 0.2, Sign::Plus, DisturbanceMode::None).is_err());
    }
}
