//! Practical-stability certificate for the physical closed loop.
//!
//! With `u = -k shat = -k (s - z)` the physical state obeys
//! `ds/dt = (A - B k) s + B k z + w`. Given elementwise bounds `D` on the forcing
//! `B k z + w`, every component satisfies
//! `|s_j(t)| <= |(e^{A_cl t} s0)_j| + kappa_inf_j` with `kappa_inf = Gamma D` and
//! `Gamma = int_0^inf |e^{A_cl tau}| d tau` taken elementwise.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::sim::engine::{SimTrace, Violation};

/// Cut-off for the tail of the impulse-response integral.
const TAIL: f64 = 1e-14;
const MAX_QUAD_STEPS: usize = 50_000_000;

/// Elementwise `int_0^inf |e^{a_cl tau}| d tau` (trapezoid rule with step `dt`;
/// exact for 1x1 input).
pub fn impulse_l1(a_cl: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    let n = a_cl.nrows();
    if n == 0 || a_cl.ncols() != n {
        return Err(Error::Config("closed-loop matrix must be square and non-empty".into()));
    }
    let unstable = a_cl
        .complex_eigenvalues()
        .iter()
        .any(|ev| !(ev.re < 0.0));
    if unstable {
        return Err(Error::UnsupportedModel("closed-loop matrix A - B k is not Hurwitz".into()));
    }
    if n == 1 {
        return Ok(DMatrix::from_element(1, 1, -1.0 / a_cl[(0, 0)]));
    }
    let step = (a_cl * dt).exp();
    let mut cur = DMatrix::<f64>::identity(n, n);
    let mut acc = cur.abs() * 0.5;
    for _ in 0..MAX_QUAD_STEPS {
        cur = &step * &cur;
        let abs = cur.abs();
        if abs.max() < TAIL {
            acc += abs * 0.5;
            return Ok(acc * dt);
        }
        acc += abs;
    }
    Err(Error::Config("impulse response did not decay within the quadrature budget".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Physical closed-loop matrix `A - B k`.
    pub a_cl: DMatrix<f64>,
    /// Elementwise forcing bound `D`.
    pub forcing: Vec<f64>,
    /// Steady-state envelope `Gamma D`.
    pub kappa_inf: Vec<f64>,
    /// Bound holding for `t >= t0`: `2 kappa_inf`.
    pub kappa: Vec<f64>,
    /// First grid time after which the free response stays within `kappa_inf`
    /// for the rest of the horizon; infinite if it never does.
    pub t0: f64,
    /// Free response `e^{A_cl t} s0` at every grid point.
    pub free: Vec<Vec<f64>>,
}

impl Certificate {
    pub fn build(a_cl: &DMatrix<f64>, forcing: &[f64], s0: &[f64], step: f64, steps: usize) -> Result<Self> {
        let gamma = impulse_l1(a_cl, 1e-3)?;
        let kappa_inf: Vec<f64> = (&gamma * DVector::from_column_slice(forcing)).iter().copied().collect();
        let kappa = kappa_inf.iter().map(|k| 2.0 * k).collect();
        let e = (a_cl * step).exp();
        let mut cur = DVector::from_column_slice(s0);
        let mut free = Vec::with_capacity(steps + 1);
        free.push(s0.to_vec());
        for _ in 0..steps {
            cur = &e * cur;
            free.push(cur.iter().copied().collect());
        }
        let within = |v: &Vec<f64>| v.iter().zip(&kappa_inf).all(|(x, k)| x.abs() <= *k);
        let mut first = free.len();
        while first > 0 && within(&free[first - 1]) {
            first -= 1;
        }
        let t0 = if first < free.len() { first as f64 * step } else { f64::INFINITY };
        Ok(Self {
            a_cl: a_cl.clone(),
            forcing: forcing.to_vec(),
            kappa_inf,
            kappa,
            t0,
            free,
        })
    }

    /// Checks every physical sample against the envelope and, past `t0`, against `kappa`.
    pub fn check(&self, trace: &SimTrace) -> Vec<Violation> {
        let mut out = Vec::new();
        for (row, free) in trace.rows.iter().zip(&self.free) {
            for (j, &x) in row.phys.iter().enumerate() {
                let envelope = free[j].abs() + self.kappa_inf[j];
                let late = row.t >= self.t0;
                let bad = if !x.is_finite() {
                    Some(format!("state {} is not finite", j + 1))
                } else if x.abs() > envelope {
                    Some(format!("|s{}| = {} exceeds the envelope {envelope}", j + 1, x.abs()))
                } else if late && x.abs() > self.kappa[j] {
                    Some(format!("|s{}| = {} exceeds kappa = {} after T0", j + 1, x.abs(), self.kappa[j]))
                } else {
                    None
                };
                if let Some(detail) = bad {
                    out.push(Violation {
                        invariant: "boundedness",
                        event: None,
                        t: row.t,
                        detail,
                    });
                    return out;
                }
            }
        }
        out
    }

    /// Largest `|s_j(t)| / kappa_j` over samples with `t >= t0` (0 when none).
    pub fn late_ratio(&self, trace: &SimTrace) -> f64 {
        trace
            .rows
            .iter()
            .filter(|r| r.t >= self.t0)
            .flat_map(|r| r.phys.iter().zip(&self.kappa).map(|(x, k)| x.abs() / k))
            .fold(0.0, f64::max)
    }
}
