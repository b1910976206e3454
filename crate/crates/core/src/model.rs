//! Exact discretization of the scalar plant `dx/dt = A x + B u + w` and of the
//! controller's estimator `dxhat/dt = A xhat + B u`.
//!
//! Inputs and disturbances are held constant over a step, which makes the
//! exponential map exact rather than an approximation.

use crate::error::{invalid, Result};

/// Scalar plant constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlantParams {
    /// Open-loop growth rate (1/s), strictly positive.
    pub a: f64,
    /// Input gain.
    pub b: f64,
    /// Disturbance magnitude bound, `|w(t)| <= m`.
    pub m: f64,
    /// Initial-state magnitude bound, `|x(0)| <= l`.
    pub l: f64,
}

impl PlantParams {
    pub fn new(a: f64, b: f64, m: f64, l: f64) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(invalid("A", format!("must be finite and > 0, got {a}")));
        }
        if !b.is_finite() {
            return Err(invalid("B", format!("must be finite, got {b}")));
        }
        if !(m.is_finite() && m >= 0.0) {
            return Err(invalid("M", format!("must be finite and >= 0, got {m}")));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(invalid("L", format!("must be finite and > 0, got {l}")));
        }
        Ok(Self { a, b, m, l })
    }
}

/// Scalar state-feedback gain `u = -k xhat` with closed-loop decay `alpha = B k - A`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ControllerGain {
    pub k: f64,
    pub alpha: f64,
}

impl ControllerGain {
    pub fn new(k: f64, plant: &PlantParams) -> Result<Self> {
        let alpha = plant.b * k - plant.a;
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(invalid(
                "K",
                format!("A - B K must be stable, got decay rate {alpha}"),
            ));
        }
        Ok(Self { k, alpha })
    }

    /// `K = 2A/B`, which places the closed-loop pole at `-A`.
    pub fn pole_mirror(plant: &PlantParams) -> Result<Self> {
        if plant.b == 0.0 {
            return Err(invalid("B", "pole mirroring needs a nonzero input gain"));
        }
        Self::new(2.0 * plant.a / plant.b, plant)
    }
}

/// `(e^{rate h} - 1) / rate`, continuous through `rate = 0` where it equals `h`.
pub fn phi(rate: f64, h: f64) -> f64 {
    let r = rate * h;
    if r.abs() < 1e-8 {
        // second-order Taylor term keeps full precision near zero
        h * (1.0 + 0.5 * r)
    } else {
        r.exp_m1() / rate
    }
}

/// Exact solution of `dx/dt = rate x + forcing` after `h` seconds with constant forcing.
///
/// Any real `rate` is accepted, including zero and negative values, so the
/// same map serves every diagonal mode of a decoupled system.
pub fn propagate(rate: f64, x: f64, forcing: f64, h: f64) -> f64 {
    (rate * h).exp() * x + phi(rate, h) * forcing
}

fn check_step(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(invalid("h", format!("step must be finite and > 0, got {h}")));
    }
    Ok(())
}

/// One exact plant step with `u` and `w` held over the step.
pub fn step_plant_exact(x: f64, u: f64, w: f64, h: f64, p: &PlantParams) -> Result<f64> {
    check_step(h)?;
    if w.abs() > p.m {
        return Err(invalid(
            "w",
            format!("|w| = {} exceeds the disturbance bound M = {}", w.abs(), p.m),
        ));
    }
    Ok(propagate(p.a, x, p.b * u + w, h))
}

/// One exact estimator step; the same map as [`step_plant_exact`] with `w = 0`.
pub fn step_estimator(xhat: f64, u: f64, h: f64, p: &PlantParams) -> Result<f64> {
    check_step(h)?;
    Ok(propagate(p.a, xhat, p.b * u + 0.0, h))
}

/// Upper bound on `|z|` `tau` seconds after `|z| = z0` when no reception intervenes.
///
/// Between receptions the estimation error obeys `dz/dt = A z + w`, so the worst
/// case is `z0 e^{A tau} + (M/A)(e^{A tau} - 1)`.
pub fn z_growth_bound(z0: f64, tau: f64, p: &PlantParams) -> Result<f64> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(invalid("tau", format!("must be finite and >= 0, got {tau}")));
    }
    if !(z0.is_finite() && z0 >= 0.0) {
        return Err(invalid("z0", format!("must be finite and >= 0, got {z0}")));
    }
    Ok(z0 * (p.a * tau).exp() + p.m * phi(p.a, tau))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const A: f64 = 5.5651;

    fn pendulum_mode(m: f64) -> PlantParams {
        PlantParams::new(A, 2.2513, m, 0.1).unwrap()
    }

    /// Forward Euler with a very fine step, used as an independent check on the
    /// closed-form exponential map.
    fn euler(a: f64, x0: f64, forcing: f64, h: f64, n: usize) -> f64 {
        let dt = h / n as f64;
        let mut x = x0;
        for _ in 0..n {
            x += dt * (a * x + forcing);
        }
        x
    }

    #[test]
    fn pure_growth_doubles_after_ln2() {
        let p = PlantParams::new(1.0, 1.0, 0.0, 1.0).unwrap();
        let x = step_plant_exact(1.0, 0.0, 0.0, std::f64::consts::LN_2, &p).unwrap();
        assert_relative_eq!(x, 2.0, max_relative = 1e-15);
    }

    #[test]
    fn disturbance_only_step() {
        let p = PlantParams::new(A, 2.2513, 0.2, 0.1).unwrap();
        let x = step_plant_exact(0.0, 0.0, 0.2, 0.005, &p).unwrap();
        assert_relative_eq!(x, 1.014_042_695_765_957e-3, max_relative = 1e-12);
        let oracle = euler(A, 0.0, 0.2, 0.005, 200_000);
        assert!(((x - oracle) / oracle).abs() < 1e-4);
    }

    #[test]
    fn forced_equilibrium_holds() {
        let p = pendulum_mode(0.0);
        let x0 = 3.0;
        let u = -A * x0 / p.b;
        for h in [1e-3, 0.005, 0.1, 1.0] {
            let x = step_plant_exact(x0, u, 0.0, h, &p).unwrap();
            assert_relative_eq!(x, x0, max_relative = 1e-12);
        }
    }

    #[test]
    fn estimator_examples() {
        let p = pendulum_mode(0.0);
        let e = step_estimator(1.0, 0.0, 0.005, &p).unwrap();
        assert_relative_eq!(e, 1.028_216_245_031_035_6, max_relative = 1e-14);

        let e = step_estimator(0.0, 1.0, 0.1, &p).unwrap();
        assert_relative_eq!(e, 0.301_208_940_729_770_1, max_relative = 1e-13);
        let oracle = euler(A, 0.0, p.b, 0.1, 1_000_000);
        assert!(((e - oracle) / oracle).abs() < 1e-4);
    }

    #[test]
    fn estimator_tracks_undisturbed_plant() {
        let p = pendulum_mode(0.0);
        let (mut x, mut xh) = (0.3, 0.3);
        for i in 0..500 {
            let u = -0.7 * xh + (i as f64 * 0.1).sin();
            x = step_plant_exact(x, u, 0.0, 0.005, &p).unwrap();
            xh = step_estimator(xh, u, 0.005, &p).unwrap();
            assert_eq!(x - xh, 0.0);
        }
    }

    #[test]
    fn growth_bound_examples() {
        let p = pendulum_mode(0.05);
        assert_eq!(z_growth_bound(0.02, 0.0, &p).unwrap(), 0.02);
        let quiet = pendulum_mode(0.0);
        for tau in [0.0, 0.1, 2.0] {
            assert_eq!(z_growth_bound(0.0, tau, &quiet).unwrap(), 0.0);
        }
        let b = z_growth_bound(0.01, 0.1, &p).unwrap();
        assert_relative_eq!(b, 0.024_135_399_900_964_31, max_relative = 1e-13);
    }

    #[test]
    fn growth_bound_is_attained_by_sign_aligned_disturbance() {
        let p = pendulum_mode(0.05);
        let h = 0.005;
        let mut z: f64 = 0.01;
        for k in 1..=20 {
            let w = p.m * z.signum();
            z = step_plant_exact(z, 0.0, w, h, &p).unwrap();
            let bound = z_growth_bound(0.01, k as f64 * h, &p).unwrap();
            assert_relative_eq!(z, bound, max_relative = 1e-12);
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let p = pendulum_mode(0.05);
        assert!(step_plant_exact(0.0, 0.0, 0.0, 0.0, &p).is_err());
        assert!(step_plant_exact(0.0, 0.0, 0.0, -1.0, &p).is_err());
        assert!(step_plant_exact(0.0, 0.0, 0.06, 0.005, &p).is_err());
        assert!(step_estimator(0.0, 0.0, 0.0, &p).is_err());
        assert!(z_growth_bound(0.1, -0.1, &p).is_err());
        assert!(PlantParams::new(0.0, 1.0, 0.0, 1.0).is_err());
        assert!(PlantParams::new(1.0, 1.0, -0.1, 1.0).is_err());
        assert!(PlantParams::new(1.0, 1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn pole_mirror_gain() {
        let p = pendulum_mode(0.0);
        let g = ControllerGain::pole_mirror(&p).unwrap();
        assert_relative_eq!(g.alpha, A, max_relative = 1e-14);
        assert!(ControllerGain::new(0.1, &p).is_err());
    }

    #[test]
    fn phi_is_continuous_at_zero() {
        assert_eq!(phi(0.0, 0.5), 0.5);
        assert_relative_eq!(phi(1e-12, 0.5), 0.5, max_relative = 1e-11);
        assert_relative_eq!(phi(-0.1428, 2.0), (-0.2856f64).exp_m1() / -0.1428, max_relative = 1e-15);
    }
}
