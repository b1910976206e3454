//! Run drivers: scalar plant, pendulum case study, and the sensor-mirror check.

use nalgebra::{DMatrix, DVector};

use crate::codec::{build_design, TriggerDesign};
use crate::design::{self, ClosedFormPacketSize};
use crate::error::{Error, Result};
use crate::model::{ControllerGain, PlantParams};
use crate::sim::certificate::Certificate;
use crate::sim::config::{DisturbanceFrame, PendulumSpec, ReplicaMode, ScalarSpec, SimConfig, SystemSpec};
use crate::sim::engine::{simulate, LoopSpec, SimTrace, Violation};
use crate::sim::pendulum::{transformed_disturbance_bound, PendulumModel};
use crate::sim::rates::{measure_rates, RateStats};

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct SimOutcome {
    pub config: SimConfig,
    /// Scalar parameters of the triggered mode (`M` is the bound used for design).
    pub plant: PlantParams,
    pub design: TriggerDesign,
    pub closed_form: ClosedFormPacketSize,
    pub tau_min: f64,
    /// `1 / tau_min`.
    pub rtr_bound: f64,
    /// `g * rtr_bound` with the constructive `g`.
    pub rs_bound: f64,
    pub trace: SimTrace,
    pub rates: RateStats,
    pub certificate: Certificate,
}

impl SimOutcome {
    pub fn passed(&self) -> bool {
        self.trace.violations.is_empty()
    }

    /// Flat summary for `stats.txt`.
    pub fn summary(&self) -> RunSummary {
        let tr = &self.trace;
        let delivered: Vec<_> = tr.events.iter().filter(|e| e.delivered()).collect();
        let max_post = delivered
            .iter()
            .filter_map(|e| e.z_post)
            .fold(0.0, |m: f64, z| m.max(z.abs()));
        let min_interval = tr
            .events
            .windows(2)
            .map(|w| w[1].t_s - w[0].t_s)
            .fold(f64::INFINITY, f64::min);
        let max_delay = tr.events.iter().map(|e| e.delay()).fold(0.0, f64::max);
        let max_z = tr.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max);
        let max_state = tr
            .rows
            .iter()
            .flat_map(|r| r.phys.iter().map(|x| x.abs()))
            .fold(0.0, f64::max);
        let d = &self.design;
        let mut pairs: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| pairs.push((k.to_string(), v));
        put("passed", self.passed().to_string());
        put("violations", tr.violations.len().to_string());
        put(
            "first_violation",
            tr.first_violation().map(Violation::to_string).unwrap_or_else(|| "none".into()),
        );
        put("mode_A", self.plant.a.to_string());
        put("mode_B", self.plant.b.to_string());
        put("design_M", self.plant.m.to_string());
        put("J", d.j.to_string());
        put("delta", d.delta.to_string());
        put("cells", d.cells.to_string());
        put("period", d.period.map_or("none".into(), |p| p.to_string()));
        put("g_constructive", d.bits.to_string());
        put("g_paper_real", self.closed_form.raw.to_string());
        put("g_paper_int", self.closed_form.integer.to_string());
        put("Z_max", d.z_max().to_string());
        put("tau_min", self.tau_min.to_string());
        put("triggers", self.rates.triggers.to_string());
        put("receptions", delivered.len().to_string());
        put("total_bits", self.rates.total_bits.to_string());
        put("rate_span", self.rates.span.to_string());
        put("R_s", self.rates.r_s.to_string());
        put("R_tr", self.rates.r_tr.to_string());
        put("Rtr_bound", self.rtr_bound.to_string());
        put("Rs_bound", self.rs_bound.to_string());
        put("datarate_threshold", design::datarate_threshold(d.a).to_string());
        put("min_interval", if min_interval.is_finite() { min_interval.to_string() } else { "none".into() });
        put("max_delay", max_delay.to_string());
        put("max_abs_z", max_z.to_string());
        put("max_post_jump", max_post.to_string());
        put("post_jump_limit", (d.rho0 * d.j).to_string());
        put("mirror_divergence", tr.mirror_divergence.to_string());
        put("T0", self.certificate.t0.to_string());
        put("kappa", join(&self.certificate.kappa));
        put("kappa_inf", join(&self.certificate.kappa_inf));
        put("max_abs_state", max_state.to_string());
        RunSummary { pairs }
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

/// Ordered `key = value` statistics of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub pairs: Vec<(String, String)>,
}

impl RunSummary {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.pairs.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Result of comparing the sensor's estimate copy with the controller's.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorReport {
    pub replica: ReplicaMode,
    pub grid_points: usize,
    pub triggers: usize,
    pub max_divergence: f64,
}

impl MirrorReport {
    pub fn consistent(&self) -> bool {
        self.max_divergence == 0.0
    }
}

/// Validates `cfg` and runs the configured system.
pub fn run(cfg: &SimConfig) -> Result<SimOutcome> {
    match cfg.system {
        SystemSpec::Scalar(s) => run_scalar(cfg, &s),
        SystemSpec::Pendulum(p) => run_pendulum(cfg, &p),
    }
}

pub fn run_scalar(cfg: &SimConfig, spec: &ScalarSpec) -> Result<SimOutcome> {
    cfg.validate()?;
    let p = PlantParams::new(spec.a, spec.b, cfg.disturbance.bound, spec.l)?;
    let gain = match spec.k {
        Some(k) => ControllerGain::new(k, &p)?,
        None => ControllerGain::pole_mirror(&p)?,
    };
    let (design, closed_form) = design_for(cfg, &p)?;
    let xhat0 = spec.xhat0.unwrap_or(spec.x0 - design.j / 2.0);
    if spec.x0.abs() > spec.l {
        return Err(Error::Config(format!("|x0| = {} exceeds L = {}", spec.x0.abs(), spec.l)));
    }
    check_initial_error(spec.x0 - xhat0, design.j)?;
    let id = DMatrix::identity(1, 1);
    let loop_spec = LoopSpec {
        lambdas: vec![p.a],
        b_modal: vec![p.b],
        k_modal: vec![gain.k],
        pmat: id.clone(),
        pinv: id,
        mode: 0,
        design,
        tau_min: design::min_inter_event(&p, design.j, cfg.rho0)?,
        s0: vec![spec.x0],
        shat0: vec![xhat0],
    };
    let a_cl = DMatrix::from_element(1, 1, -gain.alpha);
    let forcing = vec![(p.b * gain.k).abs() * design.z_max() + p.m];
    finish(cfg, p, closed_form, loop_spec, &a_cl, forcing)
}

pub fn run_pendulum(cfg: &SimConfig, spec: &PendulumSpec) -> Result<SimOutcome> {
    cfg.validate()?;
    let model = PendulumModel::case_study(spec.matrices)?;
    let n = model.dim();
    let m = model.unstable_index()?;
    let bound = cfg.disturbance.bound;
    let mode_bound = |i: usize| -> Result<f64> {
        match cfg.disturbance.frame {
            DisturbanceFrame::Modal => Ok(bound),
            DisturbanceFrame::Physical => transformed_disturbance_bound(&model.pmat, i, bound),
        }
    };
    let s0 = &model.pinv * DVector::from_column_slice(&spec.s0);
    let shat0 = &model.pinv * DVector::from_column_slice(&spec.shat0);
    let l = s0[m].abs().max(f64::MIN_POSITIVE);
    let p = PlantParams::new(model.eigvals[m], model.b_modal[m], mode_bound(m)?, l)?;
    let (design, closed_form) = design_for(cfg, &p)?;
    check_initial_error(s0[m] - shat0[m], design.j)?;

    let mut z_sup = Vec::with_capacity(n);
    for i in 0..n {
        let lambda = model.eigvals[i];
        let z0 = (s0[i] - shat0[i]).abs();
        let mi = mode_bound(i)?;
        z_sup.push(if i == m {
            design.z_max()
        } else if lambda < 0.0 {
            z0.max(mi / -lambda)
        } else if lambda == 0.0 || lambda.abs() < 1e-12 {
            z0 + mi * cfg.horizon
        } else {
            return Err(Error::UnsupportedModel("more than one unstable mode".into()));
        });
    }
    let kz: f64 = model.k_modal.iter().zip(&z_sup).map(|(k, z)| k.abs() * z).sum();
    let forcing: Vec<f64> = (0..n)
        .map(|l| {
            let w = match cfg.disturbance.frame {
                DisturbanceFrame::Modal => model.pmat.row(l).iter().map(|v| v.abs()).sum::<f64>() * bound,
                DisturbanceFrame::Physical => bound,
            };
            model.b[l].abs() * kz + w
        })
        .collect();
    let a_cl = &model.a - &model.b * &model.k;

    let loop_spec = LoopSpec {
        lambdas: model.eigvals.iter().copied().collect(),
        b_modal: model.b_modal.iter().copied().collect(),
        k_modal: model.k_modal.iter().copied().collect(),
        pmat: model.pmat.clone(),
        pinv: model.pinv.clone(),
        mode: m,
        design,
        tau_min: design::min_inter_event(&p, design.j, cfg.rho0)?,
        s0: s0.iter().copied().collect(),
        shat0: shat0.iter().copied().collect(),
    };
    finish(cfg, p, closed_form, loop_spec, &a_cl, forcing)
}

/// Scalar parameters the trigger design is built from: the plant itself for
/// scalar runs, the unstable mode (with its design disturbance bound) for the pendulum.
pub fn triggered_plant(cfg: &SimConfig) -> Result<PlantParams> {
    match &cfg.system {
        SystemSpec::Scalar(s) => PlantParams::new(s.a, s.b, cfg.disturbance.bound, s.l),
        SystemSpec::Pendulum(spec) => {
            let model = PendulumModel::case_study(spec.matrices)?;
            let m = model.unstable_index()?;
            let s0 = &model.pinv * DVector::from_column_slice(&spec.s0);
            let bound = match cfg.disturbance.frame {
                DisturbanceFrame::Modal => cfg.disturbance.bound,
                DisturbanceFrame::Physical => transformed_disturbance_bound(&model.pmat, m, cfg.disturbance.bound)?,
            };
            PlantParams::new(model.eigvals[m], model.b_modal[m], bound, s0[m].abs().max(f64::MIN_POSITIVE))
        }
    }
}

fn design_for(cfg: &SimConfig, p: &PlantParams) -> Result<(TriggerDesign, ClosedFormPacketSize)> {
    let gamma = cfg.delay.gamma;
    let j = cfg.j_rule.j(p, cfg.rho0, gamma);
    let design = build_design(p, j, cfg.rho0, cfg.slack_b, gamma)?;
    let closed = design::packet_size_closed_form(p, j, cfg.rho0, cfg.slack_b, gamma)?;
    Ok((design, closed))
}

fn check_initial_error(z0: f64, j: f64) -> Result<()> {
    if z0.abs() < j {
        Ok(())
    } else {
        Err(Error::Config(format!("initial estimation error |z(0)| = {} must be below J = {j}", z0.abs())))
    }
}

fn finish(
    cfg: &SimConfig,
    plant: PlantParams,
    closed_form: ClosedFormPacketSize,
    spec: LoopSpec,
    a_cl: &DMatrix<f64>,
    forcing: Vec<f64>,
) -> Result<SimOutcome> {
    let s0_phys: Vec<f64> = (&spec.pmat * DVector::from_column_slice(&spec.s0)).iter().copied().collect();
    let certificate = Certificate::build(a_cl, &forcing, &s0_phys, cfg.step, cfg.steps())?;
    let mut trace = simulate(&spec, cfg)?;
    trace.violations.extend(certificate.check(&trace));

    let rates = measure_rates(&trace);
    let rtr_bound = 1.0 / spec.tau_min;
    let rs_bound = spec.design.bits as f64 * rtr_bound;
    let slack = 1.0 / cfg.horizon;
    if rates.r_tr > rtr_bound + slack || rates.r_s > spec.design.bits as f64 * (rtr_bound + slack) {
        trace.violations.push(Violation {
            invariant: "rate-bound",
            event: None,
            t: trace.horizon,
            detail: format!(
                "R_tr = {} (bound {rtr_bound} + {slack}), R_s = {} (bound {rs_bound})",
                rates.r_tr, rates.r_s
            ),
        });
    }
    Ok(SimOutcome {
        config: *cfg,
        plant,
        design: spec.design,
        closed_form,
        tau_min: spec.tau_min,
        rtr_bound,
        rs_bound,
        trace,
        rates,
        certificate,
    })
}

/// Runs `cfg` and reports how far the sensor's estimate copy drifted from the controller's.
pub fn run_sensor_mirror(cfg: &SimConfig) -> Result<MirrorReport> {
    let out = run(cfg)?;
    Ok(MirrorReport {
        replica: cfg.replica,
        grid_points: out.trace.rows.len(),
        triggers: out.trace.events.len(),
        max_divergence: out.trace.mirror_divergence,
    })
}
