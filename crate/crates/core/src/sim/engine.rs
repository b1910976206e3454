//! The hybrid event loop shared by scalar and pendulum runs.
//!
//! The system is simulated in modal coordinates: `ds_i/dt = lambda_i s_i + bt_i u + wt_i`
//! with `u = -kt . shat`. Only mode `m` is event-triggered; every mode's estimate
//! evolves open loop with the shared input, and only `shat_m` jumps.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::channel::Channel;
use crate::codec::{self, Sign, TriggerDesign};
use crate::error::{Error, Result};
use crate::model::phi;
use crate::sim::config::{Actuation, DisturbanceFrame, DisturbanceKind, ReplicaMode, SimConfig};

/// Maximum number of trigger/reception actions resolved at a single instant.
const SETTLE_LIMIT: usize = 64;
/// Maximum number of sub-steps inside one grid step.
const SPLIT_LIMIT: usize = 10_000;

/// Smallest `tau` in `(0, tau_max]` at which `z(tau) = e^{lambda tau} z0 + phi(lambda, tau) w`
/// reaches `|z| = j`, for constant `w`.
///
/// `z` is monotone in `tau`, so at most one of `+j`, `-j` is reachable.
pub fn time_to_threshold(z0: f64, w: f64, lambda: f64, j: f64, tau_max: f64) -> Option<f64> {
    let mut best: Option<f64> = None;
    for y in [j, -j] {
        let tau = if lambda == 0.0 {
            if w == 0.0 {
                continue;
            }
            (y - z0) / w
        } else {
            let c = w / lambda;
            let ratio = (y + c) / (z0 + c);
            if !(ratio.is_finite() && ratio > 0.0) {
                continue;
            }
            ratio.ln() / lambda
        };
        if tau > 0.0 && tau <= tau_max && best.is_none_or(|b| tau < b) {
            best = Some(tau);
        }
    }
    best
}

/// One recorded grid sample.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    /// Modal state.
    pub s: Vec<f64>,
    /// Physical state `P s`.
    pub phys: Vec<f64>,
    /// Controller estimate (modal).
    pub shat: Vec<f64>,
    /// Estimation error of the triggered mode, controller side.
    pub z: f64,
    pub u: f64,
    /// Disturbance on the triggered mode during the last sub-step.
    pub w: f64,
    /// Triggers since the previous row.
    pub triggers: u32,
    /// Receptions since the previous row.
    pub receptions: u32,
}

/// One transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    /// 1-based event number.
    pub k: usize,
    pub t_s: f64,
    /// Scheduled delivery time (may lie past the horizon).
    pub t_c: f64,
    pub sign: Sign,
    pub cell_index: Option<u64>,
    pub bits: u32,
    /// Time to the next trigger; the last interval is closed at the horizon.
    pub interval: f64,
    /// Decoded trigger time, once delivered.
    pub q: Option<f64>,
    /// `z(t_c+)` of the triggered mode, once delivered.
    pub z_post: Option<f64>,
}

impl EventRecord {
    pub fn delay(&self) -> f64 {
        self.t_c - self.t_s
    }

    pub fn delivered(&self) -> bool {
        self.q.is_some()
    }
}

/// A runtime invariant that failed.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub invariant: &'static str,
    /// 1-based event number, when the check belongs to an event.
    pub event: Option<usize>,
    pub t: f64,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} violated", self.invariant)?;
        if let Some(k) = self.event {
            write!(f, " at event {k}")?;
        }
        write!(f, " (t = {}): {}", self.t, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    /// Number of modes.
    pub dim: usize,
    /// Index of the triggered mode.
    pub mode: usize,
    pub horizon: f64,
    pub rows: Vec<TraceRow>,
    pub events: Vec<EventRecord>,
    pub violations: Vec<Violation>,
    /// Largest `|shat_sensor - shat_controller|` seen at a grid point.
    pub mirror_divergence: f64,
}

impl SimTrace {
    pub fn total_bits(&self) -> u64 {
        self.events.iter().map(|e| e.bits as u64).sum()
    }

    pub fn first_violation(&self) -> Option<&Violation> {
        self.violations.first()
    }
}

/// Modal loop description handed to [`simulate`].
#[derive(Debug, Clone)]
pub(crate) struct LoopSpec {
    pub lambdas: Vec<f64>,
    pub b_modal: Vec<f64>,
    pub k_modal: Vec<f64>,
    pub pmat: DMatrix<f64>,
    pub pinv: DMatrix<f64>,
    pub mode: usize,
    pub design: TriggerDesign,
    pub tau_min: f64,
    pub s0: Vec<f64>,
    pub shat0: Vec<f64>,
}

struct Disturbance {
    kind: DisturbanceKind,
    frame: DisturbanceFrame,
    bound: f64,
    rng: ChaCha8Rng,
}

impl Disturbance {
    /// Draw for one grid step (`None` for state-dependent kinds).
    fn draw(&mut self, spec: &LoopSpec) -> Option<Vec<f64>> {
        let n = spec.lambdas.len();
        match self.kind {
            DisturbanceKind::Zero => Some(vec![0.0; n]),
            DisturbanceKind::Adversarial => None,
            DisturbanceKind::Uniform => {
                let m = self.bound;
                let raw: Vec<f64> = (0..n)
                    .map(|_| if m > 0.0 { self.rng.gen_range(-m..=m) } else { 0.0 })
                    .collect();
                Some(match self.frame {
                    DisturbanceFrame::Modal => raw,
                    DisturbanceFrame::Physical => to_modal(&spec.pinv, &raw),
                })
            }
        }
    }

    /// Worst-case input pushing every error away from zero.
    fn adversarial(&self, spec: &LoopSpec, z: &[f64]) -> Vec<f64> {
        let m = self.bound;
        match self.frame {
            DisturbanceFrame::Modal => z.iter().map(|&zi| m * Sign::of(zi).value()).collect(),
            DisturbanceFrame::Physical => {
                let s = Sign::of(z[spec.mode]).value();
                let phys: Vec<f64> = (0..z.len())
                    .map(|j| m * s * Sign::of(spec.pinv[(spec.mode, j)]).value())
                    .collect();
                to_modal(&spec.pinv, &phys)
            }
        }
    }
}

fn to_modal(pinv: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (pinv * DVector::from_column_slice(v)).iter().copied().collect()
}

/// Estimator with its own input; the controller and the sensor replica each own one.
#[derive(Debug, Clone, PartialEq)]
struct Estimator {
    shat: Vec<f64>,
    u_hold: f64,
}

struct Propagator {
    actuation: Actuation,
    lambdas: Vec<f64>,
    b_modal: Vec<f64>,
    k_modal: Vec<f64>,
    closed: DMatrix<f64>,
    step: f64,
    step_exp: DMatrix<f64>,
}

impl Propagator {
    fn new(spec: &LoopSpec, actuation: Actuation, step: f64) -> Self {
        let n = spec.lambdas.len();
        let mut closed = DMatrix::from_diagonal(&DVector::from_column_slice(&spec.lambdas));
        for i in 0..n {
            for j in 0..n {
                closed[(i, j)] -= spec.b_modal[i] * spec.k_modal[j];
            }
        }
        let step_exp = (&closed * step).exp();
        Self {
            actuation,
            lambdas: spec.lambdas.clone(),
            b_modal: spec.b_modal.clone(),
            k_modal: spec.k_modal.clone(),
            closed,
            step,
            step_exp,
        }
    }

    fn input(&self, est: &Estimator) -> f64 {
        match self.actuation {
            Actuation::Continuous => -self.feedback(&est.shat),
            Actuation::ZeroOrderHold => est.u_hold,
        }
    }

    fn feedback(&self, shat: &[f64]) -> f64 {
        self.k_modal.iter().zip(shat).map(|(k, s)| k * s).sum()
    }

    /// Advances the estimate by `tau`; returns the input's contribution to every mode.
    fn advance(&self, est: &mut Estimator, tau: f64) -> Vec<f64> {
        match self.actuation {
            Actuation::Continuous => {
                let e = if tau == self.step {
                    self.step_exp.clone()
                } else {
                    (&self.closed * tau).exp()
                };
                let next = e * DVector::from_column_slice(&est.shat);
                let forced = (0..est.shat.len())
                    .map(|i| next[i] - (self.lambdas[i] * tau).exp() * est.shat[i])
                    .collect();
                est.shat = next.iter().copied().collect();
                forced
            }
            Actuation::ZeroOrderHold => {
                let forced: Vec<f64> = (0..est.shat.len())
                    .map(|i| phi(self.lambdas[i], tau) * self.b_modal[i] * est.u_hold)
                    .collect();
                for (i, s) in est.shat.iter_mut().enumerate() {
                    *s = (self.lambdas[i] * tau).exp() * *s + forced[i];
                }
                forced
            }
        }
    }

    fn resample(&self, est: &mut Estimator) {
        est.u_hold = -self.feedback(&est.shat);
    }
}

struct Engine<'a> {
    spec: &'a LoopSpec,
    cfg: &'a SimConfig,
    prop: Propagator,
    channel: Channel,
    dist: Disturbance,
    t: f64,
    s: Vec<f64>,
    ctrl: Estimator,
    mirror: Estimator,
    w: Vec<f64>,
    events: Vec<EventRecord>,
    violations: Vec<Violation>,
    triggers: u32,
    receptions: u32,
    divergence: f64,
    z_cap: f64,
}

impl<'a> Engine<'a> {
    fn z_ctrl(&self) -> f64 {
        self.s[self.spec.mode] - self.ctrl.shat[self.spec.mode]
    }

    fn z_mirror(&self) -> Vec<f64> {
        self.s.iter().zip(&self.mirror.shat).map(|(s, h)| s - h).collect()
    }

    fn violate(&mut self, invariant: &'static str, event: Option<usize>, detail: String) {
        self.violations.push(Violation {
            invariant,
            event,
            t: self.t,
            detail,
        });
    }

    fn check_error_bound(&mut self) {
        let z = self.z_ctrl();
        if z.abs() > self.z_cap {
            let event = self.events.last().map(|e| e.k);
            self.violate(
                "error-bound",
                event,
                format!("|z| = {} exceeds Z_max = {}", z.abs(), self.spec.design.z_max()),
            );
        }
    }

    fn current_w(&self) -> Vec<f64> {
        match self.dist.kind {
            DisturbanceKind::Adversarial => self.dist.adversarial(self.spec, &self.z_mirror()),
            _ => self.w.clone(),
        }
    }

    fn advance(&mut self, tau: f64, w: &[f64]) {
        let forced = self.prop.advance(&mut self.ctrl, tau);
        for (i, s) in self.s.iter_mut().enumerate() {
            let lambda = self.spec.lambdas[i];
            *s = (lambda * tau).exp() * *s + forced[i] + phi(lambda, tau) * w[i];
        }
        self.prop.advance(&mut self.mirror, tau);
    }

    fn trigger(&mut self, sign: Sign) -> Result<()> {
        let design = &self.spec.design;
        let pkt = codec::encode(self.t, sign, design);
        let t_c = self.channel.submit(pkt, self.t)?;
        let k = self.events.len() + 1;
        if let Some(prev) = self.events.last() {
            let gap = self.t - prev.t_s;
            if gap < self.spec.tau_min - self.cfg.step {
                self.violate(
                    "inter-event",
                    Some(k),
                    format!("interval {gap} below tau_min - h = {}", self.spec.tau_min - self.cfg.step),
                );
            }
        }
        let delay = t_c - self.t;
        if delay > design.gamma * (1.0 + 1e-12) {
            self.violate("delay-bound", Some(k), format!("delay {delay} exceeds gamma = {}", design.gamma));
        }
        self.events.push(EventRecord {
            k,
            t_s: self.t,
            t_c,
            sign,
            cell_index: pkt.cell_index,
            bits: pkt.bits,
            interval: f64::NAN,
            q: None,
            z_post: None,
        });
        self.triggers += 1;
        if self.cfg.replica == ReplicaMode::SendTimeFault {
            let q = codec::decode(&pkt, self.t, design)?;
            let zbar = codec::reconstruct_zbar(sign, design.j, design.a, self.t, q);
            let m = self.spec.mode;
            self.mirror.shat[m] = codec::apply_jump(self.mirror.shat[m], zbar);
            self.prop.resample(&mut self.mirror);
        }
        Ok(())
    }

    fn receive(&mut self, pkt: codec::Packet, t_c: f64) -> Result<()> {
        self.check_error_bound();
        let design = &self.spec.design;
        let m = self.spec.mode;
        let q = codec::decode(&pkt, t_c, design)?;
        let zbar = codec::reconstruct_zbar(pkt.sign, design.j, design.a, t_c, q);
        self.ctrl.shat[m] = codec::apply_jump(self.ctrl.shat[m], zbar);
        self.prop.resample(&mut self.ctrl);
        if self.cfg.replica == ReplicaMode::Faithful {
            self.mirror.shat[m] = codec::apply_jump(self.mirror.shat[m], zbar);
            self.prop.resample(&mut self.mirror);
        }
        let z_post = self.z_ctrl();
        let limit = design.rho0 * design.j + 1e-9 * design.j;
        let ev = self
            .events
            .last_mut()
            .expect("a delivered packet always has an event record");
        ev.q = Some(q);
        ev.z_post = Some(z_post);
        let k = ev.k;
        if z_post.abs() > limit {
            self.violate(
                "jump-contract",
                Some(k),
                format!("|z(t_c+)| = {} exceeds rho0 J = {}", z_post.abs(), design.rho0 * design.j),
            );
        }
        self.receptions += 1;
        Ok(())
    }

    /// Resolves every reception and trigger due at the current instant.
    fn settle(&mut self) -> Result<()> {
        for _ in 0..SETTLE_LIMIT {
            if let Some((pkt, t_c)) = self.channel.poll(self.t) {
                self.receive(pkt, t_c)?;
                continue;
            }
            let z = self.z_mirror()[self.spec.mode];
            if codec::should_trigger(z, &self.spec.design, self.channel.in_flight()) {
                self.trigger(Sign::of(z))?;
                continue;
            }
            return Ok(());
        }
        Err(Error::Zeno { t: self.t })
    }

    fn record(&mut self, rows: &mut Vec<TraceRow>) {
        let div = self
            .ctrl
            .shat
            .iter()
            .zip(&self.mirror.shat)
            .map(|(c, s)| (c - s).abs())
            .fold(0.0, f64::max);
        if div > self.divergence {
            let event = self.events.last().map(|e| e.k);
            self.violate("sensor-mirror", event, format!("sensor and controller estimates differ by {div}"));
        }
        self.divergence = self.divergence.max(div);
        self.check_error_bound();
        let phys = (&self.spec.pmat * DVector::from_column_slice(&self.s)).iter().copied().collect();
        rows.push(TraceRow {
            t: self.t,
            s: self.s.clone(),
            phys,
            shat: self.ctrl.shat.clone(),
            z: self.z_ctrl(),
            u: self.prop.input(&self.ctrl),
            w: self.w[self.spec.mode],
            triggers: std::mem::take(&mut self.triggers),
            receptions: std::mem::take(&mut self.receptions),
        });
    }

    /// Advances from the current instant to `t_end`, splitting at triggers and receptions.
    fn step_to(&mut self, t_end: f64) -> Result<()> {
        let m = self.spec.mode;
        let lambda = self.spec.lambdas[m];
        let j = self.spec.design.j;
        for _ in 0..SPLIT_LIMIT {
            if self.t >= t_end {
                return Ok(());
            }
            let w = self.current_w();
            let boundary = self.channel.delivery_time().map_or(t_end, |t_c| t_c.min(t_end));
            let span = boundary - self.t;
            let crossing = if self.cfg.replica == ReplicaMode::Faithful && !self.channel.in_flight() {
                let z = self.z_mirror()[m];
                time_to_threshold(z, w[m], lambda, j, span)
            } else {
                None
            };
            match crossing {
                Some(tau) => {
                    self.advance(tau, &w);
                    self.t = (self.t + tau).min(boundary);
                    // |z| sits at J here, so its sign is unambiguous
                    let sign = Sign::of(self.z_mirror()[m]);
                    self.trigger(sign)?;
                }
                None => {
                    self.advance(span, &w);
                    self.t = boundary;
                }
            }
            self.w = w;
            self.settle()?;
        }
        Err(Error::Zeno { t: self.t })
    }
}

/// Runs the loop over the configured horizon.
pub(crate) fn simulate(spec: &LoopSpec, cfg: &SimConfig) -> Result<SimTrace> {
    let n = spec.lambdas.len();
    let prop = Propagator::new(spec, cfg.actuation, cfg.step);
    let mut ctrl = Estimator {
        shat: spec.shat0.clone(),
        u_hold: 0.0,
    };
    prop.resample(&mut ctrl);
    let mut eng = Engine {
        spec,
        cfg,
        prop,
        channel: Channel::new(cfg.delay),
        dist: Disturbance {
            kind: cfg.disturbance.kind,
            frame: cfg.disturbance.frame,
            bound: cfg.disturbance.bound,
            rng: ChaCha8Rng::seed_from_u64(cfg.disturbance.seed),
        },
        t: 0.0,
        s: spec.s0.clone(),
        mirror: ctrl.clone(),
        ctrl,
        w: vec![0.0; n],
        events: Vec::new(),
        violations: Vec::new(),
        triggers: 0,
        receptions: 0,
        divergence: 0.0,
        z_cap: spec.design.z_max() * (1.0 + 1e-9),
    };
    let steps = cfg.steps();
    let mut rows = Vec::with_capacity(steps + 1);
    eng.settle()?;
    eng.record(&mut rows);
    for step in 1..=steps {
        let t_end = step as f64 * cfg.step;
        if let Some(w) = eng.dist.draw(spec) {
            eng.w = w;
        }
        eng.step_to(t_end)?;
        if cfg.actuation == Actuation::ZeroOrderHold {
            eng.prop.resample(&mut eng.ctrl);
            eng.prop.resample(&mut eng.mirror);
        }
        eng.record(&mut rows);
    }
    let horizon = eng.t;
    let mut events = eng.events;
    let next: Vec<f64> = events.iter().skip(1).map(|e| e.t_s).chain([horizon]).collect();
    for (e, t_next) in events.iter_mut().zip(next) {
        e.interval = t_next - e.t_s;
    }
    Ok(SimTrace {
        dim: n,
        mode: spec.mode,
        horizon,
        rows,
        events,
        violations: eng.violations,
        mirror_divergence: eng.divergence,
    })
}
