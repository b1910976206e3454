use std::fmt;
use std::str::FromStr;

use crate::channel::{DelayKind, DelayPolicy};
use crate::design::JRule;
use crate::error::{Error, Result};
use crate::sim::pendulum::MatrixSource;

/// How the control input varies between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Actuation {
    /// `u(t) = -k xhat(t)` at every instant.
    Continuous,
    /// `u` sampled at grid points and receptions, held in between.
    ZeroOrderHold,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisturbanceKind {
    Zero,
    /// Independent uniform draws on `[-M, M]`, held over each grid step.
    Uniform,
    /// `M sign(z)`, re-evaluated whenever the step is split by an event.
    Adversarial,
}

/// Coordinates in which the bound `M` applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DisturbanceFrame {
    /// Each modal component is bounded by `M`; the triggered mode is designed for `M`.
    Modal,
    /// Each physical component is bounded by `M`; the triggered mode is designed
    /// for the transformed bound `M * sum_j |P^-1_{mj}|`.
    Physical,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisturbanceSpec {
    pub kind: DisturbanceKind,
    pub bound: f64,
    pub frame: DisturbanceFrame,
    pub seed: u64,
}

/// How the sensor keeps its copy of the controller's estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplicaMode {
    /// Applies each jump at the acknowledged reception time.
    Faithful,
    /// Fault injection: applies each jump at the send time, as if there were no delay.
    SendTimeFault,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// No disturbance, delay bound of one grid step.
    A,
    /// `M = 0.05`, delay bound of one grid step.
    B,
    /// `M = 0.05`, delay bound `0.1 s`.
    C,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalarSpec {
    pub a: f64,
    pub b: f64,
    pub l: f64,
    /// Feedback gain; `None` selects pole mirroring `K = 2A/B`.
    pub k: Option<f64>,
    pub x0: f64,
    /// Initial estimate; `None` selects `x0 - J/2`.
    pub xhat0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PendulumSpec {
    pub matrices: MatrixSource,
    /// Physical initial state.
    pub s0: [f64; 4],
    /// Physical initial estimate.
    pub shat0: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SystemSpec {
    Scalar(ScalarSpec),
    Pendulum(PendulumSpec),
}

/// Complete, materialized run configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub scenario: Option<Scenario>,
    pub system: SystemSpec,
    pub horizon: f64,
    pub step: f64,
    pub actuation: Actuation,
    pub rho0: f64,
    pub slack_b: f64,
    pub j_rule: JRule,
    pub delay: DelayPolicy,
    pub disturbance: DisturbanceSpec,
    pub replica: ReplicaMode,
}

const STEP: f64 = 0.005;

impl SimConfig {
    pub fn scalar_default() -> Self {
        Self {
            scenario: None,
            system: SystemSpec::Scalar(ScalarSpec {
                a: 5.5651,
                b: 2.2513,
                l: 0.1,
                k: None,
                x0: 0.1,
                xhat0: None,
            }),
            horizon: 5.0,
            step: STEP,
            actuation: Actuation::Continuous,
            rho0: 0.9,
            slack_b: 1.0001,
            j_rule: JRule::CASE_STUDY,
            delay: DelayPolicy {
                kind: DelayKind::Uniform,
                gamma: 0.1,
                seed: 1,
            },
            disturbance: DisturbanceSpec {
                kind: DisturbanceKind::Uniform,
                bound: 0.05,
                frame: DisturbanceFrame::Modal,
                seed: 2,
            },
            replica: ReplicaMode::Faithful,
        }
    }

    pub fn pendulum(scenario: Scenario) -> Self {
        let (bound, kind, gamma) = match scenario {
            Scenario::A => (0.0, DisturbanceKind::Zero, STEP),
            Scenario::B => (0.05, DisturbanceKind::Uniform, STEP),
            Scenario::C => (0.05, DisturbanceKind::Uniform, 0.1),
        };
        Self {
            scenario: Some(scenario),
            system: SystemSpec::Pendulum(PendulumSpec {
                matrices: MatrixSource::Physical,
                s0: [0.0, 0.0, 0.0, 0.1001],
                shat0: [0.0, 0.0, 0.0, 0.10],
            }),
            delay: DelayPolicy {
                kind: DelayKind::Uniform,
                gamma,
                seed: 1,
            },
            disturbance: DisturbanceSpec {
                kind,
                bound,
                frame: DisturbanceFrame::Modal,
                seed: 2,
            },
            ..Self::scalar_default()
        }
    }

    /// Builds a config from `key = value` pairs. `system` and `scenario` select
    /// the preset; every other key overrides it. Keys under `run.` are ignored.
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Result<Self> {
        let get = |name: &str| {
            pairs
                .iter()
                .rev()
                .find(|(k, _)| k.as_ref() == name)
                .map(|(_, v)| v.as_ref().trim())
        };
        let scenario = match get("scenario") {
            None | Some("none") => None,
            Some(s) => Some(s.parse::<Scenario>()?),
        };
        let mut cfg = match (get("system"), scenario) {
            (Some("scalar"), Some(_)) => {
                return Err(Error::Config("scenarios a, b, c are pendulum runs; drop `system = scalar`".into()))
            }
            (_, Some(s)) => Self::pendulum(s),
            (None | Some("scalar"), None) => Self::scalar_default(),
            (Some("pendulum"), None) => Self {
                scenario: None,
                ..Self::pendulum(Scenario::C)
            },
            (Some(other), None) => return Err(Error::Config(format!("unknown system `{other}`"))),
        };
        for (k, v) in pairs {
            let (k, v) = (k.as_ref().trim(), v.as_ref().trim());
            if matches!(k, "system" | "scenario") || k.starts_with("run.") {
                continue;
            }
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    /// Parses `key = value` lines; blank lines and `#` comments are skipped.
    pub fn from_kv_text(text: &str) -> Result<Self> {
        Self::from_pairs(&parse_kv(text)?)
    }

    /// Sets one key. Unknown keys, and keys that do not apply to the selected
    /// system, are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let num = || parse_f64(key, value);
        let seed = || {
            value
                .parse::<u64>()
                .map_err(|_| Error::Config(format!("`{key}` expects an unsigned integer, got `{value}`")))
        };
        match key {
            "sim.T" => self.horizon = num()?,
            "sim.h" => self.step = num()?,
            "sim.actuation" => self.actuation = value.parse()?,
            "design.rho0" => self.rho0 = num()?,
            "design.b" => self.slack_b = num()?,
            "design.j_rule" => self.j_rule = value.parse()?,
            "delay.kind" => self.delay.kind = value.parse::<DelayKind>()?,
            "delay.gamma" => self.delay.gamma = num()?,
            "delay.seed" => self.delay.seed = seed()?,
            "disturbance.kind" => self.disturbance.kind = value.parse()?,
            "disturbance.M" => self.disturbance.bound = num()?,
            "disturbance.frame" => self.disturbance.frame = value.parse()?,
            "disturbance.seed" => self.disturbance.seed = seed()?,
            "mirror.fault" => self.replica = value.parse()?,
            _ => match (&mut self.system, key) {
                (SystemSpec::Scalar(s), "scalar.A") => s.a = num()?,
                (SystemSpec::Scalar(s), "scalar.B") => s.b = num()?,
                (SystemSpec::Scalar(s), "scalar.L") => s.l = num()?,
                (SystemSpec::Scalar(s), "scalar.K") => {
                    s.k = if value == "pole-mirror" { None } else { Some(num()?) }
                }
                (SystemSpec::Scalar(s), "scalar.x0") => s.x0 = num()?,
                (SystemSpec::Scalar(s), "scalar.xhat0") => {
                    s.xhat0 = if value == "auto" { None } else { Some(num()?) }
                }
                (SystemSpec::Pendulum(p), "pendulum.matrices") => p.matrices = value.parse()?,
                (SystemSpec::Pendulum(p), "pendulum.s0") => p.s0 = parse_vec4(key, value)?,
                (SystemSpec::Pendulum(p), "pendulum.shat0") => p.shat0 = parse_vec4(key, value)?,
                _ => return Err(Error::Config(format!("unknown or inapplicable key `{key}`"))),
            },
        }
        Ok(())
    }

    /// Every setting as ordered `key = value` pairs; [`SimConfig::from_pairs`] inverts it.
    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        match &self.system {
            SystemSpec::Scalar(s) => {
                put("system", "scalar".into());
                put("scenario", "none".into());
                put("scalar.A", s.a.to_string());
                put("scalar.B", s.b.to_string());
                put("scalar.L", s.l.to_string());
                put("scalar.K", s.k.map_or("pole-mirror".into(), |k| k.to_string()));
                put("scalar.x0", s.x0.to_string());
                put("scalar.xhat0", s.xhat0.map_or("auto".into(), |x| x.to_string()));
            }
            SystemSpec::Pendulum(p) => {
                put("system", "pendulum".into());
                put("scenario", self.scenario.map_or("none".into(), |s| s.to_string()));
                put("pendulum.matrices", p.matrices.to_string());
                put("pendulum.s0", join4(&p.s0));
                put("pendulum.shat0", join4(&p.shat0));
            }
        }
        put("sim.T", self.horizon.to_string());
        put("sim.h", self.step.to_string());
        put("sim.actuation", self.actuation.to_string());
        put("design.rho0", self.rho0.to_string());
        put("design.b", self.slack_b.to_string());
        put("design.j_rule", self.j_rule.to_string());
        put("delay.kind", self.delay.kind.to_string());
        put("delay.gamma", self.delay.gamma.to_string());
        put("delay.seed", self.delay.seed.to_string());
        put("disturbance.kind", self.disturbance.kind.to_string());
        put("disturbance.M", self.disturbance.bound.to_string());
        put("disturbance.frame", self.disturbance.frame.to_string());
        put("disturbance.seed", self.disturbance.seed.to_string());
        put("mirror.fault", self.replica.to_string());
        out
    }

    /// Checks the run-level constraints shared by every system.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.step.is_finite() && self.step > 0.0) {
            return bad(format!("sim.h must be > 0, got {}", self.step));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.step) {
            return bad(format!("sim.T must be >= sim.h, got {}", self.horizon));
        }
        if !(self.delay.gamma.is_finite() && self.delay.gamma >= self.step) {
            return bad(format!(
                "delay.gamma = {} is below one grid step ({}); the delay bound must cover at least one sampling time",
                self.delay.gamma, self.step
            ));
        }
        if !(self.disturbance.bound.is_finite() && self.disturbance.bound >= 0.0) {
            return bad(format!("disturbance.M must be >= 0, got {}", self.disturbance.bound));
        }
        if !(self.rho0 > 0.0 && self.rho0 < 1.0) {
            return bad(format!("design.rho0 must lie in (0, 1), got {}", self.rho0));
        }
        if !(self.slack_b > 1.0) {
            return bad(format!("design.b must be > 1, got {}", self.slack_b));
        }
        Ok(())
    }

    /// Grid steps in the horizon.
    pub fn steps(&self) -> usize {
        (self.horizon / self.step).round().max(1.0) as usize
    }
}

/// Splits `key = value` lines.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", no + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse::<f64>()
        .map_err(|_| Error::Config(format!("`{key}` expects a number, got `{value}`")))
}

fn parse_vec4(key: &str, value: &str) -> Result<[f64; 4]> {
    let parts: Vec<&str> = value.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err(Error::Config(format!("`{key}` expects four comma-separated numbers")));
    }
    let mut out = [0.0; 4];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = parse_f64(key, p)?;
    }
    Ok(out)
}

fn join4(v: &[f64; 4]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

macro_rules! keyword_enum {
    ($ty:ty, $what:literal, { $($variant:path => $text:literal),+ $(,)? }) => {
        impl FromStr for $ty {
            type Err = Error;
            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($text => Ok($variant),)+
                    other => Err(Error::Config(format!(
                        concat!("unknown ", $what, " `{}` (expected one of: {})"),
                        other,
                        [$($text),+].join(", ")
                    ))),
                }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($variant => $text,)+ })
            }
        }
    };
}

keyword_enum!(Actuation, "actuation", {
    Actuation::Continuous => "continuous",
    Actuation::ZeroOrderHold => "zoh",
});
keyword_enum!(DisturbanceKind, "disturbance kind", {
    DisturbanceKind::Zero => "zero",
    DisturbanceKind::Uniform => "uniform",
    DisturbanceKind::Adversarial => "adversarial",
});
keyword_enum!(DisturbanceFrame, "disturbance frame", {
    DisturbanceFrame::Modal => "modal",
    DisturbanceFrame::Physical => "physical",
});
keyword_enum!(ReplicaMode, "mirror fault", {
    ReplicaMode::Faithful => "none",
    ReplicaMode::SendTimeFault => "send-time",
});
keyword_enum!(Scenario, "scenario", {
    Scenario::A => "a",
    Scenario::B => "b",
    Scenario::C => "c",
});
