use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use etstab::channel::DelayKind;
use etstab::codec::build_design;
use etstab::design::{self, JRule};
use etstab::model::PlantParams;
use etstab::sim::output::{events_csv, kv_text, trace_csv};
use etstab::sim::{
    self, parse_kv, triggered_plant, Actuation, DisturbanceFrame, DisturbanceKind, ReplicaMode, Scenario, SimConfig,
};

use crate::sweep::{self, SweepArgs};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ETSTAB_OUT_DIR";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invariant violation: {0}")]
    Violation(String),
    #[error(transparent)]
    Core(#[from] etstab::Error),
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "etstab", version, about = "Event-triggered stabilization over a delayed channel")]
pub struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Print the trigger design and rate bounds for one operating point.
    Design(DesignArgs),
    /// Run a closed-loop simulation and write trace, events, stats and manifest.
    Simulate(SimulateArgs),
    /// Evaluate the design (and optionally simulate) across a grid of delay bounds.
    Sweep(SweepArgs),
}

pub fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.cmd {
        Cmd::Design(a) => cmd_design(&a),
        Cmd::Simulate(a) => cmd_simulate(&a),
        Cmd::Sweep(a) => sweep::cmd_sweep(&a),
    }
}

#[derive(Debug, Args)]
struct DesignArgs {
    /// Use the unstable pendulum mode of a case-study scenario (a, b or c).
    #[arg(long)]
    scenario: Option<Scenario>,
    /// Growth rate of the triggered mode.
    #[arg(long = "A", required_unless_present = "scenario")]
    a: Option<f64>,
    /// Input gain (reported only).
    #[arg(long = "B")]
    b_gain: Option<f64>,
    /// Disturbance bound.
    #[arg(long = "M", required_unless_present = "scenario")]
    m: Option<f64>,
    /// Worst-case delay.
    #[arg(long, required_unless_present = "scenario")]
    gamma: Option<f64>,
    /// Post-jump contraction.
    #[arg(long)]
    rho0: Option<f64>,
    /// Slack factor of the closed-form packet bound.
    #[arg(long = "b")]
    slack: Option<f64>,
    /// Triggering threshold.
    #[arg(long = "J", conflicts_with = "j_rule")]
    j: Option<f64>,
    /// Threshold rule: rate-curve, case-study, min-plus:<x> or fixed:<x>.
    #[arg(long)]
    j_rule: Option<JRule>,
    /// Frame of the disturbance bound for scenario designs.
    #[arg(long)]
    frame: Option<DisturbanceFrame>,
}

fn cmd_design(args: &DesignArgs) -> CliResult<()> {
    let (p, gamma, rho0, slack, rule) = match args.scenario {
        Some(sc) => {
            let mut cfg = SimConfig::pendulum(sc);
            if let Some(f) = args.frame {
                cfg.disturbance.frame = f;
            }
            if let Some(m) = args.m {
                cfg.disturbance.bound = m;
            }
            let p = triggered_plant(&cfg)?;
            (
                p,
                args.gamma.unwrap_or(cfg.delay.gamma),
                args.rho0.unwrap_or(cfg.rho0),
                args.slack.unwrap_or(cfg.slack_b),
                args.j_rule.unwrap_or(cfg.j_rule),
            )
        }
        None => {
            let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| CliError::Usage(format!("missing --{flag}")));
            let p = PlantParams::new(need(args.a, "A")?, args.b_gain.unwrap_or(1.0), need(args.m, "M")?, 1.0)?;
            (
                p,
                need(args.gamma, "gamma")?,
                args.rho0.unwrap_or(0.9),
                args.slack.unwrap_or(1.0001),
                args.j_rule.unwrap_or(JRule::CASE_STUDY),
            )
        }
    };
    let rule = args.j.map(JRule::Fixed).unwrap_or(rule);
    let j = rule.j(&p, rho0, gamma);
    let d = build_design(&p, j, rho0, slack, gamma)?;
    let closed = design::packet_size_closed_form(&p, j, rho0, slack, gamma)?;
    let tau_min = design::min_inter_event(&p, j, rho0)?;
    let pairs: Vec<(&str, String)> = vec![
        ("A", p.a.to_string()),
        ("B", p.b.to_string()),
        ("M", p.m.to_string()),
        ("gamma", gamma.to_string()),
        ("rho0", rho0.to_string()),
        ("b", slack.to_string()),
        ("j_rule", rule.to_string()),
        ("min_J", design::min_j(&p, rho0, gamma).to_string()),
        ("J", j.to_string()),
        ("delta", d.delta.to_string()),
        ("N", d.cells.to_string()),
        ("P", d.period.map_or("none".into(), |v| v.to_string())),
        ("g_constructive", d.bits.to_string()),
        ("g_paper_real", closed.raw.to_string()),
        ("g_paper_bound", closed.bound.to_string()),
        ("g_paper_int", closed.integer.to_string()),
        ("Z_max", d.z_max().to_string()),
        ("tau_min", tau_min.to_string()),
        ("Rtr_bound", design::max_trigger_rate(&p, j, rho0)?.to_string()),
        ("Rs_bound", design::sufficient_rate(&p, j, rho0, slack, gamma)?.to_string()),
        ("datarate_threshold", design::datarate_threshold(p.a).to_string()),
    ];
    print!("{}", kv_text(&pairs));
    Ok(())
}

/// Flags shared by commands that build a simulation config.
#[derive(Debug, Args, Default)]
pub struct RunFlags {
    /// Case-study scenario (a, b or c); selects the pendulum.
    #[arg(long)]
    pub scenario: Option<Scenario>,
    /// System: scalar or pendulum.
    #[arg(long)]
    pub system: Option<String>,
    /// `key = value` config file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Extra `key=value` override (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Seeds the delay stream with `seed` and the disturbance stream with `seed + 1`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Horizon T in seconds.
    #[arg(long = "T")]
    pub horizon: Option<f64>,
    /// Grid step h in seconds.
    #[arg(long = "h")]
    pub step: Option<f64>,
    /// Disturbance bound.
    #[arg(long = "M")]
    pub m: Option<f64>,
    /// Channel delay: constant, uniform or adversarial-max
    #[arg(long)]
    pub delay_kind: Option<DelayKind>,
    /// Disturbance: zero, uniform or adversarial
    #[arg(long)]
    pub disturbance: Option<DisturbanceKind>,
    /// Frame the disturbance bound applies in: modal or physical
    #[arg(long)]
    pub frame: Option<DisturbanceFrame>,
    /// Actuation: continuous or zoh
    #[arg(long)]
    pub actuation: Option<Actuation>,
    /// Sensor replica fault injection: none or send-time.
    #[arg(long)]
    pub mirror_fault: Option<ReplicaMode>,
    /// Threshold rule: rate-curve, case-study, min-plus:<x> or fixed:<x>.
    #[arg(long)]
    pub j_rule: Option<JRule>,
}

impl RunFlags {
    /// Config file pairs followed by flag overrides, in application order.
    pub fn pairs(&self, gamma: Option<f64>) -> CliResult<Vec<(String, String)>> {
        let mut pairs = match &self.config {
            Some(path) => parse_kv(&read(path)?)?,
            None => Vec::new(),
        };
        let mut put = |k: &str, v: String| pairs.push((k.to_string(), v));
        if let Some(s) = self.scenario {
            put("scenario", s.to_string());
        }
        if let Some(s) = &self.system {
            put("system", s.clone());
        }
        if let Some(seed) = self.seed {
            put("delay.seed", seed.to_string());
            put("disturbance.seed", seed.wrapping_add(1).to_string());
        }
        for (k, v) in [
            ("sim.T", self.horizon.map(|v| v.to_string())),
            ("sim.h", self.step.map(|v| v.to_string())),
            ("disturbance.M", self.m.map(|v| v.to_string())),
            ("delay.gamma", gamma.map(|v| v.to_string())),
            ("delay.kind", self.delay_kind.map(|v| v.to_string())),
            ("disturbance.kind", self.disturbance.map(|v| v.to_string())),
            ("disturbance.frame", self.frame.map(|v| v.to_string())),
            ("sim.actuation", self.actuation.map(|v| v.to_string())),
            ("mirror.fault", self.mirror_fault.map(|v| v.to_string())),
            ("design.j_rule", self.j_rule.map(|v| v.to_string())),
        ] {
            if let Some(v) = v {
                put(k, v);
            }
        }
        for s in &self.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("--set expects KEY=VALUE, got `{s}`")))?;
            put(k.trim(), v.trim().to_string());
        }
        Ok(pairs)
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunFlags,
    /// Worst-case delay.
    #[arg(long)]
    gamma: Option<f64>,
    /// Output directory (default: $ETSTAB_OUT_DIR, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
}

pub const TRACE_FILE: &str = "trace.csv";
pub const EVENTS_FILE: &str = "events.csv";
pub const STATS_FILE: &str = "stats.txt";
pub const MANIFEST_FILE: &str = "manifest.txt";

fn cmd_simulate(args: &SimulateArgs) -> CliResult<()> {
    let pairs = args.run.pairs(args.gamma)?;
    let cfg = SimConfig::from_pairs(&pairs)?;
    let out = sim::run(&cfg)?;
    let dir = out_dir(args.out.as_deref());
    create_dir(&dir)?;
    write(&dir.join(TRACE_FILE), &trace_csv(&out.trace))?;
    write(&dir.join(EVENTS_FILE), &events_csv(&out.trace))?;
    write(&dir.join(STATS_FILE), &kv_text(&out.summary().pairs))?;
    let mut manifest = manifest_head(
        "simulate",
        &[("trace", TRACE_FILE), ("events", EVENTS_FILE), ("stats", STATS_FILE)],
    );
    manifest.extend(cfg.to_pairs());
    write(&dir.join(MANIFEST_FILE), &kv_text(&manifest))?;
    println!(
        "wrote {} ({} triggers, {} bits, R_s = {} bits/s)",
        dir.display(),
        out.rates.triggers,
        out.rates.total_bits,
        out.rates.r_s
    );
    match out.trace.first_violation() {
        Some(v) => Err(CliError::Violation(v.to_string())),
        None => Ok(()),
    }
}

pub fn manifest_head(command: &str, outputs: &[(&str, &str)]) -> Vec<(String, String)> {
    let mut m = vec![
        ("run.command".to_string(), command.to_string()),
        ("run.version".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ];
    m.extend(outputs.iter().map(|(k, v)| (format!("run.output.{k}"), v.to_string())));
    m
}

pub fn out_dir(flag: Option<&Path>) -> PathBuf {
    match flag {
        Some(p) => p.to_path_buf(),
        None => std::env::var_os(OUT_DIR_ENV)
            .map(PathBuf::from)
            .unwrap_or_else(|| PathBuf::from("out")),
    }
}

pub fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
