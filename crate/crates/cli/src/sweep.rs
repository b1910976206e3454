//! Delay sweeps: analytic design columns per `gamma`, optionally with measured rates.

use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;

use etstab::design::{self, JRule, RateCurvePoint};
use etstab::model::PlantParams;
use etstab::sim::output::kv_text;
use etstab::sim::{self, triggered_plant, SimConfig};

use crate::commands::{create_dir, manifest_head, out_dir, write, CliError, CliResult, RunFlags, MANIFEST_FILE};

pub const SWEEP_FILE: &str = "sweep.csv";

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Delay grid: `start:stop:step` or a comma-separated list.
    #[arg(long)]
    grid: Option<String>,
    /// Also simulate every grid point and report measured rates.
    #[arg(long)]
    measured: bool,
    /// Growth rate (analytic sweeps).
    #[arg(long = "A")]
    a: Option<f64>,
    /// Input gain (analytic sweeps).
    #[arg(long = "B")]
    b_gain: Option<f64>,
    /// Post-jump contraction (analytic sweeps).
    #[arg(long)]
    rho0: Option<f64>,
    /// Slack factor of the closed-form packet bound.
    #[arg(long = "b")]
    slack: Option<f64>,
    #[command(flatten)]
    run: RunFlags,
    /// Output directory (default: $ETSTAB_OUT_DIR, else ./out).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Where the per-point parameters come from.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepSource {
    Analytic {
        plant: PlantParams,
        rho0: f64,
        slack: f64,
        rule: JRule,
    },
    /// Simulated runs; `delay.gamma` is replaced by each grid value.
    Measured(SimConfig),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub gammas: Vec<f64>,
    pub source: SweepSource,
}

/// Parses `start:stop:step` or `g1,g2,...` into a strictly increasing grid.
pub fn parse_grid(text: &str) -> CliResult<Vec<f64>> {
    let bad = |why: &str| CliError::Usage(format!("grid `{text}`: {why}"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("not a number"));
    let text_t = text.trim();
    let grid: Vec<f64> = if text_t.is_empty() {
        Vec::new()
    } else if text_t.contains(':') {
        let parts: Vec<&str> = text_t.split(':').collect();
        let [start, stop, step] = parts.as_slice() else {
            return Err(bad("expected start:stop:step"));
        };
        let (start, stop, step) = (num(start)?, num(stop)?, num(step)?);
        let ordered = step > 0.0 && stop >= start;
        if !ordered {
            return Err(bad("need step > 0 and stop >= start"));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|i| start + i as f64 * step).collect()
    } else {
        text_t.split(',').map(num).collect::<CliResult<_>>()?
    };
    if grid.is_empty() {
        return Err(bad("empty grid"));
    }
    if grid.iter().any(|g| !(g.is_finite() && *g >= 0.0)) || grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(bad("values must be finite, >= 0 and strictly increasing"));
    }
    Ok(grid)
}

impl SweepPlan {
    pub fn from_pairs(pairs: &[(String, String)]) -> CliResult<Self> {
        let mut gammas = None;
        let mut measured = false;
        let (mut a, mut b, mut m, mut rho0, mut slack, mut rule) = (None, None, None, None, None, None);
        let mut sim_pairs = Vec::new();
        for (k, v) in pairs {
            let num = || {
                v.parse::<f64>()
                    .map_err(|_| CliError::Usage(format!("`{k}` expects a number, got `{v}`")))
            };
            match k.as_str() {
                "sweep.gammas" => gammas = Some(parse_grid(v)?),
                "sweep.measured" => {
                    measured = v
                        .parse()
                        .map_err(|_| CliError::Usage(format!("`{k}` expects true or false")))?
                }
                "sweep.A" => a = Some(num()?),
                "sweep.B" => b = Some(num()?),
                "sweep.M" => m = Some(num()?),
                "sweep.rho0" => rho0 = Some(num()?),
                "sweep.b" => slack = Some(num()?),
                "sweep.j_rule" => rule = Some(v.parse::<JRule>()?),
                k if k.starts_with("run.") => {}
                _ => sim_pairs.push((k.clone(), v.clone())),
            }
        }
        let gammas = gammas.ok_or_else(|| CliError::Usage("missing delay grid (--grid)".into()))?;
        let source = if measured {
            if a.is_some() || b.is_some() || m.is_some() || rho0.is_some() || slack.is_some() || rule.is_some() {
                return Err(CliError::Usage(
                    "measured sweeps take plant and design settings from the simulation config".into(),
                ));
            }
            SweepSource::Measured(SimConfig::from_pairs(&sim_pairs)?)
        } else {
            if let Some((k, _)) = sim_pairs.first() {
                return Err(CliError::Usage(format!("`{k}` only applies to measured sweeps")));
            }
            let a = a.ok_or_else(|| CliError::Usage("missing --A".into()))?;
            let m = m.ok_or_else(|| CliError::Usage("missing --M".into()))?;
            SweepSource::Analytic {
                plant: PlantParams::new(a, b.unwrap_or(1.0), m, 1.0)?,
                rho0: rho0.unwrap_or(0.9),
                slack: slack.unwrap_or(1.0001),
                rule: rule.unwrap_or(JRule::CASE_STUDY),
            }
        };
        Ok(Self { gammas, source })
    }

    pub fn to_pairs(&self) -> Vec<(String, String)> {
        let grid = self.gammas.iter().map(|g| g.to_string()).collect::<Vec<_>>().join(",");
        let mut out = vec![
            ("sweep.measured".to_string(), matches!(self.source, SweepSource::Measured(_)).to_string()),
            ("sweep.gammas".to_string(), grid),
        ];
        match &self.source {
            SweepSource::Analytic {
                plant,
                rho0,
                slack,
                rule,
            } => {
                for (k, v) in [
                    ("sweep.A", plant.a.to_string()),
                    ("sweep.B", plant.b.to_string()),
                    ("sweep.M", plant.m.to_string()),
                    ("sweep.rho0", rho0.to_string()),
                    ("sweep.b", slack.to_string()),
                    ("sweep.j_rule", rule.to_string()),
                ] {
                    out.push((k.to_string(), v));
                }
            }
            SweepSource::Measured(cfg) => out.extend(cfg.to_pairs()),
        }
        out
    }

    /// CSV text, one row per grid value in grid order.
    pub fn run(&self) -> String {
        let measured = matches!(self.source, SweepSource::Measured(_));
        let mut header: Vec<&str> = RateCurvePoint::CSV_HEADER.to_vec();
        if measured {
            header.extend(["R_s_measured", "R_tr_measured", "triggers", "violations"]);
        }
        header.push("error");
        let rows: Vec<String> = self.gammas.par_iter().map(|&g| self.row(g, header.len())).collect();
        let mut out = header.join(",");
        out.push('\n');
        for r in rows {
            out.push_str(&r);
            out.push('\n');
        }
        out
    }

    fn row(&self, gamma: f64, width: usize) -> String {
        let fields = match self.point(gamma) {
            Ok(mut f) => {
                f.push(String::new());
                f
            }
            Err(e) => {
                let mut f = vec![gamma.to_string()];
                f.resize(width - 1, String::new());
                f.push(e.to_string().replace([',', '\n'], ";"));
                f
            }
        };
        fields.join(",")
    }

    fn point(&self, gamma: f64) -> CliResult<Vec<String>> {
        match &self.source {
            SweepSource::Analytic {
                plant,
                rho0,
                slack,
                rule,
            } => Ok(design::rate_curve_point(plant, *rho0, *slack, *rule, gamma)?.csv_fields()),
            SweepSource::Measured(base) => {
                let mut cfg = *base;
                cfg.delay.gamma = gamma;
                let p = triggered_plant(&cfg)?;
                let mut fields = design::rate_curve_point(&p, cfg.rho0, cfg.slack_b, cfg.j_rule, gamma)?.csv_fields();
                let out = sim::run(&cfg)?;
                fields.extend([
                    out.rates.r_s.to_string(),
                    out.rates.r_tr.to_string(),
                    out.rates.triggers.to_string(),
                    out.trace.violations.len().to_string(),
                ]);
                Ok(fields)
            }
        }
    }
}

pub fn cmd_sweep(args: &SweepArgs) -> CliResult<()> {
    let mut pairs = args.run.pairs(None)?;
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            pairs.push((k.to_string(), v));
        }
    };
    put("sweep.gammas", args.grid.clone());
    if args.measured {
        put("sweep.measured", Some("true".into()));
        put("design.rho0", args.rho0.map(|v| v.to_string()));
        put("design.b", args.slack.map(|v| v.to_string()));
        if args.a.is_some() || args.b_gain.is_some() {
            return Err(CliError::Usage("--A/--B apply to analytic sweeps only".into()));
        }
    } else {
        put("sweep.A", args.a.map(|v| v.to_string()));
        put("sweep.B", args.b_gain.map(|v| v.to_string()));
        put("sweep.rho0", args.rho0.map(|v| v.to_string()));
        put("sweep.b", args.slack.map(|v| v.to_string()));
        // analytic sweeps read M and the J rule from the shared flags
        if let Some(i) = pairs.iter().rposition(|(k, _)| k == "disturbance.M") {
            let (_, v) = pairs.remove(i);
            pairs.push(("sweep.M".into(), v));
        }
        if let Some(i) = pairs.iter().rposition(|(k, _)| k == "design.j_rule") {
            let (_, v) = pairs.remove(i);
            pairs.push(("sweep.j_rule".into(), v));
        }
    }
    let plan = SweepPlan::from_pairs(&pairs)?;
    let csv = plan.run();
    let dir = out_dir(args.out.as_deref());
    create_dir(&dir)?;
    write(&dir.join(SWEEP_FILE), &csv)?;
    let mut manifest = manifest_head("sweep", &[("sweep", SWEEP_FILE)]);
    manifest.extend(plan.to_pairs());
    write(&dir.join(MANIFEST_FILE), &kv_text(&manifest))?;
    println!("wrote {} ({} grid points)", dir.join(SWEEP_FILE).display(), plan.gammas.len());
    Ok(())
}
