//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any fails.

use std::panic;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use etstab::channel::DelayKind;
use etstab::codec::{build_design, decode, encode, Sign};
use etstab::design::{self, bisect_crossing, datarate_threshold, min_j, rate_curve_point, JRule};
use etstab::model::PlantParams;
use etstab::sim::contract::{delay_grid, send_time_grid, sweep};
use etstab::sim::pendulum::{printed, MatrixSource, PendulumModel};
use etstab::sim::{run, run_sensor_mirror, triggered_plant, DisturbanceKind, ReplicaMode, Scenario, SimConfig, SystemSpec};

const SCENARIOS: [Scenario; 3] = [Scenario::A, Scenario::B, Scenario::C];

/// Relative slack on the post-jump contract.
const CONTRACT_EPS: f64 = 1e-9;
/// Entrywise tolerance against the printed modal data.
const PRINTED_TOL: f64 = 1e-3;
/// Tolerance on the frozen crossing delay of the rate curve.
const CROSSING_TOL: f64 = 1e-9;
const CROSSING_GAMMA: f64 = 0.0195669280726318;

type Check = fn() -> Verdict;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn packet_sizes() -> Verdict {
    let t = Instant::now();
    let mut cons = Vec::new();
    let mut closed = Vec::new();
    for sc in SCENARIOS {
        let cfg = SimConfig::pendulum(sc);
        let p = triggered_plant(&cfg).unwrap();
        let j = cfg.j_rule.j(&p, cfg.rho0, cfg.delay.gamma);
        cons.push(build_design(&p, j, cfg.rho0, cfg.slack_b, cfg.delay.gamma).unwrap().bits);
        closed.push(design::packet_size_closed_form(&p, j, cfg.rho0, cfg.slack_b, cfg.delay.gamma).unwrap().integer);
    }
    let el = t.elapsed();
    let pass = cons == [1, 1, 4] && closed[2] == 3 && closed[2] != cons[2] && within(el, 1.0);
    verdict(pass, format!("constructive g = {cons:?}, closed-form integer g = {closed:?}, {el:?}"))
}

fn jump_contract() -> Verdict {
    let t = Instant::now();
    let cfg = SimConfig::pendulum(Scenario::C);
    let p = triggered_plant(&cfg).unwrap();
    let j = cfg.j_rule.j(&p, cfg.rho0, cfg.delay.gamma);
    let d = build_design(&p, j, cfg.rho0, cfg.slack_b, cfg.delay.gamma).unwrap();
    let rep = sweep(&d, &send_time_grid(&d, 2.0), &delay_grid(d.gamma, 100)).unwrap();
    let el = t.elapsed();
    let limit = 0.9 * d.j + CONTRACT_EPS * d.j;
    let pass = rep.violations == 0 && rep.worst <= limit && within(el, 5.0);
    verdict(
        pass,
        format!(
            "{} cases, worst |z(t_c+)| = {:.6e} = {:.9} x 0.9J ({:?}, delay {}), {el:?}",
            rep.checked, rep.worst, rep.worst_ratio, rep.worst_mode, rep.worst_delay
        ),
    )
}

fn zeno_freeness() -> Verdict {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut worst_margin = f64::INFINITY;
    let mut triggers = 0;
    let mut bad = Vec::new();
    for run_no in 0..20 {
        let mut cfg = SimConfig::scalar_default();
        if let SystemSpec::Scalar(s) = &mut cfg.system {
            s.a = rng.gen_range(2.0..8.0);
            s.b = rng.gen_range(1.0..3.0);
        }
        cfg.horizon = 5.0;
        cfg.step = 0.005;
        cfg.disturbance.bound = rng.gen_range(0.0..0.2);
        cfg.disturbance.kind = if run_no % 2 == 0 { DisturbanceKind::Adversarial } else { DisturbanceKind::Uniform };
        cfg.delay.kind = if rng.gen_bool(0.5) { DelayKind::Constant } else { DelayKind::Uniform };
        cfg.delay.gamma = rng.gen_range(1..=20) as f64 * cfg.step;
        cfg.delay.seed = rng.gen();
        cfg.disturbance.seed = rng.gen();
        let out = run(&cfg).unwrap();
        let (a, m) = (out.plant.a, out.plant.m);
        let bound = ((out.design.j + m / a) / (0.9 * out.design.j + m / a)).ln() / a - cfg.step;
        for w in out.trace.events.windows(2) {
            let gap = w[1].t_s - w[0].t_s;
            worst_margin = worst_margin.min(gap - bound);
            if gap < bound {
                bad.push((run_no, w[1].k));
            }
        }
        triggers += out.trace.events.len();
    }
    let el = t.elapsed();
    let pass = bad.is_empty() && triggers > 20 && within(el, 30.0);
    verdict(
        pass,
        format!("{triggers} triggers, smallest interval margin {worst_margin:.6} s, failures {bad:?}, {el:?}"),
    )
}

fn rate_bounds() -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for sc in SCENARIOS {
        let cfg = SimConfig::pendulum(sc);
        let out = run(&cfg).unwrap();
        let ok_tr = out.rates.r_tr <= out.rtr_bound + 1.0 / cfg.horizon;
        let ok_s = out.rates.r_s <= out.design.bits as f64 * out.rtr_bound;
        pass &= ok_tr && ok_s && out.rates.triggers > 0;
        lines.push(format!(
            "{sc}: R_tr {:.4} <= {:.4}, R_s {:.4} <= {:.4}",
            out.rates.r_tr,
            out.rtr_bound + 1.0 / cfg.horizon,
            out.rates.r_s,
            out.design.bits as f64 * out.rtr_bound
        ));
    }
    verdict(pass, lines.join("; "))
}

fn rate_curve_shape() -> Verdict {
    let t = Instant::now();
    let p = PlantParams::new(5.5651, 1.0, 0.2, 1.0).unwrap();
    let (rho0, b, rule) = (0.1, 1.0001, JRule::RATE_CURVE);
    let grid: Vec<f64> = (1..=200).map(|i| i as f64 * 1e-3).collect();
    let rows = design::rate_curve_sweep(&p, rho0, b, rule, &grid).unwrap();
    let zero_prefix = rows.iter().take_while(|r| r.rs_bound == 0.0).count();
    let monotone = rows.windows(2).all(|w| w[1].rs_bound >= w[0].rs_bound);
    let threshold = datarate_threshold(p.a);
    let above = rows.iter().position(|r| r.rs_bound > threshold).unwrap_or(rows.len());
    let crossing = if above > 0 && above < rows.len() {
        bisect_crossing(
            |g| rate_curve_point(&p, rho0, b, rule, g).map(|r| r.rs_bound),
            threshold,
            rows[above - 1].gamma,
            rows[above].gamma,
            1e-13,
        )
        .ok()
    } else {
        None
    };
    let el = t.elapsed();
    let j0 = min_j(&p, rho0, 0.001) + 0.1;
    let pass = zero_prefix > 0
        && zero_prefix < rows.len()
        && monotone
        && (threshold - 8.02877).abs() < 1e-4
        && crossing.is_some_and(|g| (g - CROSSING_GAMMA).abs() < CROSSING_TOL)
        && within(el, 5.0);
    verdict(
        pass,
        format!(
            "zero for {zero_prefix} grid points (J(0.001) = {j0:.6}), non-decreasing: {monotone}, \
             crosses {threshold:.6} bits/s at gamma* = {crossing:?}, {el:?}"
        ),
    )
}

fn boundedness() -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for sc in SCENARIOS {
        let out = run(&SimConfig::pendulum(sc)).unwrap();
        let cert = &out.certificate;
        let failures = cert.check(&out.trace);
        let finite = out.trace.rows.iter().all(|r| r.phys.iter().all(|x| x.is_finite()));
        let ratio = cert.late_ratio(&out.trace);
        let csv = etstab::sim::output::trace_csv(&out.trace);
        let ok = failures.is_empty()
            && finite
            && cert.t0 < out.config.horizon
            && ratio <= 1.0
            && csv.lines().count() == out.trace.rows.len() + 1;
        pass &= ok;
        lines.push(format!("{sc}: T0 = {}, max |s_j|/kappa_j after T0 = {ratio:.4}", cert.t0));
    }
    verdict(pass, lines.join("; "))
}

fn diagonalization() -> Verdict {
    let t = Instant::now();
    let m = PendulumModel::case_study(MatrixSource::Physical).unwrap();
    let err = |got: &[f64], want: &[f64]| got.iter().zip(want).map(|(g, w)| (g - w).abs()).fold(0.0, f64::max);
    let e_eig = err(m.eigvals.as_slice(), &printed::EIGENVALUES);
    let e_b = err(m.b_modal.as_slice(), &printed::B_MODAL);
    let kt: Vec<f64> = m.k_modal.iter().copied().collect();
    let e_k = err(&kt, &printed::K_MODAL);
    let el = t.elapsed();
    let pass = e_eig < PRINTED_TOL && e_b < PRINTED_TOL && e_k < PRINTED_TOL && within(el, 1.0);
    verdict(
        pass,
        format!(
            "max error: eigenvalues {e_eig:.2e}, modal input {e_b:.2e}, modal gain {e_k:.2e} \
             (computed modal gain {kt:?}), {el:?}"
        ),
    )
}

fn codec_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut pairs, mut ambiguous, mut out_of_cell) = (0, 0, 0);
    for _ in 0..10 {
        let p = PlantParams::new(rng.gen_range(0.5..10.0), 1.0, rng.gen_range(0.0..0.3), 1.0).unwrap();
        let rho0 = rng.gen_range(0.1..0.95);
        let gamma = rng.gen_range(0.01..0.3);
        let j = min_j(&p, rho0, gamma) + rng.gen_range(0.001..0.2);
        let d = build_design(&p, j, rho0, 1.0001, gamma).unwrap();
        for _ in 0..10_000 {
            let t_s = rng.gen_range(0.0..1e3);
            let delay = rng.gen_range(0.0..=gamma);
            let pkt = encode(t_s, if rng.gen() { Sign::Plus } else { Sign::Minus }, &d);
            pairs += 1;
            match decode(&pkt, t_s + delay, &d) {
                Ok(q) if (t_s - q).abs() <= d.delta * (1.0 + CONTRACT_EPS) => {}
                Ok(_) => out_of_cell += 1,
                Err(_) => ambiguous += 1,
            }
        }
    }
    verdict(
        ambiguous == 0 && out_of_cell == 0,
        format!("{pairs} pairs, {ambiguous} decode errors, {out_of_cell} outside one cell"),
    )
}

fn etstab(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_etstab"))
        .args(args)
        .arg("--out")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn determinism() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let mut same = true;
    let mut checked = 0;
    for (name, args) in [
        ("a", vec!["simulate", "--scenario", "a", "--seed", "7"]),
        ("c", vec!["simulate", "--scenario", "c"]),
        ("scalar", vec!["simulate", "--system", "scalar", "--disturbance", "adversarial"]),
    ] {
        let first = tmp.path().join(format!("{name}-1"));
        let second = tmp.path().join(format!("{name}-2"));
        let third = tmp.path().join(format!("{name}-3"));
        assert!(etstab(&args, &first).status.success());
        let manifest = first.join("manifest.txt");
        let replay = ["simulate", "--config", manifest.to_str().unwrap()];
        assert!(etstab(&replay, &second).status.success());
        assert!(etstab(&replay, &third).status.success());
        for file in ["trace.csv", "events.csv", "stats.txt", "manifest.txt"] {
            let read = |d: &Path| std::fs::read(d.join(file)).unwrap();
            same &= read(&first) == read(&second) && read(&second) == read(&third);
            checked += 1;
        }
    }
    verdict(same, format!("{checked} files compared across replays of identical manifests"))
}

fn sensor_mirror() -> Verdict {
    let mut lines = Vec::new();
    let mut pass = true;
    for sc in SCENARIOS {
        let mut cfg = SimConfig::pendulum(sc);
        let ok = run_sensor_mirror(&cfg).unwrap();
        cfg.replica = ReplicaMode::SendTimeFault;
        let fault = run_sensor_mirror(&cfg).unwrap();
        pass &= ok.consistent() && ok.triggers > 0 && !fault.consistent();
        lines.push(format!(
            "{sc}: divergence {} over {} samples, fault divergence {:.3e}",
            ok.max_divergence, ok.grid_points, fault.max_divergence
        ));
    }
    verdict(pass, lines.join("; "))
}

fn main() {
    let criteria: [(&str, Check); 10] = [
        ("packet sizes", packet_sizes),
        ("jump contract", jump_contract),
        ("zeno-freeness", zeno_freeness),
        ("rate bounds", rate_bounds),
        ("rate curve shape", rate_curve_shape),
        ("boundedness", boundedness),
        ("diagonalization", diagonalization),
        ("codec round trip", codec_round_trip),
        ("determinism", determinism),
        ("sensor mirror", sensor_mirror),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = panic::catch_unwind(check).unwrap_or_else(|_| verdict(false, "panicked"));
        if !v.pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<18} {}  {}",
            i + 1,
            name,
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
