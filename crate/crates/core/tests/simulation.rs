use etstab::channel::DelayKind;
use etstab::sim::output::{events_csv, trace_csv};
use etstab::sim::{
    run, run_sensor_mirror, DisturbanceFrame, DisturbanceKind, ReplicaMode, Scenario, SimConfig, SystemSpec,
};
use etstab::Error;
use proptest::prelude::*;

fn scalar(f: impl FnOnce(&mut SimConfig)) -> SimConfig {
    let mut cfg = SimConfig::scalar_default();
    f(&mut cfg);
    cfg
}

#[test]
fn case_study_runs_hold_every_invariant() {
    for sc in [Scenario::A, Scenario::B, Scenario::C] {
        let out = run(&SimConfig::pendulum(sc)).unwrap();
        assert!(out.passed(), "{sc}: {:?}", out.trace.first_violation());
        assert!(out.rates.triggers > 0);
        for e in out.trace.events.iter().filter(|e| e.delivered()) {
            assert!(e.z_post.unwrap().abs() <= 0.9 * out.design.j + 1e-9 * out.design.j);
            assert!(e.delay() <= out.design.gamma);
        }
        assert_eq!(out.trace.mirror_divergence, 0.0);
    }
}

#[test]
fn constructive_sizes() {
    let bits: Vec<u32> = [Scenario::A, Scenario::B, Scenario::C]
        .iter()
        .map(|&sc| run(&SimConfig::pendulum(sc)).unwrap().design.bits)
        .collect();
    assert_eq!(bits, vec![1, 1, 4]);
}

#[test]
fn physical_frame_design_is_larger() {
    let mut cfg = SimConfig::pendulum(Scenario::C);
    cfg.disturbance.frame = DisturbanceFrame::Physical;
    let out = run(&cfg).unwrap();
    assert!(out.plant.m > 0.05 * 3.39);
    assert_eq!(out.design.bits, 5);
    assert_eq!(out.closed_form.integer, 4);
    assert!(out.passed(), "{:?}", out.trace.first_violation());
}

#[test]
fn exact_initial_estimate_never_triggers() {
    let cfg = scalar(|c| {
        c.disturbance.kind = DisturbanceKind::Zero;
        c.disturbance.bound = 0.0;
        c.delay.gamma = c.step;
        if let SystemSpec::Scalar(s) = &mut c.system {
            s.xhat0 = Some(s.x0);
        }
    });
    let out = run(&cfg).unwrap();
    assert_eq!(out.rates.triggers, 0);
    assert!(out.trace.rows.iter().all(|r| r.z == 0.0));
    assert_eq!((out.rates.r_s, out.rates.r_tr), (0.0, 0.0));
    assert!(out.passed());
}

#[test]
fn zero_disturbance_override_reduces_to_the_undisturbed_case() {
    let mut b = SimConfig::pendulum(Scenario::B);
    b.disturbance.kind = DisturbanceKind::Zero;
    b.disturbance.bound = 0.0;
    let a = run(&SimConfig::pendulum(Scenario::A)).unwrap();
    let b = run(&b).unwrap();
    assert_eq!(trace_csv(&a.trace), trace_csv(&b.trace));
    assert_eq!(events_csv(&a.trace), events_csv(&b.trace));
}

#[test]
fn adversarial_constant_delay_keeps_contract_and_error_bound() {
    let cfg = scalar(|c| {
        c.disturbance.kind = DisturbanceKind::Adversarial;
        c.delay.kind = DelayKind::Constant;
    });
    let out = run(&cfg).unwrap();
    assert!(out.rates.triggers > 5);
    assert!(out.passed(), "{:?}", out.trace.first_violation());
    let zmax = out.design.z_max();
    assert!(out.trace.rows.iter().all(|r| r.z.abs() <= zmax));
}

#[test]
fn zero_order_hold_actuation_runs_clean() {
    let mut cfg = SimConfig::pendulum(Scenario::C);
    cfg.actuation = etstab::sim::Actuation::ZeroOrderHold;
    let out = run(&cfg).unwrap();
    assert_eq!(out.trace.mirror_divergence, 0.0);
    assert!(out.trace.violations.iter().all(|v| v.invariant != "jump-contract"));
}

#[test]
fn mirror_fault_is_detected() {
    for sc in [Scenario::A, Scenario::B, Scenario::C] {
        let mut cfg = SimConfig::pendulum(sc);
        assert!(run_sensor_mirror(&cfg).unwrap().consistent());
        cfg.replica = ReplicaMode::SendTimeFault;
        let rep = run_sensor_mirror(&cfg).unwrap();
        assert!(!rep.consistent(), "{sc}");
        let out = run(&cfg).unwrap();
        assert_eq!(out.trace.first_violation().unwrap().invariant, "sensor-mirror");
    }
}

#[test]
fn runs_are_bit_reproducible() {
    let cfg = SimConfig::pendulum(Scenario::C);
    let (x, y) = (run(&cfg).unwrap(), run(&cfg).unwrap());
    assert_eq!(x.trace, y.trace);
    let mut other = cfg;
    other.delay.seed += 1;
    assert_ne!(run(&other).unwrap().trace.events, x.trace.events);
}

#[test]
fn config_errors() {
    let bad_gamma = scalar(|c| c.delay.gamma = 0.0);
    assert!(matches!(run(&bad_gamma), Err(Error::Config(_))));
    let bad_init = scalar(|c| {
        if let SystemSpec::Scalar(s) = &mut c.system {
            s.xhat0 = Some(s.x0 + 1.0);
        }
    });
    assert!(matches!(run(&bad_init), Err(Error::Config(_))));
    let infeasible = scalar(|c| c.j_rule = etstab::design::JRule::Fixed(1e-4));
    assert!(matches!(run(&infeasible), Err(Error::Infeasible { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Random scalar loops: every runtime invariant holds.
    #[test]
    fn random_scalar_runs_hold_invariants(
        a in 1.0f64..8.0, b in 0.5f64..3.0, m in 0.0f64..0.2, gamma_steps in 1u32..40,
        adversarial in any::<bool>(), constant in any::<bool>(), seed in 0u64..1000,
    ) {
        let cfg = scalar(|c| {
            if let SystemSpec::Scalar(s) = &mut c.system {
                s.a = a;
                s.b = b;
            }
            c.disturbance.bound = m;
            c.disturbance.kind = if adversarial { DisturbanceKind::Adversarial } else { DisturbanceKind::Uniform };
            c.delay.kind = if constant { DelayKind::Constant } else { DelayKind::Uniform };
            c.delay.gamma = gamma_steps as f64 * c.step;
            c.delay.seed = seed;
            c.disturbance.seed = seed + 1;
        });
        let out = match run(&cfg) {
            Err(Error::Infeasible { .. } | Error::Config(_)) => return Ok(()),
            other => other.unwrap(),
        };
        prop_assert!(out.passed(), "{:?}", out.trace.first_violation());
        prop_assert!(out.rates.r_tr <= out.rtr_bound + 1.0 / cfg.horizon);
    }
}
