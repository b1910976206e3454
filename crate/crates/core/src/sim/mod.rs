//! Closed-loop simulation: plant, estimator, sensor replica, codec and channel
//! composed on a fixed recording grid.
//!
//! Triggers and receptions are resolved at their exact instants inside a grid
//! step. The error between receptions obeys `dz/dt = a z + w` regardless of the
//! input, so the instant `|z|` reaches `J` has a closed form, and the channel
//! delivers at `t_s + delay` rather than at the next grid point.

mod certificate;
mod config;
pub mod contract;
mod engine;
pub mod output;
pub mod pendulum;
mod rates;
mod scenario;

pub use certificate::{impulse_l1, Certificate};
pub use config::{
    parse_kv, Actuation, DisturbanceFrame, DisturbanceKind, DisturbanceSpec, PendulumSpec, ReplicaMode,
    ScalarSpec, Scenario, SimConfig, SystemSpec,
};
pub use engine::{time_to_threshold, EventRecord, SimTrace, TraceRow, Violation};
pub use rates::{measure_rates, rates_from_events, RateStats};
pub use scenario::{run, run_pendulum, run_scalar, run_sensor_mirror, triggered_plant, MirrorReport, RunSummary, SimOutcome};
