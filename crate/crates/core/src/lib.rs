//! Event-triggered stabilization of linear time-invariant systems over a
//! digital channel with bounded, unknown delay and bounded disturbance.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`]: exact exponential discretization of the scalar plant and the
//!   controller-side estimator, plus the open-loop error growth bound.
//! * [`codec`]: the triggering rule, the sign + quantized-time packet codec and
//!   the jump update applied at reception.
//! * [`channel`]: a single-packet delay channel bounded by `gamma`.
//! * [`design`]: closed-form design and rate formulas (packet size, minimum
//!   inter-event time, triggering-rate bound, sufficient rate) and the rate
//!   curve sweep.
//! * [`sim`]: the closed-loop hybrid engine, the linearized cart-pendulum case
//!   study, rate accounting, the boundedness certificate and CSV/manifest I/O.
//!
//! ```
//! use etstab::{design, model::PlantParams};
//!
//! let plant = PlantParams::new(5.5651, 2.2513, 0.05, 0.1).unwrap();
//! let j = design::min_j(&plant, 0.9, 0.1) + 0.005;
//! let d = etstab::codec::build_design(&plant, j, 0.9, 1.0001, 0.1).unwrap();
//! assert_eq!(d.bits, 4);
//! ```

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod codec;
pub mod design;
mod error;
pub mod model;
pub mod sim;

pub use error::{Error, Result};
