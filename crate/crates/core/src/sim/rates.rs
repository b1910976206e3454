//! Finite-horizon transmission and triggering rates.

use crate::sim::engine::SimTrace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateStats {
    pub triggers: usize,
    pub total_bits: u64,
    /// From the first trigger to the horizon.
    pub span: f64,
    /// Bits per second.
    pub r_s: f64,
    /// Triggers per second.
    pub r_tr: f64,
}

/// Rates over `[t_s^1, horizon]`: total bits (triggers) divided by the sum of
/// triggering intervals with the last one closed at the horizon. Zero when there
/// are no triggers.
pub fn rates_from_events(send_times: &[f64], bits: &[u32], horizon: f64) -> RateStats {
    let total_bits = bits.iter().map(|&b| b as u64).sum();
    let triggers = send_times.len();
    let span = send_times.first().map_or(0.0, |t0| horizon - t0);
    let (r_s, r_tr) = if triggers == 0 || !(span > 0.0) {
        (0.0, 0.0)
    } else {
        (total_bits as f64 / span, triggers as f64 / span)
    };
    RateStats {
        triggers,
        total_bits,
        span: span.max(0.0),
        r_s,
        r_tr,
    }
}

pub fn measure_rates(trace: &SimTrace) -> RateStats {
    let times: Vec<f64> = trace.events.iter().map(|e| e.t_s).collect();
    let bits: Vec<u32> = trace.events.iter().map(|e| e.bits).collect();
    rates_from_events(&times, &bits, trace.horizon)
}
