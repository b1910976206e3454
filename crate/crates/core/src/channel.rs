//! Single-packet delay channel. A packet submitted at `t_s` is delivered
//! unmodified at `t_c = t_s + delay` with `0 <= delay <= gamma`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::codec::Packet;
use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DelayKind {
    /// Always `gamma`.
    Constant,
    /// Uniform on `[0, gamma]`.
    Uniform,
    /// Alias of `Constant`; reads better in worst-case configs.
    AdversarialMax,
}

impl FromStr for DelayKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constant" => Ok(Self::Constant),
            "uniform" | "uniform-random" => Ok(Self::Uniform),
            "adversarial-max" | "max" => Ok(Self::AdversarialMax),
            other => Err(Error::Config(format!(
                "unknown delay kind `{other}` (expected constant, uniform, adversarial-max)"
            ))),
        }
    }
}

impl fmt::Display for DelayKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Constant => "constant",
            Self::Uniform => "uniform",
            Self::AdversarialMax => "adversarial-max",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelayPolicy {
    pub kind: DelayKind,
    pub gamma: f64,
    pub seed: u64,
}

impl DelayPolicy {
    pub fn new(kind: DelayKind, gamma: f64, seed: u64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(invalid("delay.gamma", format!("must be finite and >= 0, got {gamma}")));
        }
        Ok(Self { kind, gamma, seed })
    }
}

/// Channel state for one run: the policy's RNG stream and at most one packet in flight.
#[derive(Debug, Clone)]
pub struct Channel {
    policy: DelayPolicy,
    rng: ChaCha8Rng,
    in_flight: Option<(Packet, f64)>,
}

impl Channel {
    pub fn new(policy: DelayPolicy) -> Self {
        Self {
            policy,
            rng: ChaCha8Rng::seed_from_u64(policy.seed),
            in_flight: None,
        }
    }

    pub fn policy(&self) -> &DelayPolicy {
        &self.policy
    }

    pub fn in_flight(&self) -> bool {
        self.in_flight.is_some()
    }

    /// Scheduled delivery time of the packet in flight.
    pub fn delivery_time(&self) -> Option<f64> {
        self.in_flight.as_ref().map(|(_, t_c)| *t_c)
    }

    /// Draws the next delay from the policy.
    pub fn sample_delay(&mut self) -> f64 {
        let gamma = self.policy.gamma;
        match self.policy.kind {
            DelayKind::Constant | DelayKind::AdversarialMax => gamma,
            DelayKind::Uniform => self.rng.gen_range(0.0..=gamma),
        }
    }

    /// Accepts `pkt` at `t_s` and returns its scheduled delivery time.
    pub fn submit(&mut self, pkt: Packet, t_s: f64) -> Result<f64> {
        if self.in_flight.is_some() {
            return Err(Error::ChannelBusy { t: t_s });
        }
        let t_c = t_s + self.sample_delay();
        self.in_flight = Some((pkt, t_c));
        Ok(t_c)
    }

    /// Returns the packet (with its delivery time) once `t >= t_c`.
    pub fn poll(&mut self, t: f64) -> Option<(Packet, f64)> {
        match self.in_flight {
            Some((_, t_c)) if t_c <= t => self.in_flight.take(),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::Sign;

    fn pkt(t: f64) -> Packet {
        Packet {
            sign: Sign::Plus,
            cell_index: None,
            bits: 1,
            meta_t_send: t,
        }
    }

    #[test]
    fn constant_delay() {
        let mut ch = Channel::new(DelayPolicy::new(DelayKind::Constant, 0.1, 0).unwrap());
        let t_c = ch.submit(pkt(1.0), 1.0).unwrap();
        assert!((t_c - 1.1).abs() < 1e-15);
        assert!(ch.poll(1.05).is_none());
        let (p, tc) = ch.poll(t_c).unwrap();
        assert_eq!((p.meta_t_send, tc), (1.0, t_c));
        assert!(!ch.in_flight());
    }

    #[test]
    fn zero_gamma_delivers_immediately() {
        let mut ch = Channel::new(DelayPolicy::new(DelayKind::Uniform, 0.0, 3).unwrap());
        let t_c = ch.submit(pkt(2.0), 2.0).unwrap();
        assert_eq!(t_c, 2.0);
        assert!(ch.poll(2.0).is_some());
    }

    #[test]
    fn busy_channel_rejects_submit() {
        let mut ch = Channel::new(DelayPolicy::new(DelayKind::AdversarialMax, 0.1, 0).unwrap());
        ch.submit(pkt(0.0), 0.0).unwrap();
        assert_eq!(ch.submit(pkt(0.01), 0.01), Err(Error::ChannelBusy { t: 0.01 }));
    }

    #[test]
    fn grid_polling_delivers_at_next_grid_time() {
        let mut ch = Channel::new(DelayPolicy::new(DelayKind::Constant, 0.0001, 0).unwrap());
        let t_c = ch.submit(pkt(1.0), 1.0).unwrap();
        assert!((t_c - 1.0001).abs() < 1e-12);
        let h = 0.005;
        let mut delivered_at = None;
        for n in 0..=300 {
            let t = n as f64 * h;
            if ch.poll(t).is_some() {
                delivered_at = Some(t);
                break;
            }
        }
        assert!((delivered_at.unwrap() - 1.005).abs() < 1e-12);
    }

    #[test]
    fn seeded_streams_are_reproducible() {
        let policy = DelayPolicy::new(DelayKind::Uniform, 0.1, 42).unwrap();
        let mut a = Channel::new(policy);
        let mut b = Channel::new(policy);
        let xs: Vec<f64> = (0..100).map(|_| a.sample_delay()).collect();
        let ys: Vec<f64> = (0..100).map(|_| b.sample_delay()).collect();
        assert_eq!(xs, ys);
        let mut c = Channel::new(DelayPolicy { seed: 43, ..policy });
        assert_ne!(xs[0], c.sample_delay());
    }

    #[test]
    fn kinds_parse() {
        assert_eq!("uniform".parse::<DelayKind>().unwrap(), DelayKind::Uniform);
        assert_eq!("constant".parse::<DelayKind>().unwrap(), DelayKind::Constant);
        assert!("gaussian".parse::<DelayKind>().is_err());
        assert!(DelayPolicy::new(DelayKind::Uniform, -0.1, 0).is_err());
    }
}
