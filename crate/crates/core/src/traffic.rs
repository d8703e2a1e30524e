//! Reproducible packet-arrival streams.
//!
//! Every device draws from its own ChaCha stream seeded from
//! `(scenario_seed, device_id)`, so adding or removing a device never
//! perturbs the arrivals of the others.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::types::{ArrivalPattern, DeviceId, DeviceProfile};

/// Arrival instants (seconds) of one device within `[0, duration)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalStream {
    pub device: DeviceId,
    pub instants: Vec<f64>,
}

/// SplitMix64 finalizer, used to derive independent per-device seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn device_seed(scenario_seed: u64, id: DeviceId) -> u64 {
    mix_seed(scenario_seed, id as u64 + 1)
}

/// Unbounded, lazily evaluated arrival process.
#[derive(Debug, Clone)]
pub struct ArrivalSource {
    rng: ChaCha8Rng,
    kind: SourceKind,
}

#[derive(Debug, Clone)]
enum SourceKind {
    Silent,
    Poisson { rate: f64, t: f64 },
    Periodic { interval: f64, jitter: f64, shift: f64, k: u64 },
}

impl ArrivalSource {
    pub fn poisson(rate: f64, seed: u64) -> Self {
        let kind = if rate > 0.0 { SourceKind::Poisson { rate, t: 0.0 } } else { SourceKind::Silent };
        Self { rng: ChaCha8Rng::seed_from_u64(seed), kind }
    }

    /// Periodic source whose k-th arrival (k >= 1) is at
    /// `(k + u_k) / rate - shift` with `u_k ~ U[-jitter, jitter]`.
    /// With `random_phase` the shift is drawn uniformly from one interval;
    /// otherwise it is zero and the first arrival sits at `1 / rate`.
    pub fn quasi_periodic(rate: f64, jitter: f64, seed: u64, random_phase: bool) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        if !(rate > 0.0) {
            return Self { rng, kind: SourceKind::Silent };
        }
        let interval = 1.0 / rate;
        let shift = if random_phase { rng.random::<f64>() * interval } else { 0.0 };
        Self { rng, kind: SourceKind::Periodic { interval, jitter, shift, k: 0 } }
    }

    pub fn for_device(profile: &DeviceProfile, scenario_seed: u64, random_phase: bool) -> Self {
        let seed = device_seed(scenario_seed, profile.id);
        match profile.pattern {
            ArrivalPattern::Poisson => Self::poisson(profile.rate, seed),
            ArrivalPattern::QuasiPeriodic { jitter } => Self::quasi_periodic(profile.rate, jitter, seed, random_phase),
        }
    }

    /// Next arrival instant in seconds; never decreases. `None` for a silent source.
    pub fn next_arrival(&mut self) -> Option<f64> {
        match &mut self.kind {
            SourceKind::Silent => None,
            SourceKind::Poisson { rate, t } => {
                let u: f64 = self.rng.random();
                *t += -(1.0 - u).ln() / *rate;
                Some(*t)
            }
            SourceKind::Periodic { interval, jitter, shift, k } => loop {
                *k += 1;
                let u: f64 = if *jitter > 0.0 { self.rng.random_range(-*jitter..=*jitter) } else { 0.0 };
                let at = (*k as f64 + u) * *interval - *shift;
                if at >= 0.0 {
                    return Some(at);
                }
            },
        }
    }

    fn collect_until(mut self, duration: f64) -> Vec<f64> {
        let mut out = Vec::new();
        while let Some(t) = self.next_arrival() {
            if t >= duration {
                break;
            }
            out.push(t);
        }
        out
    }
}

pub fn gen_poisson(rate: f64, duration: f64, seed: u64) -> Vec<f64> {
    ArrivalSource::poisson(rate, seed).collect_until(duration)
}

/// Quasi-periodic instants without a random phase. Jitter below 0.5 keeps
/// the instants strictly increasing, so no re-sort is needed.
pub fn gen_quasi_periodic(rate: f64, jitter: f64, duration: f64, seed: u64) -> Vec<f64> {
    assert!((0.0..0.5).contains(&jitter), "jitter fraction must lie in [0, 0.5)");
    ArrivalSource::quasi_periodic(rate, jitter, seed, false).collect_until(duration)
}

impl ArrivalStream {
    pub fn for_device(profile: &DeviceProfile, duration: f64, scenario_seed: u64, random_phase: bool) -> Self {
        let instants = ArrivalSource::for_device(profile, scenario_seed, random_phase).collect_until(duration);
        Self { device: profile.id, instants }
    }
}

/// Writes streams as `device_id,timestamp` rows under a header line.
pub fn write_streams<W: Write>(mut w: W, streams: &[ArrivalStream]) -> std::io::Result<()> {
    writeln!(w, "device_id,timestamp")?;
    for s in streams {
        for t in &s.instants {
            writeln!(w, "{},{}", s.device, t)?;
        }
    }
    Ok(())
}

/// Reads rows written by [`write_streams`], grouping consecutive rows per device.
pub fn read_streams<R: BufRead>(r: R) -> Result<Vec<ArrivalStream>> {
    let mut out: Vec<ArrivalStream> = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<stream>", e))?;
        if n == 0 || line.trim().is_empty() {
            continue;
        }
        let bad = || Error::Parse { path: "<stream>".into(), message: format!("line {}: `{line}`", n + 1) };
        let (id, t) = line.split_once(',').ok_or_else(bad)?;
        let id: DeviceId = id.trim().parse().map_err(|_| bad())?;
        let t: f64 = t.trim().parse().map_err(|_| bad())?;
        match out.last_mut() {
            Some(s) if s.device == id => s.instants.push(t),
            _ => out.push(ArrivalStream { device: id, instants: vec![t] }),
        }
    }
    Ok(out)
}
