//! Random scenario generation from counts, rate ranges and a pattern mix.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ArrivalPattern, DeviceProfile, PriorityClass, QosSpec, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    /// Devices per class, HP/RP/LP.
    pub counts: [usize; 3],
    /// Rates are drawn uniformly from `[rate_min, rate_max]`.
    pub rate_min: f64,
    pub rate_max: f64,
    /// Share of devices (picked at random over the whole population) with Poisson arrivals.
    pub poisson_fraction: f64,
    /// Jitter fraction of the remaining quasi-periodic devices.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
}

fn default_jitter() -> f64 {
    0.05
}

impl GeneratorSpec {
    pub fn new(counts: [usize; 3], rate_min: f64, rate_max: f64) -> Self {
        Self { counts, rate_min, rate_max, poisson_fraction: 1.0, jitter: 0.05 }
    }

    /// 1000 devices (50/450/500), rates in [1, 5] packets/s, half Poisson.
    pub fn industrial() -> Self {
        Self { counts: [50, 450, 500], rate_min: 1.0, rate_max: 5.0, poisson_fraction: 0.5, jitter: 0.05 }
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn check(&self) -> Result<()> {
        if !(self.rate_min > 0.0 && self.rate_max >= self.rate_min) {
            return Err(Error::InvalidScenario(format!("bad rate range [{}, {}]", self.rate_min, self.rate_max)));
        }
        if !(0.0..=1.0).contains(&self.poisson_fraction) {
            return Err(Error::InvalidScenario(format!("poisson_fraction {} outside [0, 1]", self.poisson_fraction)));
        }
        if !(0.0..0.5).contains(&self.jitter) {
            return Err(Error::InvalidScenario(format!("jitter {} outside [0, 0.5)", self.jitter)));
        }
        Ok(())
    }

    /// Devices get ids 1..=D in class order (HP first).
    pub fn generate(&self, qos: QosSpec, seed: u64) -> Result<Scenario> {
        self.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let total = self.total();
        let n_poisson = (self.poisson_fraction * total as f64).round() as usize;
        let mut poisson = vec![false; total];
        poisson[..n_poisson].fill(true);
        poisson.shuffle(&mut rng);

        let mut devices = Vec::with_capacity(total);
        for (class, &n) in PriorityClass::ALL.iter().zip(&self.counts) {
            for _ in 0..n {
                let id = devices.len() as u32 + 1;
                let rate = if self.rate_max > self.rate_min {
                    rng.random_range(self.rate_min..=self.rate_max)
                } else {
                    self.rate_min
                };
                let pattern = if poisson[id as usize - 1] {
                    ArrivalPattern::Poisson
                } else {
                    ArrivalPattern::QuasiPeriodic { jitter: self.jitter }
                };
                devices.push(DeviceProfile { id, class: *class, rate, pattern });
            }
        }
        Ok(Scenario::new(devices, qos))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn industrial_counts_and_ranges() {
        let sc = GeneratorSpec::industrial().generate(QosSpec::industrial_default(), 1).unwrap();
        assert_eq!(sc.devices.len(), 1000);
        assert_eq!(sc.class_count(PriorityClass::Hp), 50);
        assert_eq!(sc.class_count(PriorityClass::Rp), 450);
        assert_eq!(sc.class_count(PriorityClass::Lp), 500);
        let n_poisson = sc.devices.iter().filter(|d| d.pattern == ArrivalPattern::Poisson).count();
        assert_eq!(n_poisson, 500);
        assert!(sc.devices.iter().all(|d| (1.0..=5.0).contains(&d.rate)));
        assert!(sc.devices.iter().enumerate().all(|(i, d)| d.id as usize == i + 1));
    }

    #[test]
    fn deterministic_per_seed() {
        let g = GeneratorSpec::industrial();
        let q = QosSpec::industrial_default();
        assert_eq!(g.generate(q, 4).unwrap(), g.generate(q, 4).unwrap());
        assert_ne!(g.generate(q, 4).unwrap(), g.generate(q, 5).unwrap());
    }

    #[test]
    fn rejects_bad_specs() {
        let q = QosSpec::industrial_default();
        assert!(GeneratorSpec::new([1, 0, 0], 2.0, 1.0).generate(q, 0).is_err());
        let mut g = GeneratorSpec::new([1, 0, 0], 1.0, 2.0);
        g.jitter = 0.7;
        assert!(g.generate(q, 0).is_err());
    }
}
