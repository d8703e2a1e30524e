//! TOML run configuration with sections `devices`, `params`, `qos`, `sim`
//! and `train`.
//!
//! ```toml
//! [devices]
//! generator = { counts = [50, 450, 500], rate_min = 1.0, rate_max = 5.0, poisson_fraction = 0.5 }
//!
//! [params]
//! n_m = 8
//! r_h = 5
//! r_r = 45
//! r_l = 270
//!
//! [qos]
//! delta = [1e-3, 10e-3, 80e-3]
//! rho = [0.015, 0.06, 0.10]
//!
//! [sim]
//! duration = 2000.0
//! ```
//!
//! Devices may instead be listed inline:
//!
//! ```toml
//! [[devices.list]]
//! id = 1
//! class = "HP"
//! rate = 2.5
//! pattern = { kind = "poisson" }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::assigner::GUARD_LADDER;
use crate::error::{Error, Result};
use crate::scenario::GeneratorSpec;
use crate::sim::SimOptions;
use crate::surrogate::{AdamConfig, DatasetConfig, ScenarioSampler, TrainConfig, DEFAULT_INTERVALS};
use crate::types::{DeviceProfile, ProtocolParams, QosSpec, Scenario, DEFAULT_T_M, DEFAULT_T_X};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub devices: Option<DevicesSection>,
    pub params: Option<ParamsSection>,
    #[serde(default = "QosSpec::industrial_default")]
    pub qos: QosSpec,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub train: TrainSection,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DevicesSection {
    pub generator: Option<GeneratorSpec>,
    pub list: Option<Vec<DeviceProfile>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub n_m: u32,
    pub r_h: u32,
    pub r_r: u32,
    pub r_l: u32,
    #[serde(default = "default_t_m")]
    pub t_m: f64,
    #[serde(default = "default_t_x")]
    pub t_x: f64,
}

fn default_t_m() -> f64 {
    DEFAULT_T_M
}

fn default_t_x() -> f64 {
    DEFAULT_T_X
}

impl From<ParamsSection> for ProtocolParams {
    fn from(p: ParamsSection) -> Self {
        Self { n_m: p.n_m, r_h: p.r_h, r_r: p.r_r, r_l: p.r_l, t_m: p.t_m, t_x: p.t_x }
    }
}

impl From<ProtocolParams> for ParamsSection {
    fn from(p: ProtocolParams) -> Self {
        Self { n_m: p.n_m, r_h: p.r_h, r_r: p.r_r, r_l: p.r_l, t_m: p.t_m, t_x: p.t_x }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    /// Simulated seconds.
    pub duration: f64,
    pub buffer: bool,
    pub synccs: bool,
    /// Share of the run discarded as warm-up.
    pub warmup_fraction: f64,
    pub random_phase: bool,
    pub guard_ladder: Vec<f64>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            duration: 100.0,
            buffer: true,
            synccs: true,
            warmup_fraction: 0.05,
            random_phase: true,
            guard_ladder: GUARD_LADDER.to_vec(),
        }
    }
}

impl SimSection {
    pub fn options(&self, seed: u64) -> SimOptions {
        SimOptions {
            buffer: self.buffer,
            synccs: self.synccs,
            warmup: self.warmup_fraction * self.duration,
            random_phase: self.random_phase,
            ..SimOptions::new(self.duration, seed)
        }
    }
}

/// Dataset generation and training settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub profiles: usize,
    pub sim_duration: f64,
    pub sims_per_entry: usize,
    pub intervals: usize,
    pub hp: [usize; 2],
    pub rp: [usize; 2],
    pub lp: [usize; 2],
    pub rate_min: f64,
    pub rate_max: f64,
    pub poisson_fraction: f64,
    pub jitter: f64,
    /// Parameter settings labelled per profile, and the selector's candidates.
    pub grid: Vec<ParamsSection>,
    pub epochs: usize,
    pub batch: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub split: [f64; 2],
}

impl Default for TrainSection {
    fn default() -> Self {
        let s = ScenarioSampler::default();
        let t = TrainConfig::default();
        let d = DatasetConfig::new(0, 0);
        Self {
            profiles: 1000,
            sim_duration: d.sim_duration,
            sims_per_entry: d.sims_per_entry,
            intervals: DEFAULT_INTERVALS,
            hp: s.hp,
            rp: s.rp,
            lp: s.lp,
            rate_min: s.rate_min,
            rate_max: s.rate_max,
            poisson_fraction: s.poisson_fraction,
            jitter: s.jitter,
            grid: d.grid.into_iter().map(ParamsSection::from).collect(),
            epochs: t.epochs,
            batch: t.batch,
            lr: t.adam.lr,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            eps: t.adam.eps,
            split: t.split,
        }
    }
}

impl Config {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse { path: path.into(), message: e.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    fn missing(section: &str) -> Error {
        Error::Parse { path: PathBuf::from("<config>"), message: format!("missing section [{section}]") }
    }

    pub fn params(&self) -> Result<ProtocolParams> {
        self.params.map(Into::into).ok_or_else(|| Self::missing("params"))
    }

    /// Builds the scenario from the inline list or the generator.
    pub fn scenario(&self, seed: u64) -> Result<Scenario> {
        let dev = self.devices.as_ref().ok_or_else(|| Self::missing("devices"))?;
        match (&dev.list, &dev.generator) {
            (Some(list), None) => Ok(Scenario::new(list.clone(), self.qos)),
            (None, Some(g)) => g.generate(self.qos, seed),
            _ => Err(Error::Parse {
                path: PathBuf::from("<config>"),
                message: "[devices] needs exactly one of `list` or `generator`".into(),
            }),
        }
    }

    pub fn grid(&self) -> Vec<ProtocolParams> {
        self.train.grid.iter().copied().map(Into::into).collect()
    }

    pub fn dataset_config(&self, seed: u64) -> DatasetConfig {
        let t = &self.train;
        DatasetConfig {
            profiles: t.profiles,
            grid: self.grid(),
            sampler: ScenarioSampler {
                hp: t.hp,
                rp: t.rp,
                lp: t.lp,
                rate_min: t.rate_min,
                rate_max: t.rate_max,
                poisson_fraction: t.poisson_fraction,
                jitter: t.jitter,
                qos: self.qos,
            },
            sim_duration: t.sim_duration,
            sims_per_entry: t.sims_per_entry,
            intervals: t.intervals,
            guard_ladder: self.sim.guard_ladder.clone(),
            seed,
        }
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            epochs: t.epochs,
            batch: t.batch,
            adam: AdamConfig { lr: t.lr, beta1: t.beta1, beta2: t.beta2, eps: t.eps },
            split: t.split,
            seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::PriorityClass;

    const FIG5A: &str = r#"
[devices]
generator = { counts = [50, 450, 500], rate_min = 1.0, rate_max = 5.0, poisson_fraction = 0.5 }

[params]
n_m = 8
r_h = 5
r_r = 45
r_l = 270

[sim]
duration = 2000.0
"#;

    #[test]
    fn generator_config() {
        let c = Config::parse(FIG5A, Path::new("t.toml")).unwrap();
        let p = c.params().unwrap();
        assert_eq!((p.n_m, p.r_l, p.t_m), (8, 270, DEFAULT_T_M));
        assert_eq!(c.qos, QosSpec::industrial_default());
        let s = c.scenario(1).unwrap();
        assert_eq!(s.devices.len(), 1000);
        assert_eq!(c.sim.options(3).warmup, 100.0);
        assert_eq!(c.grid().len(), 6);
    }

    #[test]
    fn inline_devices() {
        let text = r#"
[[devices.list]]
id = 1
class = "HP"
rate = 2.5
pattern = { kind = "poisson" }

[[devices.list]]
id = 2
class = "LP"
rate = 1.0
pattern = { kind = "quasi_periodic", jitter = 0.05 }
"#;
        let c = Config::parse(text, Path::new("t.toml")).unwrap();
        let s = c.scenario(0).unwrap();
        assert_eq!(s.devices[1].class, PriorityClass::Lp);
        assert!(c.params().is_err());
    }

    #[test]
    fn errors_name_key_and_position() {
        let text = "[params]\nn_m = 8\nr_h = 5\nr_l = 270\n";
        let msg = Config::parse(text, Path::new("t.toml")).unwrap_err().to_string();
        assert!(msg.contains("r_r"), "{msg}");
        let msg = Config::parse("[sim]\nduration = \"long\"\n", Path::new("t.toml")).unwrap_err().to_string();
        assert!(msg.contains("line 2"), "{msg}");
        let msg = Config::parse("[sim]\nspeed = 3\n", Path::new("t.toml")).unwrap_err().to_string();
        assert!(msg.contains("speed"), "{msg}");
    }
}
