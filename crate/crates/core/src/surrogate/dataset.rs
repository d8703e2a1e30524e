//! Training data: encoded profiles and parameter settings labelled with
//! assigner and simulator outcomes.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::encode::{encode_profile, feature_names, DEFAULT_INTERVALS};
use super::nn::OUTPUTS;
use crate::assigner::{assign_with_guard_ladder, GUARD_LADDER};
use crate::error::{Error, Result};
use crate::scenario::GeneratorSpec;
use crate::sim::{simulate, SimOptions};
use crate::traffic::mix_seed;
use crate::types::{PriorityClass, ProtocolParams, QosSpec, Scenario};

pub const DATASET_SCHEMA: u32 = 1;
pub const BIT: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub features: Vec<f64>,
    /// Per class (HP, RP, LP): max delay, mean delay, max collision, mean
    /// collision; then the infeasibility bit.
    pub labels: [f64; OUTPUTS],
}

impl DatasetEntry {
    pub fn infeasible(&self) -> bool {
        self.labels[BIT] >= 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub intervals: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub entries: Vec<DatasetEntry>,
}

pub fn label_names() -> Vec<String> {
    let mut names = Vec::with_capacity(OUTPUTS);
    for c in ["hp", "rp", "lp"] {
        for m in ["max_delay", "mean_delay", "max_collision", "mean_collision"] {
            names.push(format!("{c}_{m}"));
        }
    }
    names.push("infeasible".into());
    names
}

impl Dataset {
    pub fn feature_width(&self) -> usize {
        3 * self.intervals + 4
    }

    /// Metadata line, a header naming every column, then `features;labels` rows.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "#schema={};intervals={};lambda_min={};lambda_max={}",
            DATASET_SCHEMA, self.intervals, self.lambda_min, self.lambda_max
        )?;
        writeln!(w, "{};{}", feature_names(self.intervals).join(","), label_names().join(","))?;
        for e in &self.entries {
            let f: Vec<String> = e.features.iter().map(|v| v.to_string()).collect();
            let l: Vec<String> = e.labels.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{};{}", f.join(","), l.join(","))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(r: R, path: &std::path::Path) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse { path: path.to_path_buf(), message: format!("line {line}: {message}") };
        let mut lines = r.lines().enumerate();
        let meta = match lines.next() {
            Some((_, l)) => l.map_err(|e| Error::io(path, e))?,
            None => return Err(parse_err(1, "empty file".into())),
        };
        let mut schema = None;
        let (mut intervals, mut lambda_min, mut lambda_max) = (None, None, None);
        for kv in meta.trim_start_matches('#').split(';') {
            let (k, v) = kv.split_once('=').ok_or_else(|| parse_err(1, format!("bad metadata `{kv}`")))?;
            let bad = || parse_err(1, format!("bad value for {k}"));
            match k {
                "schema" => schema = Some(v.parse::<u32>().map_err(|_| bad())?),
                "intervals" => intervals = Some(v.parse::<usize>().map_err(|_| bad())?),
                "lambda_min" => lambda_min = Some(v.parse::<f64>().map_err(|_| bad())?),
                "lambda_max" => lambda_max = Some(v.parse::<f64>().map_err(|_| bad())?),
                _ => {}
            }
        }
        let found = schema.ok_or_else(|| parse_err(1, "missing schema".into()))?;
        if found != DATASET_SCHEMA {
            return Err(Error::SchemaVersion { path: path.to_path_buf(), found, expected: DATASET_SCHEMA });
        }
        let missing = |k: &str| parse_err(1, format!("missing {k}"));
        let intervals = intervals.ok_or_else(|| missing("intervals"))?;
        let mut ds = Dataset {
            intervals,
            lambda_min: lambda_min.ok_or_else(|| missing("lambda_min"))?,
            lambda_max: lambda_max.ok_or_else(|| missing("lambda_max"))?,
            entries: Vec::new(),
        };
        lines.next();
        let width = ds.feature_width();
        for (n, line) in lines {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let (f, l) = line.split_once(';').ok_or_else(|| parse_err(n + 1, "missing `;`".into()))?;
            let nums = |s: &str| -> Result<Vec<f64>> {
                s.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| parse_err(n + 1, format!("bad number `{v}`")))).collect()
            };
            let features = nums(f)?;
            let labels = nums(l)?;
            if features.len() != width || labels.len() != OUTPUTS {
                return Err(parse_err(n + 1, format!("expected {width} features and {OUTPUTS} labels")));
            }
            ds.entries.push(DatasetEntry { features, labels: labels.try_into().expect("length checked") });
        }
        Ok(ds)
    }
}

/// Distribution of random scenarios: class sizes uniform in the given
/// inclusive ranges, rates uniform in `[rate_min, rate_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSampler {
    pub hp: [usize; 2],
    pub rp: [usize; 2],
    pub lp: [usize; 2],
    pub rate_min: f64,
    pub rate_max: f64,
    pub poisson_fraction: f64,
    pub jitter: f64,
    pub qos: QosSpec,
}

impl Default for ScenarioSampler {
    fn default() -> Self {
        Self {
            hp: [10, 120],
            rp: [50, 600],
            lp: [50, 900],
            rate_min: 1.0,
            rate_max: 5.0,
            poisson_fraction: 0.5,
            jitter: 0.05,
            qos: QosSpec::industrial_default(),
        }
    }
}

impl ScenarioSampler {
    pub fn sample(&self, seed: u64) -> Result<Scenario> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pick = |r: [usize; 2]| rng.random_range(r[0]..=r[1].max(r[0]));
        let counts = [pick(self.hp), pick(self.rp), pick(self.lp)];
        let spec = GeneratorSpec {
            counts,
            rate_min: self.rate_min,
            rate_max: self.rate_max,
            poisson_fraction: self.poisson_fraction,
            jitter: self.jitter,
        };
        spec.generate(self.qos, mix_seed(seed, 0xD1CE))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub profiles: usize,
    pub grid: Vec<ProtocolParams>,
    pub sampler: ScenarioSampler,
    /// Simulated seconds per run.
    pub sim_duration: f64,
    /// Independent runs averaged into each feasible entry's labels.
    pub sims_per_entry: usize,
    pub intervals: usize,
    pub guard_ladder: Vec<f64>,
    pub seed: u64,
}

impl DatasetConfig {
    /// Six settings: `n_m` in {4, 8} times `r_r` in {15, 30, 45}, with
    /// `r_h = 5` and `r_l = 90` fixed.
    pub fn default_grid() -> Vec<ProtocolParams> {
        let mut grid = Vec::new();
        for n_m in [4, 8] {
            for r_r in [15, 30, 45] {
                grid.push(ProtocolParams::new(n_m, 5, r_r, 90));
            }
        }
        grid
    }

    pub fn new(profiles: usize, seed: u64) -> Self {
        Self {
            profiles,
            grid: Self::default_grid(),
            sampler: ScenarioSampler::default(),
            sim_duration: 150.0,
            sims_per_entry: 1,
            intervals: DEFAULT_INTERVALS,
            guard_ladder: GUARD_LADDER.to_vec(),
            seed,
        }
    }
}

/// Assigns and, when every device was placed, simulates one scenario
/// under `params` `sims` times, returning the 13 labels. Measured labels
/// are averaged over the runs.
pub fn label_entry(
    scenario: &Scenario,
    params: &ProtocolParams,
    ladder: &[f64],
    sim_duration: f64,
    sims: usize,
    sim_seed: u64,
) -> Result<[f64; OUTPUTS]> {
    let mut labels = [0.0; OUTPUTS];
    let (assigned, _) = match assign_with_guard_ladder(scenario, params, ladder) {
        Ok(r) => r,
        Err(Error::Overload { .. }) => {
            labels[BIT] = 1.0;
            return Ok(labels);
        }
        Err(e) => return Err(e),
    };
    if !assigned.assignment.success {
        for class in PriorityClass::ALL {
            let s = assigned.estimates.class_summary(scenario, class);
            labels[4 * class.index()..4 * class.index() + 4].copy_from_slice(&s);
        }
        labels[BIT] = 1.0;
        return Ok(labels);
    }
    let sims = sims.max(1);
    for run in 0..sims {
        let opts = SimOptions::new(sim_duration, mix_seed(sim_seed, run as u64));
        let report = simulate(&scenario.devices, params, &scenario.qos, &assigned.assignment, &opts)?;
        for c in &report.classes {
            let k = 4 * c.class.index();
            for (l, v) in labels[k..k + 4].iter_mut().zip([c.max_delay, c.mean_delay, c.max_collision, c.mean_collision]) {
                *l += v / sims as f64;
            }
        }
    }
    Ok(labels)
}

pub fn generate_dataset(cfg: &DatasetConfig) -> Result<Dataset> {
    if cfg.grid.is_empty() {
        return Err(Error::InvalidScenario("parameter grid is empty".into()));
    }
    let per_profile: Vec<Vec<DatasetEntry>> = (0..cfg.profiles)
        .into_par_iter()
        .map(|i| {
            let seed = mix_seed(cfg.seed, i as u64);
            let scenario = cfg.sampler.sample(seed)?;
            let enc = encode_profile(&scenario.devices, cfg.intervals, cfg.sampler.rate_min, cfg.sampler.rate_max)?;
            cfg.grid
                .iter()
                .map(|p| {
                    let labels = label_entry(&scenario, p, &cfg.guard_ladder, cfg.sim_duration, cfg.sims_per_entry, mix_seed(seed, 1))?;
                    Ok(DatasetEntry { features: enc.features(p), labels })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        intervals: cfg.intervals,
        lambda_min: cfg.sampler.rate_min,
        lambda_max: cfg.sampler.rate_max,
        entries: per_profile.into_iter().flatten().collect(),
    })
}
