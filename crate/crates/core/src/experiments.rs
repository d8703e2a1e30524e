//! Baked-in experiment presets: mini-slot delay curves with one or several
//! devices per mini-slot, and end-to-end assign-then-simulate runs.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{fixed_frame_length, mini_slot_delay_curve};
use crate::assigner::{assign_with_guard_ladder, AssignResult, GUARD_LADDER};
use crate::error::{Error, Result};
use crate::scenario::GeneratorSpec;
use crate::sim::{simulate, PerfReport, SimOptions};
use crate::traffic::mix_seed;
use crate::types::{
    Anchor, Assignment, DeviceProfile, Occupant, PriorityClass, ProtocolParams, QosSpec, Scenario, DEFAULT_T_M,
};

/// Plot-ready table with a header row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FigureTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl FigureTable {
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{}", self.header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// One slot of `n_m` mini-slots inside a frame of `slots` equal slots,
/// `per_mini_slot` devices in every mini-slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiniSlotSetup {
    pub n_m: u32,
    pub slots: u32,
    pub per_mini_slot: usize,
    pub rate_min: f64,
    pub rate_max: f64,
    pub t_m: f64,
    /// Simulated length in frames of full-length slots.
    pub frames: u32,
}

impl MiniSlotSetup {
    pub fn params(&self) -> ProtocolParams {
        let mut p = ProtocolParams::new(self.n_m, self.slots, self.slots, self.slots);
        p.t_m = self.t_m;
        p
    }

    pub fn duration(&self) -> f64 {
        self.frames as f64 * fixed_frame_length(self.slots, &self.params())
    }

    /// Draws rates and places devices by ascending rate, filling mini-slot 1 first.
    pub fn build(&self, seed: u64) -> (Vec<DeviceProfile>, Assignment) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = self.n_m as usize * self.per_mini_slot;
        let mut rates: Vec<f64> = (0..n).map(|_| rng.random_range(self.rate_min..=self.rate_max)).collect();
        rates.sort_by(f64::total_cmp);
        let devices: Vec<DeviceProfile> = rates
            .iter()
            .enumerate()
            .map(|(i, &r)| DeviceProfile::poisson(i as u32 + 1, PriorityClass::Lp, r))
            .collect();
        let anchors = (0..n).map(|i| Anchor::new(1, (i / self.per_mini_slot) as u32 + 1)).collect();
        (devices, Assignment::from_anchors(anchors))
    }

    fn loose_qos() -> QosSpec {
        QosSpec::new([1e3; 3], [1.0; 3])
    }

    /// Per-device mean delays grouped by mini-slot.
    pub fn run(&self, buffer: bool, synccs: bool, seed: u64) -> Result<(Vec<DeviceProfile>, Vec<Vec<f64>>)> {
        let (devices, assignment) = self.build(seed);
        let mut opts = SimOptions::new(self.duration(), mix_seed(seed, 1));
        opts.buffer = buffer;
        opts.synccs = synccs;
        let report = simulate(&devices, &self.params(), &Self::loose_qos(), &assignment, &opts)?;
        let grouped = report.devices.chunks(self.per_mini_slot).map(|c| c.iter().map(|d| d.mean_delay).collect()).collect();
        Ok((devices, grouped))
    }

    /// Estimator curve for the devices of [`MiniSlotSetup::build`] with untruncated slots.
    pub fn analytic(&self, devices: &[DeviceProfile]) -> Result<Vec<f64>> {
        let groups: Vec<Vec<Occupant>> = devices
            .chunks(self.per_mini_slot)
            .map(|c| c.iter().map(|d| Occupant { id: d.id, rate: d.rate }).collect())
            .collect();
        let params = self.params();
        mini_slot_delay_curve(&groups, fixed_frame_length(self.slots, &params), params.t_x)
    }
}

/// Mean delay per mini-slot for the three MsCS configurations, averaged over repeats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsCsCurves {
    pub no_buffer: Vec<f64>,
    pub buffer: Vec<f64>,
    pub synccs: Vec<f64>,
}

impl MsCsCurves {
    pub fn table(&self) -> FigureTable {
        FigureTable {
            header: ["mini_slot", "mscs_no_buffer_s", "mscs_buffer_s", "mscs_synccs_buffer_s"].map(String::from).to_vec(),
            rows: (0..self.buffer.len())
                .map(|i| vec![(i + 1) as f64, self.no_buffer[i], self.buffer[i], self.synccs[i]])
                .collect(),
        }
    }
}

/// Ten devices, one per mini-slot of a single slot in a 100-slot frame.
pub fn fig2_setup(rate_min: f64, rate_max: f64, frames: u32) -> MiniSlotSetup {
    MiniSlotSetup { n_m: 10, slots: 100, per_mini_slot: 1, rate_min, rate_max, t_m: DEFAULT_T_M, frames }
}

pub fn fig2(setup: &MiniSlotSetup, repeats: u32, seed: u64) -> Result<MsCsCurves> {
    let runs: Vec<[Vec<f64>; 3]> = (0..repeats)
        .into_par_iter()
        .map(|rep| {
            let s = mix_seed(seed, rep as u64);
            let one = |buffer, synccs| -> Result<Vec<f64>> {
                Ok(setup.run(buffer, synccs, s)?.1.into_iter().map(|g| g[0]).collect())
            };
            Ok([one(false, false)?, one(true, false)?, one(true, true)?])
        })
        .collect::<Result<_>>()?;
    let avg = |k: usize| -> Vec<f64> {
        (0..setup.n_m as usize).map(|i| runs.iter().map(|r| r[k][i]).sum::<f64>() / runs.len() as f64).collect()
    };
    Ok(MsCsCurves { no_buffer: avg(0), buffer: avg(1), synccs: avg(2) })
}

/// Seven devices per mini-slot, without SyncCS.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SharedCurves {
    /// `delays[m][k]`: mean delay of the k-th device of mini-slot m + 1.
    pub delays: Vec<Vec<f64>>,
    pub analytic: Vec<f64>,
}

impl SharedCurves {
    /// Largest `(max - min) / min` over mini-slots.
    pub fn max_spread(&self) -> f64 {
        self.delays
            .iter()
            .map(|g| {
                let lo = g.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = g.iter().copied().fold(0.0, f64::max);
                (hi - lo) / lo
            })
            .fold(0.0, f64::max)
    }

    pub fn group_means(&self) -> Vec<f64> {
        self.delays.iter().map(|g| g.iter().sum::<f64>() / g.len() as f64).collect()
    }

    pub fn table(&self) -> FigureTable {
        let k = self.delays.first().map_or(0, Vec::len);
        let mut header = vec!["mini_slot".to_string()];
        header.extend((1..=k).map(|i| format!("device_{i}_s")));
        header.push("analytic_s".into());
        let rows = self
            .delays
            .iter()
            .zip(&self.analytic)
            .enumerate()
            .map(|(m, (g, a))| {
                let mut row = vec![(m + 1) as f64];
                row.extend(g);
                row.push(*a);
                row
            })
            .collect();
        FigureTable { header, rows }
    }
}

pub fn shared_curves(setup: &MiniSlotSetup, buffer: bool, seed: u64) -> Result<SharedCurves> {
    let (devices, delays) = setup.run(buffer, false, seed)?;
    Ok(SharedCurves { delays, analytic: setup.analytic(&devices)? })
}

/// Seventy devices at 0.2 to 1 packets/s in a 100-slot frame.
pub fn fig3_setup(frames: u32) -> MiniSlotSetup {
    MiniSlotSetup { n_m: 10, slots: 100, per_mini_slot: 7, rate_min: 0.2, rate_max: 1.0, t_m: DEFAULT_T_M, frames }
}

/// As [`fig3_setup`] with 7 us mini-slots.
pub fn fig4a_setup(frames: u32) -> MiniSlotSetup {
    MiniSlotSetup { t_m: 7e-6, ..fig3_setup(frames) }
}

/// As [`fig3_setup`] with a 5-slot frame and five times the rates.
pub fn fig4b_setup(frames: u32) -> MiniSlotSetup {
    MiniSlotSetup { slots: 5, rate_min: 1.0, rate_max: 5.0, ..fig3_setup(frames) }
}

/// Scenario generation, assignment and simulation in one preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndToEndSetup {
    pub generator: GeneratorSpec,
    pub params: ProtocolParams,
    pub qos: QosSpec,
    pub duration: f64,
    /// Guard margins tried largest first; the first that places every device is kept.
    #[serde(default = "default_ladder")]
    pub guard_ladder: Vec<f64>,
}

fn default_ladder() -> Vec<f64> {
    GUARD_LADDER.to_vec()
}

#[derive(Debug, Clone)]
pub struct EndToEndRun {
    pub scenario: Scenario,
    pub params: ProtocolParams,
    pub assigned: AssignResult,
    pub guard_margin: f64,
    /// `None` when the assignment failed.
    pub report: Option<PerfReport>,
}

impl EndToEndSetup {
    pub fn fig5a() -> Self {
        Self {
            generator: GeneratorSpec::industrial(),
            params: ProtocolParams::new(8, 5, 45, 270),
            qos: QosSpec::industrial_default(),
            duration: 2000.0,
            guard_ladder: default_ladder(),
        }
    }

    pub fn fig5b() -> Self {
        Self { params: ProtocolParams::new(8, 5, 35, 140), ..Self::fig5a() }
    }

    /// 350 HP devices, four mini-slots, six slots per HP cycle.
    pub fn fig6() -> Self {
        Self {
            generator: GeneratorSpec { counts: [350, 0, 0], ..GeneratorSpec::industrial() },
            params: ProtocolParams::new(4, 6, 6, 6),
            ..Self::fig5a()
        }
    }

    pub fn run(&self, seed: u64) -> Result<EndToEndRun> {
        let scenario = self.generator.generate(self.qos, seed)?;
        let (assigned, guard_margin) = assign_with_guard_ladder(&scenario, &self.params, &self.guard_ladder)?;
        let report = if assigned.assignment.success {
            let opts = SimOptions::new(self.duration, mix_seed(seed, 1));
            Some(simulate(&scenario.devices, &self.params, &scenario.qos, &assigned.assignment, &opts)?)
        } else {
            None
        };
        Ok(EndToEndRun { scenario, params: self.params, assigned, guard_margin, report })
    }
}

/// Named figure presets accepted by the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    Fig2a,
    Fig2b,
    Fig3a,
    Fig3b,
    Fig4a,
    Fig4b,
    Fig5a,
    Fig5b,
    Fig6,
}

impl std::str::FromStr for Figure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "fig2a" => Figure::Fig2a,
            "fig2b" => Figure::Fig2b,
            "fig3a" => Figure::Fig3a,
            "fig3b" => Figure::Fig3b,
            "fig4a" => Figure::Fig4a,
            "fig4b" => Figure::Fig4b,
            "fig5a" => Figure::Fig5a,
            "fig5b" => Figure::Fig5b,
            "fig6" => Figure::Fig6,
            other => return Err(Error::InvalidScenario(format!("unknown figure `{other}`"))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn setup_places_by_ascending_rate() {
        let s = fig3_setup(10);
        let (devs, a) = s.build(3);
        assert_eq!(devs.len(), 70);
        assert!(devs.windows(2).all(|w| w[0].rate <= w[1].rate));
        assert_eq!(a.anchor(1), Some(Anchor::new(1, 1)));
        assert_eq!(a.anchor(8), Some(Anchor::new(1, 2)));
        assert_eq!(a.anchor(70), Some(Anchor::new(1, 10)));
    }

    #[test]
    fn frame_lengths() {
        assert!((fig2_setup(0.2, 1.0, 1).duration() - 0.0223).abs() < 1e-12);
        assert!((fig4a_setup(1).duration() - 0.0203).abs() < 1e-12);
        assert!((fig4b_setup(1).duration() - 0.001115).abs() < 1e-12);
    }

    #[test]
    fn figure_names_parse() {
        assert_eq!("fig5a".parse::<Figure>().unwrap(), Figure::Fig5a);
        assert_eq!("FIG6".parse::<Figure>().unwrap(), Figure::Fig6);
        assert!("fig7".parse::<Figure>().is_err());
    }

    #[test]
    fn short_fig2_has_ordered_curves() {
        let c = fig2(&fig2_setup(1.0, 5.0, 400), 2, 1).unwrap();
        assert_eq!(c.buffer.len(), 10);
        assert!(c.synccs[0] < c.buffer[0]);
        assert_eq!(c.table().rows.len(), 10);
    }
}
