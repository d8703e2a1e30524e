//! Slot-level simulation of the mini-slot MAC.
//!
//! Time advances slot by slot in integer nanosecond ticks. At each slot
//! boundary the owned mini-slots of that slot are scanned in order; the
//! first one holding a device with a queued packet claims the slot and
//! every ready device of that mini-slot transmits. A lone transmitter
//! succeeds, two or more collide and lose their packets. Transmission
//! starts right after the claiming mini-slot, but a claimed slot always
//! lasts `n_m * t_m + t_x` so that slot boundaries stay aligned.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::traffic::ArrivalSource;
use crate::types::{owned_slots, validate_assignment, Assignment, DeviceId, DeviceProfile, PriorityClass, ProtocolParams, QosSpec};

pub const TICKS_PER_SECOND: f64 = 1e9;

pub fn to_ticks(seconds: f64) -> u64 {
    (seconds * TICKS_PER_SECOND).round() as u64
}

pub fn to_seconds(ticks: u64) -> f64 {
    ticks as f64 / TICKS_PER_SECOND
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    /// FIFO queue per device; otherwise a device holds one packet and drops arrivals meanwhile.
    pub buffer: bool,
    /// Truncate unclaimed slots to their mini-slot header.
    pub synccs: bool,
    /// Informational only: sharing follows from the assignment itself.
    pub smsa: bool,
    pub duration: f64,
    pub seed: u64,
    /// Packets arriving before this instant are excluded from statistics.
    pub warmup: f64,
    /// Draw a random phase for quasi-periodic sources.
    pub random_phase: bool,
}

impl SimOptions {
    pub fn new(duration: f64, seed: u64) -> Self {
        Self { buffer: true, synccs: true, smsa: true, duration, seed, warmup: 0.05 * duration, random_phase: true }
    }

    fn check(&self) -> Result<()> {
        if !(self.duration > self.warmup && self.warmup >= 0.0) {
            return Err(Error::InvalidScenario(format!(
                "need duration > warmup >= 0 (duration {}, warmup {})",
                self.duration, self.warmup
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceStats {
    pub id: DeviceId,
    pub class: PriorityClass,
    pub mean_delay: f64,
    pub max_delay: f64,
    pub collision_prob: f64,
    pub generated: u64,
    pub delivered: u64,
    pub collided: u64,
    pub dropped: u64,
    pub queued: u64,
    pub qos_met: bool,
}

impl DeviceStats {
    pub fn transmissions(&self) -> u64 {
        self.delivered + self.collided
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub class: PriorityClass,
    pub devices: usize,
    /// Mean over devices of the per-device mean delay.
    pub mean_delay: f64,
    /// Max over devices of the per-device mean delay.
    pub max_delay: f64,
    /// Largest single-packet delay in the class.
    pub max_packet_delay: f64,
    pub mean_collision: f64,
    pub max_collision: f64,
    pub qos_met: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CycleDurationStats {
    pub cycles: u64,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfReport {
    pub devices: Vec<DeviceStats>,
    pub classes: Vec<ClassStats>,
    pub qos_met: bool,
    pub lp_cycle: CycleDurationStats,
    pub slots: u64,
    pub claimed_slots: u64,
}

/// Summary document without the per-device table.
#[derive(Debug, Clone, Serialize)]
pub struct ReportSummary<'a> {
    pub classes: &'a [ClassStats],
    pub qos_met: bool,
    pub lp_cycle: CycleDurationStats,
    pub slots: u64,
    pub claimed_slots: u64,
    pub devices_qos_met: usize,
    pub devices: usize,
}

impl PerfReport {
    pub fn class(&self, class: PriorityClass) -> Option<&ClassStats> {
        self.classes.iter().find(|c| c.class == class)
    }

    pub fn device(&self, id: DeviceId) -> Option<&DeviceStats> {
        self.devices.iter().find(|d| d.id == id)
    }

    pub fn summary(&self) -> ReportSummary<'_> {
        ReportSummary {
            classes: &self.classes,
            qos_met: self.qos_met,
            lp_cycle: self.lp_cycle,
            slots: self.slots,
            claimed_slots: self.claimed_slots,
            devices_qos_met: self.devices.iter().filter(|d| d.qos_met).count(),
            devices: self.devices.len(),
        }
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "device_id,class,mean_delay_s,max_delay_s,collision_prob,generated,delivered,collided,dropped")?;
        for d in &self.devices {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                d.id, d.class, d.mean_delay, d.max_delay, d.collision_prob, d.generated, d.delivered, d.collided, d.dropped
            )?;
        }
        Ok(())
    }
}

struct Device {
    source: ArrivalSource,
    pending: Option<u64>,
    queue: VecDeque<u64>,
    generated: u64,
    delivered: u64,
    collided: u64,
    dropped: u64,
    delay_sum: u128,
    delay_max: u64,
}

impl Device {
    fn new(mut source: ArrivalSource, horizon: u64) -> Self {
        let pending = next_tick(&mut source, horizon);
        Self {
            source,
            pending,
            queue: VecDeque::new(),
            generated: 0,
            delivered: 0,
            collided: 0,
            dropped: 0,
            delay_sum: 0,
            delay_max: 0,
        }
    }

    /// Moves arrivals up to `now` (inclusive) into the queue.
    fn pull(&mut self, now: u64, horizon: u64, warmup: u64, buffer: bool) {
        while let Some(t) = self.pending.filter(|&t| t <= now) {
            let counted = t >= warmup;
            self.generated += counted as u64;
            if buffer || self.queue.is_empty() {
                self.queue.push_back(t);
            } else {
                self.dropped += counted as u64;
            }
            self.pending = next_tick(&mut self.source, horizon);
        }
    }
}

fn next_tick(source: &mut ArrivalSource, horizon: u64) -> Option<u64> {
    source.next_arrival().map(to_ticks).filter(|&t| t < horizon)
}

/// Owned mini-slot groups of every slot in the LP cycle, ordered by mini-slot.
fn slot_plan(profiles: &[DeviceProfile], params: &ProtocolParams, assignment: &Assignment) -> Vec<Vec<(u32, Vec<usize>)>> {
    let mut plan: Vec<Vec<(u32, Vec<usize>)>> = vec![Vec::new(); params.r_l as usize];
    for (idx, d) in profiles.iter().enumerate() {
        let Some(anchor) = assignment.anchor(d.id) else { continue };
        for s in owned_slots(d.class, anchor, params) {
            let groups = &mut plan[s as usize - 1];
            match groups.iter_mut().find(|(m, _)| *m == anchor.mini_slot) {
                Some((_, g)) => g.push(idx),
                None => groups.push((anchor.mini_slot, vec![idx])),
            }
        }
    }
    for groups in &mut plan {
        groups.sort_by_key(|(m, _)| *m);
    }
    plan
}

pub fn simulate(
    profiles: &[DeviceProfile],
    params: &ProtocolParams,
    qos: &QosSpec,
    assignment: &Assignment,
    opts: &SimOptions,
) -> Result<PerfReport> {
    opts.check()?;
    let bad = validate_assignment(profiles, params, assignment);
    if !bad.is_empty() {
        let msg: Vec<String> = bad.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvalidScenario(msg.join("; ")));
    }

    let horizon = to_ticks(opts.duration);
    let warmup = to_ticks(opts.warmup);
    let t_m = to_ticks(params.t_m);
    let t_x = to_ticks(params.t_x);
    let full = params.n_m as u64 * t_m + t_x;
    let idle = if opts.synccs { params.n_m as u64 * t_m } else { full };
    let plan = slot_plan(profiles, params, assignment);

    let mut devices: Vec<Device> = profiles
        .iter()
        .map(|p| Device::new(ArrivalSource::for_device(p, opts.seed, opts.random_phase), horizon))
        .collect();

    let mut now = 0u64;
    let mut slot = 0usize;
    let mut slots = 0u64;
    let mut claimed_slots = 0u64;
    let mut cycle_start = 0u64;
    let mut cycles = CycleDurationStats { min: f64::INFINITY, ..Default::default() };
    let mut cycle_sum = 0u64;
    let mut ready: Vec<usize> = Vec::new();

    while now < horizon {
        let mut claim = None;
        for (m, group) in &plan[slot] {
            ready.clear();
            for &i in group {
                let d = &mut devices[i];
                d.pull(now, horizon, warmup, opts.buffer);
                if !d.queue.is_empty() {
                    ready.push(i);
                }
            }
            if !ready.is_empty() {
                claim = Some(*m);
                break;
            }
        }
        if let Some(m) = claim {
            let tx_end = now + m as u64 * t_m + t_x;
            let success = ready.len() == 1;
            for &i in &ready {
                let d = &mut devices[i];
                let arrival = d.queue.pop_front().expect("ready device has a packet");
                if arrival < warmup {
                    continue;
                }
                if success {
                    let delay = tx_end - arrival;
                    d.delivered += 1;
                    d.delay_sum += delay as u128;
                    d.delay_max = d.delay_max.max(delay);
                } else {
                    d.collided += 1;
                }
            }
            claimed_slots += 1;
            now += full;
        } else {
            now += idle;
        }
        slots += 1;
        slot += 1;
        if slot == plan.len() {
            slot = 0;
            let len = now - cycle_start;
            cycle_start = now;
            cycles.cycles += 1;
            cycle_sum += len;
            cycles.min = cycles.min.min(to_seconds(len));
            cycles.max = cycles.max.max(to_seconds(len));
        }
    }
    if cycles.cycles > 0 {
        cycles.mean = to_seconds(cycle_sum) / cycles.cycles as f64;
    } else {
        cycles.min = 0.0;
    }

    let stats: Vec<DeviceStats> = profiles
        .iter()
        .zip(devices.iter_mut())
        .map(|(p, d)| {
            d.pull(horizon, horizon, warmup, opts.buffer);
            let queued = d.generated - d.delivered - d.collided - d.dropped;
            let tx = d.delivered + d.collided;
            let collision_prob = if tx == 0 { 0.0 } else { d.collided as f64 / tx as f64 };
            let mean_delay =
                if d.delivered == 0 { 0.0 } else { d.delay_sum as f64 / d.delivered as f64 / TICKS_PER_SECOND };
            let starved = d.generated > 0 && d.delivered == 0;
            DeviceStats {
                id: p.id,
                class: p.class,
                mean_delay,
                max_delay: to_seconds(d.delay_max),
                collision_prob,
                generated: d.generated,
                delivered: d.delivered,
                collided: d.collided,
                dropped: d.dropped,
                queued,
                qos_met: !starved && mean_delay <= qos.delta(p.class) && collision_prob <= qos.rho(p.class),
            }
        })
        .collect();

    let classes: Vec<ClassStats> = PriorityClass::ALL
        .iter()
        .filter_map(|&class| {
            let ds: Vec<&DeviceStats> = stats.iter().filter(|d| d.class == class).collect();
            if ds.is_empty() {
                return None;
            }
            let n = ds.len() as f64;
            Some(ClassStats {
                class,
                devices: ds.len(),
                mean_delay: ds.iter().map(|d| d.mean_delay).sum::<f64>() / n,
                max_delay: ds.iter().map(|d| d.mean_delay).fold(0.0, f64::max),
                max_packet_delay: ds.iter().map(|d| d.max_delay).fold(0.0, f64::max),
                mean_collision: ds.iter().map(|d| d.collision_prob).sum::<f64>() / n,
                max_collision: ds.iter().map(|d| d.collision_prob).fold(0.0, f64::max),
                qos_met: ds.iter().all(|d| d.qos_met),
            })
        })
        .collect();

    Ok(PerfReport {
        qos_met: classes.iter().all(|c| c.qos_met),
        devices: stats,
        classes,
        lp_cycle: cycles,
        slots,
        claimed_slots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Anchor, ArrivalPattern};

    fn loose() -> QosSpec {
        QosSpec::new([1.0, 1.0, 1.0], [1.0, 1.0, 1.0])
    }

    fn conserved(r: &PerfReport) -> bool {
        r.devices.iter().all(|d| d.delivered + d.collided + d.dropped + d.queued == d.generated)
    }

    #[test]
    fn silent_network_runs_idle_slots() {
        let params = ProtocolParams::new(2, 1, 1, 4);
        let r = simulate(&[], &params, &loose(), &Assignment::empty(0), &SimOptions::new(0.01, 1)).unwrap();
        // Idle slots last 18 us under SyncCS.
        assert_eq!(r.slots, 556);
        assert_eq!(r.claimed_slots, 0);
        assert!((r.lp_cycle.mean - 72e-6).abs() < 1e-15);
    }

    #[test]
    fn single_light_device_delay() {
        // One slot per cycle: an idle slot is 9 us, so the wait before the
        // next boundary averages 4.5 us; transmission then ends after 9 + 133 us.
        let params = ProtocolParams::new(1, 1, 1, 1);
        let devs = vec![DeviceProfile::poisson(1, PriorityClass::Hp, 1.0)];
        let a = Assignment::from_anchors(vec![Anchor::new(1, 1)]);
        let r = simulate(&devs, &params, &loose(), &a, &SimOptions::new(400.0, 3)).unwrap();
        let d = &r.devices[0];
        assert!(d.delivered > 300);
        assert_eq!(d.collided, 0);
        let expected = 4.5e-6 + 142e-6;
        assert!((d.mean_delay - expected).abs() < 0.5e-6, "{}", d.mean_delay);
        assert!(conserved(&r));
    }

    #[test]
    fn shared_mini_slot_collides_together() {
        let params = ProtocolParams::new(1, 1, 1, 1);
        let periodic = |id| DeviceProfile {
            id,
            class: PriorityClass::Hp,
            rate: 10.0,
            pattern: ArrivalPattern::QuasiPeriodic { jitter: 0.0 },
        };
        let devs = vec![periodic(1), periodic(2)];
        let a = Assignment::from_anchors(vec![Anchor::new(1, 1), Anchor::new(1, 1)]);
        let mut opts = SimOptions::new(10.0, 1);
        opts.random_phase = false;
        let r = simulate(&devs, &params, &loose(), &a, &opts).unwrap();
        for d in &r.devices {
            assert_eq!(d.delivered, 0);
            assert_eq!(d.collided, d.generated);
            assert_eq!(d.collision_prob, 1.0);
        }
    }

    #[test]
    fn earlier_mini_slot_preempts() {
        let params = ProtocolParams::new(2, 1, 1, 1);
        let devs = vec![DeviceProfile::poisson(1, PriorityClass::Hp, 50.0), DeviceProfile::poisson(2, PriorityClass::Hp, 50.0)];
        let a = Assignment::from_anchors(vec![Anchor::new(1, 1), Anchor::new(1, 2)]);
        let r = simulate(&devs, &params, &loose(), &a, &SimOptions::new(200.0, 5)).unwrap();
        assert!(r.devices[0].mean_delay < r.devices[1].mean_delay);
        assert_eq!(r.devices[0].collided + r.devices[1].collided, 0);
        assert!(conserved(&r));
    }

    #[test]
    fn no_buffer_drops_and_conserves() {
        let params = ProtocolParams::new(1, 4, 4, 4);
        let devs = vec![DeviceProfile::poisson(1, PriorityClass::Hp, 3000.0)];
        let a = Assignment::from_anchors(vec![Anchor::new(1, 1)]);
        let mut opts = SimOptions::new(2.0, 8);
        opts.buffer = false;
        let r = simulate(&devs, &params, &loose(), &a, &opts).unwrap();
        assert!(r.devices[0].dropped > 0);
        assert!(r.devices[0].queued <= 1);
        assert!(conserved(&r));
    }

    #[test]
    fn overload_grows_queue() {
        let params = ProtocolParams::new(1, 4, 4, 4);
        let devs = vec![DeviceProfile::poisson(1, PriorityClass::Hp, 10000.0)];
        let a = Assignment::from_anchors(vec![Anchor::new(1, 1)]);
        let r = simulate(&devs, &params, &loose(), &a, &SimOptions::new(2.0, 8)).unwrap();
        assert!(r.devices[0].queued > 1000);
        assert!(conserved(&r));
    }

    #[test]
    fn unassigned_devices_only_queue() {
        let params = ProtocolParams::new(1, 1, 1, 1);
        let devs = vec![DeviceProfile::poisson(1, PriorityClass::Lp, 5.0)];
        let r = simulate(&devs, &params, &loose(), &Assignment::empty(1), &SimOptions::new(20.0, 2)).unwrap();
        let d = &r.devices[0];
        assert_eq!(d.queued, d.generated);
        assert!(!d.qos_met);
    }

    #[test]
    fn rejects_bad_options_and_assignments() {
        let params = ProtocolParams::new(1, 1, 1, 1);
        let mut opts = SimOptions::new(1.0, 0);
        opts.warmup = 2.0;
        assert!(simulate(&[], &params, &loose(), &Assignment::empty(0), &opts).is_err());
        let devs = vec![DeviceProfile::poisson(1, PriorityClass::Hp, 5.0)];
        let a = Assignment::from_anchors(vec![Anchor::new(3, 1)]);
        assert!(simulate(&devs, &params, &loose(), &a, &SimOptions::new(1.0, 0)).is_err());
    }

    #[test]
    fn csv_header_and_rows() {
        let params = ProtocolParams::new(1, 1, 1, 1);
        let devs = vec![DeviceProfile::poisson(1, PriorityClass::Rp, 5.0)];
        let a = Assignment::from_anchors(vec![Anchor::new(1, 1)]);
        let r = simulate(&devs, &params, &loose(), &a, &SimOptions::new(5.0, 2)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next(),
            Some("device_id,class,mean_delay_s,max_delay_s,collision_prob,generated,delivered,collided,dropped")
        );
        assert!(lines.next().unwrap().starts_with("1,RP,"));
    }
}
