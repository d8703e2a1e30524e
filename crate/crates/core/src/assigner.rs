//! Greedy device assignment.
//!
//! [`core_assign`] places the devices of one priority class, scanning the
//! current mini-slot ("cursor") of every slot in the class pool and moving
//! cursors forward only when no current mini-slot can take the device
//! under the class collision bound. [`overall_assign`] runs it for HP, RP
//! and LP in turn, widening the slot pool to the longer cycle between
//! classes. [`brute_force_assign`] is an exhaustive oracle for tiny
//! instances that evaluates candidates with the same estimators.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analytic::{
    adf_estimate, collision_after_add, derive_cycles, fill_mini_slot, overall_delay, state_after_add, CycleLengths,
};
use crate::error::{Error, Result};
use crate::types::{
    owned_slots, validate_scenario, Anchor, AssignFailure, Assignment, DeviceId, MiniSlotState, Occupant,
    PriorityClass, ProtocolParams, Scenario,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssignOptions {
    /// Multiplier (>= 1) applied to estimated collision probabilities
    /// before they are compared with the class threshold.
    pub guard_margin: f64,
}

impl Default for AssignOptions {
    fn default() -> Self {
        Self { guard_margin: 1.0 }
    }
}

/// Assignment cursor of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotCursor {
    /// Current mini-slot (1-based); `n_m + 1` once the slot is full.
    pub cursor: u32,
    /// Expected arrivals per cycle in mini-slots before the cursor.
    pub gamma_pre: f64,
    /// State of the cursor mini-slot.
    pub state: MiniSlotState,
}

impl SlotCursor {
    fn fresh() -> Self {
        Self { cursor: 1, gamma_pre: 0.0, state: MiniSlotState::empty(0.0, 1.0) }
    }

    fn advance(&mut self) {
        self.gamma_pre = self.state.gamma;
        self.cursor += 1;
        self.state = MiniSlotState::empty(self.gamma_pre, adf_estimate(self.gamma_pre));
    }
}

/// Cursors of slots `1..=r_l`, indexed by `slot - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotTable {
    pub slots: Vec<SlotCursor>,
}

impl SlotTable {
    pub fn new(r_l: u32) -> Self {
        Self { slots: vec![SlotCursor::fresh(); r_l as usize] }
    }

    pub fn get(&self, slot: u32) -> &SlotCursor {
        &self.slots[slot as usize - 1]
    }

    fn get_mut(&mut self, slot: u32) -> &mut SlotCursor {
        &mut self.slots[slot as usize - 1]
    }

    /// Moves every cursor among slots `1..=prev_cycle` past its occupied
    /// mini-slot and copies it to the congruent slots up to `next_cycle`.
    /// Returns the new pool: all copies whose cursor still fits.
    pub fn extend(&mut self, prev_cycle: u32, next_cycle: u32, n_m: u32) -> Vec<u32> {
        let mut pool = Vec::new();
        for l in 1..=prev_cycle {
            let base = self.get_mut(l);
            if !base.state.is_empty() {
                base.advance();
            }
            let base = base.clone();
            // Full slots are copied too, so their replicas stay full.
            for copy in (l..=next_cycle).step_by(prev_cycle as usize) {
                *self.get_mut(copy) = base.clone();
                if base.cursor <= n_m {
                    pool.push(copy);
                }
            }
        }
        pool.sort_unstable();
        pool
    }
}

/// Class-level constants of one core assignment pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassConstants {
    pub class: PriorityClass,
    pub t_f: f64,
    pub tau0: f64,
    pub delta: f64,
    pub rho: f64,
    pub n_m: u32,
    pub t_x: f64,
    pub guard_margin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    pub id: DeviceId,
    pub anchor: Anchor,
    /// Estimated overall delay at commit time (seconds).
    pub delay: f64,
    /// Mini-slot collision estimate at commit time.
    pub collision: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassOutcome {
    pub placements: Vec<Placement>,
    pub stop: Option<AssignFailure>,
}

impl ClassOutcome {
    pub fn assigned(&self) -> usize {
        self.placements.len()
    }
}

/// One class pass. `devices` must be sorted by nondecreasing rate; `pool`
/// lists candidate slots in ascending order. Cursor state in `table` is
/// updated in place.
pub fn core_assign(devices: &[(DeviceId, f64)], pool: &[u32], table: &mut SlotTable, k: &ClassConstants) -> ClassOutcome {
    let mut pool = pool.to_vec();
    let mut placements = Vec::with_capacity(devices.len());

    for &(id, lambda) in devices {
        loop {
            let collision_stop = || AssignFailure::Collision { class: k.class, assigned: placements.len() };
            if pool.is_empty() {
                return ClassOutcome { stop: Some(collision_stop()), placements };
            }
            let delay = |l: u32| overall_delay(table.get(l).state.tau, k.t_f, k.t_x, k.tau0);
            let min_delay = pool.iter().map(|&l| delay(l)).fold(f64::INFINITY, f64::min);
            if min_delay > k.delta {
                return ClassOutcome { stop: Some(AssignFailure::Delay { class: k.class, device: id }), placements };
            }
            let feasible: Vec<u32> = pool.iter().copied().filter(|&l| delay(l) <= k.delta).collect();
            let q_bar = |l: u32| {
                let s = &table.get(l).state;
                collision_after_add(s.q_c, k.t_f, lambda, s.is_empty())
            };

            // Lowest slot index wins ties: `feasible` is ascending and only a strict improvement replaces.
            let mut best = feasible[0];
            let mut best_q = q_bar(best);
            for &l in &feasible[1..] {
                let q = q_bar(l);
                if q < best_q {
                    best = l;
                    best_q = q;
                }
            }

            if k.guard_margin * best_q > k.rho {
                if feasible.iter().all(|&l| table.get(l).cursor >= k.n_m) {
                    return ClassOutcome { stop: Some(collision_stop()), placements };
                }
                pool = feasible.into_iter().filter(|&l| table.get(l).cursor < k.n_m).collect();
                for &l in &pool {
                    table.get_mut(l).advance();
                }
                continue;
            }

            let d = delay(best);
            let cursor = table.get_mut(best);
            // Estimator inputs are validated upstream, so a failure here is a logic error.
            let (state, _) = state_after_add(&cursor.state, id, lambda, k.t_f).expect("valid mini-slot state");
            cursor.state = state;
            placements.push(Placement { id, anchor: Anchor::new(best, cursor.cursor), delay: d, collision: best_q });
            break;
        }
    }
    ClassOutcome { placements, stop: None }
}

/// Estimated performance of one assigned device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceEstimate {
    pub delay: f64,
    pub collision_at_commit: f64,
    /// Collision estimate of the device's mini-slot once assignment ended.
    pub collision: f64,
}

/// Per-class summary of estimates: `[max delay, mean delay, max collision, mean collision]`.
pub type ClassSummary = [f64; 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfEstimates {
    pub per_device: Vec<Option<DeviceEstimate>>,
    pub cycles: CycleLengths,
}

impl PerfEstimates {
    pub fn class_summary(&self, scenario: &Scenario, class: PriorityClass) -> ClassSummary {
        let est: Vec<&DeviceEstimate> = scenario
            .devices
            .iter()
            .zip(&self.per_device)
            .filter(|(d, _)| d.class == class)
            .filter_map(|(_, e)| e.as_ref())
            .collect();
        if est.is_empty() {
            return [0.0; 4];
        }
        let n = est.len() as f64;
        [
            est.iter().map(|e| e.delay).fold(0.0, f64::max),
            est.iter().map(|e| e.delay).sum::<f64>() / n,
            est.iter().map(|e| e.collision).fold(0.0, f64::max),
            est.iter().map(|e| e.collision).sum::<f64>() / n,
        ]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AssignResult {
    pub assignment: Assignment,
    pub estimates: PerfEstimates,
}

fn sorted_class(scenario: &Scenario, class: PriorityClass) -> Vec<(DeviceId, f64)> {
    let mut v: Vec<(DeviceId, f64)> =
        scenario.devices.iter().filter(|d| d.class == class).map(|d| (d.id, d.rate)).collect();
    v.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    v
}

fn class_constants(
    class: PriorityClass,
    scenario: &Scenario,
    params: &ProtocolParams,
    cycles: &CycleLengths,
    opts: &AssignOptions,
) -> ClassConstants {
    ClassConstants {
        class,
        t_f: cycles.t_f(class),
        tau0: cycles.tau0(class),
        delta: scenario.qos.delta(class),
        rho: scenario.qos.rho(class),
        n_m: params.n_m,
        t_x: params.t_x,
        guard_margin: opts.guard_margin,
    }
}

/// Assigns all devices class by class (HP, RP, LP). Stops at the first
/// class that cannot be fully placed.
pub fn overall_assign(scenario: &Scenario, params: &ProtocolParams, opts: &AssignOptions) -> Result<AssignResult> {
    let report = validate_scenario(&scenario.devices, params, &scenario.qos);
    if !report.is_ok() {
        let msg: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
        return Err(Error::InvalidScenario(msg.join("; ")));
    }
    let cycles = derive_cycles(params, &scenario.rates())?;

    let mut table = SlotTable::new(params.r_l);
    let mut assignment = Assignment::empty(scenario.devices.len());
    let mut commit_estimates: Vec<Option<Placement>> = vec![None; scenario.devices.len()];
    let mut pool: Vec<u32> = (1..=params.r_h).collect();
    let mut prev_cycle = params.r_h;

    for class in PriorityClass::ALL {
        if class != PriorityClass::Hp {
            let next_cycle = params.cycle(class);
            pool = table.extend(prev_cycle, next_cycle, params.n_m);
            prev_cycle = next_cycle;
        }
        let devices = sorted_class(scenario, class);
        let k = class_constants(class, scenario, params, &cycles, opts);
        let outcome = core_assign(&devices, &pool, &mut table, &k);
        for p in &outcome.placements {
            assignment.anchors[p.id as usize - 1] = Some(p.anchor);
            commit_estimates[p.id as usize - 1] = Some(*p);
        }
        assignment.assigned_count += outcome.assigned();
        if outcome.stop.is_some() {
            assignment.failure = outcome.stop;
            break;
        }
    }
    assignment.success = assignment.assigned_count == scenario.devices.len();

    // Later joins raise a mini-slot's collision estimate; report its final value.
    let mut final_q: BTreeMap<Anchor, f64> = BTreeMap::new();
    for p in commit_estimates.iter().flatten() {
        let e = final_q.entry(p.anchor).or_insert(0.0);
        *e = e.max(p.collision);
    }
    let per_device = commit_estimates
        .iter()
        .map(|p| {
            p.map(|p| DeviceEstimate { delay: p.delay, collision_at_commit: p.collision, collision: final_q[&p.anchor] })
        })
        .collect();
    Ok(AssignResult { assignment, estimates: PerfEstimates { per_device, cycles } })
}

/// Default guard margins tried by [`assign_with_guard_ladder`], largest first.
pub const GUARD_LADDER: [f64; 6] = [1.5, 1.4, 1.3, 1.2, 1.1, 1.0];

/// Runs [`overall_assign`] with each margin of `ladder` in turn and keeps
/// the first fully successful result. Falls back to the last margin's
/// (failed) result when none succeeds. Returns the margin used.
pub fn assign_with_guard_ladder(
    scenario: &Scenario,
    params: &ProtocolParams,
    ladder: &[f64],
) -> Result<(AssignResult, f64)> {
    let mut last = None;
    for &g in ladder {
        let r = overall_assign(scenario, params, &AssignOptions { guard_margin: g })?;
        if r.assignment.success {
            return Ok((r, g));
        }
        last = Some((r, g));
    }
    last.ok_or_else(|| Error::InvalidScenario("empty guard ladder".into()))
}

/// Search-space limits of [`brute_force_assign`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BruteCaps {
    pub max_devices: usize,
    pub max_n_m: u32,
    pub max_r_l: u32,
}

impl Default for BruteCaps {
    fn default() -> Self {
        Self { max_devices: 8, max_n_m: 3, max_r_l: 4 }
    }
}

/// Estimates every device of a complete assignment with the same
/// estimators the greedy pass uses. Occupants of a mini-slot join in
/// ascending rate order; a device owning several slots takes its worst
/// one. Returns `None` when classes mix in a mini-slot, a collision
/// estimate exceeds its bound, or a device misses its delay bound.
pub fn evaluate_assignment(
    scenario: &Scenario,
    params: &ProtocolParams,
    cycles: &CycleLengths,
    anchors: &[Anchor],
    opts: &AssignOptions,
) -> Option<Vec<DeviceEstimate>> {
    let mut cells: BTreeMap<(u32, u32), (PriorityClass, Vec<Occupant>)> = BTreeMap::new();
    for (d, a) in scenario.devices.iter().zip(anchors) {
        for s in owned_slots(d.class, *a, params) {
            let cell = cells.entry((s, a.mini_slot)).or_insert((d.class, Vec::new()));
            if cell.0 != d.class {
                return None;
            }
            cell.1.push(Occupant { id: d.id, rate: d.rate });
        }
    }
    let mut est: Vec<Option<DeviceEstimate>> = vec![None; scenario.devices.len()];
    let mut gamma = 0.0;
    let mut current_slot = 0;
    for (&(slot, _), (class, occ)) in &cells {
        if slot != current_slot {
            current_slot = slot;
            gamma = 0.0;
        }
        let class = *class;
        let t_f = cycles.t_f(class);
        let state = fill_mini_slot(gamma, occ, t_f).ok()?;
        if opts.guard_margin * state.q_c > scenario.qos.rho(class) {
            return None;
        }
        let delay = overall_delay(state.tau, t_f, params.t_x, cycles.tau0(class));
        for o in occ {
            let e = est[o.id as usize - 1].get_or_insert(DeviceEstimate {
                delay,
                collision_at_commit: state.q_c,
                collision: state.q_c,
            });
            e.delay = e.delay.max(delay);
        }
        gamma = state.gamma;
    }
    let est: Vec<DeviceEstimate> = est.into_iter().collect::<Option<_>>()?;
    let ok = scenario.devices.iter().zip(&est).all(|(d, e)| e.delay <= scenario.qos.delta(d.class));
    ok.then_some(est)
}

/// Exhaustive search for an assignment meeting every threshold. Returns
/// `Ok(None)` when the instance is provably infeasible under the estimators.
pub fn brute_force_assign(
    scenario: &Scenario,
    params: &ProtocolParams,
    opts: &AssignOptions,
    caps: &BruteCaps,
) -> Result<Option<Assignment>> {
    if scenario.devices.len() > caps.max_devices || params.n_m > caps.max_n_m || params.r_l > caps.max_r_l {
        return Err(Error::CapExceeded(format!(
            "D={} n_m={} r_l={} (caps D<={} n_m<={} r_l<={})",
            scenario.devices.len(),
            params.n_m,
            params.r_l,
            caps.max_devices,
            caps.max_n_m,
            caps.max_r_l
        )));
    }
    let report = validate_scenario(&scenario.devices, params, &scenario.qos);
    if !report.is_ok() {
        return Err(Error::InvalidScenario(format!("{:?}", report.violations)));
    }
    if scenario.devices.is_empty() {
        return Ok(Some(Assignment::from_anchors(Vec::new())));
    }
    let cycles = derive_cycles(params, &scenario.rates())?;

    let mut order: Vec<usize> = (0..scenario.devices.len()).collect();
    order.sort_by(|&a, &b| {
        let (da, db) = (&scenario.devices[a], &scenario.devices[b]);
        da.class.cmp(&db.class).then(da.rate.total_cmp(&db.rate)).then(da.id.cmp(&db.id))
    });
    let mut search = Search {
        scenario,
        params,
        cycles: &cycles,
        opts,
        order,
        anchors: vec![Anchor::new(0, 0); scenario.devices.len()],
        cells: BTreeMap::new(),
    };
    Ok(search.run(0).then(|| Assignment::from_anchors(search.anchors.clone())))
}

struct Search<'a> {
    scenario: &'a Scenario,
    params: &'a ProtocolParams,
    cycles: &'a CycleLengths,
    opts: &'a AssignOptions,
    order: Vec<usize>,
    anchors: Vec<Anchor>,
    cells: BTreeMap<(u32, u32), (PriorityClass, Vec<Occupant>)>,
}

impl Search<'_> {
    fn run(&mut self, depth: usize) -> bool {
        if depth == self.order.len() {
            return evaluate_assignment(self.scenario, self.params, self.cycles, &self.anchors, self.opts).is_some();
        }
        let idx = self.order[depth];
        let dev = self.scenario.devices[idx].clone();
        for slot in 1..=self.params.cycle(dev.class) {
            for m in 1..=self.params.n_m {
                let anchor = Anchor::new(slot, m);
                let slots = owned_slots(dev.class, anchor, self.params);
                if slots.iter().any(|s| self.cells.get(&(*s, m)).is_some_and(|c| c.0 != dev.class)) {
                    continue;
                }
                for s in &slots {
                    self.cells.entry((*s, m)).or_insert((dev.class, Vec::new())).1.push(Occupant { id: dev.id, rate: dev.rate });
                }
                self.anchors[idx] = anchor;
                let found = self.partial_ok(&slots, m) && self.run(depth + 1);
                for s in &slots {
                    let cell = self.cells.get_mut(&(*s, m)).expect("cell was just filled");
                    cell.1.pop();
                    if cell.1.is_empty() {
                        self.cells.remove(&(*s, m));
                    }
                }
                if found {
                    return true;
                }
            }
        }
        false
    }

    /// Sound pruning: collision estimates only grow as occupants join, and
    /// a mini-slot that must end under its bound contributes at least
    /// `(1 - rho / g) * sum(t_f * rate)` arrivals to the ones after it.
    fn partial_ok(&self, touched: &[u32], m: u32) -> bool {
        for s in touched {
            let (class, occ) = &self.cells[&(*s, m)];
            let Ok(state) = fill_mini_slot(0.0, occ, self.cycles.t_f(*class)) else { return false };
            if self.opts.guard_margin * state.q_c > self.scenario.qos.rho(*class) {
                return false;
            }
        }
        let mut slot_seen = 0;
        let mut acc = 0.0;
        for (&(slot, _), (class, occ)) in &self.cells {
            if slot != slot_seen {
                slot_seen = slot;
                acc = 0.0;
            }
            let t_f = self.cycles.t_f(*class);
            let delay = overall_delay(adf_estimate(acc), t_f, self.params.t_x, self.cycles.tau0(*class));
            if delay > self.scenario.qos.delta(*class) {
                return false;
            }
            let keep = 1.0 - (self.scenario.qos.rho(*class) / self.opts.guard_margin).min(1.0);
            acc += keep * occ.iter().map(|o| t_f * o.rate).sum::<f64>();
        }
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{DeviceProfile, QosSpec};

    fn loose_qos() -> QosSpec {
        QosSpec::new([1.0, 1.0, 1.0], [0.5, 0.5, 0.5])
    }

    #[test]
    fn single_hp_device_takes_first_cell() {
        let sc = Scenario::new(vec![DeviceProfile::poisson(1, PriorityClass::Hp, 2.0)], QosSpec::industrial_default());
        let r = overall_assign(&sc, &ProtocolParams::new(8, 5, 45, 270), &AssignOptions::default()).unwrap();
        assert!(r.assignment.success);
        assert_eq!(r.assignment.anchor(1), Some(Anchor::new(1, 1)));
        assert_eq!(r.estimates.per_device[0].unwrap().collision, 0.0);
        assert_eq!(r.assignment.assigned_count, 1);
    }

    #[test]
    fn single_lp_device_takes_first_cell() {
        let sc = Scenario::new(vec![DeviceProfile::poisson(1, PriorityClass::Lp, 3.0)], QosSpec::industrial_default());
        let r = overall_assign(&sc, &ProtocolParams::new(8, 5, 45, 270), &AssignOptions::default()).unwrap();
        assert!(r.assignment.success);
        assert_eq!(r.assignment.anchor(1), Some(Anchor::new(1, 1)));
        assert_eq!(r.estimates.per_device[0].unwrap().collision, 0.0);
    }

    #[test]
    fn unreachable_delay_quits_with_device_id() {
        let params = ProtocolParams::new(8, 5, 45, 270);
        // delta below t_x alone can never be met since tau >= 1.
        let qos = QosSpec::new([100e-6, 10e-3, 80e-3], [0.015, 0.06, 0.1]);
        let sc = Scenario::new(
            vec![DeviceProfile::poisson(1, PriorityClass::Hp, 2.0), DeviceProfile::poisson(2, PriorityClass::Hp, 1.0)],
            qos,
        );
        let r = overall_assign(&sc, &params, &AssignOptions::default()).unwrap();
        assert!(!r.assignment.success);
        // Device 2 has the lower rate, so it is tried first.
        assert_eq!(r.assignment.failure, Some(AssignFailure::Delay { class: PriorityClass::Hp, device: 2 }));
        assert_eq!(r.assignment.assigned_count, 0);
    }

    #[test]
    fn zero_collision_bound_forces_next_mini_slot() {
        let params = ProtocolParams::new(4, 1, 1, 1);
        let qos = QosSpec::new([1.0, 1.0, 1.0], [0.0, 0.0, 0.0]);
        let sc = Scenario::new(
            vec![DeviceProfile::poisson(1, PriorityClass::Hp, 2.0), DeviceProfile::poisson(2, PriorityClass::Hp, 1.0)],
            qos,
        );
        let r = overall_assign(&sc, &params, &AssignOptions::default()).unwrap();
        assert!(r.assignment.success);
        assert_eq!(r.assignment.anchor(2), Some(Anchor::new(1, 1)));
        assert_eq!(r.assignment.anchor(1), Some(Anchor::new(1, 2)));
    }

    #[test]
    fn collision_stop_reports_count() {
        let params = ProtocolParams::new(1, 1, 1, 1);
        let qos = QosSpec::new([1.0, 1.0, 1.0], [0.0, 0.0, 0.0]);
        let sc = Scenario::new(
            vec![DeviceProfile::poisson(1, PriorityClass::Hp, 2.0), DeviceProfile::poisson(2, PriorityClass::Hp, 1.0)],
            qos,
        );
        let r = overall_assign(&sc, &params, &AssignOptions::default()).unwrap();
        assert!(!r.assignment.success);
        assert_eq!(r.assignment.failure, Some(AssignFailure::Collision { class: PriorityClass::Hp, assigned: 1 }));
    }

    #[test]
    fn first_devices_spread_over_slots() {
        let params = ProtocolParams::new(4, 3, 3, 3);
        let devs = (1..=4).map(|i| DeviceProfile::poisson(i, PriorityClass::Hp, i as f64)).collect();
        let r = overall_assign(&Scenario::new(devs, loose_qos()), &params, &AssignOptions::default()).unwrap();
        let slots: Vec<u32> = (1..=4).map(|i| r.assignment.anchor(i).unwrap().slot).collect();
        // Three empty slots absorb the first three; the fourth shares the lowest-index slot.
        assert_eq!(slots, vec![1, 2, 3, 1]);
    }

    #[test]
    fn rp_starts_after_hp_and_replicates() {
        let params = ProtocolParams::new(4, 2, 4, 8);
        let devs = vec![
            DeviceProfile::poisson(1, PriorityClass::Hp, 1.0),
            DeviceProfile::poisson(2, PriorityClass::Rp, 1.0),
            DeviceProfile::poisson(3, PriorityClass::Rp, 1.1),
            DeviceProfile::poisson(4, PriorityClass::Rp, 1.2),
        ];
        let r = overall_assign(&Scenario::new(devs.clone(), loose_qos()), &params, &AssignOptions::default()).unwrap();
        assert!(r.assignment.success);
        assert_eq!(r.assignment.anchor(1), Some(Anchor::new(1, 1)));
        // Every RP cursor is empty, so ties go to the lowest slot whatever the mini-slot.
        assert_eq!(r.assignment.anchor(2), Some(Anchor::new(1, 2)));
        assert_eq!(r.assignment.anchor(3), Some(Anchor::new(2, 1)));
        assert_eq!(r.assignment.anchor(4), Some(Anchor::new(3, 2)));
        assert!(crate::types::validate_assignment(&devs, &params, &r.assignment).is_empty());
    }

    #[test]
    fn full_hp_replicas_stay_closed_to_later_classes() {
        // With one mini-slot and r_h = 1 the HP device owns every slot.
        let params = ProtocolParams::new(1, 1, 2, 4);
        let devs = vec![DeviceProfile::poisson(1, PriorityClass::Hp, 8.0), DeviceProfile::poisson(2, PriorityClass::Lp, 80.0)];
        let r = overall_assign(&Scenario::new(devs, loose_qos()), &params, &AssignOptions::default()).unwrap();
        assert!(!r.assignment.success);
        assert_eq!(r.assignment.anchor(2), None);
        assert_eq!(r.assignment.failure, Some(AssignFailure::Collision { class: PriorityClass::Lp, assigned: 0 }));
    }

    #[test]
    fn deterministic() {
        let params = ProtocolParams::new(3, 2, 4, 8);
        let devs: Vec<_> = (1..=20)
            .map(|i| {
                let class = PriorityClass::ALL[(i % 3) as usize];
                DeviceProfile::poisson(i, class, 1.0 + (i % 5) as f64)
            })
            .collect();
        let sc = Scenario::new(devs, QosSpec::industrial_default());
        let a = overall_assign(&sc, &params, &AssignOptions::default()).unwrap();
        let b = overall_assign(&sc, &params, &AssignOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn overload_is_an_error() {
        let devs = vec![DeviceProfile::poisson(1, PriorityClass::Hp, 10_000.0)];
        let sc = Scenario::new(devs, QosSpec::industrial_default());
        assert!(matches!(
            overall_assign(&sc, &ProtocolParams::new(8, 5, 45, 270), &AssignOptions::default()),
            Err(Error::Overload { .. })
        ));
    }

    #[test]
    fn ladder_keeps_largest_working_margin() {
        let params = ProtocolParams::new(2, 1, 1, 1);
        // A shared mini-slot here is estimated at about 3.6e-5.
        let qos = QosSpec::new([1.0, 1.0, 1.0], [4.5e-5; 3]);
        let devs = (1..=3).map(|i| DeviceProfile::poisson(i, PriorityClass::Hp, 2.0)).collect();
        let sc = Scenario::new(devs, qos);
        // Two mini-slots for three devices force one pair to share.
        let (r, g) = assign_with_guard_ladder(&sc, &params, &GUARD_LADDER).unwrap();
        assert!(r.assignment.success);
        let q = r.estimates.per_device.iter().flatten().map(|e| e.collision).fold(0.0, f64::max);
        assert_eq!(g, 1.2);
        assert!(g * q <= 4.5e-5 && 1.3 * q > 4.5e-5);
        assert!(assign_with_guard_ladder(&sc, &params, &[]).is_err());
    }

    #[test]
    fn brute_force_edge_cases() {
        let caps = BruteCaps::default();
        let opts = AssignOptions::default();
        let empty = Scenario::new(vec![], QosSpec::industrial_default());
        assert!(brute_force_assign(&empty, &ProtocolParams::new(1, 1, 1, 1), &opts, &caps).unwrap().is_some());

        let qos = QosSpec::new([1.0, 1.0, 1.0], [0.0, 0.0, 0.0]);
        let two = Scenario::new(
            vec![DeviceProfile::poisson(1, PriorityClass::Hp, 1.0), DeviceProfile::poisson(2, PriorityClass::Hp, 1.0)],
            qos,
        );
        assert!(brute_force_assign(&two, &ProtocolParams::new(1, 1, 1, 1), &opts, &caps).unwrap().is_none());
        assert!(brute_force_assign(&two, &ProtocolParams::new(2, 1, 1, 1), &opts, &caps).unwrap().is_some());

        let big = ProtocolParams::new(4, 1, 1, 1);
        assert!(matches!(brute_force_assign(&two, &big, &opts, &caps), Err(Error::CapExceeded(_))));
    }

    #[test]
    fn greedy_result_passes_evaluation() {
        let params = ProtocolParams::new(3, 2, 4, 4);
        let devs: Vec<_> = (1..=8)
            .map(|i| DeviceProfile::poisson(i, PriorityClass::ALL[(i % 3) as usize], 0.5 + i as f64))
            .collect();
        let sc = Scenario::new(devs, QosSpec::new([5e-3, 5e-3, 5e-3], [0.2, 0.2, 0.2]));
        let r = overall_assign(&sc, &params, &AssignOptions::default()).unwrap();
        assert!(r.assignment.success);
        let anchors: Vec<Anchor> = r.assignment.anchors.iter().map(|a| a.unwrap()).collect();
        let est = evaluate_assignment(&sc, &params, &r.estimates.cycles, &anchors, &AssignOptions::default()).unwrap();
        for (e, g) in est.iter().zip(&r.estimates.per_device) {
            let g = g.unwrap();
            assert_eq!(e.delay, g.delay);
            assert_eq!(e.collision, g.collision);
        }
    }
}
