//! Domain types shared by every module: device profiles, protocol
//! parameters, QoS thresholds, assignments and the scenario validator.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// 1-based device index.
pub type DeviceId = u32;

/// Priority class of a device. The derived ordering `Hp < Rp < Lp` is used
/// for sorting and reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PriorityClass {
    #[serde(rename = "HP")]
    Hp,
    #[serde(rename = "RP")]
    Rp,
    #[serde(rename = "LP")]
    Lp,
}

impl PriorityClass {
    pub const ALL: [PriorityClass; 3] = [PriorityClass::Hp, PriorityClass::Rp, PriorityClass::Lp];

    pub fn index(self) -> usize {
        match self {
            PriorityClass::Hp => 0,
            PriorityClass::Rp => 1,
            PriorityClass::Lp => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PriorityClass::Hp => "HP",
            PriorityClass::Rp => "RP",
            PriorityClass::Lp => "LP",
        }
    }
}

impl fmt::Display for PriorityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PriorityClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "HP" => Ok(PriorityClass::Hp),
            "RP" => Ok(PriorityClass::Rp),
            "LP" => Ok(PriorityClass::Lp),
            other => Err(format!("unknown priority class `{other}`")),
        }
    }
}

/// Packet arrival pattern of one device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArrivalPattern {
    Poisson,
    /// Periodic arrivals with a uniform jitter of `±jitter` of the interval.
    QuasiPeriodic { jitter: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceProfile {
    pub id: DeviceId,
    pub class: PriorityClass,
    /// Mean packet arrival rate in packets per second.
    pub rate: f64,
    pub pattern: ArrivalPattern,
}

impl DeviceProfile {
    pub fn poisson(id: DeviceId, class: PriorityClass, rate: f64) -> Self {
        Self { id, class, rate, pattern: ArrivalPattern::Poisson }
    }
}

/// Protocol parameters: mini-slots per slot, per-class assignment cycles
/// (in slots) and the mini-slot / transmission durations (seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub n_m: u32,
    pub r_h: u32,
    pub r_r: u32,
    pub r_l: u32,
    pub t_m: f64,
    pub t_x: f64,
}

pub const DEFAULT_T_M: f64 = 9e-6;
pub const DEFAULT_T_X: f64 = 133e-6;

impl ProtocolParams {
    pub fn new(n_m: u32, r_h: u32, r_r: u32, r_l: u32) -> Self {
        Self { n_m, r_h, r_r, r_l, t_m: DEFAULT_T_M, t_x: DEFAULT_T_X }
    }

    /// Slot length when a transmission takes place.
    pub fn full_slot(&self) -> f64 {
        self.n_m as f64 * self.t_m + self.t_x
    }

    /// Slot length of an unclaimed slot truncated by synchronization sensing.
    pub fn idle_slot(&self) -> f64 {
        self.n_m as f64 * self.t_m
    }

    pub fn cycle(&self, class: PriorityClass) -> u32 {
        match class {
            PriorityClass::Hp => self.r_h,
            PriorityClass::Rp => self.r_r,
            PriorityClass::Lp => self.r_l,
        }
    }

    /// Structural checks on the parameters alone.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n_m == 0 {
            out.push(Violation::ZeroParameter("n_m"));
        }
        for (name, v) in [("r_h", self.r_h), ("r_r", self.r_r), ("r_l", self.r_l)] {
            if v == 0 {
                out.push(Violation::ZeroParameter(name));
            }
        }
        if self.r_h > 0 && !self.r_r.is_multiple_of(self.r_h) {
            out.push(Violation::CycleNotMultiple { outer: "r_r", inner: "r_h" });
        }
        if self.r_r > 0 && !self.r_l.is_multiple_of(self.r_r) {
            out.push(Violation::CycleNotMultiple { outer: "r_l", inner: "r_r" });
        }
        if !(self.t_m > 0.0) {
            out.push(Violation::NonPositiveDuration("t_m"));
        }
        if !(self.t_x > 0.0) {
            out.push(Violation::NonPositiveDuration("t_x"));
        }
        out
    }
}

/// Per-class delay (seconds) and collision-probability thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QosSpec {
    /// Indexed by [`PriorityClass::index`].
    pub delta: [f64; 3],
    pub rho: [f64; 3],
}

impl QosSpec {
    pub fn new(delta: [f64; 3], rho: [f64; 3]) -> Self {
        Self { delta, rho }
    }

    pub fn delta(&self, class: PriorityClass) -> f64 {
        self.delta[class.index()]
    }

    pub fn rho(&self, class: PriorityClass) -> f64 {
        self.rho[class.index()]
    }

    /// Delay 1/10/80 ms and collision 1.5/6/10 % used by the mixed
    /// 1000-device experiments.
    pub fn industrial_default() -> Self {
        Self { delta: [1e-3, 10e-3, 80e-3], rho: [0.015, 0.06, 0.10] }
    }
}

/// A set of devices with their QoS thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub devices: Vec<DeviceProfile>,
    pub qos: QosSpec,
}

impl Scenario {
    pub fn new(devices: Vec<DeviceProfile>, qos: QosSpec) -> Self {
        Self { devices, qos }
    }

    pub fn rates(&self) -> Vec<f64> {
        self.devices.iter().map(|d| d.rate).collect()
    }

    pub fn total_rate(&self) -> f64 {
        self.devices.iter().map(|d| d.rate).sum()
    }

    /// Device profile by 1-based id. Ids are dense, so this is an index.
    pub fn device(&self, id: DeviceId) -> Option<&DeviceProfile> {
        self.devices.get((id as usize).checked_sub(1)?).filter(|d| d.id == id)
    }

    pub fn class_count(&self, class: PriorityClass) -> usize {
        self.devices.iter().filter(|d| d.class == class).count()
    }
}

/// First slot / mini-slot owned by a device (both 1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Anchor {
    pub slot: u32,
    pub mini_slot: u32,
}

impl Anchor {
    pub fn new(slot: u32, mini_slot: u32) -> Self {
        Self { slot, mini_slot }
    }
}

/// Why an assignment run stopped before placing every device.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AssignFailure {
    /// No slot of the pool can meet the class delay bound for `device`.
    Delay { class: PriorityClass, device: DeviceId },
    /// Every candidate mini-slot violates the collision bound and no cursor
    /// can advance; `assigned` devices of the class had been placed.
    Collision { class: PriorityClass, assigned: usize },
}

/// Device-to-(slot, mini-slot) mapping. Anchors are indexed by device id - 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub anchors: Vec<Option<Anchor>>,
    /// `F_s`: every device was placed under its thresholds.
    pub success: bool,
    pub assigned_count: usize,
    pub failure: Option<AssignFailure>,
}

impl Assignment {
    pub fn empty(devices: usize) -> Self {
        Self { anchors: vec![None; devices], success: false, assigned_count: 0, failure: None }
    }

    /// Builds a complete assignment from explicit anchors (one per device).
    pub fn from_anchors(anchors: Vec<Anchor>) -> Self {
        let n = anchors.len();
        Self { anchors: anchors.into_iter().map(Some).collect(), success: true, assigned_count: n, failure: None }
    }

    pub fn anchor(&self, id: DeviceId) -> Option<Anchor> {
        self.anchors.get((id as usize).checked_sub(1)?).copied().flatten()
    }
}

/// Slots (1..=r_l) in which a device anchored at `anchor` may transmit.
pub fn owned_slots(class: PriorityClass, anchor: Anchor, params: &ProtocolParams) -> Vec<u32> {
    let step = match class {
        PriorityClass::Hp => params.r_h,
        PriorityClass::Rp => params.r_r,
        PriorityClass::Lp => return vec![anchor.slot],
    };
    (anchor.slot..=params.r_l).step_by(step.max(1) as usize).collect()
}

/// Scheduler bookkeeping for one mini-slot during assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiniSlotState {
    /// Collision probability of the mini-slot (maximum over its occupants).
    pub q_c: f64,
    /// Aggregated (collision-discounted) arrival rate.
    pub lambda_agg: f64,
    /// Expected arrivals per cycle accumulated over mini-slots 1..=m.
    pub gamma: f64,
    /// Access delay in frames.
    pub tau: f64,
    pub occupants: Vec<Occupant>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occupant {
    pub id: DeviceId,
    pub rate: f64,
}

impl MiniSlotState {
    /// Empty mini-slot whose preceding mini-slots carry `gamma_pre` arrivals.
    pub fn empty(gamma_pre: f64, tau: f64) -> Self {
        Self { q_c: 0.0, lambda_agg: 0.0, gamma: gamma_pre, tau, occupants: Vec::new() }
    }

    pub fn is_empty(&self) -> bool {
        self.occupants.is_empty()
    }
}

/// One scenario or assignment rule breach.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    ZeroParameter(&'static str),
    CycleNotMultiple { outer: &'static str, inner: &'static str },
    NonPositiveDuration(&'static str),
    NonPositiveRate { id: DeviceId },
    InvalidJitter { id: DeviceId },
    DuplicateId { id: DeviceId },
    NonDenseIds,
    NonPositiveDelay { class: PriorityClass },
    InvalidCollisionThreshold { class: PriorityClass },
    AnchorCountMismatch { expected: usize, found: usize },
    SlotOutOfRange { id: DeviceId, slot: u32, max: u32 },
    MiniSlotOutOfRange { id: DeviceId, mini_slot: u32 },
    MixedClasses { slot: u32, mini_slot: u32 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ZeroParameter(p) => write!(f, "{p} must be at least 1"),
            Violation::CycleNotMultiple { outer, inner } => write!(f, "{outer} not multiple of {inner}"),
            Violation::NonPositiveDuration(p) => write!(f, "{p} must be positive"),
            Violation::NonPositiveRate { id } => write!(f, "device {id} has a nonpositive rate"),
            Violation::InvalidJitter { id } => write!(f, "device {id} has jitter outside [0, 0.5)"),
            Violation::DuplicateId { id } => write!(f, "duplicate device id {id}"),
            Violation::NonDenseIds => write!(f, "device ids are not 1..=D in order"),
            Violation::NonPositiveDelay { class } => write!(f, "{class} delay bound must be positive"),
            Violation::InvalidCollisionThreshold { class } => {
                write!(f, "{class} collision threshold outside [0, 1]")
            }
            Violation::AnchorCountMismatch { expected, found } => {
                write!(f, "assignment has {found} entries for {expected} devices")
            }
            Violation::SlotOutOfRange { id, slot, max } => {
                write!(f, "device {id} anchored at slot {slot}, class cycle allows 1..={max}")
            }
            Violation::MiniSlotOutOfRange { id, mini_slot } => {
                write!(f, "device {id} anchored at mini-slot {mini_slot} outside 1..=n_m")
            }
            Violation::MixedClasses { slot, mini_slot } => {
                write!(f, "mini-slot {mini_slot} of slot {slot} hosts more than one class")
            }
        }
    }
}

/// Outcome of [`validate_scenario`]. Violations are data, not errors.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_scenario(profiles: &[DeviceProfile], params: &ProtocolParams, qos: &QosSpec) -> ValidationReport {
    let mut report = ValidationReport { violations: params.violations(), warnings: Vec::new() };
    if profiles.is_empty() {
        report.warnings.push("no devices".to_string());
    }

    let mut seen = HashSet::new();
    let mut dense = true;
    for (k, d) in profiles.iter().enumerate() {
        if !seen.insert(d.id) {
            report.violations.push(Violation::DuplicateId { id: d.id });
        }
        if d.id as usize != k + 1 {
            dense = false;
        }
        if !(d.rate > 0.0) || !d.rate.is_finite() {
            report.violations.push(Violation::NonPositiveRate { id: d.id });
        }
        if let ArrivalPattern::QuasiPeriodic { jitter } = d.pattern {
            if !(0.0..0.5).contains(&jitter) {
                report.violations.push(Violation::InvalidJitter { id: d.id });
            }
        }
    }
    if !dense && seen.len() == profiles.len() {
        report.violations.push(Violation::NonDenseIds);
    }

    for class in PriorityClass::ALL {
        if !(qos.delta(class) > 0.0) {
            report.violations.push(Violation::NonPositiveDelay { class });
        }
        if !(0.0..=1.0).contains(&qos.rho(class)) {
            report.violations.push(Violation::InvalidCollisionThreshold { class });
        }
    }

    let load: f64 = profiles.iter().map(|d| d.rate).sum::<f64>() * params.t_x;
    if load >= 1.0 {
        report.warnings.push(format!("offered load {load:.3} >= 1: cycle length is unbounded"));
    }
    if params.r_l > 0 {
        // A rough per-cycle arrival count above 1 pushes the collision update past its valid range.
        let t_f = params.r_l as f64 * params.idle_slot() / (1.0 - load).max(f64::MIN_POSITIVE);
        if let Some(d) = profiles.iter().find(|d| d.rate * t_f >= 1.0) {
            report
                .warnings
                .push(format!("device {} expects {:.2} arrivals per LP cycle", d.id, d.rate * t_f));
        }
    }
    report
}

/// Checks that an assignment respects class cycle ranges, mini-slot range
/// and the one-class-per-mini-slot rule after replication. Unassigned
/// devices are allowed.
pub fn validate_assignment(profiles: &[DeviceProfile], params: &ProtocolParams, assignment: &Assignment) -> Vec<Violation> {
    let mut out = Vec::new();
    if assignment.anchors.len() != profiles.len() {
        out.push(Violation::AnchorCountMismatch { expected: profiles.len(), found: assignment.anchors.len() });
        return out;
    }
    let mut cells: BTreeMap<(u32, u32), PriorityClass> = BTreeMap::new();
    let mut mixed = HashSet::new();
    for (d, anchor) in profiles.iter().zip(&assignment.anchors) {
        let Some(anchor) = anchor else { continue };
        let max = params.cycle(d.class);
        if anchor.slot == 0 || anchor.slot > max {
            out.push(Violation::SlotOutOfRange { id: d.id, slot: anchor.slot, max });
            continue;
        }
        if anchor.mini_slot == 0 || anchor.mini_slot > params.n_m {
            out.push(Violation::MiniSlotOutOfRange { id: d.id, mini_slot: anchor.mini_slot });
            continue;
        }
        for slot in owned_slots(d.class, *anchor, params) {
            let key = (slot, anchor.mini_slot);
            match cells.get(&key) {
                Some(c) if *c != d.class => {
                    if mixed.insert(key) {
                        out.push(Violation::MixedClasses { slot, mini_slot: anchor.mini_slot });
                    }
                }
                Some(_) => {}
                None => {
                    cells.insert(key, d.class);
                }
            }
        }
    }
    out
}
