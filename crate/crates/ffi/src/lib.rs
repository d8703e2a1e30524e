//! C ABI over the `msmac` crate.
//!
//! Objects are opaque heap handles created by `msmac_*_load`/`msmac_assign`/
//! `msmac_simulate` and released with the matching `*_free`. Every fallible
//! call returns an [`MsmacStatus`]; on failure `msmac_last_error` gives a
//! message for the calling thread, valid until that thread's next call.
//! Panics are caught at the boundary and reported as `MSMAC_STATUS_PANIC`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use msmac::assigner::{assign_with_guard_ladder, overall_assign, AssignOptions, GUARD_LADDER};
use msmac::config::Config;
use msmac::sim::{simulate, PerfReport, SimOptions};
use msmac::surrogate::{select_params, TrainedModel};
use msmac::{datastore, Assignment, Error, PriorityClass, ProtocolParams, Scenario};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsmacStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    SchemaVersion = 5,
    Overload = 6,
    NoFeasibleCandidate = 7,
    NotFound = 8,
    Runtime = 9,
    Panic = 10,
}

/// Protocol parameters, durations in seconds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsmacParams {
    pub n_m: u32,
    pub r_h: u32,
    pub r_r: u32,
    pub r_l: u32,
    pub t_m: f64,
    pub t_x: f64,
}

impl From<MsmacParams> for ProtocolParams {
    fn from(p: MsmacParams) -> Self {
        Self { n_m: p.n_m, r_h: p.r_h, r_r: p.r_r, r_l: p.r_l, t_m: p.t_m, t_x: p.t_x }
    }
}

/// Simulation switches; `warmup` is in seconds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MsmacSimOptions {
    pub duration: f64,
    pub warmup: f64,
    pub seed: u64,
    pub buffer: bool,
    pub synccs: bool,
}

/// Per-class results; delays in seconds.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MsmacClassStats {
    pub devices: usize,
    pub mean_delay: f64,
    pub max_delay: f64,
    pub mean_collision: f64,
    pub max_collision: f64,
    pub qos_met: bool,
}

pub struct MsmacScenario(Scenario);
pub struct MsmacAssignment(Assignment);
pub struct MsmacReport(PerfReport);
pub struct MsmacModel(TrainedModel);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> MsmacStatus {
    match e {
        Error::Io { .. } => MsmacStatus::Io,
        Error::Parse { .. } => MsmacStatus::Parse,
        Error::SchemaVersion { .. } => MsmacStatus::SchemaVersion,
        Error::Overload { .. } => MsmacStatus::Overload,
        Error::NoFeasibleCandidate => MsmacStatus::NoFeasibleCandidate,
        Error::InvalidScenario(_) | Error::Range { .. } | Error::Shape(_) => MsmacStatus::InvalidArgument,
        _ => MsmacStatus::Runtime,
    }
}

struct Fail(MsmacStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> MsmacStatus {
    set_error("");
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MsmacStatus::Ok,
        Ok(Err(Fail(s, msg))) => {
            set_error(&msg);
            s
        }
        Err(_) => {
            set_error("panic inside msmac");
            MsmacStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| Fail(MsmacStatus::NullPointer, format!("{what} is null")))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Fail> {
    if p.is_null() {
        return Err(Fail(MsmacStatus::NullPointer, "path is null".into()));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| Fail(MsmacStatus::InvalidArgument, "path is not UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(MsmacStatus::NullPointer, "output pointer is null".into()));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

fn class_arg(class: u32) -> Result<PriorityClass, Fail> {
    PriorityClass::ALL
        .get(class as usize)
        .copied()
        .ok_or_else(|| Fail(MsmacStatus::InvalidArgument, format!("class index {class} (expected 0 = HP, 1 = RP, 2 = LP)")))
}

/// Message for the last failed call on this thread; empty after success.
#[no_mangle]
pub extern "C" fn msmac_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn msmac_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parameters with the default 9 us mini-slot and 133 us transmission.
#[no_mangle]
pub extern "C" fn msmac_params_new(n_m: u32, r_h: u32, r_r: u32, r_l: u32) -> MsmacParams {
    let p = ProtocolParams::new(n_m, r_h, r_r, r_l);
    MsmacParams { n_m, r_h, r_r, r_l, t_m: p.t_m, t_x: p.t_x }
}

#[no_mangle]
pub unsafe extern "C" fn msmac_params_validate(params: *const MsmacParams) -> MsmacStatus {
    guard(|| {
        let p: ProtocolParams = (*deref(params, "params")?).into();
        match p.violations().first() {
            None => Ok(()),
            Some(v) => Err(Fail(MsmacStatus::InvalidArgument, format!("{v:?}"))),
        }
    })
}

/// Builds the scenario described by a TOML config's `[devices]` and `[qos]`.
#[no_mangle]
pub unsafe extern "C" fn msmac_scenario_from_config(path: *const c_char, seed: u64, out: *mut *mut MsmacScenario) -> MsmacStatus {
    guard(|| {
        let cfg = Config::load(&path_arg(path)?)?;
        store(out, MsmacScenario(cfg.scenario(seed)?))
    })
}

#[no_mangle]
pub unsafe extern "C" fn msmac_scenario_load(path: *const c_char, out: *mut *mut MsmacScenario) -> MsmacStatus {
    guard(|| store(out, MsmacScenario(datastore::load_scenario(&path_arg(path)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn msmac_scenario_save(s: *const MsmacScenario, path: *const c_char) -> MsmacStatus {
    guard(|| Ok(datastore::save_scenario(&path_arg(path)?, &deref(s, "scenario")?.0)?))
}

/// Number of devices, or 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn msmac_scenario_device_count(s: *const MsmacScenario) -> usize {
    s.as_ref().map_or(0, |s| s.0.devices.len())
}

#[no_mangle]
pub unsafe extern "C" fn msmac_scenario_free(s: *mut MsmacScenario) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// One assignment pass with guard margin `guard_margin` (1.0 for none).
/// An incomplete assignment is still returned; check
/// `msmac_assignment_success`.
#[no_mangle]
pub unsafe extern "C" fn msmac_assign(
    s: *const MsmacScenario,
    params: *const MsmacParams,
    guard_margin: f64,
    out: *mut *mut MsmacAssignment,
) -> MsmacStatus {
    guard(|| {
        let p: ProtocolParams = (*deref(params, "params")?).into();
        let r = overall_assign(&deref(s, "scenario")?.0, &p, &AssignOptions { guard_margin })?;
        store(out, MsmacAssignment(r.assignment))
    })
}

/// Tries the default guard ladder from the largest margin down and keeps
/// the first complete assignment. The margin used is written to
/// `out_margin` when non-null.
#[no_mangle]
pub unsafe extern "C" fn msmac_assign_auto(
    s: *const MsmacScenario,
    params: *const MsmacParams,
    out: *mut *mut MsmacAssignment,
    out_margin: *mut f64,
) -> MsmacStatus {
    guard(|| {
        let p: ProtocolParams = (*deref(params, "params")?).into();
        let (r, g) = assign_with_guard_ladder(&deref(s, "scenario")?.0, &p, &GUARD_LADDER)?;
        if !out_margin.is_null() {
            *out_margin = g;
        }
        store(out, MsmacAssignment(r.assignment))
    })
}

#[no_mangle]
pub unsafe extern "C" fn msmac_assignment_success(a: *const MsmacAssignment) -> bool {
    a.as_ref().is_some_and(|a| a.0.success)
}

#[no_mangle]
pub unsafe extern "C" fn msmac_assignment_assigned_count(a: *const MsmacAssignment) -> usize {
    a.as_ref().map_or(0, |a| a.0.assigned_count)
}

/// Anchor of `device_id`; `MSMAC_STATUS_NOT_FOUND` when unassigned.
#[no_mangle]
pub unsafe extern "C" fn msmac_assignment_anchor(
    a: *const MsmacAssignment,
    device_id: u32,
    out_slot: *mut u32,
    out_mini_slot: *mut u32,
) -> MsmacStatus {
    guard(|| {
        let anchor = deref(a, "assignment")?
            .0
            .anchor(device_id)
            .ok_or_else(|| Fail(MsmacStatus::NotFound, format!("device {device_id} has no anchor")))?;
        if out_slot.is_null() || out_mini_slot.is_null() {
            return Err(Fail(MsmacStatus::NullPointer, "output pointer is null".into()));
        }
        *out_slot = anchor.slot;
        *out_mini_slot = anchor.mini_slot;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn msmac_assignment_save(a: *const MsmacAssignment, path: *const c_char) -> MsmacStatus {
    guard(|| Ok(datastore::save_assignment(&path_arg(path)?, &deref(a, "assignment")?.0)?))
}

#[no_mangle]
pub unsafe extern "C" fn msmac_assignment_free(a: *mut MsmacAssignment) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Defaults: buffered queues, SyncCS on, 5% warm-up.
#[no_mangle]
pub extern "C" fn msmac_sim_options_new(duration: f64, seed: u64) -> MsmacSimOptions {
    let o = SimOptions::new(duration, seed);
    MsmacSimOptions { duration, warmup: o.warmup, seed, buffer: o.buffer, synccs: o.synccs }
}

#[no_mangle]
pub unsafe extern "C" fn msmac_simulate(
    s: *const MsmacScenario,
    params: *const MsmacParams,
    a: *const MsmacAssignment,
    opts: *const MsmacSimOptions,
    out: *mut *mut MsmacReport,
) -> MsmacStatus {
    guard(|| {
        let sc = &deref(s, "scenario")?.0;
        let p: ProtocolParams = (*deref(params, "params")?).into();
        let o = *deref(opts, "options")?;
        let sim = SimOptions { buffer: o.buffer, synccs: o.synccs, warmup: o.warmup, ..SimOptions::new(o.duration, o.seed) };
        let r = simulate(&sc.devices, &p, &sc.qos, &deref(a, "assignment")?.0, &sim)?;
        store(out, MsmacReport(r))
    })
}

/// True when every device met its class thresholds.
#[no_mangle]
pub unsafe extern "C" fn msmac_report_qos_met(r: *const MsmacReport) -> bool {
    r.as_ref().is_some_and(|r| r.0.qos_met)
}

/// Statistics of class 0 (HP), 1 (RP) or 2 (LP); `MSMAC_STATUS_NOT_FOUND`
/// when the class has no devices.
#[no_mangle]
pub unsafe extern "C" fn msmac_report_class(r: *const MsmacReport, class: u32, out: *mut MsmacClassStats) -> MsmacStatus {
    guard(|| {
        let c = class_arg(class)?;
        let stats = deref(r, "report")?
            .0
            .class(c)
            .ok_or_else(|| Fail(MsmacStatus::NotFound, format!("no {c} devices in report")))?;
        if out.is_null() {
            return Err(Fail(MsmacStatus::NullPointer, "output pointer is null".into()));
        }
        *out = MsmacClassStats {
            devices: stats.devices,
            mean_delay: stats.mean_delay,
            max_delay: stats.max_delay,
            mean_collision: stats.mean_collision,
            max_collision: stats.max_collision,
            qos_met: stats.qos_met,
        };
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn msmac_report_save(r: *const MsmacReport, path: *const c_char) -> MsmacStatus {
    guard(|| Ok(datastore::save_report(&path_arg(path)?, &deref(r, "report")?.0)?))
}

#[no_mangle]
pub unsafe extern "C" fn msmac_report_free(r: *mut MsmacReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

#[no_mangle]
pub unsafe extern "C" fn msmac_model_load(path: *const c_char, out: *mut *mut MsmacModel) -> MsmacStatus {
    guard(|| store(out, MsmacModel(datastore::load_model(&path_arg(path)?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn msmac_model_free(m: *mut MsmacModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Ranks `count` candidates with the surrogate and writes the index of the
/// best one to `out_index` and its relative slack to `out_slack` (if
/// non-null).
#[no_mangle]
pub unsafe extern "C" fn msmac_select(
    m: *const MsmacModel,
    s: *const MsmacScenario,
    candidates: *const MsmacParams,
    count: usize,
    out_index: *mut usize,
    out_slack: *mut f64,
) -> MsmacStatus {
    guard(|| {
        if candidates.is_null() && count > 0 {
            return Err(Fail(MsmacStatus::NullPointer, "candidates is null".into()));
        }
        if out_index.is_null() {
            return Err(Fail(MsmacStatus::NullPointer, "output pointer is null".into()));
        }
        let list: Vec<ProtocolParams> = if count == 0 {
            Vec::new()
        } else {
            std::slice::from_raw_parts(candidates, count).iter().map(|&p| p.into()).collect()
        };
        let sel = select_params(&deref(s, "scenario")?.0, &list, &deref(m, "model")?.0)?;
        *out_index = list.iter().position(|p| *p == sel.chosen.params).unwrap_or(0);
        if !out_slack.is_null() {
            *out_slack = sel.chosen.slack;
        }
        Ok(())
    })
}
