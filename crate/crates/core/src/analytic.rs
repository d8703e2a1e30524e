//! Closed-form estimators used by the assignment algorithms: cycle
//! lengths, base and overall delay, access delay in frames, and the
//! per-mini-slot collision / load updates applied when a device joins.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{DeviceId, MiniSlotState, Occupant, PriorityClass, ProtocolParams};

/// Cycle lengths (seconds) of the three classes and their base delays.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleLengths {
    pub t_f: [f64; 3],
    pub tau0: [f64; 3],
}

impl CycleLengths {
    pub fn t_f(&self, class: PriorityClass) -> f64 {
        self.t_f[class.index()]
    }

    pub fn tau0(&self, class: PriorityClass) -> f64 {
        self.tau0[class.index()]
    }
}

/// Largest HP cycle (in slots) compatible with `delta_h`, assuming every HP
/// device sits in the first mini-slot. Zero when no cycle fits.
pub fn max_hp_cycle(delta_h: f64, n_m: u32, t_m: f64, t_x: f64) -> u32 {
    let ratio = 2.0 * delta_h / (n_m as f64 * t_m + t_x);
    // Guard against ratios like 0.99999999999 that are 1 in exact arithmetic.
    (ratio * (1.0 + 1e-12)).floor().max(0.0) as u32
}

/// Expected LP cycle length under synchronization sensing:
/// `r_l n_m t_m / (1 - sum(rates) t_x)`.
pub fn lp_cycle_length(r_l: u32, n_m: u32, t_m: f64, t_x: f64, rates: &[f64]) -> Result<f64> {
    let load = rates.iter().sum::<f64>() * t_x;
    if load >= 1.0 {
        return Err(Error::Overload { load });
    }
    Ok(r_l as f64 * n_m as f64 * t_m / (1.0 - load))
}

/// Frame length when idle slots are not truncated: every slot is full length.
pub fn fixed_frame_length(slots: u32, params: &ProtocolParams) -> f64 {
    slots as f64 * params.full_slot()
}

pub fn derive_cycles(params: &ProtocolParams, rates: &[f64]) -> Result<CycleLengths> {
    let t_l = lp_cycle_length(params.r_l, params.n_m, params.t_m, params.t_x, rates)?;
    Ok(cycles_from_lp(params, t_l))
}

/// Scales an LP cycle length down to the HP and RP cycles.
pub fn cycles_from_lp(params: &ProtocolParams, t_l: f64) -> CycleLengths {
    let r_l = params.r_l as f64;
    let t_f = [t_l * params.r_h as f64 / r_l, t_l * params.r_r as f64 / r_l, t_l];
    CycleLengths { t_f, tau0: t_f.map(|t| t / 2.0) }
}

/// Access delay in frames for a mini-slot whose preceding mini-slots carry
/// `gamma_preceding` expected arrivals per cycle.
///
/// Blocking by earlier mini-slots is treated as a Poisson event with mean
/// `gamma_preceding`: each cycle is lost with probability `1 - exp(-gamma)`,
/// so the expected number of frames until the mini-slot wins is `exp(gamma)`.
pub fn adf_estimate(gamma_preceding: f64) -> f64 {
    gamma_preceding.max(0.0).exp()
}

/// Base plus access delay: `(tau - 1) t_f + t_x + tau0`.
pub fn overall_delay(tau: f64, t_f: f64, t_x: f64, tau0: f64) -> f64 {
    (tau - 1.0) * t_f + t_x + tau0
}

/// Mini-slot collision probability after a device with rate `lambda` joins.
/// The first occupant cannot collide with anyone.
pub fn collision_after_add(q_c: f64, t_f: f64, lambda: f64, first: bool) -> f64 {
    if first {
        return 0.0;
    }
    (1.0 - (1.0 - q_c) * (1.0 - t_f * lambda)).clamp(0.0, 1.0)
}

/// Applies the join update to `state` for device `id` with rate `lambda`.
/// Returns the new state and `n_i^c`, the expected number of simultaneous
/// transmitters seen by the new device. `tau` is carried over unchanged:
/// sharing a mini-slot does not alter its access delay.
pub fn state_after_add(state: &MiniSlotState, id: DeviceId, lambda: f64, t_f: f64) -> Result<(MiniSlotState, f64)> {
    let mut next = state.clone();
    next.occupants.push(Occupant { id, rate: lambda });
    if state.is_empty() {
        next.q_c = 0.0;
        next.lambda_agg = lambda;
        next.gamma = state.gamma + t_f * lambda;
        return Ok((next, 1.0));
    }
    let q = collision_after_add(state.q_c, t_f, lambda, false);
    let others: f64 = state.occupants.iter().map(|o| o.rate).sum();
    let n_c = 1.0 + state.tau * t_f * others;
    if !(n_c >= 1.0) {
        return Err(Error::InvalidState(format!("n_c = {n_c} < 1")));
    }
    let effective = 1.0 - q / n_c;
    next.q_c = q;
    next.lambda_agg = state.lambda_agg + lambda * effective;
    next.gamma = state.gamma + t_f * lambda * effective;
    Ok((next, n_c))
}

/// Replays joins in ascending-rate order (ties by id) into an empty
/// mini-slot, the order in which the assigner adds devices.
pub fn fill_mini_slot(gamma_pre: f64, occupants: &[Occupant], t_f: f64) -> Result<MiniSlotState> {
    let mut sorted = occupants.to_vec();
    sorted.sort_by(|a, b| a.rate.total_cmp(&b.rate).then(a.id.cmp(&b.id)));
    let mut state = MiniSlotState::empty(gamma_pre, adf_estimate(gamma_pre));
    for o in sorted {
        state = state_after_add(&state, o.id, o.rate, t_f)?.0;
    }
    Ok(state)
}

/// Estimated delay of each mini-slot of a single slot whose occupants are
/// given per mini-slot, for a frame of length `t_f`.
pub fn mini_slot_delay_curve(groups: &[Vec<Occupant>], t_f: f64, t_x: f64) -> Result<Vec<f64>> {
    let mut gamma = 0.0;
    let mut out = Vec::with_capacity(groups.len());
    for g in groups {
        let state = fill_mini_slot(gamma, g, t_f)?;
        out.push(overall_delay(state.tau, t_f, t_x, t_f / 2.0));
        gamma = state.gamma;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TM: f64 = 9e-6;
    const TX: f64 = 133e-6;

    fn rel(a: f64, b: f64) -> f64 {
        if b == 0.0 {
            a.abs()
        } else {
            ((a - b) / b).abs()
        }
    }

    #[test]
    fn hp_cycle_bound() {
        assert_eq!(max_hp_cycle(1e-3, 8, TM, TX), 9);
        assert_eq!(max_hp_cycle(10e-3, 10, TM, TX), 89);
        let slot = 8.0 * TM + TX;
        assert_eq!(max_hp_cycle(slot / 2.0, 8, TM, TX), 1);
        assert_eq!(max_hp_cycle(slot / 2.0 * 0.99, 8, TM, TX), 0);
    }

    #[test]
    fn lp_cycle() {
        let rates = vec![3.0; 1000];
        let t = lp_cycle_length(270, 8, TM, TX, &rates).unwrap();
        assert!(rel(t, 0.03234608985024958) < 1e-12, "{t}");
        assert_eq!(lp_cycle_length(270, 8, TM, TX, &[]).unwrap(), 270.0 * 8.0 * TM);
        let saturating = vec![1.0 / TX];
        assert!(matches!(lp_cycle_length(270, 8, TM, TX, &saturating), Err(Error::Overload { .. })));
    }

    #[test]
    fn cycle_ratios() {
        let rates = vec![3.0; 1000];
        let c = derive_cycles(&ProtocolParams::new(8, 5, 45, 270), &rates).unwrap();
        assert!(rel(c.t_f(PriorityClass::Rp), 0.005391014975041597) < 1e-12);
        assert!(rel(c.t_f(PriorityClass::Hp), 0.0005990016638935107) < 1e-12);
        assert!(rel(c.tau0(PriorityClass::Hp), 0.00029950083194675537) < 1e-12);

        let same = derive_cycles(&ProtocolParams::new(8, 6, 6, 6), &rates).unwrap();
        assert_eq!(same.t_f[0], same.t_f[2]);
        assert_eq!(same.t_f[1], same.t_f[2]);

        let short = derive_cycles(&ProtocolParams::new(8, 5, 35, 140), &rates).unwrap();
        assert!(rel(short.t_f(PriorityClass::Lp), 0.016772046589018305) < 1e-12);
    }

    #[test]
    fn adf_values() {
        assert_eq!(adf_estimate(0.0), 1.0);
        assert!(rel(adf_estimate(0.2), 1.2214027581601699) < 1e-12);
        assert!(rel(adf_estimate(1.0), std::f64::consts::E) < 1e-12);
    }

    #[test]
    fn overall_delay_values() {
        let t_h = 0.0005990016638935107;
        assert!(rel(overall_delay(1.0, t_h, TX, t_h / 2.0), 0.00043250083194675535) < 1e-12);
        assert_eq!(overall_delay(1.0, 0.5, 0.0, 0.0), 0.0);
        assert!(rel(overall_delay(2.0, 10e-3, TX, 5e-3), 0.015133) < 1e-12);
    }

    #[test]
    fn collision_values() {
        assert_eq!(collision_after_add(0.3, 10e-3, 5.0, true), 0.0);
        assert!(rel(collision_after_add(0.0, 10e-3, 5.0, false), 0.05) < 1e-12);
        assert!(rel(collision_after_add(0.05, 10e-3, 2.0, false), 0.069) < 1e-12);
        assert_eq!(collision_after_add(0.5, 1.0, 5.0, false), 1.0);
    }

    #[test]
    fn first_occupant_update() {
        let s = MiniSlotState::empty(0.1, adf_estimate(0.1));
        let (n, n_c) = state_after_add(&s, 1, 2.0, 10e-3).unwrap();
        assert_eq!(n_c, 1.0);
        assert_eq!(n.q_c, 0.0);
        assert_eq!(n.lambda_agg, 2.0);
        assert!(rel(n.gamma - 0.1, 0.02) < 1e-12);
        assert_eq!(n.tau, s.tau);
    }

    #[test]
    fn shared_occupant_update() {
        let s = MiniSlotState::empty(0.0, 1.0);
        let (s, _) = state_after_add(&s, 1, 3.0, 10e-3).unwrap();
        let (s2, n_c) = state_after_add(&s, 2, 2.0, 10e-3).unwrap();
        assert!(rel(n_c, 1.03) < 1e-12);
        assert!(rel(s2.q_c, 0.020000000000000018) < 1e-12);
        assert!(rel(s2.lambda_agg, 4.961165048543689) < 1e-12);
        assert!(rel(s2.gamma - s.gamma, 0.019611650485436893) < 1e-12);
        assert_eq!(s2.tau, s.tau);
    }

    #[test]
    fn gamma_sums_discounted_rates() {
        let t_f = 5e-3;
        let rates = [1.0, 1.5, 2.0, 4.0];
        let mut s = MiniSlotState::empty(0.0, 1.0);
        let mut expected = 0.0;
        for (k, r) in rates.iter().enumerate() {
            let (next, n_c) = state_after_add(&s, k as u32 + 1, *r, t_f).unwrap();
            expected += t_f * r * if k == 0 { 1.0 } else { 1.0 - next.q_c / n_c };
            s = next;
        }
        assert!(rel(s.gamma, expected) < 1e-12);
        assert!(rel(s.lambda_agg * t_f, expected) < 1e-12);
    }

    #[test]
    fn delay_curve_increases_with_index() {
        let groups: Vec<Vec<Occupant>> =
            (0..10).map(|m| vec![Occupant { id: m + 1, rate: 0.5 + m as f64 * 0.05 }]).collect();
        let curve = mini_slot_delay_curve(&groups, 22.3e-3, TX).unwrap();
        assert!(curve.windows(2).all(|w| w[1] > w[0]));
        assert!(rel(curve[0], 22.3e-3 / 2.0 + TX) < 1e-12);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn collision_is_monotone(q in 0.0..1.0f64, dq in 0.0..0.5f64, t in 1e-4..0.05f64,
                                     l in 0.0..10.0f64, dl in 0.0..5.0f64, dt in 0.0..0.05f64) {
                let base = collision_after_add(q, t, l, false);
                prop_assert!(collision_after_add((q + dq).min(1.0), t, l, false) >= base - 1e-15);
                prop_assert!(collision_after_add(q, t, l + dl, false) >= base - 1e-15);
                prop_assert!(collision_after_add(q, t + dt, l, false) >= base - 1e-15);
            }

            #[test]
            fn adf_strictly_increasing(g in 0.0..5.0f64, d in 1e-6..1.0f64) {
                prop_assert!(adf_estimate(g + d) > adf_estimate(g));
                prop_assert!(adf_estimate(g) >= 1.0);
            }

            #[test]
            fn overall_delay_is_linear(tau in 1.0..10.0f64, t_f in 1e-4..0.1f64, tau0 in 0.0..0.05f64) {
                let a = overall_delay(tau, t_f, TX, tau0);
                let b = overall_delay(tau + 1.0, t_f, TX, tau0);
                prop_assert!(((b - a) - t_f).abs() < 1e-12);
            }
        }
    }
}
