//! Picks protocol parameters for a scenario from the surrogate's predictions.

use serde::{Deserialize, Serialize};

use super::dataset::BIT;
use super::nn::OUTPUTS;
use super::train::TrainedModel;
use crate::error::{Error, Result};
use crate::types::{PriorityClass, ProtocolParams, QosSpec, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub params: ProtocolParams,
    pub predicted: Vec<f64>,
    pub feasible: bool,
    /// Smallest relative margin to a delay or collision bound over the
    /// populated classes. Negative when a bound is predicted to be missed.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub chosen: CandidateScore,
    /// Every valid candidate, best first.
    pub ranked: Vec<CandidateScore>,
    /// Candidates dropped for structural errors.
    pub rejected: Vec<ProtocolParams>,
}

fn margin(bound: f64, value: f64) -> f64 {
    if bound > 0.0 {
        (bound - value) / bound
    } else if value <= 0.0 {
        0.0
    } else {
        f64::NEG_INFINITY
    }
}

/// Relative slack of one prediction row against the QoS bounds.
pub fn relative_slack(predicted: &[f64], qos: &QosSpec, populated: [bool; 3]) -> f64 {
    let mut slack = f64::INFINITY;
    for class in PriorityClass::ALL {
        let c = class.index();
        if !populated[c] {
            continue;
        }
        let max_delay = predicted[4 * c];
        let max_coll = predicted[4 * c + 2];
        slack = slack.min(margin(qos.delta[c], max_delay)).min(margin(qos.rho[c], max_coll));
    }
    slack
}

/// Ranks candidates predicted feasible by largest slack, then fewest
/// mini-slots.
pub fn select_params(scenario: &Scenario, candidates: &[ProtocolParams], model: &TrainedModel) -> Result<Selection> {
    let (valid, rejected): (Vec<ProtocolParams>, Vec<ProtocolParams>) =
        candidates.iter().copied().partition(|p| p.violations().is_empty());
    if valid.is_empty() {
        return Err(Error::NoFeasibleCandidate);
    }
    let populated = PriorityClass::ALL.map(|c| scenario.class_count(c) > 0);
    let pred = model.predict(&scenario.devices, &valid)?;
    debug_assert_eq!(pred.ncols(), OUTPUTS);
    let mut ranked: Vec<CandidateScore> = valid
        .iter()
        .zip(pred.rows())
        .map(|(p, row)| {
            let predicted = row.to_vec();
            let slack = relative_slack(&predicted, &scenario.qos, populated);
            let feasible = predicted[BIT] < 0.5 && slack >= 0.0;
            CandidateScore { params: *p, predicted, feasible, slack }
        })
        .collect();
    ranked.sort_by(|a, b| {
        b.feasible
            .cmp(&a.feasible)
            .then(b.slack.total_cmp(&a.slack))
            .then(a.params.n_m.cmp(&b.params.n_m))
    });
    match ranked.first() {
        Some(best) if best.feasible => Ok(Selection { chosen: best.clone(), ranked, rejected }),
        _ => Err(Error::NoFeasibleCandidate),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slack_uses_worst_populated_class() {
        let qos = QosSpec::new([0.01, 0.1, 1.0], [0.01, 0.01, 0.1]);
        let mut p = vec![0.0; OUTPUTS];
        p[0] = 0.005; // HP max delay: slack 0.5
        p[2] = 0.009; // HP max collision: slack 0.1
        p[8] = 2.0; // LP way over, but LP unpopulated
        let s = relative_slack(&p, &qos, [true, true, false]);
        assert!((s - 0.1).abs() < 1e-12);
        assert!(relative_slack(&p, &qos, [true, true, true]) < 0.0);
    }

    #[test]
    fn zero_bound_margin() {
        assert_eq!(margin(0.0, 0.0), 0.0);
        assert_eq!(margin(0.0, 1e-9), f64::NEG_INFINITY);
    }
}
