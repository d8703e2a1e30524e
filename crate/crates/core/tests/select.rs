use ndarray::{Array1, Array2};

use msmac::error::Error;
use msmac::surrogate::train::Split;
use msmac::surrogate::{
    select_params, Activation, LabelScaler, Mlp, Normalizer, RegressorSpec, TrainConfig, TrainedModel, OUTPUTS,
};
use msmac::types::{DeviceProfile, PriorityClass, ProtocolParams, QosSpec, Scenario};

const INTERVALS: usize = 16;
const WIDTH: usize = 3 * INTERVALS + 4;

/// Linear model on raw features: the infeasibility bit is `(n_m - 4) / 4`
/// and every delay and collision output is `delay_per_mini_slot * n_m`.
fn hand_model(delay_per_mini_slot: f64) -> TrainedModel {
    let spec = RegressorSpec { widths: vec![OUTPUTS], activations: vec![Activation::Identity], dropout: vec![0.0] };
    let mut net = Mlp::zeros(spec, WIDTH).unwrap();
    let n_m = 3 * INTERVALS;
    for j in 0..OUTPUTS - 1 {
        net.layers[0].w[(n_m, j)] = delay_per_mini_slot;
    }
    net.layers[0].w[(n_m, OUTPUTS - 1)] = 0.25;
    net.layers[0].b[OUTPUTS - 1] = -1.0;
    TrainedModel {
        net,
        normalizer: Normalizer { mean: Array1::zeros(WIDTH), std: Array1::ones(WIDTH) },
        scaler: LabelScaler { min: Array1::zeros(OUTPUTS), max: Array1::ones(OUTPUTS) },
        intervals: INTERVALS,
        lambda_min: 1.0,
        lambda_max: 5.0,
        config: TrainConfig::default(),
        split: Split { train: vec![], val: vec![], test: vec![] },
        history: vec![],
    }
}

fn scenario() -> Scenario {
    let devs = vec![
        DeviceProfile::poisson(1, PriorityClass::Hp, 2.0),
        DeviceProfile::poisson(2, PriorityClass::Rp, 3.0),
        DeviceProfile::poisson(3, PriorityClass::Lp, 4.0),
    ];
    Scenario::new(devs, QosSpec::industrial_default())
}

#[test]
fn prediction_follows_hand_weights() {
    let m = hand_model(1e-5);
    let p: Array2<f64> = m.predict(&scenario().devices, &[ProtocolParams::new(8, 5, 45, 270)]).unwrap();
    assert!((p[(0, OUTPUTS - 1)] - 1.0).abs() < 1e-12);
    assert!((p[(0, 0)] - 8e-5).abs() < 1e-15);
}

#[test]
fn predicted_infeasible_candidate_is_ranked_out() {
    let m = hand_model(1e-5);
    let grid = [ProtocolParams::new(8, 5, 45, 270), ProtocolParams::new(4, 5, 15, 90)];
    let sel = select_params(&scenario(), &grid, &m).unwrap();
    assert_eq!(sel.chosen.params, grid[1]);
    let feasible: Vec<_> = sel.ranked.iter().filter(|c| c.feasible).collect();
    assert_eq!(feasible.len(), 1);
    assert!(!sel.ranked[1].feasible);
    assert!(sel.rejected.is_empty());
}

#[test]
fn structural_violations_are_rejected_before_prediction() {
    let m = hand_model(1e-5);
    // r_r = 16 does not divide r_l = 90.
    let bad = ProtocolParams::new(4, 5, 16, 90);
    let good = ProtocolParams::new(4, 5, 15, 90);
    let sel = select_params(&scenario(), &[bad, good], &m).unwrap();
    assert_eq!(sel.rejected, vec![bad]);
    assert_eq!(sel.ranked.len(), 1);
    assert!(matches!(select_params(&scenario(), &[bad], &m), Err(Error::NoFeasibleCandidate)));
}

#[test]
fn ties_on_slack_prefer_fewer_mini_slots() {
    // No n_m dependence in the outputs except the bit, which stays below 0.5 for n_m <= 5.
    let mut m = hand_model(0.0);
    m.net.layers[0].b[OUTPUTS - 1] = -2.0;
    let grid = [ProtocolParams::new(5, 5, 15, 90), ProtocolParams::new(2, 5, 15, 90), ProtocolParams::new(4, 5, 15, 90)];
    let sel = select_params(&scenario(), &grid, &m).unwrap();
    let order: Vec<u32> = sel.ranked.iter().map(|c| c.params.n_m).collect();
    assert_eq!(order, vec![2, 4, 5]);
}

#[test]
fn nothing_feasible_is_an_error() {
    // HP delay bound is 1 ms; 4 mini-slots predict 4 ms.
    let m = hand_model(1e-3);
    let grid = [ProtocolParams::new(4, 5, 15, 90)];
    assert!(matches!(select_params(&scenario(), &grid, &m), Err(Error::NoFeasibleCandidate)));
}
