//! Training loop and the trained-model container.

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::{Dataset, DatasetEntry, BIT};
use super::encode::{encode_profile, LabelScaler, Normalizer};
use super::metrics::{bit_accuracy, mse, r_squared_columns, RSquared};
use super::nn::{Adam, AdamConfig, Mlp, RegressorSpec, OUTPUTS};
use crate::error::{Error, Result};
use crate::traffic::mix_seed;
use crate::types::{DeviceProfile, ProtocolParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch: usize,
    pub adam: AdamConfig,
    /// Train and validation shares; the rest is the test split.
    pub split: [f64; 2],
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 50, batch: 128, adam: AdamConfig::default(), split: [0.8, 0.1], seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss with dropout active.
    pub train_loss: f64,
    /// Loss over the whole training split in inference mode.
    pub train_eval_loss: f64,
    pub val_loss: f64,
    pub val_r2: f64,
}

/// Row indices of the three splits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl Split {
    pub fn shuffled(n: usize, shares: [f64; 2], seed: u64) -> Self {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_train = (shares[0] * n as f64).floor() as usize;
        let n_val = ((shares[1] * n as f64).floor() as usize).min(n - n_train);
        let test = idx.split_off(n_train + n_val);
        let val = idx.split_off(n_train);
        Self { train: idx, val, test }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub net: Mlp,
    pub normalizer: Normalizer,
    pub scaler: LabelScaler,
    pub intervals: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub config: TrainConfig,
    pub split: Split,
    pub history: Vec<EpochRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub r2: RSquared,
    pub bit_accuracy: f64,
    /// MSE on the scaled labels.
    pub loss: f64,
}

fn matrices(entries: &[DatasetEntry], rows: &[usize]) -> (Array2<f64>, Array2<f64>) {
    let width = entries.first().map_or(0, |e| e.features.len());
    let x = Array2::from_shape_fn((rows.len(), width), |(i, j)| entries[rows[i]].features[j]);
    let y = Array2::from_shape_fn((rows.len(), OUTPUTS), |(i, j)| entries[rows[i]].labels[j]);
    (x, y)
}

pub fn train(spec: RegressorSpec, data: &Dataset, cfg: &TrainConfig) -> Result<TrainedModel> {
    if spec.outputs() != OUTPUTS {
        return Err(Error::Shape(format!("regressor must have {OUTPUTS} outputs, has {}", spec.outputs())));
    }
    let n = data.entries.len();
    if n < cfg.batch || cfg.batch == 0 {
        return Err(Error::Shape(format!("dataset of {n} entries is smaller than batch {}", cfg.batch)));
    }
    let split = Split::shuffled(n, cfg.split, cfg.seed);
    let (x_train, y_train) = matrices(&data.entries, &split.train);
    let (x_val, y_val) = matrices(&data.entries, &split.val);
    let normalizer = Normalizer::fit(x_train.view())?;
    let scaler = LabelScaler::fit(y_train.view());
    let x_train = normalizer.apply(x_train.view())?;
    let y_train = scaler.scale(y_train.view());
    let x_val = normalizer.apply(x_val.view())?;
    let y_val = scaler.scale(y_val.view());

    let mut net = Mlp::init(spec, data.feature_width(), mix_seed(cfg.seed, 1))?;
    let mut opt = Adam::new(cfg.adam, &net);
    let mut order_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 2));
    let mut dropout_rng = ChaCha8Rng::seed_from_u64(mix_seed(cfg.seed, 3));
    let mut order: Vec<usize> = (0..x_train.nrows()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut order_rng);
        let (mut total, mut batches) = (0.0, 0usize);
        for chunk in order.chunks(cfg.batch) {
            let xb = x_train.select(Axis(0), chunk);
            let yb = y_train.select(Axis(0), chunk);
            let (loss, grads) = net.loss_and_grads(xb.view(), yb.view(), Some(&mut dropout_rng))?;
            opt.update(&mut net, &grads);
            total += loss;
            batches += 1;
        }
        let train_eval_loss = mse(net.predict(x_train.view())?.view(), y_train.view());
        let val_pred = net.predict(x_val.view())?;
        let val_r2 = r_squared_columns(val_pred.view(), y_val.view()).map(|r| r.printed).unwrap_or(f64::NAN);
        history.push(EpochRecord {
            epoch,
            train_loss: total / batches as f64,
            train_eval_loss,
            val_loss: mse(val_pred.view(), y_val.view()),
            val_r2,
        });
    }

    Ok(TrainedModel {
        net,
        normalizer,
        scaler,
        intervals: data.intervals,
        lambda_min: data.lambda_min,
        lambda_max: data.lambda_max,
        config: cfg.clone(),
        split,
        history,
    })
}

impl TrainedModel {
    /// Predicted labels in physical units (seconds, probabilities, bit).
    pub fn predict_features(&self, features: &Array2<f64>) -> Result<Array2<f64>> {
        let z = self.normalizer.apply(features.view())?;
        let scaled = self.net.predict(z.view())?;
        Ok(self.scaler.unscale(scaled.view()))
    }

    pub fn predict(&self, devices: &[DeviceProfile], params: &[ProtocolParams]) -> Result<Array2<f64>> {
        let enc = encode_profile(devices, self.intervals, self.lambda_min, self.lambda_max)?;
        let rows: Vec<Vec<f64>> = params.iter().map(|p| enc.features(p)).collect();
        let width = rows.first().map_or(0, Vec::len);
        let x = Array2::from_shape_fn((rows.len(), width), |(i, j)| rows[i][j]);
        self.predict_features(&x)
    }

    /// Scores the model on the given rows of `data`.
    pub fn evaluate(&self, data: &Dataset, rows: &[usize]) -> Result<Evaluation> {
        let (x, y) = matrices(&data.entries, rows);
        let z = self.normalizer.apply(x.view())?;
        let pred = self.net.predict(z.view())?;
        let y_scaled = self.scaler.scale(y.view());
        let pred_phys = self.scaler.unscale(pred.view());
        Ok(Evaluation {
            r2: r_squared_columns(pred.view(), y_scaled.view())?,
            bit_accuracy: bit_accuracy(&pred_phys.column(BIT).to_vec(), &y.column(BIT).to_vec()),
            loss: mse(pred.view(), y_scaled.view()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surrogate::nn::Activation;

    fn toy_data(n: usize) -> Dataset {
        let entries = (0..n)
            .map(|i| {
                let a = (i % 17) as f64;
                let b = (i % 5) as f64;
                let mut labels = [0.0; OUTPUTS];
                for (k, l) in labels.iter_mut().enumerate().take(BIT) {
                    *l = 0.01 * a + 0.02 * b * (k as f64 + 1.0);
                }
                labels[BIT] = if a > 8.0 { 1.0 } else { 0.0 };
                DatasetEntry { features: vec![a, b, 0.0, 8.0, 5.0, 45.0, 270.0], labels }
            })
            .collect();
        Dataset { intervals: 1, lambda_min: 1.0, lambda_max: 5.0, entries }
    }

    fn small_spec() -> RegressorSpec {
        RegressorSpec {
            widths: vec![32, 32, OUTPUTS],
            activations: vec![Activation::Elu, Activation::Relu, Activation::Relu],
            dropout: vec![0.1, 0.0, 0.0],
        }
    }

    #[test]
    fn split_sizes() {
        let s = Split::shuffled(1000, [0.8, 0.1], 4);
        assert_eq!((s.train.len(), s.val.len(), s.test.len()), (800, 100, 100));
        let mut all: Vec<usize> = s.train.iter().chain(&s.val).chain(&s.test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..1000).collect::<Vec<_>>());
    }

    #[test]
    fn training_descends_and_is_deterministic() {
        let data = toy_data(600);
        let cfg = TrainConfig { epochs: 30, batch: 32, seed: 7, ..TrainConfig::default() };
        let m = train(small_spec(), &data, &cfg).unwrap();
        let first = &m.history[0];
        let last = m.history.last().unwrap();
        assert!(last.train_eval_loss < first.train_eval_loss);
        assert!(last.val_loss < first.val_loss);
        let again = train(small_spec(), &data, &cfg).unwrap();
        assert_eq!(m.history, again.history);
        let ev = m.evaluate(&data, &m.split.test).unwrap();
        assert!(ev.r2.conventional > 0.8, "{:?}", ev.r2);
        assert!(ev.bit_accuracy > 0.9);
    }

    #[test]
    fn rejects_wrong_output_width_and_tiny_data() {
        let mut spec = small_spec();
        spec.widths[2] = 12;
        assert!(train(spec, &toy_data(600), &TrainConfig::default()).is_err());
        assert!(train(small_spec(), &toy_data(50), &TrainConfig::default()).is_err());
    }
}
