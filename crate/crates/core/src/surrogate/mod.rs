//! Neural surrogate that predicts per-class performance from a traffic
//! profile and protocol parameters, and a parameter selector built on it.

pub mod dataset;
pub mod encode;
pub mod metrics;
pub mod nn;
pub mod select;
pub mod train;

pub use dataset::{generate_dataset, Dataset, DatasetConfig, DatasetEntry, ScenarioSampler};
pub use encode::{encode_profile, LabelScaler, Normalizer, DEFAULT_INTERVALS};
pub use metrics::{r_squared, r_squared_columns, RSquared};
pub use nn::{Activation, AdamConfig, Mlp, RegressorSpec, OUTPUTS};
pub use select::{select_params, Selection};
pub use train::{train, Evaluation, TrainConfig, TrainedModel};
