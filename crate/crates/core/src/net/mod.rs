//! Multi-task hedonic price network: a shared trunk maps product features to
//! value embeddings `V`, and one linear head per period maps `V` to a price.

mod adam;
mod checkpoint;
mod config;
mod data;
mod metrics;
mod network;
mod split;
mod train;
mod value;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{NetworkConfig, PriceTransform, TrainingConfig, MAX_HIDDEN_LAYERS, MAX_VALUE_DIM};
pub use data::{FeatureTable, FeatureVector, PriceTable};
pub use metrics::{r_squared, RSquared};
pub use network::{loss, loss_and_gradient, DenseLayer, Forward, HedonicNetwork, NetworkParams};
pub use split::{split_stratified, DataSplit};
pub use train::{evaluate, predict, train, train_on_tables, EpochRecord, TrainOutcome};
pub use value::{extract_value_embeddings, ValueEmbeddingTable};
