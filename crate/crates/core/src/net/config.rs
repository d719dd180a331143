use serde::{Deserialize, Serialize};

use super::AdamConfig;
use crate::activation::Activation;
use crate::error::{Error, Result};

pub const MAX_HIDDEN_LAYERS: usize = 3;
pub const MAX_VALUE_DIM: usize = 512;

/// Layer widths run from the input through the hidden layers; the last width
/// is the value-embedding dimension `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkConfig {
    pub layer_widths: Vec<usize>,
    /// one activation per hidden layer
    pub activations: Vec<Activation>,
    pub periods: usize,
    /// optional dropout fraction per hidden layer (training only)
    #[serde(default)]
    pub dropout: Option<Vec<f64>>,
}

impl NetworkConfig {
    pub fn new(layer_widths: Vec<usize>, activation: Activation, periods: usize) -> Self {
        let hidden = layer_widths.len().saturating_sub(1);
        Self {
            layer_widths,
            activations: vec![activation; hidden],
            periods,
            dropout: None,
        }
    }

    /// input → 128 → 64 → 32, ReLU.
    pub fn desk(input_dim: usize, periods: usize) -> Self {
        Self::new(vec![input_dim, 128, 64, 32], Activation::Relu, periods)
    }

    /// input → 2048 → 1024 → 256, ReLU.
    pub fn wide(input_dim: usize, periods: usize) -> Self {
        Self::new(vec![input_dim, 2048, 1024, 256], Activation::Relu, periods)
    }

    pub fn input_dim(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn value_dim(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn hidden_layers(&self) -> usize {
        self.layer_widths.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.layer_widths.len() < 2 || self.layer_widths.len() > MAX_HIDDEN_LAYERS + 1 {
            return bad(format!(
                "need 1 to {MAX_HIDDEN_LAYERS} hidden layers, got {}",
                self.layer_widths.len().saturating_sub(1)
            ));
        }
        if self.layer_widths.contains(&0) {
            return bad("layer widths must be positive".into());
        }
        if self.value_dim() > MAX_VALUE_DIM {
            return bad(format!("value dimension {} exceeds {MAX_VALUE_DIM}", self.value_dim()));
        }
        if self.periods == 0 {
            return bad("periods must be at least 1".into());
        }
        if self.activations.len() != self.hidden_layers() {
            return bad(format!(
                "{} activations for {} hidden layers",
                self.activations.len(),
                self.hidden_layers()
            ));
        }
        if let Some(d) = &self.dropout {
            if d.len() != self.hidden_layers() || d.iter().any(|&r| !(0.0..1.0).contains(&r)) {
                return bad("dropout needs one rate in [0, 1) per hidden layer".into());
            }
        }
        Ok(())
    }
}

/// How observed prices enter the loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PriceTransform {
    #[default]
    Identity,
    Log,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    /// temporal smoothness penalty λ
    pub smoothness: f64,
    pub price_transform: PriceTransform,
    pub seed: u64,
    /// evaluate gradient shards concurrently; results are bitwise identical
    #[serde(default)]
    pub parallel: bool,
    /// keep zero-price cells (Q > 0, S = 0) as observations
    #[serde(default)]
    pub include_zero_prices: bool,
    /// learning rate at the last epoch as a fraction of the initial one;
    /// cosine annealing in between, 1 keeps it constant
    #[serde(default = "one")]
    pub final_lr_fraction: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            adam: AdamConfig::default(),
            epochs: 60,
            batch_size: 64,
            smoothness: 0.0,
            price_transform: PriceTransform::Identity,
            seed: 17,
            parallel: false,
            include_zero_prices: false,
            final_lr_fraction: 1.0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.adam.learning_rate > 0.0) {
            return Err(Error::Validation("learning rate must be positive".into()));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(Error::Validation("final_lr_fraction must lie in (0, 1]".into()));
        }
        if !(self.smoothness >= 0.0) || !self.smoothness.is_finite() {
            return Err(Error::Validation("smoothness must be finite and non-negative".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Validation("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        NetworkConfig::desk(40, 24).validate().unwrap();
        NetworkConfig::wide(40, 24).validate().unwrap();
        assert_eq!(NetworkConfig::wide(40, 24).value_dim(), 256);
    }

    #[test]
    fn rejects_deep_or_wide_configs() {
        assert!(NetworkConfig::new(vec![4, 8, 8, 8, 8], Activation::Relu, 2).validate().is_err());
        assert!(NetworkConfig::new(vec![4, 513], Activation::Relu, 2).validate().is_err());
        assert!(NetworkConfig::new(vec![4], Activation::Relu, 2).validate().is_err());
        assert!(NetworkConfig::new(vec![4, 8], Activation::Relu, 0).validate().is_err());
    }
}
