//! Pipeline configuration: one canonical JSON document, overridable from flags.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hedonic_core::activation::Activation;
use hedonic_core::embeddings::Word2VecConfig;
use hedonic_core::features::TextWeighting;
use hedonic_core::indices::IndexKind;
use hedonic_core::inference::{CovarianceKind, OlsOptions};
use hedonic_core::net::{AdamConfig, NetworkConfig, PriceTransform, TrainingConfig};
use hedonic_core::synth::MarketSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// The configuration shipped with the binary: a small synthetic market run end
/// to end.
pub const BUNDLED: &str = include_str!("../assets/pipeline.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    #[serde(default)]
    pub paths: Paths,
    /// generate the input data instead of reading `paths`
    #[serde(default)]
    pub synthetic: Option<MarketSpec>,
    #[serde(default)]
    pub embedding: EmbeddingSection,
    #[serde(default)]
    pub network: NetworkSection,
    #[serde(default)]
    pub training: TrainingSection,
    #[serde(default)]
    pub index: IndexSection,
    #[serde(default)]
    pub inference: InferenceSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Paths {
    #[serde(default)]
    pub transactions: Option<PathBuf>,
    #[serde(default)]
    pub catalog: Option<PathBuf>,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
}

fn default_output() -> PathBuf {
    PathBuf::from("hedonic-out")
}

impl Default for Paths {
    fn default() -> Self {
        Self {
            transactions: None,
            catalog: None,
            output_dir: default_output(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EmbeddingSection {
    pub dim: usize,
    pub window: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub min_count: u64,
    pub max_windows: Option<usize>,
    pub weighting: TextWeighting,
    pub use_images: bool,
    pub parallel: bool,
}

impl Default for EmbeddingSection {
    fn default() -> Self {
        let w = Word2VecConfig::default();
        Self {
            dim: w.dim,
            window: w.window,
            epochs: w.epochs,
            learning_rate: w.learning_rate,
            batch_size: w.batch_size,
            min_count: 1,
            max_windows: None,
            weighting: TextWeighting::Uniform,
            use_images: true,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NetworkSection {
    /// hidden widths; the last is the value-embedding dimension
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub dropout: Option<Vec<f64>>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            hidden: vec![128, 64, 32],
            activation: Activation::Relu,
            dropout: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub final_lr_fraction: f64,
    pub smoothness: f64,
    pub price_transform: PriceTransform,
    pub include_zero_prices: bool,
    /// train / validation / test shares of products
    pub split: [f64; 3],
    pub parallel: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        let t = TrainingConfig::default();
        Self {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.adam.learning_rate,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            epsilon: t.adam.epsilon,
            final_lr_fraction: t.final_lr_fraction,
            smoothness: t.smoothness,
            price_transform: t.price_transform,
            include_zero_prices: t.include_zero_prices,
            split: [0.6, 0.2, 0.2],
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IndexSection {
    pub kinds: Vec<IndexKind>,
    pub lags: Vec<usize>,
    /// dense index of the base period
    pub base: usize,
}

impl Default for IndexSection {
    fn default() -> Self {
        Self {
            kinds: IndexKind::ALL.to_vec(),
            lags: vec![1, 12],
            base: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceSection {
    pub alpha: f64,
    /// number of sample splits S aggregated by medians
    pub splits: usize,
    pub covariance: CovarianceKind,
    pub ridge_fallback: Option<f64>,
}

impl Default for InferenceSection {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            splits: 1,
            covariance: CovarianceKind::Homoskedastic,
            ridge_fallback: None,
        }
    }
}

/// Seeds of the individual stages, all derived from the master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageSeeds {
    pub synthetic: u64,
    pub embedding: u64,
    pub split: u64,
    pub training: u64,
}

impl PipelineConfig {
    pub fn bundled() -> Self {
        serde_json::from_str(BUNDLED).expect("bundled config parses")
    }

    /// Reads a config file; relative paths inside it are taken relative to the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: Self =
            serde_json::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        cfg.paths.transactions.as_mut().map(rebase);
        cfg.paths.catalog.as_mut().map(rebase);
        rebase(&mut cfg.paths.output_dir);
        Ok(cfg)
    }

    /// `--seed` replaces the master seed and the synthetic market's seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let Some(s) = self.synthetic.as_mut() {
            s.seed = seed;
        }
    }

    pub fn seeds(&self) -> StageSeeds {
        StageSeeds {
            synthetic: self.synthetic.as_ref().map_or(self.seed, |s| s.seed),
            embedding: self.seed,
            split: self.seed.wrapping_add(1),
            training: self.seed.wrapping_add(2),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.synthetic.is_none() && (self.paths.transactions.is_none() || self.paths.catalog.is_none()) {
            bail!("config needs either a synthetic market or both transactions and catalog paths");
        }
        if let Some(s) = &self.synthetic {
            s.validate()?;
        }
        if self.network.hidden.is_empty() {
            bail!("network needs at least one hidden layer");
        }
        if self.index.kinds.is_empty() || self.index.lags.is_empty() || self.index.lags.contains(&0) {
            bail!("index config needs kinds and positive lags");
        }
        if self.inference.splits == 0 {
            bail!("inference needs at least one split");
        }
        if self.training.split.iter().any(|f| !(*f >= 0.0)) || self.training.split[0] <= 0.0 {
            bail!("split shares must be non-negative with a positive training share");
        }
        self.training_config().validate()?;
        Ok(())
    }

    pub fn word2vec(&self) -> Word2VecConfig {
        let e = &self.embedding;
        Word2VecConfig {
            dim: e.dim,
            window: e.window,
            epochs: e.epochs,
            learning_rate: e.learning_rate,
            batch_size: e.batch_size,
            seed: self.seeds().embedding,
            parallel: e.parallel,
            max_windows: e.max_windows,
        }
    }

    pub fn network_config(&self, input_dim: usize, periods: usize) -> NetworkConfig {
        let mut widths = vec![input_dim];
        widths.extend(&self.network.hidden);
        NetworkConfig {
            dropout: self.network.dropout.clone(),
            ..NetworkConfig::new(widths, self.network.activation, periods)
        }
    }

    pub fn training_config(&self) -> TrainingConfig {
        let t = &self.training;
        TrainingConfig {
            adam: AdamConfig {
                learning_rate: t.learning_rate,
                beta1: t.beta1,
                beta2: t.beta2,
                epsilon: t.epsilon,
            },
            epochs: t.epochs,
            batch_size: t.batch_size,
            smoothness: t.smoothness,
            price_transform: t.price_transform,
            seed: self.seeds().training,
            parallel: t.parallel,
            include_zero_prices: t.include_zero_prices,
            final_lr_fraction: t.final_lr_fraction,
        }
    }

    pub fn ols_options(&self) -> OlsOptions {
        OlsOptions {
            covariance: self.inference.covariance,
            ridge_fallback: self.inference.ridge_fallback,
        }
    }

    pub fn canonical_json(&self) -> String {
        canonical(self)
    }
}

/// Compact JSON with object keys sorted, so equal values hash equally.
pub fn canonical<S: Serialize>(value: &S) -> String {
    // serde_json's default map is ordered by key
    let v: serde_json::Value = serde_json::to_value(value).expect("config serializes");
    serde_json::to_string(&v).expect("json value serializes")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}
