//! The `hedonic` command line: ingest → embed → train → infer → index → report,
//! driven by one JSON config with flag overrides.

pub mod config;
pub mod report;
pub mod stages;
pub mod workspace;

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hedonic_core::indices::IndexKind;
use hedonic_core::synth::MarketSpec;

use crate::config::{sha256_hex, PipelineConfig};
use crate::workspace::Workspace;

#[derive(Debug, Parser)]
#[command(name = "hedonic", version, about = "AI-style hedonic price indices from transaction panels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate transactions and catalog into a panel
    Ingest,
    /// Train word vectors and build product features
    Embed,
    /// Train the multi-task price network
    Train,
    /// Hold-out regressions on value embeddings
    Infer,
    /// Matched, hedonic and Jevons indices
    Index,
    /// Generate a synthetic market
    Simulate {
        /// market spec JSON; defaults to the config's synthetic section
        #[arg(long)]
        spec: Option<PathBuf>,
    },
    /// Chain-drift experiment on a stationary synthetic market
    Drift {
        /// market spec JSON; defaults to the built-in drift market
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        replications: usize,
        #[arg(long, default_value_t = 36)]
        horizon: usize,
    },
    /// SVG charts of indices, holdout R², turnover and product growth
    Report,
    /// Every stage in order
    Pipeline,
}

#[derive(Debug, Args)]
pub struct Common {
    /// pipeline config JSON; the bundled synthetic config when omitted
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// output directory
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// master seed; overrides every seed in the config
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub transactions: Option<PathBuf>,
    #[arg(long, global = true)]
    pub catalog: Option<PathBuf>,
    /// training epochs
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    /// training learning rate
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    /// temporal smoothness penalty
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// significance level of intervals and tests
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    /// number of sample splits aggregated by medians
    #[arg(long, global = true)]
    pub splits: Option<usize>,
    /// chaining lags, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    pub lags: Option<Vec<usize>>,
    /// index kinds, comma separated (matched_f, hedonic_f, jevons, combined, ...)
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_kind)]
    pub kinds: Option<Vec<IndexKind>>,
}

fn parse_kind(s: &str) -> std::result::Result<IndexKind, String> {
    IndexKind::parse(s).ok_or_else(|| {
        let all: Vec<&str> = IndexKind::ALL.iter().map(|k| k.as_str()).collect();
        format!("unknown index kind {s:?}; expected one of {}", all.join(", "))
    })
}

impl Common {
    /// The config file (or the bundled one) with flag overrides applied.
    pub fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::load(p)?,
            None => PipelineConfig::bundled(),
        };
        if let Some(p) = &self.transactions {
            cfg.paths.transactions = Some(p.clone());
        }
        if let Some(p) = &self.catalog {
            cfg.paths.catalog = Some(p.clone());
        }
        if let Some(p) = &self.out {
            cfg.paths.output_dir = p.clone();
        }
        if let Some(v) = self.epochs {
            cfg.training.epochs = v;
        }
        if let Some(v) = self.lr {
            cfg.training.learning_rate = v;
        }
        if let Some(v) = self.lambda {
            cfg.training.smoothness = v;
        }
        if let Some(v) = self.alpha {
            cfg.inference.alpha = v;
        }
        if let Some(v) = self.splits {
            cfg.inference.splits = v;
        }
        if let Some(v) = &self.lags {
            cfg.index.lags = v.clone();
        }
        if let Some(v) = &self.kinds {
            cfg.index.kinds = v.clone();
        }
        if let Some(s) = self.seed {
            cfg.override_seed(s);
        }
        Ok(cfg)
    }
}

fn load_spec(path: &PathBuf, seed: Option<u64>) -> Result<MarketSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read spec {}", path.display()))?;
    let mut spec: MarketSpec =
        serde_json::from_str(&text).with_context(|| format!("invalid spec {}", path.display()))?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    Ok(spec)
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var("HEDONIC_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .with_context(|| format!("HEDONIC_THREADS must be a positive integer, got {v:?}"))?;
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let cfg = cli.common.resolve()?;
    if !matches!(cli.command, Command::Drift { .. } | Command::Simulate { spec: Some(_) }) {
        cfg.validate()?;
    }
    let mut ws = Workspace::open(&cfg.paths.output_dir)?;
    let value = serde_json::to_value(&cfg)?;
    ws.set_run(sha256_hex(cfg.canonical_json().as_bytes()), value, Some(cfg.seeds()));
    match cli.command {
        Command::Ingest => stages::ingest(&cfg, &mut ws)?,
        Command::Embed => stages::embed(&cfg, &mut ws)?,
        Command::Train => stages::train_stage(&cfg, &mut ws)?,
        Command::Infer => stages::infer(&cfg, &mut ws)?,
        Command::Index => stages::index(&cfg, &mut ws)?,
        Command::Report => stages::report_stage(&mut ws)?,
        Command::Simulate { spec } => {
            let spec = match (spec, &cfg.synthetic) {
                (Some(p), _) => load_spec(&p, cli.common.seed)?,
                (None, Some(s)) => s.clone(),
                (None, None) => bail!("simulate needs --spec or a synthetic section in the config"),
            };
            stages::simulate(&mut ws, &spec)?
        }
        Command::Drift {
            spec,
            replications,
            horizon,
        } => {
            let spec = match spec {
                Some(p) => load_spec(&p, cli.common.seed)?,
                None => MarketSpec::chain_drift(cli.common.seed.unwrap_or(cfg.seed)),
            };
            stages::drift(&mut ws, &spec, replications, horizon)?
        }
        Command::Pipeline => {
            if let (Some(spec), None) = (&cfg.synthetic, &cfg.paths.transactions) {
                stages::simulate(&mut ws, spec)?;
            }
            stages::ingest(&cfg, &mut ws)?;
            stages::embed(&cfg, &mut ws)?;
            stages::train_stage(&cfg, &mut ws)?;
            stages::infer(&cfg, &mut ws)?;
            stages::index(&cfg, &mut ws)?;
            stages::report_stage(&mut ws)?
        }
    };
    ws.save()?;
    Ok(())
}
