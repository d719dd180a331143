//! Synthetic markets with a known hedonic truth: latent attributes drive
//! prices, text and image features; products enter and exit at a set rate.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::indices::{bilateral_hedonic, chained_series, Formula, HedonicSurface, IndexKind};
use crate::linalg::Matrix;
use crate::market::{ProductCatalogEntry, ProductId, TransactionPanel};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TruthKind {
    #[default]
    Linear,
    Nonlinear,
}

fn d_attributes() -> usize {
    4
}
fn d_levels() -> usize {
    5
}
fn d_synonyms() -> usize {
    3
}
fn d_base_price() -> f64 {
    50.0
}
fn d_effect() -> f64 {
    0.15
}
fn d_quality_effect() -> f64 {
    0.2
}
fn d_elasticity() -> f64 {
    1.5
}
fn d_mean_demand() -> f64 {
    20.0
}
fn d_demand_noise() -> f64 {
    0.5
}
fn d_image_dim() -> usize {
    4
}
fn d_image_noise() -> f64 {
    0.05
}
fn d_one() -> f64 {
    1.0
}

/// Everything needed to regenerate a market. Serialized as the spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    /// products transacting in every period
    pub n_products: usize,
    pub periods: usize,
    pub seed: u64,
    #[serde(default)]
    pub truth: TruthKind,
    /// per-step gross inflation g; overridden by `inflation_path`
    #[serde(default = "d_one")]
    pub inflation: f64,
    /// explicit g_t for t = 1..T−1
    #[serde(default)]
    pub inflation_path: Option<Vec<f64>>,
    /// share of each period's products replaced by entrants
    #[serde(default)]
    pub turnover: f64,
    /// σ of the multiplicative price noise
    #[serde(default)]
    pub price_noise: f64,
    #[serde(default = "d_elasticity")]
    pub elasticity: f64,
    /// demand response to last period's relative price (post-sale dip)
    #[serde(default)]
    pub stockpiling: f64,
    #[serde(default = "d_mean_demand")]
    pub mean_demand: f64,
    #[serde(default = "d_demand_noise")]
    pub demand_noise: f64,
    #[serde(default = "d_attributes")]
    pub attributes: usize,
    #[serde(default = "d_levels")]
    pub levels: usize,
    #[serde(default = "d_synonyms")]
    pub synonyms: usize,
    #[serde(default = "d_base_price")]
    pub base_price: f64,
    /// attribute effects are drawn from ±effect (share of the base price, or
    /// log points for the nonlinear truth)
    #[serde(default = "d_effect")]
    pub effect: f64,
    #[serde(default = "d_quality_effect")]
    pub quality_effect: f64,
    /// per-period drift in attribute valuations; 0 keeps θ*_t ∝ θ*
    #[serde(default)]
    pub valuation_drift: f64,
    #[serde(default = "d_image_dim")]
    pub image_dim: usize,
    #[serde(default = "d_image_noise")]
    pub image_noise: f64,
}

impl MarketSpec {
    pub fn new(n_products: usize, periods: usize, seed: u64) -> Self {
        Self {
            n_products,
            periods,
            seed,
            truth: TruthKind::Linear,
            inflation: 1.0,
            inflation_path: None,
            turnover: 0.0,
            price_noise: 0.0,
            elasticity: d_elasticity(),
            stockpiling: 0.0,
            mean_demand: d_mean_demand(),
            demand_noise: d_demand_noise(),
            attributes: d_attributes(),
            levels: d_levels(),
            synonyms: d_synonyms(),
            base_price: d_base_price(),
            effect: d_effect(),
            quality_effect: d_quality_effect(),
            valuation_drift: 0.0,
            image_dim: d_image_dim(),
            image_noise: d_image_noise(),
        }
    }

    /// The standard benchmark market: 2000 products over 24 months with a
    /// nonlinear truth, moderate noise and slowly drifting valuations.
    pub fn benchmark(seed: u64) -> Self {
        Self {
            truth: TruthKind::Nonlinear,
            inflation: 1.003,
            turnover: 0.05,
            price_noise: 0.1,
            effect: 0.3,
            valuation_drift: 0.005,
            ..Self::new(2000, 24, seed)
        }
    }

    /// Uniform inflation with heavy turnover and no price noise.
    pub fn uniform_inflation(seed: u64) -> Self {
        Self {
            inflation: 1.02,
            turnover: 0.3,
            ..Self::new(500, 36, seed)
        }
    }

    /// A stationary market with noisy prices and post-sale demand dips, where
    /// monthly chaining drifts.
    pub fn chain_drift(seed: u64) -> Self {
        Self {
            turnover: 0.02,
            price_noise: 0.15,
            elasticity: 1.5,
            stockpiling: 1.0,
            ..Self::new(200, 37, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidSpec(m.to_string()));
        if self.n_products == 0 || self.periods == 0 {
            return bad("n_products and periods must be positive");
        }
        if self.attributes == 0 || self.levels < 2 || self.synonyms == 0 {
            return bad("need at least one attribute with two levels and one word each");
        }
        if !(0.0..1.0).contains(&self.turnover) {
            return bad("turnover must lie in [0, 1)");
        }
        if !(self.price_noise >= 0.0) || !self.price_noise.is_finite() {
            return bad("price_noise must be finite and non-negative");
        }
        if !(self.inflation > 0.0) {
            return bad("inflation must be positive");
        }
        if let Some(p) = &self.inflation_path {
            if p.len() + 1 != self.periods || p.iter().any(|g| !(*g > 0.0)) {
                return bad("inflation_path needs periods − 1 positive factors");
            }
        }
        if !(self.base_price > 0.0) || !(self.mean_demand > 0.0) {
            return bad("base_price and mean_demand must be positive");
        }
        if self.truth == TruthKind::Linear
            && self.base_price * (1.0 - self.attributes as f64 * self.effect * (1.0 + self.valuation_drift.abs() * self.periods as f64)) <= 0.0
        {
            return bad("linear truth could produce nonpositive prices; lower effect or attributes");
        }
        for v in [self.elasticity, self.stockpiling, self.demand_noise, self.effect, self.quality_effect, self.image_noise] {
            if !v.is_finite() {
                return bad("spec parameters must be finite");
            }
        }
        Ok(())
    }

    /// `g_t` for `t ≥ 1`.
    pub fn step_inflation(&self, t: usize) -> f64 {
        match &self.inflation_path {
            Some(p) => p[t - 1],
            None => self.inflation,
        }
    }

    /// Cumulative inflation `G_t = Π_{s≤t} g_s`, `G_0 = 1`.
    pub fn inflation_levels(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.periods);
        let mut g = 1.0;
        out.push(g);
        for t in 1..self.periods {
            g *= self.step_inflation(t);
            out.push(g);
        }
        out
    }

    pub fn is_stationary(&self) -> bool {
        self.valuation_drift == 0.0 && (1..self.periods).all(|t| self.step_inflation(t) == 1.0)
    }

    /// Synonyms that describe level `level` of attribute `attr`.
    pub fn bucket_words(&self, attr: usize, level: usize) -> Vec<String> {
        (0..self.synonyms).map(|s| bucket_word(attr, level, s)).collect()
    }

    /// Products entering after period 0.
    pub fn entrants_per_period(&self) -> usize {
        (self.turnover * self.n_products as f64).round() as usize
    }
}

const ATTRIBUTE_STEMS: [&str; 8] = ["fabric", "cut", "tone", "finish", "weave", "trim", "fit", "pattern"];
const FILLER: [&str; 8] = ["with", "and", "for", "new", "style", "soft", "daily", "wear"];

fn bucket_word(attr: usize, level: usize, syn: usize) -> String {
    let stem = ATTRIBUTE_STEMS[attr % ATTRIBUTE_STEMS.len()];
    let round = attr / ATTRIBUTE_STEMS.len();
    let letter = (b'a' + (syn % 26) as u8) as char;
    if round == 0 {
        format!("{stem}{level}{letter}")
    } else {
        format!("{stem}{round}x{level}{letter}")
    }
}

/// Latent characteristics of one product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentProduct {
    pub attributes: Vec<usize>,
    pub quality: f64,
    pub demand_scale: f64,
}

impl LatentProduct {
    /// `(1, one-hot levels…, quality)`; the linear truth is `θ*_tᵀ x`.
    pub fn design(&self, levels: usize) -> Vec<f64> {
        let mut x = vec![0.0; 2 + self.attributes.len() * levels];
        x[0] = 1.0;
        for (k, &l) in self.attributes.iter().enumerate() {
            x[1 + k * levels + l] = 1.0;
        }
        *x.last_mut().unwrap() = self.quality;
        x
    }
}

/// Coefficients of the hedonic truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthModel {
    pub kind: TruthKind,
    /// `effects[k][l]`
    pub effects: Vec<Vec<f64>>,
    pub quality_effect: f64,
    pub base_price: f64,
    pub valuation_drift: f64,
}

impl TruthModel {
    /// Time-`t` hedonic value before inflation.
    pub fn value(&self, p: &LatentProduct, t: usize) -> f64 {
        let drift = |k: usize| 1.0 + self.valuation_drift * t as f64 * if k % 2 == 0 { 1.0 } else { -1.0 };
        let attr: f64 = p
            .attributes
            .iter()
            .enumerate()
            .map(|(k, &l)| self.effects[k][l] * drift(k))
            .sum();
        match self.kind {
            TruthKind::Linear => self.base_price * (1.0 + attr + self.quality_effect * p.quality),
            TruthKind::Nonlinear => {
                let interaction = 2.0 * p.quality * self.effects[0][p.attributes[0]];
                let kink = 0.5 * (p.quality - 0.5).max(0.0);
                self.base_price * (attr + self.quality_effect * p.quality + interaction + kink).exp()
            }
        }
    }
}

/// Ground truth of a generated market.
#[derive(Debug, Clone)]
pub struct Truth<T> {
    pub products: Vec<ProductId>,
    /// `H*_it` for every product (rows, in panel order) and period
    pub hedonic: Matrix<T>,
    /// `G_t`
    pub inflation_levels: Vec<f64>,
    pub model: TruthModel,
    pub latent: Vec<LatentProduct>,
}

impl<T: Real> Truth<T> {
    pub fn surface(&self, panel: &TransactionPanel<T>) -> HedonicSurface<T> {
        HedonicSurface::from_fn(panel, |i, t| Some(self.hedonic[(i, t)]))
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedPanel<T: Real = f64> {
    pub panel: TransactionPanel<T>,
    pub catalog: Vec<ProductCatalogEntry>,
    pub truth: Truth<T>,
    /// feasibility notes, e.g. periods without a yearly match set
    pub warnings: Vec<String>,
}

fn product_id(i: usize) -> ProductId {
    format!("P{i:06}")
}

fn product_rng(seed: u64, i: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (i as u64 + 1).wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Catalog text for a product. Each attribute gets a short run of its bucket's
/// synonyms mixed with filler words, so same-bucket words share contexts.
pub fn product_text(spec: &MarketSpec, latent: &LatentProduct, rng: &mut impl Rng) -> (String, String, Vec<String>) {
    let pick = |rng: &mut dyn rand::RngCore, k: usize, l: usize| bucket_word(k, l, rng.random_range(0..spec.synonyms));
    let title = latent
        .attributes
        .iter()
        .enumerate()
        .map(|(k, &l)| pick(rng, k, l))
        .collect::<Vec<_>>()
        .join(" ");
    let mut sentences = Vec::new();
    for (k, &l) in latent.attributes.iter().enumerate() {
        let mut words: Vec<String> = (0..4).map(|_| pick(rng, k, l)).collect();
        words.extend((0..2).map(|_| FILLER[rng.random_range(0..FILLER.len())].to_string()));
        words.shuffle(rng);
        sentences.push(words.join(" "));
    }
    let bullets = latent
        .attributes
        .iter()
        .enumerate()
        .map(|(k, &l)| format!("{} {}", ATTRIBUTE_STEMS[k % ATTRIBUTE_STEMS.len()], pick(rng, k, l)))
        .collect();
    (title, sentences.join(". "), bullets)
}

/// Draws a market from `spec`. Deterministic in the seed.
pub fn generate_panel<T: Real>(spec: &MarketSpec) -> Result<GeneratedPanel<T>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let effects: Vec<Vec<f64>> = (0..spec.attributes)
        .map(|_| (0..spec.levels).map(|_| rng.random_range(-spec.effect..=spec.effect)).collect())
        .collect();
    let model = TruthModel {
        kind: spec.truth,
        effects,
        quality_effect: spec.quality_effect,
        base_price: spec.base_price,
        valuation_drift: spec.valuation_drift,
    };
    let onehot_dim = spec.attributes * spec.levels + 1;
    let projection: Vec<f64> = (0..spec.image_dim * onehot_dim)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect::<Vec<f64>>();

    // Activity schedule: period 0 starts with n products; each later period
    // retires `entrants` random active products for good and adds new ones.
    let n = spec.n_products;
    let entrants = spec.entrants_per_period().min(n);
    let mut active: Vec<usize> = (0..n).collect();
    let mut schedule = vec![active.clone()];
    let mut next_id = n;
    for _ in 1..spec.periods {
        active.shuffle(&mut rng);
        active.truncate(n - entrants);
        active.extend(next_id..next_id + entrants);
        next_id += entrants;
        active.sort_unstable();
        schedule.push(active.clone());
    }
    let universe = next_id;

    let latent: Vec<LatentProduct> = (0..universe)
        .map(|i| {
            let mut r = product_rng(spec.seed, i);
            let attributes = (0..spec.attributes).map(|_| r.random_range(0..spec.levels)).collect();
            let quality = r.random_range(0.0..1.0);
            let z: f64 = StandardNormal.sample(&mut r);
            LatentProduct {
                attributes,
                quality,
                demand_scale: spec.mean_demand * (spec.demand_noise * z - spec.demand_noise.powi(2) / 2.0).exp(),
            }
        })
        .collect();

    let levels = spec.inflation_levels();
    let truth_values: Vec<f64> = (0..universe)
        .flat_map(|i| {
            let l = &latent[i];
            let m = &model;
            levels.iter().enumerate().map(move |(t, g)| g * m.value(l, t))
        })
        .collect();
    if let Some(v) = truth_values.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidSpec(format!("truth produced a nonpositive price {v}")));
    }

    let catalog: Vec<ProductCatalogEntry> = (0..universe)
        .map(|i| {
            let mut r = product_rng(spec.seed ^ 0x5EED_7E47, i);
            let (title, description, bullet_points) = product_text(spec, &latent[i], &mut r);
            let mut x = vec![0.0; onehot_dim];
            for (k, &l) in latent[i].attributes.iter().enumerate() {
                x[k * spec.levels + l] = 1.0;
            }
            x[onehot_dim - 1] = latent[i].quality;
            let image = (0..spec.image_dim)
                .map(|d| {
                    let z: f64 = StandardNormal.sample(&mut r);
                    let v: f64 = (0..onehot_dim).map(|j| projection[d * onehot_dim + j] * x[j]).sum();
                    ((v + spec.image_noise * z) * 1e6).round() / 1e6
                })
                .collect();
            ProductCatalogEntry {
                product_id: product_id(i),
                title,
                description,
                bullet_points,
                image_features: Some(image),
            }
        })
        .collect();

    // Prices and quantities, period by period in product order.
    let sigma = spec.price_noise;
    let mut last_relative = vec![1.0f64; universe];
    let mut cells = Vec::new();
    for (t, members) in schedule.iter().enumerate() {
        for &i in members {
            let h = truth_values[i * spec.periods + t];
            let z: f64 = StandardNormal.sample(&mut rng);
            let rel = (sigma * z - sigma * sigma / 2.0).exp();
            let price = if sigma == 0.0 { h } else { h * rel };
            let demand = latent[i].demand_scale * rel.powf(-spec.elasticity) * last_relative[i].powf(spec.stockpiling);
            let q = demand.round().max(1.0);
            last_relative[i] = rel;
            cells.push((product_id(i), t, T::of(price), T::of(q)));
        }
    }
    let panel = TransactionPanel::from_priced_cells(cells, spec.periods)?;

    let mut warnings = Vec::new();
    for t in 12..spec.periods {
        if panel.match_set(t, 12)?.is_empty() {
            warnings.push(format!("period {t} has no products matched 12 periods earlier"));
        }
    }
    let hedonic = Matrix::from_vec(universe, spec.periods, truth_values.into_iter().map(T::of).collect())?;
    Ok(GeneratedPanel {
        panel,
        catalog,
        truth: Truth {
            products: (0..universe).map(product_id).collect(),
            hedonic,
            inflation_levels: levels,
            model,
            latent,
        },
        warnings,
    })
}

/// Index of `t` against `t − ℓ` computed from the true hedonic prices.
pub fn true_index<T: Real>(generated: &GeneratedPanel<T>, t: usize, lag: usize, formula: Formula) -> Result<T> {
    bilateral_hedonic(&generated.truth.surface(&generated.panel), &generated.panel, t, lag, formula)
}

/// `product_id,period,true_hedonic_price`.
pub fn write_truth_csv<T: Real, W: Write>(generated: &GeneratedPanel<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Format(e.to_string());
    w.write_record(["product_id", "period", "true_hedonic_price"]).map_err(io)?;
    let truth = &generated.truth;
    for (i, id) in truth.products.iter().enumerate() {
        for t in 0..truth.hedonic.cols() {
            w.write_record([
                id.clone(),
                generated.panel.period_label(t).to_string(),
                format!("{}", truth.hedonic[(i, t)]),
            ])
            .map_err(io)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Chain drift of matched Fisher indices over replications of a stationary
/// market.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DriftReport {
    pub horizon: usize,
    /// `|log level|` at the horizon, monthly chaining, per replication
    pub monthly: Vec<f64>,
    /// the same with yearly chaining
    pub yearly: Vec<f64>,
    pub mean_monthly: f64,
    pub mean_yearly: f64,
    /// share of replications where monthly drift exceeds yearly drift
    pub monthly_exceeds_share: f64,
}

/// Replication `r` uses seed `spec.seed + r`. The horizon must be a multiple of
/// 12 inside the panel.
pub fn drift_experiment(spec: &MarketSpec, replications: usize, horizon: usize) -> Result<DriftReport> {
    spec.validate()?;
    if !spec.is_stationary() {
        return Err(Error::InvalidSpec("drift experiment needs stationary truth (g = 1, no valuation drift)".into()));
    }
    if horizon == 0 || horizon % 12 != 0 || horizon >= spec.periods {
        return Err(Error::InvalidSpec(format!(
            "horizon {horizon} must be a positive multiple of 12 below {} periods",
            spec.periods
        )));
    }
    if replications == 0 {
        return Err(Error::InvalidSpec("need at least one replication".into()));
    }
    let one = |r: usize| -> Result<(f64, f64)> {
        let mut s = spec.clone();
        s.seed = spec.seed.wrapping_add(r as u64);
        let g: GeneratedPanel<f64> = generate_panel(&s)?;
        let level = |lag: usize| -> Result<f64> {
            let series = chained_series(&g.panel, None, IndexKind::MatchedF, lag, 0)?;
            Ok(series.levels[&horizon].ln().abs())
        };
        Ok((level(1)?, level(12)?))
    };
    let pairs = (0..replications).into_par_iter().map(one).collect::<Result<Vec<_>>>()?;
    let (monthly, yearly): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let k = replications as f64;
    Ok(DriftReport {
        horizon,
        mean_monthly: monthly.iter().sum::<f64>() / k,
        mean_yearly: yearly.iter().sum::<f64>() / k,
        monthly_exceeds_share: monthly.iter().zip(&yearly).filter(|(m, y)| m > y).count() as f64 / k,
        monthly,
        yearly,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> MarketSpec {
        MarketSpec {
            turnover: 0.2,
            price_noise: 0.1,
            inflation: 1.01,
            ..MarketSpec::new(30, 14, seed)
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let a: GeneratedPanel<f64> = generate_panel(&small(3)).unwrap();
        let b: GeneratedPanel<f64> = generate_panel(&small(3)).unwrap();
        assert_eq!(a.panel.records(), b.panel.records());
        assert_eq!(a.catalog, b.catalog);
        let c: GeneratedPanel<f64> = generate_panel(&small(4)).unwrap();
        assert_ne!(a.panel.records(), c.panel.records());
    }

    #[test]
    fn noiseless_linear_prices_equal_truth() {
        let spec = MarketSpec {
            turnover: 0.1,
            ..MarketSpec::new(20, 5, 1)
        };
        let g: GeneratedPanel<f64> = generate_panel(&spec).unwrap();
        for t in 0..5 {
            for i in g.panel.transacting(t) {
                let design = g.truth.latent[i].design(spec.levels);
                let m = &g.truth.model;
                let mut theta = vec![m.base_price];
                for k in 0..spec.attributes {
                    theta.extend(m.effects[k].iter().map(|e| e * m.base_price));
                }
                theta.push(m.quality_effect * m.base_price);
                let want: f64 = design.iter().zip(&theta).map(|(a, b)| a * b).sum();
                assert!((g.panel.price(i, t).unwrap() - want).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn turnover_schedule() {
        let g: GeneratedPanel<f64> = generate_panel(&MarketSpec::new(25, 6, 2)).unwrap();
        let c0 = g.panel.transacting(0);
        assert!((1..6).all(|t| g.panel.transacting(t) == c0));
        let g: GeneratedPanel<f64> = generate_panel(&small(2)).unwrap();
        for t in 1..14 {
            assert_eq!(g.panel.transacting(t).len(), 30);
            assert!((g.panel.turnover_rate(t).unwrap() - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn truth_index_is_uniform_inflation() {
        let g: GeneratedPanel<f64> = generate_panel(&small(5)).unwrap();
        for t in 1..14 {
            for f in [Formula::Laspeyres, Formula::Paasche, Formula::Fisher] {
                assert!((true_index(&g, t, 1, f).unwrap() - 1.01).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn text_is_a_function_of_attributes_and_seed() {
        let spec = MarketSpec::new(5, 2, 9);
        let latent = LatentProduct {
            attributes: vec![0, 1, 2, 3],
            quality: 0.5,
            demand_scale: 1.0,
        };
        let a = product_text(&spec, &latent, &mut ChaCha8Rng::seed_from_u64(1));
        let b = product_text(&spec, &latent, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        assert!(a.0.split(' ').next().unwrap().starts_with("fabric0"));
    }

    #[test]
    fn drift_requires_stationarity_and_vanishes_without_noise() {
        let mut spec = MarketSpec::new(20, 25, 1);
        spec.turnover = 0.05;
        let r = drift_experiment(&spec, 2, 24).unwrap();
        assert!(r.monthly.iter().chain(&r.yearly).all(|d| d.abs() < 1e-12));
        spec.inflation = 1.01;
        assert!(drift_experiment(&spec, 2, 24).is_err());
    }

    #[test]
    fn spec_validation() {
        let mut s = MarketSpec::new(10, 3, 0);
        s.turnover = 1.0;
        assert!(s.validate().is_err());
        let s = MarketSpec {
            inflation_path: Some(vec![1.0]),
            ..MarketSpec::new(10, 3, 0)
        };
        assert!(s.validate().is_err());
        let json = serde_json::to_string(&MarketSpec::new(10, 3, 0)).unwrap();
        assert_eq!(serde_json::from_str::<MarketSpec>(&json).unwrap(), MarketSpec::new(10, 3, 0));
        let minimal: MarketSpec = serde_json::from_str(r#"{"n_products":4,"periods":2,"seed":1}"#).unwrap();
        assert_eq!(minimal, MarketSpec::new(4, 2, 1));
    }
}
