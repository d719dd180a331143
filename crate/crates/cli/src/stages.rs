//! The pipeline stages. Each reads its inputs from files, writes its artifacts
//! into the output directory, and reports the artifact names it produced.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hedonic_core::embeddings::write_embeddings;
use hedonic_core::features::{catalog_features, train_catalog_embeddings};
use hedonic_core::indices::{annualized_rate, chained_series, HedonicSurface, IndexKind};
use hedonic_core::inference::{
    hedonic_ci, holdout_design, median_aggregate, ols_fit, predictive_ci, pvalues_bonferroni, OlsFit, SplitResult,
};
use hedonic_core::linalg::Matrix;
use hedonic_core::market::{
    ingest_catalog, ingest_transactions, write_catalog_csv, write_transactions_csv, InputFormat, ProductCatalogEntry,
    ProductId,
};
use hedonic_core::net::{
    extract_value_embeddings, r_squared, read_checkpoint, split_stratified, train, write_checkpoint, DataSplit,
    PriceTable, PriceTransform,
};
use hedonic_core::synth::{drift_experiment, generate_panel, write_truth_csv, MarketSpec};
use hedonic_core::{Features, Generated, Network, Panel};
use serde_json::json;

use crate::config::{canonical, sha256_hex, PipelineConfig};
use crate::report;
use crate::workspace::Workspace;

pub const TRANSACTIONS: &str = "transactions.csv";
pub const CATALOG: &str = "catalog.csv";
pub const PANEL: &str = "panel.csv";
pub const ITEMS: &str = "items.csv";
pub const FEATURES: &str = "features.csv";
pub const SPLIT: &str = "split.csv";
pub const MODEL: &str = "model.hnet";
pub const INDICES: &str = "indices.csv";
pub const R2: &str = "r2.csv";

fn hash(value: serde_json::Value) -> String {
    sha256_hex(canonical(&value).as_bytes())
}

fn seeds(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
    pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let p = dir.join(name);
    Ok(BufWriter::new(File::create(&p).with_context(|| format!("cannot write {}", p.display()))?))
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(dir, name)?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("cannot open {}", path.display()))?))
}

fn require_file(path: &Path, what: &str) -> Result<()> {
    if !path.is_file() {
        bail!("{what} file not found: {}", path.display());
    }
    Ok(())
}

pub fn load_panel(path: &Path) -> Result<Panel> {
    ingest_transactions(open(path)?, InputFormat::Csv).with_context(|| format!("invalid panel {}", path.display()))
}

fn load_items(path: &Path) -> Result<Vec<ProductCatalogEntry>> {
    ingest_catalog(open(path)?, InputFormat::Csv, None).with_context(|| format!("invalid catalog {}", path.display()))
}

fn load_features(path: &Path) -> Result<Features> {
    let mut rdr = csv::Reader::from_reader(open(path)?);
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or_default().to_string();
        let x = rec
            .iter()
            .skip(1)
            .map(|v| v.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .with_context(|| format!("bad feature value for {id} in {}", path.display()))?;
        rows.push((id, x));
    }
    Ok(Features::from_rows(rows)?)
}

fn load_split(path: &Path) -> Result<DataSplit> {
    let mut split = DataSplit {
        train: Vec::new(),
        validation: Vec::new(),
        test: Vec::new(),
        warnings: Vec::new(),
    };
    let mut rdr = csv::Reader::from_reader(open(path)?);
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or_default().to_string();
        match rec.get(1) {
            Some("train") => split.train.push(id),
            Some("validation") => split.validation.push(id),
            Some("test") => split.test.push(id),
            other => bail!("unknown split set {other:?} in {}", path.display()),
        }
    }
    for ids in [&mut split.train, &mut split.validation, &mut split.test] {
        ids.sort();
    }
    Ok(split)
}

fn load_model(path: &Path) -> Result<Network> {
    read_checkpoint(open(path)?).with_context(|| format!("invalid checkpoint {}", path.display()))
}

/// Products whose held-out prices evaluate the model: the test set, or the
/// validation set when there is no test set.
fn holdout(split: &DataSplit) -> &[ProductId] {
    if split.test.is_empty() {
        &split.validation
    } else {
        &split.test
    }
}

fn split_fractions(cfg: &PipelineConfig) -> (f64, f64, f64) {
    let s = cfg.training.split;
    (s[0], s[1], s[2])
}

pub fn simulate(ws: &mut Workspace, spec: &MarketSpec) -> Result<bool> {
    spec.validate()?;
    let h = hash(json!({ "stage": "simulate", "spec": spec }));
    ws.run_stage("simulate", h, seeds(&[("synthetic", spec.seed)]), &[], |dir| {
        let g: Generated = generate_panel(spec)?;
        for w in &g.warnings {
            eprintln!("warning: {w}");
        }
        let mut out = create(dir, TRANSACTIONS)?;
        write_transactions_csv(&g.panel, &mut out)?;
        out.flush()?;
        let mut out = create(dir, CATALOG)?;
        write_catalog_csv(&g.catalog, &mut out)?;
        out.flush()?;
        let mut out = create(dir, "truth.csv")?;
        write_truth_csv(&g, &mut out)?;
        out.flush()?;
        std::fs::write(dir.join("spec.json"), serde_json::to_string_pretty(spec)? + "\n")?;
        Ok(vec![TRANSACTIONS.into(), CATALOG.into(), "truth.csv".into(), "spec.json".into()])
    })
}

/// Input files of the ingest stage: the configured paths, or the simulated
/// market in the output directory.
fn raw_inputs(cfg: &PipelineConfig, ws: &Workspace) -> Result<(PathBuf, PathBuf)> {
    let pick = |p: &Option<PathBuf>, fallback: &str, what: &str| -> Result<PathBuf> {
        match p {
            Some(p) => Ok(p.clone()),
            None if cfg.synthetic.is_some() => Ok(ws.path(fallback)),
            None => bail!("no {what} path configured"),
        }
    };
    let tx = pick(&cfg.paths.transactions, TRANSACTIONS, "transactions")?;
    let cat = pick(&cfg.paths.catalog, CATALOG, "catalog")?;
    require_file(&tx, "transactions")?;
    require_file(&cat, "catalog")?;
    Ok((tx, cat))
}

pub fn ingest(cfg: &PipelineConfig, ws: &mut Workspace) -> Result<bool> {
    let (tx, cat) = raw_inputs(cfg, ws)?;
    let h = hash(json!({ "stage": "ingest" }));
    ws.run_stage("ingest", h, seeds(&[]), &[tx.clone(), cat.clone()], |dir| {
        let panel: Panel = ingest_transactions(open(&tx)?, InputFormat::from_path(&tx))
            .with_context(|| format!("invalid transactions {}", tx.display()))?;
        let catalog = ingest_catalog(open(&cat)?, InputFormat::from_path(&cat), None)
            .with_context(|| format!("invalid catalog {}", cat.display()))?;
        let known: std::collections::BTreeSet<&str> = catalog.iter().map(|e| e.product_id.as_str()).collect();
        let missing = panel.products().iter().filter(|p| !known.contains(p.as_str())).count();
        if missing > 0 {
            eprintln!("warning: {missing} transacting products have no catalog entry");
        }
        let mut out = create(dir, PANEL)?;
        write_transactions_csv(&panel, &mut out)?;
        out.flush()?;
        let mut out = create(dir, ITEMS)?;
        write_catalog_csv(&catalog, &mut out)?;
        out.flush()?;
        let q = panel.quality();
        let mut w = csv_writer(dir, "data_quality.csv")?;
        w.write_record(["issue", "product_id", "period", "count"])?;
        w.write_record(["no_sale_cells", "", "", &q.no_sale_cells.to_string()])?;
        w.write_record(["merged_duplicate_rows", "", "", &q.merged_duplicate_rows.to_string()])?;
        w.write_record(["products_without_catalog", "", "", &missing.to_string()])?;
        for (id, t) in &q.zero_price_cells {
            w.write_record(["zero_price", id, &panel.period_label(*t).to_string(), "1"])?;
        }
        w.flush()?;
        Ok(vec![PANEL.into(), ITEMS.into(), "data_quality.csv".into()])
    })
}

pub fn embed(cfg: &PipelineConfig, ws: &mut Workspace) -> Result<bool> {
    let items = ws.artifact(ITEMS)?;
    let w2v = cfg.word2vec();
    let h = hash(json!({ "stage": "embed", "embedding": cfg.embedding }));
    ws.run_stage("embed", h, seeds(&[("embedding", w2v.seed)]), &[items.clone()], |dir| {
        let catalog = load_items(&items)?;
        let (vocab, model) = train_catalog_embeddings::<f64>(&catalog, cfg.embedding.min_count, &w2v)?;
        let mut out = create(dir, "embeddings.emb")?;
        write_embeddings(&model.embeddings, &mut out)?;
        out.flush()?;
        let mut w = csv_writer(dir, "word2vec_loss.csv")?;
        w.write_record(["epoch", "loss"])?;
        for (e, l) in model.epoch_losses.iter().enumerate() {
            w.write_record([(e + 1).to_string(), l.to_string()])?;
        }
        w.flush()?;
        let features = catalog_features(
            &catalog,
            &vocab,
            &model.embeddings,
            cfg.embedding.weighting,
            cfg.embedding.use_images,
        )?;
        let mut w = csv_writer(dir, FEATURES)?;
        let mut header = vec!["product_id".to_string()];
        header.extend((0..features.width()).map(|k| format!("x{k}")));
        w.write_record(&header)?;
        for id in features.products() {
            let x = features.get(id).expect("listed product");
            w.write_record(std::iter::once(id.clone()).chain(x.iter().map(|v| v.to_string())))?;
        }
        w.flush()?;
        Ok(vec!["embeddings.emb".into(), "word2vec_loss.csv".into(), FEATURES.into()])
    })
}

/// Pooled and per-period R² of `net` on the held-out products, in currency.
fn holdout_r2(net: &Network, panel: &Panel, features: &Features, ids: &[ProductId], include_zero: bool) -> Result<(Vec<Option<f64>>, Option<f64>)> {
    let table = PriceTable::from_panel(panel, features, ids, PriceTransform::Identity, include_zero)?;
    let mut pred = Matrix::zeros(table.len(), panel.n_periods());
    for r in 0..table.len() {
        pred.row_mut(r).copy_from_slice(&net.hedonic_prices(table.features.row(r))?);
    }
    let r2 = r_squared(&pred, &table.targets, &table.observed, Some(&table.quantities))?;
    Ok((r2.per_period, r2.pooled))
}

pub fn train_stage(cfg: &PipelineConfig, ws: &mut Workspace) -> Result<bool> {
    let panel_path = ws.artifact(PANEL)?;
    let feat_path = ws.artifact(FEATURES)?;
    let s = cfg.seeds();
    let h = hash(json!({ "stage": "train", "network": cfg.network, "training": cfg.training }));
    let sd = seeds(&[("split", s.split), ("training", s.training)]);
    ws.run_stage("train", h, sd, &[panel_path.clone(), feat_path.clone()], |dir| {
        let panel = load_panel(&panel_path)?;
        let features = load_features(&feat_path)?;
        let split = split_stratified(&panel, split_fractions(cfg), s.split)?;
        for w in &split.warnings {
            eprintln!("warning: {w}");
        }
        let net_cfg = cfg.network_config(features.width(), panel.n_periods());
        let outcome = train(&panel, &features, &split, &net_cfg, &cfg.training_config())?;

        let mut w = csv_writer(dir, SPLIT)?;
        w.write_record(["product_id", "set"])?;
        for (set, ids) in [("train", &split.train), ("validation", &split.validation), ("test", &split.test)] {
            for id in ids {
                w.write_record([id.as_str(), set])?;
            }
        }
        w.flush()?;

        let mut out = create(dir, MODEL)?;
        write_checkpoint(&outcome.network, &mut out)?;
        out.flush()?;

        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut w = csv_writer(dir, "learning_curve.csv")?;
        w.write_record(["epoch", "train_loss", "val_loss", "val_r2"])?;
        for e in &outcome.curve {
            w.write_record([e.epoch.to_string(), e.train_loss.to_string(), opt(e.val_loss), opt(e.val_r2)])?;
        }
        w.flush()?;

        let ids = holdout(&split);
        let mut w = csv_writer(dir, R2)?;
        w.write_record(["scope", "period", "r2"])?;
        if ids.is_empty() {
            eprintln!("warning: no held-out products; r2.csv is empty");
        } else {
            let (per, pooled) = holdout_r2(&outcome.network, &panel, &features, ids, cfg.training.include_zero_prices)?;
            if let Some(p) = pooled {
                w.write_record(["pooled".to_string(), String::new(), p.to_string()])?;
                eprintln!("holdout pooled R2: {p:.4}");
            }
            for (t, r) in per.iter().enumerate() {
                if let Some(r) = r {
                    w.write_record(["period".to_string(), panel.period_label(t).to_string(), r.to_string()])?;
                }
            }
        }
        w.flush()?;
        Ok(vec![SPLIT.into(), MODEL.into(), "learning_curve.csv".into(), R2.into()])
    })
}

/// Per-period OLS fits on the held-out value embeddings; periods that cannot
/// be fitted are reported and skipped.
fn period_fits(
    values: &hedonic_core::ValueEmbeddings,
    panel: &Panel,
    ids: &[ProductId],
    cfg: &PipelineConfig,
) -> Result<BTreeMap<usize, (Vec<ProductId>, OlsFit<f64>)>> {
    let mut fits = BTreeMap::new();
    for t in 0..panel.n_periods() {
        let (cell_ids, design, y) = holdout_design(values, panel, t, ids)?;
        match ols_fit(&design, &y, t, &cfg.ols_options()) {
            Ok(fit) => {
                fits.insert(t, (cell_ids, fit));
            }
            Err(e) => eprintln!("warning: period {}: {e}", panel.period_label(t)),
        }
    }
    Ok(fits)
}

pub fn infer(cfg: &PipelineConfig, ws: &mut Workspace) -> Result<bool> {
    let inputs = [PANEL, FEATURES, SPLIT, MODEL]
        .iter()
        .map(|n| ws.artifact(n))
        .collect::<Result<Vec<_>>>()?;
    let s = cfg.seeds();
    let h = hash(json!({
        "stage": "infer",
        "inference": cfg.inference,
        "network": cfg.network,
        "training": cfg.training,
    }));
    let sd = seeds(&[("split", s.split), ("training", s.training)]);
    ws.run_stage("infer", h, sd, &inputs.clone(), |dir| {
        let panel = load_panel(&inputs[0])?;
        let features = load_features(&inputs[1])?;
        let split = load_split(&inputs[2])?;
        let net = load_model(&inputs[3])?;
        let alpha = cfg.inference.alpha;
        let ids = holdout(&split).to_vec();
        if ids.is_empty() {
            bail!("inference needs held-out products; the split has no test or validation set");
        }
        let values = extract_value_embeddings(&net, &features, &ids, &split)?;
        let fits = period_fits(&values, &panel, &ids, cfg)?;
        if fits.is_empty() {
            bail!("no period has enough held-out products for the value-embedding regression");
        }

        let mut w = csv_writer(dir, "inference.csv")?;
        w.write_record(["period", "coef_index", "theta_hat", "se", "p_value", "significant_bonferroni"])?;
        for (t, (_, fit)) in &fits {
            for c in pvalues_bonferroni(fit, alpha)? {
                w.write_record([
                    panel.period_label(*t).to_string(),
                    c.index.to_string(),
                    c.theta_hat.to_string(),
                    c.se.to_string(),
                    c.p_value.to_string(),
                    c.significant.to_string(),
                ])?;
            }
        }
        w.flush()?;

        let mut w = csv_writer(dir, "intervals.csv")?;
        w.write_record(["product_id", "period", "h_hat", "se", "lower", "upper", "kind", "level"])?;
        for (t, (cell_ids, fit)) in &fits {
            for id in cell_ids {
                let v = values.get(id).expect("held-out product has an embedding");
                for ci in [hedonic_ci(fit, v, alpha)?, predictive_ci(fit, v, alpha, fit.residual_variance)?] {
                    w.write_record([
                        id.clone(),
                        panel.period_label(*t).to_string(),
                        ci.center.to_string(),
                        ci.se.to_string(),
                        ci.lower.to_string(),
                        ci.upper.to_string(),
                        ci.kind.as_str().to_string(),
                        ci.level.to_string(),
                    ])?;
                }
            }
        }
        w.flush()?;

        let mut outputs = vec!["inference.csv".to_string(), "intervals.csv".to_string()];
        if cfg.inference.splits > 1 {
            aggregate_splits(cfg, &panel, &features, (&net, &split), dir)?;
            outputs.extend(["aggregate.csv".to_string(), "aggregate_tests.csv".to_string()]);
        }
        Ok(outputs)
    })
}

/// Repeats training and inference over `S` splits and writes the medians.
/// Split 0 is the saved model; split `s` reseeds both the split and training.
fn aggregate_splits(
    cfg: &PipelineConfig,
    panel: &Panel,
    features: &Features,
    first: (&Network, &DataSplit),
    dir: &Path,
) -> Result<()> {
    let s = cfg.seeds();
    let alpha = cfg.inference.alpha;
    let mut runs: Vec<(Network, DataSplit)> = vec![(first.0.clone(), first.1.clone())];
    for k in 1..cfg.inference.splits as u64 {
        let split = split_stratified(panel, split_fractions(cfg), s.split.wrapping_add(k))?;
        let mut tc = cfg.training_config();
        tc.seed = s.training.wrapping_add(k);
        let net_cfg = cfg.network_config(features.width(), panel.n_periods());
        let outcome = train(panel, features, &split, &net_cfg, &tc)?;
        runs.push((outcome.network, split));
    }
    let mut per_split_fits = Vec::new();
    for (net, split) in &runs {
        let ids = holdout(split).to_vec();
        let values = extract_value_embeddings(net, features, &ids, split)?;
        per_split_fits.push(period_fits(&values, panel, &ids, cfg)?);
    }
    // periods fitted in every split share one grid of transacting products
    let periods: Vec<usize> = (0..panel.n_periods())
        .filter(|t| per_split_fits.iter().all(|f| f.contains_key(t)))
        .collect();
    if periods.is_empty() {
        bail!("no period could be fitted in every split");
    }
    let mut cells: Vec<(ProductId, usize)> = Vec::new();
    for &t in &periods {
        for i in panel.transacting(t) {
            let id = panel.product_id(i);
            if features.get(id).is_some() {
                cells.push((id.to_string(), t));
            }
        }
    }
    let mut results = Vec::new();
    for ((net, _), fits) in runs.iter().zip(&per_split_fits) {
        let mut r = SplitResult {
            cells: cells.clone(),
            estimates: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            p_values: Vec::new(),
        };
        for (id, t) in &cells {
            let v = net.value_embedding(features.get(id).expect("cell has features"))?;
            let ci = hedonic_ci(&fits[t].1, &v, alpha)?;
            r.estimates.push(ci.center);
            r.lower.push(ci.lower);
            r.upper.push(ci.upper);
        }
        for t in &periods {
            let tests = pvalues_bonferroni(&fits[t].1, alpha)?;
            let min_p = tests.iter().map(|c| c.p_value).fold(1.0, f64::min);
            r.p_values.push((min_p * tests.len() as f64).min(1.0));
        }
        results.push(r);
    }
    let agg = median_aggregate(&results, alpha)?;
    let mut w = csv_writer(dir, "aggregate.csv")?;
    w.write_record(["product_id", "period", "median_h_hat", "median_lower", "median_upper", "level"])?;
    for (k, (id, t)) in agg.cells.iter().enumerate() {
        w.write_record([
            id.clone(),
            panel.period_label(*t).to_string(),
            agg.medians[k].to_string(),
            agg.median_lower[k].to_string(),
            agg.median_upper[k].to_string(),
            agg.adjusted_level.to_string(),
        ])?;
    }
    w.flush()?;
    let mut w = csv_writer(dir, "aggregate_tests.csv")?;
    w.write_record(["period", "median_p", "significant"])?;
    for (k, t) in periods.iter().enumerate() {
        w.write_record([
            panel.period_label(*t).to_string(),
            agg.median_p[k].to_string(),
            agg.significant[k].to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// The network's hedonic prices for every product with features.
pub fn network_surface(net: &Network, panel: &Panel, features: &Features) -> Result<HedonicSurface<f64>> {
    let mut prices: Vec<Option<Vec<f64>>> = Vec::with_capacity(panel.n_products());
    for id in panel.products() {
        prices.push(match features.get(id) {
            Some(x) => Some(net.hedonic_prices(x)?),
            None => None,
        });
    }
    Ok(HedonicSurface::from_fn(panel, |i, t| prices[i].as_ref().map(|p| p[t])))
}

pub fn index(cfg: &PipelineConfig, ws: &mut Workspace) -> Result<bool> {
    let inputs = [PANEL, FEATURES, MODEL]
        .iter()
        .map(|n| ws.artifact(n))
        .collect::<Result<Vec<_>>>()?;
    let h = hash(json!({ "stage": "index", "index": cfg.index }));
    ws.run_stage("index", h, seeds(&[]), &inputs.clone(), |dir| {
        let panel = load_panel(&inputs[0])?;
        let features = load_features(&inputs[1])?;
        let net = load_model(&inputs[2])?;
        let surface = network_surface(&net, &panel, &features)?;
        let base = cfg.index.base;
        if base >= panel.n_periods() {
            bail!("base period {base} is outside the panel's {} periods", panel.n_periods());
        }
        let mut series = Vec::new();
        for &kind in &cfg.index.kinds {
            for &lag in &cfg.index.lags {
                // the combined index pairs monthly with a longer lag
                if kind == IndexKind::Combined && lag == 1 {
                    continue;
                }
                match chained_series(&panel, Some(&surface), kind, lag, base) {
                    Ok(s) => series.push(s),
                    Err(e) => eprintln!("warning: {} at lag {lag}: {e}", kind.as_str()),
                }
            }
        }
        if series.is_empty() {
            bail!("no index series could be computed");
        }
        let mut w = csv_writer(dir, INDICES)?;
        w.write_record(["kind", "lag", "period", "level"])?;
        for s in &series {
            for (t, level) in &s.levels {
                w.write_record([
                    s.kind.as_str().to_string(),
                    s.lag.to_string(),
                    panel.period_label(*t).to_string(),
                    level.to_string(),
                ])?;
            }
        }
        w.flush()?;
        let mut w = csv_writer(dir, "index_summary.csv")?;
        w.write_record(["kind", "lag", "annualized_rate_pct", "from", "to"])?;
        for s in &series {
            let (&from, &to) = (s.levels.keys().next().unwrap(), s.levels.keys().next_back().unwrap());
            if to > from {
                w.write_record([
                    s.kind.as_str().to_string(),
                    s.lag.to_string(),
                    annualized_rate(s, from, to)?.to_string(),
                    panel.period_label(from).to_string(),
                    panel.period_label(to).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(vec![INDICES.into(), "index_summary.csv".into()])
    })
}

pub fn report_stage(ws: &mut Workspace) -> Result<bool> {
    let required = [INDICES, R2, PANEL];
    let missing: Vec<String> = required
        .iter()
        .filter(|n| !ws.path(n).is_file())
        .map(|n| ws.path(n).display().to_string())
        .collect();
    if !missing.is_empty() {
        bail!("missing artifacts: {}", missing.join(", "));
    }
    let inputs: Vec<PathBuf> = required.iter().map(|n| ws.path(n)).collect();
    let h = hash(json!({ "stage": "report" }));
    ws.run_stage("report", h, seeds(&[]), &inputs.clone(), |dir| {
        let panel = load_panel(&inputs[2])?;
        report::render(dir, &inputs[0], &inputs[1], &panel)
    })
}

pub fn drift(ws: &mut Workspace, spec: &MarketSpec, replications: usize, horizon: usize) -> Result<bool> {
    let h = hash(json!({ "stage": "drift", "spec": spec, "replications": replications, "horizon": horizon }));
    ws.run_stage("drift", h, seeds(&[("synthetic", spec.seed)]), &[], |dir| {
        let r = drift_experiment(spec, replications, horizon)?;
        let mut w = csv_writer(dir, "drift.csv")?;
        w.write_record(["replication", "monthly_abs_log_drift", "yearly_abs_log_drift"])?;
        for (k, (m, y)) in r.monthly.iter().zip(&r.yearly).enumerate() {
            w.write_record([k.to_string(), m.to_string(), y.to_string()])?;
        }
        w.flush()?;
        std::fs::write(dir.join("drift_summary.json"), serde_json::to_string_pretty(&r)? + "\n")?;
        println!(
            "horizon {}: mean |log drift| monthly {:.4}, yearly {:.4}; monthly larger in {:.0}% of {} replications",
            r.horizon,
            r.mean_monthly,
            r.mean_yearly,
            100.0 * r.monthly_exceeds_share,
            replications
        );
        Ok(vec!["drift.csv".into(), "drift_summary.json".into()])
    })
}
