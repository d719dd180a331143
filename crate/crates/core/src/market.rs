//! Transaction panel and product catalog: ingestion, validation, derived
//! prices, match sets, turnover and growth statistics.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub type ProductId = String;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InputFormat {
    Csv,
    Jsonl,
}

impl InputFormat {
    /// Guesses the format from a file extension, defaulting to CSV.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("json") | Some("ndjson") => Self::Jsonl,
            _ => Self::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransactionRecord<T> {
    pub product_id: ProductId,
    pub period: usize,
    pub sales: T,
    pub quantity: T,
}

impl<T: Real> TransactionRecord<T> {
    pub fn price(&self) -> Option<T> {
        compute_price(self)
    }
}

/// `S / Q` when the record carries a sale, `None` for a no-sale marker.
pub fn compute_price<T: Real>(rec: &TransactionRecord<T>) -> Option<T> {
    (rec.quantity > T::zero()).then(|| rec.sales / rec.quantity)
}

/// Aggregated (product, period) cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell<T> {
    pub sales: T,
    pub quantity: T,
    price: Option<T>,
}

impl<T: Real> Cell<T> {
    fn from_totals(sales: T, quantity: T) -> Self {
        let price = (quantity > T::zero()).then(|| sales / quantity);
        Self {
            sales,
            quantity,
            price,
        }
    }

    /// A cell whose unit price is known exactly; sales are derived from it.
    fn from_price(price: T, quantity: T) -> Self {
        Self {
            sales: price * quantity,
            quantity,
            price: (quantity > T::zero()).then_some(price),
        }
    }

    pub fn price(&self) -> Option<T> {
        self.price
    }

    pub fn is_sale(&self) -> bool {
        self.quantity > T::zero()
    }
}

/// Issues found while building a panel that do not prevent its use.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DataQualityReport {
    /// Cells with positive quantity and zero sales (price 0).
    pub zero_price_cells: Vec<(ProductId, usize)>,
    pub no_sale_cells: usize,
    pub merged_duplicate_rows: usize,
}

/// Per (product, period) sales and quantities over a dense period range `[0, T)`.
///
/// A built panel is immutable.
#[derive(Debug, Clone)]
pub struct TransactionPanel<T: Real = f64> {
    products: Vec<ProductId>,
    index: BTreeMap<ProductId, usize>,
    period_labels: Vec<i64>,
    cells: Vec<BTreeMap<usize, Cell<T>>>,
    quality: DataQualityReport,
}

impl<T: Real> TransactionPanel<T> {
    /// Builds a panel from records whose periods are already dense indices.
    /// Duplicate (product, period) rows are summed.
    pub fn from_records(records: Vec<TransactionRecord<T>>, periods: usize) -> Result<Self> {
        let rows = records
            .into_iter()
            .enumerate()
            .map(|(n, r)| {
                if r.period >= periods {
                    return Err(Error::Validation(format!(
                        "record {n}: period {} outside [0, {periods})",
                        r.period
                    )));
                }
                Ok(RawRow {
                    line: n as u64 + 1,
                    product_id: r.product_id,
                    period: r.period,
                    sales: r.sales,
                    quantity: r.quantity,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::build(rows, (0..periods as i64).collect())
    }

    /// Builds a panel from exact unit prices, e.g. generated data. Sales are
    /// `price · quantity`; the stored price is the given one.
    pub fn from_priced_cells(
        cells: impl IntoIterator<Item = (ProductId, usize, T, T)>,
        periods: usize,
    ) -> Result<Self> {
        let mut by_key: BTreeMap<(ProductId, usize), (T, T)> = BTreeMap::new();
        for (id, t, price, q) in cells {
            if t >= periods {
                return Err(Error::Validation(format!("period {t} outside [0, {periods})")));
            }
            if !(price >= T::zero()) || !(q >= T::zero()) || !price.is_finite() || !q.is_finite() {
                return Err(Error::Validation(format!(
                    "product {id} period {t}: invalid price {price} or quantity {q}"
                )));
            }
            if by_key.insert((id.clone(), t), (price, q)).is_some() {
                return Err(Error::Validation(format!("duplicate priced cell ({id}, {t})")));
            }
        }
        let mut panel = Self::empty(
            by_key.keys().map(|(id, _)| id.clone()).collect(),
            (0..periods as i64).collect(),
        );
        for ((id, t), (price, q)) in by_key {
            let i = panel.index[&id];
            panel.cells[t].insert(i, Cell::from_price(price, q));
        }
        panel.quality = panel.scan_quality(0);
        Ok(panel)
    }

    fn empty(products: BTreeSet<ProductId>, period_labels: Vec<i64>) -> Self {
        let products: Vec<ProductId> = products.into_iter().collect();
        let index = products
            .iter()
            .enumerate()
            .map(|(i, p)| (p.clone(), i))
            .collect();
        Self {
            products,
            index,
            cells: vec![BTreeMap::new(); period_labels.len()],
            period_labels,
            quality: DataQualityReport::default(),
        }
    }

    fn build(rows: Vec<RawRow<T>>, period_labels: Vec<i64>) -> Result<Self> {
        for row in &rows {
            if row.sales < T::zero() || row.quantity < T::zero() {
                return Err(Error::Validation(format!(
                    "line {}: negative sales or quantity for product {}",
                    row.line, row.product_id
                )));
            }
        }
        let mut grouped: BTreeMap<(ProductId, usize), Vec<(T, T)>> = BTreeMap::new();
        for row in rows.iter() {
            grouped
                .entry((row.product_id.clone(), row.period))
                .or_default()
                .push((row.sales, row.quantity));
        }
        let merged = rows.len() - grouped.len();
        let mut panel = Self::empty(
            grouped.keys().map(|(id, _)| id.clone()).collect(),
            period_labels,
        );
        for ((id, t), mut parts) in grouped {
            // Fixed summation order keeps ingestion invariant to row order.
            parts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.partial_cmp(&b.1).unwrap()));
            let sales = parts.iter().map(|p| p.0).sum();
            let quantity = parts.iter().map(|p| p.1).sum();
            let i = panel.index[&id];
            panel.cells[t].insert(i, Cell::from_totals(sales, quantity));
        }
        panel.quality = panel.scan_quality(merged);
        Ok(panel)
    }

    fn scan_quality(&self, merged: usize) -> DataQualityReport {
        let mut report = DataQualityReport {
            merged_duplicate_rows: merged,
            ..Default::default()
        };
        for (t, cells) in self.cells.iter().enumerate() {
            for (&i, c) in cells {
                if !c.is_sale() {
                    report.no_sale_cells += 1;
                } else if c.sales == T::zero() {
                    report.zero_price_cells.push((self.products[i].clone(), t));
                }
            }
        }
        report
    }

    pub fn n_periods(&self) -> usize {
        self.cells.len()
    }

    pub fn n_products(&self) -> usize {
        self.products.len()
    }

    pub fn products(&self) -> &[ProductId] {
        &self.products
    }

    pub fn product_id(&self, i: usize) -> &str {
        &self.products[i]
    }

    pub fn product_index(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Original label (YYYYMM or integer) of a dense period index.
    pub fn period_label(&self, t: usize) -> i64 {
        self.period_labels[t]
    }

    pub fn period_labels(&self) -> &[i64] {
        &self.period_labels
    }

    pub fn quality(&self) -> &DataQualityReport {
        &self.quality
    }

    pub fn cell(&self, i: usize, t: usize) -> Option<&Cell<T>> {
        self.cells.get(t)?.get(&i)
    }

    pub fn cells_in(&self, t: usize) -> impl Iterator<Item = (usize, &Cell<T>)> {
        self.cells[t].iter().map(|(&i, c)| (i, c))
    }

    pub fn price(&self, i: usize, t: usize) -> Option<T> {
        self.cell(i, t).and_then(Cell::price)
    }

    /// Quantity sold, zero when the product did not transact.
    pub fn quantity(&self, i: usize, t: usize) -> T {
        self.cell(i, t).map_or(T::zero(), |c| c.quantity)
    }

    pub fn is_transacting(&self, i: usize, t: usize) -> bool {
        self.cell(i, t).is_some_and(Cell::is_sale)
    }

    /// `C_t`: products with positive quantity in period `t`.
    pub fn transacting(&self, t: usize) -> BTreeSet<usize> {
        self.cells[t]
            .iter()
            .filter(|(_, c)| c.is_sale())
            .map(|(&i, _)| i)
            .collect()
    }

    pub fn first_transaction(&self, i: usize) -> Option<usize> {
        (0..self.n_periods()).find(|&t| self.is_transacting(i, t))
    }

    /// All stored cells as records, ordered by period then product id.
    pub fn records(&self) -> Vec<TransactionRecord<T>> {
        let mut out = Vec::new();
        for (t, cells) in self.cells.iter().enumerate() {
            for (&i, c) in cells {
                out.push(TransactionRecord {
                    product_id: self.products[i].clone(),
                    period: t,
                    sales: c.sales,
                    quantity: c.quantity,
                });
            }
        }
        out
    }

    /// `C_t ∩ C_{t−ℓ}`.
    pub fn match_set(&self, t: usize, lag: usize) -> Result<BTreeSet<usize>> {
        let base = t.checked_sub(lag).ok_or(Error::OutOfRange { t, lag })?;
        if t >= self.n_periods() {
            return Err(Error::OutOfRange { t, lag: 0 });
        }
        Ok(self
            .transacting(t)
            .intersection(&self.transacting(base))
            .copied()
            .collect())
    }

    /// Share of `C_t` that did not transact in `t − 1`.
    pub fn turnover_rate(&self, t: usize) -> Result<f64> {
        if t == 0 {
            return Err(Error::OutOfRange { t, lag: 1 });
        }
        let current = self.transacting(t);
        if current.is_empty() {
            return Err(Error::UndefinedRate(format!("no transacting products in period {t}")));
        }
        let previous = self.transacting(t - 1);
        let entrants = current.difference(&previous).count();
        Ok(entrants as f64 / current.len() as f64)
    }

    /// `|C_t| / |C_base|`.
    pub fn growth_ratio(&self, t: usize, base: usize) -> Result<f64> {
        let base_n = self.transacting(base).len();
        if base_n == 0 {
            return Err(Error::UndefinedRate(format!("no transacting products in base period {base}")));
        }
        Ok(self.transacting(t).len() as f64 / base_n as f64)
    }
}

struct RawRow<T> {
    line: u64,
    product_id: ProductId,
    period: usize,
    sales: T,
    quantity: T,
}

/// Maps raw period labels onto a dense index. Labels are read as YYYYMM when
/// every label is a valid year-month, otherwise as non-negative integers.
fn normalize_periods(labels: &[(u64, i64)]) -> Result<(Vec<usize>, Vec<i64>)> {
    let is_yyyymm = |l: i64| (100_001..=999_912).contains(&l) && (1..=12).contains(&(l % 100));
    if let Some(&(line, l)) = labels.iter().find(|(_, l)| *l < 0) {
        return Err(Error::Validation(format!("line {line}: negative period {l}")));
    }
    if labels.is_empty() {
        return Ok((Vec::new(), Vec::new()));
    }
    if labels.iter().all(|&(_, l)| is_yyyymm(l)) {
        let month = |l: i64| (l / 100) * 12 + (l % 100 - 1);
        let min = labels.iter().map(|&(_, l)| month(l)).min().unwrap();
        let max = labels.iter().map(|&(_, l)| month(l)).max().unwrap();
        let dense = labels.iter().map(|&(_, l)| (month(l) - min) as usize).collect();
        let names = (min..=max).map(|m| (m / 12) * 100 + m % 12 + 1).collect();
        Ok((dense, names))
    } else {
        let min = labels.iter().map(|&(_, l)| l).min().unwrap();
        let max = labels.iter().map(|&(_, l)| l).max().unwrap();
        let dense = labels.iter().map(|&(_, l)| (l - min) as usize).collect();
        Ok((dense, (min..=max).collect()))
    }
}

fn parse_num(field: &str, what: &str, line: u64) -> Result<f64> {
    let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("{what}: cannot parse {field:?} as a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("{what}: non-finite value {field:?}"),
        });
    }
    Ok(v)
}

fn parse_period(field: &str, line: u64) -> Result<i64> {
    field.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("period: expected YYYYMM or integer, got {field:?}"),
    })
}

fn header_positions(
    headers: &csv::StringRecord,
    required: &[&str],
) -> Result<Vec<usize>> {
    required
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h.trim() == *name)
                .ok_or_else(|| Error::Parse {
                    line: 1,
                    message: format!("missing column {name:?}"),
                })
        })
        .collect()
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

fn json_field<'a>(
    obj: &'a serde_json::Map<String, serde_json::Value>,
    key: &str,
    line: u64,
) -> Result<&'a serde_json::Value> {
    obj.get(key).ok_or_else(|| Error::Parse {
        line,
        message: format!("missing key {key:?}"),
    })
}

fn json_text(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        serde_json::Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn json_number(v: &serde_json::Value, what: &str, line: u64) -> Result<f64> {
    match v {
        serde_json::Value::Number(n) => n
            .as_f64()
            .filter(|x| x.is_finite())
            .ok_or_else(|| Error::Parse {
                line,
                message: format!("{what}: bad number"),
            }),
        serde_json::Value::String(s) => parse_num(s, what, line),
        _ => Err(Error::Parse {
            line,
            message: format!("{what}: expected a number"),
        }),
    }
}

struct LabeledRow {
    line: u64,
    product_id: ProductId,
    period: i64,
    sales: f64,
    quantity: f64,
}

fn read_transaction_rows<R: Read>(source: R, format: InputFormat) -> Result<Vec<LabeledRow>> {
    let mut rows = Vec::new();
    match format {
        InputFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(true)
                .trim(csv::Trim::All)
                .from_reader(source);
            let headers = rdr.headers().map_err(csv_error)?.clone();
            let pos = header_positions(&headers, &["product_id", "period", "sales", "quantity"])?;
            for rec in rdr.records() {
                let rec = rec.map_err(csv_error)?;
                let line = rec.position().map_or(0, |p| p.line());
                let get = |k: usize| rec.get(pos[k]).unwrap_or("");
                let product_id = get(0).to_string();
                if product_id.is_empty() {
                    return Err(Error::Parse {
                        line,
                        message: "empty product_id".into(),
                    });
                }
                rows.push(LabeledRow {
                    line,
                    product_id,
                    period: parse_period(get(1), line)?,
                    sales: parse_num(get(2), "sales", line)?,
                    quantity: parse_num(get(3), "quantity", line)?,
                });
            }
        }
        InputFormat::Jsonl => {
            for (n, text) in BufReader::new(source).lines().enumerate() {
                let line = n as u64 + 1;
                let text = text?;
                if text.trim().is_empty() {
                    continue;
                }
                let value: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| Error::Parse {
                        line,
                        message: e.to_string(),
                    })?;
                let obj = value.as_object().ok_or_else(|| Error::Parse {
                    line,
                    message: "expected a JSON object".into(),
                })?;
                let product_id = json_text(json_field(obj, "product_id", line)?);
                if product_id.is_empty() {
                    return Err(Error::Parse {
                        line,
                        message: "empty product_id".into(),
                    });
                }
                let period = match json_field(obj, "period", line)? {
                    serde_json::Value::Number(n) => n.as_i64().ok_or_else(|| Error::Parse {
                        line,
                        message: "period: expected an integer".into(),
                    })?,
                    serde_json::Value::String(s) => parse_period(s, line)?,
                    _ => {
                        return Err(Error::Parse {
                            line,
                            message: "period: expected YYYYMM or integer".into(),
                        })
                    }
                };
                rows.push(LabeledRow {
                    line,
                    product_id,
                    period,
                    sales: json_number(json_field(obj, "sales", line)?, "sales", line)?,
                    quantity: json_number(json_field(obj, "quantity", line)?, "quantity", line)?,
                });
            }
        }
    }
    Ok(rows)
}

/// Reads a transaction stream (`product_id,period,sales,quantity`) into a
/// validated panel. Duplicate (product, period) rows are summed.
pub fn ingest_transactions<T: Real, R: Read>(
    source: R,
    format: InputFormat,
) -> Result<TransactionPanel<T>> {
    let rows = read_transaction_rows(source, format)?;
    let labels: Vec<(u64, i64)> = rows.iter().map(|r| (r.line, r.period)).collect();
    let (dense, names) = normalize_periods(&labels)?;
    let raw = rows
        .into_iter()
        .zip(dense)
        .map(|(r, t)| RawRow {
            line: r.line,
            product_id: r.product_id,
            period: t,
            sales: T::of(r.sales),
            quantity: T::of(r.quantity),
        })
        .collect();
    TransactionPanel::build(raw, names)
}

/// Writes a panel in the transaction CSV format, one row per stored cell.
pub fn write_transactions_csv<T: Real, W: Write>(panel: &TransactionPanel<T>, out: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(out);
    writeln!(w, "product_id,period,sales,quantity")?;
    for rec in panel.records() {
        writeln!(
            w,
            "{},{},{},{}",
            rec.product_id,
            panel.period_label(rec.period),
            rec.sales.as_f64(),
            rec.quantity.as_f64()
        )?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductCatalogEntry {
    pub product_id: ProductId,
    pub title: String,
    pub description: String,
    pub bullet_points: Vec<String>,
    pub image_features: Option<Vec<f64>>,
}

impl ProductCatalogEntry {
    /// Title, description and bullet points as separate sentences.
    pub fn sentences(&self) -> Vec<&str> {
        let mut s = vec![self.title.as_str(), self.description.as_str()];
        s.extend(self.bullet_points.iter().map(String::as_str));
        s
    }

    pub fn full_text(&self) -> String {
        self.sentences().join(" ")
    }
}

fn parse_features(field: &str, line: u64) -> Result<Option<Vec<f64>>> {
    let field = field.trim();
    if field.is_empty() {
        return Ok(None);
    }
    field
        .split(';')
        .map(|x| parse_num(x, "image_features", line))
        .collect::<Result<Vec<_>>>()
        .map(Some)
}

fn split_bullets(field: &str) -> Vec<String> {
    field
        .split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(String::from)
        .collect()
}

/// Reads a product catalog. When `image_dim` is given every present image
/// vector must have that length; otherwise all present vectors must agree.
pub fn ingest_catalog<R: Read>(
    source: R,
    format: InputFormat,
    image_dim: Option<usize>,
) -> Result<Vec<ProductCatalogEntry>> {
    let mut entries: Vec<(u64, ProductCatalogEntry)> = Vec::new();
    match format {
        InputFormat::Csv => {
            let mut rdr = csv::ReaderBuilder::new()
                .has_headers(true)
                .from_reader(source);
            let headers = rdr.headers().map_err(csv_error)?.clone();
            let pos = header_positions(
                &headers,
                &["product_id", "title", "description", "bullet_points", "image_features"],
            )?;
            for rec in rdr.records() {
                let rec = rec.map_err(csv_error)?;
                let line = rec.position().map_or(0, |p| p.line());
                let get = |k: usize| rec.get(pos[k]).unwrap_or("");
                entries.push((
                    line,
                    ProductCatalogEntry {
                        product_id: get(0).trim().to_string(),
                        title: get(1).trim().to_string(),
                        description: get(2).trim().to_string(),
                        bullet_points: split_bullets(get(3)),
                        image_features: parse_features(get(4), line)?,
                    },
                ));
            }
        }
        InputFormat::Jsonl => {
            for (n, text) in BufReader::new(source).lines().enumerate() {
                let line = n as u64 + 1;
                let text = text?;
                if text.trim().is_empty() {
                    continue;
                }
                let value: serde_json::Value =
                    serde_json::from_str(&text).map_err(|e| Error::Parse {
                        line,
                        message: e.to_string(),
                    })?;
                let obj = value.as_object().ok_or_else(|| Error::Parse {
                    line,
                    message: "expected a JSON object".into(),
                })?;
                let text_of = |k: &str| obj.get(k).map(json_text).unwrap_or_default();
                let bullets = match obj.get("bullet_points") {
                    Some(serde_json::Value::Array(items)) => items.iter().map(json_text).collect(),
                    Some(v) => split_bullets(&json_text(v)),
                    None => Vec::new(),
                };
                let image = match obj.get("image_features") {
                    Some(serde_json::Value::Array(items)) => Some(
                        items
                            .iter()
                            .map(|v| json_number(v, "image_features", line))
                            .collect::<Result<Vec<_>>>()?,
                    ),
                    Some(serde_json::Value::Null) | None => None,
                    Some(v) => parse_features(&json_text(v), line)?,
                };
                entries.push((
                    line,
                    ProductCatalogEntry {
                        product_id: json_text(json_field(obj, "product_id", line)?),
                        title: text_of("title"),
                        description: text_of("description"),
                        bullet_points: bullets,
                        image_features: image,
                    },
                ));
            }
        }
    }
    validate_catalog(entries, image_dim)
}

fn validate_catalog(
    mut entries: Vec<(u64, ProductCatalogEntry)>,
    image_dim: Option<usize>,
) -> Result<Vec<ProductCatalogEntry>> {
    let mut dim = image_dim;
    let mut seen = BTreeSet::new();
    for (line, e) in &entries {
        if e.product_id.is_empty() {
            return Err(Error::Validation(format!("line {line}: empty product_id")));
        }
        if e.title.trim().is_empty() {
            return Err(Error::Validation(format!(
                "line {line}: empty title for product {}",
                e.product_id
            )));
        }
        if !seen.insert(e.product_id.clone()) {
            return Err(Error::Validation(format!(
                "line {line}: duplicate catalog entry for product {}",
                e.product_id
            )));
        }
        if let Some(f) = &e.image_features {
            match dim {
                Some(d) if d != f.len() => {
                    return Err(Error::Validation(format!(
                        "line {line}: image_features has {} values, expected {d}",
                        f.len()
                    )))
                }
                None => dim = Some(f.len()),
                _ => {}
            }
        }
    }
    entries.sort_by(|a, b| a.1.product_id.cmp(&b.1.product_id));
    Ok(entries.into_iter().map(|(_, e)| e).collect())
}

pub fn write_catalog_csv<W: Write>(entries: &[ProductCatalogEntry], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["product_id", "title", "description", "bullet_points", "image_features"])
        .map_err(csv_error)?;
    for e in entries {
        let features = e
            .image_features
            .as_ref()
            .map(|f| f.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"))
            .unwrap_or_default();
        w.write_record([
            e.product_id.as_str(),
            e.title.as_str(),
            e.description.as_str(),
            e.bullet_points.join("|").as_str(),
            features.as_str(),
        ])
        .map_err(csv_error)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv_panel(text: &str) -> Result<TransactionPanel<f64>> {
        ingest_transactions(text.as_bytes(), InputFormat::Csv)
    }

    #[test]
    fn duplicate_rows_are_summed() {
        let p = csv_panel("product_id,period,sales,quantity\na,0,2,1\na,0,4,1\n").unwrap();
        let c = p.cell(0, 0).unwrap();
        assert_eq!((c.sales, c.quantity, c.price()), (6.0, 2.0, Some(3.0)));
        assert_eq!(p.quality().merged_duplicate_rows, 1);
    }

    #[test]
    fn zero_quantity_is_a_no_sale_marker() {
        let p = csv_panel("product_id,period,sales,quantity\na,0,0,0\nb,0,5,1\n").unwrap();
        assert_eq!(p.price(0, 0), None);
        assert!(!p.is_transacting(0, 0));
        assert_eq!(p.transacting(0).len(), 1);
        assert_eq!(p.quality().no_sale_cells, 1);
    }

    #[test]
    fn negative_quantity_is_rejected() {
        let err = csv_panel("product_id,period,sales,quantity\na,0,1,-1\n").unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = csv_panel("product_id,period,sales,quantity\na,0,1,1\nb,0,abc,1\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn zero_price_is_kept_and_flagged() {
        let p = csv_panel("product_id,period,sales,quantity\na,0,0,2\n").unwrap();
        assert_eq!(p.price(0, 0), Some(0.0));
        assert_eq!(p.quality().zero_price_cells, vec![("a".to_string(), 0)]);
    }

    #[test]
    fn yyyymm_periods_become_dense() {
        let p = csv_panel("product_id,period,sales,quantity\na,201811,1,1\na,201902,1,1\n").unwrap();
        assert_eq!(p.n_periods(), 4);
        assert_eq!(p.period_labels(), &[201811, 201812, 201901, 201902]);
        assert!(p.is_transacting(0, 3));
    }

    #[test]
    fn jsonl_matches_csv() {
        let j = "{\"product_id\":\"a\",\"period\":\"201801\",\"sales\":6,\"quantity\":2}\n\
                 {\"product_id\":\"b\",\"period\":201802,\"sales\":1.5,\"quantity\":1}\n";
        let pj: TransactionPanel<f64> = ingest_transactions(j.as_bytes(), InputFormat::Jsonl).unwrap();
        let pc = csv_panel("product_id,period,sales,quantity\na,201801,6,2\nb,201802,1.5,1\n").unwrap();
        assert_eq!(pj.records(), pc.records());
        assert_eq!(pj.period_labels(), pc.period_labels());
    }

    #[test]
    fn compute_price_cases() {
        let rec = |s: f64, q: f64| TransactionRecord {
            product_id: "x".into(),
            period: 0,
            sales: s,
            quantity: q,
        };
        assert_eq!(compute_price(&rec(97.0, 1.0)), Some(97.0));
        assert_eq!(compute_price(&rec(6.0, 2.0)), Some(3.0));
        assert_eq!(compute_price(&rec(0.0, 0.0)), None);
    }

    fn sets_panel(sets: &[&[&str]]) -> TransactionPanel<f64> {
        let mut recs = Vec::new();
        for (t, ids) in sets.iter().enumerate() {
            for id in *ids {
                recs.push(TransactionRecord {
                    product_id: id.to_string(),
                    period: t,
                    sales: 1.0,
                    quantity: 1.0,
                });
            }
        }
        TransactionPanel::from_records(recs, sets.len()).unwrap()
    }

    fn ids(p: &TransactionPanel<f64>, s: &BTreeSet<usize>) -> Vec<String> {
        s.iter().map(|&i| p.product_id(i).to_string()).collect()
    }

    #[test]
    fn match_set_cases() {
        let p = sets_panel(&[&["b", "c"], &["a", "b"]]);
        assert_eq!(ids(&p, &p.match_set(1, 1).unwrap()), vec!["b"]);
        assert_eq!(ids(&p, &p.match_set(1, 0).unwrap()), vec!["a", "b"]);
        assert!(matches!(p.match_set(0, 1), Err(Error::OutOfRange { .. })));
        let q = sets_panel(&[&["a"], &["b"]]);
        assert!(q.match_set(1, 1).unwrap().is_empty());
    }

    #[test]
    fn turnover_cases() {
        let p = sets_panel(&[&["a", "b"], &["a", "b", "c", "d"]]);
        assert_eq!(p.turnover_rate(1).unwrap(), 0.5);
        let p = sets_panel(&[&["a", "b", "c"], &["a", "b"]]);
        assert_eq!(p.turnover_rate(1).unwrap(), 0.0);
        let p = sets_panel(&[&["a"], &["b", "c"]]);
        assert_eq!(p.turnover_rate(1).unwrap(), 1.0);
        let p = sets_panel(&[&["a"], &[]]);
        assert!(matches!(p.turnover_rate(1), Err(Error::UndefinedRate(_))));
    }

    #[test]
    fn growth_cases() {
        let base: Vec<String> = (0..100).map(|i| format!("p{i}")).collect();
        let cur: Vec<String> = (0..150).map(|i| format!("p{i}")).collect();
        let b: Vec<&str> = base.iter().map(String::as_str).collect();
        let c: Vec<&str> = cur.iter().map(String::as_str).collect();
        let p = sets_panel(&[&b, &c, &[]]);
        assert_eq!(p.growth_ratio(1, 0).unwrap(), 1.5);
        assert_eq!(p.growth_ratio(0, 0).unwrap(), 1.0);
        assert_eq!(p.growth_ratio(2, 0).unwrap(), 0.0);
        assert!(p.growth_ratio(0, 2).is_err());
    }

    #[test]
    fn catalog_csv_roundtrip_and_validation() {
        let entries = vec![ProductCatalogEntry {
            product_id: "a".into(),
            title: "Red dress".into(),
            description: "A red, silk dress".into(),
            bullet_points: vec!["silk".into(), "red".into()],
            image_features: Some(vec![0.5, -1.25]),
        }];
        let mut buf = Vec::new();
        write_catalog_csv(&entries, &mut buf).unwrap();
        let back = ingest_catalog(buf.as_slice(), InputFormat::Csv, Some(2)).unwrap();
        assert_eq!(back, entries);
        assert!(ingest_catalog(buf.as_slice(), InputFormat::Csv, Some(3)).is_err());
        let bad = "product_id,title,description,bullet_points,image_features\na,,d,,\n";
        assert!(matches!(
            ingest_catalog(bad.as_bytes(), InputFormat::Csv, None),
            Err(Error::Validation(_))
        ));
    }
}
