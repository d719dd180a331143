//! Matched and hedonic Laspeyres, Paasche and Fisher indices, the Jevons index,
//! chaining, the geometric combination of chained series and annualized rates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{ProductId, TransactionPanel};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Formula {
    Laspeyres,
    Paasche,
    Fisher,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    MatchedL,
    MatchedP,
    MatchedF,
    HedonicL,
    HedonicP,
    HedonicF,
    Jevons,
    Combined,
}

impl IndexKind {
    pub const ALL: [IndexKind; 8] = [
        IndexKind::MatchedL,
        IndexKind::MatchedP,
        IndexKind::MatchedF,
        IndexKind::HedonicL,
        IndexKind::HedonicP,
        IndexKind::HedonicF,
        IndexKind::Jevons,
        IndexKind::Combined,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IndexKind::MatchedL => "matched_l",
            IndexKind::MatchedP => "matched_p",
            IndexKind::MatchedF => "matched_f",
            IndexKind::HedonicL => "hedonic_l",
            IndexKind::HedonicP => "hedonic_p",
            IndexKind::HedonicF => "hedonic_f",
            IndexKind::Jevons => "jevons",
            IndexKind::Combined => "combined",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    pub fn is_hedonic(self) -> bool {
        matches!(self, IndexKind::HedonicL | IndexKind::HedonicP | IndexKind::HedonicF | IndexKind::Combined)
    }

    fn formula(self) -> Option<Formula> {
        match self {
            IndexKind::MatchedL | IndexKind::HedonicL => Some(Formula::Laspeyres),
            IndexKind::MatchedP | IndexKind::HedonicP => Some(Formula::Paasche),
            IndexKind::MatchedF | IndexKind::HedonicF => Some(Formula::Fisher),
            _ => None,
        }
    }
}

fn ratio<T: Real>(num: T, den: T, what: &str) -> Result<T> {
    if !(den > T::zero()) || !den.is_finite() {
        return Err(Error::DegenerateBasket(format!("{what} denominator is {den}")));
    }
    if !(num > T::zero()) || !num.is_finite() {
        return Err(Error::DegenerateBasket(format!("{what} numerator is {num}")));
    }
    Ok(num / den)
}

fn weighted<T: Real>(p: &[T], q: &[T]) -> T {
    p.iter().zip(q).map(|(&a, &b)| a * b).sum()
}

/// `Σ p_cur q_base / Σ p_base q_base`.
pub fn laspeyres<T: Real>(p_cur: &[T], p_base: &[T], q_base: &[T]) -> Result<T> {
    ratio(weighted(p_cur, q_base), weighted(p_base, q_base), "Laspeyres")
}

/// `Σ p_cur q_cur / Σ p_base q_cur`.
pub fn paasche<T: Real>(p_cur: &[T], p_base: &[T], q_cur: &[T]) -> Result<T> {
    ratio(weighted(p_cur, q_cur), weighted(p_base, q_cur), "Paasche")
}

/// `√(L·P)`.
pub fn fisher<T: Real>(p_cur: &[T], p_base: &[T], q_cur: &[T], q_base: &[T]) -> Result<T> {
    Ok((laspeyres(p_cur, p_base, q_base)? * paasche(p_cur, p_base, q_cur)?).sqrt())
}

/// `exp(mean log(p_cur / p_base))`.
pub fn jevons<T: Real>(p_cur: &[T], p_base: &[T]) -> Result<T> {
    if p_cur.is_empty() || p_cur.len() != p_base.len() {
        return Err(Error::DegenerateBasket("Jevons needs matched non-empty price lists".into()));
    }
    let mut s = T::zero();
    for (&a, &b) in p_cur.iter().zip(p_base) {
        if !(a > T::zero() && b > T::zero()) {
            return Err(Error::Validation(format!("Jevons relative {a}/{b} is not positive")));
        }
        s += (a / b).ln();
    }
    Ok((s / T::of(p_cur.len() as f64)).exp())
}

fn apply<T: Real>(f: Formula, p_cur: &[T], p_base: &[T], q_cur: &[T], q_base: &[T]) -> Result<T> {
    match f {
        Formula::Laspeyres => laspeyres(p_cur, p_base, q_base),
        Formula::Paasche => paasche(p_cur, p_base, q_cur),
        Formula::Fisher => fisher(p_cur, p_base, q_cur, q_base),
    }
}

fn check_period<T: Real>(panel: &TransactionPanel<T>, t: usize) -> Result<()> {
    if t >= panel.n_periods() {
        return Err(Error::OutOfRange { t, lag: 0 });
    }
    Ok(())
}

/// Products transacting at both periods with positive prices in each. Cells
/// with a zero price are left out, as in training.
fn priced_overlap<T: Real>(panel: &TransactionPanel<T>, current: usize, base: usize) -> Vec<usize> {
    let positive = |i: usize, t: usize| panel.price(i, t).is_some_and(|p| p > T::zero());
    panel
        .transacting(current)
        .intersection(&panel.transacting(base))
        .copied()
        .filter(|&i| positive(i, current) && positive(i, base))
        .collect()
}

/// Matched index of `current` relative to `base` over `C_current ∩ C_base`.
/// The periods may come in either order.
pub fn matched_between<T: Real>(panel: &TransactionPanel<T>, current: usize, base: usize, formula: Formula) -> Result<T> {
    check_period(panel, current)?;
    check_period(panel, base)?;
    if current == base {
        return Ok(T::one());
    }
    let m = priced_overlap(panel, current, base);
    if m.is_empty() {
        return Err(Error::NoOverlap { current, base });
    }
    let col = |f: &dyn Fn(usize) -> T| m.iter().map(|&i| f(i)).collect::<Vec<T>>();
    apply(
        formula,
        &col(&|i| panel.price(i, current).unwrap()),
        &col(&|i| panel.price(i, base).unwrap()),
        &col(&|i| panel.quantity(i, current)),
        &col(&|i| panel.quantity(i, base)),
    )
}

/// Matched index for `t` against `t − ℓ`; `ℓ = 0` gives 1.
pub fn bilateral_matched<T: Real>(panel: &TransactionPanel<T>, t: usize, lag: usize, formula: Formula) -> Result<T> {
    let base = t.checked_sub(lag).ok_or(Error::OutOfRange { t, lag })?;
    matched_between(panel, t, base, formula)
}

/// Jevons index over products with positive prices in both periods.
pub fn jevons_between<T: Real>(panel: &TransactionPanel<T>, current: usize, base: usize) -> Result<T> {
    check_period(panel, current)?;
    check_period(panel, base)?;
    if current == base {
        return Ok(T::one());
    }
    let m = priced_overlap(panel, current, base);
    if m.is_empty() {
        return Err(Error::NoOverlap { current, base });
    }
    let pc: Vec<T> = m.iter().map(|&i| panel.price(i, current).unwrap()).collect();
    let pb: Vec<T> = m.iter().map(|&i| panel.price(i, base).unwrap()).collect();
    jevons(&pc, &pb)
}

pub fn bilateral_jevons<T: Real>(panel: &TransactionPanel<T>, t: usize, lag: usize) -> Result<T> {
    let base = t.checked_sub(lag).ok_or(Error::OutOfRange { t, lag })?;
    jevons_between(panel, t, base)
}

/// Hedonic prices `H_it` for the products of a panel (same order), any of
/// which may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct HedonicSurface<T> {
    products: Vec<ProductId>,
    periods: usize,
    values: Vec<Option<T>>,
}

impl<T: Real> HedonicSurface<T> {
    /// Evaluates `f(i, t)` for every product index of `panel` and every period.
    pub fn from_fn(panel: &TransactionPanel<T>, mut f: impl FnMut(usize, usize) -> Option<T>) -> Self {
        let periods = panel.n_periods();
        let mut values = Vec::with_capacity(panel.n_products() * periods);
        for i in 0..panel.n_products() {
            for t in 0..periods {
                values.push(f(i, t));
            }
        }
        Self {
            products: panel.products().to_vec(),
            periods,
            values,
        }
    }

    /// From per-product price paths keyed by id; products not in the map get
    /// no hedonic price.
    pub fn from_map(panel: &TransactionPanel<T>, paths: &BTreeMap<ProductId, Vec<T>>) -> Result<Self> {
        for (id, path) in paths {
            if path.len() != panel.n_periods() {
                return Err(Error::Dimension(format!(
                    "hedonic path for {id} has {} periods, panel has {}",
                    path.len(),
                    panel.n_periods()
                )));
            }
        }
        Ok(Self::from_fn(panel, |i, t| paths.get(panel.product_id(i)).map(|p| p[t])))
    }

    pub fn get(&self, i: usize, t: usize) -> Option<T> {
        self.values.get(i * self.periods + t).copied().flatten()
    }

    pub fn periods(&self) -> usize {
        self.periods
    }

    pub fn products(&self) -> &[ProductId] {
        &self.products
    }

    /// Multiplies period `t` by `c`.
    pub fn scale_period(&mut self, t: usize, c: T) {
        for i in 0..self.products.len() {
            if let Some(v) = self.values[i * self.periods + t].as_mut() {
                *v *= c;
            }
        }
    }
}

fn check_surface<T: Real>(surface: &HedonicSurface<T>, panel: &TransactionPanel<T>) -> Result<()> {
    if surface.periods != panel.n_periods() || surface.products != panel.products() {
        return Err(Error::Alignment("hedonic surface does not belong to this panel".into()));
    }
    Ok(())
}

/// Hedonic index of `current` relative to `base`. L-type sums run over
/// `C_base` with base quantities and P-type sums over `C_current` with current
/// quantities, so entrants and exits enter through their hedonic prices.
pub fn hedonic_between<T: Real>(
    surface: &HedonicSurface<T>,
    panel: &TransactionPanel<T>,
    current: usize,
    base: usize,
    formula: Formula,
) -> Result<T> {
    check_surface(surface, panel)?;
    check_period(panel, current)?;
    check_period(panel, base)?;
    if current == base {
        return Ok(T::one());
    }
    let basket = |weight_period: usize| -> Result<(Vec<T>, Vec<T>, Vec<T>)> {
        let members = panel.transacting(weight_period);
        if members.is_empty() {
            return Err(Error::DegenerateBasket(format!("no transacting products in period {weight_period}")));
        }
        let mut missing = Vec::new();
        let (mut hc, mut hb, mut q) = (Vec::new(), Vec::new(), Vec::new());
        for &i in &members {
            match (surface.get(i, current), surface.get(i, base)) {
                (Some(a), Some(b)) => {
                    if !(a > T::zero() && b > T::zero()) {
                        return Err(Error::Validation(format!(
                            "nonpositive hedonic price for {}",
                            panel.product_id(i)
                        )));
                    }
                    hc.push(a);
                    hb.push(b);
                    q.push(panel.quantity(i, weight_period));
                }
                _ => missing.push(panel.product_id(i).to_string()),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Coverage { current, base, missing });
        }
        Ok((hc, hb, q))
    };
    let l = || -> Result<T> {
        let (hc, hb, q) = basket(base)?;
        laspeyres(&hc, &hb, &q)
    };
    let p = || -> Result<T> {
        let (hc, hb, q) = basket(current)?;
        paasche(&hc, &hb, &q)
    };
    match formula {
        Formula::Laspeyres => l(),
        Formula::Paasche => p(),
        Formula::Fisher => Ok((l()? * p()?).sqrt()),
    }
}

pub fn bilateral_hedonic<T: Real>(
    surface: &HedonicSurface<T>,
    panel: &TransactionPanel<T>,
    t: usize,
    lag: usize,
    formula: Formula,
) -> Result<T> {
    let base = t.checked_sub(lag).ok_or(Error::OutOfRange { t, lag })?;
    hedonic_between(surface, panel, t, base, formula)
}

/// Index levels on the grid `base + kℓ`, with level 1 at `base`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSeries<T = f64> {
    pub kind: IndexKind,
    pub lag: usize,
    pub base: usize,
    pub levels: BTreeMap<usize, T>,
}

/// Compounds `bilateral(t, ℓ)` over `t = t₀ + ℓ, …, t₀ + mℓ`.
pub fn chain<T: Real>(
    kind: IndexKind,
    bilateral: impl Fn(usize, usize) -> Result<T>,
    base: usize,
    lag: usize,
    steps: usize,
) -> Result<IndexSeries<T>> {
    if lag == 0 {
        return Err(Error::Validation("chaining needs a positive lag".into()));
    }
    let mut levels = BTreeMap::new();
    let mut level = T::one();
    levels.insert(base, level);
    for k in 1..=steps {
        let t = base + k * lag;
        let r = bilateral(t, lag).map_err(|e| Error::ChainStep {
            step: k,
            source: Box::new(e),
        })?;
        level *= r;
        levels.insert(t, level);
    }
    Ok(IndexSeries {
        kind,
        lag,
        base,
        levels,
    })
}

/// `√(a·b)` on the periods both series report.
pub fn geometric_combine<T: Real>(a: &IndexSeries<T>, b: &IndexSeries<T>) -> Result<IndexSeries<T>> {
    let levels: BTreeMap<usize, T> = a
        .levels
        .iter()
        .filter_map(|(t, &x)| b.levels.get(t).map(|&y| (*t, (x * y).sqrt())))
        .collect();
    let Some(&base) = levels.keys().next() else {
        return Err(Error::Alignment("series share no periods".into()));
    };
    Ok(IndexSeries {
        kind: IndexKind::Combined,
        lag: a.lag.max(b.lag),
        base,
        levels,
    })
}

/// Average annual rate in percent between two months of a series.
pub fn annualized_rate<T: Real>(series: &IndexSeries<T>, from: usize, to: usize) -> Result<f64> {
    if to <= from {
        return Err(Error::Validation(format!("annualizing needs to > from, got {from}..{to}")));
    }
    let get = |t: usize| {
        series
            .levels
            .get(&t)
            .map(|v| v.as_f64())
            .ok_or_else(|| Error::Alignment(format!("series has no level at period {t}")))
    };
    let (l0, l1) = (get(from)?, get(to)?);
    Ok(100.0 * ((l1 / l0).powf(12.0 / (to - from) as f64) - 1.0))
}

/// Number of whole chain steps of length `lag` from `base` within the panel.
pub fn max_steps(periods: usize, base: usize, lag: usize) -> usize {
    if lag == 0 || base >= periods {
        0
    } else {
        (periods - 1 - base) / lag
    }
}

/// Chained series of `kind` at `lag` from `base` to the end of the panel.
/// Hedonic kinds need a surface; `Combined` is the geometric mean of the
/// monthly-chained and `lag`-chained hedonic Fisher series.
pub fn chained_series<T: Real>(
    panel: &TransactionPanel<T>,
    surface: Option<&HedonicSurface<T>>,
    kind: IndexKind,
    lag: usize,
    base: usize,
) -> Result<IndexSeries<T>> {
    let steps = max_steps(panel.n_periods(), base, lag);
    let need_surface = || {
        surface.ok_or_else(|| Error::Validation(format!("{} index needs hedonic prices", kind.as_str())))
    };
    match kind {
        IndexKind::Jevons => chain(kind, |t, l| bilateral_jevons(panel, t, l), base, lag, steps),
        IndexKind::Combined => {
            let monthly = chained_series(panel, surface, IndexKind::HedonicF, 1, base)?;
            let yearly = chained_series(panel, surface, IndexKind::HedonicF, lag, base)?;
            geometric_combine(&monthly, &yearly)
        }
        k if k.is_hedonic() => {
            let s = need_surface()?;
            let f = k.formula().unwrap();
            chain(kind, |t, l| bilateral_hedonic(s, panel, t, l, f), base, lag, steps)
        }
        k => {
            let f = k.formula().unwrap();
            chain(kind, |t, l| bilateral_matched(panel, t, l, f), base, lag, steps)
        }
    }
}

/// Products in the basket of an L- or P-type hedonic comparison that lack a
/// hedonic price; empty when coverage is complete.
pub fn coverage_gaps<T: Real>(surface: &HedonicSurface<T>, panel: &TransactionPanel<T>, current: usize, base: usize) -> Vec<ProductId> {
    let members: BTreeSet<usize> = panel.transacting(current).union(&panel.transacting(base)).copied().collect();
    members
        .into_iter()
        .filter(|&i| surface.get(i, current).is_none() || surface.get(i, base).is_none())
        .map(|i| panel.product_id(i).to_string())
        .collect()
}
