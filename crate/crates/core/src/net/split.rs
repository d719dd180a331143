use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{ProductId, TransactionPanel};
use crate::scalar::Real;

/// Disjoint train/validation/test product sets, each sorted by id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DataSplit {
    pub train: Vec<ProductId>,
    pub validation: Vec<ProductId>,
    pub test: Vec<ProductId>,
    /// strata too small to split were pooled and assigned globally
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl DataSplit {
    pub fn len(&self) -> usize {
        self.train.len() + self.validation.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains_train(&self, id: &str) -> bool {
        self.train.binary_search_by(|p| p.as_str().cmp(id)).is_ok()
    }

    /// Short fingerprint of the assignment, recorded alongside value embeddings.
    pub fn identity(&self) -> String {
        // FNV-1a over the three id lists with separators
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (tag, ids) in [(b'T', &self.train), (b'V', &self.validation), (b'H', &self.test)] {
            for byte in std::iter::once(tag).chain(ids.iter().flat_map(|id| id.bytes().chain([0u8]))) {
                h ^= byte as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        }
        format!("{h:016x}")
    }
}

/// Largest-remainder allocation of `n` items to `fractions`; ties go to the
/// earlier split.
fn allocate(n: usize, fractions: &[f64; 3]) -> [usize; 3] {
    let exact: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts = [0usize; 3];
    for k in 0..3 {
        counts[k] = exact[k].floor() as usize;
    }
    let mut order: Vec<usize> = (0..3).filter(|&k| fractions[k] > 0.0).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - counts[a] as f64;
        let rb = exact[b] - counts[b] as f64;
        rb.partial_cmp(&ra).unwrap().then(a.cmp(&b))
    });
    let mut left = n - counts.iter().sum::<usize>();
    for &k in order.iter().cycle() {
        if left == 0 {
            break;
        }
        counts[k] += 1;
        left -= 1;
    }
    counts
}

/// Assigns every product that ever transacts to a split, stratified by the
/// month of its first transaction and shuffled with `seed`.
pub fn split_stratified<T: Real>(panel: &TransactionPanel<T>, fractions: (f64, f64, f64), seed: u64) -> Result<DataSplit> {
    let f = [fractions.0, fractions.1, fractions.2];
    if f.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) || (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Validation(format!(
            "split fractions must be non-negative and sum to 1, got {fractions:?}"
        )));
    }
    let active = f.iter().filter(|&&x| x > 0.0).count();

    let mut strata: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..panel.n_products() {
        if let Some(t) = panel.first_transaction(i) {
            strata.entry(t).or_default().push(i);
        }
    }

    let mut parts: [Vec<ProductId>; 3] = Default::default();
    let mut pooled = Vec::new();
    let mut warnings = Vec::new();
    let assign = |members: &mut Vec<usize>, key: u64, parts: &mut [Vec<ProductId>; 3]| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ key.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        members.shuffle(&mut rng);
        let counts = allocate(members.len(), &f);
        let mut it = members.iter();
        for (k, &c) in counts.iter().enumerate() {
            parts[k].extend(it.by_ref().take(c).map(|&i| panel.product_id(i).to_string()));
        }
    };
    for (&month, members) in strata.iter_mut() {
        if members.len() < active {
            warnings.push(format!(
                "month {} has {} products for {active} splits; pooled into global assignment",
                panel.period_label(month),
                members.len()
            ));
            pooled.extend_from_slice(members);
        } else {
            assign(members, month as u64, &mut parts);
        }
    }
    if !pooled.is_empty() {
        assign(&mut pooled, u64::MAX, &mut parts);
    }
    for p in &mut parts {
        p.sort();
    }
    let [train, validation, test] = parts;
    Ok(DataSplit {
        train,
        validation,
        test,
        warnings,
    })
}
