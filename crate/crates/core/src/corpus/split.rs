use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub train: Vec<T>,
    pub dev: Vec<T>,
    pub test: Vec<T>,
}

fn allocation(n: usize, ratios: (f64, f64, f64)) -> Result<(usize, usize)> {
    let (train, dev, test) = ratios;
    if !(train > 0.0 && dev > 0.0 && test > 0.0) {
        return Err(Error::Config(format!("split ratios must be positive, got {ratios:?}")));
    }
    if ((train + dev + test) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("split ratios must sum to 1, got {ratios:?}")));
    }
    // The small epsilon keeps e.g. 10 * 0.2 from flooring to 1.
    let floor = |r: f64| (n as f64 * r + 1e-9).floor() as usize;
    Ok((floor(dev), floor(test)))
}

/// Deterministic shuffle-and-cut into train/dev/test. Dev and test get the
/// floor of their share; the remainder goes to train.
pub fn split_dataset<T: Clone>(items: &[T], ratios: (f64, f64, f64), seed: u64) -> Result<Split<T>> {
    let (n_dev, n_test) = allocation(items.len(), ratios)?;
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_train = items.len() - n_dev - n_test;
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    Ok(Split {
        train: pick(&order[..n_train]),
        dev: pick(&order[n_train..n_train + n_dev]),
        test: pick(&order[n_train + n_dev..]),
    })
}

/// Like [`split_dataset`] but keeps every group (e.g. all paragraphs of one
/// paper) inside a single part. Ratios apply to the number of groups.
pub fn split_by_group<T: Clone, K: Ord + Clone>(
    items: &[T],
    key: impl Fn(&T) -> K,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<Split<T>> {
    let mut groups: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        groups.entry(key(item)).or_default().push(i);
    }
    let keys: Vec<K> = groups.keys().cloned().collect();
    let parts = split_dataset(&keys, ratios, seed)?;
    let gather = |ks: &[K]| {
        ks.iter()
            .flat_map(|k| groups[k].iter().map(|&i| items[i].clone()))
            .collect::<Vec<_>>()
    };
    Ok(Split {
        train: gather(&parts.train),
        dev: gather(&parts.dev),
        test: gather(&parts.test),
    })
}
