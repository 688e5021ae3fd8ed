//! k-nearest-neighbour classification probe.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};

fn sq_dist(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum()
}

/// Majority label among the k nearest training rows (Euclidean; equal
/// distances ordered by row). Vote ties go to the label with the smaller
/// mean distance, then to the lexicographically smaller label.
pub fn classify<'a>(train: &EmbeddingSet, labels: &'a [String], x: &[f32], k: usize) -> &'a str {
    let mut dists: Vec<(f64, usize)> = (0..train.len()).map(|i| (sq_dist(train.row(i), x), i)).collect();
    let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < dists.len() {
        dists.select_nth_unstable_by(k - 1, cmp);
        dists.truncate(k);
    }
    let mut votes: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for &(d, i) in &dists {
        let e = votes.entry(labels[i].as_str()).or_default();
        e.0 += 1;
        e.1 += d.sqrt();
    }
    // BTreeMap iterates labels ascending, so the first best entry wins ties.
    let mut best: Option<(&str, usize, f64)> = None;
    for (label, (count, total)) in votes {
        let mean = total / count as f64;
        let better = match best {
            None => true,
            Some((_, c, m)) => count > c || (count == c && mean < m),
        };
        if better {
            best = Some((label, count, mean));
        }
    }
    best.expect("k >= 1").0
}

/// Accuracy of a k-NN classifier fit on `train` and evaluated on `test`.
pub fn knn_probe(
    train: &EmbeddingSet,
    train_labels: &[String],
    test: &EmbeddingSet,
    test_labels: &[String],
    k: usize,
) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, found: 0 });
    }
    if k == 0 || k.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!("k must be odd and positive, got {k}")));
    }
    if k > train.len() {
        return Err(Error::KTooLarge { k, size: train.len() });
    }
    if train.dim() != test.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            found: test.dim(),
        });
    }
    if train_labels.len() != train.len() || test_labels.len() != test.len() {
        return Err(Error::InvalidArgument("one label per row is required".into()));
    }
    if test.is_empty() {
        return Ok(0.0);
    }
    let correct = (0..test.len())
        .into_par_iter()
        .filter(|&i| classify(train, train_labels, test.row(i), k) == test_labels[i])
        .count();
    Ok(correct as f64 / test.len() as f64)
}
