//! Cross-modal retrieval accuracy at k.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievalResult {
    /// Fraction of queries whose true pair ranks within the first k.
    pub accuracy_at: BTreeMap<usize, f64>,
    /// 1-based rank of the true pair, per query id.
    pub ranks: BTreeMap<String, usize>,
}

impl RetrievalResult {
    pub fn top1(&self) -> Option<f64> {
        self.accuracy_at.get(&1).copied()
    }

    pub fn top5(&self) -> Option<f64> {
        self.accuracy_at.get(&5).copied()
    }
}

fn norm(v: &[f32]) -> f64 {
    v.iter().map(|&x| (x as f64) * (x as f64)).sum::<f64>().sqrt()
}

/// Cosine similarity; 0 when either vector is zero.
pub fn cosine(a: &[f32], b: &[f32]) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
    dot / (na * nb)
}

/// Ranks the gallery by descending cosine similarity to each query (ties by
/// ascending gallery id) and scores whether the paired item is in the top k.
pub fn retrieval_topk(
    queries: &EmbeddingSet,
    gallery: &EmbeddingSet,
    pairing: &HashMap<String, String>,
    ks: &[usize],
) -> Result<RetrievalResult> {
    if queries.dim() != gallery.dim() {
        return Err(Error::DimensionMismatch {
            expected: queries.dim(),
            found: gallery.dim(),
        });
    }
    for &k in ks {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        if k > gallery.len() {
            return Err(Error::KTooLarge { k, size: gallery.len() });
        }
    }
    let targets = queries
        .ids()
        .iter()
        .map(|q| {
            let g = pairing.get(q).ok_or_else(|| Error::UnmappedQuery(q.clone()))?;
            gallery.position(g).ok_or_else(|| Error::MissingSample(g.clone()))
        })
        .collect::<Result<Vec<usize>>>()?;

    let gids = gallery.ids();
    let ranks: Vec<usize> = (0..queries.len())
        .into_par_iter()
        .map(|qi| {
            let q = queries.row(qi);
            let t = targets[qi];
            let target_sim = cosine(q, gallery.row(t));
            let ahead = (0..gallery.len())
                .filter(|&gi| gi != t)
                .filter(|&gi| {
                    let s = cosine(q, gallery.row(gi));
                    s > target_sim || (s == target_sim && gids[gi] < gids[t])
                })
                .count();
            ahead + 1
        })
        .collect();

    let n = queries.len().max(1) as f64;
    let accuracy_at = ks
        .iter()
        .map(|&k| (k, ranks.iter().filter(|&&r| r <= k).count() as f64 / n))
        .collect();
    let ranks = queries.ids().iter().cloned().zip(ranks).collect();
    Ok(RetrievalResult { accuracy_at, ranks })
}
