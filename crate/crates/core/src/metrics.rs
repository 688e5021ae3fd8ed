//! TMMD and its reference-free variants.
//!
//! * `tmmd`: unbiased MMD² between generated and reference embeddings.
//! * `i_tmmd`: MMD² between two disjoint halves of the generated set.
//! * `ci_tmmd`: `i_tmmd` within each class, averaged over classes.
//! * `d_tmmd`: per class, the within-class split MMD² as a fraction of the
//!   class's total divergence row, averaged over classes. Near 0 for
//!   diverse, well-separated classes; 1/C when classes are indistinguishable.
//!
//! Within a class (or set), samples are ordered by id before splitting, so
//! every result depends on ids and the split strategy, never on row order.

use ndarray::{Array2, ArrayView2};
use rayon::prelude::*;
use serde::Serialize;

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::kernel::{median_heuristic_sigma, mmd2_unbiased, Bandwidth, MmdConfig};
use crate::meta::ClassPartition;
use crate::report::{json_number, MetricReport, SplitEcho};
use crate::rng;

/// Smallest set that can be halved into two sets of at least two samples.
pub const MIN_SPLIT_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitStrategy {
    /// Sort by sample id; even ranks form the first half, odd ranks the second.
    Interleave,
    /// `repeats` independent shuffles of the id-sorted samples, repeat `r`
    /// drawn from the counter stream `(seed, r)`.
    SeededRandom { seed: u64, repeats: usize },
}

impl Default for SplitStrategy {
    fn default() -> Self {
        SplitStrategy::SeededRandom { seed: 0, repeats: 5 }
    }
}

impl SplitStrategy {
    pub fn repeats(&self) -> usize {
        match self {
            SplitStrategy::Interleave => 1,
            SplitStrategy::SeededRandom { repeats, .. } => *repeats,
        }
    }

    pub fn echo(&self) -> SplitEcho {
        match *self {
            SplitStrategy::Interleave => SplitEcho {
                mode: "interleave".into(),
                seed: None,
                repeats: 1,
            },
            SplitStrategy::SeededRandom { seed, repeats } => SplitEcho {
                mode: "random".into(),
                seed: Some(seed),
                repeats,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        if self.repeats() == 0 {
            return Err(Error::InvalidArgument("split repeats must be at least 1".into()));
        }
        Ok(())
    }
}

/// Two disjoint halves, as row indices. The first half holds the extra
/// sample when the count is odd.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HalfSplit {
    pub first: Vec<usize>,
    pub second: Vec<usize>,
}

fn sorted_by_id(ids: &[String], rows: &[usize]) -> Vec<usize> {
    let mut rows = rows.to_vec();
    rows.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    rows
}

fn split_rows(ids: &[String], rows: &[usize], strategy: &SplitStrategy) -> Result<Vec<HalfSplit>> {
    strategy.validate()?;
    if rows.len() < MIN_SPLIT_SIZE {
        return Err(Error::TooFewSamples {
            needed: MIN_SPLIT_SIZE,
            found: rows.len(),
        });
    }
    let ordered = sorted_by_id(ids, rows);
    Ok(match *strategy {
        SplitStrategy::Interleave => {
            let first = ordered.iter().step_by(2).copied().collect();
            let second = ordered.iter().skip(1).step_by(2).copied().collect();
            vec![HalfSplit { first, second }]
        }
        SplitStrategy::SeededRandom { seed, repeats } => (0..repeats)
            .map(|r| {
                let mut order = ordered.clone();
                rng::shuffle(&mut order, &mut rng::substream(seed, rng::domain::HALF_SPLIT, r as u64));
                let second = order.split_off(order.len().div_ceil(2));
                HalfSplit { first: order, second }
            })
            .collect(),
    })
}

/// Splits a generated set into halves.
pub fn split_halves(g: &EmbeddingSet, strategy: &SplitStrategy) -> Result<Vec<HalfSplit>> {
    let rows: Vec<usize> = (0..g.len()).collect();
    split_rows(g.ids(), &rows, strategy)
}

fn select(x: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    x.select(ndarray::Axis(0), rows)
}

/// Mean split MMD² over the strategy's repeats, plus the individual values.
fn split_mmd(
    x: &Array2<f64>,
    ids: &[String],
    rows: &[usize],
    sigma: f64,
    strategy: &SplitStrategy,
) -> Result<(f64, Vec<f64>)> {
    let cfg = MmdConfig::fixed(sigma)?;
    let values = split_rows(ids, rows, strategy)?
        .iter()
        .map(|h| mmd2_unbiased(select(x, &h.first).view(), select(x, &h.second).view(), &cfg).map(|v| v.value))
        .collect::<Result<Vec<f64>>>()?;
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok((mean, values))
}

fn sigma_for(x: ArrayView2<f64>, bandwidth: Bandwidth) -> Result<f64> {
    match bandwidth {
        Bandwidth::Fixed(s) => MmdConfig::fixed(s).map(|_| s),
        Bandwidth::MedianHeuristic => median_heuristic_sigma(x),
    }
}

fn mmd_report(label: &str, g: &EmbeddingSet, r: &EmbeddingSet, cfg: &MmdConfig) -> Result<MetricReport> {
    let v = mmd2_unbiased(g.to_f64().view(), r.to_f64().view(), cfg)?;
    Ok(MetricReport::new(label, v.value)
        .with_sigma(v.sigma_used, cfg.bandwidth)
        .with_extra("m", v.m)
        .with_extra("n", v.n)
        .with_extra("kernel", MmdConfig::KERNEL)
        .with_extra("estimator", MmdConfig::ESTIMATOR))
}

/// MMD² between generated embeddings `g` and reference embeddings `r`.
/// Lower is better.
pub fn tmmd(g: &EmbeddingSet, r: &EmbeddingSet, cfg: &MmdConfig) -> Result<MetricReport> {
    mmd_report("tmmd", g, r, cfg)
}

/// Same estimator as [`tmmd`], reported under the generic label used when
/// the embeddings come from an arbitrary encoder.
pub fn embedding_mmd(g: &EmbeddingSet, r: &EmbeddingSet, cfg: &MmdConfig) -> Result<MetricReport> {
    mmd_report("embedding-mmd", g, r, cfg)
}

/// Internal consistency of a generated set. With the median policy the
/// bandwidth is chosen once on the whole set and shared by every repeat.
pub fn i_tmmd(g: &EmbeddingSet, cfg: &MmdConfig, strategy: &SplitStrategy) -> Result<MetricReport> {
    if g.len() < MIN_SPLIT_SIZE {
        return Err(Error::TooFewSamples {
            needed: MIN_SPLIT_SIZE,
            found: g.len(),
        });
    }
    let x = g.to_f64();
    let sigma = sigma_for(x.view(), cfg.bandwidth)?;
    let rows: Vec<usize> = (0..g.len()).collect();
    let (value, per_split) = split_mmd(&x, g.ids(), &rows, sigma, strategy)?;
    let mut report = MetricReport::new("itmmd", value)
        .with_sigma(sigma, cfg.bandwidth)
        .with_extra("split_values", per_split);
    report.split = Some(strategy.echo());
    Ok(report)
}

struct ClassData {
    x: Array2<f64>,
    sigma: f64,
}

/// Shared bandwidth over every labeled row, so per-class values are comparable.
fn class_data(g: &EmbeddingSet, p: &ClassPartition, cfg: &MmdConfig) -> Result<ClassData> {
    let x = g.to_f64();
    let labeled = p.labeled_rows();
    if let Some(&bad) = labeled.iter().find(|&&r| r >= g.len()) {
        return Err(Error::InvalidArgument(format!(
            "class partition refers to row {bad} of a {}-row set",
            g.len()
        )));
    }
    let sigma = sigma_for(select(&x, &labeled).view(), cfg.bandwidth)?;
    Ok(ClassData { x, sigma })
}

/// Class-aware internal consistency: mean of per-class split MMD². Classes
/// with fewer than four samples are skipped and listed in the report.
pub fn ci_tmmd(
    g: &EmbeddingSet,
    p: &ClassPartition,
    cfg: &MmdConfig,
    strategy: &SplitStrategy,
) -> Result<MetricReport> {
    strategy.validate()?;
    let data = class_data(g, p, cfg)?;
    let (included, skipped): (Vec<_>, Vec<_>) = p.iter().partition(|(_, rows)| rows.len() >= MIN_SPLIT_SIZE);
    if included.is_empty() {
        return Err(Error::NoEligibleClass(MIN_SPLIT_SIZE));
    }
    let per_class = included
        .par_iter()
        .map(|(label, rows)| {
            split_mmd(&data.x, g.ids(), rows, data.sigma, strategy).map(|(v, _)| (label.to_string(), v))
        })
        .collect::<Result<Vec<_>>>()?;
    let value = per_class.iter().map(|(_, v)| v).sum::<f64>() / per_class.len() as f64;

    let mut report = MetricReport::new("citmmd", value).with_sigma(data.sigma, cfg.bandwidth);
    report.split = Some(strategy.echo());
    report.classes = per_class.iter().map(|(l, _)| l.clone()).collect();
    report.per_class = per_class.into_iter().collect();
    report.skipped = skipped.iter().map(|(l, _)| l.to_string()).collect();
    Ok(report)
}

/// C×C matrix of class divergences: split MMD² on the diagonal, full-class
/// MMD² off it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergenceMatrix {
    pub classes: Vec<String>,
    pub raw: Vec<Vec<f64>>,
    /// `raw` with negative entries set to zero.
    pub clamped: Vec<Vec<f64>>,
    pub row_sums: Vec<f64>,
    pub sigma: f64,
}

impl DivergenceMatrix {
    pub fn from_raw(classes: Vec<String>, raw: Vec<Vec<f64>>, sigma: f64) -> Result<Self> {
        let c = classes.len();
        if raw.len() != c || raw.iter().any(|r| r.len() != c) {
            return Err(Error::InvalidArgument(format!("divergence matrix must be {c}×{c}")));
        }
        let clamped: Vec<Vec<f64>> = raw
            .iter()
            .map(|row| row.iter().map(|&v| v.max(0.0)).collect())
            .collect();
        let row_sums = clamped.iter().map(|row| row.iter().sum()).collect();
        Ok(Self {
            classes,
            raw,
            clamped,
            row_sums,
            sigma,
        })
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Per-class ratios `clamped[c][c] / row_sums[c]`.
    ///
    /// A matrix that is zero everywhere after clamping (every class
    /// collapsed onto the same distribution) is the limit of the all-equal
    /// case and yields 1/C per class. A zero row in an otherwise non-zero
    /// matrix has no defined ratio.
    pub fn diversity_ratios(&self) -> Result<Vec<f64>> {
        let c = self.len();
        if self.clamped.iter().flatten().all(|&v| v == 0.0) {
            return Ok(vec![1.0 / c as f64; c]);
        }
        self.row_sums
            .iter()
            .enumerate()
            .map(|(i, &sum)| {
                if sum > 0.0 {
                    Ok(self.clamped[i][i] / sum)
                } else {
                    Err(Error::IndeterminateDiversity(self.classes[i].clone()))
                }
            })
            .collect()
    }

    /// Mean of the per-class ratios.
    pub fn d_tmmd(&self) -> Result<f64> {
        let ratios = self.diversity_ratios()?;
        Ok(ratios.iter().sum::<f64>() / ratios.len() as f64)
    }
}

pub fn divergence_matrix(
    g: &EmbeddingSet,
    p: &ClassPartition,
    cfg: &MmdConfig,
    strategy: &SplitStrategy,
) -> Result<DivergenceMatrix> {
    strategy.validate()?;
    if p.class_count() == 0 {
        return Err(Error::NoEligibleClass(MIN_SPLIT_SIZE));
    }
    for (label, rows) in p.iter() {
        if rows.len() < MIN_SPLIT_SIZE {
            return Err(Error::UndersizedClass {
                class: label.to_owned(),
                size: rows.len(),
                needed: MIN_SPLIT_SIZE,
            });
        }
    }
    let data = class_data(g, p, cfg)?;
    let fixed = MmdConfig::fixed(data.sigma)?;
    let classes: Vec<(&str, Vec<usize>)> = p.iter().map(|(l, rows)| (l, sorted_by_id(g.ids(), rows))).collect();
    let c = classes.len();

    let cells: Vec<(usize, usize)> = (0..c).flat_map(|i| (i..c).map(move |j| (i, j))).collect();
    let values = cells
        .par_iter()
        .map(|&(i, j)| {
            if i == j {
                split_mmd(&data.x, g.ids(), &classes[i].1, data.sigma, strategy).map(|(v, _)| v)
            } else {
                let a = select(&data.x, &classes[i].1);
                let b = select(&data.x, &classes[j].1);
                mmd2_unbiased(a.view(), b.view(), &fixed).map(|v| v.value)
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut raw = vec![vec![0.0; c]; c];
    for (&(i, j), v) in cells.iter().zip(values) {
        raw[i][j] = v;
        raw[j][i] = v;
    }
    DivergenceMatrix::from_raw(classes.iter().map(|(l, _)| l.to_string()).collect(), raw, data.sigma)
}

/// Diversity score; the divergence matrix is attached to the report.
pub fn d_tmmd(g: &EmbeddingSet, p: &ClassPartition, cfg: &MmdConfig, strategy: &SplitStrategy) -> Result<MetricReport> {
    let dm = divergence_matrix(g, p, cfg, strategy)?;
    let ratios = dm.diversity_ratios()?;
    let value = ratios.iter().sum::<f64>() / ratios.len() as f64;
    let matrix = |m: &Vec<Vec<f64>>| -> Vec<Vec<serde_json::Value>> {
        m.iter().map(|r| r.iter().map(|&v| json_number(v)).collect()).collect()
    };
    let mut report = MetricReport::new("dtmmd", value)
        .with_sigma(dm.sigma, cfg.bandwidth)
        .with_extra(
            "divergence",
            serde_json::json!({
                "raw": matrix(&dm.raw),
                "clamped": matrix(&dm.clamped),
                "row_sums": dm.row_sums,
            }),
        );
    report.split = Some(strategy.echo());
    report.per_class = dm.classes.iter().cloned().zip(ratios).collect();
    report.classes = dm.classes;
    Ok(report)
}
