//! Train/test leakage audit and video-grouped ("no-leak") split generation.
//!
//! Video-derived datasets hold many near-identical consecutive frames. A
//! split that puts frames of one video on both sides leaks test content
//! into training. The audit reports videos spanning both splits, their
//! closest cross-split frame gap, and embedding near-duplicates; the split
//! generator assigns whole videos to one side.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use crate::baseline::retrieval::cosine;
use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};
use crate::meta::{MetaTable, Split};
use crate::report::MetricReport;
use crate::rng;

pub const DEFAULT_TAU: f64 = 0.95;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VideoOverlap {
    pub video_id: String,
    pub train_samples: usize,
    pub test_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearDuplicate {
    pub train_id: String,
    pub test_id: String,
    pub similarity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageReport {
    pub video_overlap: Vec<VideoOverlap>,
    /// Smallest |frame difference| between a train and a test sample, for
    /// every video present in both splits.
    pub min_frame_gap: BTreeMap<String, u64>,
    /// Cross-split pairs with cosine similarity ≥ τ, most similar first.
    pub near_duplicates: Vec<NearDuplicate>,
    /// Fraction of test samples in an overlapping video or a near-duplicate pair.
    pub leakage_rate: f64,
    pub implicated_test_samples: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub tau: Option<f64>,
}

impl LeakageReport {
    pub fn to_report(&self) -> MetricReport {
        let v = serde_json::to_value(self).expect("report serializes");
        let mut r = MetricReport::new("leakage-audit", self.leakage_rate);
        if let serde_json::Value::Object(map) = v {
            r.extra = map;
        }
        r
    }
}

pub fn audit_split(meta: &MetaTable, emb: Option<&EmbeddingSet>, tau: f64) -> Result<LeakageReport> {
    if let Some(row) = meta.rows().iter().find(|r| r.split == Split::Unassigned) {
        return Err(Error::UntaggedSample(row.sample_id.clone()));
    }
    if emb.is_some() && !(tau > 0.0 && tau <= 1.0) {
        return Err(Error::ThresholdOutOfRange(tau));
    }

    let mut video_overlap = Vec::new();
    let mut min_frame_gap = BTreeMap::new();
    let mut implicated: HashSet<&str> = HashSet::new();
    for (video, rows) in meta.videos() {
        let mut train_frames = Vec::new();
        let mut test_frames = Vec::new();
        for &i in &rows {
            let r = &meta.rows()[i];
            match r.split {
                Split::Train => train_frames.push(r.frame_index),
                _ => test_frames.push(r.frame_index),
            }
        }
        if train_frames.is_empty() || test_frames.is_empty() {
            continue;
        }
        video_overlap.push(VideoOverlap {
            video_id: video.to_owned(),
            train_samples: train_frames.len(),
            test_samples: test_frames.len(),
        });
        min_frame_gap.insert(video.to_owned(), closest_gap(&mut train_frames, &mut test_frames));
        implicated.extend(
            rows.iter()
                .map(|&i| &meta.rows()[i])
                .filter(|r| r.split == Split::Test)
                .map(|r| r.sample_id.as_str()),
        );
    }

    let train_ids: Vec<&str> = split_ids(meta, Split::Train);
    let test_ids: Vec<&str> = split_ids(meta, Split::Test);

    let near_duplicates = match emb {
        Some(e) => near_duplicates(e, &train_ids, &test_ids, tau)?,
        None => Vec::new(),
    };
    let mut implicated: BTreeSet<&str> = implicated.into_iter().collect();
    implicated.extend(near_duplicates.iter().map(|d| d.test_id.as_str()));

    let leakage_rate = if test_ids.is_empty() {
        0.0
    } else {
        implicated.len() as f64 / test_ids.len() as f64
    };
    Ok(LeakageReport {
        video_overlap,
        min_frame_gap,
        leakage_rate,
        implicated_test_samples: implicated.len(),
        train_samples: train_ids.len(),
        test_samples: test_ids.len(),
        tau: emb.map(|_| tau),
        near_duplicates,
    })
}

fn split_ids(meta: &MetaTable, split: Split) -> Vec<&str> {
    meta.rows()
        .iter()
        .filter(|r| r.split == split)
        .map(|r| r.sample_id.as_str())
        .collect()
}

/// Smallest |a − b| over a ∈ train, b ∈ test, by merging sorted lists.
fn closest_gap(train: &mut [u64], test: &mut [u64]) -> u64 {
    train.sort_unstable();
    test.sort_unstable();
    let (mut i, mut j) = (0, 0);
    let mut best = u64::MAX;
    while i < train.len() && j < test.len() {
        best = best.min(train[i].abs_diff(test[j]));
        if train[i] < test[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    best
}

fn rows_of(emb: &EmbeddingSet, ids: &[&str]) -> Result<Vec<usize>> {
    ids.iter()
        .map(|id| emb.position(id).ok_or_else(|| Error::MissingSample(id.to_string())))
        .collect()
}

/// Exhaustive cross-split scan, parallel over train rows.
fn near_duplicates(emb: &EmbeddingSet, train: &[&str], test: &[&str], tau: f64) -> Result<Vec<NearDuplicate>> {
    let train_rows = rows_of(emb, train)?;
    let test_rows = rows_of(emb, test)?;
    let mut pairs: Vec<NearDuplicate> = train_rows
        .par_iter()
        .zip(train.par_iter())
        .flat_map_iter(|(&tr, &train_id)| {
            let x = emb.row(tr);
            test_rows.iter().zip(test).filter_map(move |(&te, &test_id)| {
                let s = cosine(x, emb.row(te));
                (s >= tau).then(|| NearDuplicate {
                    train_id: train_id.to_owned(),
                    test_id: test_id.to_owned(),
                    similarity: s,
                })
            })
        })
        .collect();
    pairs.sort_by(|a, b| {
        b.similarity
            .total_cmp(&a.similarity)
            .then_with(|| a.train_id.cmp(&b.train_id))
            .then_with(|| a.test_id.cmp(&b.test_id))
    });
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitAssignment {
    pub assignments: BTreeMap<String, Split>,
    pub seed: u64,
    pub test_fraction_target: f64,
    pub stratify_key: Option<String>,
    pub achieved_test_fraction: f64,
    pub warnings: Vec<String>,
}

impl SplitAssignment {
    /// Copy of `meta` with split tags taken from this assignment.
    pub fn apply(&self, meta: &MetaTable) -> MetaTable {
        meta.with_splits(|id| self.assignments.get(id).copied().unwrap_or_default())
    }

    pub fn to_report(&self) -> MetricReport {
        let (train, test) = split_to_lists(self);
        MetricReport::new("noleak-split", self.achieved_test_fraction)
            .with_extra("seed", self.seed)
            .with_extra("test_fraction_target", self.test_fraction_target)
            .with_extra("stratify_key", &self.stratify_key)
            .with_extra("train_samples", train.len())
            .with_extra("test_samples", test.len())
            .with_extra("warnings", &self.warnings)
    }
}

#[derive(Default, Clone)]
struct Tally {
    train: usize,
    test: usize,
}

impl Tally {
    fn add(&mut self, to_test: bool, n: usize) {
        if to_test {
            self.test += n;
        } else {
            self.train += n;
        }
    }

    /// Test count minus its target share of the samples assigned so far.
    fn deviation_with(&self, to_test: bool, n: usize, target: f64) -> f64 {
        let test = (self.test + if to_test { n } else { 0 }) as f64;
        let assigned = (self.train + self.test + n) as f64;
        test - target * assigned
    }
}

/// Greedy video-level split.
///
/// Videos are visited in an order shuffled by `seed`; each goes to the side
/// that keeps the test fraction (and, when stratifying, the test fraction
/// of each of its classes) closest to `test_fraction` in summed squared
/// deviation. Deviations are sample counts, so a small class early in the
/// pass weighs no more than the whole set. Equal costs go to train. When
/// the remaining videos are only just enough to give each empty side one,
/// they are forced there.
pub fn make_noleak_split(meta: &MetaTable, test_fraction: f64, seed: u64, stratify: bool) -> Result<SplitAssignment> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let videos = meta.videos();
    if videos.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 videos to split, found {}",
            videos.len()
        )));
    }
    let mut order: Vec<(&str, Vec<usize>)> = videos.into_iter().collect();
    rng::shuffle(&mut order, &mut rng::substream(seed, rng::domain::VIDEO_ORDER, 0));

    let mut overall = Tally::default();
    let mut per_class: BTreeMap<&str, Tally> = BTreeMap::new();
    let mut assignments = BTreeMap::new();
    let remaining_total = order.len();

    for (pos, (_, rows)) in order.iter().enumerate() {
        let n = rows.len();
        let mut class_counts: BTreeMap<&str, usize> = BTreeMap::new();
        if stratify {
            for &i in rows {
                if let Some(c) = &meta.rows()[i].class_label {
                    *class_counts.entry(c.as_str()).or_default() += 1;
                }
            }
        }
        // Classes absent from this video contribute equally to both sides.
        let cost = |to_test: bool| -> f64 {
            let mut c = overall.deviation_with(to_test, n, test_fraction).powi(2);
            for (label, &k) in &class_counts {
                let t = per_class.get(label).cloned().unwrap_or_default();
                c += t.deviation_with(to_test, k, test_fraction).powi(2);
            }
            c
        };

        let remaining = remaining_total - pos;
        let empty_sides = (overall.train == 0) as usize + (overall.test == 0) as usize;
        let to_test = if empty_sides > 0 && remaining <= empty_sides {
            overall.test == 0
        } else {
            cost(true) < cost(false)
        };

        overall.add(to_test, n);
        for (label, k) in class_counts {
            per_class.entry(label).or_default().add(to_test, k);
        }
        let side = if to_test { Split::Test } else { Split::Train };
        for &i in rows {
            assignments.insert(meta.rows()[i].sample_id.clone(), side);
        }
    }

    let total = meta.len();
    let achieved = overall.test as f64 / total as f64;
    let mut warnings = Vec::new();
    let largest = order.iter().map(|(_, r)| r.len()).max().unwrap_or(0);
    let cap = test_fraction.max(1.0 - test_fraction);
    if largest as f64 > cap * total as f64 {
        warnings.push(format!(
            "largest video holds {largest} of {total} samples; target fraction may be unreachable"
        ));
    }
    if (achieved - test_fraction).abs() > 0.1 {
        warnings.push(format!(
            "achieved test fraction {achieved:.4} is more than 0.1 from target {test_fraction}"
        ));
    }
    Ok(SplitAssignment {
        assignments,
        seed,
        test_fraction_target: test_fraction,
        stratify_key: stratify.then(|| "class".to_owned()),
        achieved_test_fraction: achieved,
        warnings,
    })
}

/// Sorted train and test id lists.
pub fn split_to_lists(a: &SplitAssignment) -> (Vec<String>, Vec<String>) {
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (id, split) in &a.assignments {
        match split {
            Split::Train => train.push(id.clone()),
            Split::Test => test.push(id.clone()),
            Split::Unassigned => {}
        }
    }
    (train, test)
}

/// The pathological split: within every video, every `round(1 / test_fraction)`-th
/// frame (by frame order) goes to test, so test frames sit between train frames.
pub fn frame_interleaved_split(meta: &MetaTable, test_fraction: f64) -> Result<MetaTable> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let stride = ((1.0 / test_fraction).round() as usize).max(2);
    let mut tags = BTreeMap::new();
    for rows in meta.videos().values() {
        let mut rows = rows.clone();
        rows.sort_by_key(|&i| meta.rows()[i].frame_index);
        for (rank, &i) in rows.iter().enumerate() {
            let split = if rank % stride == stride - 1 {
                Split::Test
            } else {
                Split::Train
            };
            tags.insert(meta.rows()[i].sample_id.clone(), split);
        }
    }
    Ok(meta.with_splits(|id| tags[id]))
}

pub fn write_id_list(path: impl AsRef<Path>, ids: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut sorted = ids.to_vec();
    sorted.sort();
    let mut text = sorted.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    fs::write(path, text).map_err(|source| Error::File {
        path: path.into(),
        source,
    })
}

pub fn read_id_list(path: impl AsRef<Path>) -> Result<Vec<String>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::File {
        path: path.into(),
        source,
    })?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect())
}
