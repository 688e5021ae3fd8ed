//! Per-sample metadata (video, frame, class, split) and class partitions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embedding::EmbeddingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
    #[default]
    Unassigned,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
            Split::Unassigned => "unassigned",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaRow {
    pub sample_id: String,
    pub video_id: String,
    pub frame_index: u64,
    pub class_label: Option<String>,
    pub split: Split,
}

/// Wire form of one metadata line.
#[derive(Debug, Serialize, Deserialize)]
struct MetaRecord {
    sample_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    video_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    frame_index: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    class: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<Split>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetaTable {
    rows: Vec<MetaRow>,
    index: HashMap<String, usize>,
}

impl MetaTable {
    pub fn new(rows: Vec<MetaRow>) -> Result<Self> {
        let mut index = HashMap::with_capacity(rows.len());
        let mut frames = HashSet::with_capacity(rows.len());
        for (i, row) in rows.iter().enumerate() {
            if index.insert(row.sample_id.clone(), i).is_some() {
                return Err(Error::DuplicateId(row.sample_id.clone()));
            }
            if !frames.insert((row.video_id.as_str(), row.frame_index)) {
                return Err(Error::DuplicateFrame {
                    video: row.video_id.clone(),
                    frame: row.frame_index,
                });
            }
        }
        Ok(Self { rows, index })
    }

    pub fn rows(&self) -> &[MetaRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn get(&self, sample_id: &str) -> Option<&MetaRow> {
        self.index.get(sample_id).map(|&i| &self.rows[i])
    }

    /// Row indices grouped by video, videos in lexicographic order.
    pub fn videos(&self) -> BTreeMap<&str, Vec<usize>> {
        let mut out: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, row) in self.rows.iter().enumerate() {
            out.entry(row.video_id.as_str()).or_default().push(i);
        }
        out
    }

    /// Copy of the table with every split tag replaced by `assign(sample_id)`.
    pub fn with_splits(&self, mut assign: impl FnMut(&str) -> Split) -> MetaTable {
        let rows = self
            .rows
            .iter()
            .map(|r| MetaRow {
                split: assign(&r.sample_id),
                ..r.clone()
            })
            .collect();
        MetaTable {
            rows,
            index: self.index.clone(),
        }
    }

    /// Parses newline-delimited JSON. Blank lines are skipped. A missing
    /// `video_id` makes the sample its own video; a missing `frame_index`
    /// defaults to 0.
    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let rec: MetaRecord = serde_json::from_str(line).map_err(|e| Error::MalformedRecord {
                line: i + 1,
                message: e.to_string(),
            })?;
            rows.push(MetaRow {
                video_id: rec.video_id.unwrap_or_else(|| rec.sample_id.clone()),
                sample_id: rec.sample_id,
                frame_index: rec.frame_index.unwrap_or(0),
                class_label: rec.class,
                split: rec.split.unwrap_or_default(),
            });
        }
        Self::new(rows)
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let rec = MetaRecord {
                sample_id: r.sample_id.clone(),
                video_id: Some(r.video_id.clone()),
                frame_index: Some(r.frame_index),
                class: r.class_label.clone(),
                split: (r.split != Split::Unassigned).then_some(r.split),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

pub fn load_meta(path: impl AsRef<Path>) -> Result<MetaTable> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| Error::File {
        path: path.into(),
        source,
    })?;
    MetaTable::from_jsonl(&text)
}

pub fn write_meta(meta: &MetaTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, meta.to_jsonl()).map_err(|source| Error::File {
        path: path.into(),
        source,
    })
}

/// Class label to row indices of an embedding set. Labels iterate in
/// lexicographic order; each index list is ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassPartition {
    classes: BTreeMap<String, Vec<usize>>,
}

impl ClassPartition {
    pub fn new(classes: BTreeMap<String, Vec<usize>>) -> Result<Self> {
        let mut seen = HashSet::new();
        for rows in classes.values() {
            for &r in rows {
                if !seen.insert(r) {
                    return Err(Error::InvalidArgument(format!(
                        "row {r} appears in more than one class"
                    )));
                }
            }
        }
        let classes = classes
            .into_iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, mut v)| {
                v.sort_unstable();
                (k, v)
            })
            .collect();
        Ok(Self { classes })
    }

    /// Partition from one label per row (row order matches the embeddings).
    pub fn from_labels<S: AsRef<str>>(labels: &[S]) -> Self {
        let mut classes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            classes.entry(l.as_ref().to_owned()).or_default().push(i);
        }
        Self { classes }
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize])> {
        self.classes.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn rows(&self, label: &str) -> Option<&[usize]> {
        self.classes.get(label).map(Vec::as_slice)
    }

    /// All labeled rows, ascending.
    pub fn labeled_rows(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.classes.values().flatten().copied().collect();
        all.sort_unstable();
        all
    }
}

pub fn partition_by_class(emb: &EmbeddingSet, meta: &MetaTable) -> Result<ClassPartition> {
    let mut classes: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for row in meta.rows() {
        let Some(label) = &row.class_label else {
            continue;
        };
        let idx = emb
            .position(&row.sample_id)
            .ok_or_else(|| Error::MissingSample(row.sample_id.clone()))?;
        classes.entry(label.clone()).or_default().push(idx);
    }
    ClassPartition::new(classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_empty_table() {
        assert!(MetaTable::from_jsonl("").unwrap().is_empty());
    }

    #[test]
    fn groups_by_video() {
        let text = r#"{"sample_id":"s1","video_id":"v1","frame_index":0}
{"sample_id":"s2","video_id":"v1","frame_index":5,"split":"test"}
{"sample_id":"s3","video_id":"v2","frame_index":0,"class":"wood"}
"#;
        let m = MetaTable::from_jsonl(text).unwrap();
        assert_eq!(m.len(), 3);
        let v = m.videos();
        assert_eq!(v["v1"].len(), 2);
        assert_eq!(v["v2"].len(), 1);
        assert_eq!(m.get("s1").unwrap().split, Split::Unassigned);
        assert_eq!(m.get("s2").unwrap().split, Split::Test);
    }

    #[test]
    fn rejects_duplicates_and_garbage() {
        let dup = "{\"sample_id\":\"a\",\"video_id\":\"v\",\"frame_index\":0}\n\
                   {\"sample_id\":\"a\",\"video_id\":\"v\",\"frame_index\":1}\n";
        assert!(matches!(MetaTable::from_jsonl(dup), Err(Error::DuplicateId(_))));

        let frame = "{\"sample_id\":\"a\",\"video_id\":\"v\",\"frame_index\":3}\n\
                     {\"sample_id\":\"b\",\"video_id\":\"v\",\"frame_index\":3}\n";
        assert!(matches!(
            MetaTable::from_jsonl(frame),
            Err(Error::DuplicateFrame { frame: 3, .. })
        ));

        assert!(matches!(
            MetaTable::from_jsonl("{\"sample_id\":\"a\"}\nnot json\n"),
            Err(Error::MalformedRecord { line: 2, .. })
        ));
    }

    #[test]
    fn jsonl_round_trip() {
        let text = "{\"sample_id\":\"a\",\"video_id\":\"v\",\"frame_index\":2,\"class\":\"x\",\"split\":\"train\"}\n";
        let m = MetaTable::from_jsonl(text).unwrap();
        assert_eq!(m.to_jsonl(), text);
    }

    fn emb(n: usize) -> EmbeddingSet {
        let ids = (0..n).map(|i| format!("s{i}")).collect();
        EmbeddingSet::new(ids, vec![0.0; n], 1).unwrap()
    }

    fn meta_with(labels: &[Option<&str>]) -> MetaTable {
        let rows = labels
            .iter()
            .enumerate()
            .map(|(i, l)| MetaRow {
                sample_id: format!("s{i}"),
                video_id: format!("v{i}"),
                frame_index: 0,
                class_label: l.map(str::to_owned),
                split: Split::Unassigned,
            })
            .collect();
        MetaTable::new(rows).unwrap()
    }

    #[test]
    fn single_class_holds_everything() {
        let p = partition_by_class(&emb(3), &meta_with(&[Some("x"); 3])).unwrap();
        assert_eq!(p.class_count(), 1);
        assert_eq!(p.rows("x").unwrap(), &[0, 1, 2]);
    }

    #[test]
    fn two_classes_in_label_order() {
        let p = partition_by_class(&emb(3), &meta_with(&[Some("b"), Some("a"), Some("a")])).unwrap();
        let got: Vec<_> = p.iter().collect();
        assert_eq!(got, vec![("a", &[1usize, 2][..]), ("b", &[0][..])]);
    }

    #[test]
    fn unlabeled_rows_are_excluded() {
        let p = partition_by_class(&emb(4), &meta_with(&[Some("a"), None, Some("b"), None])).unwrap();
        assert_eq!(p.labeled_rows(), vec![0, 2]);
    }

    #[test]
    fn missing_sample_is_an_error() {
        let err = partition_by_class(&emb(1), &meta_with(&[Some("a"), Some("a")])).unwrap_err();
        assert!(matches!(err, Error::MissingSample(id) if id == "s1"));
    }
}
