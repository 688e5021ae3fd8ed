//! The JSON report envelope shared by every metric and command.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Serialize, Serializer};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::kernel::Bandwidth;

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct SplitEcho {
    pub mode: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub repeats: usize,
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct MetricReport {
    pub metric: String,
    #[serde(serialize_with = "ser_value")]
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma_policy: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitEcho>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", serialize_with = "ser_map")]
    pub per_class: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
    pub inputs: BTreeMap<String, String>,
    /// Metric-specific fields, serialized inline after the common ones.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

/// Non-finite values (PSNR of identical images) serialize as strings.
fn ser_value<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    json_number(*v).serialize(s)
}

fn ser_map<S: Serializer>(m: &BTreeMap<String, f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    m.iter()
        .map(|(k, v)| (k.clone(), json_number(*v)))
        .collect::<BTreeMap<_, _>>()
        .serialize(s)
}

pub fn json_number(v: f64) -> Value {
    if v.is_finite() {
        Value::from(v)
    } else if v.is_nan() {
        Value::from("nan")
    } else if v > 0.0 {
        Value::from("inf")
    } else {
        Value::from("-inf")
    }
}

/// Same textual form as the JSON output, used for CSV summaries.
pub fn format_number(v: f64) -> String {
    match json_number(v) {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

impl MetricReport {
    pub fn new(metric: impl Into<String>, value: f64) -> Self {
        Self {
            metric: metric.into(),
            value,
            sigma: None,
            sigma_policy: None,
            split: None,
            classes: Vec::new(),
            per_class: BTreeMap::new(),
            skipped: Vec::new(),
            inputs: BTreeMap::new(),
            extra: Map::new(),
        }
    }

    pub fn with_sigma(mut self, sigma: f64, bandwidth: Bandwidth) -> Self {
        self.sigma = Some(sigma);
        self.sigma_policy = Some(bandwidth.policy_name().to_owned());
        self
    }

    pub fn with_extra(mut self, key: &str, value: impl Serialize) -> Self {
        self.extra.insert(
            key.to_owned(),
            serde_json::to_value(value).expect("report field serializes"),
        );
        self
    }

    /// Records the SHA-256 digest of an input file under its path.
    pub fn add_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let digest = file_digest(path)?;
        self.inputs.insert(path.display().to_string(), digest);
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Two-column `field,value` summary carrying the same values as the JSON.
    pub fn to_csv_summary(&self) -> String {
        let mut rows: Vec<(String, String)> = vec![
            ("metric".into(), self.metric.clone()),
            ("value".into(), format_number(self.value)),
        ];
        if let Some(s) = self.sigma {
            rows.push(("sigma".into(), format_number(s)));
        }
        if let Some(p) = &self.sigma_policy {
            rows.push(("sigma_policy".into(), p.clone()));
        }
        if let Some(split) = &self.split {
            rows.push(("split.mode".into(), split.mode.clone()));
            if let Some(seed) = split.seed {
                rows.push(("split.seed".into(), seed.to_string()));
            }
            rows.push(("split.repeats".into(), split.repeats.to_string()));
        }
        for (k, v) in &self.per_class {
            rows.push((format!("per_class.{k}"), format_number(*v)));
        }
        for k in &self.skipped {
            rows.push(("skipped".into(), k.clone()));
        }
        flatten_scalars("", &Value::Object(self.extra.clone()), &mut rows);
        for (k, v) in &self.inputs {
            rows.push((format!("inputs.{k}"), v.clone()));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["field", "value"]).expect("in-memory write");
        for (k, v) in rows {
            w.write_record([k, v]).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }
}

fn flatten_scalars(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_scalars(&key, v, out);
            }
        }
        // Arrays (rankings, pair lists) are left to the JSON form.
        Value::Array(_) | Value::Null => {}
        Value::String(s) => out.push((prefix.to_owned(), s.clone())),
        other => out.push((prefix.to_owned(), other.to_string())),
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| Error::File {
        path: path.into(),
        source,
    })?;
    Ok(sha256_hex(&bytes))
}
