use std::collections::BTreeMap;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};

use super::control::ControlReport;
use super::generation::GenerationReport;
use super::retrieval::{RetrievalProtocol, RetrievalReport};

/// Flat metric report: numeric metrics and string metadata share one JSON
/// object with sorted keys.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub metrics: BTreeMap<String, f64>,
    pub metadata: BTreeMap<String, String>,
}

impl Report {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    pub fn note(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    /// `<protocol>.<direction>.recall_at_<k>` and `.med_rank` for both directions.
    pub fn add_retrieval(&mut self, protocol: RetrievalProtocol, reports: &[RetrievalReport]) {
        for r in reports {
            let prefix = format!("{}.{}", protocol.name(), r.direction);
            for (k, v) in &r.recall_at {
                self.set(format!("{prefix}.recall_at_{k}"), *v);
            }
            self.set(format!("{prefix}.med_rank"), r.med_rank);
        }
    }

    pub fn add_generation(&mut self, r: &GenerationReport) {
        self.set("fid", r.fid);
        self.set("r_precision_top1", r.r_precision.top1);
        self.set("r_precision_top2", r.r_precision.top2);
        self.set("r_precision_top3", r.r_precision.top3);
        self.set("mm_dist", r.mm_dist);
        self.set("diversity", r.diversity);
        self.set("mmodality", r.mmodality);
    }

    pub fn add_control(&mut self, r: &ControlReport) {
        self.set("traj_err_50cm", r.traj_err_50cm);
        self.set("loc_err_50cm", r.loc_err_50cm);
        self.set("avg_err", r.avg_err);
    }

    /// Pretty-printed JSON; a key may not be both a metric and metadata.
    pub fn to_json(&self) -> Result<String> {
        let mut obj = Map::new();
        for (k, v) in &self.metrics {
            let n = serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number);
            obj.insert(k.clone(), n);
        }
        for (k, v) in &self.metadata {
            if obj.insert(k.clone(), Value::String(v.clone())).is_some() {
                return Err(Error::InvalidArgument(format!("report key {k:?} is both a metric and metadata")));
            }
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(obj)).map_err(|e| Error::format("report", e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    /// Numbers become metrics (`null` is NaN), strings metadata.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: Value = serde_json::from_str(text).map_err(|e| Error::format("report", e.to_string()))?;
        let obj = v.as_object().ok_or_else(|| Error::format("report", "expected a flat object"))?;
        let mut r = Self::new();
        for (k, v) in obj {
            match v {
                Value::Number(n) => r.set(k.clone(), n.as_f64().unwrap_or(f64::NAN)),
                Value::Null => r.set(k.clone(), f64::NAN),
                Value::String(s) => r.note(k.clone(), s.clone()),
                _ => return Err(Error::format("report", format!("key {k:?} is not a number or string"))),
            }
        }
        Ok(r)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
