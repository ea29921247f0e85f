// SPDX-License-Identifier: Apache-2.0
//! Ground truth, confusion counts, metrics and evaluation drivers.

mod bounds;
mod loocv;
mod synth;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::classify::RegisterLabel;
use crate::pipeline::{LabelsDoc, METRICS_SCHEMA};
use crate::{Error, Result};

pub use bounds::{mf_bounds, mf1_per_register, MfBounds};
pub use loocv::{loocv, loocv_with_progress, FoldReport, LabeledDesign, LoocvReport};
pub use synth::{generate_synthetic, loocv_suite, SynthDesign, SynthSpec};

/// Registers known to hold FSM state; every other register is data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub design: String,
    pub state_registers: BTreeSet<String>,
}

impl GroundTruth {
    pub fn from_json_str(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            design: String,
            state_registers: Vec<String>,
        }
        let raw: Raw = serde_json::from_str(text).map_err(|e| Error::json("ground truth", e))?;
        let mut set = BTreeSet::new();
        for name in raw.state_registers {
            if !set.insert(name.clone()) {
                return Err(Error::InvalidArgument(format!("ground truth lists {name} twice")));
            }
        }
        Ok(GroundTruth {
            design: raw.design,
            state_registers: set,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("ground truth serializes");
        s.push('\n');
        s
    }

    pub fn label_of(&self, name: &str) -> RegisterLabel {
        if self.state_registers.contains(name) {
            RegisterLabel::State
        } else {
            RegisterLabel::Data
        }
    }
}

/// Counts with STATE as the positive class.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl ConfusionCounts {
    pub fn new(tp: u64, tn: u64, fp: u64, fn_: u64) -> Self {
        ConfusionCounts { tp, tn, fp, fn_ }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn record(&mut self, predicted: RegisterLabel, actual: RegisterLabel) {
        use RegisterLabel::*;
        match (predicted, actual) {
            (State, State) => self.tp += 1,
            (Data, Data) => self.tn += 1,
            (State, Data) => self.fp += 1,
            (Data, State) => self.fn_ += 1,
        }
    }
}

/// Compares predicted labels against ground truth. Every truth state
/// register must be among the predicted names.
pub fn confusion(predicted: &BTreeMap<&str, RegisterLabel>, truth: &GroundTruth) -> Result<ConfusionCounts> {
    let missing: Vec<String> = truth
        .state_registers
        .iter()
        .filter(|n| !predicted.contains_key(n.as_str()))
        .cloned()
        .collect();
    if !missing.is_empty() {
        return Err(Error::NameMismatch(missing));
    }
    let mut c = ConfusionCounts::default();
    for (name, &label) in predicted {
        c.record(label, truth.label_of(name));
    }
    Ok(c)
}

pub fn confusion_for_labels(labels: &LabelsDoc, truth: &GroundTruth) -> Result<ConfusionCounts> {
    confusion(&labels.by_name(), truth)
}

/// A ratio that is undefined when its denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Ratio {
    Defined(f64),
    Undefined,
}

impl Ratio {
    pub fn of(num: u64, den: u64) -> Self {
        if den == 0 {
            Ratio::Undefined
        } else {
            Ratio::Defined(num as f64 / den as f64)
        }
    }

    pub fn value(self) -> Option<f64> {
        match self {
            Ratio::Defined(v) => Some(v),
            Ratio::Undefined => None,
        }
    }

    /// Arithmetic mean of the defined values.
    pub fn mean(values: impl IntoIterator<Item = Ratio>) -> Ratio {
        let defined: Vec<f64> = values.into_iter().filter_map(Ratio::value).collect();
        if defined.is_empty() {
            Ratio::Undefined
        } else {
            Ratio::Defined(defined.iter().sum::<f64>() / defined.len() as f64)
        }
    }
}

impl fmt::Display for Ratio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Ratio::Defined(v) => write!(f, "{:.2}%", v * 100.0),
            Ratio::Undefined => f.write_str("undefined"),
        }
    }
}

impl Serialize for Ratio {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Ratio::Defined(v) => s.serialize_f64(*v),
            Ratio::Undefined => s.serialize_str("undefined"),
        }
    }
}

impl<'de> Deserialize<'de> for Ratio {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Num(f64),
            Str(String),
        }
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(Ratio::Defined(v)),
            Repr::Str(s) if s == "undefined" => Ok(Ratio::Undefined),
            Repr::Str(s) => Err(serde::de::Error::custom(format!("expected a number or \"undefined\", got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub recall: Ratio,
    pub precision: Ratio,
    pub accuracy: Ratio,
}

pub fn metrics(c: &ConfusionCounts) -> Metrics {
    Metrics {
        recall: Ratio::of(c.tp, c.tp + c.fn_),
        precision: Ratio::of(c.tp, c.tp + c.fp),
        accuracy: Ratio::of(c.tp + c.tn, c.total()),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMetrics {
    pub design: String,
    pub counts: ConfusionCounts,
    #[serde(flatten)]
    pub metrics: Metrics,
}

impl DesignMetrics {
    pub fn new(design: impl Into<String>, counts: ConfusionCounts) -> Self {
        DesignMetrics {
            design: design.into(),
            metrics: metrics(&counts),
            counts,
        }
    }
}

/// Per-design rows plus the macro average over designs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema: String,
    pub rows: Vec<DesignMetrics>,
    pub average: Metrics,
}

impl MetricsReport {
    pub fn new(rows: Vec<DesignMetrics>) -> Self {
        let average = Metrics {
            recall: Ratio::mean(rows.iter().map(|r| r.metrics.recall)),
            precision: Ratio::mean(rows.iter().map(|r| r.metrics.precision)),
            accuracy: Ratio::mean(rows.iter().map(|r| r.metrics.accuracy)),
        };
        MetricsReport {
            schema: METRICS_SCHEMA.to_string(),
            rows,
            average,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// `design,tp,tn,fp,fn,recall,precision,accuracy`, ratios as fractions,
    /// closing with an `average` row whose count columns are empty.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let ratio = |r: Ratio| match r {
            Ratio::Defined(v) => format!("{v}"),
            Ratio::Undefined => "undefined".to_string(),
        };
        w.write_record(["design", "tp", "tn", "fp", "fn", "recall", "precision", "accuracy"])
            .expect("in-memory write");
        for r in &self.rows {
            let c = r.counts;
            w.write_record([
                r.design.clone(),
                c.tp.to_string(),
                c.tn.to_string(),
                c.fp.to_string(),
                c.fn_.to_string(),
                ratio(r.metrics.recall),
                ratio(r.metrics.precision),
                ratio(r.metrics.accuracy),
            ])
            .expect("in-memory write");
        }
        let a = self.average;
        w.write_record([
            "average".to_string(),
            String::new(),
            String::new(),
            String::new(),
            String::new(),
            ratio(a.recall),
            ratio(a.precision),
            ratio(a.accuracy),
        ])
        .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("flush")).expect("UTF-8")
    }

    /// Fixed-width table with percentages, for terminals.
    pub fn to_table(&self) -> String {
        let width = self.rows.iter().map(|r| r.design.len()).max().unwrap_or(0).max(7);
        let mut out = format!(
            "{:<width$}  {:>10}  {:>10}  {:>10}\n",
            "design", "recall", "precision", "accuracy"
        );
        let mut line = |name: &str, m: &Metrics| {
            out.push_str(&format!(
                "{:<width$}  {:>10}  {:>10}  {:>10}\n",
                name,
                m.recall.to_string(),
                m.precision.to_string(),
                m.accuracy.to_string()
            ));
        };
        for r in &self.rows {
            line(&r.design, &r.metrics);
        }
        line("average", &self.average);
        out
    }
}
