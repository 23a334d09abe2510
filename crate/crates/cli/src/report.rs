//! Case records, fit summaries, verdicts and the report document.

use std::collections::BTreeMap;

use couette_core::estimates::ScalingFit;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// Version of the JSON layout.
pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// One parameter value: a number or a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Number(f64),
    Text(String),
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Number(v)
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Number(v as f64)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Number(v as f64)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_string())
    }
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Number(v) => write!(f, "{v:?}"),
            Value::Text(s) => f.write_str(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub version: String,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub id: String,
    pub parameters: BTreeMap<String, Value>,
    pub results: BTreeMap<String, f64>,
    pub provenance: Provenance,
}

impl CaseRecord {
    pub fn new(id: impl Into<String>, provenance: &Provenance) -> Self {
        Self { id: id.into(), parameters: BTreeMap::new(), results: BTreeMap::new(), provenance: provenance.clone() }
    }

    pub fn param(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.parameters.insert(key.to_string(), value.into());
        self
    }

    pub fn result(mut self, key: &str, value: f64) -> Self {
        self.results.insert(key.to_string(), value);
        self
    }
}

/// A fitted power law with the points it was fitted on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub name: String,
    pub variable: String,
    pub exponent: f64,
    pub intercept: f64,
    pub r2: f64,
    pub target_exponent: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
}

impl FitSummary {
    pub fn from_fit(prefix: &str, fit: &ScalingFit, xs: Vec<f64>, ys: Vec<f64>) -> Self {
        Self {
            name: format!("{prefix}/{}", fit.name),
            variable: fit.variable.clone(),
            exponent: fit.exponent,
            intercept: fit.intercept,
            r2: fit.r2,
            target_exponent: fit.target_exponent,
            tolerance: fit.tolerance,
            pass: fit.pass,
            xs,
            ys,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub pass: bool,
    pub detail: String,
    /// Ids of the records the verdict rests on.
    pub records: Vec<String>,
    /// Names of the fits the verdict rests on.
    pub fits: Vec<String>,
}

/// A sampled time series, emitted as long-format CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub id: String,
    pub quantity: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub records: Vec<CaseRecord>,
    pub fits: Vec<FitSummary>,
    pub verdicts: BTreeMap<String, Verdict>,
    pub series: Vec<TimeSeries>,
    pub emitted_files: Vec<String>,
}

impl ReportDocument {
    pub fn new(provenance: Provenance) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            provenance,
            records: Vec::new(),
            fits: Vec::new(),
            verdicts: BTreeMap::new(),
            series: Vec::new(),
            emitted_files: Vec::new(),
        }
    }

    pub fn all_pass(&self) -> bool {
        self.verdicts.values().all(|v| v.pass)
    }

    /// Unique ids, finite numbers, verdict references resolve.
    pub fn validate(&self) -> CliResult<()> {
        let mut ids = std::collections::BTreeSet::new();
        for r in &self.records {
            if !ids.insert(r.id.as_str()) {
                return Err(CliError::Report(format!("duplicate record id {}", r.id)));
            }
            let numbers = r.results.iter().chain(r.parameters.iter().filter_map(|(k, v)| match v {
                Value::Number(x) => Some((k, x)),
                Value::Text(_) => None,
            }));
            for (k, v) in numbers {
                if !v.is_finite() {
                    return Err(CliError::Report(format!("record {}: {k} is not finite", r.id)));
                }
            }
        }
        let fits: std::collections::BTreeSet<&str> = self.fits.iter().map(|f| f.name.as_str()).collect();
        for (key, v) in &self.verdicts {
            if let Some(missing) = v.records.iter().find(|id| !ids.contains(id.as_str())) {
                return Err(CliError::Report(format!("verdict {key} cites unknown record {missing}")));
            }
            if let Some(missing) = v.fits.iter().find(|f| !fits.contains(f.as_str())) {
                return Err(CliError::Report(format!("verdict {key} cites unknown fit {missing}")));
            }
        }
        Ok(())
    }

    pub fn merge(&mut self, part: Section) {
        self.records.extend(part.records);
        self.fits.extend(part.fits);
        self.series.extend(part.series);
        if let Some((key, verdict)) = part.verdict {
            self.verdicts.insert(key, verdict);
        }
    }
}

/// Output of one criterion run, merged into a report in criterion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Section {
    pub records: Vec<CaseRecord>,
    pub fits: Vec<FitSummary>,
    pub series: Vec<TimeSeries>,
    pub verdict: Option<(String, Verdict)>,
}
