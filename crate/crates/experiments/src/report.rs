//! Experiment results and their JSON / CSV files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Comparison {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
}

impl Comparison {
    pub fn holds(self, value: f64, threshold: f64) -> bool {
        match self {
            Comparison::Lt => value < threshold,
            Comparison::Le => value <= threshold,
            Comparison::Gt => value > threshold,
            Comparison::Ge => value >= threshold,
            Comparison::Eq => value == threshold,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparison::Lt => "<",
            Comparison::Le => "<=",
            Comparison::Gt => ">",
            Comparison::Ge => ">=",
            Comparison::Eq => "==",
        }
    }
}

/// One acceptance comparison `value ⋚ threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub comparison: Comparison,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, value: f64, comparison: Comparison, threshold: f64) -> Self {
        Check {
            name: name.into(),
            value,
            comparison,
            threshold,
            passed: comparison.holds(value, threshold),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {}: {} {} {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.comparison.symbol(),
            self.threshold
        )
    }
}

/// Numeric table, one row per record.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(&self.columns)?;
        for row in &self.rows {
            wr.write_record(row.iter().map(|v| v.to_string()))?;
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(r: R) -> Result<Self> {
        let mut rd = csv::Reader::from_reader(r);
        let columns = rd.headers()?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for rec in rd.records() {
            let rec = rec?;
            rows.push(rec.iter().map(f64::from_str).collect::<std::result::Result<Vec<_>, _>>()?);
        }
        Ok(Table { columns, rows })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment: String,
    pub seed: u64,
    pub config: BTreeMap<String, Value>,
    pub metrics: BTreeMap<String, f64>,
    pub checks: Vec<Check>,
    #[serde(default)]
    pub table: Option<Table>,
    #[serde(default)]
    pub extra: Value,
}

impl ExperimentResult {
    pub fn new(experiment: &str, seed: u64) -> Self {
        ExperimentResult {
            experiment: experiment.to_string(),
            seed,
            config: BTreeMap::new(),
            metrics: BTreeMap::new(),
            checks: Vec::new(),
            table: None,
            extra: Value::Null,
        }
    }

    pub fn config(mut self, key: &str, value: impl Serialize) -> Self {
        self.config
            .insert(key.to_string(), serde_json::to_value(value).expect("config value serializes"));
        self
    }

    pub fn metric(mut self, key: &str, value: f64) -> Self {
        self.metrics.insert(key.to_string(), value);
        self
    }

    pub fn check(mut self, check: Check) -> Self {
        self.checks.push(check);
        self
    }

    pub fn table(mut self, table: Table) -> Self {
        self.table = Some(table);
        self
    }

    pub fn extra(mut self, extra: Value) -> Self {
        self.extra = extra;
        self
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Writes `<dir>/<experiment>.json`, or for CSV `<dir>/<experiment>.csv`
/// (the table) and `<dir>/<experiment>_summary.csv` (metrics and checks).
pub fn write_result(result: &ExperimentResult, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let stem = &result.experiment;
    match format {
        Format::Json => {
            let path = dir.join(format!("{stem}.json"));
            fs::write(&path, result.to_json_string() + "\n").with_context(|| format!("writing {}", path.display()))?;
            Ok(vec![path])
        }
        Format::Csv => {
            let mut paths = Vec::new();
            if let Some(t) = &result.table {
                let path = dir.join(format!("{stem}.csv"));
                let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
                t.write_csv(file)?;
                paths.push(path);
            }
            let path = dir.join(format!("{stem}_summary.csv"));
            let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
            write_summary_csv(result, file)?;
            paths.push(path);
            Ok(paths)
        }
    }
}

pub fn write_summary_csv<W: Write>(result: &ExperimentResult, w: W) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(["kind", "name", "value", "comparison", "threshold", "passed"])?;
    for (k, v) in &result.metrics {
        wr.write_record(["metric", k, &v.to_string(), "", "", ""])?;
    }
    for c in &result.checks {
        wr.write_record([
            "check",
            &c.name,
            &c.value.to_string(),
            c.comparison.symbol(),
            &c.threshold.to_string(),
            &c.passed.to_string(),
        ])?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_result_json(path: &Path) -> Result<ExperimentResult> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    ExperimentResult::from_json_str(&text)
}

/// Parses a summary CSV back into metrics and checks.
pub fn read_summary_csv<R: std::io::Read>(r: R) -> Result<(BTreeMap<String, f64>, Vec<Check>)> {
    let mut rd = csv::Reader::from_reader(r);
    let mut metrics = BTreeMap::new();
    let mut checks = Vec::new();
    for rec in rd.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        match field(0) {
            "metric" => {
                metrics.insert(field(1).to_string(), field(2).parse()?);
            }
            "check" => {
                let comparison = match field(3) {
                    "<" => Comparison::Lt,
                    "<=" => Comparison::Le,
                    ">" => Comparison::Gt,
                    ">=" => Comparison::Ge,
                    "==" => Comparison::Eq,
                    other => bail!("unknown comparison {other:?}"),
                };
                checks.push(Check {
                    name: field(1).to_string(),
                    value: field(2).parse()?,
                    comparison,
                    threshold: field(4).parse()?,
                    passed: field(5).parse()?,
                });
            }
            other => bail!("unknown summary row kind {other:?}"),
        }
    }
    Ok((metrics, checks))
}
