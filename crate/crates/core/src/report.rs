//! Versioned report files.
//!
//! JSON reports have the shape `{format_version, kind, config, payload, timing}`.
//! Everything that depends on the wall clock lives under `timing`, so two runs
//! with the same seed produce identical `payload` values. CSV outputs start
//! with `#` comment lines carrying the version and the config snapshot.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::config::RunConfig;
use crate::dataset::AttributeSchema;
use crate::debug::{Localization, MitigationResult};
use crate::error::{Error, Result};
use crate::search::{IdRecord, Phase, SearchReport, TestCase};

pub const REPORT_FORMAT_VERSION: u32 = 1;

const SEARCH_TIMING_KEYS: [&str; 4] = ["t_k_max", "t_first_id", "t_1000th_id", "elapsed"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub format_version: u32,
    pub kind: String,
    pub config: RunConfig,
    pub payload: Value,
    pub timing: Value,
}

impl ReportFile {
    pub fn new(kind: &str, config: &RunConfig, payload: Value, timing: Value) -> Self {
        Self {
            format_version: REPORT_FORMAT_VERSION,
            kind: kind.to_string(),
            config: config.clone(),
            payload,
            timing,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        write_file(path, text.as_bytes())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let file: ReportFile = serde_path_to_error::deserialize(de).map_err(|e| Error::Parse {
            field: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        if file.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                what: "report file",
                found: file.format_version,
                expected: REPORT_FORMAT_VERSION,
            });
        }
        Ok(file)
    }

    /// Typed view of the payload.
    pub fn payload_as<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        serde_path_to_error::deserialize(&self.payload).map_err(|e| Error::Parse {
            field: format!("payload.{}", e.path()),
            message: e.inner().to_string(),
        })
    }

    /// Serialized payload alone, for reproducibility checks.
    pub fn payload_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(&self.payload).expect("json value serializes")
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Splits a search summary into its timing-free payload and the timing fields.
pub fn search_report_file(report: &SearchReport, config: &RunConfig) -> ReportFile {
    let mut payload = serde_json::to_value(&report.summary).expect("summary serializes");
    let mut timing = Map::new();
    if let Value::Object(map) = &mut payload {
        for key in SEARCH_TIMING_KEYS {
            if let Some(v) = map.remove(key) {
                timing.insert(key.to_string(), v);
            }
        }
    }
    ReportFile::new("search", config, payload, Value::Object(timing))
}

fn csv_preamble(kind: &str, config: &RunConfig) -> String {
    format!(
        "# format_version = {REPORT_FORMAT_VERSION}\n# kind = {kind}\n# config = {}\n",
        serde_json::to_string(config).expect("config serializes")
    )
}

fn csv_body(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))
}

fn write_csv(path: &Path, kind: &str, config: &RunConfig, body: Vec<u8>) -> Result<()> {
    let mut out = csv_preamble(kind, config).into_bytes();
    out.write_all(&body).expect("writing to a Vec cannot fail");
    write_file(path, &out)
}

/// Test cases without wall-clock columns: non-protected values, then the measures.
pub fn test_cases_csv(cases: &[TestCase], schema: &AttributeSchema) -> Result<Vec<u8>> {
    let mut header: Vec<String> = schema.non_protected_attributes().map(|a| a.name.clone()).collect();
    header.extend(["k", "q_inf", "q_shannon", "delta", "phase"].map(String::from));
    csv_body(
        header,
        cases.iter().map(|t| {
            let mut r: Vec<String> = t.x.iter().map(i64::to_string).collect();
            r.push(t.k.to_string());
            r.push(t.q_inf.to_string());
            r.push(t.q_shannon.to_string());
            r.push(t.delta.to_string());
            r.push(t.phase.as_str().to_string());
            r
        }),
    )
}

/// ID instances: non-protected values, then the two protected tuples.
pub fn id_instances_csv(ids: &[IdRecord], schema: &AttributeSchema) -> Result<Vec<u8>> {
    let mut header: Vec<String> = schema.non_protected_attributes().map(|a| a.name.clone()).collect();
    for prefix in ["unfavorable", "favorable"] {
        for &i in schema.protected_indices() {
            header.push(format!("{prefix}_{}", schema.attributes()[i].name));
        }
    }
    csv_body(
        header,
        ids.iter().map(|r| {
            r.x.iter()
                .chain(&r.unfavorable)
                .chain(&r.favorable)
                .map(i64::to_string)
                .collect()
        }),
    )
}

pub fn write_test_cases(path: &Path, cases: &[TestCase], schema: &AttributeSchema, config: &RunConfig) -> Result<()> {
    write_csv(path, "test_cases", config, test_cases_csv(cases, schema)?)
}

pub fn write_id_instances(path: &Path, ids: &[IdRecord], schema: &AttributeSchema, config: &RunConfig) -> Result<()> {
    write_csv(path, "id_instances", config, id_instances_csv(ids, schema)?)
}

/// Reads a test-case CSV written by [`write_test_cases`]. Wall times read as 0.
pub fn read_test_cases(path: &Path, schema: &AttributeSchema) -> Result<Vec<TestCase>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(file);
    let header = rdr.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let x_cols: Vec<usize> = schema
        .non_protected_attributes()
        .map(|a| col(&a.name))
        .collect::<Result<_>>()?;
    let (k_col, qi_col, qs_col, d_col, p_col) = (col("k")?, col("q_inf")?, col("q_shannon")?, col("delta")?, col("phase")?);
    let mut out = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = |column: &str| Error::NonInteger {
            row: r + 1,
            column: column.to_string(),
            cell: String::new(),
        };
        let int = |c: usize, name: &str| rec.get(c).and_then(|s| s.parse::<i64>().ok()).ok_or_else(|| bad(name));
        let float = |c: usize, name: &str| rec.get(c).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad(name));
        let x = x_cols
            .iter()
            .zip(schema.non_protected_attributes())
            .map(|(&c, a)| int(c, &a.name))
            .collect::<Result<Vec<_>>>()?;
        schema.check_non_protected(&x)?;
        let phase = match rec.get(p_col) {
            Some("global") => Phase::Global,
            Some("local") => Phase::Local,
            _ => return Err(bad("phase")),
        };
        out.push(TestCase {
            x,
            k: int(k_col, "k")? as usize,
            q_inf: float(qi_col, "q_inf")?,
            q_shannon: float(qs_col, "q_shannon")?,
            delta: float(d_col, "delta")?,
            phase,
            wall_time: 0.0,
        });
    }
    Ok(out)
}

/// Strips the `#` preamble, leaving the CSV body.
pub fn csv_payload(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .fold(String::new(), |mut s, l| {
            s.push_str(l);
            s.push('\n');
            s
        })
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Mean and (population) standard deviation of the headline metrics over
/// runs, as `(payload, timing)`. Missing values (e.g. no 1000th ID) are left
/// out of that metric.
pub fn summarize_runs(runs: &[&ReportFile]) -> (Value, Value) {
    let metric = |section: fn(&ReportFile) -> &Value, key: &str| {
        let vals: Vec<f64> = runs.iter().filter_map(|r| section(r).get(key).and_then(Value::as_f64)).collect();
        let (mean, std) = mean_std(&vals);
        json!({ "mean": mean, "std": std, "runs": vals.len() })
    };
    fn payload(r: &ReportFile) -> &Value {
        &r.payload
    }
    fn timing(r: &ReportFile) -> &Value {
        &r.timing
    }
    let mut p = Map::new();
    p.insert("runs".into(), json!(runs.len()));
    for key in ["k_initial", "k_max", "q_inf", "q_shannon", "test_cases", "id_instances", "local_success_rate"] {
        p.insert(key.into(), metric(payload, key));
    }
    let mut t = Map::new();
    for key in ["t_k_max", "t_first_id", "t_1000th_id"] {
        t.insert(key.into(), metric(timing, key));
    }
    (Value::Object(p), Value::Object(t))
}

fn opt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "N/A".to_string(), |v| format!("{v:.prec$}"))
}

/// Human-readable search summary.
pub fn format_search(file: &ReportFile) -> String {
    let p = &file.payload;
    let f = |k: &str| p.get(k).and_then(Value::as_f64);
    let t = |k: &str| file.timing.get(k).and_then(Value::as_f64);
    let mut s = String::new();
    let _ = writeln!(s, "m            {}", opt(f("m"), 0));
    let _ = writeln!(s, "Q_I (max)    {}", opt(f("qid_max"), 2));
    let _ = writeln!(s, "K_I          {}", opt(f("k_initial"), 0));
    let _ = writeln!(s, "K_F          {}", opt(f("k_max"), 0));
    let _ = writeln!(s, "T_KF         {}", opt(t("t_k_max"), 2));
    let _ = writeln!(s, "Q_inf        {}", opt(f("q_inf"), 3));
    let _ = writeln!(s, "Q_1          {}", opt(f("q_shannon"), 3));
    let _ = writeln!(s, "#I           {}", opt(f("test_cases"), 0));
    let _ = writeln!(s, "#ID          {}", opt(f("id_instances"), 0));
    let _ = writeln!(s, "l_s          {}", opt(f("local_success_rate"), 3));
    let _ = writeln!(s, "T.1st        {}", opt(t("t_first_id"), 2));
    let _ = writeln!(s, "T.1k         {}", opt(t("t_1000th_id"), 2));
    if let Some(levels) = p.get("severity").and_then(Value::as_array) {
        let parts: Vec<String> = levels
            .iter()
            .map(|l| format!("k={}: {}", l["k"], l["count"]))
            .collect();
        let _ = writeln!(s, "severity     {}", parts.join(", "));
    }
    s
}

/// Layer and top-k neuron table; absent entries print as `N/A`.
pub fn format_localization(loc: &Localization) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "layer {}  rho {:.2}", loc.layer(), loc.sensitivity.chosen_rho());
    for (label, list) in [("+", &loc.positive), ("-", &loc.negative)] {
        for (i, entry) in Localization::padded(list, loc.top_k).iter().enumerate() {
            match entry {
                Some(a) => {
                    let _ = writeln!(s, "neuron{label}{}  N_{}  ACD {:.3}", i + 1, a.neuron, a.acd.abs());
                }
                None => {
                    let _ = writeln!(s, "neuron{label}{}  N/A  ACD N/A", i + 1);
                }
            }
        }
    }
    s
}

pub fn format_mitigation(results: &[MitigationResult]) -> String {
    let mut s = String::new();
    if let Some(first) = results.first() {
        let _ = writeln!(s, "A      {:.3}", first.accuracy_before);
        let _ = writeln!(s, "K      {:.2}", first.mean_k_before);
    }
    for r in results {
        let tag = match r.mode.map(|m| m.to_string()).as_deref() {
            Some("activate") => ">0",
            _ => "=0",
        };
        let _ = writeln!(
            s,
            "A^{tag}   {:.3}\nK^{tag}   {:.2}   (layer {}, neuron {}, value {:.4})",
            r.accuracy_after, r.mean_k_after, r.intervention.layer, r.intervention.neuron, r.intervention.value
        );
    }
    s
}
