//! File formats: logit datasets (CSV and JSONL), cost matrices, oracle
//! sidecars and JSON reports.
//!
//! CSV datasets start with `#`-prefixed `key=value` preamble lines, then a
//! header `z0,...,zK-1,label` and one record per example:
//!
//! ```text
//! # num_classes=3
//! # binary_mode=false
//! # class_names=nv,bkl,mel
//! # malignancy=benign,benign,malignant
//! z0,z1,z2,label
//! 1.2000000000000000e0,-3.0000000000000000e-1,5.0000000000000000e-1,0
//! ```
//!
//! JSONL datasets carry the same header as a JSON object on the first line,
//! followed by `{"logits": [...], "label": 0}` per line. Labels may be class
//! indices or class names.

use crate::synth::SynthOracle;
use crate::types::{validate_dataset, ClassTaxonomy, CostMatrix, LogitDataset, Malignancy, ValidationError};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("missing header field `{0}`")]
    MissingField(&'static str),

    #[error("invalid dataset: {0}")]
    Validation(#[from] ValidationError),

    #[error("JSON: {0}")]
    Json(#[from] serde_json::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> IoError {
    IoError::Parse {
        line,
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Csv,
    Jsonl,
}

impl DatasetFormat {
    /// `.jsonl`/`.ndjson` files are JSONL; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl") | Some("ndjson") => DatasetFormat::Jsonl,
            _ => DatasetFormat::Csv,
        }
    }
}

/// Dataset-level metadata shared by both formats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub num_classes: usize,
    #[serde(default)]
    pub binary_mode: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_names: Option<Vec<String>>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        deserialize_with = "de_malignancy",
        serialize_with = "ser_malignancy"
    )]
    pub malignancy: Option<Vec<Malignancy>>,
}

impl DatasetHeader {
    /// Shape-only header for `dataset`.
    pub fn for_dataset(dataset: &LogitDataset) -> Self {
        Self {
            num_classes: dataset.num_classes(),
            binary_mode: dataset.is_binary(),
            class_names: None,
            malignancy: None,
        }
    }

    pub fn with_class_names(mut self, names: Vec<String>) -> Self {
        self.class_names = Some(names);
        self
    }

    /// Class names and malignancy flags taken from `taxonomy`.
    pub fn with_taxonomy(mut self, taxonomy: &ClassTaxonomy) -> Self {
        self.class_names = Some(taxonomy.names().to_vec());
        self.malignancy = Some(taxonomy.malignancy().to_vec());
        self
    }

    fn class_names_or_default(&self) -> Vec<String> {
        self.class_names
            .clone()
            .unwrap_or_else(|| (0..self.num_classes).map(|k| format!("class{k}")).collect())
    }
}

fn de_malignancy<'de, D>(deserializer: D) -> Result<Option<Vec<Malignancy>>, D::Error>
where
    D: serde::Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flags {
        Joined(String),
        List(Vec<String>),
    }
    let parse = |items: Vec<String>| {
        items
            .iter()
            .map(|s| s.parse::<Malignancy>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(serde::de::Error::custom)
    };
    match Option::<Flags>::deserialize(deserializer)? {
        None => Ok(None),
        Some(Flags::Joined(s)) => parse(s.split(',').map(str::to_owned).collect()).map(Some),
        Some(Flags::List(v)) => parse(v).map(Some),
    }
}

fn ser_malignancy<S>(flags: &Option<Vec<Malignancy>>, serializer: S) -> Result<S::Ok, S::Error>
where
    S: serde::Serializer,
{
    let names: Option<Vec<&str>> = flags.as_ref().map(|v| v.iter().map(|m| m.as_str()).collect());
    names.serialize(serializer)
}

/// A dataset read from disk together with its metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub dataset: LogitDataset,
    /// Present when the header carried malignancy flags.
    pub taxonomy: Option<ClassTaxonomy>,
    pub class_names: Vec<String>,
    /// Set when a two-column binary export was folded to `z1 - z0`.
    pub converted_two_column: bool,
}

impl LoadedDataset {
    /// The taxonomy, or an error naming the missing header field.
    pub fn require_taxonomy(&self) -> Result<&ClassTaxonomy, IoError> {
        self.taxonomy.as_ref().ok_or(IoError::MissingField("malignancy"))
    }
}

pub fn read_dataset(path: &Path, format: DatasetFormat) -> Result<LoadedDataset, IoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    match format {
        DatasetFormat::Csv => parse_dataset_csv(&text),
        DatasetFormat::Jsonl => parse_dataset_jsonl(&text),
    }
}

fn parse_label(raw: &str, names: &[String], line: usize) -> Result<usize, IoError> {
    let raw = raw.trim();
    if let Ok(k) = raw.parse::<usize>() {
        return Ok(k);
    }
    names
        .iter()
        .position(|n| n == raw)
        .ok_or_else(|| parse_err(line, format!("label {raw:?} is neither an index nor a class name")))
}

pub fn parse_dataset_csv(text: &str) -> Result<LoadedDataset, IoError> {
    let mut preamble_lines = 0;
    let mut fields: Vec<(String, String, usize)> = Vec::new();
    let mut body_start = 0;
    for (idx, line) in text.split_inclusive('\n').enumerate() {
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            preamble_lines = idx + 1;
            body_start += line.len();
            let rest = rest.trim();
            if rest.is_empty() {
                continue;
            }
            let (key, value) = rest
                .split_once('=')
                .ok_or_else(|| parse_err(idx + 1, format!("preamble line {trimmed:?} is not key=value")))?;
            fields.push((key.trim().to_owned(), value.trim().to_owned(), idx + 1));
        } else {
            break;
        }
    }

    let mut num_classes = None;
    let mut binary_mode = false;
    let mut class_names = None;
    let mut malignancy = None;
    for (key, value, line) in fields {
        match key.as_str() {
            "num_classes" => {
                num_classes = Some(
                    value
                        .parse::<usize>()
                        .map_err(|e| parse_err(line, format!("num_classes: {e}")))?,
                )
            }
            "binary_mode" => {
                binary_mode = value
                    .parse::<bool>()
                    .map_err(|e| parse_err(line, format!("binary_mode: {e}")))?
            }
            "class_names" => class_names = Some(value.split(',').map(|s| s.trim().to_owned()).collect()),
            "malignancy" => {
                malignancy = Some(
                    value
                        .split(',')
                        .map(|s| s.parse::<Malignancy>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| parse_err(line, e.to_string()))?,
                )
            }
            _ => log::warn!("line {line}: ignoring unknown preamble key {key:?}"),
        }
    }
    let header = DatasetHeader {
        num_classes: num_classes.ok_or(IoError::MissingField("num_classes"))?,
        binary_mode,
        class_names,
        malignancy,
    };
    let names = header.class_names_or_default();

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(&text.as_bytes()[body_start..]);
    let columns = reader
        .headers()
        .map_err(|e| parse_err(preamble_lines + 1, e.to_string()))?
        .clone();
    if columns.len() < 2 || &columns[columns.len() - 1] != "label" {
        return Err(parse_err(
            preamble_lines + 1,
            "header must be z0,...,zK-1,label",
        ));
    }
    let width = columns.len() - 1;

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize) + preamble_lines;
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize) + preamble_lines;
        if record.len() != width + 1 {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", width + 1, record.len()),
            ));
        }
        let logits = record
            .iter()
            .take(width)
            .map(|s| s.parse::<f64>().map_err(|e| parse_err(line, format!("logit {s:?}: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        labels.push(parse_label(&record[width], &names, line)?);
        rows.push(logits);
    }
    finish(header, names, rows, labels, width)
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonLabel {
    Index(usize),
    Name(String),
}

#[derive(Deserialize)]
struct JsonRecord {
    logits: Vec<f64>,
    label: JsonLabel,
}

pub fn parse_dataset_jsonl(text: &str) -> Result<LoadedDataset, IoError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let header: DatasetHeader = serde_json::from_str(first).map_err(|e| parse_err(1, format!("header: {e}")))?;
    let names = header.class_names_or_default();

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut width = None;
    for (idx, line) in lines {
        let line_no = idx + 1;
        let rec: JsonRecord = serde_json::from_str(line).map_err(|e| parse_err(line_no, e.to_string()))?;
        let w = *width.get_or_insert(rec.logits.len());
        if rec.logits.len() != w {
            return Err(parse_err(
                line_no,
                format!("expected {w} logits, found {}", rec.logits.len()),
            ));
        }
        labels.push(match rec.label {
            JsonLabel::Index(k) => k,
            JsonLabel::Name(s) => parse_label(&s, &names, line_no)?,
        });
        rows.push(rec.logits);
    }
    let width = width.unwrap_or(if header.binary_mode { 1 } else { header.num_classes });
    finish(header, names, rows, labels, width)
}

fn finish(
    header: DatasetHeader,
    class_names: Vec<String>,
    mut rows: Vec<Vec<f64>>,
    labels: Vec<usize>,
    width: usize,
) -> Result<LoadedDataset, IoError> {
    let mut converted_two_column = false;
    if header.binary_mode {
        if header.num_classes != 2 {
            return Err(ValidationError::ShapeMismatch(format!(
                "binary_mode requires num_classes = 2, got {}",
                header.num_classes
            ))
            .into());
        }
        match width {
            1 => {}
            2 => {
                log::info!("folding two-column binary logits to z = z1 - z0");
                for row in &mut rows {
                    *row = vec![row[1] - row[0]];
                }
                converted_two_column = true;
            }
            w => {
                return Err(ValidationError::ShapeMismatch(format!(
                    "binary_mode expects 1 or 2 logit columns, found {w}"
                ))
                .into())
            }
        }
    } else if width != header.num_classes {
        return Err(ValidationError::ShapeMismatch(format!(
            "{width} logit columns for num_classes = {}",
            header.num_classes
        ))
        .into());
    }

    let dataset = if rows.is_empty() {
        if header.binary_mode {
            LogitDataset::binary(Vec::new(), Vec::new())?
        } else {
            LogitDataset::multiclass(Vec::new(), Vec::new(), header.num_classes)?
        }
    } else {
        validate_dataset(&rows, &labels, header.num_classes)?
    };
    if class_names.len() != header.num_classes {
        return Err(ValidationError::ShapeMismatch(format!(
            "{} class names for {} classes",
            class_names.len(),
            header.num_classes
        ))
        .into());
    }
    let taxonomy = match header.malignancy {
        Some(flags) => Some(ClassTaxonomy::new(class_names.clone(), flags)?),
        None => None,
    };
    Ok(LoadedDataset {
        dataset,
        taxonomy,
        class_names,
        converted_two_column,
    })
}

/// 17 significant digits: enough for an exact f64 round trip.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn dataset_to_csv(dataset: &LogitDataset, header: &DatasetHeader) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# num_classes={}", header.num_classes);
    let _ = writeln!(out, "# binary_mode={}", header.binary_mode);
    if let Some(names) = &header.class_names {
        let _ = writeln!(out, "# class_names={}", names.join(","));
    }
    if let Some(flags) = &header.malignancy {
        let flags: Vec<&str> = flags.iter().map(|m| m.as_str()).collect();
        let _ = writeln!(out, "# malignancy={}", flags.join(","));
    }
    let cols: Vec<String> = (0..dataset.width()).map(|k| format!("z{k}")).collect();
    let _ = writeln!(out, "{},label", cols.join(","));
    for (row, &label) in dataset.rows().zip(dataset.labels()) {
        for z in row {
            out.push_str(&fmt_f64(*z));
            out.push(',');
        }
        let _ = writeln!(out, "{label}");
    }
    out
}

pub fn dataset_to_jsonl(dataset: &LogitDataset, header: &DatasetHeader) -> Result<String, IoError> {
    #[derive(Serialize)]
    struct Rec<'a> {
        logits: &'a [f64],
        label: usize,
    }
    let mut out = serde_json::to_string(header)?;
    out.push('\n');
    for (row, &label) in dataset.rows().zip(dataset.labels()) {
        out.push_str(&serde_json::to_string(&Rec { logits: row, label })?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_dataset(
    path: &Path,
    dataset: &LogitDataset,
    header: &DatasetHeader,
    format: DatasetFormat,
) -> Result<(), IoError> {
    let body = match format {
        DatasetFormat::Csv => dataset_to_csv(dataset, header),
        DatasetFormat::Jsonl => dataset_to_jsonl(dataset, header)?,
    };
    write_atomic(path, body.as_bytes())
}

/// Sidecar with the true posterior of every generated example: `p0,...,pK-1`.
pub fn write_oracle(path: &Path, oracle: &SynthOracle) -> Result<(), IoError> {
    let mut out = String::new();
    let k = oracle.posterior(0).len();
    let cols: Vec<String> = (0..k).map(|c| format!("p{c}")).collect();
    let _ = writeln!(out, "{}", cols.join(","));
    for i in 0..oracle.len() {
        let row: Vec<String> = oracle.posterior(i).as_slice().iter().map(|&p| fmt_f64(p)).collect();
        let _ = writeln!(out, "{}", row.join(","));
    }
    write_atomic(path, out.as_bytes())
}

/// Cost matrix CSV: header `action,<class names>`, one row per action.
pub fn parse_cost_matrix_csv(text: &str, class_names: Option<&[String]>) -> Result<CostMatrix, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
    if header.len() < 3 {
        return Err(parse_err(1, "header must be action,<class names...>"));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_owned).collect();
    if let Some(names) = class_names {
        if columns != names {
            return Err(parse_err(
                1,
                format!("cost matrix classes {columns:?} do not match dataset classes {names:?}"),
            ));
        }
    }
    let mut actions = Vec::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() != header.len() {
            return Err(parse_err(
                line,
                format!("expected {} fields, found {}", header.len(), record.len()),
            ));
        }
        actions.push(record[0].to_owned());
        rows.push(
            record
                .iter()
                .skip(1)
                .map(|s| s.parse::<f64>().map_err(|e| parse_err(line, format!("cost {s:?}: {e}"))))
                .collect::<Result<Vec<_>, _>>()?,
        );
    }
    Ok(CostMatrix::new(rows, actions)?)
}

pub fn read_cost_matrix(path: &Path, class_names: Option<&[String]>) -> Result<CostMatrix, IoError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    parse_cost_matrix_csv(&text, class_names)
}

pub fn cost_matrix_to_csv(costs: &CostMatrix, class_names: &[String]) -> String {
    let mut out = format!("action,{}\n", class_names.join(","));
    for (name, row) in costs.action_names().iter().zip(costs.rows()) {
        let cells: Vec<String> = row.iter().map(|c| c.to_string()).collect();
        let _ = writeln!(out, "{name},{}", cells.join(","));
    }
    out
}

/// `sha256:<hex>` of the bytes of `path`.
pub fn file_digest(path: &Path) -> Result<String, IoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    Ok(bytes_digest(&bytes))
}

pub fn bytes_digest(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for b in hash {
        let _ = write!(hex, "{b:02x}");
    }
    format!("sha256:{hex}")
}

/// Top-level layout shared by every JSON report.
#[derive(Debug, Clone, Serialize)]
pub struct Report<C: Serialize, R: Serialize> {
    pub schema_version: u32,
    pub command: &'static str,
    pub input_digest: String,
    pub config: C,
    pub results: R,
}

impl<C: Serialize, R: Serialize> Report<C, R> {
    pub fn new(command: &'static str, input_digest: String, config: C, results: R) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            command,
            input_digest,
            config,
            results,
        }
    }
}

/// Pretty-printed JSON with a trailing newline; identical inputs give identical bytes.
pub fn report_to_string<T: Serialize>(report: &T) -> Result<String, IoError> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    Ok(s)
}

pub fn write_report<T: Serialize>(report: &T, path: &Path) -> Result<(), IoError> {
    write_atomic(path, report_to_string(report)?.as_bytes())
}

/// Writes to a temporary file in the target directory and renames it into
/// place, so `path` either keeps its old content or holds the full new one.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(path))?;
    tmp.write_all(bytes).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| IoError::Io {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_bitwise() {
        let ds = LogitDataset::binary(vec![0.1, -1.0 / 3.0, 1e-300, 123_456.789], vec![0, 1, 1, 0]).unwrap();
        let text = dataset_to_csv(&ds, &DatasetHeader::for_dataset(&ds));
        let back = parse_dataset_csv(&text).unwrap();
        assert_eq!(back.dataset, ds);
        assert!(back.taxonomy.is_none());
    }

    #[test]
    fn jsonl_with_seven_class_taxonomy() {
        let text = concat!(
            r#"{"num_classes":7,"binary_mode":false,"class_names":["nv","bkl","df","mel","bcc","ak","scc"],"malignancy":"benign,benign,benign,malignant,malignant,malignant,malignant"}"#,
            "\n",
            r#"{"logits":[1,0,0,0,0,0,0],"label":0}"#,
            "\n",
            r#"{"logits":[0,0,0,2,0,0,0.5],"label":"mel"}"#,
            "\n"
        );
        let loaded = parse_dataset_jsonl(text).unwrap();
        let tax = loaded.taxonomy.unwrap();
        let benign = tax.malignancy().iter().filter(|&&m| m == Malignancy::Benign).count();
        assert_eq!((benign, tax.len() - benign), (3, 4));
        assert_eq!(loaded.dataset.labels(), &[0, 3]);
    }

    #[test]
    fn two_column_binary_export_is_folded() {
        let text = "# num_classes=2\n# binary_mode=true\nz0,z1,label\n0.5,2.0,1\n1.0,-1.0,0\n";
        let loaded = parse_dataset_csv(text).unwrap();
        assert!(loaded.converted_two_column);
        assert!(loaded.dataset.is_binary());
        assert_eq!(loaded.dataset.logits(), &[1.5, -2.0]);
    }

    #[test]
    fn truncated_record_reports_line() {
        let text = "# num_classes=3\n# binary_mode=false\nz0,z1,z2,label\n0,1,2,0\n0,1\n";
        match parse_dataset_csv(text) {
            Err(IoError::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("expected parse error, got {other:?}"),
        }
        let text = "{\"num_classes\":2,\"binary_mode\":true}\n{\"logits\":[1.0],\"label\":1}\n{\"logits\":[1.0],\n";
        assert!(matches!(parse_dataset_jsonl(text), Err(IoError::Parse { line: 3, .. })));
    }

    #[test]
    fn missing_num_classes() {
        assert!(matches!(
            parse_dataset_csv("z0,label\n0.1,0\n"),
            Err(IoError::MissingField("num_classes"))
        ));
    }

    #[test]
    fn validation_errors_are_wrapped() {
        let text = "# num_classes=2\nz0,z1,label\n0.1,NaN,0\n";
        assert!(matches!(
            parse_dataset_csv(text),
            Err(IoError::Validation(ValidationError::NonFiniteLogit { row: 0, col: 1 }))
        ));
    }

    #[test]
    fn string_labels_resolve_through_class_names() {
        let text = "# num_classes=2\n# class_names=neg,pos\n# malignancy=benign,malignant\nz0,z1,label\n0,1,pos\n1,0,neg\n";
        let loaded = parse_dataset_csv(text).unwrap();
        assert_eq!(loaded.dataset.labels(), &[1, 0]);
        assert!(loaded.require_taxonomy().is_ok());
        let bad = "# num_classes=2\nz0,z1,label\n0,1,maybe\n";
        assert!(matches!(parse_dataset_csv(bad), Err(IoError::Parse { line: 3, .. })));
    }

    #[test]
    fn missing_taxonomy_names_the_field() {
        let loaded = parse_dataset_csv("# num_classes=2\nz0,z1,label\n0,1,1\n").unwrap();
        let err = loaded.require_taxonomy().unwrap_err();
        assert!(err.to_string().contains("malignancy"));
    }

    #[test]
    fn cost_matrix_csv() {
        let names = vec!["benign".to_string(), "malignant".to_string()];
        let text = "action,benign,malignant\nbenign,0,9\nmalignant,1,0\n";
        let m = parse_cost_matrix_csv(text, Some(&names)).unwrap();
        assert_eq!(m.cost(0, 1), 9.0);
        assert_eq!(parse_cost_matrix_csv(&cost_matrix_to_csv(&m, &names), Some(&names)).unwrap(), m);
        let wrong = vec!["a".to_string(), "b".to_string()];
        assert!(parse_cost_matrix_csv(text, Some(&wrong)).is_err());
        assert!(parse_cost_matrix_csv("action,a,b\nx,0,-1\ny,1,0\n", None).is_err());
    }

    #[test]
    fn digest_tracks_content() {
        assert_eq!(bytes_digest(b"abc"), bytes_digest(b"abc"));
        assert_ne!(bytes_digest(b"abc"), bytes_digest(b"abd"));
        assert!(bytes_digest(b"").starts_with("sha256:e3b0c442"));
    }

    #[test]
    fn atomic_write_replaces_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), b"two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
