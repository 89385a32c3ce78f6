//! Experiment metadata: ingestion, filtering, and accuracy transforms.
//!
//! One [`ExperimentRecord`] describes one trained model evaluated on one
//! (upstream task, downstream task, shots) combination. Records are
//! immutable after ingestion; every operation here is a pure function.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Required CSV columns, in canonical order.
pub const REQUIRED_COLUMNS: [&str; 7] = [
    "experiment_id",
    "arch_family",
    "upstream_task",
    "downstream_task",
    "shots",
    "upstream_accuracy",
    "downstream_accuracy",
];

/// Prefix that routes extra CSV columns into `hyperparams`.
pub const HYPERPARAM_PREFIX: &str = "hp_";

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("row {row}: malformed field `{field}`: {detail}")]
    MalformedRow {
        row: usize,
        field: String,
        detail: String,
    },
    #[error("row {row}: {field} = {value} is outside [0, 1]")]
    AccuracyOutOfRange {
        row: usize,
        field: &'static str,
        value: f64,
    },
    #[error("row {row}: empty experiment_id")]
    EmptyId { row: usize },
    #[error("row {row}: duplicate record key (experiment_id `{id}`, tasks, shots)")]
    Duplicate { row: usize, id: String },
    #[error("missing required column `{0}`")]
    MissingColumn(String),
    #[error("input has no header row")]
    MissingHeader,
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// One trained model's accuracies on an (upstream, downstream) task pair.
///
/// `shots` is the number of examples per class available to the downstream
/// probe; 0 means fine-tuning or unspecified. Hyperparameters are kept as
/// opaque strings and never interpreted by the toolkit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment_id: String,
    pub arch_family: String,
    pub upstream_task: String,
    pub downstream_task: String,
    pub shots: u32,
    pub upstream_accuracy: f64,
    pub downstream_accuracy: f64,
    #[serde(default)]
    pub hyperparams: BTreeMap<String, String>,
}

impl ExperimentRecord {
    /// Uniqueness key within one ingested dataset. The same experiment id
    /// may legitimately recur across task pairs and shot counts (one
    /// pretrained model evaluated on many downstream tasks); a repeat of
    /// the full key is a duplicate.
    pub fn dedup_key(&self) -> (&str, &str, &str, u32) {
        (
            &self.experiment_id,
            &self.upstream_task,
            &self.downstream_task,
            self.shots,
        )
    }

    fn validate(&self, row: usize) -> Result<(), RecordError> {
        if self.experiment_id.is_empty() {
            return Err(RecordError::EmptyId { row });
        }
        for (field, value) in [
            ("upstream_accuracy", self.upstream_accuracy),
            ("downstream_accuracy", self.downstream_accuracy),
        ] {
            if !(0.0..=1.0).contains(&value) || value.is_nan() {
                return Err(RecordError::AccuracyOutOfRange { row, field, value });
            }
        }
        Ok(())
    }
}

/// Input format for [`parse_records`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    Csv,
    Jsonl,
}

/// Parsed records plus non-fatal ingestion warnings (e.g. ignored columns).
#[derive(Debug, Clone)]
pub struct ParsedRecords {
    pub records: Vec<ExperimentRecord>,
    pub warnings: Vec<String>,
}

/// Parse experiment records from a byte stream.
///
/// CSV input must carry a header with the [`REQUIRED_COLUMNS`]; extra
/// columns prefixed `hp_` land in `hyperparams` (prefix stripped, empty
/// cells omitted), other extras are ignored with a warning. JSONL input is
/// one object per line with the same field names. Row order is preserved;
/// out-of-range accuracies and duplicate record keys are rejected.
pub fn parse_records<R: Read>(
    input: R,
    format: RecordFormat,
) -> Result<ParsedRecords, RecordError> {
    let parsed = match format {
        RecordFormat::Csv => parse_csv(input)?,
        RecordFormat::Jsonl => parse_jsonl(input)?,
    };
    let mut seen = BTreeSet::new();
    for (i, record) in parsed.records.iter().enumerate() {
        let row = i + 2; // 1-based, after the header line
        record.validate(row)?;
        let key = (
            record.experiment_id.clone(),
            record.upstream_task.clone(),
            record.downstream_task.clone(),
            record.shots,
        );
        if !seen.insert(key) {
            return Err(RecordError::Duplicate {
                row,
                id: record.experiment_id.clone(),
            });
        }
    }
    Ok(parsed)
}

fn parse_csv<R: Read>(input: R) -> Result<ParsedRecords, RecordError> {
    let mut reader = csv::ReaderBuilder::new().flexible(false).from_reader(input);
    let headers = reader.headers().map_err(|_| RecordError::MissingHeader)?.clone();

    let mut required = [usize::MAX; REQUIRED_COLUMNS.len()];
    let mut hp_columns = Vec::new();
    let mut warnings = Vec::new();
    for (idx, name) in headers.iter().enumerate() {
        if let Some(pos) = REQUIRED_COLUMNS.iter().position(|c| *c == name) {
            required[pos] = idx;
        } else if let Some(key) = name.strip_prefix(HYPERPARAM_PREFIX) {
            hp_columns.push((idx, key.to_string()));
        } else {
            warnings.push(format!("ignoring unknown column `{name}`"));
        }
    }
    for (pos, idx) in required.iter().enumerate() {
        if *idx == usize::MAX {
            return Err(RecordError::MissingColumn(REQUIRED_COLUMNS[pos].to_string()));
        }
    }

    let mut records = Vec::new();
    for (i, result) in reader.records().enumerate() {
        let row = i + 2;
        let raw = result?;
        let field = |pos: usize| raw.get(required[pos]).unwrap_or("").to_string();
        let shots_text = field(4);
        let shots = shots_text.parse::<u32>().map_err(|e| RecordError::MalformedRow {
            row,
            field: "shots".to_string(),
            detail: format!("`{shots_text}`: {e}"),
        })?;
        let accuracy = |pos: usize, name: &str| -> Result<f64, RecordError> {
            let text = field(pos);
            text.parse::<f64>().map_err(|e| RecordError::MalformedRow {
                row,
                field: name.to_string(),
                detail: format!("`{text}`: {e}"),
            })
        };
        let mut hyperparams = BTreeMap::new();
        for (idx, key) in &hp_columns {
            if let Some(value) = raw.get(*idx) {
                if !value.is_empty() {
                    hyperparams.insert(key.clone(), value.to_string());
                }
            }
        }
        records.push(ExperimentRecord {
            experiment_id: field(0),
            arch_family: field(1),
            upstream_task: field(2),
            downstream_task: field(3),
            shots,
            upstream_accuracy: accuracy(5, "upstream_accuracy")?,
            downstream_accuracy: accuracy(6, "downstream_accuracy")?,
            hyperparams,
        });
    }
    Ok(ParsedRecords { records, warnings })
}

fn parse_jsonl<R: Read>(input: R) -> Result<ParsedRecords, RecordError> {
    let reader = BufReader::new(input);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let row = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ExperimentRecord =
            serde_json::from_str(&line).map_err(|e| RecordError::MalformedRow {
                row,
                field: "json".to_string(),
                detail: e.to_string(),
            })?;
        records.push(record);
    }
    Ok(ParsedRecords { records, warnings: Vec::new() })
}

/// Write records in the canonical CSV layout: required columns followed by
/// `hp_<key>` columns for the sorted union of hyperparameter keys.
pub fn write_csv<W: Write>(records: &[ExperimentRecord], out: W) -> Result<(), RecordError> {
    let mut hp_keys = BTreeSet::new();
    for record in records {
        hp_keys.extend(record.hyperparams.keys().cloned());
    }
    let mut writer = csv::Writer::from_writer(out);
    let mut header: Vec<String> = REQUIRED_COLUMNS.iter().map(|c| c.to_string()).collect();
    header.extend(hp_keys.iter().map(|k| format!("{HYPERPARAM_PREFIX}{k}")));
    writer.write_record(&header)?;
    for record in records {
        let mut row = vec![
            record.experiment_id.clone(),
            record.arch_family.clone(),
            record.upstream_task.clone(),
            record.downstream_task.clone(),
            record.shots.to_string(),
            record.upstream_accuracy.to_string(),
            record.downstream_accuracy.to_string(),
        ];
        for key in &hp_keys {
            row.push(record.hyperparams.get(key).cloned().unwrap_or_default());
        }
        writer.write_record(&row)?;
    }
    writer.flush()?;
    Ok(())
}

/// Write records as JSONL, one object per line.
pub fn write_jsonl<W: Write>(records: &[ExperimentRecord], mut out: W) -> Result<(), RecordError> {
    for record in records {
        serde_json::to_writer(&mut out, record).map_err(std::io::Error::other)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Conjunctive record filter: a record matches iff every present field matches.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RecordSelector {
    pub upstream_task: Option<String>,
    pub downstream_task: Option<String>,
    pub shots: Option<u32>,
    pub arch_family: Option<String>,
    /// Inclusive bounds on upstream accuracy.
    pub upstream_accuracy_range: Option<(f64, f64)>,
}

impl RecordSelector {
    pub fn matches(&self, record: &ExperimentRecord) -> bool {
        if let Some(us) = &self.upstream_task {
            if *us != record.upstream_task {
                return false;
            }
        }
        if let Some(ds) = &self.downstream_task {
            if *ds != record.downstream_task {
                return false;
            }
        }
        if let Some(shots) = self.shots {
            if shots != record.shots {
                return false;
            }
        }
        if let Some(arch) = &self.arch_family {
            if *arch != record.arch_family {
                return false;
            }
        }
        if let Some((lo, hi)) = self.upstream_accuracy_range {
            if record.upstream_accuracy < lo || record.upstream_accuracy > hi {
                return false;
            }
        }
        true
    }
}

/// Keep exactly the records the selector matches, preserving input order.
pub fn filter_records(
    records: &[ExperimentRecord],
    selector: &RecordSelector,
) -> Vec<ExperimentRecord> {
    records.iter().filter(|r| selector.matches(r)).cloned().collect()
}

/// Accuracy axis transforms used when emitting plot-ready data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScaleKind {
    /// Identity.
    Linear,
    /// `ln(p / (1 - p))`, defined on (0, 1).
    Logit,
    /// `-ln(1 - p)`, defined on [0, 1). Avoids the logit's sensitivity to
    /// values near zero.
    NegLogComplement,
}

#[derive(Debug, Error, PartialEq)]
pub enum ScaleError {
    #[error("accuracy {0} is outside [0, 1]")]
    OutOfRange(f64),
    #[error("{value} is outside the domain of the {kind:?} scale")]
    Domain { kind: ScaleKind, value: f64 },
}

/// Error of an accuracy: `1 - accuracy`.
pub fn to_error(accuracy: f64) -> Result<f64, ScaleError> {
    if !(0.0..=1.0).contains(&accuracy) || accuracy.is_nan() {
        return Err(ScaleError::OutOfRange(accuracy));
    }
    Ok(1.0 - accuracy)
}

/// Apply an accuracy scale transform.
pub fn scale_accuracy(p: f64, kind: ScaleKind) -> Result<f64, ScaleError> {
    match kind {
        ScaleKind::Linear => {
            if !(0.0..=1.0).contains(&p) || p.is_nan() {
                return Err(ScaleError::OutOfRange(p));
            }
            Ok(p)
        }
        ScaleKind::Logit => {
            if p <= 0.0 || p >= 1.0 || p.is_nan() {
                return Err(ScaleError::Domain { kind, value: p });
            }
            Ok((p / (1.0 - p)).ln())
        }
        ScaleKind::NegLogComplement => {
            if !(0.0..1.0).contains(&p) || p.is_nan() {
                return Err(ScaleError::Domain { kind, value: p });
            }
            Ok(-(1.0 - p).ln())
        }
    }
}

/// Invert [`scale_accuracy`].
pub fn unscale_accuracy(v: f64, kind: ScaleKind) -> Result<f64, ScaleError> {
    match kind {
        ScaleKind::Linear => Ok(v),
        ScaleKind::Logit => Ok(1.0 / (1.0 + (-v).exp())),
        ScaleKind::NegLogComplement => {
            if v < 0.0 || v.is_nan() {
                return Err(ScaleError::Domain { kind, value: v });
            }
            Ok(-(-v).exp_m1())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV_SAMPLE: &str = "\
experiment_id,arch_family,upstream_task,downstream_task,shots,upstream_accuracy,downstream_accuracy
e1,vit,jft,imagenet,25,0.45,0.80
";

    #[test]
    fn parses_single_csv_row() {
        let parsed = parse_records(CSV_SAMPLE.as_bytes(), RecordFormat::Csv).unwrap();
        assert_eq!(parsed.records.len(), 1);
        let r = &parsed.records[0];
        assert_eq!(r.experiment_id, "e1");
        assert_eq!(r.arch_family, "vit");
        assert_eq!(r.upstream_task, "jft");
        assert_eq!(r.downstream_task, "imagenet");
        assert_eq!(r.shots, 25);
        assert_eq!(r.upstream_accuracy, 0.45);
        assert_eq!(r.downstream_accuracy, 0.80);
        assert!(r.hyperparams.is_empty());
    }

    #[test]
    fn rejects_out_of_range_accuracy() {
        let csv = "\
experiment_id,arch_family,upstream_task,downstream_task,shots,upstream_accuracy,downstream_accuracy
e1,vit,jft,imagenet,25,1.2,0.80
";
        let err = parse_records(csv.as_bytes(), RecordFormat::Csv).unwrap_err();
        match err {
            RecordError::AccuracyOutOfRange { row, field, value } => {
                assert_eq!(row, 2);
                assert_eq!(field, "upstream_accuracy");
                assert_eq!(value, 1.2);
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn jsonl_preserves_file_order() {
        let jsonl = concat!(
            r#"{"experiment_id":"a","arch_family":"vit","upstream_task":"jft","downstream_task":"pets","shots":1,"upstream_accuracy":0.3,"downstream_accuracy":0.4}"#,
            "\n",
            r#"{"experiment_id":"b","arch_family":"vit","upstream_task":"jft","downstream_task":"pets","shots":1,"upstream_accuracy":0.35,"downstream_accuracy":0.45}"#,
            "\n",
            r#"{"experiment_id":"c","arch_family":"vit","upstream_task":"jft","downstream_task":"pets","shots":1,"upstream_accuracy":0.4,"downstream_accuracy":0.5}"#,
            "\n",
        );
        let parsed = parse_records(jsonl.as_bytes(), RecordFormat::Jsonl).unwrap();
        let ids: Vec<&str> = parsed.records.iter().map(|r| r.experiment_id.as_str()).collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn hp_columns_land_in_hyperparams_and_unknown_columns_warn() {
        let csv = "\
experiment_id,arch_family,upstream_task,downstream_task,shots,upstream_accuracy,downstream_accuracy,hp_lr,comment
e1,vit,jft,imagenet,25,0.45,0.80,0.003,hello
";
        let parsed = parse_records(csv.as_bytes(), RecordFormat::Csv).unwrap();
        assert_eq!(parsed.records[0].hyperparams.get("lr").unwrap(), "0.003");
        assert_eq!(parsed.warnings.len(), 1);
        assert!(parsed.warnings[0].contains("comment"));
    }

    #[test]
    fn missing_required_column_is_named() {
        let csv = "experiment_id,arch_family,upstream_task,downstream_task,shots,upstream_accuracy\ne1,vit,jft,imagenet,25,0.45\n";
        let err = parse_records(csv.as_bytes(), RecordFormat::Csv).unwrap_err();
        assert!(matches!(err, RecordError::MissingColumn(ref c) if c == "downstream_accuracy"));
    }

    #[test]
    fn duplicate_full_key_rejected_but_id_reuse_across_tasks_allowed() {
        let csv = "\
experiment_id,arch_family,upstream_task,downstream_task,shots,upstream_accuracy,downstream_accuracy
e1,vit,jft,imagenet,25,0.45,0.80
e1,vit,jft,pets,25,0.45,0.70
";
        let parsed = parse_records(csv.as_bytes(), RecordFormat::Csv).unwrap();
        assert_eq!(parsed.records.len(), 2);

        let csv_dup = "\
experiment_id,arch_family,upstream_task,downstream_task,shots,upstream_accuracy,downstream_accuracy
e1,vit,jft,imagenet,25,0.45,0.80
e1,vit,jft,imagenet,25,0.46,0.81
";
        let err = parse_records(csv_dup.as_bytes(), RecordFormat::Csv).unwrap_err();
        assert!(matches!(err, RecordError::Duplicate { row: 3, .. }));
    }

    fn sample_records() -> Vec<ExperimentRecord> {
        (0..5)
            .map(|i| ExperimentRecord {
                experiment_id: format!("e{i}"),
                arch_family: if i % 2 == 0 { "vit" } else { "mixer" }.to_string(),
                upstream_task: "jft".to_string(),
                downstream_task: "pets".to_string(),
                shots: if i < 2 { 25 } else { 1 },
                upstream_accuracy: 0.1 * (i as f64 + 1.0),
                downstream_accuracy: 0.2 * (i as f64 + 1.0) % 1.0,
                hyperparams: BTreeMap::new(),
            })
            .collect()
    }

    #[test]
    fn selector_matches_subset_in_order() {
        let records = sample_records();
        let selector = RecordSelector { shots: Some(25), ..Default::default() };
        let got = filter_records(&records, &selector);
        assert_eq!(got.len(), 2);
        assert_eq!(got[0].experiment_id, "e0");
        assert_eq!(got[1].experiment_id, "e1");
    }

    #[test]
    fn empty_selector_is_identity() {
        let records = sample_records();
        assert_eq!(filter_records(&records, &RecordSelector::default()), records);
    }

    #[test]
    fn selector_matching_nothing_yields_empty() {
        let records = sample_records();
        let selector = RecordSelector {
            arch_family: Some("resnet".to_string()),
            ..Default::default()
        };
        assert!(filter_records(&records, &selector).is_empty());
    }

    #[test]
    fn to_error_basics() {
        assert_eq!(to_error(0.0).unwrap(), 1.0);
        assert_eq!(to_error(1.0).unwrap(), 0.0);
        assert_eq!(to_error(0.25).unwrap(), 0.75);
        assert!(to_error(1.2).is_err());
        assert!(to_error(-0.1).is_err());
    }

    #[test]
    fn scale_accuracy_reference_values() {
        assert_eq!(scale_accuracy(0.5, ScaleKind::Logit).unwrap(), 0.0);
        assert_eq!(scale_accuracy(0.0, ScaleKind::NegLogComplement).unwrap(), 0.0);
        // ln(0.9/0.1) = ln 9
        let logit09 = scale_accuracy(0.9, ScaleKind::Logit).unwrap();
        assert!((logit09 - 2.1972245773362196).abs() < 1e-12);
    }

    #[test]
    fn scale_domain_violations() {
        assert!(scale_accuracy(0.0, ScaleKind::Logit).is_err());
        assert!(scale_accuracy(1.0, ScaleKind::Logit).is_err());
        assert!(scale_accuracy(1.0, ScaleKind::NegLogComplement).is_err());
    }

    #[test]
    fn unscale_basics_and_roundtrip() {
        assert_eq!(unscale_accuracy(0.0, ScaleKind::Logit).unwrap(), 0.5);
        assert_eq!(unscale_accuracy(0.0, ScaleKind::NegLogComplement).unwrap(), 0.0);
        for kind in [ScaleKind::Linear, ScaleKind::Logit, ScaleKind::NegLogComplement] {
            let p = 0.73;
            let back = unscale_accuracy(scale_accuracy(p, kind).unwrap(), kind).unwrap();
            assert!((back - p).abs() <= 1e-12, "{kind:?}: {back}");
        }
    }

    #[test]
    fn scalings_strictly_increasing_on_grid() {
        for kind in [ScaleKind::Linear, ScaleKind::Logit, ScaleKind::NegLogComplement] {
            let mut prev = f64::NEG_INFINITY;
            for i in 1..1000 {
                let p = i as f64 * 1e-3;
                let v = scale_accuracy(p, kind).unwrap();
                assert!(v > prev, "{kind:?} not increasing at p={p}");
                prev = v;
            }
        }
    }

    #[test]
    fn csv_roundtrip_identity() {
        let csv = "\
experiment_id,arch_family,upstream_task,downstream_task,shots,upstream_accuracy,downstream_accuracy,hp_lr,hp_wd
e1,vit,jft,imagenet,25,0.45123,0.80001,0.003,
e2,mixer,jft,pets,1,0.3333333333333333,0.5,,0.1
";
        let parsed = parse_records(csv.as_bytes(), RecordFormat::Csv).unwrap();
        let mut buffer = Vec::new();
        write_csv(&parsed.records, &mut buffer).unwrap();
        let reparsed = parse_records(buffer.as_slice(), RecordFormat::Csv).unwrap();
        assert_eq!(parsed.records, reparsed.records);
    }

    #[test]
    fn jsonl_roundtrip_identity() {
        let records = sample_records();
        let mut buffer = Vec::new();
        write_jsonl(&records, &mut buffer).unwrap();
        let reparsed = parse_records(buffer.as_slice(), RecordFormat::Jsonl).unwrap();
        assert_eq!(records, reparsed.records);
    }

    #[test]
    fn csv_and_jsonl_agree() {
        let jsonl = r#"{"experiment_id":"e1","arch_family":"vit","upstream_task":"jft","downstream_task":"imagenet","shots":25,"upstream_accuracy":0.45,"downstream_accuracy":0.8,"hyperparams":{"lr":"0.003"}}"#;
        let from_jsonl = parse_records(jsonl.as_bytes(), RecordFormat::Jsonl).unwrap();
        let csv = "\
experiment_id,arch_family,upstream_task,downstream_task,shots,upstream_accuracy,downstream_accuracy,hp_lr
e1,vit,jft,imagenet,25,0.45,0.8,0.003
";
        let from_csv = parse_records(csv.as_bytes(), RecordFormat::Csv).unwrap();
        assert_eq!(from_jsonl.records, from_csv.records);
    }
}
