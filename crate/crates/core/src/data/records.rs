//! Behavioral record files.
//!
//! Two interchangeable encodings are supported: CSV with the header
//! `dataset_id,model_id,layer,magnitude,shots,trials,concept_consistent`
//! (or `mean_p` in place of the last column), and JSON lines carrying the same
//! fields. Every row is validated on ingest and errors name the row and field.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

pub const COLUMNS: [&str; 6] = ["dataset_id", "model_id", "layer", "magnitude", "shots", "trials"];
pub const COUNT_COLUMN: &str = "concept_consistent";
pub const MEAN_COLUMN: &str = "mean_p";

/// What was observed at a cell: a success count or an already averaged rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Count(u64),
    MeanP(f64),
}

impl Outcome {
    pub fn mean_p(&self, trials: u64) -> f64 {
        match *self {
            Outcome::Count(c) => c as f64 / trials as f64,
            Outcome::MeanP(p) => p,
        }
    }

    pub(crate) fn canonical_cmp(&self, other: &Outcome) -> Ordering {
        match (self, other) {
            (Outcome::Count(x), Outcome::Count(y)) => x.cmp(y),
            (Outcome::MeanP(x), Outcome::MeanP(y)) => x.total_cmp(y),
            (Outcome::Count(_), Outcome::MeanP(_)) => Ordering::Less,
            (Outcome::MeanP(_), Outcome::Count(_)) => Ordering::Greater,
        }
    }
}

/// One row of behavioral data.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviorRecord {
    pub dataset_id: String,
    pub model_id: String,
    /// Steering layer; carried along but not used by the model.
    pub layer: i64,
    pub magnitude: f64,
    pub shots: u32,
    pub trials: u64,
    pub outcome: Outcome,
}

impl BehaviorRecord {
    pub fn validate(&self) -> std::result::Result<(), (&'static str, String)> {
        if !self.magnitude.is_finite() {
            return Err(("magnitude", "must be finite".into()));
        }
        if self.trials == 0 {
            return Err(("trials", "must be at least 1".into()));
        }
        match self.outcome {
            Outcome::Count(c) if c > self.trials => Err((
                COUNT_COLUMN,
                format!("{c} exceeds trials ({})", self.trials),
            )),
            Outcome::MeanP(p) if !(0.0..=1.0).contains(&p) => {
                Err((MEAN_COLUMN, format!("{p} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecordFormat {
    Csv,
    JsonLines,
}

impl RecordFormat {
    /// Guesses the format from the file extension (`.jsonl`/`.ndjson` vs anything else).
    pub fn from_path(path: &Path) -> RecordFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson") => RecordFormat::JsonLines,
            _ => RecordFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IngestWarning {
    /// The file held no data rows.
    EmptyFile,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ingest {
    pub records: Vec<BehaviorRecord>,
    pub warnings: Vec<IngestWarning>,
}

pub fn load_records(path: &Path, format: RecordFormat) -> Result<Ingest> {
    let records = match format {
        RecordFormat::Csv => load_csv(path)?,
        RecordFormat::JsonLines => load_json_lines(path)?,
    };
    let warnings = if records.is_empty() {
        vec![IngestWarning::EmptyFile]
    } else {
        Vec::new()
    };
    Ok(Ingest { records, warnings })
}

struct RowContext<'a> {
    path: &'a Path,
    row: usize,
}

impl RowContext<'_> {
    fn err(&self, field: &str, reason: impl Into<String>) -> Error {
        Error::Row {
            path: self.path.to_path_buf(),
            row: self.row,
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    fn finish(&self, record: BehaviorRecord) -> Result<BehaviorRecord> {
        record.validate().map_err(|(field, reason)| self.err(field, reason))?;
        Ok(record)
    }
}

fn parse_field<T: std::str::FromStr>(ctx: &RowContext, field: &str, raw: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    raw.trim()
        .parse()
        .map_err(|e| ctx.err(field, format!("cannot parse {raw:?}: {e}")))
}

fn load_csv(path: &Path) -> Result<Vec<BehaviorRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(file);
    let format_err = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let headers = reader.headers().map_err(|e| format_err(e.to_string()))?.clone();
    if headers.is_empty() {
        return Ok(Vec::new());
    }
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let mut index = [0usize; 6];
    for (slot, name) in index.iter_mut().zip(COLUMNS) {
        *slot = column(name).ok_or_else(|| format_err(format!("missing column `{name}`")))?;
    }
    let count_col = column(COUNT_COLUMN);
    let mean_col = column(MEAN_COLUMN);
    if count_col.is_none() && mean_col.is_none() {
        return Err(format_err(format!(
            "need a `{COUNT_COLUMN}` or `{MEAN_COLUMN}` column"
        )));
    }

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let ctx = RowContext { path, row: i + 1 };
        let row = row.map_err(|e| ctx.err("*", e.to_string()))?;
        let get = |col: usize, name: &str| {
            row.get(col)
                .ok_or_else(|| ctx.err(name, "missing value"))
        };
        let present = |col: Option<usize>| col.and_then(|c| row.get(c)).filter(|v| !v.trim().is_empty());
        let trials: u64 = parse_field(&ctx, "trials", get(index[5], "trials")?)?;
        let outcome = match (present(count_col), present(mean_col)) {
            (Some(c), _) => Outcome::Count(parse_field(&ctx, COUNT_COLUMN, c)?),
            (None, Some(p)) => Outcome::MeanP(parse_field(&ctx, MEAN_COLUMN, p)?),
            (None, None) => {
                return Err(ctx.err(COUNT_COLUMN, format!("neither {COUNT_COLUMN} nor {MEAN_COLUMN} given")))
            }
        };
        let record = BehaviorRecord {
            dataset_id: get(index[0], "dataset_id")?.to_string(),
            model_id: get(index[1], "model_id")?.to_string(),
            layer: parse_field(&ctx, "layer", get(index[2], "layer")?)?,
            magnitude: parse_field(&ctx, "magnitude", get(index[3], "magnitude")?)?,
            shots: parse_field(&ctx, "shots", get(index[4], "shots")?)?,
            trials,
            outcome,
        };
        records.push(ctx.finish(record)?);
    }
    Ok(records)
}

fn load_json_lines(path: &Path) -> Result<Vec<BehaviorRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    let mut row = 0;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        row += 1;
        let ctx = RowContext { path, row };
        let object: Map<String, Value> =
            serde_json::from_str(&line).map_err(|e| ctx.err("*", e.to_string()))?;
        records.push(ctx.finish(json_record(&ctx, &object)?)?);
    }
    Ok(records)
}

fn json_record(ctx: &RowContext, obj: &Map<String, Value>) -> Result<BehaviorRecord> {
    let field = |name: &str| obj.get(name).filter(|v| !v.is_null());
    let required = |name: &str| field(name).ok_or_else(|| ctx.err(name, "missing"));
    let string = |name: &str| -> Result<String> {
        required(name)?
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| ctx.err(name, "expected a string"))
    };
    let uint = |name: &str| -> Result<u64> {
        required(name)?
            .as_u64()
            .ok_or_else(|| ctx.err(name, "expected a non-negative integer"))
    };
    let real = |name: &str, v: &Value| -> Result<f64> {
        v.as_f64().ok_or_else(|| ctx.err(name, "expected a number"))
    };

    let outcome = match (field(COUNT_COLUMN), field(MEAN_COLUMN)) {
        (Some(_), _) => Outcome::Count(uint(COUNT_COLUMN)?),
        (None, Some(v)) => Outcome::MeanP(real(MEAN_COLUMN, v)?),
        (None, None) => {
            return Err(ctx.err(COUNT_COLUMN, format!("neither {COUNT_COLUMN} nor {MEAN_COLUMN} given")))
        }
    };
    let shots = uint("shots")?;
    Ok(BehaviorRecord {
        dataset_id: string("dataset_id")?,
        model_id: string("model_id")?,
        layer: required("layer")?
            .as_i64()
            .ok_or_else(|| ctx.err("layer", "expected an integer"))?,
        magnitude: real("magnitude", required("magnitude")?)?,
        shots: u32::try_from(shots).map_err(|_| ctx.err("shots", "too large"))?,
        trials: uint("trials")?,
        outcome,
    })
}

fn has_counts(records: &[BehaviorRecord]) -> (bool, bool) {
    let counts = records.iter().any(|r| matches!(r.outcome, Outcome::Count(_)));
    let means = records.iter().any(|r| matches!(r.outcome, Outcome::MeanP(_)));
    (counts, means)
}

/// Writes records in the requested format. Reals use the shortest decimal
/// rendering that reads back to the same bits.
pub fn write_records(path: &Path, format: RecordFormat, records: &[BehaviorRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(PathBuf::from(path), e);
    match format {
        RecordFormat::Csv => write_csv(&mut out, records).map_err(|e| io(e.into()))?,
        RecordFormat::JsonLines => {
            for r in records {
                writeln!(out, "{}", json_line(r)).map_err(io)?;
            }
        }
    }
    out.flush().map_err(io)
}

fn write_csv(out: &mut impl Write, records: &[BehaviorRecord]) -> csv::Result<()> {
    let (counts, means) = has_counts(records);
    let with_count = counts || !means;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    let mut header: Vec<&str> = COLUMNS.to_vec();
    if with_count {
        header.push(COUNT_COLUMN);
    }
    if means {
        header.push(MEAN_COLUMN);
    }
    w.write_record(&header)?;
    for r in records {
        let mut fields = vec![
            r.dataset_id.clone(),
            r.model_id.clone(),
            r.layer.to_string(),
            r.magnitude.to_string(),
            r.shots.to_string(),
            r.trials.to_string(),
        ];
        let (count, mean) = match r.outcome {
            Outcome::Count(c) => (c.to_string(), String::new()),
            Outcome::MeanP(p) => (String::new(), p.to_string()),
        };
        if with_count {
            fields.push(count);
        }
        if means {
            fields.push(mean);
        }
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

fn json_line(r: &BehaviorRecord) -> Value {
    let mut obj = Map::new();
    obj.insert("dataset_id".into(), r.dataset_id.clone().into());
    obj.insert("model_id".into(), r.model_id.clone().into());
    obj.insert("layer".into(), r.layer.into());
    obj.insert("magnitude".into(), r.magnitude.into());
    obj.insert("shots".into(), r.shots.into());
    obj.insert("trials".into(), r.trials.into());
    match r.outcome {
        Outcome::Count(c) => obj.insert(COUNT_COLUMN.into(), c.into()),
        Outcome::MeanP(p) => obj.insert(MEAN_COLUMN.into(), p.into()),
    };
    Value::Object(obj)
}
