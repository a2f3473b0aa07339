//! Append-only run storage.
//!
//! A store is a single file of newline-delimited JSON, one complete run per
//! line:
//!
//! ```text
//! {"key":{"algorithm":"de-a","function_id":1,"dimension":2,"instance_id":0,"repetition":0},
//!  "seed":123,"status":"ok","budget":4000,"wall_time":0.004,"events":[[1,37.5],[4,2.25]]}
//! ```
//!
//! (shown wrapped; on disk it is one line). `events` holds
//! `[evaluation, precision]` pairs for the improving evaluations only. Floats
//! use the shortest decimal that round-trips; an unbounded precision (the
//! first evaluation returned NaN or infinity) is written as the string
//! `"inf"`.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::runner::RunKey;
use crate::suite::FunctionId;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("run {0} is already stored")]
    DuplicateKey(RunKey),
    #[error("malformed record for {key}: {reason}")]
    Malformed { key: RunKey, reason: TrajectoryError },
    #[error("corrupt record at byte {offset} (line {line}): {reason}")]
    CorruptRecord {
        offset: u64,
        line: usize,
        reason: String,
    },
    #[error("storage is full: {0}")]
    StorageFull(io::Error),
    #[error("i/o failure on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl StoreError {
    fn io(path: &Path, source: io::Error) -> Self {
        if source.kind() == io::ErrorKind::StorageFull {
            StoreError::StorageFull(source)
        } else {
            StoreError::Io {
                path: path.to_path_buf(),
                source,
            }
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error("budget must be positive")]
    ZeroBudget,
    #[error("trajectory has no events")]
    Empty,
    #[error("first event is at evaluation {0}, expected 1")]
    FirstEvent(u64),
    #[error("evaluation indices not strictly increasing at event {0}")]
    NonIncreasingEval(usize),
    #[error("precision not strictly decreasing at event {0}")]
    NonDecreasingPrecision(usize),
    #[error("invalid precision {value} at event {index}")]
    InvalidPrecision { index: usize, value: f64 },
    #[error("event at evaluation {eval} exceeds budget {budget}")]
    BeyondBudget { eval: u64, budget: u64 },
}

/// One improvement: the best-so-far precision after evaluation `eval`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Event {
    pub eval: u64,
    pub precision: f64,
}

impl Serialize for Event {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(2)?;
        t.serialize_element(&self.eval)?;
        if self.precision.is_finite() {
            t.serialize_element(&self.precision)?;
        } else {
            t.serialize_element("inf")?;
        }
        t.end()
    }
}

impl<'de> Deserialize<'de> for Event {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Value {
            Number(f64),
            Text(String),
        }
        let (eval, value): (u64, Value) = Deserialize::deserialize(deserializer)?;
        let precision = match value {
            Value::Number(v) => v,
            Value::Text(s) if s == "inf" => f64::INFINITY,
            Value::Text(s) => return Err(de::Error::custom(format!("invalid precision `{s}`"))),
        };
        Ok(Event { eval, precision })
    }
}

/// Best-so-far precision of one run as a step function over evaluations.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub budget: u64,
    pub events: Vec<Event>,
}

impl Trajectory {
    pub fn new(budget: u64, events: Vec<Event>) -> Result<Self, TrajectoryError> {
        let t = Trajectory { budget, events };
        t.validate()?;
        Ok(t)
    }

    /// Checks the invariants of a complete trajectory.
    pub fn validate(&self) -> Result<(), TrajectoryError> {
        if self.events.is_empty() {
            return Err(TrajectoryError::Empty);
        }
        self.validate_prefix()
    }

    /// Like [`validate`](Self::validate) but accepts an empty event list,
    /// as left behind by a run that failed before its first evaluation.
    pub fn validate_prefix(&self) -> Result<(), TrajectoryError> {
        if self.budget == 0 {
            return Err(TrajectoryError::ZeroBudget);
        }
        let Some(first) = self.events.first() else {
            return Ok(());
        };
        if first.eval != 1 {
            return Err(TrajectoryError::FirstEvent(first.eval));
        }
        for (index, e) in self.events.iter().enumerate() {
            if e.precision.is_nan() || e.precision < 0.0 {
                return Err(TrajectoryError::InvalidPrecision {
                    index,
                    value: e.precision,
                });
            }
        }
        for (i, w) in self.events.windows(2).enumerate() {
            if w[1].eval <= w[0].eval {
                return Err(TrajectoryError::NonIncreasingEval(i + 1));
            }
            if w[1].precision >= w[0].precision {
                return Err(TrajectoryError::NonDecreasingPrecision(i + 1));
            }
        }
        let last = self.events.last().expect("non-empty").eval;
        if last > self.budget {
            return Err(TrajectoryError::BeyondBudget {
                eval: last,
                budget: self.budget,
            });
        }
        Ok(())
    }

    /// Precision of the last event with `eval <= t`; `None` before the
    /// first event.
    pub fn best_precision_at(&self, t: u64) -> Option<f64> {
        let idx = self.events.partition_point(|e| e.eval <= t);
        idx.checked_sub(1).map(|i| self.events[i].precision)
    }

    pub fn final_precision(&self) -> Option<f64> {
        self.events.last().map(|e| e.precision)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Ok,
    Failed,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub key: RunKey,
    pub seed: u64,
    pub trajectory: Trajectory,
    pub status: RunStatus,
    /// Seconds; informational only.
    pub wall_time: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Line {
    key: RunKey,
    seed: u64,
    status: RunStatus,
    budget: u64,
    wall_time: f64,
    events: Vec<Event>,
}

impl RunRecord {
    pub fn validate(&self) -> Result<(), StoreError> {
        let check = match self.status {
            RunStatus::Ok => self.trajectory.validate(),
            RunStatus::Failed => self.trajectory.validate_prefix(),
        };
        check.map_err(|reason| StoreError::Malformed {
            key: self.key.clone(),
            reason,
        })
    }

    /// One store line, without the trailing newline.
    pub fn to_line(&self) -> String {
        let line = Line {
            key: self.key.clone(),
            seed: self.seed,
            status: self.status,
            budget: self.trajectory.budget,
            wall_time: if self.wall_time.is_finite() { self.wall_time } else { 0.0 },
            events: self.trajectory.events.clone(),
        };
        serde_json::to_string(&line).expect("record serialization is infallible")
    }

    /// Parses and validates one store line.
    pub fn from_line(text: &str) -> Result<Self, String> {
        let line: Line = serde_json::from_str(text).map_err(|e| e.to_string())?;
        let record = RunRecord {
            key: line.key,
            seed: line.seed,
            trajectory: Trajectory {
                budget: line.budget,
                events: line.events,
            },
            status: line.status,
            wall_time: line.wall_time,
        };
        record.validate().map_err(|e| e.to_string())?;
        Ok(record)
    }
}

/// Single-writer handle on a store file.
#[derive(Debug)]
pub struct RecordStore {
    path: PathBuf,
    file: File,
    keys: BTreeSet<RunKey>,
}

impl RecordStore {
    /// Opens (creating if needed) a store for appending. Existing keys are
    /// indexed so duplicates are rejected; corrupt lines are ignored here and
    /// reported by [`load_records`].
    pub fn open(path: impl AsRef<Path>) -> Result<Self, StoreError> {
        let path = path.as_ref().to_path_buf();
        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&path)
            .map_err(|e| StoreError::io(&path, e))?;
        let mut keys = BTreeSet::new();
        let mut contents = String::new();
        file.read_to_string(&mut contents)
            .map_err(|e| StoreError::io(&path, e))?;
        for line in contents.lines() {
            if let Ok(record) = RunRecord::from_line(line) {
                keys.insert(record.key);
            }
        }
        // Terminate a torn final line so the next record starts cleanly.
        if !contents.is_empty() && !contents.ends_with('\n') {
            file.seek(SeekFrom::End(0)).map_err(|e| StoreError::io(&path, e))?;
            file.write_all(b"\n").map_err(|e| StoreError::io(&path, e))?;
        }
        Ok(RecordStore { path, file, keys })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn contains(&self, key: &RunKey) -> bool {
        self.keys.contains(key)
    }

    /// Validates and appends one record as a single complete line.
    pub fn append(&mut self, record: &RunRecord) -> Result<(), StoreError> {
        record.validate()?;
        if self.keys.contains(&record.key) {
            return Err(StoreError::DuplicateKey(record.key.clone()));
        }
        let mut line = record.to_line();
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| StoreError::io(&self.path, e))?;
        self.keys.insert(record.key.clone());
        Ok(())
    }

    /// Flushes file contents to stable storage.
    pub fn sync(&self) -> Result<(), StoreError> {
        self.file.sync_all().map_err(|e| StoreError::io(&self.path, e))
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Report corrupt lines in [`Loaded::skipped`] instead of failing.
    pub skip_corrupt: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SkippedRecord {
    pub offset: u64,
    pub line: usize,
    pub reason: String,
}

#[derive(Clone, Debug, Default)]
pub struct Loaded {
    /// Matching records in `RunKey` order.
    pub records: Vec<RunRecord>,
    pub skipped: Vec<SkippedRecord>,
}

impl IntoIterator for Loaded {
    type Item = RunRecord;
    type IntoIter = std::vec::IntoIter<RunRecord>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.into_iter()
    }
}

/// Loads every record whose key satisfies `filter`.
///
/// A final line without a terminating newline is an append in progress and
/// is not reported. A missing store file loads as empty.
pub fn load_records(
    path: impl AsRef<Path>,
    filter: impl Fn(&RunKey) -> bool,
    options: LoadOptions,
) -> Result<Loaded, StoreError> {
    let path = path.as_ref();
    let file = match File::open(path) {
        Ok(f) => f,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Loaded::default()),
        Err(e) => return Err(StoreError::io(path, e)),
    };
    let mut reader = BufReader::new(file);
    let mut loaded = Loaded::default();
    let mut seen = BTreeSet::new();
    let mut offset = 0u64;
    let mut buf = String::new();
    for line_no in 1.. {
        buf.clear();
        let n = reader
            .read_line(&mut buf)
            .map_err(|e| StoreError::io(path, e))?;
        if n == 0 || !buf.ends_with('\n') {
            break;
        }
        let text = buf.trim_end_matches(['\n', '\r']);
        if !text.trim().is_empty() {
            let parsed = RunRecord::from_line(text).and_then(|r| {
                if seen.insert(r.key.clone()) {
                    Ok(r)
                } else {
                    Err(format!("duplicate key {}", r.key))
                }
            });
            match parsed {
                Ok(record) => {
                    if filter(&record.key) {
                        loaded.records.push(record);
                    }
                }
                Err(reason) if options.skip_corrupt => loaded.skipped.push(SkippedRecord {
                    offset,
                    line: line_no,
                    reason,
                }),
                Err(reason) => {
                    return Err(StoreError::CorruptRecord {
                        offset,
                        line: line_no,
                        reason,
                    })
                }
            }
        }
        offset += n as u64;
    }
    loaded.records.sort_by(|a, b| a.key.cmp(&b.key));
    Ok(loaded)
}

pub const IOH_CSV_HEADER: [&str; 8] = [
    "suite",
    "function_id",
    "instance",
    "dimension",
    "algorithm",
    "run",
    "evaluations",
    "best_precision",
];

/// Suite name written to the `suite` column.
pub const SUITE_NAME: &str = "optbench";

/// Writes one CSV row per improvement event. Always writes the header.
pub fn export_ioh_csv<'a, W: Write>(
    records: impl IntoIterator<Item = &'a RunRecord>,
    out: W,
) -> Result<u64, StoreError> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(IOH_CSV_HEADER)?;
    let mut rows = 0;
    for record in records {
        let k = &record.key;
        for e in &record.trajectory.events {
            writer.write_record([
                SUITE_NAME.to_string(),
                k.function_id.0.to_string(),
                k.instance_id.to_string(),
                k.dimension.to_string(),
                k.algorithm.clone(),
                k.repetition.to_string(),
                e.eval.to_string(),
                format!("{:e}", e.precision),
            ])?;
            rows += 1;
        }
    }
    writer.flush().map_err(|e| StoreError::io(Path::new("<csv>"), e))?;
    Ok(rows)
}

#[derive(Deserialize)]
struct CsvRow {
    #[allow(dead_code)]
    suite: String,
    function_id: u32,
    instance: u32,
    dimension: usize,
    algorithm: String,
    run: u32,
    evaluations: u64,
    best_precision: String,
}

/// Reads an ioh-csv export back into per-run event lists, in `RunKey` order.
pub fn import_ioh_csv<R: Read>(input: R) -> Result<Vec<(RunKey, Vec<Event>)>, StoreError> {
    let mut reader = csv::Reader::from_reader(input);
    let mut runs: std::collections::BTreeMap<RunKey, Vec<Event>> = Default::default();
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let row = row?;
        let precision: f64 = row.best_precision.parse().map_err(|_| StoreError::CorruptRecord {
            offset: 0,
            line: i + 2,
            reason: format!("invalid precision `{}`", row.best_precision),
        })?;
        let key = RunKey {
            algorithm: row.algorithm,
            function_id: FunctionId(row.function_id),
            dimension: row.dimension,
            instance_id: row.instance,
            repetition: row.run,
        };
        runs.entry(key).or_default().push(Event {
            eval: row.evaluations,
            precision,
        });
    }
    Ok(runs.into_iter().collect())
}
