//! Durable annotation store backed by an append-only log.
//!
//! Log line: `seq \t segment_id \t annotator \t score \t severities \t
//! source_flag \t comment \t request_id`, fields escaped like dataset lines,
//! severities comma-separated. An empty comment or request id means none.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use qeforge_core::corpus::{Origin, QualityScore, ScoredSegment, SegmentId};
use qeforge_core::text::{escape_field, unescape_field};
use serde::Serialize;
use thiserror::Error;

use crate::rubric::{effective_score, lint_source, Severity, SourceFlag, ILLOGICAL_SOURCE_COMMENT};

pub const LOG_FILE: &str = "annotations.log";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path} line {line}: {message}")]
    CorruptLog {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate segment id {0} in queue")]
    DuplicateSegment(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

impl FieldError {
    pub fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_owned(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SubmitError {
    #[error("unknown segment {0}")]
    UnknownSegment(String),
    #[error("invalid submission: {}", .0.iter().map(|e| format!("{}: {}", e.field, e.message)).collect::<Vec<_>>().join("; "))]
    Validation(Vec<FieldError>),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// What an annotator sends for one segment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submission {
    pub annotator: String,
    pub score: u8,
    pub severities: Vec<Severity>,
    pub comment: Option<String>,
    /// Client token for one segment view. Resending a token returns the
    /// record it first produced instead of appending another.
    pub request_id: Option<String>,
}

pub const MAX_REQUEST_ID_LEN: usize = 128;

impl Submission {
    pub fn validate(&self) -> Result<(), Vec<FieldError>> {
        let mut errors = Vec::new();
        if self.annotator.trim().is_empty() {
            errors.push(FieldError::new("annotator", "must not be empty"));
        } else if self.annotator.chars().any(char::is_control) {
            errors.push(FieldError::new("annotator", "must not contain control characters"));
        }
        if !(1..=5).contains(&self.score) {
            errors.push(FieldError::new("score", format!("{} is outside 1..=5", self.score)));
        }
        if let Some(r) = &self.request_id {
            if r.is_empty() || r.len() > MAX_REQUEST_ID_LEN || r.chars().any(char::is_control) {
                errors.push(FieldError::new(
                    "request_id",
                    format!("must be 1 to {MAX_REQUEST_ID_LEN} bytes without control characters"),
                ));
            }
        }
        if errors.is_empty() {
            Ok(())
        } else {
            Err(errors)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AnnotationRecord {
    pub segment_id: SegmentId,
    pub annotator: String,
    pub score: u8,
    pub severities: Vec<Severity>,
    pub source_flag: SourceFlag,
    pub comment: Option<String>,
    pub request_id: Option<String>,
    pub sequence_number: u64,
}

impl AnnotationRecord {
    pub fn effective_score(&self) -> u8 {
        effective_score(self.score, self.source_flag)
    }

    /// A 1 given to an illogical source; its translation was not judged.
    pub fn translation_unreviewed(&self) -> bool {
        self.score == 1 && self.comment.as_deref() == Some(ILLOGICAL_SOURCE_COMMENT)
    }

    pub fn encode(&self) -> String {
        let severities: Vec<&str> = self.severities.iter().map(|s| s.as_str()).collect();
        [
            self.sequence_number.to_string(),
            escape_field(self.segment_id.as_str()),
            escape_field(&self.annotator),
            self.score.to_string(),
            severities.join(","),
            self.source_flag.to_string(),
            self.comment.as_deref().map(escape_field).unwrap_or_default(),
            self.request_id.as_deref().map(escape_field).unwrap_or_default(),
        ]
        .join("\t")
    }

    pub fn decode(line: &str) -> Result<Self, String> {
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 8 {
            return Err(format!("expected 8 fields, found {}", cols.len()));
        }
        let text = |c: &str| unescape_field(c).map_err(|e| e.to_string());
        let severities = if cols[4].is_empty() {
            Vec::new()
        } else {
            cols[4].split(',').map(str::parse).collect::<Result<_, _>>()?
        };
        let comment = text(cols[6])?;
        let request_id = text(cols[7])?;
        Ok(AnnotationRecord {
            sequence_number: cols[0]
                .parse()
                .map_err(|_| format!("bad sequence number {:?}", cols[0]))?,
            segment_id: SegmentId::new(text(cols[1])?).map_err(|e| e.to_string())?,
            annotator: text(cols[2])?,
            score: cols[3].parse().map_err(|_| format!("bad score {:?}", cols[3]))?,
            severities,
            source_flag: cols[5].parse()?,
            comment: (!comment.is_empty()).then_some(comment),
            request_id: (!request_id.is_empty()).then_some(request_id),
        })
    }
}

/// Outcome of [`AnnotationStore::submit`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Submitted {
    pub record: AnnotationRecord,
    /// The request id was seen before and nothing new was logged.
    pub replayed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Progress {
    pub total: usize,
    pub annotated_by_annotator: BTreeMap<String, usize>,
}

struct Inner {
    log: File,
    records: Vec<AnnotationRecord>,
    /// Latest record index per (segment, annotator).
    latest: BTreeMap<(String, String), usize>,
    done: BTreeMap<String, BTreeSet<String>>,
    /// Record index per (annotator, request id).
    by_request: HashMap<(String, String), usize>,
    next_seq: u64,
}

impl Inner {
    fn index(&mut self, rec: AnnotationRecord) {
        let key = (rec.segment_id.as_str().to_owned(), rec.annotator.clone());
        self.next_seq = self.next_seq.max(rec.sequence_number + 1);
        self.done
            .entry(rec.annotator.clone())
            .or_default()
            .insert(key.0.clone());
        if let Some(r) = &rec.request_id {
            self.by_request
                .insert((rec.annotator.clone(), r.clone()), self.records.len());
        }
        self.latest.insert(key, self.records.len());
        self.records.push(rec);
    }
}

pub struct AnnotationStore {
    queue: BTreeMap<String, (ScoredSegment, SourceFlag)>,
    log_path: PathBuf,
    inner: Mutex<Inner>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

impl AnnotationStore {
    /// Loads the queue and replays the log. A final line without its newline
    /// is a torn write: it is dropped and cut from the file.
    pub fn open(queue: Vec<ScoredSegment>, log_path: &Path) -> Result<Self, StoreError> {
        let mut q = BTreeMap::new();
        for seg in queue {
            let flag = lint_source(&seg.source);
            let id = seg.id.as_str().to_owned();
            if q.insert(id.clone(), (seg, flag)).is_some() {
                return Err(StoreError::DuplicateSegment(id));
            }
        }
        let mut log = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(log_path)
            .map_err(io_err(log_path))?;
        let mut text = String::new();
        log.read_to_string(&mut text).map_err(io_err(log_path))?;
        let complete = text.rfind('\n').map_or(0, |i| i + 1);
        if complete < text.len() {
            log.set_len(complete as u64).map_err(io_err(log_path))?;
            log.sync_all().map_err(io_err(log_path))?;
        }
        log.seek(SeekFrom::End(0)).map_err(io_err(log_path))?;
        let mut inner = Inner {
            log,
            records: Vec::new(),
            latest: BTreeMap::new(),
            done: BTreeMap::new(),
            by_request: HashMap::new(),
            next_seq: 1,
        };
        for (i, line) in text[..complete].lines().enumerate() {
            let corrupt = |message: String| StoreError::CorruptLog {
                path: log_path.to_owned(),
                line: i + 1,
                message,
            };
            let rec = AnnotationRecord::decode(line).map_err(corrupt)?;
            if !q.contains_key(rec.segment_id.as_str()) {
                return Err(corrupt(format!("segment {} is not in the queue", rec.segment_id)));
            }
            if let Some(r) = &rec.request_id {
                if inner.by_request.contains_key(&(rec.annotator.clone(), r.clone())) {
                    return Err(corrupt(format!("request id {r:?} logged twice")));
                }
            }
            if rec.sequence_number < inner.next_seq {
                return Err(corrupt(format!("sequence number {} out of order", rec.sequence_number)));
            }
            inner.index(rec);
        }
        Ok(AnnotationStore {
            queue: q,
            log_path: log_path.to_owned(),
            inner: Mutex::new(inner),
        })
    }

    pub fn log_path(&self) -> &Path {
        &self.log_path
    }

    pub fn segment(&self, id: &str) -> Option<&ScoredSegment> {
        self.queue.get(id).map(|(s, _)| s)
    }

    pub fn source_flag(&self, id: &str) -> Option<SourceFlag> {
        self.queue.get(id).map(|(_, f)| *f)
    }

    /// The record is durable in the log before this returns `Ok`.
    pub fn submit(&self, segment_id: &str, sub: Submission) -> Result<Submitted, SubmitError> {
        let (_, flag) = self
            .queue
            .get(segment_id)
            .ok_or_else(|| SubmitError::UnknownSegment(segment_id.to_owned()))?;
        sub.validate().map_err(SubmitError::Validation)?;
        let mut inner = self.inner.lock().expect("store lock poisoned");
        if let Some(r) = &sub.request_id {
            if let Some(&idx) = inner.by_request.get(&(sub.annotator.clone(), r.clone())) {
                let earlier = &inner.records[idx];
                if earlier.segment_id.as_str() != segment_id {
                    return Err(SubmitError::Validation(vec![FieldError::new(
                        "request_id",
                        format!("already used for segment {}", earlier.segment_id),
                    )]));
                }
                return Ok(Submitted {
                    record: earlier.clone(),
                    replayed: true,
                });
            }
        }
        let rec = AnnotationRecord {
            segment_id: SegmentId::new(segment_id).map_err(|_| SubmitError::UnknownSegment(segment_id.into()))?,
            annotator: sub.annotator,
            score: sub.score,
            severities: sub.severities,
            source_flag: *flag,
            comment: sub.comment.filter(|c| !c.is_empty()),
            request_id: sub.request_id,
            sequence_number: inner.next_seq,
        };
        let mut line = rec.encode();
        line.push('\n');
        let path = &self.log_path;
        inner.log.write_all(line.as_bytes()).map_err(io_err(path))?;
        inner.log.sync_data().map_err(io_err(path))?;
        inner.index(rec.clone());
        Ok(Submitted {
            record: rec,
            replayed: false,
        })
    }

    /// Lowest-id segment this annotator has not scored yet.
    pub fn next_segment(&self, annotator: &str) -> Option<ScoredSegment> {
        let inner = self.inner.lock().expect("store lock poisoned");
        let done = inner.done.get(annotator);
        self.queue
            .iter()
            .find(|(id, _)| !done.is_some_and(|d| d.contains(*id)))
            .map(|(_, (s, _))| s.clone())
    }

    pub fn progress(&self) -> Progress {
        let inner = self.inner.lock().expect("store lock poisoned");
        Progress {
            total: self.queue.len(),
            annotated_by_annotator: inner.done.iter().map(|(a, d)| (a.clone(), d.len())).collect(),
        }
    }

    /// Every acknowledged record, in sequence order.
    pub fn records(&self) -> Vec<AnnotationRecord> {
        self.inner.lock().expect("store lock poisoned").records.clone()
    }

    /// The judgment that counts for each annotated segment: the primary
    /// annotator's latest when there is one, else the latest by anyone.
    pub fn effective_records(&self, primary: Option<&str>) -> Vec<AnnotationRecord> {
        let inner = self.inner.lock().expect("store lock poisoned");
        let mut chosen: BTreeMap<&str, &AnnotationRecord> = BTreeMap::new();
        for &idx in inner.latest.values() {
            let rec = &inner.records[idx];
            let id = rec.segment_id.as_str();
            let replace = match chosen.get(id) {
                None => true,
                Some(cur) => {
                    let cur_primary = primary == Some(cur.annotator.as_str());
                    let new_primary = primary == Some(rec.annotator.as_str());
                    (new_primary && !cur_primary)
                        || (new_primary == cur_primary && rec.sequence_number > cur.sequence_number)
                }
            };
            if replace {
                chosen.insert(id, rec);
            }
        }
        chosen.into_values().cloned().collect()
    }

    /// One `human_ranked` record per annotated segment, in id order, carrying
    /// the effective score.
    pub fn export_ranked(&self, primary: Option<&str>) -> Vec<ScoredSegment> {
        self.effective_records(primary)
            .into_iter()
            .map(|rec| {
                let (seg, _) = &self.queue[rec.segment_id.as_str()];
                ScoredSegment {
                    id: seg.id.clone(),
                    source: seg.source.clone(),
                    target: seg.target.clone(),
                    score: Some(QualityScore::new(rec.effective_score()).expect("validated score")),
                    origin: Origin::HumanRanked,
                    parent: None,
                    engine: seg.engine.clone(),
                    agreement: seg.agreement,
                    error_count: 0,
                }
            })
            .collect()
    }
}
