//! On-disk layout:
//!
//! ```text
//! <root>/journal/<session>.jsonl        live sessions, one event per line
//! <root>/logs/YYYY-MM-DD/<session>.json finalized logs
//! ```
//!
//! The first journal line is the log header (the document with no events).
//! A crash leaves the journal behind; `recover` turns it into a log holding
//! every event that was written before the crash.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;
use walkdir::WalkDir;

use super::metrics::AutoMetrics;
use super::types::{DialogueLog, LogEvent, QuestionnaireRecord, LOG_FORMAT};
use crate::session::questionnaire::{validate_answers, QuestionnaireError};
use crate::session::token::is_well_formed;
use crate::time::SimTime;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("{path}: malformed log: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("session {0} has no outcome yet")]
    NotClosed(String),
    #[error(transparent)]
    Questionnaire(#[from] QuestionnaireError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |e| StoreError::Io { path: path.to_path_buf(), message: e.to_string() }
}

/// Receives each log event as it happens.
pub trait EventSink: Send {
    fn begin(&mut self, header: &DialogueLog) -> Result<(), String>;
    fn append(&mut self, event: &LogEvent) -> Result<(), String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Durability {
    /// fsync after every event.
    #[default]
    Sync,
    /// Flush to the OS only. Enough for simulations.
    Flush,
}

#[derive(Debug)]
pub struct Journal {
    path: PathBuf,
    file: File,
    durability: Durability,
}

impl Journal {
    pub fn path(&self) -> &Path {
        &self.path
    }

    fn write_line<T: serde::Serialize>(&mut self, value: &T) -> Result<(), String> {
        let mut line = serde_json::to_vec(value).map_err(|e| e.to_string())?;
        line.push(b'\n');
        self.file.write_all(&line).map_err(|e| e.to_string())?;
        self.file.flush().map_err(|e| e.to_string())?;
        if self.durability == Durability::Sync {
            self.file.sync_data().map_err(|e| e.to_string())?;
        }
        Ok(())
    }
}

impl EventSink for Journal {
    fn begin(&mut self, header: &DialogueLog) -> Result<(), String> {
        let mut header = header.clone();
        header.events.clear();
        header.outcome = None;
        header.metrics = None;
        header.questionnaire = None;
        self.write_line(&header)
    }

    fn append(&mut self, event: &LogEvent) -> Result<(), String> {
        self.write_line(event)
    }
}

/// Reads a journal back. A torn final line (the crash happened mid-write)
/// is dropped; anything malformed before that is an error.
pub fn read_journal(path: &Path) -> Result<DialogueLog, StoreError> {
    let file = File::open(path).map_err(io_err(path))?;
    let lines: Vec<String> = BufReader::new(file).lines().collect::<Result<_, _>>().map_err(io_err(path))?;
    let malformed = |message: String| StoreError::Malformed { path: path.to_path_buf(), message };
    let (head, rest) = lines.split_first().ok_or_else(|| malformed("empty journal".into()))?;
    let mut log: DialogueLog = serde_json::from_str(head).map_err(|e| malformed(format!("header: {e}")))?;
    let last = rest.len().saturating_sub(1);
    for (i, line) in rest.iter().enumerate() {
        match serde_json::from_str::<LogEvent>(line) {
            Ok(e) => log.events.push(e),
            Err(_) if i == last => break,
            Err(e) => return Err(malformed(format!("line {}: {e}", i + 2))),
        }
    }
    Ok(log)
}

#[derive(Debug)]
pub struct LogStore {
    root: PathBuf,
    durability: Durability,
    /// token -> path of the finalized log
    tokens: HashMap<String, PathBuf>,
}

impl LogStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<LogStore, StoreError> {
        Self::open_with(root, Durability::Sync)
    }

    pub fn open_with(root: impl Into<PathBuf>, durability: Durability) -> Result<LogStore, StoreError> {
        let root = root.into();
        for dir in [root.join("logs"), root.join("journal")] {
            fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        }
        let mut store = LogStore { root, durability, tokens: HashMap::new() };
        for path in json_files(&store.logs_dir()) {
            if let Ok(log) = read_log(&path) {
                if let Some(t) = log.token() {
                    store.tokens.insert(t.to_string(), path);
                }
            }
        }
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn logs_dir(&self) -> PathBuf {
        self.root.join("logs")
    }

    fn journal_path(&self, session_id: &str) -> PathBuf {
        self.root.join("journal").join(format!("{session_id}.jsonl"))
    }

    /// Starts a journal for a new session.
    pub fn journal(&self, session_id: &str) -> Result<Journal, StoreError> {
        check_id(session_id)?;
        let path = self.journal_path(session_id);
        let file = OpenOptions::new().create_new(true).append(true).open(&path).map_err(io_err(&path))?;
        Ok(Journal { path, file, durability: self.durability })
    }

    pub fn log_path(&self, log: &DialogueLog) -> PathBuf {
        let day = chrono::DateTime::from_timestamp_millis(log.created_at.millis() as i64)
            .map(|d| d.format("%Y-%m-%d").to_string())
            .unwrap_or_else(|| "undated".into());
        self.logs_dir().join(day).join(format!("{}.json", log.session_id))
    }

    /// Writes the closed session's log with its metrics and drops the
    /// journal.
    pub fn finalize(&mut self, log: &DialogueLog) -> Result<PathBuf, StoreError> {
        let outcome = log.outcome.as_ref().ok_or_else(|| StoreError::NotClosed(log.session_id.clone()))?;
        let token = outcome.token.clone();
        let path = self.persist(log)?;
        self.tokens.insert(token, path.clone());
        let journal = self.journal_path(&log.session_id);
        if journal.exists() {
            fs::remove_file(&journal).map_err(io_err(&journal))?;
        }
        Ok(path)
    }

    fn persist(&self, log: &DialogueLog) -> Result<PathBuf, StoreError> {
        check_id(&log.session_id)?;
        let mut log = log.clone();
        log.metrics = Some(log.compute_metrics());
        let path = self.log_path(&log);
        write_atomic(&path, &log)?;
        Ok(path)
    }

    /// Turns leftover journals into logs without an outcome. Returns the
    /// recovered session ids.
    pub fn recover(&mut self) -> Result<Vec<String>, StoreError> {
        let dir = self.root.join("journal");
        let mut entries: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(io_err(&dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        entries.sort();
        let mut ids = Vec::new();
        for path in entries {
            let log = read_journal(&path)?;
            self.persist(&log)?;
            fs::remove_file(&path).map_err(io_err(&path))?;
            ids.push(log.session_id);
        }
        Ok(ids)
    }

    pub fn verify_token(&self, token: &str) -> Option<String> {
        let path = self.tokens.get(token)?;
        read_log(path).ok().map(|l| l.session_id)
    }

    /// Finds a finalized log by session id.
    pub fn load(&self, session_id: &str) -> Option<DialogueLog> {
        if check_id(session_id).is_err() {
            return None;
        }
        let name = format!("{session_id}.json");
        json_files(&self.logs_dir())
            .into_iter()
            .find(|p| p.file_name().is_some_and(|n| n == name.as_str()))
            .and_then(|p| read_log(&p).ok())
    }

    /// Embeds questionnaire answers in the log the token belongs to.
    pub fn submit_questionnaire(
        &mut self,
        token: &str,
        answers: &[i64],
        free_text: Option<String>,
        now: SimTime,
    ) -> Result<QuestionnaireRecord, StoreError> {
        let path = self.tokens.get(token).cloned().ok_or(QuestionnaireError::UnknownToken)?;
        let mut log = read_log(&path)?;
        if log.questionnaire.is_some() {
            return Err(QuestionnaireError::AlreadySubmitted.into());
        }
        let answers = validate_answers(answers)?;
        let free_text = free_text.map(|t| t.trim().to_string()).filter(|t| !t.is_empty());
        let record = QuestionnaireRecord { answers, free_text, submitted_at: now };
        log.questionnaire = Some(record.clone());
        write_atomic(&path, &log)?;
        Ok(record)
    }
}

/// Session ids become file names.
fn check_id(id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::Io { path: PathBuf::from(id), message: "invalid session id".into() })
    }
}

fn write_atomic(path: &Path, log: &DialogueLog) -> Result<(), StoreError> {
    let dir = path.parent().expect("log paths have a parent");
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io_err(dir))?;
    let body = serde_json::to_vec_pretty(log).expect("logs serialize");
    tmp.write_all(&body).map_err(io_err(path))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| StoreError::Io { path: path.to_path_buf(), message: e.to_string() })?;
    Ok(())
}

fn read_log(path: &Path) -> Result<DialogueLog, StoreError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| StoreError::Malformed { path: path.to_path_buf(), message: e.to_string() })
}

fn json_files(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = WalkDir::new(dir)
        .into_iter()
        .filter_map(Result::ok)
        .filter(|e| e.file_type().is_file() && e.path().extension().is_some_and(|x| x == "json"))
        .map(|e| e.into_path())
        .collect();
    files.sort();
    files
}

fn metrics_match(a: &AutoMetrics, b: &AutoMetrics) -> bool {
    let close = |x: Option<f64>, y: Option<f64>| match (x, y) {
        (Some(x), Some(y)) => (x - y).abs() <= 1e-9,
        (None, None) => true,
        _ => false,
    };
    a.turns_total == b.turns_total
        && a.turns_operator == b.turns_operator
        && a.turns_wizard == b.turns_wizard
        && close(a.operator_turn_length_words, b.operator_turn_length_words)
        && close(a.wizard_typed_fraction, b.wizard_typed_fraction)
        && (a.duration_s - b.duration_s).abs() <= 1e-9
        && a.disconnected == b.disconnected
        && a.resolved == b.resolved
}

/// Structural checks on a finalized log.
pub fn validate_log(log: &DialogueLog) -> Result<(), String> {
    if log.format != LOG_FORMAT {
        return Err(format!("unsupported format {}", log.format));
    }
    let outcome = log.outcome.as_ref().ok_or("no outcome (interrupted session)")?;
    if !is_well_formed(&outcome.token) {
        return Err(format!("malformed token {:?}", outcome.token));
    }
    let mut prev: Option<&LogEvent> = None;
    let mut fsm_state: Option<&str> = None;
    for e in &log.events {
        if let Some(p) = prev {
            if e.seq <= p.seq {
                return Err(format!("seq {} follows {}", e.seq, p.seq));
            }
            if e.ts < p.ts {
                return Err(format!("event {} goes back in time", e.seq));
            }
        }
        if let (Some(before), Some(current)) = (e.fsm_state_before.as_deref(), fsm_state) {
            if before != current {
                return Err(format!("event {} starts in {before:?} but the dialogue was in {current:?}", e.seq));
            }
        }
        if let Some(after) = e.fsm_state_after.as_deref() {
            fsm_state = Some(after);
        }
        prev = Some(e);
    }
    let metrics = log.metrics.as_ref().ok_or("no metrics block")?;
    let recomputed = log.compute_metrics();
    if !metrics_match(metrics, &recomputed) {
        return Err(format!("metrics block {metrics:?} differs from recomputed {recomputed:?}"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedFile {
    pub path: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub loaded: usize,
    pub skipped: Vec<SkippedFile>,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    /// Sorted by session id.
    pub logs: Vec<DialogueLog>,
    pub report: LoadReport,
}

/// Loads every `*.json` under `dir`. Bad files are reported, never fatal.
pub fn load_corpus(dir: &Path) -> Corpus {
    let mut corpus = Corpus::default();
    for path in json_files(dir) {
        match read_log(&path).map_err(|e| e.to_string()).and_then(|l| validate_log(&l).map(|_| l)) {
            Ok(log) => corpus.logs.push(log),
            Err(reason) => corpus.report.skipped.push(SkippedFile { path, reason }),
        }
    }
    corpus.logs.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    corpus.report.loaded = corpus.logs.len();
    corpus
}
