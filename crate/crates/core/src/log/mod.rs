//! Session logs: the JSON document, its metrics, and the on-disk store.

pub mod metrics;
pub mod replay;
pub mod store;
pub mod types;

pub use metrics::{compute_metrics, word_count, AutoMetrics};
pub use replay::check_transitions;
pub use store::{
    load_corpus, read_journal, validate_log, Corpus, Durability, EventSink, Journal, LoadReport, LogStore, SkippedFile,
    StoreError,
};
pub use types::{
    Actor, DialogueLog, EventKind, LogEvent, MilestoneRecord, ParticipantRecord, QuestionnaireRecord, ScenarioRef,
    SessionOutcome, LOG_FORMAT,
};
