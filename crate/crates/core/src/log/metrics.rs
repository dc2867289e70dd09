//! Metrics computed from a log's events and outcome.

use serde::{Deserialize, Serialize};

use crate::session::Role;

use super::types::{DialogueLog, LogEvent};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoMetrics {
    pub turns_total: u32,
    pub turns_operator: u32,
    pub turns_wizard: u32,
    /// Mean words per operator turn; absent when the operator never spoke.
    pub operator_turn_length_words: Option<f64>,
    /// Share of wizard turns that were typed; absent with no wizard turns.
    pub wizard_typed_fraction: Option<f64>,
    pub duration_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disconnected: Option<Role>,
    pub resolved: bool,
}

/// Words in a message: whitespace-separated tokens, ignoring tokens made
/// only of punctuation or symbols.
pub fn word_count(text: &str) -> usize {
    text.split_whitespace().filter(|tok| tok.chars().any(char::is_alphanumeric)).count()
}

pub fn compute_metrics(events: &[LogEvent], log: &DialogueLog) -> AutoMetrics {
    let mut turns_operator = 0u32;
    let mut operator_words = 0usize;
    let mut turns_wizard = 0u32;
    let mut typed = 0u32;
    for e in events {
        if e.is_operator_turn() {
            turns_operator += 1;
            operator_words += word_count(e.text.as_deref().unwrap_or(""));
        } else if e.is_wizard_turn() {
            turns_wizard += 1;
            if e.typed {
                typed += 1;
            }
        }
    }
    let outcome = log.outcome.as_ref();
    AutoMetrics {
        turns_total: turns_operator + turns_wizard,
        turns_operator,
        turns_wizard,
        operator_turn_length_words: (turns_operator > 0).then(|| operator_words as f64 / turns_operator as f64),
        wizard_typed_fraction: (turns_wizard > 0).then(|| typed as f64 / turns_wizard as f64),
        duration_s: outcome.map_or(0.0, |o| o.duration_played_ms as f64 / 1000.0),
        disconnected: outcome.and_then(|o| o.disconnected),
        resolved: outcome.is_some_and(|o| o.resolved),
    }
}

impl DialogueLog {
    pub fn compute_metrics(&self) -> AutoMetrics {
        compute_metrics(&self.events, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_words() {
        assert_eq!(word_count("Hi Fred, I am _"), 4);
        assert_eq!(word_count("  ok  "), 1);
        assert_eq!(word_count("... ?!"), 0);
        assert_eq!(word_count("Use husky 2"), 3);
        assert_eq!(word_count(""), 0);
    }
}
