//! Per-dialogue records and the corpus-level tables built from them.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;
use woz_core::fsm::{DaType, OptionKind};
use woz_core::log::{DialogueLog, EventKind};
use woz_core::session::questionnaire::oriented;

use crate::describe::{Sd, Summary};
use crate::mwu::{mann_whitney_u, Alternative, MwuResult};
use crate::pearson::point_biserial_r;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("the corpus is empty")]
    EmptyCorpus,
    #[error("dialogue act {0:?} has no type in the mapping")]
    UnmappedDialogueAct(String),
}

/// The numbers one dialogue contributes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DialogueRecord {
    pub session_id: String,
    pub turns: u32,
    pub operator_turns: u32,
    pub wizard_turns: u32,
    pub operator_turn_len_mean: Option<f64>,
    /// Share of wizard turns that were typed.
    pub typed_fraction: Option<f64>,
    /// The same share in percent.
    pub typed_percent: Option<f64>,
    pub resolved: bool,
    pub duration_s: f64,
    pub da_type_counts: BTreeMap<DaType, u32>,
    /// Questionnaire answers with the reversed question flipped.
    pub ratings: Option<[u8; 4]>,
}

/// Verbal predefined options chosen by the wizard, as (act, type) pairs.
fn wizard_acts(log: &DialogueLog) -> impl Iterator<Item = &str> {
    log.events
        .iter()
        .filter(|e| e.kind == EventKind::WizardOption && e.option_kind == Some(OptionKind::Verbal))
        .filter_map(|e| e.dialogue_act.as_deref())
}

fn type_of(map: &BTreeMap<String, DaType>, act: &str) -> Result<DaType, AnalysisError> {
    map.get(act).copied().ok_or_else(|| AnalysisError::UnmappedDialogueAct(act.to_string()))
}

impl DialogueRecord {
    pub fn from_log(log: &DialogueLog, map: &BTreeMap<String, DaType>) -> Result<DialogueRecord, AnalysisError> {
        let m = log.compute_metrics();
        let mut da_type_counts: BTreeMap<DaType, u32> = DaType::ALL.iter().map(|t| (*t, 0)).collect();
        for act in wizard_acts(log) {
            *da_type_counts.entry(type_of(map, act)?).or_default() += 1;
        }
        Ok(DialogueRecord {
            session_id: log.session_id.clone(),
            turns: m.turns_total,
            operator_turns: m.turns_operator,
            wizard_turns: m.turns_wizard,
            operator_turn_len_mean: m.operator_turn_length_words,
            typed_fraction: m.wizard_typed_fraction,
            typed_percent: m.wizard_typed_fraction.map(|f| f * 100.0),
            resolved: m.resolved,
            duration_s: m.duration_s,
            da_type_counts,
            ratings: log.questionnaire.as_ref().map(|q| oriented(q.answers)),
        })
    }
}

/// Interaction statistics (`table2.csv`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusStats {
    pub dialogues: usize,
    pub records: Vec<DialogueRecord>,
    pub turns: Summary,
    pub operator_turns: Summary,
    pub wizard_turns: Summary,
    /// Over dialogues where the operator spoke at least once.
    pub operator_turn_length: Option<Summary>,
    /// Over dialogues with at least one wizard turn.
    pub typed_percent: Option<Summary>,
    pub duration_s: Summary,
    pub resolved: usize,
    pub success_rate: f64,
}

fn column(records: &[DialogueRecord], f: impl Fn(&DialogueRecord) -> Option<f64>) -> Vec<f64> {
    records.iter().filter_map(f).collect()
}

pub fn interaction_stats(
    logs: &[DialogueLog],
    map: &BTreeMap<String, DaType>,
    sd: Sd,
) -> Result<CorpusStats, AnalysisError> {
    if logs.is_empty() {
        return Err(AnalysisError::EmptyCorpus);
    }
    let records = logs.iter().map(|l| DialogueRecord::from_log(l, map)).collect::<Result<Vec<_>, _>>()?;
    let summary = |xs: Vec<f64>| Summary::of(&xs, sd).expect("non-empty corpus");
    let resolved = records.iter().filter(|r| r.resolved).count();
    Ok(CorpusStats {
        dialogues: records.len(),
        turns: summary(column(&records, |r| Some(r.turns as f64))),
        operator_turns: summary(column(&records, |r| Some(r.operator_turns as f64))),
        wizard_turns: summary(column(&records, |r| Some(r.wizard_turns as f64))),
        operator_turn_length: Summary::of(&column(&records, |r| r.operator_turn_len_mean), sd),
        typed_percent: Summary::of(&column(&records, |r| r.typed_percent), sd),
        duration_s: summary(column(&records, |r| Some(r.duration_s))),
        resolved,
        success_rate: resolved as f64 / records.len() as f64,
        records,
    })
}

/// Share of each dialogue-act type (`table3.csv`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DaTypeDistribution {
    pub counts: BTreeMap<DaType, u64>,
    pub total: u64,
    /// Percent per type; all zero for a corpus without predefined acts.
    pub percent: BTreeMap<DaType, f64>,
}

pub fn da_type_distribution(
    logs: &[DialogueLog],
    map: &BTreeMap<String, DaType>,
) -> Result<DaTypeDistribution, AnalysisError> {
    let mut counts: BTreeMap<DaType, u64> = DaType::ALL.iter().map(|t| (*t, 0)).collect();
    for log in logs {
        for act in wizard_acts(log) {
            *counts.entry(type_of(map, act)?).or_default() += 1;
        }
    }
    let total: u64 = counts.values().sum();
    let percent =
        counts.iter().map(|(t, c)| (*t, if total == 0 { 0.0 } else { *c as f64 * 100.0 / total as f64 })).collect();
    Ok(DaTypeDistribution { counts, total, percent })
}

/// Most frequent wizard acts, highest first; ties by act name.
pub fn da_frequency(logs: &[DialogueLog], top_k: Option<usize>) -> Vec<(String, u64)> {
    let mut counts: BTreeMap<&str, u64> = BTreeMap::new();
    for log in logs {
        for act in wizard_acts(log) {
            *counts.entry(act).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, u64)> = counts.into_iter().map(|(a, c)| (a.to_string(), c)).collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    if let Some(k) = top_k {
        ranked.truncate(k);
    }
    ranked
}

/// Point-biserial r between each type's per-dialogue count and success.
/// Types where the correlation is undefined are left out.
pub fn correlations(records: &[DialogueRecord]) -> BTreeMap<DaType, f64> {
    let success: Vec<f64> = records.iter().map(|r| if r.resolved { 1.0 } else { 0.0 }).collect();
    DaType::ALL
        .iter()
        .filter_map(|t| {
            let counts: Vec<f64> = records.iter().map(|r| r.da_type_counts[t] as f64).collect();
            point_biserial_r(&counts, &success).ok().map(|r| (*t, r))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuestionStats {
    pub all: Option<Summary>,
    pub not_resolved: Option<Summary>,
    pub resolved: Option<Summary>,
    /// Resolved rated higher than not resolved, one-tailed.
    pub test: Option<MwuResult>,
}

impl QuestionStats {
    pub fn significant(&self) -> bool {
        self.test.as_ref().is_some_and(|t| t.p < 0.05)
    }
}

/// Questionnaire summaries (`table4.csv`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveyStats {
    pub answered: usize,
    pub answered_resolved: usize,
    pub questions: Vec<QuestionStats>,
}

pub fn survey_stats(records: &[DialogueRecord], sd: Sd) -> SurveyStats {
    let rated: Vec<(&[u8; 4], bool)> =
        records.iter().filter_map(|r| r.ratings.as_ref().map(|a| (a, r.resolved))).collect();
    let questions = (0..4)
        .map(|q| {
            let pick = |keep: &dyn Fn(bool) -> bool| -> Vec<f64> {
                rated.iter().filter(|(_, res)| keep(*res)).map(|(a, _)| a[q] as f64).collect()
            };
            let all = pick(&|_| true);
            let yes = pick(&|r| r);
            let no = pick(&|r| !r);
            QuestionStats {
                all: Summary::of(&all, sd),
                not_resolved: Summary::of(&no, sd),
                resolved: Summary::of(&yes, sd),
                test: mann_whitney_u(&yes, &no, Alternative::Greater).ok(),
            }
        })
        .collect();
    SurveyStats { answered: rated.len(), answered_resolved: rated.iter().filter(|(_, r)| *r).count(), questions }
}
