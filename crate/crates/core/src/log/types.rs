//! The per-session log document.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::fsm::{DaType, OptionKind};
use crate::session::{CloseReason, Role};
use crate::time::SimTime;
use crate::world::{MilestoneKind, WorldCommand, WorldSnapshot};

use super::metrics::AutoMetrics;

pub const LOG_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Actor {
    Operator,
    Wizard,
    System,
}

impl From<Role> for Actor {
    fn from(r: Role) -> Self {
        match r {
            Role::Operator => Actor::Operator,
            Role::Wizard => Actor::Wizard,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Chat,
    WizardOption,
    WizardFreeText,
    WorldCommand,
    Milestone,
    Hint,
    Lock,
    Phase,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MilestoneRecord {
    pub id: String,
    pub kind: MilestoneKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEvent {
    pub seq: u64,
    pub ts: SimTime,
    pub actor: Actor,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dialogue_act: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub da_type: Option<DaType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub option_kind: Option<OptionKind>,
    #[serde(default)]
    pub typed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub slots: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fsm_state_before: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fsm_state_after: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locked_after: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<WorldCommand>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world_snapshot: Option<WorldSnapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub milestone: Option<MilestoneRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl LogEvent {
    pub fn new(seq: u64, ts: SimTime, actor: Actor, kind: EventKind) -> Self {
        LogEvent {
            seq,
            ts,
            actor,
            kind,
            dialogue_act: None,
            da_type: None,
            option_kind: None,
            typed: false,
            text: None,
            slots: BTreeMap::new(),
            fsm_state_before: None,
            fsm_state_after: None,
            locked_after: None,
            command: None,
            world_snapshot: None,
            milestone: None,
            detail: None,
        }
    }

    /// True for events that carry an FSM position on both sides.
    pub fn is_fsm_bearing(&self) -> bool {
        self.fsm_state_before.is_some() && self.fsm_state_after.is_some()
    }

    /// A chat line by the operator.
    pub fn is_operator_turn(&self) -> bool {
        self.kind == EventKind::Chat && self.actor == Actor::Operator
    }

    /// A message the wizard sent: a verbal option or typed text.
    pub fn is_wizard_turn(&self) -> bool {
        match self.kind {
            EventKind::WizardFreeText => true,
            EventKind::WizardOption => self.option_kind == Some(OptionKind::Verbal),
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioRef {
    pub name: String,
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantRecord {
    pub id: String,
    pub role: Role,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub reason: CloseReason,
    pub duration_played_ms: u64,
    pub resolved: bool,
    pub evacuated: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disconnected: Option<Role>,
    pub reward_operator_cents: u32,
    pub reward_wizard_cents: u32,
    pub token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuestionnaireRecord {
    pub answers: [u8; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub free_text: Option<String>,
    pub submitted_at: SimTime,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DialogueLog {
    pub format: u32,
    pub session_id: String,
    pub scenario: ScenarioRef,
    pub participants: Vec<ParticipantRecord>,
    pub created_at: SimTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game_started_at: Option<SimTime>,
    pub time_limit_s: u64,
    pub events: Vec<LogEvent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<SessionOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<AutoMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub questionnaire: Option<QuestionnaireRecord>,
}

impl DialogueLog {
    pub fn token(&self) -> Option<&str> {
        self.outcome.as_ref().map(|o| o.token.as_str())
    }

    pub fn resolved(&self) -> bool {
        self.outcome.as_ref().is_some_and(|o| o.resolved)
    }
}
