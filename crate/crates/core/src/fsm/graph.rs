//! The compiled dialogue graph. Immutable once loaded.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::condition::Condition;
use super::template::Template;
use crate::world::CommandKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DaType {
    Request,
    Interaction,
    Action,
    Update,
}

impl DaType {
    pub const ALL: [DaType; 4] = [DaType::Request, DaType::Interaction, DaType::Action, DaType::Update];

    pub fn as_str(self) -> &'static str {
        match self {
            DaType::Request => "request",
            DaType::Interaction => "interaction",
            DaType::Action => "action",
            DaType::Update => "update",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            DaType::Request => "Request",
            DaType::Interaction => "Interaction",
            DaType::Action => "Action",
            DaType::Update => "Update",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for DaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptionKind {
    Verbal,
    NonVerbal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Target {
    SelfLoop,
    State(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LockCondition {
    /// Any operator chat message unlocks.
    OperatorMessage,
    /// Only an affirmative operator message unlocks.
    OperatorConfirmation,
}

impl LockCondition {
    pub fn as_str(self) -> &'static str {
        match self {
            LockCondition::OperatorMessage => "operator_message",
            LockCondition::OperatorConfirmation => "operator_confirmation",
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            LockCondition::OperatorMessage => "waiting for the operator to reply",
            LockCondition::OperatorConfirmation => "waiting for the operator to confirm",
        }
    }
}

/// A world command whose arguments are templates over the option's slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SideEffect {
    pub command: CommandKind,
    pub robot: Option<Template>,
    pub location: Option<Template>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActionOption {
    pub id: String,
    pub kind: OptionKind,
    pub templates: Vec<Template>,
    pub target: Target,
    pub side_effects: Vec<SideEffect>,
    pub da_type: DaType,
    pub required_slots: Vec<String>,
    pub when: Vec<Condition>,
    /// Offered while the state's lock is active.
    pub while_locked: bool,
    /// Reconstructed rather than taken from a reference transcript.
    pub synthetic: bool,
    pub global: bool,
}

impl ActionOption {
    pub fn is_verbal(&self) -> bool {
        self.kind == OptionKind::Verbal
    }

    /// True when any side effect needs the robots to be free.
    pub fn commands_world(&self) -> bool {
        !self.side_effects.is_empty()
    }

    pub fn template_slots(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in &self.templates {
            for s in t.slots() {
                if !out.contains(&s) {
                    out.push(s);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DialogueState {
    pub id: String,
    pub options: Vec<ActionOption>,
    pub locked_until: Option<LockCondition>,
    pub hint_weights: IndexMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DialogueGraph {
    pub states: IndexMap<String, DialogueState>,
    pub initial_state: String,
    pub global_options: Vec<ActionOption>,
    pub da_type_map: BTreeMap<String, DaType>,
    pub slot_defaults: BTreeMap<String, String>,
}

impl DialogueGraph {
    pub fn state(&self, id: &str) -> Option<&DialogueState> {
        self.states.get(id)
    }

    /// Looks an option up by id in any state or among the globals.
    pub fn option(&self, id: &str) -> Option<&ActionOption> {
        self.global_options.iter().chain(self.states.values().flat_map(|s| s.options.iter())).find(|o| o.id == id)
    }

    pub fn all_options(&self) -> impl Iterator<Item = &ActionOption> {
        self.states.values().flat_map(|s| s.options.iter()).chain(self.global_options.iter())
    }

    pub fn verbal_act_count(&self) -> usize {
        self.all_options().filter(|o| o.is_verbal()).count()
    }

    pub fn initial_position(&self) -> FsmPosition {
        let lock = self.states.get(&self.initial_state).and_then(|s| s.locked_until);
        FsmPosition::enter(&self.initial_state, lock)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FsmPosition {
    pub current_state: String,
    pub lock_active: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_authorization: Option<String>,
}

impl FsmPosition {
    pub fn enter(state: &str, lock: Option<LockCondition>) -> Self {
        FsmPosition {
            current_state: state.to_string(),
            lock_active: lock.is_some(),
            pending_authorization: lock.map(|l| l.describe().to_string()),
        }
    }

    pub fn unlocked(&self) -> Self {
        FsmPosition { current_state: self.current_state.clone(), lock_active: false, pending_authorization: None }
    }
}
