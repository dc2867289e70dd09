//! Pairing, session lifecycle, rewards, tokens and the questionnaire.

pub mod engine;
pub mod lobby;
pub mod questionnaire;
pub mod reward;
pub mod token;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use engine::{Closure, Outgoing, Recipient, Session, SessionConfig, SessionError};
pub use lobby::{JoinOutcome, Lobby, LobbyConfig, LobbyError, RoleAssignment};
pub use questionnaire::{validate_answers, QuestionnaireError};
pub use reward::{compute_reward, format_cents, RewardTiers};
pub use token::TokenGenerator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Operator,
    Wizard,
}

impl Role {
    pub fn other(self) -> Role {
        match self {
            Role::Operator => Role::Wizard,
            Role::Wizard => Role::Operator,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Role::Operator => "operator",
            Role::Wizard => "wizard",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloseReason {
    Completed,
    Evacuated,
    Disconnect,
    LobbyTimeout,
}

/// Session phases, in the only order they can occur.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Instructions,
    Playing,
    Questionnaire,
    Closed,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Instructions => "instructions",
            Phase::Playing => "playing",
            Phase::Questionnaire => "questionnaire",
            Phase::Closed => "closed",
        }
    }
}
