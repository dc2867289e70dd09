//! Finite-state dialogue management for the wizard.

pub mod condition;
pub mod engine;
pub mod graph;
pub mod template;

pub use condition::Condition;
pub use engine::{
    apply_action, available_actions, is_affirmative, operator_event, option_available, record_free_text, slot_choices,
    suggest_hint, FsmError, TransitionResult,
};
pub use graph::{
    ActionOption, DaType, DialogueGraph, DialogueState, FsmPosition, LockCondition, OptionKind, SideEffect, Target,
};
pub use template::{Template, TemplateError};
