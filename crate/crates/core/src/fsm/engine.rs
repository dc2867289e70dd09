//! Executing the dialogue graph: option gating, transitions, template
//! rendering, hints and lock handling.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use thiserror::Error;

use super::graph::{ActionOption, DaType, DialogueGraph, FsmPosition, LockCondition, OptionKind, Target};
use super::template::{capitalize_first, Template};
use crate::world::{MilestoneEvent, WorldCommand, WorldView};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FsmError {
    #[error("action {0:?} is not available in the current state")]
    ActionUnavailable(String),
    #[error("missing value for slot {0:?}")]
    MissingSlot(String),
    #[error("{value:?} is not a valid {slot}")]
    InvalidSlotValue { slot: String, value: String },
    #[error("message is empty")]
    EmptyMessage,
    #[error("no actions available")]
    NoActionsAvailable,
    #[error("unknown state {0:?}")]
    UnknownState(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransitionResult {
    pub new_position: FsmPosition,
    pub dialogue_act: Option<String>,
    pub da_type: Option<DaType>,
    pub kind: Option<OptionKind>,
    pub rendered_utterance: Option<String>,
    pub template_index: Option<usize>,
    /// Explicit slot values after canonicalisation.
    pub slots: BTreeMap<String, String>,
    pub world_commands: Vec<WorldCommand>,
    /// Left empty by the FSM; the session fills it after running commands.
    pub milestone_events: Vec<MilestoneEvent>,
    pub typed: bool,
}

/// Names the wizard can fill in for an option's required slots.
/// An empty list means any value is accepted.
pub fn slot_choices(option: &ActionOption, world: &WorldView) -> IndexMap<String, Vec<String>> {
    option
        .required_slots
        .iter()
        .map(|slot| {
            let choices = match slot.as_str() {
                "robot" => robot_choices(option, world),
                "location" => world.locations.clone(),
                _ => Vec::new(),
            };
            (slot.clone(), choices)
        })
        .collect()
}

fn robot_choices(option: &ActionOption, world: &WorldView) -> Vec<String> {
    let needs: Vec<_> = option
        .side_effects
        .iter()
        .filter(|fx| fx.robot.as_ref().is_some_and(|t| t.slots().contains(&"robot")))
        .map(|fx| fx.command.capabilities())
        .filter(|caps| !caps.is_empty())
        .collect();
    world
        .robots
        .iter()
        .filter(|r| needs.iter().all(|caps| caps.iter().any(|c| r.capabilities.contains(c))))
        .map(|r| r.id.clone())
        .collect()
}

fn context_value(graph: &DialogueGraph, world: &WorldView, slot: &str) -> Option<String> {
    world.context_slot(slot).or_else(|| graph.slot_defaults.get(slot).cloned())
}

fn side_effect_templates(option: &ActionOption) -> impl Iterator<Item = &Template> {
    option.side_effects.iter().flat_map(|fx| fx.robot.iter().chain(fx.location.iter()))
}

/// Whether `option` may be offered at `pos` given the world.
pub fn option_available(graph: &DialogueGraph, pos: &FsmPosition, world: &WorldView, option: &ActionOption) -> bool {
    if pos.lock_active && !option.global && !option.while_locked {
        return false;
    }
    if !option.when.iter().all(|c| c.holds(world)) {
        return false;
    }
    // Robot commands and announcements need a free fleet and a live game.
    if option.commands_world() && (world.active.is_some() || world.over) {
        return false;
    }
    let choices = slot_choices(option, world);
    if choices.iter().any(|(name, c)| c.is_empty() && matches!(name.as_str(), "robot" | "location")) {
        return false;
    }
    let mut referenced = option.template_slots();
    for t in side_effect_templates(option) {
        referenced.extend(t.slots());
    }
    referenced.into_iter().all(|slot| choices.contains_key(slot) || context_value(graph, world, slot).is_some())
}

/// The options the wizard may pick right now: the current state's gated
/// options followed by the global shortcuts.
pub fn available_actions<'g>(graph: &'g DialogueGraph, pos: &FsmPosition, world: &WorldView) -> Vec<&'g ActionOption> {
    let Some(state) = graph.state(&pos.current_state) else {
        return Vec::new();
    };
    state.options.iter().chain(graph.global_options.iter()).filter(|o| option_available(graph, pos, world, o)).collect()
}

fn canonical(slot: &str, value: &str, choices: Option<&Vec<String>>, world: &WorldView) -> Result<String, FsmError> {
    let invalid = || FsmError::InvalidSlotValue { slot: slot.to_string(), value: value.to_string() };
    let pool: Vec<&String> = match (slot, choices) {
        (_, Some(c)) if !c.is_empty() => c.iter().collect(),
        ("robot", _) => world.robots.iter().map(|r| &r.id).collect(),
        ("location", _) => world.locations.iter().collect(),
        _ => {
            let v = value.trim();
            return if v.is_empty() { Err(invalid()) } else { Ok(v.to_string()) };
        }
    };
    pool.into_iter().find(|c| c.eq_ignore_ascii_case(value.trim())).cloned().ok_or_else(invalid)
}

/// Applies a wizard option. Fails without side effects when the option is
/// not currently offered or a slot cannot be filled.
pub fn apply_action<R: Rng + ?Sized>(
    graph: &DialogueGraph,
    pos: &FsmPosition,
    world: &WorldView,
    action_id: &str,
    slots: &BTreeMap<String, String>,
    rng: &mut R,
) -> Result<TransitionResult, FsmError> {
    let option = available_actions(graph, pos, world)
        .into_iter()
        .find(|o| o.id == action_id)
        .ok_or_else(|| FsmError::ActionUnavailable(action_id.to_string()))?;

    let choices = slot_choices(option, world);
    let mut explicit = BTreeMap::new();
    for name in &option.required_slots {
        let value = slots.get(name).ok_or_else(|| FsmError::MissingSlot(name.clone()))?;
        explicit.insert(name.clone(), canonical(name, value, choices.get(name), world)?);
    }
    for (name, value) in slots {
        if !explicit.contains_key(name) {
            explicit.insert(name.clone(), canonical(name, value, None, world)?);
        }
    }

    let context: BTreeMap<String, String> = option
        .template_slots()
        .into_iter()
        .chain(side_effect_templates(option).flat_map(|t| t.slots()))
        .filter(|s| !explicit.contains_key(*s))
        .filter_map(|s| context_value(graph, world, s).map(|v| (s.to_string(), v)))
        .collect();
    let lookup = |name: &str| explicit.get(name).or_else(|| context.get(name)).map(String::as_str);

    let (rendered_utterance, template_index) = match option.templates.len() {
        0 => (None, None),
        n => {
            let idx = if n == 1 { 0 } else { rng.random_range(0..n) };
            let text = option.templates[idx].render(lookup).map_err(FsmError::MissingSlot)?;
            (Some(capitalize_first(&text)), Some(idx))
        }
    };

    let mut world_commands = Vec::with_capacity(option.side_effects.len());
    for fx in &option.side_effects {
        let arg = |t: &Option<Template>| -> Result<Option<String>, FsmError> {
            t.as_ref().map(|t| t.render(lookup).map_err(FsmError::MissingSlot)).transpose()
        };
        world_commands.push(WorldCommand { command: fx.command, robot: arg(&fx.robot)?, location: arg(&fx.location)? });
    }

    let new_position = match &option.target {
        Target::SelfLoop => pos.clone(),
        Target::State(id) => {
            let state = graph.state(id).ok_or_else(|| FsmError::UnknownState(id.clone()))?;
            FsmPosition::enter(id, state.locked_until)
        }
    };

    Ok(TransitionResult {
        new_position,
        dialogue_act: Some(option.id.clone()),
        da_type: Some(option.da_type),
        kind: Some(option.kind),
        rendered_utterance,
        template_index,
        slots: explicit,
        world_commands,
        milestone_events: Vec::new(),
        typed: false,
    })
}

/// Free text from the wizard never moves the dialogue state.
pub fn record_free_text(pos: &FsmPosition, text: &str) -> Result<TransitionResult, FsmError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(FsmError::EmptyMessage);
    }
    Ok(TransitionResult {
        new_position: pos.clone(),
        rendered_utterance: Some(text.to_string()),
        typed: true,
        ..Default::default()
    })
}

/// Picks one available option, weighted by the state's hint weights
/// renormalised over what is currently offered. Falls back to uniform.
pub fn suggest_hint<R: Rng + ?Sized>(
    graph: &DialogueGraph,
    pos: &FsmPosition,
    world: &WorldView,
    rng: &mut R,
) -> Result<String, FsmError> {
    let available = available_actions(graph, pos, world);
    if available.is_empty() {
        return Err(FsmError::NoActionsAvailable);
    }
    let weights: Vec<f64> = match graph.state(&pos.current_state) {
        Some(state) if !state.hint_weights.is_empty() => {
            available.iter().map(|o| state.hint_weights.get(&o.id).copied().unwrap_or(0.0)).collect()
        }
        _ => Vec::new(),
    };
    let idx = match WeightedIndex::new(&weights) {
        Ok(dist) => dist.sample(rng),
        Err(_) => rng.random_range(0..available.len()),
    };
    Ok(available[idx].id.clone())
}

/// Effect of an operator chat message on the position's lock.
pub fn operator_event(graph: &DialogueGraph, pos: &FsmPosition, text: &str) -> FsmPosition {
    if !pos.lock_active {
        return pos.clone();
    }
    let lock = graph.state(&pos.current_state).and_then(|s| s.locked_until);
    match lock {
        Some(LockCondition::OperatorMessage) if !text.trim().is_empty() => pos.unlocked(),
        Some(LockCondition::OperatorConfirmation) if is_affirmative(text) => pos.unlocked(),
        None => pos.unlocked(),
        _ => pos.clone(),
    }
}

const AFFIRMATIVE: &[&str] = &[
    "yes",
    "yeah",
    "yep",
    "yup",
    "ok",
    "okay",
    "sure",
    "fine",
    "alright",
    "agreed",
    "affirmative",
    "proceed",
    "absolutely",
    "definitely",
    "good",
    "great",
    "correct",
    "ahead",
];
const NEGATIVE: &[&str] = &["no", "not", "don't", "dont", "wait", "stop", "never", "nope", "cancel", "hold"];

/// Crude yes/no reading of an operator reply. Any negation wins.
pub fn is_affirmative(text: &str) -> bool {
    let lower = text.to_lowercase();
    let words: Vec<&str> =
        lower.split(|c: char| !(c.is_alphanumeric() || c == '\'')).filter(|w| !w.is_empty()).collect();
    if words.iter().any(|w| NEGATIVE.contains(w)) {
        return false;
    }
    words.iter().any(|w| AFFIRMATIVE.contains(w))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affirmations() {
        assert!(is_affirmative("Yes that sounds good"));
        assert!(is_affirmative("ok"));
        assert!(is_affirmative("Go ahead."));
        assert!(!is_affirmative("No, don't do that"));
        assert!(!is_affirmative("not yet, wait"));
        assert!(!is_affirmative("what is going on"));
        assert!(!is_affirmative(""));
    }

    #[test]
    fn free_text_keeps_position() {
        let pos = FsmPosition::enter("S3", Some(LockCondition::OperatorMessage));
        let r = record_free_text(&pos, "sending the husky now").unwrap();
        assert_eq!(r.new_position, pos);
        assert!(r.typed);
        assert_eq!(record_free_text(&pos, "  \t ").unwrap_err(), FsmError::EmptyMessage);
    }
}
