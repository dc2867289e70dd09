//! Re-checks a log's dialogue transitions against the graph that produced
//! it.

use crate::fsm::{DialogueGraph, Target};

use super::types::{DialogueLog, EventKind};

/// Walks every FSM-bearing event and confirms it was a legal move from the
/// position the previous event left behind. Returns how many transitions
/// were checked.
pub fn check_transitions(graph: &DialogueGraph, log: &DialogueLog) -> Result<usize, String> {
    let mut state: Option<String> = None;
    let mut locked = false;
    let mut checked = 0;
    for e in &log.events {
        let at = |msg: String| format!("event {}: {msg}", e.seq);
        match e.kind {
            EventKind::Phase if e.fsm_state_after.is_some() => {
                let initial = graph.initial_position();
                if e.fsm_state_after.as_deref() != Some(initial.current_state.as_str()) {
                    return Err(at(format!("game starts in {:?}", e.fsm_state_after)));
                }
                state = Some(initial.current_state);
                locked = initial.lock_active;
            }
            EventKind::WizardOption | EventKind::WizardFreeText | EventKind::Lock => {
                let before = e.fsm_state_before.as_deref().ok_or_else(|| at("no state before".into()))?;
                let after = e.fsm_state_after.as_deref().ok_or_else(|| at("no state after".into()))?;
                if state.as_deref() != Some(before) {
                    return Err(at(format!("starts in {before:?}, dialogue was in {state:?}")));
                }
                let locked_after = e.locked_after.ok_or_else(|| at("no lock flag".into()))?;
                let (want_state, want_lock) = match e.kind {
                    EventKind::WizardOption => {
                        let id = e.dialogue_act.as_deref().ok_or_else(|| at("no dialogue act".into()))?;
                        let option = graph
                            .state(before)
                            .and_then(|s| s.options.iter().find(|o| o.id == id))
                            .or_else(|| graph.global_options.iter().find(|o| o.id == id))
                            .ok_or_else(|| at(format!("{id} is not offered in {before}")))?;
                        if locked && !(option.global || option.while_locked) {
                            return Err(at(format!("{id} taken while {before} was locked")));
                        }
                        match &option.target {
                            Target::SelfLoop => (before.to_string(), locked),
                            Target::State(s) => {
                                let lock = graph.state(s).is_some_and(|st| st.locked_until.is_some());
                                (s.clone(), lock)
                            }
                        }
                    }
                    EventKind::Lock => {
                        if !locked {
                            return Err(at("unlock of an unlocked state".into()));
                        }
                        (before.to_string(), false)
                    }
                    _ => (before.to_string(), locked),
                };
                if after != want_state || locked_after != want_lock {
                    return Err(at(format!(
                        "ended in {after:?} (locked {locked_after}), expected {want_state:?} (locked {want_lock})"
                    )));
                }
                state = Some(want_state);
                locked = want_lock;
                checked += 1;
            }
            _ => {}
        }
    }
    Ok(checked)
}
