use std::collections::BTreeMap;
use std::sync::Arc;

use woz_core::log::{validate_log, EventKind};
use woz_core::protocol::Payload;
use woz_core::session::engine::Closure;
use woz_core::session::{CloseReason, Outgoing, Phase, Recipient, Role, Session, SessionConfig, SessionError};
use woz_core::{Scenario, SimTime};

const T0: SimTime = SimTime(1_000_000);

fn new_session() -> Session {
    let (s, out) = Session::new(
        "s1",
        Arc::new(Scenario::reference()),
        SessionConfig::default(),
        "op",
        "wiz",
        1,
        "TOKEN00001".into(),
        None,
        T0,
    )
    .unwrap();
    assert_eq!(out.len(), 4);
    s
}

fn started() -> (Session, SimTime) {
    let mut s = new_session();
    let start = T0.plus_secs(30);
    s.ready(Role::Operator, start).unwrap();
    s.ready(Role::Wizard, start).unwrap();
    (s, start)
}

fn no_slots() -> BTreeMap<String, String> {
    BTreeMap::new()
}

fn slots(robot: &str, location: &str) -> BTreeMap<String, String> {
    [("robot", robot), ("location", location)].into_iter().map(|(k, v)| (k.into(), v.into())).collect()
}

fn assert_private(out: &[Outgoing]) {
    for o in out {
        if o.payload.wizard_only() {
            assert_eq!(o.to, Recipient::Wizard, "{:?}", o.payload);
        }
    }
}

#[test]
fn instructions_must_be_read() {
    let mut s = new_session();
    assert_eq!(s.ready(Role::Operator, T0.plus_secs(10)), Err(SessionError::TooEarly(20)));
    assert!(s.ready(Role::Operator, T0.plus_secs(30)).unwrap().is_empty());
    assert_eq!(s.begin_game(T0.plus_secs(31)), Err(SessionError::NotBothReady));
    let out = s.ready(Role::Wizard, T0.plus_secs(40)).unwrap();
    assert_eq!(s.phase(), Phase::Playing);
    assert!(out.iter().any(|o| matches!(o.payload, Payload::ActionOptions(_))));
    assert_private(&out);
    assert_eq!(s.begin_game(T0.plus_secs(41)), Err(SessionError::WrongPhase("playing")));
}

#[test]
fn actions_before_the_game_are_rejected() {
    let mut s = new_session();
    assert_eq!(s.wizard_action("intro_hello", &no_slots(), T0).unwrap_err(), SessionError::WrongPhase("instructions"));
    assert_eq!(s.operator_message("hi", T0).unwrap_err(), SessionError::WrongPhase("instructions"));
}

#[test]
fn unavailable_action_leaves_no_trace() {
    let (mut s, start) = started();
    let before = s.log().events.len();
    let err = s.wizard_action("inform_moving", &slots("husky 1", "helipad"), start.plus_secs(1)).unwrap_err();
    assert_eq!(err.code(), "action_unavailable");
    assert_eq!(s.log().events.len(), before);
    assert_eq!(s.position().current_state, "start");
}

#[test]
fn failed_world_command_is_atomic() {
    let (mut s, start) = started();
    let t = |x| start.plus_secs(x);
    s.wizard_action("intro_hello", &no_slots(), t(1)).unwrap();
    s.operator_message("hello", t(2)).unwrap();
    s.wizard_action("inform_alert_emergency", &no_slots(), t(3)).unwrap();
    s.wizard_action("inform_pa_auto", &no_slots(), t(4)).unwrap();
    s.wizard_action("inform_activate_emergency_shutdown", &no_slots(), t(5)).unwrap();
    assert_eq!(s.position().current_state, "operations");
    // Quad copters start on the helipad.
    let before_log = s.log().events.len();
    let before_pos = s.position().clone();
    let err = s.wizard_action("inform_sending", &slots("quad copter 1", "helipad"), t(6)).unwrap_err();
    assert_eq!(err.code(), "world_error");
    assert_eq!(s.log().events.len(), before_log);
    assert_eq!(s.position(), &before_pos);
    assert_eq!(s.world().unwrap().busy_robots(), 0);

    let out = s.wizard_action("robot_move", &slots("quad copter 1", "helipad"), t(6));
    assert!(out.is_err());
    let err = s.wizard_action("inform_sending", &slots("robot 9", "helipad"), t(6)).unwrap_err();
    assert_eq!(err.code(), "invalid_slot");
}

#[test]
fn non_verbal_actions_are_logged_but_not_said() {
    let (mut s, start) = started();
    let t = |x| start.plus_secs(x);
    s.wizard_action("intro_hello", &no_slots(), t(1)).unwrap();
    s.operator_message("hello", t(2)).unwrap();
    s.wizard_action("inform_alert_emergency", &no_slots(), t(3)).unwrap();
    s.wizard_action("inform_pa_auto", &no_slots(), t(4)).unwrap();
    s.wizard_action("inform_activate_emergency_shutdown", &no_slots(), t(5)).unwrap();
    let out = s.wizard_action("robot_move", &slots("Husky 1", "helipad"), t(6)).unwrap();
    assert!(!out.iter().any(|o| matches!(o.payload, Payload::Chat(_))));
    let last: Vec<_> = s.log().events.iter().rev().take(2).map(|e| e.kind).collect();
    assert_eq!(last, vec![EventKind::WorldCommand, EventKind::WizardOption]);
    let cmd = s.log().events.last().unwrap();
    assert_eq!(cmd.command.as_ref().unwrap().robot.as_deref(), Some("husky 1"));
    assert!(cmd.world_snapshot.is_some());
    assert_eq!(s.world().unwrap().busy_robots(), 1);
}

#[test]
fn free_text_and_hints() {
    let (mut s, start) = started();
    assert_eq!(s.wizard_free_text("   ", start).unwrap_err(), SessionError::EmptyMessage);
    let out = s.wizard_free_text(" hello there ", start.plus_secs(1)).unwrap();
    match &out.last().unwrap().payload {
        Payload::Chat(c) => {
            assert_eq!(c.text, "hello there");
            assert_eq!(c.typed, Some(true));
        }
        other => panic!("{other:?}"),
    }
    let out = s.hint_request(start.plus_secs(2)).unwrap();
    assert_private(&out);
    let hint = out.iter().find_map(|o| match &o.payload {
        Payload::HintHighlight(h) => Some(h.action.clone()),
        _ => None,
    });
    assert!(["intro_hello", "hold_on", "okay", "sorry_repeat"].contains(&hint.unwrap().as_str()));
    assert_eq!(s.log().events.last().unwrap().kind, EventKind::Hint);
}

#[test]
fn confirmation_lock_needs_a_yes() {
    let (mut s, start) = started();
    let t = |x| start.plus_secs(x);
    s.wizard_action("intro_hello", &no_slots(), t(1)).unwrap();
    s.operator_message("hi", t(2)).unwrap();
    s.wizard_action("inform_alert_emergency", &no_slots(), t(3)).unwrap();
    s.wizard_action("request_pa_announcement", &no_slots(), t(4)).unwrap();
    assert!(s.position().lock_active);
    s.operator_message("hmm, what for?", t(5)).unwrap();
    s.operator_message("no, not yet", t(6)).unwrap();
    assert!(s.position().lock_active);
    assert!(s.wizard_action("action_performed", &no_slots(), t(7)).is_err());
    s.operator_message("Yes that sounds good", t(8)).unwrap();
    assert!(!s.position().lock_active);
    s.wizard_action("action_performed", &no_slots(), t(9)).unwrap();
    assert!(s.world().unwrap().flags().contains("pa_announced"));
}

#[test]
fn idle_game_evacuates_at_deadline() {
    let (mut s, start) = started();
    let mut ends = 0;
    let mut evacuations = 0;
    for sec in 1..=400 {
        let out = s.tick(start.plus_secs(sec)).unwrap();
        assert_private(&out);
        for o in out {
            match o.payload {
                Payload::SessionEnd(_) => ends += 1,
                Payload::WorldEvent(w) if w.id == "evacuation" => evacuations += 1,
                _ => {}
            }
        }
    }
    assert_eq!((ends, evacuations), (1, 1));
    let o = s.outcome().unwrap();
    assert_eq!(o.reason, CloseReason::Evacuated);
    assert!(o.evacuated && !o.resolved);
    assert_eq!(o.duration_played_ms, 360_000);
    assert_eq!(o.reward_operator_cents, 140);
    validate_log(&s.finished_log()).unwrap();
}

#[test]
fn disconnect_after_grace_closes_and_pays() {
    let (mut s, start) = started();
    s.disconnect(Role::Operator, start.plus_secs(100));
    assert!(s.tick(start.plus_secs(129)).unwrap().iter().all(|o| !matches!(o.payload, Payload::SessionEnd(_))));
    let out = s.tick(start.plus_secs(130)).unwrap();
    let end = out
        .iter()
        .find_map(|o| match &o.payload {
            Payload::SessionEnd(e) => Some((o.to, e.clone())),
            _ => None,
        })
        .unwrap();
    assert_eq!(end.0, Recipient::Both);
    assert_eq!(end.1.reason, CloseReason::Disconnect);
    assert_eq!(end.1.token, "TOKEN00001");
    let o = s.outcome().unwrap();
    assert_eq!(o.disconnected, Some(Role::Operator));
    assert_eq!(o.reward_wizard_cents, 50 + 2 * 15);
    assert_eq!(s.finished_log().metrics.unwrap().disconnected, Some(Role::Operator));
}

#[test]
fn reconnect_within_grace_resumes() {
    let (mut s, start) = started();
    s.disconnect(Role::Wizard, start.plus_secs(10));
    let resync = s.reconnect(Role::Wizard, start.plus_secs(20));
    assert!(resync.iter().any(|o| matches!(o.payload, Payload::ActionOptions(_))));
    s.tick(start.plus_secs(100)).unwrap();
    assert_eq!(s.phase(), Phase::Playing);
    let resync = s.reconnect(Role::Operator, start.plus_secs(101));
    assert!(!resync.iter().any(|o| o.payload.wizard_only()));
}

#[test]
fn close_twice_is_rejected() {
    let (mut s, start) = started();
    assert!(s.token().is_none());
    s.close(Closure::Disconnect(Role::Wizard), start).unwrap();
    assert_eq!(s.token(), Some("TOKEN00001"));
    assert_eq!(s.outcome().unwrap().reward_operator_cents, 50);
    assert_eq!(s.close(Closure::Completed, start).unwrap_err(), SessionError::AlreadyClosed);
    assert_eq!(s.operator_message("hi", start).unwrap_err(), SessionError::AlreadyClosed);
    s.mark_closed(start).unwrap();
    assert_eq!(s.phase(), Phase::Closed);
}

#[test]
fn empty_game_log_is_valid() {
    let mut s = new_session();
    s.close(Closure::Disconnect(Role::Operator), T0.plus_secs(5)).unwrap();
    let log = s.finished_log();
    validate_log(&log).unwrap();
    assert_eq!(log.metrics.unwrap().turns_total, 0);
}
