//! Randomised invariants over the bundled scenario.

use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use woz_core::fsm::{self, FsmError, FsmPosition};
use woz_core::log::{check_transitions, validate_log};
use woz_core::protocol::{ActionOptions, Payload};
use woz_core::session::{Phase, Role, Session, SessionConfig, SessionError};
use woz_core::world::{init_world, is_legal_transition, CommandKind, RobotStatus, WorldCommand, WorldView};
use woz_core::{Scenario, SimTime};

fn locked_positions(scenario: &Scenario) -> Vec<(FsmPosition, woz_core::fsm::LockCondition)> {
    scenario
        .graph
        .states
        .values()
        .filter_map(|s| s.locked_until.map(|l| (FsmPosition::enter(&s.id, Some(l)), l)))
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn free_text_never_moves_a_locked_state(texts in prop::collection::vec(".{0,40}", 1..20)) {
        let scenario = Scenario::reference();
        for (start, _) in locked_positions(&scenario) {
            let mut pos = start.clone();
            for t in &texts {
                match fsm::record_free_text(&pos, t) {
                    Ok(r) => pos = r.new_position,
                    Err(e) => prop_assert_eq!(e, FsmError::EmptyMessage),
                }
                prop_assert_eq!(&pos, &start);
            }
        }
    }

    #[test]
    fn operator_messages_unlock_as_configured(text in "[a-zA-Z ,.!?']{0,40}") {
        let scenario = Scenario::reference();
        for (pos, lock) in locked_positions(&scenario) {
            let next = fsm::operator_event(&scenario.graph, &pos, &text);
            prop_assert_eq!(&next.current_state, &pos.current_state);
            let expect_unlock = match lock {
                fsm::LockCondition::OperatorMessage => !text.trim().is_empty(),
                fsm::LockCondition::OperatorConfirmation => fsm::is_affirmative(&text),
            };
            prop_assert_eq!(next.lock_active, !expect_unlock);
            // The configured event itself always unlocks.
            prop_assert!(!fsm::operator_event(&scenario.graph, &pos, "Yes, go ahead").lock_active);
        }
    }

    #[test]
    fn locked_session_ignores_wizard_free_text(texts in prop::collection::vec("[a-z ]{1,20}", 1..10)) {
        let (mut s, start) = started(5);
        s.wizard_action("intro_hello", &BTreeMap::new(), start.plus_secs(1)).unwrap();
        let locked = s.position().clone();
        prop_assert!(locked.lock_active);
        for (i, t) in texts.iter().enumerate() {
            let _ = s.wizard_free_text(t, start.plus_secs(2 + i as u64));
            prop_assert_eq!(s.position(), &locked);
        }
    }
}

const TASK_COMMANDS: [CommandKind; 7] = [
    CommandKind::Move,
    CommandKind::Inspect,
    CommandKind::Extinguish,
    CommandKind::ExtinguishHose,
    CommandKind::ExtinguishSprinkler,
    CommandKind::OpenValve,
    CommandKind::AssessDamage,
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn at_most_one_robot_is_active(
        ops in prop::collection::vec((0usize..7, 0usize..4, 0usize..5, 0u64..40_000), 1..60)
    ) {
        let scenario = Scenario::reference();
        let cfg = scenario.world.clone();
        let start = SimTime(10_000);
        let mut world = init_world(cfg.clone(), start).unwrap();
        let mut now = start;
        for (cmd, robot, loc, dt) in ops {
            now = now + dt;
            let _ = world.tick(now);
            let command = WorldCommand {
                command: TASK_COMMANDS[cmd],
                robot: Some(cfg.robots[robot].id.clone()),
                location: Some(cfg.locations[loc].clone()),
            };
            let _ = world.execute(&command, now);
            let active = world.robots().filter(|r| r.status != RobotStatus::Idle).count();
            prop_assert!(active <= 1, "{} robots active", active);
            prop_assert!(world.busy_robots() <= 1);
        }
        for change in world.status_log() {
            prop_assert!(is_legal_transition(change.from, change.to, false), "{:?}", change);
        }
    }
}

fn started(seed: u64) -> (Session, SimTime) {
    let t0 = SimTime(1_577_836_800_000);
    let (mut s, _) = Session::new(
        format!("walk{seed}"),
        Arc::new(Scenario::reference()),
        SessionConfig::default(),
        "op",
        "wiz",
        seed,
        "WALKTOKEN1".into(),
        None,
        t0,
    )
    .unwrap();
    let start = t0.plus_secs(30);
    s.ready(Role::Operator, start).unwrap();
    s.ready(Role::Wizard, start).unwrap();
    (s, start)
}

const OPERATOR_LINES: &[&str] =
    &["Hello", "Yes please", "No, wait", "Use husky 1", "ok", "What now?", "Send the drone"];

fn latest_options(out: &[woz_core::session::Outgoing], into: &mut Option<ActionOptions>) {
    for o in out {
        if let Payload::ActionOptions(a) = &o.payload {
            *into = Some(a.clone());
        }
    }
}

/// Plays random advertised options until `steps` wizard actions were
/// submitted. Returns (actions, world errors).
fn random_walk(seed: u64, steps: usize) -> (usize, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut done = 0;
    let mut world_errors = 0;
    let mut session_no = 0;
    while done < steps {
        session_no += 1;
        let (mut s, start) = started(seed * 1000 + session_no);
        let mut options = Some(s.action_options(start));
        let mut clock_ms = 0u64;
        while s.phase() == Phase::Playing && done < steps {
            clock_ms += rng.random_range(200..6000);
            let now = start + clock_ms;
            let out = s.tick(now).unwrap();
            latest_options(&out, &mut options);
            if s.phase() != Phase::Playing {
                break;
            }
            if rng.random_bool(0.25) {
                let line = OPERATOR_LINES.choose(&mut rng).unwrap();
                let out = s.operator_message(line, now).unwrap();
                latest_options(&out, &mut options);
                continue;
            }
            let panel = options.as_ref().unwrap();
            let Some(choice) = panel.options.choose(&mut rng) else { continue };
            let slots: BTreeMap<String, String> = choice
                .slots
                .iter()
                .map(|(k, vals)| (k.clone(), vals.choose(&mut rng).cloned().unwrap_or_else(|| "x".into())))
                .collect();
            done += 1;
            match s.wizard_action(&choice.id, &slots, now) {
                Ok(out) => latest_options(&out, &mut options),
                Err(SessionError::World(_)) => world_errors += 1,
                Err(e) => panic!("seed {seed}: advertised {} failed: {e}", choice.id),
            }
            assert!(s.world().unwrap().busy_robots() <= 1);
        }
        if s.phase() == Phase::Playing {
            s.tick(start.plus_secs(400)).unwrap();
        }
        let log = s.finished_log();
        validate_log(&log).unwrap();
        check_transitions(&s.scenario().graph, &log).unwrap();
        let o = s.outcome().unwrap();
        assert!(o.resolved != o.evacuated);
    }
    (done, world_errors)
}

#[test]
fn advertised_options_are_always_accepted() {
    let (done, errors) = random_walk(11, 10_000);
    assert_eq!(done, 10_000);
    // Moving a robot onto itself is advertised but refused by the world.
    assert!(errors < done / 10, "{errors} world errors");
}

#[test]
fn hint_only_suggests_available_actions() {
    let scenario = Scenario::reference();
    let view = WorldView::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for state in scenario.graph.states.values() {
        let pos = FsmPosition::enter(&state.id, None);
        let avail: Vec<_> =
            fsm::available_actions(&scenario.graph, &pos, &view).into_iter().map(|o| o.id.clone()).collect();
        for _ in 0..50 {
            match fsm::suggest_hint(&scenario.graph, &pos, &view, &mut rng) {
                Ok(h) => assert!(avail.contains(&h)),
                Err(e) => assert_eq!(e, FsmError::NoActionsAvailable),
            }
        }
    }
}
