//! The canonical run through the bundled scenario: a fully cooperative
//! pair that locates, puts out and assesses the fire, then waits for the
//! clock. Timings are seconds after the game starts.

use std::collections::BTreeMap;

use crate::session::Role;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Turn {
    Say(&'static str),
    Act { action: &'static str, slots: &'static [(&'static str, &'static str)] },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Step {
    pub at_s: u64,
    pub role: Role,
    pub turn: Turn,
}

impl Step {
    pub fn slots(&self) -> BTreeMap<String, String> {
        match &self.turn {
            Turn::Act { slots, .. } => slots.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect(),
            Turn::Say(_) => BTreeMap::new(),
        }
    }
}

const EAST: &str = "processing module east tower";

const fn op(at_s: u64, text: &'static str) -> Step {
    Step { at_s, role: Role::Operator, turn: Turn::Say(text) }
}

const fn wiz(at_s: u64, action: &'static str, slots: &'static [(&'static str, &'static str)]) -> Step {
    Step { at_s, role: Role::Wizard, turn: Turn::Act { action, slots } }
}

/// The game runs its full six minutes; the session closes at this mark.
pub const GOLDEN_END_S: u64 = 360;

pub fn golden_script() -> Vec<Step> {
    vec![
        wiz(2, "intro_hello", &[]),
        wiz(5, "request_attention", &[]),
        op(20, "Hi Fred, I am _"),
        wiz(64, "inform_alert_emergency", &[]),
        op(75, "Ok what do you suggest we do first"),
        wiz(85, "request_pa_announcement", &[]),
        op(95, "Yes that sounds good"),
        wiz(100, "action_performed", &[]),
        wiz(105, "inform_activate_emergency_shutdown", &[]),
        op(112, "Ok"),
        wiz(120, "request_robot_type", &[]),
        op(150, "I would like to use the quad copter 1"),
        wiz(165, "inform_moving", &[("robot", "quad copter 1"), ("location", EAST)]),
        wiz(165, "inform_robot_eta", &[]),
        wiz(172, "inform_time_left", &[]),
        wiz(176, "inform_arrival", &[]),
        op(180, "Is Quad copter indicating what the problem is?"),
        wiz(185, "inform_inspection", &[("robot", "quad copter 1"), ("location", EAST)]),
        wiz(196, "inform_emergency_status", &[]),
        wiz(200, "request_robot_emergency", &[]),
        op(210, "Should we extinguish the fire now using quad copter 2"),
        wiz(215, "inform_moving", &[("robot", "quad copter 2"), ("location", EAST)]),
        wiz(226, "inform_arrival", &[]),
        op(230, "Quad copters can't put out fires, send husky 1"),
        wiz(232, "inform_sending", &[("robot", "husky 1"), ("location", EAST)]),
        wiz(260, "inform_arrival", &[]),
        wiz(262, "inform_extinguishing", &[("robot", "husky 1"), ("location", EAST)]),
        wiz(283, "inform_fire_out", &[]),
        wiz(286, "request_robot_assess", &[]),
        op(290, "Use husky 2"),
        wiz(292, "inform_moving", &[("robot", "husky 2"), ("location", EAST)]),
        wiz(320, "inform_assessing", &[("robot", "husky 2"), ("location", EAST)]),
        wiz(336, "inform_damage_report", &[]),
        wiz(338, "inform_mission_complete", &[]),
        wiz(340, "bye", &[]),
        op(345, "Thanks Fred"),
    ]
}
