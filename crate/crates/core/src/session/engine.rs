//! One paired session as a single-writer state machine.
//!
//! Every inbound event (operator chat, wizard actions, clock ticks,
//! connection changes) goes through a method here. Each method returns the
//! messages to deliver; the transport decides how.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::reward::{format_cents, RewardTiers};
use super::{CloseReason, Phase, Role};
use crate::fsm::{self, FsmError, FsmPosition, OptionKind};
use crate::log::{
    Actor, DialogueLog, EventKind, EventSink, LogEvent, MilestoneRecord, ParticipantRecord, ScenarioRef,
    SessionOutcome, LOG_FORMAT,
};
use crate::protocol::{
    ActionOptions, Chat, HintHighlight, InstructionsMsg, Notice, OptionView, Payload, RobotPanel, RoleAssigned,
    SessionEnd, Timer, WorldEventMsg,
};
use crate::scenario::Scenario;
use crate::time::{format_clock, SimTime};
use crate::world::{init_world, MilestoneEvent, WorldError, WorldState, WorldView};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SessionConfig {
    pub instructions_min_read_s: u64,
    pub disconnect_grace_s: u64,
    pub reward: RewardTiers,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig { instructions_min_read_s: 30, disconnect_grace_s: 30, reward: RewardTiers::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Recipient {
    Operator,
    Wizard,
    Both,
}

impl Recipient {
    pub fn includes(self, role: Role) -> bool {
        matches!(
            (self, role),
            (Recipient::Both, _) | (Recipient::Operator, Role::Operator) | (Recipient::Wizard, Role::Wizard)
        )
    }
}

impl From<Role> for Recipient {
    fn from(r: Role) -> Self {
        match r {
            Role::Operator => Recipient::Operator,
            Role::Wizard => Recipient::Wizard,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub to: Recipient,
    pub payload: Payload,
}

impl Outgoing {
    fn new(to: Recipient, payload: Payload) -> Self {
        assert!(!payload.wizard_only() || to == Recipient::Wizard, "{} must only go to the wizard", payload.type_tag());
        Outgoing { to, payload }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SessionError {
    #[error("not allowed while the session is in the {0} phase")]
    WrongPhase(&'static str),
    #[error("message is empty")]
    EmptyMessage,
    #[error("both participants must be ready first")]
    NotBothReady,
    #[error("please keep reading the instructions for {0} more seconds")]
    TooEarly(u64),
    #[error("the session is already closed")]
    AlreadyClosed,
    #[error("only the {0} can do that")]
    WrongRole(Role),
    #[error(transparent)]
    Fsm(#[from] FsmError),
    #[error(transparent)]
    World(#[from] WorldError),
    #[error("log storage failed: {0}")]
    Storage(String),
}

impl SessionError {
    pub fn code(&self) -> &'static str {
        match self {
            SessionError::WrongPhase(_) => "wrong_phase",
            SessionError::EmptyMessage => "empty_message",
            SessionError::NotBothReady => "not_both_ready",
            SessionError::TooEarly(_) => "too_early",
            SessionError::AlreadyClosed => "already_closed",
            SessionError::WrongRole(_) => "wrong_role",
            SessionError::Fsm(FsmError::ActionUnavailable(_)) => "action_unavailable",
            SessionError::Fsm(FsmError::MissingSlot(_)) => "missing_slot",
            SessionError::Fsm(FsmError::InvalidSlotValue { .. }) => "invalid_slot",
            SessionError::Fsm(FsmError::NoActionsAvailable) => "no_actions_available",
            SessionError::Fsm(_) => "dialogue_error",
            SessionError::World(WorldError::RobotBusy(_)) => "robot_busy",
            SessionError::World(WorldError::CapabilityMismatch { .. }) => "capability_mismatch",
            SessionError::World(WorldError::AfterDeadline) => "after_deadline",
            SessionError::World(_) => "world_error",
            SessionError::Storage(_) => "storage_error",
        }
    }

    pub fn notice(&self) -> Payload {
        Payload::Notice(Notice { code: self.code().to_string(), message: self.to_string() })
    }
}

/// How a session is being closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Closure {
    Completed,
    Evacuated,
    Disconnect(Role),
    LobbyTimeout,
}

pub struct Session {
    id: String,
    scenario: Arc<Scenario>,
    config: SessionConfig,
    participants: [String; 2],
    phase: Phase,
    ready: [bool; 2],
    instructions_at: SimTime,
    position: FsmPosition,
    world: Option<WorldState>,
    rng: ChaCha8Rng,
    log: DialogueLog,
    sink: Option<Box<dyn EventSink>>,
    token: String,
    disconnected: [Option<SimTime>; 2],
    last_timer: Option<u64>,
    last_options: Option<ActionOptions>,
    last_ts: SimTime,
}

fn idx(role: Role) -> usize {
    match role {
        Role::Operator => 0,
        Role::Wizard => 1,
    }
}

impl std::fmt::Debug for Session {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Session").field("id", &self.id).field("phase", &self.phase).finish_non_exhaustive()
    }
}

impl Session {
    /// Opens a session in the instructions phase. `token` is revealed to
    /// the participants only when the game closes.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        id: impl Into<String>,
        scenario: Arc<Scenario>,
        config: SessionConfig,
        operator: impl Into<String>,
        wizard: impl Into<String>,
        seed: u64,
        token: String,
        sink: Option<Box<dyn EventSink>>,
        now: SimTime,
    ) -> Result<(Session, Vec<Outgoing>), SessionError> {
        let id = id.into();
        let participants = [operator.into(), wizard.into()];
        let log = DialogueLog {
            format: LOG_FORMAT,
            session_id: id.clone(),
            scenario: ScenarioRef { name: scenario.name.clone(), hash: scenario.hash.clone() },
            participants: vec![
                ParticipantRecord { id: participants[0].clone(), role: Role::Operator },
                ParticipantRecord { id: participants[1].clone(), role: Role::Wizard },
            ],
            created_at: now,
            game_started_at: None,
            time_limit_s: scenario.world.time_limit_s,
            events: Vec::new(),
            outcome: None,
            metrics: None,
            questionnaire: None,
        };
        let position = scenario.graph.initial_position();
        let mut session = Session {
            id,
            scenario,
            config,
            participants,
            phase: Phase::Instructions,
            ready: [false; 2],
            instructions_at: now,
            position,
            world: None,
            rng: ChaCha8Rng::seed_from_u64(seed),
            log,
            sink,
            token,
            disconnected: [None; 2],
            last_timer: None,
            last_options: None,
            last_ts: now,
        };
        if let Some(sink) = session.sink.as_mut() {
            sink.begin(&session.log).map_err(SessionError::Storage)?;
        }
        session.log_phase(now, None)?;
        let mut out = Vec::new();
        for role in [Role::Operator, Role::Wizard] {
            out.extend(session.greeting(role));
        }
        Ok((session, out))
    }

    fn greeting(&self, role: Role) -> Vec<Outgoing> {
        let ins = &self.scenario.instructions;
        let (text, video) = match role {
            Role::Operator => (ins.operator.clone(), ins.video_operator.clone()),
            Role::Wizard => (ins.wizard.clone(), ins.video_wizard.clone()),
        };
        vec![
            Outgoing::new(
                role.into(),
                Payload::RoleAssigned(RoleAssigned { role, participant: self.participants[idx(role)].clone() }),
            ),
            Outgoing::new(
                role.into(),
                Payload::Instructions(InstructionsMsg {
                    role,
                    text,
                    video,
                    min_read_s: self.config.instructions_min_read_s,
                }),
            ),
        ]
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn position(&self) -> &FsmPosition {
        &self.position
    }

    pub fn world(&self) -> Option<&WorldState> {
        self.world.as_ref()
    }

    pub fn log(&self) -> &DialogueLog {
        &self.log
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn participant(&self, role: Role) -> &str {
        &self.participants[idx(role)]
    }

    pub fn role_of(&self, participant: &str) -> Option<Role> {
        [Role::Operator, Role::Wizard].into_iter().find(|r| self.participants[idx(*r)] == participant)
    }

    /// The completion token, once the game is over.
    pub fn token(&self) -> Option<&str> {
        (self.phase >= Phase::Questionnaire).then_some(self.token.as_str())
    }

    pub fn outcome(&self) -> Option<&SessionOutcome> {
        self.log.outcome.as_ref()
    }

    pub fn is_disconnected(&self, role: Role) -> bool {
        self.disconnected[idx(role)].is_some()
    }

    /// Earliest instant at which `tick` has something to do on its own.
    pub fn game_deadline(&self) -> Option<SimTime> {
        self.world.as_ref().map(|w| w.deadline())
    }

    fn view(&self, now: SimTime) -> WorldView {
        self.world.as_ref().map(|w| w.view(now)).unwrap_or_default()
    }

    fn record(&mut self, mut event: LogEvent) -> Result<(), SessionError> {
        event.seq = self.log.events.len() as u64 + 1;
        event.ts = event.ts.max(self.last_ts);
        self.last_ts = event.ts;
        if let Some(sink) = self.sink.as_mut() {
            sink.append(&event).map_err(SessionError::Storage)?;
        }
        self.log.events.push(event);
        Ok(())
    }

    fn log_phase(&mut self, now: SimTime, detail: Option<String>) -> Result<(), SessionError> {
        let mut e = LogEvent::new(0, now, Actor::System, EventKind::Phase);
        e.text = Some(self.phase.as_str().to_string());
        e.detail = detail;
        self.record(e)
    }

    fn require_phase(&self, phase: Phase) -> Result<(), SessionError> {
        if self.phase == phase {
            Ok(())
        } else if self.phase >= Phase::Questionnaire {
            Err(SessionError::AlreadyClosed)
        } else {
            Err(SessionError::WrongPhase(self.phase.as_str()))
        }
    }

    /// A participant has finished reading the instructions.
    pub fn ready(&mut self, role: Role, now: SimTime) -> Result<Vec<Outgoing>, SessionError> {
        self.require_phase(Phase::Instructions)?;
        let earliest = self.instructions_at.plus_secs(self.config.instructions_min_read_s);
        if now < earliest {
            return Err(SessionError::TooEarly(crate::time::ceil_secs(earliest.since(now))));
        }
        self.ready[idx(role)] = true;
        if self.ready.iter().all(|r| *r) {
            self.begin_game(now)
        } else {
            Ok(Vec::new())
        }
    }

    pub fn begin_game(&mut self, now: SimTime) -> Result<Vec<Outgoing>, SessionError> {
        self.require_phase(Phase::Instructions)?;
        if !self.ready.iter().all(|r| *r) {
            return Err(SessionError::NotBothReady);
        }
        let world = init_world(self.scenario.world.clone(), now)
            .map_err(|e| SessionError::World(WorldError::UnknownLocation(e.to_string())))?;
        self.world = Some(world);
        self.position = self.scenario.graph.initial_position();
        self.phase = Phase::Playing;
        self.log.game_started_at = Some(now);
        let mut e = LogEvent::new(0, now, Actor::System, EventKind::Phase);
        e.text = Some(Phase::Playing.as_str().to_string());
        e.fsm_state_after = Some(self.position.current_state.clone());
        e.locked_after = Some(self.position.lock_active);
        self.record(e)?;
        let mut out = Vec::new();
        self.push_timer(now, &mut out, true);
        self.push_options(now, &mut out, true);
        Ok(out)
    }

    /// Ticks the world to `now`, broadcasting milestones.
    fn advance(&mut self, now: SimTime, out: &mut Vec<Outgoing>) -> Result<(), SessionError> {
        let Some(world) = self.world.as_mut() else {
            return Ok(());
        };
        let events = world.tick(now)?;
        for m in &events {
            self.log_milestone(m)?;
            out.push(Outgoing::new(Recipient::Both, Payload::WorldEvent(world_event(m))));
        }
        self.push_timer(now, out, false);
        Ok(())
    }

    fn log_milestone(&mut self, m: &MilestoneEvent) -> Result<(), SessionError> {
        let mut e = LogEvent::new(0, m.at, Actor::System, EventKind::Milestone);
        e.text = Some(m.narration.clone());
        e.milestone = Some(MilestoneRecord {
            id: m.id.clone(),
            kind: m.kind,
            media_ref: m.media_ref.clone(),
            robot: m.robot.clone(),
            location: m.location.clone(),
        });
        self.record(e)
    }

    fn push_timer(&mut self, now: SimTime, out: &mut Vec<Outgoing>, force: bool) {
        let Some(world) = self.world.as_ref() else { return };
        let remaining = world.remaining_time(now);
        if force || self.last_timer != Some(remaining) {
            self.last_timer = Some(remaining);
            out.push(Outgoing::new(
                Recipient::Both,
                Payload::Timer(Timer { remaining_s: remaining, display: format_clock(remaining) }),
            ));
        }
    }

    /// The option panel the wizard should currently see.
    pub fn action_options(&self, now: SimTime) -> ActionOptions {
        let view = self.view(now);
        let graph = &self.scenario.graph;
        let options = if self.phase == Phase::Playing {
            fsm::available_actions(graph, &self.position, &view)
                .into_iter()
                .map(|o| OptionView {
                    id: o.id.clone(),
                    kind: o.kind,
                    da_type: o.da_type,
                    preview: o.templates.first().map(|t| {
                        fsm::template::capitalize_first(&t.render_partial(|name| match name {
                            "emergency_location" | "emergency_type" | "emergency_detail" => self.static_slot(name),
                            _ => graph.slot_defaults.get(name).map(String::as_str),
                        }))
                    }),
                    global: o.global,
                    slots: fsm::slot_choices(o, &view),
                })
                .collect()
        } else {
            Vec::new()
        };
        let robots = self
            .world
            .as_ref()
            .map(|w| {
                w.robots()
                    .map(|r| RobotPanel {
                        id: r.id.clone(),
                        kind: r.kind,
                        status: r.status,
                        location: r.location.clone(),
                        capabilities: r.capabilities.iter().copied().collect(),
                    })
                    .collect()
            })
            .unwrap_or_default();
        ActionOptions {
            state: self.position.current_state.clone(),
            locked: self.position.lock_active,
            pending: self.position.pending_authorization.clone(),
            options,
            robots,
        }
    }

    fn static_slot(&self, name: &str) -> Option<&str> {
        let e = &self.scenario.world.emergency;
        match name {
            "emergency_location" => Some(e.location.as_str()),
            "emergency_type" => Some(e.kind.as_str()),
            "emergency_detail" => Some(e.detail.as_str()).filter(|d| !d.is_empty()),
            _ => None,
        }
    }

    fn push_options(&mut self, now: SimTime, out: &mut Vec<Outgoing>, force: bool) {
        let opts = self.action_options(now);
        if force || self.last_options.as_ref() != Some(&opts) {
            self.last_options = Some(opts.clone());
            out.push(Outgoing::new(Recipient::Wizard, Payload::ActionOptions(opts)));
        }
    }

    pub fn operator_message(&mut self, text: &str, now: SimTime) -> Result<Vec<Outgoing>, SessionError> {
        self.require_phase(Phase::Playing)?;
        let text = text.trim();
        if text.is_empty() {
            return Err(SessionError::EmptyMessage);
        }
        let mut out = Vec::new();
        self.advance(now, &mut out)?;
        let mut e = LogEvent::new(0, now, Actor::Operator, EventKind::Chat);
        e.text = Some(text.to_string());
        self.record(e)?;
        out.push(Outgoing::new(
            Recipient::Both,
            Payload::Chat(Chat { from: Some(Role::Operator), ..Chat::text(text) }),
        ));
        let next = fsm::operator_event(&self.scenario.graph, &self.position, text);
        if next != self.position {
            let mut e = LogEvent::new(0, now, Actor::System, EventKind::Lock);
            e.fsm_state_before = Some(self.position.current_state.clone());
            e.fsm_state_after = Some(next.current_state.clone());
            e.locked_after = Some(next.lock_active);
            e.detail = Some("unlocked".into());
            self.record(e)?;
            self.position = next;
        }
        self.finish_turn(now, &mut out)?;
        Ok(out)
    }

    pub fn wizard_action(
        &mut self,
        action_id: &str,
        slots: &BTreeMap<String, String>,
        now: SimTime,
    ) -> Result<Vec<Outgoing>, SessionError> {
        self.require_phase(Phase::Playing)?;
        let mut out = Vec::new();
        self.advance(now, &mut out)?;
        if self.phase != Phase::Playing {
            return Ok(out);
        }
        let view = self.view(now);
        let result = fsm::apply_action(&self.scenario.graph, &self.position, &view, action_id, slots, &mut self.rng)?;

        // Dry-run the commands so a failure leaves no trace.
        let mut world = self.world.clone().expect("playing sessions have a world");
        for cmd in &result.world_commands {
            world.execute(cmd, now)?;
        }
        self.world = Some(world);

        let option_kind = result.kind.unwrap_or(OptionKind::Verbal);
        let mut e = LogEvent::new(0, now, Actor::Wizard, EventKind::WizardOption);
        e.dialogue_act = result.dialogue_act.clone();
        e.da_type = result.da_type;
        e.option_kind = Some(option_kind);
        e.text = result.rendered_utterance.clone();
        e.slots = result.slots.clone();
        e.fsm_state_before = Some(self.position.current_state.clone());
        e.fsm_state_after = Some(result.new_position.current_state.clone());
        e.locked_after = Some(result.new_position.lock_active);
        self.record(e)?;
        if let (OptionKind::Verbal, Some(text)) = (option_kind, &result.rendered_utterance) {
            out.push(Outgoing::new(
                Recipient::Both,
                Payload::Chat(Chat {
                    text: text.clone(),
                    from: Some(Role::Wizard),
                    dialogue_act: result.dialogue_act.clone(),
                    da_type: result.da_type,
                    typed: Some(false),
                }),
            ));
        }
        for cmd in &result.world_commands {
            let mut e = LogEvent::new(0, now, Actor::Wizard, EventKind::WorldCommand);
            e.dialogue_act = result.dialogue_act.clone();
            e.command = Some(cmd.clone());
            e.world_snapshot = self.world.as_ref().map(|w| w.snapshot(now));
            self.record(e)?;
        }
        self.position = result.new_position;
        self.advance(now, &mut out)?;
        self.finish_turn(now, &mut out)?;
        Ok(out)
    }

    pub fn wizard_free_text(&mut self, text: &str, now: SimTime) -> Result<Vec<Outgoing>, SessionError> {
        self.require_phase(Phase::Playing)?;
        let result = fsm::record_free_text(&self.position, text).map_err(|_| SessionError::EmptyMessage)?;
        let mut out = Vec::new();
        self.advance(now, &mut out)?;
        let text = result.rendered_utterance.unwrap_or_default();
        let mut e = LogEvent::new(0, now, Actor::Wizard, EventKind::WizardFreeText);
        e.typed = true;
        e.text = Some(text.clone());
        e.fsm_state_before = Some(self.position.current_state.clone());
        e.fsm_state_after = Some(result.new_position.current_state.clone());
        e.locked_after = Some(result.new_position.lock_active);
        self.record(e)?;
        out.push(Outgoing::new(
            Recipient::Both,
            Payload::Chat(Chat { from: Some(Role::Wizard), typed: Some(true), ..Chat::text(text) }),
        ));
        self.finish_turn(now, &mut out)?;
        Ok(out)
    }

    pub fn hint_request(&mut self, now: SimTime) -> Result<Vec<Outgoing>, SessionError> {
        self.require_phase(Phase::Playing)?;
        let mut out = Vec::new();
        self.advance(now, &mut out)?;
        let view = self.view(now);
        let action = fsm::suggest_hint(&self.scenario.graph, &self.position, &view, &mut self.rng)?;
        let mut e = LogEvent::new(0, now, Actor::Wizard, EventKind::Hint);
        e.dialogue_act = Some(action.clone());
        self.record(e)?;
        self.finish_turn(now, &mut out)?;
        out.push(Outgoing::new(Recipient::Wizard, Payload::HintHighlight(HintHighlight { action })));
        Ok(out)
    }

    /// Pushes a fresh option panel if it changed and closes the game once
    /// the deadline has been processed.
    fn finish_turn(&mut self, now: SimTime, out: &mut Vec<Outgoing>) -> Result<(), SessionError> {
        if self.phase != Phase::Playing {
            return Ok(());
        }
        if self.world.as_ref().is_some_and(|w| w.is_over()) {
            let closure = if self.world.as_ref().is_some_and(|w| w.progress().resolved) {
                Closure::Completed
            } else {
                Closure::Evacuated
            };
            out.extend(self.close(closure, now)?);
            return Ok(());
        }
        self.push_options(now, out, false);
        Ok(())
    }

    /// Advances the session clock: world events, timers, the deadline and
    /// disconnect grace periods.
    pub fn tick(&mut self, now: SimTime) -> Result<Vec<Outgoing>, SessionError> {
        let mut out = Vec::new();
        if self.phase >= Phase::Questionnaire {
            return Ok(out);
        }
        let grace = self.config.disconnect_grace_s * 1000;
        let gone = [Role::Operator, Role::Wizard]
            .into_iter()
            .find(|r| self.disconnected[idx(*r)].is_some_and(|at| now.since(at) >= grace));
        if self.phase == Phase::Playing {
            self.advance(now, &mut out)?;
            if let Some(role) = gone.filter(|_| self.world.as_ref().is_some_and(|w| !w.is_over())) {
                out.extend(self.close(Closure::Disconnect(role), now)?);
                return Ok(out);
            }
            self.finish_turn(now, &mut out)?;
        } else if let Some(role) = gone {
            out.extend(self.close(Closure::Disconnect(role), now)?);
        }
        Ok(out)
    }

    pub fn disconnect(&mut self, role: Role, now: SimTime) {
        if self.phase < Phase::Questionnaire && self.disconnected[idx(role)].is_none() {
            self.disconnected[idx(role)] = Some(now);
        }
    }

    /// A participant came back within the grace period. Returns what they
    /// need to resynchronise.
    pub fn reconnect(&mut self, role: Role, now: SimTime) -> Vec<Outgoing> {
        self.disconnected[idx(role)] = None;
        let mut out = Vec::new();
        match self.phase {
            Phase::Instructions => out.extend(self.greeting(role)),
            Phase::Playing => {
                out.push(Outgoing::new(
                    role.into(),
                    Payload::RoleAssigned(RoleAssigned { role, participant: self.participants[idx(role)].clone() }),
                ));
                if let Some(w) = &self.world {
                    let remaining = w.remaining_time(now);
                    out.push(Outgoing::new(
                        role.into(),
                        Payload::Timer(Timer { remaining_s: remaining, display: format_clock(remaining) }),
                    ));
                }
                if role == Role::Wizard {
                    let opts = self.action_options(now);
                    self.last_options = Some(opts.clone());
                    out.push(Outgoing::new(Recipient::Wizard, Payload::ActionOptions(opts)));
                }
            }
            Phase::Questionnaire | Phase::Closed => {
                if let Some(end) = self.session_end() {
                    out.push(Outgoing::new(role.into(), Payload::SessionEnd(end)));
                }
            }
        }
        out
    }

    fn session_end(&self) -> Option<SessionEnd> {
        self.log.outcome.as_ref().map(|o| SessionEnd {
            reason: o.reason,
            token: o.token.clone(),
            resolved: o.resolved,
            duration_played_s: o.duration_played_ms / 1000,
            reward_cents: o.reward_operator_cents,
            reward: format_cents(o.reward_operator_cents),
        })
    }

    /// Ends the game and hands both participants their token.
    pub fn close(&mut self, closure: Closure, now: SimTime) -> Result<Vec<Outgoing>, SessionError> {
        if self.phase >= Phase::Questionnaire {
            return Err(SessionError::AlreadyClosed);
        }
        let limit_ms = self.scenario.world.time_limit_s * 1000;
        let played = self.log.game_started_at.map_or(0, |start| now.since(start).min(limit_ms));
        let progress = self.world.as_ref().map(|w| w.progress()).unwrap_or_default();
        let (reason, disconnected) = match closure {
            Closure::Completed => (CloseReason::Completed, None),
            Closure::Evacuated => (CloseReason::Evacuated, None),
            Closure::Disconnect(r) => (CloseReason::Disconnect, Some(r)),
            Closure::LobbyTimeout => (CloseReason::LobbyTimeout, None),
        };
        let reward = self.config.reward.amount(played, progress.resolved);
        self.log.outcome = Some(SessionOutcome {
            reason,
            duration_played_ms: played,
            resolved: progress.resolved,
            evacuated: progress.evacuated,
            disconnected,
            reward_operator_cents: reward,
            reward_wizard_cents: reward,
            token: self.token.clone(),
        });
        self.phase = Phase::Questionnaire;
        let detail = serde_json::to_value(reason).ok().and_then(|v| v.as_str().map(str::to_string));
        self.log_phase(now, detail)?;
        let end = self.session_end().expect("outcome just set");
        Ok(vec![Outgoing::new(Recipient::Both, Payload::SessionEnd(end))])
    }

    /// After the questionnaire (or when nobody is left), nothing more
    /// happens in this session.
    pub fn mark_closed(&mut self, now: SimTime) -> Result<(), SessionError> {
        if self.phase != Phase::Questionnaire {
            return Err(SessionError::WrongPhase(self.phase.as_str()));
        }
        self.phase = Phase::Closed;
        self.log_phase(now, None)
    }

    /// Hands the finished log over, with metrics embedded.
    pub fn finished_log(&self) -> DialogueLog {
        let mut log = self.log.clone();
        log.metrics = Some(log.compute_metrics());
        log
    }

    pub fn sink_mut(&mut self) -> Option<&mut Box<dyn EventSink>> {
        self.sink.as_mut()
    }
}

fn world_event(m: &MilestoneEvent) -> WorldEventMsg {
    WorldEventMsg {
        id: m.id.clone(),
        kind: m.kind,
        narration: m.narration.clone(),
        media_ref: m.media_ref.clone(),
        robot: m.robot.clone(),
        location: m.location.clone(),
    }
}

pub use Closure as SessionClosure;
