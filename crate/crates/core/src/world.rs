//! Emergency-response world: robots, timed robot tasks, the emergency
//! lifecycle, milestone events and the evacuation deadline.
//!
//! The world never reads a clock. Every operation takes the current
//! [`SimTime`], so tests can drive it with a virtual clock.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::template::{capitalize_first, Template};
use crate::time::{ceil_secs, format_clock, SimTime};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotKind {
    Husky,
    Quadcopter,
}

impl RobotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RobotKind::Husky => "husky",
            RobotKind::Quadcopter => "quadcopter",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "husky" => Some(RobotKind::Husky),
            "quadcopter" => Some(RobotKind::Quadcopter),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Capability {
    Inspect,
    ExtinguishHose,
    ExtinguishSprinkler,
    OpenValve,
    AssessDamage,
}

impl Capability {
    pub const ALL: [Capability; 5] = [
        Capability::Inspect,
        Capability::ExtinguishHose,
        Capability::ExtinguishSprinkler,
        Capability::OpenValve,
        Capability::AssessDamage,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Capability::Inspect => "inspect",
            Capability::ExtinguishHose => "extinguish_hose",
            Capability::ExtinguishSprinkler => "extinguish_sprinkler",
            Capability::OpenValve => "open_valve",
            Capability::AssessDamage => "assess_damage",
        }
    }

    pub fn extinguishes(self) -> bool {
        matches!(self, Capability::ExtinguishHose | Capability::ExtinguishSprinkler)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RobotStatus {
    Idle,
    Moving,
    Working,
}

/// Emergency lifecycle. Ordered: Latent < Located < Resolved < Assessed.
/// `Evacuated` is terminal and only reachable at the deadline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmergencyStatus {
    Latent,
    Located,
    Resolved,
    Assessed,
    Evacuated,
}

impl EmergencyStatus {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "latent" => Some(EmergencyStatus::Latent),
            "located" => Some(EmergencyStatus::Located),
            "resolved" => Some(EmergencyStatus::Resolved),
            "assessed" => Some(EmergencyStatus::Assessed),
            "evacuated" => Some(EmergencyStatus::Evacuated),
            _ => None,
        }
    }

    /// Position on the success track; `Evacuated` sits outside it.
    fn rank(self) -> Option<u8> {
        match self {
            EmergencyStatus::Latent => Some(0),
            EmergencyStatus::Located => Some(1),
            EmergencyStatus::Resolved => Some(2),
            EmergencyStatus::Assessed => Some(3),
            EmergencyStatus::Evacuated => None,
        }
    }

    pub fn at_least(self, other: EmergencyStatus) -> bool {
        match (self.rank(), other.rank()) {
            (Some(a), Some(b)) => a >= b,
            _ => self == other,
        }
    }

    pub fn before(self, other: EmergencyStatus) -> bool {
        match (self.rank(), other.rank()) {
            (Some(a), Some(b)) => a < b,
            _ => false,
        }
    }

    pub fn is_resolved(self) -> bool {
        matches!(self, EmergencyStatus::Resolved | EmergencyStatus::Assessed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilestoneKind {
    RobotArrived,
    EmergencyLocated,
    EmergencyResolved,
    DamageAssessed,
    TaskCompleted,
    TimerWarning,
    Evacuation,
}

impl MilestoneKind {
    pub const ALL: [MilestoneKind; 7] = [
        MilestoneKind::RobotArrived,
        MilestoneKind::EmergencyLocated,
        MilestoneKind::EmergencyResolved,
        MilestoneKind::DamageAssessed,
        MilestoneKind::TaskCompleted,
        MilestoneKind::TimerWarning,
        MilestoneKind::Evacuation,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MilestoneKind::RobotArrived => "robot_arrived",
            MilestoneKind::EmergencyLocated => "emergency_located",
            MilestoneKind::EmergencyResolved => "emergency_resolved",
            MilestoneKind::DamageAssessed => "damage_assessed",
            MilestoneKind::TaskCompleted => "task_completed",
            MilestoneKind::TimerWarning => "timer_warning",
            MilestoneKind::Evacuation => "evacuation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }

    fn default_narration(self) -> &'static str {
        match self {
            MilestoneKind::RobotArrived => "{robot} reached {location}",
            MilestoneKind::EmergencyLocated => "{robot} found a {emergency_type} at {location}",
            MilestoneKind::EmergencyResolved => "The {emergency_type} at {location} is out",
            MilestoneKind::DamageAssessed => "{robot} finished assessing the damage at {location}",
            MilestoneKind::TaskCompleted => "{robot} finished at {location}",
            MilestoneKind::TimerWarning => "{remaining} left before evacuation",
            MilestoneKind::Evacuation => "Time is up: the platform is being evacuated",
        }
    }
}

/// Slots a milestone narration may use.
pub const NARRATION_SLOTS: [&str; 4] = ["robot", "location", "emergency_type", "remaining"];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MilestoneEvent {
    pub id: String,
    pub kind: MilestoneKind,
    pub at: SimTime,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_ref: Option<String>,
    pub narration: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "type", content = "capability")]
pub enum RobotAction {
    Move,
    Perform(Capability),
}

impl fmt::Display for RobotAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RobotAction::Move => f.write_str("move"),
            RobotAction::Perform(c) => f.write_str(c.as_str()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RobotSpec {
    pub id: String,
    pub kind: RobotKind,
    pub capabilities: BTreeSet<Capability>,
    pub start: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmergencySpec {
    pub location: String,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Route {
    pub kind: RobotKind,
    pub from: String,
    pub to: String,
    pub seconds: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DurationTable {
    pub travel: BTreeMap<RobotKind, u64>,
    pub routes: Vec<Route>,
    pub work: BTreeMap<Capability, BTreeMap<RobotKind, u64>>,
}

impl DurationTable {
    /// Travel seconds between two locations; zero when already there.
    pub fn travel_secs(&self, kind: RobotKind, from: &str, to: &str) -> Option<u64> {
        if from == to {
            return Some(0);
        }
        self.routes
            .iter()
            .find(|r| r.kind == kind && ((r.from == from && r.to == to) || (r.from == to && r.to == from)))
            .map(|r| r.seconds)
            .or_else(|| self.travel.get(&kind).copied())
    }

    pub fn work_secs(&self, kind: RobotKind, cap: Capability) -> Option<u64> {
        self.work.get(&cap).and_then(|m| m.get(&kind)).copied()
    }
}

/// The world half of a compiled scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorldConfig {
    pub robots: Vec<RobotSpec>,
    pub locations: Vec<String>,
    pub emergency: EmergencySpec,
    pub durations: DurationTable,
    pub time_limit_s: u64,
    pub timer_warnings_s: Vec<u64>,
    /// Milestone media, keyed by `<kind>` or `<kind>:<robot kind>`.
    pub media: BTreeMap<String, String>,
    pub narrations: BTreeMap<MilestoneKind, Template>,
    pub allow_cancel: bool,
}

impl WorldConfig {
    fn media_for(&self, kind: MilestoneKind, robot: Option<RobotKind>) -> Option<String> {
        robot
            .and_then(|rk| self.media.get(&format!("{}:{}", kind.as_str(), rk.as_str())))
            .or_else(|| self.media.get(kind.as_str()))
            .cloned()
    }

    fn narration(&self, kind: MilestoneKind) -> Template {
        self.narrations
            .get(&kind)
            .cloned()
            .unwrap_or_else(|| Template::parse(kind.default_narration()).expect("built-in narration"))
    }

    pub fn robot(&self, id: &str) -> Option<&RobotSpec> {
        self.robots.iter().find(|r| r.id.eq_ignore_ascii_case(id.trim()))
    }

    pub fn location(&self, name: &str) -> Option<&str> {
        self.locations.iter().find(|l| l.eq_ignore_ascii_case(name.trim())).map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Robot {
    pub id: String,
    pub kind: RobotKind,
    pub capabilities: BTreeSet<Capability>,
    pub location: String,
    pub status: RobotStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotTask {
    pub seq: u32,
    pub robot: String,
    pub action: RobotAction,
    pub target: String,
    pub started_at: SimTime,
    pub travel_ms: u64,
    pub work_ms: u64,
    pub completion_event: MilestoneKind,
}

impl RobotTask {
    pub fn duration_ms(&self) -> u64 {
        self.travel_ms + self.work_ms
    }

    pub fn arrives_at(&self) -> SimTime {
        self.started_at + self.travel_ms
    }

    pub fn ends_at(&self) -> SimTime {
        self.started_at + self.duration_ms()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompletedTask {
    pub robot: String,
    pub action: RobotAction,
    pub target: String,
    pub completed_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TaskProgress {
    pub located: bool,
    pub resolved: bool,
    pub assessed: bool,
    pub evacuated: bool,
}

/// A robot status change, kept so traces can be audited after the fact.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatusChange {
    pub robot: String,
    pub from: RobotStatus,
    pub to: RobotStatus,
    pub at: SimTime,
}

/// Commands produced by dialogue options, after slot substitution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandKind {
    Move,
    Inspect,
    /// Uses whichever extinguishing capability the robot has.
    Extinguish,
    ExtinguishHose,
    ExtinguishSprinkler,
    OpenValve,
    AssessDamage,
    Cancel,
    PaAnnouncement,
    EmergencyShutdown,
}

impl CommandKind {
    pub fn needs_robot(self) -> bool {
        !matches!(self, CommandKind::PaAnnouncement | CommandKind::EmergencyShutdown)
    }

    pub fn needs_location(self) -> bool {
        !matches!(self, CommandKind::Cancel)
    }

    /// True for commands that start a robot task.
    pub fn starts_task(self) -> bool {
        !matches!(self, CommandKind::Cancel | CommandKind::PaAnnouncement | CommandKind::EmergencyShutdown)
    }

    /// Capabilities that can carry out this command; empty means any robot.
    pub fn capabilities(self) -> &'static [Capability] {
        match self {
            CommandKind::Inspect => &[Capability::Inspect],
            CommandKind::Extinguish => &[Capability::ExtinguishHose, Capability::ExtinguishSprinkler],
            CommandKind::ExtinguishHose => &[Capability::ExtinguishHose],
            CommandKind::ExtinguishSprinkler => &[Capability::ExtinguishSprinkler],
            CommandKind::OpenValve => &[Capability::OpenValve],
            CommandKind::AssessDamage => &[Capability::AssessDamage],
            _ => &[],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldCommand {
    pub command: CommandKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldError {
    #[error("{0} is already active; only one robot may act at a time")]
    RobotBusy(String),
    #[error("{robot} cannot {action}")]
    CapabilityMismatch { robot: String, action: String },
    #[error("the deadline has passed")]
    AfterDeadline,
    #[error("clock went backwards: {now} < {last}")]
    ClockWentBackwards { now: SimTime, last: SimTime },
    #[error("unknown robot {0:?}")]
    UnknownRobot(String),
    #[error("unknown location {0:?}")]
    UnknownLocation(String),
    #[error("{robot} is already at {location}")]
    AlreadyThere { robot: String, location: String },
    #[error("command {0:?} is missing its {1} argument")]
    MissingArgument(CommandKind, &'static str),
    #[error("no duration configured for {kind:?} doing {action}")]
    NoDuration { kind: RobotKind, action: String },
    #[error("cancelling robot tasks is disabled")]
    CancelDisabled,
    #[error("no cancellable task for {0}")]
    NothingToCancel(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WorldConfigError {
    #[error("the scenario declares no robots")]
    NoRobots,
    #[error("unknown emergency location {0:?}")]
    UnknownEmergencyLocation(String),
}

/// Read-only projection of the world that dialogue gating and slot
/// resolution work from.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct WorldView {
    pub remaining_s: u64,
    pub emergency: Option<EmergencyStatus>,
    pub emergency_location: String,
    pub emergency_type: String,
    pub emergency_detail: String,
    pub active: Option<ActiveTaskView>,
    pub last_completed: Option<CompletedTask>,
    pub flags: BTreeSet<String>,
    pub over: bool,
    pub robots: Vec<Robot>,
    pub locations: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveTaskView {
    pub robot: String,
    pub action: RobotAction,
    pub target: String,
    pub status: RobotStatus,
    pub travel_remaining_s: u64,
}

impl WorldView {
    /// Values the world can supply for template slots.
    pub fn context_slot(&self, name: &str) -> Option<String> {
        match name {
            "robot" => self
                .active
                .as_ref()
                .map(|t| t.robot.clone())
                .or_else(|| self.last_completed.as_ref().map(|t| t.robot.clone())),
            "location" => self
                .active
                .as_ref()
                .map(|t| t.target.clone())
                .or_else(|| self.last_completed.as_ref().map(|t| t.target.clone())),
            "eta" => self
                .active
                .as_ref()
                .filter(|t| t.status == RobotStatus::Moving)
                .map(|t| t.travel_remaining_s.to_string()),
            "time_left" => Some(format_clock(self.remaining_s)),
            "emergency_location" => non_empty(&self.emergency_location),
            "emergency_type" => non_empty(&self.emergency_type),
            "emergency_detail" => non_empty(&self.emergency_detail),
            _ => None,
        }
    }

    pub fn status(&self) -> EmergencyStatus {
        self.emergency.unwrap_or(EmergencyStatus::Latent)
    }
}

fn non_empty(s: &str) -> Option<String> {
    (!s.is_empty()).then(|| s.to_string())
}

/// Compact world state stored with each logged world command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WorldSnapshot {
    pub emergency: EmergencyStatus,
    pub robots: Vec<RobotSnapshot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub active_task: Option<RobotTask>,
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<String>,
    pub remaining_s: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RobotSnapshot {
    pub id: String,
    pub status: RobotStatus,
    pub location: String,
}

#[derive(Debug, Clone)]
pub struct WorldState {
    config: Arc<WorldConfig>,
    robots: IndexMap<String, Robot>,
    emergency: EmergencyStatus,
    active_task: Option<RobotTask>,
    last_completed: Option<CompletedTask>,
    started_at: SimTime,
    deadline: SimTime,
    milestones: Vec<MilestoneEvent>,
    fired: HashSet<String>,
    flags: BTreeSet<String>,
    last_tick: SimTime,
    task_seq: u32,
    over: bool,
    status_log: Vec<StatusChange>,
}

/// Builds a fresh world: every robot idle at its start location, the
/// emergency latent, and the deadline `time_limit_s` after `start`.
pub fn init_world(config: Arc<WorldConfig>, start: SimTime) -> Result<WorldState, WorldConfigError> {
    if config.robots.is_empty() {
        return Err(WorldConfigError::NoRobots);
    }
    if config.location(&config.emergency.location).is_none() {
        return Err(WorldConfigError::UnknownEmergencyLocation(config.emergency.location.clone()));
    }
    let robots = config
        .robots
        .iter()
        .map(|spec| {
            let robot = Robot {
                id: spec.id.clone(),
                kind: spec.kind,
                capabilities: spec.capabilities.clone(),
                location: spec.start.clone(),
                status: RobotStatus::Idle,
            };
            (spec.id.clone(), robot)
        })
        .collect();
    let deadline = start.plus_secs(config.time_limit_s);
    Ok(WorldState {
        config,
        robots,
        emergency: EmergencyStatus::Latent,
        active_task: None,
        last_completed: None,
        started_at: start,
        deadline,
        milestones: Vec::new(),
        fired: HashSet::new(),
        flags: BTreeSet::new(),
        last_tick: start,
        task_seq: 0,
        over: false,
        status_log: Vec::new(),
    })
}

enum Due {
    Arrival,
    Completion,
    Warning(u64),
    Deadline,
}

impl WorldState {
    pub fn config(&self) -> &WorldConfig {
        &self.config
    }

    pub fn robots(&self) -> impl Iterator<Item = &Robot> {
        self.robots.values()
    }

    pub fn robot(&self, id: &str) -> Option<&Robot> {
        self.config.robot(id).and_then(|spec| self.robots.get(&spec.id))
    }

    pub fn emergency(&self) -> EmergencyStatus {
        self.emergency
    }

    pub fn active_task(&self) -> Option<&RobotTask> {
        self.active_task.as_ref()
    }

    pub fn deadline(&self) -> SimTime {
        self.deadline
    }

    pub fn started_at(&self) -> SimTime {
        self.started_at
    }

    pub fn milestones(&self) -> &[MilestoneEvent] {
        &self.milestones
    }

    pub fn status_log(&self) -> &[StatusChange] {
        &self.status_log
    }

    pub fn flags(&self) -> &BTreeSet<String> {
        &self.flags
    }

    /// True once the deadline has been processed.
    pub fn is_over(&self) -> bool {
        self.over
    }

    pub fn busy_robots(&self) -> usize {
        self.robots.values().filter(|r| r.status != RobotStatus::Idle).count()
    }

    /// Seconds left before evacuation, rounded up, never negative.
    pub fn remaining_time(&self, now: SimTime) -> u64 {
        ceil_secs(self.deadline.since(now))
    }

    pub fn progress(&self) -> TaskProgress {
        let s = self.emergency;
        TaskProgress {
            located: s.at_least(EmergencyStatus::Located),
            resolved: s.at_least(EmergencyStatus::Resolved),
            assessed: s == EmergencyStatus::Assessed,
            evacuated: s == EmergencyStatus::Evacuated,
        }
    }

    fn set_status(&mut self, robot: &str, to: RobotStatus, at: SimTime) {
        let r = self.robots.get_mut(robot).expect("robot exists");
        if r.status != to {
            self.status_log.push(StatusChange { robot: robot.to_string(), from: r.status, to, at });
            r.status = to;
        }
    }

    fn check_clock(&self, now: SimTime) -> Result<(), WorldError> {
        if now < self.last_tick {
            return Err(WorldError::ClockWentBackwards { now, last: self.last_tick });
        }
        Ok(())
    }

    /// Starts a timed robot task. The robot first travels to `target`
    /// (skipped when it is already there), then works for the configured
    /// duration. Move tasks have no working time.
    pub fn start_robot_action(
        &mut self,
        robot_id: &str,
        action: RobotAction,
        target: &str,
        now: SimTime,
    ) -> Result<RobotTask, WorldError> {
        self.check_clock(now)?;
        if self.over || now >= self.deadline {
            return Err(WorldError::AfterDeadline);
        }
        let spec = self.config.robot(robot_id).ok_or_else(|| WorldError::UnknownRobot(robot_id.to_string()))?;
        let target =
            self.config.location(target).ok_or_else(|| WorldError::UnknownLocation(target.to_string()))?.to_string();
        if let Some(task) = &self.active_task {
            return Err(WorldError::RobotBusy(task.robot.clone()));
        }
        let robot = &self.robots[&spec.id];
        let work_secs = match action {
            RobotAction::Move => {
                if robot.location == target {
                    return Err(WorldError::AlreadyThere { robot: robot.id.clone(), location: target });
                }
                0
            }
            RobotAction::Perform(cap) => {
                if !robot.capabilities.contains(&cap) {
                    return Err(WorldError::CapabilityMismatch {
                        robot: robot.id.clone(),
                        action: cap.as_str().to_string(),
                    });
                }
                self.config
                    .durations
                    .work_secs(robot.kind, cap)
                    .ok_or_else(|| WorldError::NoDuration { kind: robot.kind, action: action.to_string() })?
            }
        };
        let travel_secs = self
            .config
            .durations
            .travel_secs(robot.kind, &robot.location, &target)
            .ok_or_else(|| WorldError::NoDuration { kind: robot.kind, action: "travel".into() })?;

        let completion_event = self.completion_kind(action, &target);
        self.task_seq += 1;
        let task = RobotTask {
            seq: self.task_seq,
            robot: spec.id.clone(),
            action,
            target,
            started_at: now,
            travel_ms: travel_secs * 1000,
            work_ms: work_secs * 1000,
            completion_event,
        };
        let id = spec.id.clone();
        self.active_task = Some(task.clone());
        self.set_status(&id, RobotStatus::Moving, now);
        Ok(task)
    }

    fn completion_kind(&self, action: RobotAction, target: &str) -> MilestoneKind {
        let at_emergency = target == self.config.emergency.location;
        match action {
            RobotAction::Move => MilestoneKind::RobotArrived,
            RobotAction::Perform(Capability::Inspect) if at_emergency && self.emergency == EmergencyStatus::Latent => {
                MilestoneKind::EmergencyLocated
            }
            RobotAction::Perform(c)
                if c.extinguishes() && at_emergency && self.emergency == EmergencyStatus::Located =>
            {
                MilestoneKind::EmergencyResolved
            }
            RobotAction::Perform(Capability::AssessDamage)
                if at_emergency && self.emergency == EmergencyStatus::Resolved =>
            {
                MilestoneKind::DamageAssessed
            }
            RobotAction::Perform(_) => MilestoneKind::TaskCompleted,
        }
    }

    /// Applies a command produced by a dialogue option.
    pub fn execute(&mut self, cmd: &WorldCommand, now: SimTime) -> Result<Option<RobotTask>, WorldError> {
        self.check_clock(now)?;
        let robot = || cmd.robot.as_deref().ok_or(WorldError::MissingArgument(cmd.command, "robot"));
        let location = || cmd.location.as_deref().ok_or(WorldError::MissingArgument(cmd.command, "location"));
        let perform = |cap| RobotAction::Perform(cap);
        match cmd.command {
            CommandKind::Move => self.start_robot_action(robot()?, RobotAction::Move, location()?, now).map(Some),
            CommandKind::Inspect => {
                self.start_robot_action(robot()?, perform(Capability::Inspect), location()?, now).map(Some)
            }
            CommandKind::ExtinguishHose => {
                self.start_robot_action(robot()?, perform(Capability::ExtinguishHose), location()?, now).map(Some)
            }
            CommandKind::ExtinguishSprinkler => {
                self.start_robot_action(robot()?, perform(Capability::ExtinguishSprinkler), location()?, now).map(Some)
            }
            CommandKind::OpenValve => {
                self.start_robot_action(robot()?, perform(Capability::OpenValve), location()?, now).map(Some)
            }
            CommandKind::AssessDamage => {
                self.start_robot_action(robot()?, perform(Capability::AssessDamage), location()?, now).map(Some)
            }
            CommandKind::Extinguish => {
                let id = robot()?;
                let r = self.robot(id).ok_or_else(|| WorldError::UnknownRobot(id.to_string()))?;
                let cap = if r.capabilities.contains(&Capability::ExtinguishHose) {
                    Capability::ExtinguishHose
                } else if r.capabilities.contains(&Capability::ExtinguishSprinkler) {
                    Capability::ExtinguishSprinkler
                } else {
                    return Err(WorldError::CapabilityMismatch { robot: r.id.clone(), action: "extinguish".into() });
                };
                self.start_robot_action(id, perform(cap), location()?, now).map(Some)
            }
            CommandKind::Cancel => {
                if !self.config.allow_cancel {
                    return Err(WorldError::CancelDisabled);
                }
                let id = robot()?;
                let spec = self.config.robot(id).ok_or_else(|| WorldError::UnknownRobot(id.to_string()))?;
                let rid = spec.id.clone();
                match &self.active_task {
                    Some(t) if t.robot == rid && self.robots[&rid].status == RobotStatus::Moving => {
                        self.active_task = None;
                        self.set_status(&rid, RobotStatus::Idle, now);
                        Ok(None)
                    }
                    _ => Err(WorldError::NothingToCancel(rid)),
                }
            }
            CommandKind::PaAnnouncement | CommandKind::EmergencyShutdown => {
                if self.over || now >= self.deadline {
                    return Err(WorldError::AfterDeadline);
                }
                let loc = location()?;
                self.config.location(loc).ok_or_else(|| WorldError::UnknownLocation(loc.to_string()))?;
                let flag =
                    if cmd.command == CommandKind::PaAnnouncement { "pa_announced" } else { "emergency_shutdown" };
                self.flags.insert(flag.to_string());
                Ok(None)
            }
        }
    }

    fn next_due(&self) -> Option<(SimTime, Due)> {
        if self.over {
            return None;
        }
        let mut best: Option<(SimTime, Due)> = None;
        let mut consider = |at: SimTime, due: Due| {
            if best.as_ref().is_none_or(|(b, _)| at < *b) {
                best = Some((at, due));
            }
        };
        if let Some(task) = &self.active_task {
            match self.robots[&task.robot].status {
                RobotStatus::Moving => consider(task.arrives_at(), Due::Arrival),
                RobotStatus::Working => consider(task.ends_at(), Due::Completion),
                RobotStatus::Idle => {}
            }
        }
        for &thr in &self.config.timer_warnings_s {
            if !self.fired.contains(&warning_id(thr)) {
                let at = SimTime(self.deadline.0.saturating_sub(thr * 1000));
                consider(at, Due::Warning(thr));
            }
        }
        consider(self.deadline, Due::Deadline);
        best
    }

    /// Advances the world to `now`, processing every due event in time
    /// order. Calling it again with the same instant is a no-op.
    pub fn tick(&mut self, now: SimTime) -> Result<Vec<MilestoneEvent>, WorldError> {
        self.check_clock(now)?;
        self.last_tick = now;
        let mut fired = Vec::new();
        while let Some((at, due)) = self.next_due() {
            if at > now {
                break;
            }
            match due {
                Due::Arrival => {
                    let task = self.active_task.clone().expect("active task");
                    self.robots.get_mut(&task.robot).expect("robot").location = task.target.clone();
                    if task.travel_ms > 0 {
                        let id = format!("robot_arrived:{}", task.seq);
                        self.fire(
                            &mut fired,
                            id,
                            MilestoneKind::RobotArrived,
                            at,
                            Some(&task.robot),
                            Some(&task.target),
                        );
                    }
                    self.set_status(&task.robot, RobotStatus::Working, at);
                }
                Due::Completion => {
                    let task = self.active_task.take().expect("active task");
                    self.set_status(&task.robot, RobotStatus::Idle, at);
                    let kind = self.completion_kind(task.action, &task.target);
                    match kind {
                        MilestoneKind::EmergencyLocated => self.emergency = EmergencyStatus::Located,
                        MilestoneKind::EmergencyResolved => self.emergency = EmergencyStatus::Resolved,
                        MilestoneKind::DamageAssessed => self.emergency = EmergencyStatus::Assessed,
                        _ => {}
                    }
                    let id = match kind {
                        MilestoneKind::EmergencyLocated
                        | MilestoneKind::EmergencyResolved
                        | MilestoneKind::DamageAssessed => kind.as_str().to_string(),
                        _ => format!("task_completed:{}", task.seq),
                    };
                    // Move tasks already announced themselves on arrival.
                    if task.action != RobotAction::Move {
                        self.fire(&mut fired, id, kind, at, Some(&task.robot), Some(&task.target));
                    }
                    self.last_completed = Some(CompletedTask {
                        robot: task.robot,
                        action: task.action,
                        target: task.target,
                        completed_at: at,
                    });
                }
                Due::Warning(thr) => {
                    self.fire(&mut fired, warning_id(thr), MilestoneKind::TimerWarning, at, None, None);
                }
                Due::Deadline => {
                    if !self.emergency.is_resolved() {
                        self.emergency = EmergencyStatus::Evacuated;
                        let loc = self.config.emergency.location.clone();
                        self.fire(&mut fired, "evacuation".into(), MilestoneKind::Evacuation, at, None, Some(&loc));
                    }
                    self.over = true;
                }
            }
        }
        Ok(fired)
    }

    fn fire(
        &mut self,
        out: &mut Vec<MilestoneEvent>,
        id: String,
        kind: MilestoneKind,
        at: SimTime,
        robot: Option<&str>,
        location: Option<&str>,
    ) {
        if !self.fired.insert(id.clone()) {
            return;
        }
        let robot_kind = robot.and_then(|r| self.robots.get(r)).map(|r| r.kind);
        let remaining = format_clock(self.remaining_time(at));
        let narration = self
            .config
            .narration(kind)
            .render(|slot| match slot {
                "robot" => robot,
                "location" => location,
                "emergency_type" => Some(self.config.emergency.kind.as_str()),
                "remaining" => Some(remaining.as_str()),
                _ => None,
            })
            .map(|s| capitalize_first(&s))
            .unwrap_or_else(|_| kind.as_str().to_string());
        let event = MilestoneEvent {
            id,
            kind,
            at,
            robot: robot.map(str::to_string),
            location: location.map(str::to_string),
            media_ref: self.config.media_for(kind, robot_kind),
            narration,
        };
        self.milestones.push(event.clone());
        out.push(event);
    }

    pub fn view(&self, now: SimTime) -> WorldView {
        let active = self.active_task.as_ref().map(|t| {
            let status = self.robots[&t.robot].status;
            ActiveTaskView {
                robot: t.robot.clone(),
                action: t.action,
                target: t.target.clone(),
                status,
                travel_remaining_s: ceil_secs(t.arrives_at().since(now)),
            }
        });
        WorldView {
            remaining_s: self.remaining_time(now),
            emergency: Some(self.emergency),
            emergency_location: self.config.emergency.location.clone(),
            emergency_type: self.config.emergency.kind.clone(),
            emergency_detail: self.config.emergency.detail.clone(),
            active,
            last_completed: self.last_completed.clone(),
            flags: self.flags.clone(),
            over: self.over,
            robots: self.robots.values().cloned().collect(),
            locations: self.config.locations.clone(),
        }
    }

    pub fn snapshot(&self, now: SimTime) -> WorldSnapshot {
        WorldSnapshot {
            emergency: self.emergency,
            robots: self
                .robots
                .values()
                .map(|r| RobotSnapshot { id: r.id.clone(), status: r.status, location: r.location.clone() })
                .collect(),
            active_task: self.active_task.clone(),
            flags: self.flags.clone(),
            remaining_s: self.remaining_time(now),
        }
    }
}

fn warning_id(threshold_s: u64) -> String {
    format!("timer_warning:{threshold_s}")
}

/// Legal robot status changes.
pub fn is_legal_transition(from: RobotStatus, to: RobotStatus, cancel_allowed: bool) -> bool {
    matches!(
        (from, to),
        (RobotStatus::Idle, RobotStatus::Moving)
            | (RobotStatus::Moving, RobotStatus::Working)
            | (RobotStatus::Working, RobotStatus::Idle)
    ) || (cancel_allowed && from == RobotStatus::Moving && to == RobotStatus::Idle)
}
