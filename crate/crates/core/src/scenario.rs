//! Scenario documents: YAML in, a validated dialogue graph and world
//! configuration out. Every error names the offending document path.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::fsm::{
    ActionOption, Condition, DaType, DialogueGraph, DialogueState, LockCondition, OptionKind, SideEffect, Target,
    Template, TemplateError,
};
use crate::world::{
    Capability, CommandKind, DurationTable, EmergencySpec, MilestoneKind, RobotKind, RobotSpec, Route, WorldConfig,
    NARRATION_SLOTS,
};

/// The bundled reference scenario.
pub const REFERENCE_YAML: &str = include_str!("../scenarios/offshore_emergency.yaml");

/// Slots the running session can always try to fill.
pub const CONTEXT_SLOTS: [&str; 7] =
    ["robot", "location", "eta", "time_left", "emergency_location", "emergency_type", "emergency_detail"];

pub const DEFAULT_TIME_LIMIT_S: u64 = 360;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("parse error at {path}: {message}")]
    Parse { path: String, message: String },
    #[error("invalid scenario at {path}: {kind}")]
    Validation { path: String, kind: ValidationKind },
}

impl ScenarioError {
    pub fn path(&self) -> &str {
        match self {
            ScenarioError::Parse { path, .. } | ScenarioError::Validation { path, .. } => path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationKind {
    #[error("initial state {0:?} does not exist")]
    MissingInitialState(String),
    #[error("target state {0:?} does not exist")]
    DanglingTarget(String),
    #[error("duplicate action id {0:?}")]
    DuplicateActionId(String),
    #[error("verbal option has no templates")]
    EmptyTemplates,
    #[error("template uses unknown slot {0:?}")]
    UnknownSlot(String),
    #[error("malformed template: {0}")]
    BadTemplate(TemplateError),
    #[error("unknown value {0:?}")]
    UnknownValue(String),
    #[error("missing da_type")]
    MissingDaType,
    #[error("da_type conflicts with the da_types table")]
    DaTypeConflict,
    #[error("{0}")]
    Invalid(String),
    #[error("state {0:?} is unreachable from the initial state")]
    Unreachable(String),
    #[error("state {0:?} offers no options")]
    DeadEnd(String),
    #[error("required section is missing")]
    MissingSection,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Warning {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Escalate unreachable and dead-end states from warnings to errors.
    pub strict: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Instructions {
    pub operator: String,
    pub wizard: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_operator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video_wizard: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    /// Hex SHA-256 of the source document.
    pub hash: String,
    pub graph: Arc<DialogueGraph>,
    pub world: Arc<WorldConfig>,
    pub instructions: Instructions,
    pub warnings: Vec<Warning>,
}

impl Scenario {
    pub fn reference() -> Scenario {
        Scenario::from_yaml(REFERENCE_YAML, LoadOptions::default()).expect("bundled scenario is valid")
    }

    pub fn from_yaml(text: &str, opts: LoadOptions) -> Result<Scenario, ScenarioError> {
        let raw = parse_raw(text)?;
        let mut warnings = Vec::new();
        let world = compile_world(&raw)?;
        let graph = compile_graph(&raw, opts, &mut warnings)?;
        check_side_effects_against_world(&graph, &world)?;
        let instructions = raw
            .instructions
            .as_ref()
            .map(|i| Instructions {
                operator: i.operator.clone(),
                wizard: i.wizard.clone(),
                video_operator: i.video.as_ref().and_then(|v| v.operator.clone()),
                video_wizard: i.video.as_ref().and_then(|v| v.wizard.clone()),
            })
            .unwrap_or_default();
        Ok(Scenario {
            name: raw.name.clone().unwrap_or_else(|| "unnamed".into()),
            hash: hex::encode(Sha256::digest(text.as_bytes())),
            graph: Arc::new(graph),
            world: Arc::new(world),
            instructions,
            warnings,
        })
    }
}

/// Loads only the dialogue half of a scenario document.
pub fn load_dialogue_graph(text: &str) -> Result<DialogueGraph, ScenarioError> {
    load_dialogue_graph_with(text, LoadOptions::default()).map(|(g, _)| g)
}

pub fn load_dialogue_graph_with(text: &str, opts: LoadOptions) -> Result<(DialogueGraph, Vec<Warning>), ScenarioError> {
    let raw = parse_raw(text)?;
    let mut warnings = Vec::new();
    let graph = compile_graph(&raw, opts, &mut warnings)?;
    Ok((graph, warnings))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    #[serde(default)]
    #[allow(dead_code)]
    description: Option<String>,
    time_limit_s: Option<u64>,
    #[serde(default)]
    timer_warnings_s: Vec<u64>,
    initial_state: String,
    #[serde(default)]
    slot_defaults: BTreeMap<String, String>,
    instructions: Option<RawInstructions>,
    #[serde(default)]
    locations: Vec<String>,
    emergency: Option<RawEmergency>,
    #[serde(default)]
    robots: Vec<RawRobot>,
    durations: Option<RawDurations>,
    #[serde(default)]
    media: BTreeMap<String, String>,
    #[serde(default)]
    narrations: BTreeMap<String, String>,
    #[serde(default)]
    allow_cancel: bool,
    #[serde(default)]
    global_options: Vec<RawOption>,
    #[serde(default)]
    da_types: BTreeMap<String, String>,
    states: IndexMap<String, RawState>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstructions {
    operator: String,
    wizard: String,
    video: Option<RawVideo>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVideo {
    operator: Option<String>,
    wizard: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEmergency {
    location: String,
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    detail: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRobot {
    id: String,
    kind: String,
    capabilities: Vec<String>,
    start: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDurations {
    #[serde(default)]
    travel: BTreeMap<String, u64>,
    #[serde(default)]
    routes: Vec<RawRoute>,
    #[serde(default)]
    work: BTreeMap<String, BTreeMap<String, u64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRoute {
    kind: String,
    from: String,
    to: String,
    seconds: u64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    #[serde(default)]
    options: Vec<RawOption>,
    lock: Option<RawLock>,
    #[serde(default)]
    hint_weights: IndexMap<String, f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLock {
    awaits: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOption {
    id: String,
    kind: Option<String>,
    #[serde(default)]
    templates: Vec<String>,
    da_type: Option<String>,
    target: Option<String>,
    #[serde(default)]
    slots: Vec<String>,
    #[serde(default)]
    side_effects: Vec<RawSideEffect>,
    #[serde(default)]
    when: Vec<String>,
    #[serde(default)]
    while_locked: bool,
    #[serde(default)]
    synthetic: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSideEffect {
    command: String,
    robot: Option<String>,
    location: Option<String>,
}

fn parse_raw(text: &str) -> Result<RawScenario, ScenarioError> {
    let de = serde_yaml::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        ScenarioError::Parse {
            path: if path.is_empty() { ".".into() } else { path },
            message: e.into_inner().to_string(),
        }
    })
}

fn invalid(path: impl Into<String>, kind: ValidationKind) -> ScenarioError {
    ScenarioError::Validation { path: path.into(), kind }
}

fn parse_template(path: &str, src: &str) -> Result<Template, ScenarioError> {
    Template::parse(src).map_err(|e| invalid(path, ValidationKind::BadTemplate(e)))
}

fn parse_command(path: &str, s: &str) -> Result<CommandKind, ScenarioError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| invalid(path, ValidationKind::UnknownValue(s.to_string())))
}

fn is_slot_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn compile_option(
    raw: &RawOption,
    path: &str,
    global: bool,
    da_types: &BTreeMap<String, DaType>,
    known_context: &BTreeSet<&str>,
) -> Result<ActionOption, ScenarioError> {
    let kind = match raw.kind.as_deref() {
        None | Some("verbal") => OptionKind::Verbal,
        Some("non_verbal") => OptionKind::NonVerbal,
        Some(other) => return Err(invalid(format!("{path}.kind"), ValidationKind::UnknownValue(other.into()))),
    };
    if raw.id.trim().is_empty() {
        return Err(invalid(format!("{path}.id"), ValidationKind::Invalid("empty action id".into())));
    }
    let da_type = match (raw.da_type.as_deref(), da_types.get(&raw.id)) {
        (Some(s), table) => {
            let t = DaType::parse(s)
                .ok_or_else(|| invalid(format!("{path}.da_type"), ValidationKind::UnknownValue(s.into())))?;
            if table.is_some_and(|x| *x != t) {
                return Err(invalid(format!("{path}.da_type"), ValidationKind::DaTypeConflict));
            }
            t
        }
        (None, Some(t)) => *t,
        (None, None) => return Err(invalid(path, ValidationKind::MissingDaType)),
    };
    if kind == OptionKind::Verbal && raw.templates.is_empty() {
        return Err(invalid(format!("{path}.templates"), ValidationKind::EmptyTemplates));
    }
    let templates = raw
        .templates
        .iter()
        .enumerate()
        .map(|(i, t)| parse_template(&format!("{path}.templates[{i}]"), t))
        .collect::<Result<Vec<_>, _>>()?;
    let mut seen = HashSet::new();
    for (i, s) in raw.slots.iter().enumerate() {
        if !is_slot_name(s) || !seen.insert(s.as_str()) {
            return Err(invalid(format!("{path}.slots[{i}]"), ValidationKind::Invalid(format!("bad slot name {s:?}"))));
        }
    }
    let resolvable = |slot: &str| raw.slots.iter().any(|s| s == slot) || known_context.contains(slot);
    for (i, t) in templates.iter().enumerate() {
        if let Some(s) = t.slots().into_iter().find(|s| !resolvable(s)) {
            return Err(invalid(format!("{path}.templates[{i}]"), ValidationKind::UnknownSlot(s.into())));
        }
    }
    let mut side_effects = Vec::with_capacity(raw.side_effects.len());
    for (i, fx) in raw.side_effects.iter().enumerate() {
        let fpath = format!("{path}.side_effects[{i}]");
        let command = parse_command(&format!("{fpath}.command"), &fx.command)?;
        let arg = |name: &str, src: &Option<String>, needed: bool| -> Result<Option<Template>, ScenarioError> {
            let apath = format!("{fpath}.{name}");
            match src {
                None if needed => Err(invalid(apath, ValidationKind::MissingSection)),
                None => Ok(None),
                Some(s) => {
                    let t = parse_template(&apath, s)?;
                    if let Some(bad) = t.slots().into_iter().find(|s| !resolvable(s)) {
                        return Err(invalid(apath, ValidationKind::UnknownSlot(bad.into())));
                    }
                    Ok(Some(t))
                }
            }
        };
        side_effects.push(SideEffect {
            command,
            robot: arg("robot", &fx.robot, command.needs_robot())?,
            location: arg("location", &fx.location, command.needs_location())?,
        });
    }
    let when = raw
        .when
        .iter()
        .enumerate()
        .map(|(i, c)| {
            c.parse::<Condition>()
                .map_err(|_| invalid(format!("{path}.when[{i}]"), ValidationKind::UnknownValue(c.clone())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let target = match raw.target.as_deref() {
        None | Some("self") | Some("SELF") => Target::SelfLoop,
        Some(t) => Target::State(t.to_string()),
    };
    if global && target != Target::SelfLoop {
        return Err(invalid(
            format!("{path}.target"),
            ValidationKind::Invalid("global options must loop to self".into()),
        ));
    }
    Ok(ActionOption {
        id: raw.id.clone(),
        kind,
        templates,
        target,
        side_effects,
        da_type,
        required_slots: raw.slots.clone(),
        when,
        while_locked: raw.while_locked,
        synthetic: raw.synthetic,
        global,
    })
}

fn compile_graph(
    raw: &RawScenario,
    opts: LoadOptions,
    warnings: &mut Vec<Warning>,
) -> Result<DialogueGraph, ScenarioError> {
    let mut da_types = BTreeMap::new();
    for (id, t) in &raw.da_types {
        let parsed = DaType::parse(t)
            .ok_or_else(|| invalid(format!("da_types.{id}"), ValidationKind::UnknownValue(t.clone())))?;
        da_types.insert(id.clone(), parsed);
    }
    for k in raw.slot_defaults.keys() {
        if !is_slot_name(k) {
            return Err(invalid(format!("slot_defaults.{k}"), ValidationKind::Invalid("bad slot name".into())));
        }
    }
    let mut known_context: BTreeSet<&str> = CONTEXT_SLOTS.into_iter().collect();
    known_context.extend(raw.slot_defaults.keys().map(String::as_str));

    if raw.states.is_empty() {
        return Err(invalid("states", ValidationKind::MissingSection));
    }
    if !raw.states.contains_key(&raw.initial_state) {
        return Err(invalid("initial_state", ValidationKind::MissingInitialState(raw.initial_state.clone())));
    }

    let mut ids: HashSet<String> = HashSet::new();
    let mut check_dup = |id: &str, path: &str| {
        if ids.insert(id.to_string()) {
            Ok(())
        } else {
            Err(invalid(format!("{path}.id"), ValidationKind::DuplicateActionId(id.to_string())))
        }
    };

    let mut global_options = Vec::new();
    for (i, o) in raw.global_options.iter().enumerate() {
        let path = format!("global_options[{i}]");
        check_dup(&o.id, &path)?;
        global_options.push(compile_option(o, &path, true, &da_types, &known_context)?);
    }

    let mut states = IndexMap::new();
    for (sid, rs) in &raw.states {
        let spath = format!("states.{sid}");
        let mut options = Vec::with_capacity(rs.options.len());
        for (i, o) in rs.options.iter().enumerate() {
            let path = format!("{spath}.options[{i}]");
            check_dup(&o.id, &path)?;
            let opt = compile_option(o, &path, false, &da_types, &known_context)?;
            if let Target::State(t) = &opt.target {
                if !raw.states.contains_key(t) {
                    return Err(invalid(format!("{path}.target"), ValidationKind::DanglingTarget(t.clone())));
                }
            }
            options.push(opt);
        }
        let locked_until = match rs.lock.as_ref().map(|l| l.awaits.as_str()) {
            None => None,
            Some("operator_message") => Some(LockCondition::OperatorMessage),
            Some("operator_confirmation") => Some(LockCondition::OperatorConfirmation),
            Some(other) => {
                return Err(invalid(format!("{spath}.lock.awaits"), ValidationKind::UnknownValue(other.into())))
            }
        };
        if locked_until.is_some() && !options.iter().any(|o| o.while_locked && o.target != Target::SelfLoop) {
            return Err(invalid(
                format!("{spath}.lock"),
                ValidationKind::Invalid("a locked state needs a while_locked option leading elsewhere".into()),
            ));
        }
        if !rs.hint_weights.is_empty() {
            let mut total = 0.0;
            for (aid, w) in &rs.hint_weights {
                let wpath = format!("{spath}.hint_weights.{aid}");
                let known = options.iter().chain(global_options.iter()).any(|o| &o.id == aid);
                if !known {
                    return Err(invalid(wpath, ValidationKind::UnknownValue(aid.clone())));
                }
                if !w.is_finite() || *w < 0.0 {
                    return Err(invalid(
                        wpath,
                        ValidationKind::Invalid("weights must be finite and non-negative".into()),
                    ));
                }
                total += w;
            }
            if total <= 0.0 {
                return Err(invalid(
                    format!("{spath}.hint_weights"),
                    ValidationKind::Invalid("weights sum to zero".into()),
                ));
            }
        }
        states.insert(
            sid.clone(),
            DialogueState { id: sid.clone(), options, locked_until, hint_weights: rs.hint_weights.clone() },
        );
    }

    for id in da_types.keys() {
        if !ids.contains(id) {
            warnings.push(Warning { path: format!("da_types.{id}"), message: "maps an act no option uses".into() });
        }
    }

    let mut reachable = HashSet::new();
    let mut queue = VecDeque::from([raw.initial_state.as_str()]);
    while let Some(s) = queue.pop_front() {
        if !reachable.insert(s) {
            continue;
        }
        for o in &states[s].options {
            if let Target::State(t) = &o.target {
                queue.push_back(t.as_str());
            }
        }
    }
    for (sid, st) in &states {
        let problem = if !reachable.contains(sid.as_str()) {
            Some(ValidationKind::Unreachable(sid.clone()))
        } else if st.options.is_empty() && global_options.is_empty() {
            Some(ValidationKind::DeadEnd(sid.clone()))
        } else {
            None
        };
        if let Some(kind) = problem {
            let path = format!("states.{sid}");
            if opts.strict {
                return Err(invalid(path, kind));
            }
            warnings.push(Warning { path, message: kind.to_string() });
        }
    }

    let mut da_type_map = BTreeMap::new();
    for o in states.values().flat_map(|s| s.options.iter()).chain(global_options.iter()) {
        da_type_map.insert(o.id.clone(), o.da_type);
    }

    Ok(DialogueGraph {
        states,
        initial_state: raw.initial_state.clone(),
        global_options,
        da_type_map,
        slot_defaults: raw.slot_defaults.clone(),
    })
}

fn compile_world(raw: &RawScenario) -> Result<WorldConfig, ScenarioError> {
    if raw.locations.is_empty() {
        return Err(invalid("locations", ValidationKind::MissingSection));
    }
    let mut seen = HashSet::new();
    for (i, l) in raw.locations.iter().enumerate() {
        if l.trim().is_empty() || !seen.insert(l.to_lowercase()) {
            return Err(invalid(
                format!("locations[{i}]"),
                ValidationKind::Invalid(format!("bad or duplicate location {l:?}")),
            ));
        }
    }
    let known_location = |l: &str| raw.locations.iter().any(|x| x == l);

    let emergency = raw.emergency.as_ref().ok_or_else(|| invalid("emergency", ValidationKind::MissingSection))?;
    if !known_location(&emergency.location) {
        return Err(invalid("emergency.location", ValidationKind::UnknownValue(emergency.location.clone())));
    }
    if raw.robots.is_empty() {
        return Err(invalid("robots", ValidationKind::MissingSection));
    }

    let durations_raw = raw.durations.as_ref().ok_or_else(|| invalid("durations", ValidationKind::MissingSection))?;
    let mut travel = BTreeMap::new();
    for (k, secs) in &durations_raw.travel {
        let kind = RobotKind::parse(k)
            .ok_or_else(|| invalid(format!("durations.travel.{k}"), ValidationKind::UnknownValue(k.clone())))?;
        if *secs == 0 {
            return Err(invalid(
                format!("durations.travel.{k}"),
                ValidationKind::Invalid("durations must be positive".into()),
            ));
        }
        travel.insert(kind, *secs);
    }
    let mut routes = Vec::new();
    for (i, r) in durations_raw.routes.iter().enumerate() {
        let path = format!("durations.routes[{i}]");
        let kind = RobotKind::parse(&r.kind)
            .ok_or_else(|| invalid(format!("{path}.kind"), ValidationKind::UnknownValue(r.kind.clone())))?;
        for (field, loc) in [("from", &r.from), ("to", &r.to)] {
            if !known_location(loc) {
                return Err(invalid(format!("{path}.{field}"), ValidationKind::UnknownValue(loc.clone())));
            }
        }
        if r.seconds == 0 || r.from == r.to {
            return Err(invalid(path, ValidationKind::Invalid("routes join two places and take time".into())));
        }
        routes.push(Route { kind, from: r.from.clone(), to: r.to.clone(), seconds: r.seconds });
    }
    let mut work = BTreeMap::new();
    for (c, per_kind) in &durations_raw.work {
        let cap = Capability::ALL
            .into_iter()
            .find(|x| x.as_str() == c)
            .ok_or_else(|| invalid(format!("durations.work.{c}"), ValidationKind::UnknownValue(c.clone())))?;
        let mut m = BTreeMap::new();
        for (k, secs) in per_kind {
            let path = format!("durations.work.{c}.{k}");
            let kind = RobotKind::parse(k).ok_or_else(|| invalid(&path, ValidationKind::UnknownValue(k.clone())))?;
            if *secs == 0 {
                return Err(invalid(path, ValidationKind::Invalid("durations must be positive".into())));
            }
            m.insert(kind, *secs);
        }
        work.insert(cap, m);
    }
    let durations = DurationTable { travel, routes, work };

    let mut robots = Vec::new();
    let mut robot_ids = HashSet::new();
    for (i, r) in raw.robots.iter().enumerate() {
        let path = format!("robots[{i}]");
        if r.id.trim().is_empty() || !robot_ids.insert(r.id.to_lowercase()) {
            return Err(invalid(
                format!("{path}.id"),
                ValidationKind::Invalid(format!("bad or duplicate robot id {:?}", r.id)),
            ));
        }
        let kind = RobotKind::parse(&r.kind)
            .ok_or_else(|| invalid(format!("{path}.kind"), ValidationKind::UnknownValue(r.kind.clone())))?;
        if r.capabilities.is_empty() {
            return Err(invalid(
                format!("{path}.capabilities"),
                ValidationKind::Invalid("robots need at least one capability".into()),
            ));
        }
        let mut caps = BTreeSet::new();
        for (j, c) in r.capabilities.iter().enumerate() {
            let cpath = format!("{path}.capabilities[{j}]");
            let cap = Capability::ALL
                .into_iter()
                .find(|x| x.as_str() == c)
                .ok_or_else(|| invalid(&cpath, ValidationKind::UnknownValue(c.clone())))?;
            if durations.work_secs(kind, cap).is_none() {
                return Err(invalid(
                    cpath,
                    ValidationKind::Invalid(format!("no work duration for {} {}", kind.as_str(), c)),
                ));
            }
            caps.insert(cap);
        }
        if !known_location(&r.start) {
            return Err(invalid(format!("{path}.start"), ValidationKind::UnknownValue(r.start.clone())));
        }
        if !durations.travel.contains_key(&kind) {
            return Err(invalid(
                format!("{path}.kind"),
                ValidationKind::Invalid(format!("no travel duration for {}", r.kind)),
            ));
        }
        robots.push(RobotSpec { id: r.id.clone(), kind, capabilities: caps, start: r.start.clone() });
    }

    let time_limit_s = raw.time_limit_s.unwrap_or(DEFAULT_TIME_LIMIT_S);
    if time_limit_s == 0 {
        return Err(invalid("time_limit_s", ValidationKind::Invalid("time limit must be positive".into())));
    }
    for (i, w) in raw.timer_warnings_s.iter().enumerate() {
        if *w == 0 || *w >= time_limit_s {
            return Err(invalid(
                format!("timer_warnings_s[{i}]"),
                ValidationKind::Invalid("warning must fall inside the game".into()),
            ));
        }
    }

    for (key, asset) in &raw.media {
        let path = format!("media.{key}");
        let (kind, robot_kind) = match key.split_once(':') {
            Some((k, r)) => (k, Some(r)),
            None => (key.as_str(), None),
        };
        let ok = MilestoneKind::parse(kind).is_some() && robot_kind.is_none_or(|r| RobotKind::parse(r).is_some());
        if !ok {
            return Err(invalid(path, ValidationKind::UnknownValue(key.clone())));
        }
        if asset.trim().is_empty() || asset.contains("..") || asset.starts_with('/') {
            return Err(invalid(path, ValidationKind::Invalid("asset ids are relative paths".into())));
        }
    }

    let mut narrations = BTreeMap::new();
    for (key, src) in &raw.narrations {
        let path = format!("narrations.{key}");
        let kind =
            MilestoneKind::parse(key).ok_or_else(|| invalid(&path, ValidationKind::UnknownValue(key.clone())))?;
        let t = parse_template(&path, src)?;
        if let Some(bad) = t.slots().into_iter().find(|s| !NARRATION_SLOTS.contains(s)) {
            return Err(invalid(path, ValidationKind::UnknownSlot(bad.into())));
        }
        narrations.insert(kind, t);
    }

    Ok(WorldConfig {
        robots,
        locations: raw.locations.clone(),
        emergency: EmergencySpec {
            location: emergency.location.clone(),
            kind: emergency.kind.clone(),
            detail: emergency.detail.clone(),
        },
        durations,
        time_limit_s,
        timer_warnings_s: raw.timer_warnings_s.clone(),
        media: raw.media.clone(),
        narrations,
        allow_cancel: raw.allow_cancel,
    })
}

/// Literal robot and location arguments must name things in the world.
fn check_side_effects_against_world(graph: &DialogueGraph, world: &WorldConfig) -> Result<(), ScenarioError> {
    for (sid, state) in &graph.states {
        for (i, o) in state.options.iter().enumerate() {
            for (j, fx) in o.side_effects.iter().enumerate() {
                let path = format!("states.{sid}.options[{i}].side_effects[{j}]");
                if let Some(t) = fx.robot.as_ref().filter(|t| t.slots().is_empty()) {
                    let robot = world.robot(t.source()).ok_or_else(|| {
                        invalid(format!("{path}.robot"), ValidationKind::UnknownValue(t.source().into()))
                    })?;
                    let caps = fx.command.capabilities();
                    if !caps.is_empty() && !caps.iter().any(|c| robot.capabilities.contains(c)) {
                        return Err(invalid(
                            format!("{path}.robot"),
                            ValidationKind::Invalid(format!("{} cannot carry out this command", robot.id)),
                        ));
                    }
                }
                if let Some(t) = fx.location.as_ref().filter(|t| t.slots().is_empty()) {
                    if world.location(t.source()).is_none() {
                        return Err(invalid(
                            format!("{path}.location"),
                            ValidationKind::UnknownValue(t.source().into()),
                        ));
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "initial_state: s\nstates:\n  s:\n    options:\n      - { id: ping, templates: [\"ping\"], da_type: interaction }\n";

    #[test]
    fn reference_scenario_loads() {
        let s = Scenario::reference();
        assert_eq!(s.graph.verbal_act_count(), 40);
        assert_eq!(s.world.robots.len(), 4);
        assert_eq!(s.world.time_limit_s, 360);
        assert!(s.warnings.is_empty(), "{:?}", s.warnings);
        assert_eq!(s.hash.len(), 64);
    }

    #[test]
    fn reference_scenario_is_strict_clean() {
        Scenario::from_yaml(REFERENCE_YAML, LoadOptions { strict: true }).unwrap();
    }

    #[test]
    fn minimal_graph() {
        let g = load_dialogue_graph(MINIMAL).unwrap();
        assert_eq!(g.states.len(), 1);
        assert_eq!(g.states["s"].options.len(), 1);
        assert_eq!(g.states["s"].options[0].target, Target::SelfLoop);
    }

    #[test]
    fn dangling_target_names_state() {
        let text = MINIMAL.replace("da_type: interaction", "da_type: interaction, target: S9");
        let err = load_dialogue_graph(&text).unwrap_err();
        assert_eq!(err.path(), "states.s.options[0].target");
        assert!(err.to_string().contains("S9"));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let text = format!("{MINIMAL}      - {{ id: ping, templates: [\"pong\"], da_type: update }}\n");
        let err = load_dialogue_graph(&text).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation { kind: ValidationKind::DuplicateActionId(_), .. }));
        assert_eq!(err.path(), "states.s.options[1].id");
    }

    #[test]
    fn empty_templates_rejected() {
        let text = MINIMAL.replace("templates: [\"ping\"]", "templates: []");
        let err = load_dialogue_graph(&text).unwrap_err();
        assert_eq!(err.path(), "states.s.options[0].templates");
    }

    #[test]
    fn unknown_slot_rejected() {
        let text = MINIMAL.replace("[\"ping\"]", "[\"ping {nobody}\"]");
        let err = load_dialogue_graph(&text).unwrap_err();
        assert!(
            matches!(err, ScenarioError::Validation { kind: ValidationKind::UnknownSlot(ref s), .. } if s == "nobody")
        );
    }

    #[test]
    fn syntax_errors_are_parse_errors() {
        assert!(matches!(load_dialogue_graph("states: [unclosed"), Err(ScenarioError::Parse { .. })));
        let err = load_dialogue_graph("initial_state: s\nstates:\n  s:\n    bogus: 1\n").unwrap_err();
        assert!(matches!(err, ScenarioError::Parse { .. }));
        assert_eq!(err.path(), "states.s.bogus");
    }

    #[test]
    fn unreachable_is_warning_unless_strict() {
        let text = format!(
            "{MINIMAL}  island:\n    options:\n      - {{ id: lonely, templates: [\"x\"], da_type: update }}\n"
        );
        let (_, warnings) = load_dialogue_graph_with(&text, LoadOptions::default()).unwrap();
        assert_eq!(warnings.len(), 1);
        let err = load_dialogue_graph_with(&text, LoadOptions { strict: true }).unwrap_err();
        assert!(matches!(err, ScenarioError::Validation { kind: ValidationKind::Unreachable(_), .. }));
    }

    #[test]
    fn da_types_table_fills_missing_types() {
        let text = MINIMAL.replace(", da_type: interaction", "") + "da_types:\n  ping: request\n";
        let g = load_dialogue_graph(&text).unwrap();
        assert_eq!(g.da_type_map["ping"], DaType::Request);
    }

    #[test]
    fn locked_state_needs_escape() {
        let text = MINIMAL.replace("  s:\n", "  s:\n    lock: { awaits: operator_message }\n");
        let err = load_dialogue_graph(&text).unwrap_err();
        assert_eq!(err.path(), "states.s.lock");
    }

    #[test]
    fn loading_is_deterministic() {
        let a = load_dialogue_graph(REFERENCE_YAML).unwrap();
        let b = load_dialogue_graph(REFERENCE_YAML).unwrap();
        assert_eq!(a, b);
    }
}
