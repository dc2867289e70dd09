//! What each scripted participant does, independent of the transport.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use woz_core::golden::{golden_script, Step, Turn};
use woz_core::protocol::{ActionOptions, Envelope, Payload};
use woz_core::session::questionnaire::{REVERSED_QUESTION, SCALE_MAX, SCALE_MIN};
use woz_core::session::Role;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Replays the reference transcript at its original timings.
    Golden,
    /// Wizard: a uniformly random advertised option. Operator: random
    /// lines, some of them approvals.
    RandomValid,
    /// Talks, but never approves anything.
    Stubborn,
    /// Reads the instructions, says ready, then does nothing.
    Idle,
}

/// Delay between an agent's moves, drawn uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ThinkTime {
    pub min_ms: u64,
    pub max_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentPolicy {
    pub role: Role,
    pub strategy: Strategy,
    pub think: ThinkTime,
    /// Chance that a random wizard types instead of picking an option.
    pub typed_prob: f64,
    pub seed: u64,
}

impl AgentPolicy {
    pub fn new(role: Role, strategy: Strategy, seed: u64) -> AgentPolicy {
        let think = match role {
            Role::Operator => ThinkTime { min_ms: 4_000, max_ms: 20_000 },
            Role::Wizard => ThinkTime { min_ms: 1_000, max_ms: 6_000 },
        };
        AgentPolicy { role, strategy, think, typed_prob: 0.05, seed }
    }
}

/// The standard pairings used for corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMix {
    Golden,
    Random,
    /// Stubborn operator, random wizard.
    Stubborn,
    /// Random operator, idle wizard.
    Idle,
}

impl PolicyMix {
    pub const ALL: [PolicyMix; 4] = [PolicyMix::Golden, PolicyMix::Random, PolicyMix::Stubborn, PolicyMix::Idle];

    pub fn name(self) -> &'static str {
        match self {
            PolicyMix::Golden => "golden",
            PolicyMix::Random => "random",
            PolicyMix::Stubborn => "stubborn",
            PolicyMix::Idle => "idle",
        }
    }

    pub fn policies(self, op_seed: u64, wiz_seed: u64) -> (AgentPolicy, AgentPolicy) {
        let (op, wiz) = match self {
            PolicyMix::Golden => (Strategy::Golden, Strategy::Golden),
            PolicyMix::Random => (Strategy::RandomValid, Strategy::RandomValid),
            PolicyMix::Stubborn => (Strategy::Stubborn, Strategy::RandomValid),
            PolicyMix::Idle => (Strategy::RandomValid, Strategy::Idle),
        };
        (AgentPolicy::new(Role::Operator, op, op_seed), AgentPolicy::new(Role::Wizard, wiz, wiz_seed))
    }
}

impl fmt::Display for PolicyMix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PolicyMix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PolicyMix::ALL
            .into_iter()
            .find(|m| m.name() == s.trim())
            .ok_or_else(|| format!("unknown policy {s:?}; expected one of golden, random, stubborn, idle"))
    }
}

/// Operator lines that approve whatever is pending.
pub const APPROVALS: &[&str] = &["Yes that sounds good", "Ok", "Ok go ahead", "Sure, do it"];

/// Operator lines that never approve.
pub const REMARKS: &[&str] = &[
    "What is the status?",
    "Send a quad copter to the east tower",
    "Use husky 2",
    "Is the fire out?",
    "Hold on, let me think",
    "What robots do we have?",
    "Not yet, wait",
    "Where is the alarm coming from?",
];

pub const WIZARD_TYPED: &[&str] = &["One moment please", "Let me check the robots", "I am not sure what you mean"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Move {
    Say(String),
    Act { action: String, slots: BTreeMap<String, String> },
    Type(String),
}

/// A policy plus everything it has seen so far.
#[derive(Debug)]
pub struct Agent {
    policy: AgentPolicy,
    rng: ChaCha8Rng,
    next_at_ms: Option<u64>,
    script: VecDeque<Step>,
    options: Option<ActionOptions>,
}

impl Agent {
    pub fn new(policy: AgentPolicy) -> Agent {
        let script = match policy.strategy {
            Strategy::Golden => golden_script().into_iter().filter(|s| s.role == policy.role).collect(),
            _ => VecDeque::new(),
        };
        Agent { rng: ChaCha8Rng::seed_from_u64(policy.seed), policy, next_at_ms: None, script, options: None }
    }

    pub fn policy(&self) -> &AgentPolicy {
        &self.policy
    }

    pub fn latest_options(&self) -> Option<&ActionOptions> {
        self.options.as_ref()
    }

    pub fn observe(&mut self, env: &Envelope) {
        if let Payload::ActionOptions(o) = &env.payload {
            self.options = Some(o.clone());
        }
    }

    /// Moves due at `game_ms` after the game started.
    pub fn decide(&mut self, game_ms: u64) -> Vec<Move> {
        match self.policy.strategy {
            Strategy::Idle => Vec::new(),
            Strategy::Golden => self.scripted(game_ms),
            Strategy::RandomValid | Strategy::Stubborn => {
                let due = *self.next_at_ms.get_or_insert_with(|| sample_think(&mut self.rng, self.policy.think));
                if game_ms < due {
                    return Vec::new();
                }
                self.next_at_ms = Some(game_ms + sample_think(&mut self.rng, self.policy.think));
                self.random_move().into_iter().collect()
            }
        }
    }

    fn scripted(&mut self, game_ms: u64) -> Vec<Move> {
        let mut out = Vec::new();
        while self.script.front().is_some_and(|s| s.at_s * 1000 <= game_ms) {
            let step = self.script.pop_front().expect("front checked");
            out.push(match step.turn {
                Turn::Say(text) => Move::Say(text.to_string()),
                Turn::Act { action, .. } => Move::Act { action: action.to_string(), slots: step.slots() },
            });
        }
        out
    }

    fn random_move(&mut self) -> Option<Move> {
        match self.policy.role {
            Role::Operator => {
                let pool = if self.policy.strategy == Strategy::Stubborn || self.rng.random_bool(0.6) {
                    REMARKS
                } else {
                    APPROVALS
                };
                pool.choose(&mut self.rng).map(|s| Move::Say(s.to_string()))
            }
            Role::Wizard => {
                if self.rng.random_bool(self.policy.typed_prob) {
                    return WIZARD_TYPED.choose(&mut self.rng).map(|s| Move::Type(s.to_string()));
                }
                let opts = self.options.as_ref()?;
                let usable: Vec<_> = opts.options.iter().filter(|o| o.slots.values().all(|v| !v.is_empty())).collect();
                let pick = *usable.choose(&mut self.rng)?;
                let slots = pick
                    .slots
                    .iter()
                    .map(|(k, vals)| (k.clone(), vals.choose(&mut self.rng).expect("non-empty").clone()))
                    .collect();
                Some(Move::Act { action: pick.id.clone(), slots })
            }
        }
    }

    /// Questionnaire answers; partners of a successful game rate a little
    /// higher. The reverse-worded item is answered the other way round.
    pub fn answers(&mut self, resolved: bool) -> [i64; 4] {
        let centre: i64 = if resolved { 5 } else { 3 };
        let (lo, hi) = (SCALE_MIN as i64, SCALE_MAX as i64);
        let mut out: [i64; 4] = std::array::from_fn(|_| (centre + self.rng.random_range(-2..=2)).clamp(lo, hi));
        out[REVERSED_QUESTION] = lo + hi - out[REVERSED_QUESTION];
        out
    }
}

fn sample_think(rng: &mut ChaCha8Rng, t: ThinkTime) -> u64 {
    if t.max_ms <= t.min_ms {
        t.min_ms
    } else {
        rng.random_range(t.min_ms..=t.max_ms)
    }
}
