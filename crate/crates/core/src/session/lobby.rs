//! First-come, first-served pairing of participants.

use std::collections::{HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleAssignment {
    /// Earlier arrival operates, later arrival wizards.
    #[default]
    Queue,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LobbyConfig {
    pub timeout_s: u64,
    pub role_assignment: RoleAssignment,
    pub seed: u64,
}

impl Default for LobbyConfig {
    fn default() -> Self {
        LobbyConfig { timeout_s: 300, role_assignment: RoleAssignment::Queue, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JoinOutcome {
    Queued,
    Paired { operator: String, wizard: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LobbyError {
    #[error("participant {0:?} is already waiting or playing")]
    DuplicateJoin(String),
}

#[derive(Debug, Clone)]
pub struct Lobby {
    config: LobbyConfig,
    queue: VecDeque<(String, SimTime)>,
    engaged: HashSet<String>,
    rng: ChaCha8Rng,
}

impl Lobby {
    pub fn new(config: LobbyConfig) -> Self {
        Lobby { config, queue: VecDeque::new(), engaged: HashSet::new(), rng: ChaCha8Rng::seed_from_u64(config.seed) }
    }

    pub fn config(&self) -> &LobbyConfig {
        &self.config
    }

    pub fn enqueue(&mut self, participant: &str, now: SimTime) -> Result<JoinOutcome, LobbyError> {
        if self.engaged.contains(participant) || self.queue.iter().any(|(p, _)| p == participant) {
            return Err(LobbyError::DuplicateJoin(participant.to_string()));
        }
        self.queue.push_back((participant.to_string(), now));
        if self.queue.len() < 2 {
            return Ok(JoinOutcome::Queued);
        }
        let (first, _) = self.queue.pop_front().expect("two waiting");
        let (second, _) = self.queue.pop_front().expect("two waiting");
        self.engaged.insert(first.clone());
        self.engaged.insert(second.clone());
        let swap = match self.config.role_assignment {
            RoleAssignment::Queue => false,
            RoleAssignment::Random => self.rng.random_bool(0.5),
        };
        let (operator, wizard) = if swap { (second, first) } else { (first, second) };
        Ok(JoinOutcome::Paired { operator, wizard })
    }

    /// Removes and returns everyone who has waited `timeout_s` or longer.
    pub fn expire(&mut self, now: SimTime) -> Vec<String> {
        let limit = self.config.timeout_s * 1000;
        let mut gone = Vec::new();
        self.queue.retain(|(p, joined)| {
            let keep = now.since(*joined) < limit;
            if !keep {
                gone.push(p.clone());
            }
            keep
        });
        gone
    }

    /// A waiting participant walked away.
    pub fn leave(&mut self, participant: &str) -> bool {
        let before = self.queue.len();
        self.queue.retain(|(p, _)| p != participant);
        before != self.queue.len()
    }

    /// A paired participant's session is over; they may join again.
    pub fn release(&mut self, participant: &str) {
        self.engaged.remove(participant);
    }

    pub fn waiting(&self) -> usize {
        self.queue.len()
    }

    pub fn is_waiting(&self, participant: &str) -> bool {
        self.queue.iter().any(|(p, _)| p == participant)
    }

    pub fn next_expiry(&self) -> Option<SimTime> {
        self.queue.front().map(|(_, t)| t.plus_secs(self.config.timeout_s))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_in_queue_order() {
        let mut l = Lobby::new(LobbyConfig::default());
        assert_eq!(l.enqueue("a", SimTime::ZERO).unwrap(), JoinOutcome::Queued);
        assert_eq!(
            l.enqueue("b", SimTime::from_secs(5)).unwrap(),
            JoinOutcome::Paired { operator: "a".into(), wizard: "b".into() }
        );
        assert_eq!(l.waiting(), 0);
    }

    #[test]
    fn duplicate_join() {
        let mut l = Lobby::new(LobbyConfig::default());
        l.enqueue("a", SimTime::ZERO).unwrap();
        assert_eq!(l.enqueue("a", SimTime::ZERO), Err(LobbyError::DuplicateJoin("a".into())));
        l.enqueue("b", SimTime::ZERO).unwrap();
        assert!(l.enqueue("b", SimTime::ZERO).is_err());
        l.release("b");
        assert_eq!(l.enqueue("b", SimTime::ZERO).unwrap(), JoinOutcome::Queued);
    }

    #[test]
    fn timeout() {
        let mut l = Lobby::new(LobbyConfig::default());
        l.enqueue("a", SimTime::ZERO).unwrap();
        assert!(l.expire(SimTime::from_secs(299)).is_empty());
        assert_eq!(l.expire(SimTime::from_secs(300)), vec!["a".to_string()]);
        assert_eq!(l.waiting(), 0);
    }

    #[test]
    fn random_roles_are_seeded() {
        let cfg = LobbyConfig { role_assignment: RoleAssignment::Random, seed: 3, ..Default::default() };
        let run = || {
            let mut l = Lobby::new(cfg);
            (0..20)
                .filter_map(|i| match l.enqueue(&i.to_string(), SimTime::ZERO).unwrap() {
                    JoinOutcome::Paired { operator, .. } => Some(operator),
                    JoinOutcome::Queued => None,
                })
                .collect::<Vec<_>>()
        };
        let a = run();
        assert_eq!(a, run());
        assert!(a.iter().enumerate().any(|(i, op)| op != &(2 * i).to_string()));
    }
}
