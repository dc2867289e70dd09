//! Participant pay, in integer cents.

use serde::{Deserialize, Serialize};

use crate::log::SessionOutcome;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardTiers {
    pub base_cents: u32,
    pub per_minute_cents: u32,
    pub max_paid_minutes: u32,
    pub success_bonus_cents: u32,
}

impl Default for RewardTiers {
    fn default() -> Self {
        RewardTiers { base_cents: 50, per_minute_cents: 15, max_paid_minutes: 6, success_bonus_cents: 20 }
    }
}

impl RewardTiers {
    /// Pay for a game of `played_ms`, counting whole minutes only.
    pub fn amount(&self, played_ms: u64, resolved: bool) -> u32 {
        let minutes = (played_ms / 60_000).min(self.max_paid_minutes as u64) as u32;
        let bonus = if resolved { self.success_bonus_cents } else { 0 };
        self.base_cents + self.per_minute_cents * minutes + bonus
    }

    pub fn max_amount(&self) -> u32 {
        self.base_cents + self.per_minute_cents * self.max_paid_minutes + self.success_bonus_cents
    }
}

/// Both participants are paid the same.
pub fn compute_reward(outcome: &SessionOutcome, tiers: &RewardTiers) -> u32 {
    tiers.amount(outcome.duration_played_ms, outcome.resolved)
}

pub fn format_cents(cents: u32) -> String {
    format!("${}.{:02}", cents / 100, cents % 100)
}
