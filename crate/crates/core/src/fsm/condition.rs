//! World preconditions attached to dialogue options.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::world::{EmergencyStatus, RobotAction, RobotStatus, WorldView};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Condition {
    /// No robot task in flight.
    Idle,
    /// Some robot task in flight.
    Busy,
    Moving,
    Working,
    /// Idle, and the last finished task was a move.
    Arrived,
    StatusIs(EmergencyStatus),
    StatusAtLeast(EmergencyStatus),
    StatusBefore(EmergencyStatus),
    Flag(String),
    NoFlag(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown condition {0:?}")]
pub struct ConditionError(pub String);

impl FromStr for Condition {
    type Err = ConditionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ConditionError(s.to_string());
        let status = |v: &str| EmergencyStatus::parse(v).ok_or_else(err);
        match s.split_once(':') {
            None => match s {
                "idle" => Ok(Condition::Idle),
                "busy" => Ok(Condition::Busy),
                "moving" => Ok(Condition::Moving),
                "working" => Ok(Condition::Working),
                "arrived" => Ok(Condition::Arrived),
                _ => Err(err()),
            },
            Some(("status_is", v)) => Ok(Condition::StatusIs(status(v)?)),
            Some(("status_at_least", v)) => Ok(Condition::StatusAtLeast(status(v)?)),
            Some(("status_before", v)) => Ok(Condition::StatusBefore(status(v)?)),
            Some(("flag", v)) if !v.is_empty() => Ok(Condition::Flag(v.to_string())),
            Some(("no_flag", v)) if !v.is_empty() => Ok(Condition::NoFlag(v.to_string())),
            _ => Err(err()),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = |s: &EmergencyStatus| format!("{s:?}").to_lowercase();
        match self {
            Condition::Idle => f.write_str("idle"),
            Condition::Busy => f.write_str("busy"),
            Condition::Moving => f.write_str("moving"),
            Condition::Working => f.write_str("working"),
            Condition::Arrived => f.write_str("arrived"),
            Condition::StatusIs(s) => write!(f, "status_is:{}", status(s)),
            Condition::StatusAtLeast(s) => write!(f, "status_at_least:{}", status(s)),
            Condition::StatusBefore(s) => write!(f, "status_before:{}", status(s)),
            Condition::Flag(v) => write!(f, "flag:{v}"),
            Condition::NoFlag(v) => write!(f, "no_flag:{v}"),
        }
    }
}

impl Condition {
    pub fn holds(&self, world: &WorldView) -> bool {
        let phase = world.active.as_ref().map(|t| t.status);
        match self {
            Condition::Idle => world.active.is_none(),
            Condition::Busy => world.active.is_some(),
            Condition::Moving => phase == Some(RobotStatus::Moving),
            Condition::Working => phase == Some(RobotStatus::Working),
            Condition::Arrived => {
                world.active.is_none() && world.last_completed.as_ref().is_some_and(|t| t.action == RobotAction::Move)
            }
            Condition::StatusIs(s) => world.status() == *s,
            Condition::StatusAtLeast(s) => world.status().at_least(*s),
            Condition::StatusBefore(s) => world.status().before(*s),
            Condition::Flag(v) => world.flags.contains(v),
            Condition::NoFlag(v) => !world.flags.contains(v),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::ActiveTaskView;

    #[test]
    fn round_trips_through_text() {
        for s in [
            "idle",
            "busy",
            "moving",
            "working",
            "arrived",
            "status_is:located",
            "status_at_least:resolved",
            "status_before:located",
            "flag:pa_announced",
            "no_flag:x",
        ] {
            assert_eq!(s.parse::<Condition>().unwrap().to_string(), s);
        }
        assert!("status_is:burning".parse::<Condition>().is_err());
        assert!("flag:".parse::<Condition>().is_err());
        assert!("sleeping".parse::<Condition>().is_err());
    }

    #[test]
    fn evaluates_against_view() {
        let mut view = WorldView { emergency: Some(EmergencyStatus::Located), ..Default::default() };
        assert!(Condition::Idle.holds(&view));
        assert!(Condition::StatusAtLeast(EmergencyStatus::Latent).holds(&view));
        assert!(!Condition::StatusBefore(EmergencyStatus::Located).holds(&view));
        view.active = Some(ActiveTaskView {
            robot: "husky 1".into(),
            action: RobotAction::Move,
            target: "helipad".into(),
            status: RobotStatus::Moving,
            travel_remaining_s: 3,
        });
        assert!(Condition::Moving.holds(&view));
        assert!(!Condition::Working.holds(&view));
        assert!(!Condition::Arrived.holds(&view));
    }

    #[test]
    fn evacuated_is_off_the_success_track() {
        let view = WorldView { emergency: Some(EmergencyStatus::Evacuated), ..Default::default() };
        assert!(!Condition::StatusAtLeast(EmergencyStatus::Located).holds(&view));
        assert!(!Condition::StatusBefore(EmergencyStatus::Located).holds(&view));
        assert!(Condition::StatusIs(EmergencyStatus::Evacuated).holds(&view));
    }
}
