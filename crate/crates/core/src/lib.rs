//! Core of a paired Wizard-of-Oz data-collection service.
//!
//! The wizard talks through a finite-state dialogue graph while an
//! operator chats freely; both coordinate robots in a timed emergency
//! world. Everything here is synchronous and clock-agnostic.

pub mod config;
pub mod fsm;
pub mod golden;
pub mod log;
pub mod protocol;
pub mod scenario;
pub mod session;
pub mod time;
pub mod world;

pub use scenario::{load_dialogue_graph, Scenario};
pub use time::SimTime;
