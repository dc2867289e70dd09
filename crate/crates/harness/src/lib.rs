//! Scripted participants for end-to-end tests and corpus generation.
//! Agents talk to a real server over the websocket protocol; the server
//! runs on a virtual clock that the harness steps one second at a time.

pub mod client;
pub mod corpus;
pub mod policy;
pub mod run;

pub use client::{Connection, HarnessError};
pub use corpus::{generate_corpus, generate_corpus_with, start_simulation_server, CorpusOptions, CorpusSummary};
pub use policy::{Agent, AgentPolicy, Move, PolicyMix, Strategy, ThinkTime};
pub use run::{run_batch, run_session, SessionReport, Target};
