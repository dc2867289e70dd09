//! Generates a directory of session logs with a private in-process server.

use std::path::{Path, PathBuf};

use serde::Serialize;
use woz_core::config::ServiceConfig;
use woz_core::Scenario;

use crate::client::{HarnessError, Result};
use crate::policy::PolicyMix;
use crate::run::{run_batch, SessionReport, Target};

const ADMIN_TOKEN: &str = "harness";

#[derive(Debug, Clone)]
pub struct CorpusOptions {
    pub n: usize,
    pub seed: u64,
    /// Session `i` uses `mix[i % mix.len()]`.
    pub mix: Vec<PolicyMix>,
    pub out: PathBuf,
    /// Sessions played side by side.
    pub concurrency: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusEntry {
    pub session: String,
    pub policy: PolicyMix,
    pub resolved: bool,
    pub reward_cents: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CorpusSummary {
    pub dir: PathBuf,
    pub sessions: Vec<CorpusEntry>,
}

/// Agent seeds for session `i` of a corpus.
pub fn agent_seeds(seed: u64, i: usize) -> (u64, u64) {
    let base = seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(2 * i as u64);
    (base, base.wrapping_add(1))
}

/// Configuration for a throwaway simulation server writing to `log_dir`.
pub fn simulation_config(log_dir: &Path, seed: u64) -> ServiceConfig {
    let mut config = ServiceConfig::default();
    config.server.bind = "127.0.0.1:0".into();
    config.server.virtual_clock = true;
    config.server.seed = Some(seed);
    config.server.admin_token = Some(ADMIN_TOKEN.into());
    config.server.heartbeat_s = 0;
    config.log.dir = log_dir.to_path_buf();
    config.log.sync = false;
    config
}

/// Starts a simulation server over `scenario`.
pub async fn start_simulation_server(
    log_dir: &Path,
    seed: u64,
    scenario: Scenario,
) -> Result<(woz_server::RunningServer, Target)> {
    let server = woz_server::start(&simulation_config(log_dir, seed), scenario)
        .await
        .map_err(|e| HarnessError::Server(e.to_string()))?;
    let target = Target::of(&server, ADMIN_TOKEN);
    Ok((server, target))
}

pub async fn generate_corpus(opts: &CorpusOptions) -> Result<CorpusSummary> {
    generate_corpus_with(opts, Scenario::reference()).await.map(|(s, _)| s)
}

/// Like [`generate_corpus`], also returning every session's report.
pub async fn generate_corpus_with(
    opts: &CorpusOptions,
    scenario: Scenario,
) -> Result<(CorpusSummary, Vec<SessionReport>)> {
    if opts.mix.is_empty() {
        return Err(HarnessError::Server("no policies given".into()));
    }
    let (server, target) = start_simulation_server(&opts.out, opts.seed, scenario).await?;
    let plan: Vec<(PolicyMix, _)> = (0..opts.n)
        .map(|i| {
            let mix = opts.mix[i % opts.mix.len()];
            let (a, b) = agent_seeds(opts.seed, i);
            (mix, mix.policies(a, b))
        })
        .collect();
    let mut summary = CorpusSummary { dir: opts.out.clone(), sessions: Vec::new() };
    let mut reports = Vec::new();
    let result: Result<()> = async {
        for chunk in plan.chunks(opts.concurrency.max(1)) {
            let batch = run_batch(&target, chunk.iter().map(|(_, p)| p.clone()).collect()).await?;
            for ((mix, _), r) in chunk.iter().zip(batch) {
                summary.sessions.push(CorpusEntry {
                    session: r.log.session_id.clone(),
                    policy: *mix,
                    resolved: r.end.resolved,
                    reward_cents: r.end.reward_cents,
                });
                reports.push(r);
            }
        }
        Ok(())
    }
    .await;
    server.shutdown().await;
    result.map(|_| (summary, reports))
}
