//! Plays sessions against a virtual-clock server. Several sessions share
//! the one clock, so they advance in lockstep, one second at a time.

use std::collections::BTreeMap;

use serde::Deserialize;
use woz_core::log::DialogueLog;
use woz_core::protocol::{Chat, Empty, FreeText, Join, Notice, Payload, SessionEnd, WizardAction};
use woz_core::session::Role;

use crate::client::{Connection, HarnessError, Result};
use crate::policy::{Agent, AgentPolicy, Move};

/// Where the server is and how to read its logs back.
#[derive(Debug, Clone)]
pub struct Target {
    pub base_url: String,
    pub ws_url: String,
    pub admin_token: String,
}

impl Target {
    pub fn of(server: &woz_server::RunningServer, admin_token: &str) -> Target {
        Target { base_url: server.base_url(), ws_url: server.ws_url(), admin_token: admin_token.to_string() }
    }
}

#[derive(Debug, Clone)]
pub struct SessionReport {
    pub log: DialogueLog,
    pub end: SessionEnd,
    pub operator_notices: Vec<Notice>,
    pub wizard_notices: Vec<Notice>,
    /// Number of `session_end` envelopes each side received.
    pub session_ends: [usize; 2],
    pub answers: [i64; 4],
}

impl SessionReport {
    pub fn notices(&self) -> impl Iterator<Item = &Notice> {
        self.operator_notices.iter().chain(&self.wizard_notices)
    }
}

#[derive(Deserialize)]
struct SyncReply {
    now: u64,
    last_seq: BTreeMap<String, u64>,
}

#[derive(Deserialize)]
struct Bootstrap {
    min_read_s: u64,
    time_limit_s: u64,
    virtual_clock: bool,
}

struct Player {
    conn: Connection,
    agent: Agent,
}

impl Player {
    async fn catch_up(&mut self, sync: &SyncReply) -> Result<()> {
        let target = self.conn.participant.as_ref().and_then(|p| sync.last_seq.get(p)).copied().unwrap_or(0);
        for env in self.conn.catch_up(target).await? {
            self.agent.observe(&env);
        }
        Ok(())
    }

    async fn request(&mut self, payload: Payload) -> Result<()> {
        for env in self.conn.request(payload).await? {
            self.agent.observe(&env);
        }
        Ok(())
    }
}

struct Game {
    op: Player,
    wiz: Player,
    start_ms: u64,
}

impl Game {
    fn ended(&self) -> bool {
        self.op.conn.end.is_some() && self.wiz.conn.end.is_some()
    }

    async fn catch_up(&mut self, sync: &SyncReply) -> Result<()> {
        self.op.catch_up(sync).await?;
        self.wiz.catch_up(sync).await
    }
}

struct Driver {
    target: Target,
    http: reqwest::Client,
}

impl Driver {
    async fn get<T: for<'de> Deserialize<'de>>(&self, path: &str) -> Result<T> {
        let r = self.http.get(format!("{}{path}", self.target.base_url)).send().await?;
        Ok(r.error_for_status()?.json().await?)
    }

    async fn sync(&self) -> Result<SyncReply> {
        self.get("/test/sync").await
    }

    async fn advance(&self, by_ms: u64) -> Result<SyncReply> {
        let r = self
            .http
            .post(format!("{}/test/advance", self.target.base_url))
            .json(&serde_json::json!({ "by_ms": by_ms }))
            .send()
            .await?;
        Ok(r.error_for_status()?.json().await?)
    }

    async fn pair(&self, op: AgentPolicy, wiz: AgentPolicy) -> Result<Game> {
        let mut first = Player { conn: Connection::open(&self.target.ws_url).await?, agent: Agent::new(op) };
        let mut second = Player { conn: Connection::open(&self.target.ws_url).await?, agent: Agent::new(wiz) };
        first.request(Payload::Join(Join::default())).await?;
        if !first.conn.notices.iter().any(|n| n.code == "waiting") {
            return Err(HarnessError::Server("first participant was not queued; is the lobby empty?".into()));
        }
        second.request(Payload::Join(Join::default())).await?;
        while first.conn.role.is_none() {
            let env = first.conn.next().await?;
            first.agent.observe(&env);
        }
        let sync = self.sync().await?;
        first.catch_up(&sync).await?;
        // The lobby may hand out roles at random; policies follow the role.
        let (mut op, mut wiz) = match first.conn.role {
            Some(Role::Operator) => (first, second),
            _ => (second, first),
        };
        if op.agent.policy().role != Role::Operator {
            std::mem::swap(&mut op.agent, &mut wiz.agent);
        }
        Ok(Game { op, wiz, start_ms: 0 })
    }

    async fn play(&self, game: &mut Game, game_ms: u64) -> Result<()> {
        for role in [Role::Operator, Role::Wizard] {
            let moves = match role {
                Role::Operator => game.op.agent.decide(game_ms),
                Role::Wizard => game.wiz.agent.decide(game_ms),
            };
            for mv in moves {
                let payload = match mv {
                    Move::Say(text) => Payload::Chat(Chat::text(text)),
                    Move::Act { action, slots } => Payload::WizardAction(WizardAction { action, slots }),
                    Move::Type(text) => Payload::FreeText(FreeText { text }),
                };
                match role {
                    Role::Operator => game.op.request(payload).await?,
                    Role::Wizard => game.wiz.request(payload).await?,
                }
                let sync = self.sync().await?;
                game.catch_up(&sync).await?;
            }
        }
        Ok(())
    }

    async fn finish(&self, game: Game) -> Result<SessionReport> {
        let Game { mut op, wiz, .. } = game;
        let end = op.conn.end.clone().expect("game ended");
        let answers = op.agent.answers(end.resolved);
        let r = self
            .http
            .post(format!("{}/questionnaire", self.target.base_url))
            .json(&serde_json::json!({ "token": end.token, "answers": answers }))
            .send()
            .await?;
        if !r.status().is_success() {
            return Err(HarnessError::Server(format!(
                "questionnaire rejected: {}",
                r.text().await.unwrap_or_default()
            )));
        }
        let session = op.conn.session.clone().ok_or_else(|| HarnessError::ProtocolViolation("no session id".into()))?;
        let log: DialogueLog = self
            .http
            .get(format!("{}/logs/{session}", self.target.base_url))
            .bearer_auth(&self.target.admin_token)
            .send()
            .await?
            .error_for_status()?
            .json()
            .await?;
        let count = |c: &Connection| c.transcript.iter().filter(|e| e.type_tag() == "session_end").count();
        let report = SessionReport {
            end,
            session_ends: [count(&op.conn), count(&wiz.conn)],
            operator_notices: op.conn.notices.clone(),
            wizard_notices: wiz.conn.notices.clone(),
            log,
            answers,
        };
        op.conn.close().await;
        wiz.conn.close().await;
        Ok(report)
    }
}

/// Plays one session from joining to the questionnaire.
pub async fn run_session(target: &Target, operator: AgentPolicy, wizard: AgentPolicy) -> Result<SessionReport> {
    let mut reports = run_batch(target, vec![(operator, wizard)]).await?;
    Ok(reports.pop().expect("one session"))
}

/// Plays several sessions side by side on one server.
pub async fn run_batch(target: &Target, pairs: Vec<(AgentPolicy, AgentPolicy)>) -> Result<Vec<SessionReport>> {
    let driver = Driver { target: target.clone(), http: reqwest::Client::new() };
    let boot: Bootstrap = driver.get("/bootstrap").await?;
    if !boot.virtual_clock {
        return Err(HarnessError::Server("the harness needs a server with a virtual clock".into()));
    }
    let mut games = Vec::with_capacity(pairs.len());
    for (op, wiz) in pairs {
        games.push(driver.pair(op, wiz).await?);
    }
    let sync = driver.advance(boot.min_read_s * 1000).await?;
    for g in &mut games {
        g.catch_up(&sync).await?;
        g.op.request(Payload::Ready(Empty {})).await?;
        g.wiz.request(Payload::Ready(Empty {})).await?;
    }
    let sync = driver.sync().await?;
    for g in &mut games {
        g.catch_up(&sync).await?;
        g.start_ms = sync.now;
    }
    let limit_ms = (boot.time_limit_s + 60) * 1000;
    let mut now = sync.now;
    while games.iter().any(|g| !g.ended()) {
        for g in games.iter_mut().filter(|g| !g.ended()) {
            let game_ms = now - g.start_ms;
            if game_ms > limit_ms {
                return Err(HarnessError::Timeout(format!("session still open after {} s", game_ms / 1000)));
            }
            driver.play(g, game_ms).await?;
        }
        let sync = driver.advance(1000).await?;
        now = sync.now;
        for g in &mut games {
            g.catch_up(&sync).await?;
        }
    }
    let mut reports = Vec::with_capacity(games.len());
    for g in games {
        reports.push(driver.finish(g).await?);
    }
    Ok(reports)
}
