//! One participant's websocket, with the checks a well-behaved client
//! would expect the server to honour.

use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use thiserror::Error;
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async_with_config, MaybeTlsStream, WebSocketStream};
use woz_core::protocol::{decode, encode, Envelope, Notice, Payload, SessionEnd};
use woz_core::session::Role;

const READ_TIMEOUT: Duration = Duration::from_secs(10);

#[derive(Debug, Error)]
pub enum HarnessError {
    /// The server sent something a correct server never would.
    #[error("protocol violation: {0}")]
    ProtocolViolation(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("http: {0}")]
    Http(String),
    #[error("timed out: {0}")]
    Timeout(String),
    #[error("server: {0}")]
    Server(String),
}

impl From<reqwest::Error> for HarnessError {
    fn from(e: reqwest::Error) -> Self {
        HarnessError::Http(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, HarnessError>;

fn violation(msg: impl Into<String>) -> HarnessError {
    HarnessError::ProtocolViolation(msg.into())
}

pub struct Connection {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
    sent: u64,
    last_seq: u64,
    pub participant: Option<String>,
    pub role: Option<Role>,
    pub session: Option<String>,
    pub end: Option<SessionEnd>,
    pub notices: Vec<Notice>,
    /// Every envelope received, in order.
    pub transcript: Vec<Envelope>,
}

impl Connection {
    pub async fn open(ws_url: &str) -> Result<Connection> {
        let (ws, _) =
            connect_async_with_config(ws_url, None, true).await.map_err(|e| HarnessError::Transport(e.to_string()))?;
        Ok(Connection {
            ws,
            sent: 0,
            last_seq: 0,
            participant: None,
            role: None,
            session: None,
            end: None,
            notices: Vec::new(),
            transcript: Vec::new(),
        })
    }

    pub fn last_seq(&self) -> u64 {
        self.last_seq
    }

    /// Sends a payload and reads up to and including its ack. Returns what
    /// arrived before the ack.
    pub async fn request(&mut self, payload: Payload) -> Result<Vec<Envelope>> {
        self.sent += 1;
        let seq = self.sent;
        let text = encode(&Envelope::new(self.session.clone(), seq, 0, payload));
        self.ws.send(Message::text(text)).await.map_err(|e| HarnessError::Transport(e.to_string()))?;
        let mut got = Vec::new();
        loop {
            let env = self.next().await?;
            match &env.payload {
                Payload::Ack(a) if a.seq == seq => return Ok(got),
                Payload::Ack(a) => return Err(violation(format!("ack for {} while waiting for {seq}", a.seq))),
                _ => got.push(env),
            }
        }
    }

    /// Reads until the server's last sent sequence number is reached.
    pub async fn catch_up(&mut self, target: u64) -> Result<Vec<Envelope>> {
        let mut got = Vec::new();
        while self.last_seq < target {
            got.push(self.next().await?);
        }
        Ok(got)
    }

    pub async fn next(&mut self) -> Result<Envelope> {
        loop {
            let msg = tokio::time::timeout(READ_TIMEOUT, self.ws.next())
                .await
                .map_err(|_| HarnessError::Timeout(format!("no message after seq {}", self.last_seq)))?
                .ok_or_else(|| HarnessError::Transport("socket closed".into()))?
                .map_err(|e| HarnessError::Transport(e.to_string()))?;
            let text = match msg {
                Message::Text(t) => t,
                Message::Close(_) => return Err(HarnessError::Transport("socket closed".into())),
                _ => continue,
            };
            let env = decode(text.as_str()).map_err(|e| violation(format!("undecodable envelope: {e}")))?;
            self.check(&env)?;
            self.transcript.push(env.clone());
            return Ok(env);
        }
    }

    fn check(&mut self, env: &Envelope) -> Result<()> {
        if env.seq != self.last_seq + 1 {
            return Err(violation(format!("seq jumped from {} to {}", self.last_seq, env.seq)));
        }
        self.last_seq = env.seq;
        if let Some(s) = &env.session {
            match &self.session {
                Some(mine) if mine != s => return Err(violation(format!("envelope for session {s}, joined {mine}"))),
                _ => self.session = Some(s.clone()),
            }
        }
        if env.payload.client_sendable() && !matches!(env.payload, Payload::Chat(_) | Payload::Heartbeat(_)) {
            return Err(violation(format!("server sent client-only type {}", env.type_tag())));
        }
        if env.payload.wizard_only() && self.role != Some(Role::Wizard) {
            return Err(violation(format!("{} sent to a non-wizard", env.type_tag())));
        }
        let after_end = self.end.is_some()
            && !matches!(
                env.payload,
                Payload::Ack(_) | Payload::Notice(_) | Payload::Heartbeat(_) | Payload::SessionEnd(_)
            );
        if after_end {
            return Err(violation(format!("{} after session_end", env.type_tag())));
        }
        match &env.payload {
            Payload::RoleAssigned(r) => {
                if self.role.is_some_and(|old| old != r.role) {
                    return Err(violation("role changed mid-session"));
                }
                self.role = Some(r.role);
                self.participant = Some(r.participant.clone());
            }
            Payload::SessionEnd(end) => {
                if self.end.as_ref().is_some_and(|old| old != end) {
                    return Err(violation("second, different session_end"));
                }
                self.end = Some(end.clone());
            }
            Payload::Notice(n) => self.notices.push(n.clone()),
            _ => {}
        }
        Ok(())
    }

    pub async fn close(mut self) {
        let _ = self.ws.close(None).await;
    }
}
