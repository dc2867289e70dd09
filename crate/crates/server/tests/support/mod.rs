#![allow(dead_code)]

use std::time::Duration;

use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpStream;
use tokio_tungstenite::tungstenite::Message;
use tokio_tungstenite::{connect_async, MaybeTlsStream, WebSocketStream};
use woz_core::config::ServiceConfig;
use woz_core::protocol::{decode, encode, Envelope, Payload};
use woz_core::Scenario;
use woz_server::{start, RunningServer, SyncReply};

pub const ADMIN: &str = "let-me-in";

pub async fn server(dir: &std::path::Path) -> RunningServer {
    server_with(dir, |_| {}).await
}

pub async fn server_with(dir: &std::path::Path, tweak: impl FnOnce(&mut ServiceConfig)) -> RunningServer {
    let mut config = ServiceConfig::default();
    config.server.bind = "127.0.0.1:0".into();
    config.server.virtual_clock = true;
    config.server.seed = Some(7);
    config.server.admin_token = Some(ADMIN.into());
    config.server.assets_dir = dir.join("assets");
    config.log.dir = dir.join("data");
    config.log.sync = false;
    tweak(&mut config);
    start(&config, Scenario::reference()).await.expect("server starts")
}

pub struct Client {
    ws: WebSocketStream<MaybeTlsStream<TcpStream>>,
    seq: u64,
    pub participant: Option<String>,
    pub last_seq: u64,
    pub seen: Vec<Envelope>,
}

impl Client {
    pub async fn connect(srv: &RunningServer) -> Client {
        let (ws, _) = connect_async(srv.ws_url()).await.expect("websocket connects");
        Client { ws, seq: 0, participant: None, last_seq: 0, seen: Vec::new() }
    }

    pub async fn send_raw(&mut self, text: &str) {
        self.ws.send(Message::text(text.to_string())).await.expect("send");
    }

    /// Sends and waits for the ack; returns everything received meanwhile.
    pub async fn request(&mut self, payload: Payload) -> Vec<Envelope> {
        self.seq += 1;
        let seq = self.seq;
        self.send_raw(&encode(&Envelope::new(None, seq, 0, payload))).await;
        let mut got = Vec::new();
        loop {
            let env = self.next().await;
            if matches!(&env.payload, Payload::Ack(a) if a.seq == seq) {
                return got;
            }
            got.push(env);
        }
    }

    pub async fn next(&mut self) -> Envelope {
        loop {
            let msg = tokio::time::timeout(Duration::from_secs(5), self.ws.next())
                .await
                .expect("message within 5 s")
                .expect("stream open")
                .expect("frame");
            let Message::Text(text) = msg else { continue };
            let env = decode(text.as_str()).expect("server sends valid envelopes");
            assert_eq!(env.seq, self.last_seq + 1, "server seq has no gaps");
            self.last_seq = env.seq;
            if let Payload::RoleAssigned(r) = &env.payload {
                self.participant = Some(r.participant.clone());
            }
            self.seen.push(env.clone());
            return env;
        }
    }

    /// Reads until caught up with what the server says it sent us.
    pub async fn catch_up(&mut self, sync: &SyncReply) -> Vec<Envelope> {
        let target = self.participant.as_ref().and_then(|p| sync.last_seq.get(p)).copied().unwrap_or(0);
        let mut got = Vec::new();
        while self.last_seq < target {
            got.push(self.next().await);
        }
        got
    }

    pub async fn close(mut self) {
        let _ = self.ws.close(None).await;
    }
}

pub async fn advance(srv: &RunningServer, by_ms: u64) -> SyncReply {
    let url = format!("{}/test/advance", srv.base_url());
    reqwest::Client::new()
        .post(url)
        .json(&serde_json::json!({ "by_ms": by_ms }))
        .send()
        .await
        .expect("advance")
        .json()
        .await
        .expect("sync reply")
}

pub async fn sync(srv: &RunningServer) -> SyncReply {
    reqwest::get(format!("{}/test/sync", srv.base_url())).await.expect("sync").json().await.expect("sync reply")
}

pub fn types(envs: &[Envelope]) -> Vec<&'static str> {
    envs.iter().map(|e| e.type_tag()).collect()
}

pub fn notice_codes(envs: &[Envelope]) -> Vec<String> {
    envs.iter()
        .filter_map(|e| match &e.payload {
            Payload::Notice(n) => Some(n.code.clone()),
            _ => None,
        })
        .collect()
}
