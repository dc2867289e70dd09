//! Everything the server knows, mutated only under one lock. Socket tasks
//! hand decoded text in and get nothing back; replies go out through each
//! connection's channel, so per-connection ordering is the order of calls.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokio::sync::mpsc::UnboundedSender;
use woz_core::log::{DialogueLog, LogStore, QuestionnaireRecord, StoreError};
use woz_core::protocol::{decode, encode, Ack, Empty, Envelope, Notice, Payload, SeqCounter};
use woz_core::session::{
    JoinOutcome, Lobby, LobbyConfig, Phase, Role, Session, SessionConfig, SessionError, TokenGenerator,
};
use woz_core::{Scenario, SimTime};

pub type ConnId = u64;

/// Per-session RNG seed for the `n`th session (from 1) of a seeded server.
pub fn session_seed(server_seed: u64, n: u64) -> u64 {
    splitmix64(server_seed.wrapping_add(n))
}

fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

struct Conn {
    tx: UnboundedSender<String>,
    participant: Option<String>,
    seq: SeqCounter,
}

#[derive(Default)]
struct Seat {
    session: Option<String>,
    conn: Option<ConnId>,
}

struct Slot {
    session: Session,
    finalized: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
pub struct HubStatus {
    pub waiting: usize,
    pub live_sessions: usize,
    pub connections: usize,
}

pub struct Hub {
    scenario: Arc<Scenario>,
    session_config: SessionConfig,
    store: LogStore,
    lobby: Lobby,
    tokens: TokenGenerator,
    ids: Box<dyn RngCore + Send>,
    server_seed: Option<u64>,
    session_count: u64,
    sessions: BTreeMap<String, Slot>,
    seats: HashMap<String, Seat>,
    conns: BTreeMap<ConnId, Conn>,
    next_conn: ConnId,
}

impl Hub {
    pub fn new(
        scenario: Arc<Scenario>,
        session_config: SessionConfig,
        lobby: LobbyConfig,
        store: LogStore,
        server_seed: Option<u64>,
    ) -> Hub {
        let (tokens, ids): (TokenGenerator, Box<dyn RngCore + Send>) = match server_seed {
            Some(s) => (
                TokenGenerator::seeded(splitmix64(s ^ 0x746f_6b65_6e73)),
                Box::new(ChaCha8Rng::seed_from_u64(splitmix64(s ^ 0x0069_6473))),
            ),
            None => (TokenGenerator::secure(), Box::new(StdRng::from_os_rng())),
        };
        Hub {
            scenario,
            session_config,
            store,
            lobby: Lobby::new(lobby),
            tokens,
            ids,
            server_seed,
            session_count: 0,
            sessions: BTreeMap::new(),
            seats: HashMap::new(),
            conns: BTreeMap::new(),
            next_conn: 1,
        }
    }

    pub fn scenario(&self) -> &Arc<Scenario> {
        &self.scenario
    }

    pub fn session_config(&self) -> &SessionConfig {
        &self.session_config
    }

    pub fn status(&self) -> HubStatus {
        HubStatus { waiting: self.lobby.waiting(), live_sessions: self.sessions.len(), connections: self.conns.len() }
    }

    pub fn connect(&mut self, tx: UnboundedSender<String>) -> ConnId {
        let id = self.next_conn;
        self.next_conn += 1;
        self.conns.insert(id, Conn { tx, participant: None, seq: SeqCounter::default() });
        id
    }

    /// Last sequence number sent to each joined participant.
    pub fn last_seqs(&self) -> BTreeMap<String, u64> {
        self.conns.values().filter_map(|c| c.participant.clone().map(|p| (p, c.seq.last()))).collect()
    }

    pub fn session_phase(&self, id: &str) -> Option<Phase> {
        self.sessions.get(id).map(|s| s.session.phase())
    }

    /// One text frame from a client.
    pub fn handle_text(&mut self, conn: ConnId, text: &str, now: SimTime) {
        let env = match decode(text) {
            Ok(env) => env,
            Err(e) => {
                self.notice(conn, "bad_envelope", e.to_string(), now);
                return;
            }
        };
        if env.payload.client_sendable() {
            self.dispatch(conn, env.payload, now);
        } else {
            let msg = format!("clients may not send {:?}", env.payload.type_tag());
            self.notice(conn, "not_allowed", msg, now);
        }
        self.send(conn, Payload::Ack(Ack { seq: env.seq }), now);
    }

    fn dispatch(&mut self, conn: ConnId, payload: Payload, now: SimTime) {
        if let Payload::Join(j) = payload {
            self.join(conn, j.participant, now);
            return;
        }
        if matches!(payload, Payload::Heartbeat(_)) {
            return;
        }
        let Some((sid, role)) = self.seat_of(conn) else {
            self.notice(conn, "not_joined", "join a session first".into(), now);
            return;
        };
        let slot = self.sessions.get_mut(&sid).expect("seated sessions exist");
        let s = &mut slot.session;
        let wizard_only =
            |role: Role| if role == Role::Wizard { Ok(()) } else { Err(SessionError::WrongRole(Role::Wizard)) };
        let result = match payload {
            Payload::Ready(_) => s.ready(role, now),
            Payload::Chat(c) if role == Role::Operator => s.operator_message(&c.text, now),
            Payload::Chat(c) => s.wizard_free_text(&c.text, now),
            Payload::FreeText(f) => wizard_only(role).and_then(|_| s.wizard_free_text(&f.text, now)),
            Payload::WizardAction(a) => wizard_only(role).and_then(|_| s.wizard_action(&a.action, &a.slots, now)),
            Payload::HintRequest(_) => wizard_only(role).and_then(|_| s.hint_request(now)),
            _ => Ok(Vec::new()),
        };
        match result {
            Ok(out) => self.deliver(&sid, out, now),
            Err(e) => {
                if let SessionError::Storage(msg) = &e {
                    tracing::error!(session = %sid, "{msg}");
                }
                self.send(conn, e.notice(), now);
            }
        }
    }

    fn seat_of(&self, conn: ConnId) -> Option<(String, Role)> {
        let pid = self.conns.get(&conn)?.participant.as_ref()?;
        let sid = self.seats.get(pid)?.session.clone()?;
        let role = self.sessions.get(&sid)?.session.role_of(pid)?;
        Some((sid, role))
    }

    fn join(&mut self, conn: ConnId, wanted: Option<String>, now: SimTime) {
        if self.conns.get(&conn).is_some_and(|c| c.participant.is_some()) {
            self.notice(conn, "already_joined", "this connection has already joined".into(), now);
            return;
        }
        if let Some(pid) = wanted.filter(|p| self.seats.get(p).is_some_and(|s| s.session.is_some())) {
            self.reattach(conn, &pid, now);
            return;
        }
        let pid = self.fresh_id("p");
        self.seats.insert(pid.clone(), Seat { session: None, conn: Some(conn) });
        if let Some(c) = self.conns.get_mut(&conn) {
            c.participant = Some(pid.clone());
        }
        match self.lobby.enqueue(&pid, now) {
            Ok(JoinOutcome::Queued) => self.notice(conn, "waiting", "waiting for a partner".into(), now),
            Ok(JoinOutcome::Paired { operator, wizard }) => self.open_session(operator, wizard, now),
            Err(e) => self.notice(conn, "join_failed", e.to_string(), now),
        }
    }

    fn reattach(&mut self, conn: ConnId, pid: &str, now: SimTime) {
        let seat = self.seats.get_mut(pid).expect("checked by caller");
        let old = seat.conn.replace(conn);
        let sid = seat.session.clone().expect("checked by caller");
        if let Some(old) = old.filter(|o| *o != conn) {
            if let Some(c) = self.conns.get_mut(&old) {
                c.participant = None;
            }
            self.notice(old, "replaced", "this seat was taken over by a newer connection".into(), now);
        }
        if let Some(c) = self.conns.get_mut(&conn) {
            c.participant = Some(pid.to_string());
        }
        let slot = self.sessions.get_mut(&sid).expect("seated sessions exist");
        let role = slot.session.role_of(pid).expect("seat belongs to session");
        let out = slot.session.reconnect(role, now);
        self.deliver(&sid, out, now);
    }

    fn open_session(&mut self, operator: String, wizard: String, now: SimTime) {
        self.session_count += 1;
        let sid = self.fresh_id("s");
        let seed = match self.server_seed {
            Some(s) => session_seed(s, self.session_count),
            None => self.ids.next_u64(),
        };
        let token = self.tokens.next_token();
        let opened = self.store.journal(&sid).map_err(|e| SessionError::Storage(e.to_string())).and_then(|j| {
            Session::new(
                sid.clone(),
                self.scenario.clone(),
                self.session_config,
                operator.clone(),
                wizard.clone(),
                seed,
                token,
                Some(Box::new(j)),
                now,
            )
        });
        match opened {
            Ok((session, out)) => {
                for pid in [&operator, &wizard] {
                    self.seats.entry(pid.clone()).or_default().session = Some(sid.clone());
                }
                self.sessions.insert(sid.clone(), Slot { session, finalized: false });
                tracing::info!(session = %sid, %operator, %wizard, "paired");
                self.deliver(&sid, out, now);
            }
            Err(e) => {
                tracing::error!(session = %sid, "cannot open session: {e}");
                for pid in [&operator, &wizard] {
                    self.lobby.release(pid);
                    if let Some(conn) = self.seats.remove(pid.as_str()).and_then(|s| s.conn) {
                        if let Some(c) = self.conns.get_mut(&conn) {
                            c.participant = None;
                        }
                        self.send(conn, e.notice(), now);
                    }
                }
            }
        }
    }

    fn fresh_id(&mut self, prefix: &str) -> String {
        loop {
            let id = format!("{prefix}{:012x}", self.ids.next_u64() >> 16);
            if !self.sessions.contains_key(&id) && !self.seats.contains_key(&id) {
                return id;
            }
        }
    }

    /// Routes session output to whoever is connected, then stores the log
    /// once the game is over.
    fn deliver(&mut self, sid: &str, out: Vec<woz_core::session::Outgoing>, now: SimTime) {
        let Some(slot) = self.sessions.get(sid) else { return };
        let mut sends = Vec::new();
        for o in out {
            for role in [Role::Operator, Role::Wizard] {
                if o.to.includes(role) {
                    let pid = slot.session.participant(role);
                    if let Some(conn) = self.seats.get(pid).and_then(|s| s.conn) {
                        sends.push((conn, o.payload.clone()));
                    }
                }
            }
        }
        for (conn, payload) in sends {
            self.send_in(conn, Some(sid), payload, now);
        }
        self.finalize_if_over(sid);
    }

    fn finalize_if_over(&mut self, sid: &str) {
        let Some(slot) = self.sessions.get_mut(sid) else { return };
        if slot.finalized || slot.session.phase() < Phase::Questionnaire {
            return;
        }
        slot.finalized = true;
        let log = slot.session.finished_log();
        match self.store.finalize(&log) {
            Ok(path) => tracing::info!(session = %sid, path = %path.display(), "log stored"),
            Err(e) => tracing::error!(session = %sid, "cannot store log: {e}"),
        }
        for role in [Role::Operator, Role::Wizard] {
            self.lobby.release(slot.session.participant(role));
        }
    }

    /// The socket behind `conn` is gone.
    pub fn disconnect(&mut self, conn: ConnId, now: SimTime) {
        let Some(c) = self.conns.remove(&conn) else { return };
        let Some(pid) = c.participant else { return };
        let Some(seat) = self.seats.get_mut(&pid) else { return };
        if seat.conn == Some(conn) {
            seat.conn = None;
        }
        match seat.session.clone() {
            None => {
                self.lobby.leave(&pid);
                self.seats.remove(&pid);
            }
            Some(sid) => {
                if let Some(slot) = self.sessions.get_mut(&sid) {
                    if let Some(role) = slot.session.role_of(&pid) {
                        slot.session.disconnect(role, now);
                    }
                }
                self.collect(&sid);
            }
        }
    }

    /// Drops a finished session once nobody is connected to it.
    fn collect(&mut self, sid: &str) {
        let Some(slot) = self.sessions.get(sid) else { return };
        if !slot.finalized {
            return;
        }
        let pids = [Role::Operator, Role::Wizard].map(|r| slot.session.participant(r).to_string());
        if pids.iter().all(|p| self.seats.get(p).is_none_or(|s| s.conn.is_none())) {
            self.forget(sid);
        }
    }

    fn forget(&mut self, sid: &str) {
        if let Some(slot) = self.sessions.remove(sid) {
            for role in [Role::Operator, Role::Wizard] {
                let pid = slot.session.participant(role);
                if let Some(conn) = self.seats.remove(pid).and_then(|s| s.conn) {
                    if let Some(c) = self.conns.get_mut(&conn) {
                        c.participant = None;
                    }
                }
            }
        }
    }

    /// Advances every session to `now` and expires stale lobby entries.
    pub fn tick(&mut self, now: SimTime) {
        let ids: Vec<String> = self.sessions.keys().cloned().collect();
        for sid in ids {
            let slot = self.sessions.get_mut(&sid).expect("listed above");
            if slot.finalized {
                continue;
            }
            match slot.session.tick(now) {
                Ok(out) => self.deliver(&sid, out, now),
                Err(e) => tracing::error!(session = %sid, "tick failed: {e}"),
            }
            self.collect(&sid);
        }
        for pid in self.lobby.expire(now) {
            if let Some(conn) = self.seats.remove(&pid).and_then(|s| s.conn) {
                self.notice(conn, "lobby_timeout", "no partner arrived in time; please try again later".into(), now);
                if let Some(c) = self.conns.get_mut(&conn) {
                    c.participant = None;
                }
            }
        }
    }

    pub fn heartbeat(&mut self, now: SimTime) {
        let conns: Vec<ConnId> = self.conns.keys().copied().collect();
        for conn in conns {
            self.send(conn, Payload::Heartbeat(Empty {}), now);
        }
    }

    pub fn verify_token(&self, token: &str) -> Option<String> {
        self.store.verify_token(token)
    }

    pub fn load_log(&self, sid: &str) -> Option<DialogueLog> {
        self.store.load(sid)
    }

    /// Stores the answers and retires the live session the token belongs to.
    pub fn submit_questionnaire(
        &mut self,
        token: &str,
        answers: &[i64],
        free_text: Option<String>,
        now: SimTime,
    ) -> Result<(String, QuestionnaireRecord), StoreError> {
        let record = self.store.submit_questionnaire(token, answers, free_text, now)?;
        let sid = self.store.verify_token(token).expect("token just accepted");
        if self.sessions.get(&sid).is_some_and(|s| s.finalized) {
            self.forget(&sid);
        }
        Ok((sid, record))
    }

    fn session_of_conn(&self, conn: ConnId) -> Option<String> {
        let pid = self.conns.get(&conn)?.participant.as_ref()?;
        self.seats.get(pid)?.session.clone()
    }

    fn notice(&mut self, conn: ConnId, code: &str, message: String, now: SimTime) {
        self.send(conn, Payload::Notice(Notice { code: code.into(), message }), now);
    }

    fn send(&mut self, conn: ConnId, payload: Payload, now: SimTime) {
        let sid = self.session_of_conn(conn);
        self.send_in(conn, sid.as_deref(), payload, now);
    }

    fn send_in(&mut self, conn: ConnId, sid: Option<&str>, payload: Payload, now: SimTime) {
        let Some(c) = self.conns.get_mut(&conn) else { return };
        let env = Envelope::new(sid.map(str::to_string), c.seq.next(), now.millis(), payload);
        // A closed receiver means the socket task is going away; its
        // disconnect arrives separately.
        let _ = c.tx.send(encode(&env));
    }
}
