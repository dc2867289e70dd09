//! JSON envelopes exchanged over the session websocket.
//!
//! Every message is one object with the keys `v`, `type`, `session`,
//! `seq`, `ts` and `payload`, in that order. Decoding is strict: unknown
//! types and unknown payload fields are rejected with the offending path.

use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::fsm::{DaType, OptionKind};
use crate::session::{CloseReason, Role};
use crate::world::{Capability, MilestoneKind, RobotKind, RobotStatus};

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot decode envelope at {path}: {message}")]
pub struct DecodeError {
    pub path: String,
    pub message: String,
}

impl DecodeError {
    fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        DecodeError { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Join {
    /// Set when reconnecting to an existing seat.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub participant: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoleAssigned {
    pub role: Role,
    pub participant: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstructionsMsg {
    pub role: Role,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub video: Option<String>,
    pub min_read_s: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Empty {}

/// Chat in either direction. Clients send only `text`; the server adds
/// the speaker and, for wizard options, the dialogue act.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Chat {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<Role>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dialogue_act: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub da_type: Option<DaType>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub typed: Option<bool>,
}

impl Chat {
    pub fn text(text: impl Into<String>) -> Self {
        Chat { text: text.into(), from: None, dialogue_act: None, da_type: None, typed: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptionView {
    pub id: String,
    pub kind: OptionKind,
    pub da_type: DaType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preview: Option<String>,
    pub global: bool,
    /// Required slots and the values the wizard may choose from; an empty
    /// list accepts any value.
    #[serde(default, skip_serializing_if = "IndexMap::is_empty")]
    pub slots: IndexMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotPanel {
    pub id: String,
    pub kind: RobotKind,
    pub status: RobotStatus,
    pub location: String,
    pub capabilities: Vec<Capability>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionOptions {
    pub state: String,
    pub locked: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending: Option<String>,
    pub options: Vec<OptionView>,
    pub robots: Vec<RobotPanel>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WizardAction {
    pub action: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub slots: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreeText {
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HintHighlight {
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorldEventMsg {
    pub id: String,
    pub kind: MilestoneKind,
    pub narration: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub media_ref: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub robot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Timer {
    pub remaining_s: u64,
    pub display: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionEnd {
    pub reason: CloseReason,
    pub token: String,
    pub resolved: bool,
    pub duration_played_s: u64,
    pub reward_cents: u32,
    pub reward: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Notice {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ack {
    pub seq: u64,
}

macro_rules! payloads {
    ($($variant:ident($ty:ty) = $tag:literal,)*) => {
        #[derive(Debug, Clone, PartialEq, Eq)]
        pub enum Payload {
            $($variant($ty),)*
        }

        impl Payload {
            pub const TYPES: &'static [&'static str] = &[$($tag),*];

            pub fn type_tag(&self) -> &'static str {
                match self {
                    $(Payload::$variant(_) => $tag,)*
                }
            }

            fn body(&self) -> Value {
                match self {
                    $(Payload::$variant(p) => serde_json::to_value(p).expect("payloads serialize"),)*
                }
            }

            fn from_body(tag: &str, body: Value) -> Result<Payload, DecodeError> {
                match tag {
                    $($tag => decode_body::<$ty>(body).map(Payload::$variant),)*
                    other => Err(DecodeError::new("type", format!("unknown message type {other:?}"))),
                }
            }
        }
    };
}

payloads! {
    Join(Join) = "join",
    RoleAssigned(RoleAssigned) = "role_assigned",
    Instructions(InstructionsMsg) = "instructions",
    Ready(Empty) = "ready",
    Chat(Chat) = "chat",
    ActionOptions(ActionOptions) = "action_options",
    WizardAction(WizardAction) = "wizard_action",
    FreeText(FreeText) = "free_text",
    HintRequest(Empty) = "hint_request",
    HintHighlight(HintHighlight) = "hint_highlight",
    WorldEvent(WorldEventMsg) = "world_event",
    Timer(Timer) = "timer",
    SessionEnd(SessionEnd) = "session_end",
    Notice(Notice) = "notice",
    Heartbeat(Empty) = "heartbeat",
    Ack(Ack) = "ack",
}

impl Payload {
    /// Types that may only ever be written to the wizard's connection.
    pub fn wizard_only(&self) -> bool {
        matches!(self, Payload::ActionOptions(_) | Payload::HintHighlight(_))
    }

    /// Types a client is allowed to send.
    pub fn client_sendable(&self) -> bool {
        matches!(
            self,
            Payload::Join(_)
                | Payload::Ready(_)
                | Payload::Chat(_)
                | Payload::WizardAction(_)
                | Payload::FreeText(_)
                | Payload::HintRequest(_)
                | Payload::Heartbeat(_)
        )
    }
}

fn decode_body<T: DeserializeOwned>(body: Value) -> Result<T, DecodeError> {
    serde_path_to_error::deserialize(body).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." || inner.is_empty() { "payload".to_string() } else { format!("payload.{inner}") };
        DecodeError::new(path, e.into_inner().to_string())
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Envelope {
    pub session: Option<String>,
    pub seq: u64,
    /// Server clock in milliseconds.
    pub ts: u64,
    pub payload: Payload,
}

impl Envelope {
    pub fn new(session: Option<String>, seq: u64, ts: u64, payload: Payload) -> Self {
        Envelope { session, seq, ts, payload }
    }

    pub fn type_tag(&self) -> &'static str {
        self.payload.type_tag()
    }
}

impl Serialize for Envelope {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut m = s.serialize_map(Some(6))?;
        m.serialize_entry("v", &PROTOCOL_VERSION)?;
        m.serialize_entry("type", self.payload.type_tag())?;
        m.serialize_entry("session", &self.session)?;
        m.serialize_entry("seq", &self.seq)?;
        m.serialize_entry("ts", &self.ts)?;
        m.serialize_entry("payload", &self.payload.body())?;
        m.end()
    }
}

pub fn encode(env: &Envelope) -> String {
    serde_json::to_string(env).expect("envelopes serialize")
}

pub fn decode(text: &str) -> Result<Envelope, DecodeError> {
    let value: Value = serde_json::from_str(text).map_err(|e| DecodeError::new(".", e.to_string()))?;
    let Value::Object(mut obj) = value else {
        return Err(DecodeError::new(".", "envelope must be an object"));
    };
    const KEYS: [&str; 6] = ["v", "type", "session", "seq", "ts", "payload"];
    if let Some(extra) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(DecodeError::new(extra.clone(), "unknown field"));
    }
    match obj.get("v") {
        Some(Value::Number(n)) if n.as_u64() == Some(PROTOCOL_VERSION) => {}
        Some(_) => return Err(DecodeError::new("v", "unsupported protocol version")),
        None => return Err(DecodeError::new("v", "missing field")),
    }
    let tag = match obj.get("type") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(DecodeError::new("type", "expected a string")),
        None => return Err(DecodeError::new("type", "missing field")),
    };
    if !Payload::TYPES.contains(&tag.as_str()) {
        return Err(DecodeError::new("type", format!("unknown message type {tag:?}")));
    }
    let session = match obj.remove("session") {
        None | Some(Value::Null) => None,
        Some(Value::String(s)) => Some(s),
        Some(_) => return Err(DecodeError::new("session", "expected a string or null")),
    };
    let seq = field_u64(&obj, "seq")?;
    let ts = field_u64(&obj, "ts")?;
    let body = match obj.remove("payload") {
        Some(v @ Value::Object(_)) => v,
        Some(_) => return Err(DecodeError::new("payload", "expected an object")),
        None => Value::Object(Map::new()),
    };
    let payload = Payload::from_body(&tag, body)?;
    Ok(Envelope { session, seq, ts, payload })
}

fn field_u64(obj: &Map<String, Value>, key: &str) -> Result<u64, DecodeError> {
    match obj.get(key) {
        Some(v) => v.as_u64().ok_or_else(|| DecodeError::new(key, "expected a non-negative integer")),
        None => Err(DecodeError::new(key, "missing field")),
    }
}

/// Tracks outgoing sequence numbers for one connection.
#[derive(Debug, Clone, Default)]
pub struct SeqCounter {
    next: u64,
}

impl SeqCounter {
    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> u64 {
        self.next += 1;
        self.next
    }

    pub fn last(&self) -> u64 {
        self.next
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chat_env() -> Envelope {
        Envelope::new(Some("s1".into()), 3, 1_000, Payload::Chat(Chat::text("hello")))
    }

    #[test]
    fn key_order_is_fixed() {
        assert_eq!(
            encode(&chat_env()),
            r#"{"v":1,"type":"chat","session":"s1","seq":3,"ts":1000,"payload":{"text":"hello"}}"#
        );
    }

    #[test]
    fn chat_round_trip() {
        let env = chat_env();
        assert_eq!(decode(&encode(&env)).unwrap(), env);
    }

    #[test]
    fn unknown_type_names_type() {
        let err = decode(r#"{"v":1,"type":"foo","session":null,"seq":1,"ts":0,"payload":{}}"#).unwrap_err();
        assert_eq!(err.path, "type");
    }

    #[test]
    fn payload_errors_carry_paths() {
        let err = decode(r#"{"v":1,"type":"wizard_action","session":null,"seq":1,"ts":0,"payload":{"action":7}}"#)
            .unwrap_err();
        assert_eq!(err.path, "payload.action");
        let err = decode(r#"{"v":1,"type":"chat","session":null,"seq":1,"ts":0,"payload":{"text":"x","bogus":1}}"#)
            .unwrap_err();
        assert!(err.path.starts_with("payload"), "{err}");
    }

    #[test]
    fn rejects_bad_headers() {
        assert_eq!(decode("[]").unwrap_err().path, ".");
        assert_eq!(decode(r#"{"v":2,"type":"ready","seq":1,"ts":0}"#).unwrap_err().path, "v");
        assert_eq!(decode(r#"{"v":1,"type":"ready","seq":-1,"ts":0}"#).unwrap_err().path, "seq");
        assert_eq!(decode(r#"{"v":1,"type":"ready","seq":1,"ts":0,"x":0}"#).unwrap_err().path, "x");
    }

    #[test]
    fn missing_payload_means_empty() {
        let env = decode(r#"{"v":1,"type":"ready","session":null,"seq":1,"ts":0}"#).unwrap();
        assert_eq!(env.payload, Payload::Ready(Empty {}));
    }

    #[test]
    fn privacy_classification() {
        assert!(Payload::HintHighlight(HintHighlight { action: "okay".into() }).wizard_only());
        assert!(!Payload::Chat(Chat::text("x")).wizard_only());
        assert!(!Payload::Ack(Ack { seq: 1 }).client_sendable());
    }
}
