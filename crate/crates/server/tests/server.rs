mod support;

use std::collections::BTreeMap;

use support::*;
use woz_core::log::validate_log;
use woz_core::protocol::{Chat, Empty, FreeText, Join, Payload, WizardAction};
use woz_core::session::{CloseReason, Role};

async fn pair(srv: &woz_server::RunningServer) -> (Client, Client) {
    let mut op = Client::connect(srv).await;
    let mut wiz = Client::connect(srv).await;
    let got = op.request(Payload::Join(Join::default())).await;
    assert_eq!(notice_codes(&got), ["waiting"]);
    let got = wiz.request(Payload::Join(Join::default())).await;
    assert_eq!(types(&got), ["role_assigned", "instructions"]);
    while op.participant.is_none() {
        op.next().await;
    }
    let s = sync(srv).await;
    op.catch_up(&s).await;
    (op, wiz)
}

async fn start_game(srv: &woz_server::RunningServer, op: &mut Client, wiz: &mut Client) {
    let s = advance(srv, 30_000).await;
    op.catch_up(&s).await;
    wiz.catch_up(&s).await;
    op.request(Payload::Ready(Empty {})).await;
    let got = wiz.request(Payload::Ready(Empty {})).await;
    assert!(types(&got).contains(&"action_options"), "{:?}", types(&got));
    let s = sync(srv).await;
    op.catch_up(&s).await;
}

fn role_of(c: &Client) -> Role {
    c.seen
        .iter()
        .find_map(|e| match &e.payload {
            Payload::RoleAssigned(r) => Some(r.role),
            _ => None,
        })
        .expect("role assigned")
}

#[tokio::test]
async fn full_session_over_the_wire() {
    let dir = tempfile::tempdir().unwrap();
    let srv = server(dir.path()).await;
    let (mut op, mut wiz) = pair(&srv).await;
    assert_eq!((role_of(&op), role_of(&wiz)), (Role::Operator, Role::Wizard));

    let got = op.request(Payload::Ready(Empty {})).await;
    assert_eq!(notice_codes(&got), ["too_early"]);
    start_game(&srv, &mut op, &mut wiz).await;

    let got =
        wiz.request(Payload::WizardAction(WizardAction { action: "intro_hello".into(), slots: BTreeMap::new() })).await;
    assert!(got.iter().any(|e| matches!(&e.payload, Payload::Chat(c) if c.text.starts_with("Hi, my name is Fred"))));
    let got = op.request(Payload::Chat(Chat::text("Hi Fred, I am _"))).await;
    assert!(got.iter().any(|e| matches!(&e.payload, Payload::Chat(c) if c.from == Some(Role::Operator))));

    let s = advance(&srv, 400_000).await;
    let tail = op.catch_up(&s).await;
    wiz.catch_up(&s).await;
    let end = tail
        .iter()
        .find_map(|e| match &e.payload {
            Payload::SessionEnd(end) => Some(end.clone()),
            _ => None,
        })
        .expect("operator sees the end");
    assert_eq!(end.reason, CloseReason::Evacuated);
    assert!(!end.resolved);
    assert_eq!(end.reward_cents, 140);
    let wiz_end = wiz.seen.iter().filter(|e| e.type_tag() == "session_end").count();
    assert_eq!(wiz_end, 1);

    for e in &op.seen {
        assert!(!e.payload.wizard_only(), "operator received {}", e.type_tag());
    }
    let session = end_session(&op);
    assert!(op
        .seen
        .iter()
        .filter(|e| e.type_tag() != "notice" && e.type_tag() != "ack")
        .skip(2)
        .all(|e| e.session.as_deref() == Some(session.as_str())));

    let http = reqwest::Client::new();
    let base = srv.base_url();
    let looked: serde_json::Value =
        http.get(format!("{base}/tokens/{}", end.token)).send().await.unwrap().json().await.unwrap();
    assert_eq!(looked["session"], session.as_str());

    let post = |body: serde_json::Value| http.post(format!("{base}/questionnaire")).json(&body).send();
    let r = post(serde_json::json!({ "token": end.token, "answers": [5, 6, 2, 9] })).await.unwrap();
    assert_eq!(r.status(), 422);
    let r = post(serde_json::json!({ "token": "nope", "answers": [5, 6, 2, 7] })).await.unwrap();
    assert_eq!(r.status(), 404);
    let r =
        post(serde_json::json!({ "token": end.token, "answers": [5, 6, 2, 7], "free_text": " fun " })).await.unwrap();
    assert_eq!(r.status(), 200);
    let r = post(serde_json::json!({ "token": end.token, "answers": [5, 6, 2, 7] })).await.unwrap();
    assert_eq!(r.status(), 409);

    let r = http.get(format!("{base}/logs/{session}")).send().await.unwrap();
    assert_eq!(r.status(), 401);
    let r = http.get(format!("{base}/logs/{session}")).bearer_auth(ADMIN).send().await.unwrap();
    assert_eq!(r.status(), 200);
    let log: woz_core::log::DialogueLog = r.json().await.unwrap();
    validate_log(&log).expect("stored log is valid");
    assert_eq!(log.questionnaire.as_ref().unwrap().free_text.as_deref(), Some("fun"));
    assert_eq!(log.metrics.as_ref().unwrap().turns_operator, 1);

    op.close().await;
    wiz.close().await;
    srv.shutdown().await;
}

fn end_session(c: &Client) -> String {
    c.seen.iter().rev().find_map(|e| e.session.clone()).expect("session id on envelopes")
}

#[tokio::test]
async fn rejects_bad_input_with_notices() {
    let dir = tempfile::tempdir().unwrap();
    let srv = server(dir.path()).await;
    let mut c = Client::connect(&srv).await;
    c.send_raw("{not json").await;
    assert_eq!(notice_codes(&[c.next().await]), ["bad_envelope"]);
    c.send_raw(r#"{"v":1,"type":"chat","session":null,"seq":1,"ts":0,"payload":{"text":"x","bogus":1}}"#).await;
    let env = c.next().await;
    match &env.payload {
        Payload::Notice(n) => assert!(n.message.contains("payload"), "{}", n.message),
        other => panic!("expected notice, got {other:?}"),
    }
    let got = c.request(Payload::Timer(woz_core::protocol::Timer { remaining_s: 1, display: "0:01".into() })).await;
    assert_eq!(notice_codes(&got), ["not_allowed"]);
    let got = c.request(Payload::Ready(Empty {})).await;
    assert_eq!(notice_codes(&got), ["not_joined"]);
    let got = c.request(Payload::Heartbeat(Empty {})).await;
    assert!(got.is_empty());
    srv.shutdown().await;
}

#[tokio::test]
async fn roles_are_enforced() {
    let dir = tempfile::tempdir().unwrap();
    let srv = server(dir.path()).await;
    let (mut op, mut wiz) = pair(&srv).await;
    start_game(&srv, &mut op, &mut wiz).await;
    let got =
        op.request(Payload::WizardAction(WizardAction { action: "intro_hello".into(), slots: BTreeMap::new() })).await;
    assert_eq!(notice_codes(&got), ["wrong_role"]);
    let got = op.request(Payload::HintRequest(Empty {})).await;
    assert_eq!(notice_codes(&got), ["wrong_role"]);
    let got = wiz.request(Payload::WizardAction(WizardAction { action: "bye".into(), slots: BTreeMap::new() })).await;
    assert_eq!(notice_codes(&got), ["action_unavailable"]);
    let got = wiz.request(Payload::HintRequest(Empty {})).await;
    assert_eq!(types(&got), ["hint_highlight"]);
    let got = wiz.request(Payload::FreeText(FreeText { text: "typed by hand".into() })).await;
    assert!(got.iter().any(|e| matches!(&e.payload, Payload::Chat(c) if c.typed == Some(true))));
    let got = op.request(Payload::Join(Join::default())).await;
    assert_eq!(notice_codes(&got), ["already_joined"]);
    srv.shutdown().await;
}

#[tokio::test]
async fn reconnect_within_grace_and_abandon_after() {
    let dir = tempfile::tempdir().unwrap();
    let srv = server(dir.path()).await;
    let (mut op, mut wiz) = pair(&srv).await;
    start_game(&srv, &mut op, &mut wiz).await;

    let pid = wiz.participant.clone().unwrap();
    wiz.close().await;
    let s = advance(&srv, 10_000).await;
    op.catch_up(&s).await;
    let mut back = Client::connect(&srv).await;
    let got = back.request(Payload::Join(Join { participant: Some(pid.clone()) })).await;
    assert_eq!(types(&got), ["role_assigned", "timer", "action_options"]);
    assert_eq!(back.participant.as_deref(), Some(pid.as_str()));

    back.close().await;
    let s = advance(&srv, 31_000).await;
    let tail = op.catch_up(&s).await;
    let end = tail
        .iter()
        .find_map(|e| match &e.payload {
            Payload::SessionEnd(end) => Some(end.clone()),
            _ => None,
        })
        .expect("partner is told the session ended");
    assert_eq!(end.reason, CloseReason::Disconnect);
    srv.shutdown().await;
}

#[tokio::test]
async fn lobby_times_out() {
    let dir = tempfile::tempdir().unwrap();
    let srv = server_with(dir.path(), |c| c.lobby.timeout_s = 60).await;
    let mut c = Client::connect(&srv).await;
    c.request(Payload::Join(Join::default())).await;
    advance(&srv, 61_000).await;
    let env = c.next().await;
    assert_eq!(notice_codes(&[env]), ["lobby_timeout"]);
    let status: serde_json::Value =
        reqwest::get(format!("{}/health", srv.base_url())).await.unwrap().json().await.unwrap();
    assert_eq!(status["waiting"], 0);
    let got = c.request(Payload::Join(Join::default())).await;
    assert_eq!(notice_codes(&got), ["waiting"]);
    srv.shutdown().await;
}

#[tokio::test]
async fn http_metadata_and_assets() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("assets/gifs")).unwrap();
    std::fs::write(dir.path().join("assets/gifs/fire_found.gif"), b"GIF89a").unwrap();
    let srv = server(dir.path()).await;
    let base = srv.base_url();
    let boot: serde_json::Value = reqwest::get(format!("{base}/bootstrap")).await.unwrap().json().await.unwrap();
    assert_eq!(boot["ws_path"], "/ws");
    assert_eq!(boot["min_read_s"], 30);
    assert_eq!(boot["time_limit_s"], 360);
    let sc: serde_json::Value = reqwest::get(format!("{base}/scenario")).await.unwrap().json().await.unwrap();
    assert_eq!(sc["name"], "offshore-emergency");
    assert_eq!(sc["questionnaire"]["questions"].as_array().unwrap().len(), 4);
    let gif = reqwest::get(format!("{base}/assets/gifs/fire_found.gif")).await.unwrap();
    assert_eq!(gif.status(), 200);
    assert_eq!(&gif.bytes().await.unwrap()[..], b"GIF89a");
    let r = reqwest::get(format!("{base}/tokens/unknown")).await.unwrap();
    assert_eq!(r.status(), 404);
    srv.shutdown().await;
}

#[tokio::test]
async fn interrupted_sessions_are_recovered_on_start() {
    let dir = tempfile::tempdir().unwrap();
    let srv = server(dir.path()).await;
    let (mut op, mut wiz) = pair(&srv).await;
    start_game(&srv, &mut op, &mut wiz).await;
    wiz.request(Payload::WizardAction(WizardAction { action: "intro_hello".into(), slots: BTreeMap::new() })).await;
    let sid = end_session(&wiz);
    srv.shutdown().await;
    drop((op, wiz));

    let srv = server(dir.path()).await;
    let r =
        reqwest::Client::new().get(format!("{}/logs/{sid}", srv.base_url())).bearer_auth(ADMIN).send().await.unwrap();
    assert_eq!(r.status(), 200);
    let log: woz_core::log::DialogueLog = r.json().await.unwrap();
    assert!(log.outcome.is_none());
    assert!(log.events.len() >= 3);
    srv.shutdown().await;
}
