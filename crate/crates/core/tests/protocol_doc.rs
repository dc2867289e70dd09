//! The examples in docs/protocol.md are real frames.

use std::collections::BTreeSet;

use woz_core::protocol::{decode, encode, Payload};

const DOC: &str = include_str!("../../../docs/protocol.md");

fn examples() -> Vec<&'static str> {
    let mut out = Vec::new();
    let mut in_json = false;
    for line in DOC.lines() {
        match line.trim() {
            "```json" => in_json = true,
            "```" => in_json = false,
            l if in_json && !l.is_empty() => out.push(l),
            _ => {}
        }
    }
    out
}

#[test]
fn examples_round_trip_byte_for_byte() {
    let ex = examples();
    assert!(ex.len() > 15);
    for line in ex {
        let env = decode(line).unwrap_or_else(|e| panic!("{line}\n{e}"));
        assert_eq!(encode(&env), line);
    }
}

#[test]
fn every_type_has_an_example() {
    let seen: BTreeSet<&str> = examples().iter().map(|l| decode(l).unwrap().type_tag()).collect();
    for t in Payload::TYPES {
        assert!(seen.contains(t), "no example for {t}");
    }
}

#[test]
fn client_examples_come_first() {
    let ex = examples();
    let split = ex.iter().position(|l| !decode(l).unwrap().payload.client_sendable()).unwrap();
    for l in &ex[..split] {
        assert_eq!(decode(l).unwrap().ts, 0, "{l}");
    }
}
