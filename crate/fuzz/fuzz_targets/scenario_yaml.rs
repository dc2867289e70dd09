#![no_main]

use libfuzzer_sys::fuzz_target;
use woz_core::scenario::LoadOptions;
use woz_core::Scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    for strict in [false, true] {
        if let Ok(s) = Scenario::from_yaml(text, LoadOptions { strict }) {
            assert!(s.graph.states.contains_key(&s.graph.initial_state));
        }
    }
});
