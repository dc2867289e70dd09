#![no_main]

use libfuzzer_sys::fuzz_target;
use woz_core::protocol::{decode, encode};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(env) = decode(text) {
        let again = decode(&encode(&env)).expect("encoded envelopes decode");
        assert_eq!(env, again);
    }
});
