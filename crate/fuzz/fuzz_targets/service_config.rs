#![no_main]

use libfuzzer_sys::fuzz_target;
use woz_core::config::ServiceConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ServiceConfig::from_toml(text);
    }
});
