#![no_main]

use libfuzzer_sys::fuzz_target;
use woz_core::log::{validate_log, DialogueLog};

fuzz_target!(|data: &[u8]| {
    let Ok(log) = serde_json::from_slice::<DialogueLog>(data) else { return };
    let _ = validate_log(&log);
    let _ = log.compute_metrics();
    let back: DialogueLog = serde_json::from_str(&serde_json::to_string(&log).unwrap()).unwrap();
    assert_eq!(log, back);
});
