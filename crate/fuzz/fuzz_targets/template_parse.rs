#![no_main]

use libfuzzer_sys::fuzz_target;
use woz_core::fsm::Template;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(t) = Template::parse(text) {
        assert_eq!(t.source(), text);
        assert!(t.render(|_| Some("v")).is_ok());
        let _ = t.render_partial(|_| None);
    }
});
