#![no_main]

use libfuzzer_sys::fuzz_target;
use rades_core::scenario::load_scenario;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = load_scenario(data) {
        // anything accepted must survive a round trip unchanged
        let again = load_scenario(s.to_json().as_bytes()).expect("re-encoded scenario loads");
        assert_eq!(s, again);
    }
});
