#![no_main]

use declim::units::{format_context, parse_bytes, parse_context};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(t) = parse_context(s) {
        assert_eq!(parse_context(&format_context(t)).ok(), Some(t));
    }
    let _ = parse_bytes(s);
});
