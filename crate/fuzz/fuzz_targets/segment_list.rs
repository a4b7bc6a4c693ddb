#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = lobsim::config::parse_segment_list(text);
        let _ = lobsim::config::parse_offset_spec(text);
    }
});
