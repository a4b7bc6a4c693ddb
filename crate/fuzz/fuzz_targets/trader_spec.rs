#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = lobsim::config::parse_trader_spec(text);
        let _ = lobsim::config::parse_type_list(text);
    }
});
