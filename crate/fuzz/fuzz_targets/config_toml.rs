#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(file) = lobsim::config::parse_file_config(text) {
            if let Some(session) = file.session {
                let _ = session.resolve();
            }
        }
    }
});
