#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(c) = adaptive_stft::config::RunConfig::from_text(text) {
            let back = adaptive_stft::config::RunConfig::from_text(&c.render()).unwrap();
            assert_eq!(back, c);
        }
    }
});
