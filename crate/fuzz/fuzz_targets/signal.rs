#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(x) = adaptive_stft::io::parse_signal(text) {
            let back = adaptive_stft::io::parse_signal(&adaptive_stft::io::format_signal(&x)).unwrap();
            assert_eq!(back, x);
        }
    }
});
