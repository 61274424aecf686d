#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(m) = adaptive_stft::io::parse_manifest(text) {
            let back = adaptive_stft::io::parse_manifest(&adaptive_stft::io::format_manifest(&m)).unwrap();
            assert_eq!(back, m);
        }
    }
});
