//! Parsers must reject malformed input with an error, never a panic.

use proptest::prelude::*;

use adaptive_stft::config::RunConfig;
use adaptive_stft::io::{
    format_lengths, format_manifest, format_signal, parse_lengths, parse_manifest, parse_matrix_csv, parse_signal,
    parse_spectrogram, ManifestEntry,
};
use adaptive_stft::signal::Signal;
use adaptive_stft::transfer::persist::{parse_checkpoint, parse_history};

fn noisy_text() -> impl Strategy<Value = String> {
    prop::collection::vec(
        prop_oneof![
            Just("# sample_rate=".to_string()),
            Just("# beta=8 support=16".to_string()),
            Just("# n=8 hop=2 fs=100".to_string()),
            Just("[network] pool_rows=1 pool_cols=1 hidden=1 classes=2 len=3".to_string()),
            Just("[theta0] beta=8 support=4 hop=1 len=1".to_string()),
            Just("epoch,l_cl,l_m,l_sbsq,l_tbsq,lambda0,total,target_acc".to_string()),
            Just("file,label,domain".to_string()),
            "[-0-9.eE,=a-z_ ]{0,24}",
            any::<String>(),
        ],
        0..8,
    )
    .prop_map(|lines| lines.join("\n"))
}

proptest! {
    #[test]
    fn parsers_never_panic(text in noisy_text()) {
        let _ = parse_signal(&text);
        let _ = parse_lengths(&text);
        let _ = parse_matrix_csv(&text);
        let _ = parse_spectrogram(&text);
        let _ = parse_manifest(&text);
        let _ = parse_history(&text);
        let _ = parse_checkpoint(&text);
        let _ = RunConfig::from_text(&text);
    }

    #[test]
    fn signal_round_trip(x in prop::collection::vec(-1e6f64..1e6, 1..50), fs in 1.0f64..1e5) {
        let s = Signal::new(x, fs).unwrap();
        prop_assert_eq!(parse_signal(&format_signal(&s)).unwrap(), s);
    }

    #[test]
    fn lengths_round_trip(l in prop::collection::vec(1.0f64..64.0, 1..20), beta in 0.0f64..20.0) {
        let f = parse_lengths(&format_lengths(&l, beta, 64)).unwrap();
        prop_assert_eq!(f.lengths, l);
        prop_assert_eq!(f.beta, beta);
        prop_assert_eq!(f.support, 64);
    }

    #[test]
    fn manifest_round_trip(labels in prop::collection::vec(0usize..4, 0..10)) {
        let entries: Vec<ManifestEntry> = labels
            .iter()
            .enumerate()
            .map(|(i, &label)| ManifestEntry { file: format!("source/{i:04}.txt"), label, domain: "source".into() })
            .collect();
        prop_assert_eq!(parse_manifest(&format_manifest(&entries)).unwrap(), entries);
    }
}
