//! Plain-text file formats.
//!
//! All numbers are written with 17 significant digits so that a write/read
//! cycle is lossless, and parsed with `str::parse`, which ignores locale.
//!
//! - Signal: `# sample_rate=<f>` then one sample per line.
//! - Window lengths: `# beta=<f> support=<int>` then one length per line.
//! - Matrix CSV: optional `#` header lines, then comma-separated rows.
//! - Spectrogram CSV: matrix CSV with header `# n=<N> hop=<t> fs=<Hz>`;
//!   `complex=true` in the header marks interleaved `re,im` pairs.
//! - Manifest: `file,label,domain` CSV.

use std::fs;
use std::path::Path;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::signal::Signal;
use crate::transform::Spectrogram;

/// 17 significant digits, exponent form.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    let t = s.trim();
    t.parse::<f64>()
        .map_err(|_| Error::parse(line, format!("not a number: {t:?}")))
}

/// `key=value` pairs of a `# k=v k=v` header line.
fn header_pairs(line: &str) -> Vec<(&str, &str)> {
    line.trim_start_matches('#')
        .split_whitespace()
        .filter_map(|kv| kv.split_once('='))
        .collect()
}

fn header_value<'a>(pairs: &[(&'a str, &'a str)], key: &str) -> Option<&'a str> {
    pairs.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

/// Non-blank lines with their 1-based line numbers.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

pub fn format_signal(x: &Signal) -> String {
    let mut out = format!("# sample_rate={}\n", fmt_f64(x.sample_rate()));
    for v in x.samples() {
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    out
}

pub fn parse_signal(text: &str) -> Result<Signal> {
    let mut lines = numbered_lines(text);
    let (ln, first) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if !first.starts_with('#') {
        return Err(Error::Format("missing sample_rate".into()));
    }
    let pairs = header_pairs(first);
    let fs = header_value(&pairs, "sample_rate").ok_or_else(|| Error::Format("missing sample_rate".into()))?;
    let fs = parse_f64(fs, ln)?;
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(Error::parse(ln, format!("sample_rate must be positive, got {fs}")));
    }
    let mut samples = Vec::new();
    for (ln, l) in lines {
        if l.starts_with('#') {
            continue;
        }
        let v = parse_f64(l, ln)?;
        if !v.is_finite() {
            return Err(Error::parse(ln, "non-finite sample"));
        }
        samples.push(v);
    }
    if samples.is_empty() {
        return Err(Error::Format("empty signal".into()));
    }
    Signal::new(samples, fs)
}

pub fn save_signal(x: &Signal, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_signal(x))?;
    Ok(())
}

pub fn load_signal(path: impl AsRef<Path>) -> Result<Signal> {
    parse_signal(&fs::read_to_string(path)?)
}

/// Window lengths with the Kaiser shape and support they were learnt for.
#[derive(Debug, Clone, PartialEq)]
pub struct LengthsFile {
    pub lengths: Vec<f64>,
    pub beta: f64,
    pub support: usize,
}

pub fn format_lengths(lengths: &[f64], beta: f64, support: usize) -> String {
    let mut out = format!("# beta={} support={support}\n", fmt_f64(beta));
    for v in lengths {
        out.push_str(&fmt_f64(*v));
        out.push('\n');
    }
    out
}

pub fn parse_lengths(text: &str) -> Result<LengthsFile> {
    let mut lines = numbered_lines(text);
    let (ln, first) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if !first.starts_with('#') {
        return Err(Error::parse(ln, "expected header '# beta=<f> support=<int>'"));
    }
    let pairs = header_pairs(first);
    let beta = header_value(&pairs, "beta").ok_or_else(|| Error::parse(ln, "missing beta"))?;
    let beta = parse_f64(beta, ln)?;
    let support = header_value(&pairs, "support").ok_or_else(|| Error::parse(ln, "missing support"))?;
    let support: usize = support
        .parse()
        .map_err(|_| Error::parse(ln, format!("support is not an integer: {support:?}")))?;
    let mut lengths = Vec::new();
    for (ln, l) in lines {
        if l.starts_with('#') {
            continue;
        }
        let v = parse_f64(l, ln)?;
        if !v.is_finite() {
            return Err(Error::parse(ln, "non-finite window length"));
        }
        lengths.push(v);
    }
    if lengths.is_empty() {
        return Err(Error::Format("no window lengths".into()));
    }
    Ok(LengthsFile {
        lengths,
        beta,
        support,
    })
}

pub fn format_matrix_csv(m: &Matrix, header: Option<&str>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str("# ");
        out.push_str(h);
        out.push('\n');
    }
    for row in m.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Matrix CSV and the `#` header lines that preceded it.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixCsv {
    pub header: Vec<String>,
    pub matrix: Matrix,
}

pub fn parse_matrix_csv(text: &str) -> Result<MatrixCsv> {
    let mut header = Vec::new();
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    let mut seen = false;
    for (ln, l) in numbered_lines(text) {
        seen = true;
        if let Some(h) = l.strip_prefix('#') {
            header.push(h.trim().to_string());
            continue;
        }
        let start = data.len();
        for cell in l.split(',') {
            let v = parse_f64(cell, ln)?;
            if !v.is_finite() {
                return Err(Error::parse(ln, "non-finite value"));
            }
            data.push(v);
        }
        let n = data.len() - start;
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(Error::parse(ln, format!("expected {c} columns, found {n}")));
            }
            _ => {}
        }
        rows += 1;
    }
    if !seen {
        return Err(Error::parse(1, "empty file"));
    }
    let cols = cols.ok_or_else(|| Error::parse(text.lines().count().max(1), "no data rows"))?;
    Ok(MatrixCsv {
        header,
        matrix: Matrix::from_vec(rows, cols, data),
    })
}

/// Header fields of a spectrogram CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrogramHeader {
    pub support: usize,
    pub hop: usize,
    pub sample_rate: f64,
    pub complex: bool,
}

impl SpectrogramHeader {
    pub fn of(spec: &Spectrogram, complex: bool) -> Self {
        Self {
            support: spec.support,
            hop: spec.hop,
            sample_rate: spec.sample_rate,
            complex,
        }
    }

    fn render(&self) -> String {
        let mut s = format!("n={} hop={} fs={}", self.support, self.hop, fmt_f64(self.sample_rate));
        if self.complex {
            s.push_str(" complex=true");
        }
        s
    }
}

/// Magnitudes, or interleaved `re,im` pairs when `complex` is set.
pub fn format_spectrogram(spec: &Spectrogram, complex: bool) -> String {
    let header = SpectrogramHeader::of(spec, complex).render();
    let m = if complex {
        Matrix::from_fn(spec.n_frames, 2 * spec.bins, |i, j| {
            let c = spec.get(i, j / 2);
            if j % 2 == 0 {
                c.re
            } else {
                c.im
            }
        })
    } else {
        spec.magnitude()
    };
    format_matrix_csv(&m, Some(&header))
}

/// A spectrogram file reduced to its magnitude matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramCsv {
    pub header: Option<SpectrogramHeader>,
    pub magnitude: Matrix,
    /// Complex coefficients when the file held them.
    pub coeffs: Option<Vec<Complex64>>,
}

pub fn parse_spectrogram(text: &str) -> Result<SpectrogramCsv> {
    let csv = parse_matrix_csv(text)?;
    let mut header = None;
    for h in &csv.header {
        let pairs = header_pairs(h);
        let (Some(n), Some(hop), Some(fs)) = (
            header_value(&pairs, "n"),
            header_value(&pairs, "hop"),
            header_value(&pairs, "fs"),
        ) else {
            continue;
        };
        let bad = |what: &str| Error::Format(format!("bad spectrogram header field {what}"));
        header = Some(SpectrogramHeader {
            support: n.parse().map_err(|_| bad("n"))?,
            hop: hop.parse().map_err(|_| bad("hop"))?,
            sample_rate: fs.parse().map_err(|_| bad("fs"))?,
            complex: header_value(&pairs, "complex") == Some("true"),
        });
    }
    let complex = header.is_some_and(|h| h.complex);
    if !complex {
        if csv.matrix.as_slice().iter().any(|v| *v < 0.0) {
            return Err(Error::Format("negative magnitude".into()));
        }
        return Ok(SpectrogramCsv {
            header,
            magnitude: csv.matrix,
            coeffs: None,
        });
    }
    let (rows, cols) = csv.matrix.shape();
    if cols % 2 != 0 {
        return Err(Error::Format(format!("complex spectrogram with odd column count {cols}")));
    }
    let coeffs: Vec<Complex64> = csv
        .matrix
        .as_slice()
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect();
    let magnitude = Matrix::from_vec(rows, cols / 2, coeffs.iter().map(|c| c.norm()).collect());
    Ok(SpectrogramCsv {
        header,
        magnitude,
        coeffs: Some(coeffs),
    })
}

/// One manifest entry: a signal file relative to the manifest, its class and
/// its domain name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub file: String,
    pub label: usize,
    pub domain: String,
}

pub const MANIFEST_HEADER: &str = "file,label,domain";

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = String::from(MANIFEST_HEADER);
    out.push('\n');
    for e in entries {
        out.push_str(&format!("{},{},{}\n", e.file, e.label, e.domain));
    }
    out
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut lines = numbered_lines(text);
    let (ln, first) = lines.next().ok_or_else(|| Error::parse(1, "empty file"))?;
    if first != MANIFEST_HEADER {
        return Err(Error::parse(ln, format!("expected header {MANIFEST_HEADER:?}")));
    }
    let mut out = Vec::new();
    for (ln, l) in lines {
        let parts: Vec<&str> = l.split(',').collect();
        let [file, label, domain] = parts[..] else {
            return Err(Error::parse(ln, format!("expected 3 fields, found {}", parts.len())));
        };
        let label = label
            .trim()
            .parse()
            .map_err(|_| Error::parse(ln, format!("bad label {label:?}")))?;
        if file.trim().is_empty() {
            return Err(Error::parse(ln, "empty file name"));
        }
        out.push(ManifestEntry {
            file: file.trim().to_string(),
            label,
            domain: domain.trim().to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_round_trip() {
        let x = Signal::new(vec![0.1, -2.5e-7, 3.0], 1024.0).unwrap();
        let y = parse_signal(&format_signal(&x)).unwrap();
        assert_eq!(y.sample_rate(), 1024.0);
        for (a, b) in x.samples().iter().zip(y.samples()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(x, y);
    }

    #[test]
    fn signal_errors() {
        let e = parse_signal("# sample_rate=100\n").unwrap_err();
        assert_eq!(e.to_string(), "empty signal");
        let e = parse_signal("1.0\n2.0\n").unwrap_err();
        assert_eq!(e.to_string(), "missing sample_rate");
        let e = parse_signal("# fs=3\n1.0\n").unwrap_err();
        assert_eq!(e.to_string(), "missing sample_rate");
        let e = parse_signal("# sample_rate=100\n1.0\nabc\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }), "{e}");
        assert!(matches!(parse_signal(""), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn lengths_round_trip() {
        let text = format_lengths(&[128.0, 33.25, 1.5], 8.0, 128);
        assert!(text.starts_with("# beta="));
        let l = parse_lengths(&text).unwrap();
        assert_eq!(l.lengths, vec![128.0, 33.25, 1.5]);
        assert_eq!((l.beta, l.support), (8.0, 128));
        assert!(parse_lengths("# beta=8\n1\n").is_err());
    }

    #[test]
    fn matrix_csv_errors() {
        assert!(matches!(parse_matrix_csv(""), Err(Error::Parse { line: 1, .. })));
        let e = parse_matrix_csv("1,2\n3\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 2, .. }));
        let m = parse_matrix_csv("# hi\n1,2\n3,4\n").unwrap();
        assert_eq!(m.header, vec!["hi".to_string()]);
        assert_eq!(m.matrix.as_slice(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn spectrogram_round_trip() {
        let spec = Spectrogram {
            coeffs: vec![
                Complex64::new(3.0, 4.0),
                Complex64::new(0.0, -1.0),
                Complex64::new(0.5, 0.0),
                Complex64::new(0.0, 0.0),
            ],
            n_frames: 2,
            bins: 2,
            support: 2,
            hop: 1,
            sample_rate: 10.0,
        };
        let p = parse_spectrogram(&format_spectrogram(&spec, false)).unwrap();
        assert_eq!(p.magnitude.as_slice(), &[5.0, 1.0, 0.5, 0.0]);
        let h = p.header.unwrap();
        assert_eq!((h.support, h.hop, h.sample_rate, h.complex), (2, 1, 10.0, false));
        let c = parse_spectrogram(&format_spectrogram(&spec, true)).unwrap();
        assert_eq!(c.coeffs.unwrap(), spec.coeffs);
        assert_eq!(c.magnitude, p.magnitude);
    }

    #[test]
    fn manifest_round_trip() {
        let e = vec![
            ManifestEntry {
                file: "source/0000.txt".into(),
                label: 0,
                domain: "source".into(),
            },
            ManifestEntry {
                file: "target/0001.txt".into(),
                label: 3,
                domain: "target".into(),
            },
        ];
        assert_eq!(parse_manifest(&format_manifest(&e)).unwrap(), e);
        assert!(matches!(parse_manifest("file,label,domain\na,b,c\n"), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn fmt_has_17_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
