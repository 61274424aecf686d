//! Synthetic two-domain bearing benchmark.
//!
//! Four health states share one generator: a shaft-rate chirp with a random
//! linear speed ramp, speed-locked resonance bursts, and white noise. The
//! target domain differs from the source by a resonance shift and a lower SNR.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signal::{gen_fault_signal, FaultSpec, Signal, SpeedProfile};

pub const CLASS_NAMES: [&str; 4] = ["H", "IR", "OR", "B"];

/// Shaft speed range in rev/s (900–2400 rpm).
pub const SPEED_RANGE: (f64, f64) = (15.0, 40.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DomainSpec {
    /// Multiplies every class resonance.
    pub resonance_scale: f64,
    pub snr_db: f64,
}

impl DomainSpec {
    pub const SOURCE: DomainSpec = DomainSpec {
        resonance_scale: 1.0,
        snr_db: 10.0,
    };
    pub const TARGET: DomainSpec = DomainSpec {
        resonance_scale: 1.4,
        snr_db: 5.0,
    };
}

/// Fault signature of `class` (0 = H, 1 = IR, 2 = OR, 3 = B) in `domain`.
pub fn class_fault(class: usize, domain: &DomainSpec) -> Result<FaultSpec> {
    let (ipr, res, decay, amp) = match class {
        0 => return Ok(FaultSpec::healthy(domain.snr_db)),
        1 => (5.4, 600.0, 1500.0, 5.0),
        2 => (3.6, 1500.0, 1500.0, 5.0),
        3 => (2.3, 3750.0, 1500.0, 5.0),
        _ => return Err(Error::invalid(format!("class id {class} not in 0..4"))),
    };
    Ok(FaultSpec {
        class_id: class,
        impulses_per_rev: ipr,
        resonance_hz: res * domain.resonance_scale,
        decay,
        snr_db: domain.snr_db,
        impulse_amplitude: amp,
    })
}

/// Signals with labels. `labels` may be ignored by consumers that treat the
/// set as unlabeled.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub signals: Vec<Signal>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl LabeledSet {
    pub fn new(signals: Vec<Signal>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        if signals.len() != labels.len() {
            return Err(Error::shape(format!(
                "{} signals with {} labels",
                signals.len(),
                labels.len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::invalid(format!("label {l} with {classes} classes")));
        }
        Ok(Self {
            signals,
            labels,
            classes,
        })
    }

    pub fn len(&self) -> usize {
        self.signals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signals.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchmarkSpec {
    pub classes: usize,
    pub per_class: usize,
    pub sample_rate: f64,
    pub sample_len: usize,
}

/// `per_class` signals of each class in `domain`, class-major order.
/// `stream` separates independent draws under one seed.
pub fn generate_domain(spec: &BenchmarkSpec, domain: &DomainSpec, seed: u64, stream: u64) -> Result<LabeledSet> {
    if spec.per_class == 0 {
        return Err(Error::invalid("per_class must be >= 1"));
    }
    if spec.classes == 0 || spec.classes > CLASS_NAMES.len() {
        return Err(Error::invalid(format!("classes must be in 1..={}", CLASS_NAMES.len())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let duration = spec.sample_len as f64 / spec.sample_rate;
    let mut signals = Vec::with_capacity(spec.classes * spec.per_class);
    let mut labels = Vec::with_capacity(signals.capacity());
    for class in 0..spec.classes {
        let fault = class_fault(class, domain)?;
        for _ in 0..spec.per_class {
            let f0 = rng.random_range(SPEED_RANGE.0..SPEED_RANGE.1);
            let f1 = rng.random_range(SPEED_RANGE.0..SPEED_RANGE.1);
            let profile = SpeedProfile::new(f0, f1, duration)?;
            let noise_seed: u64 = rng.random();
            signals.push(gen_fault_signal(&profile, &fault, spec.sample_rate, spec.sample_len, noise_seed)?);
            labels.push(class);
        }
    }
    LabeledSet::new(signals, labels, spec.classes)
}

/// Source training set, unlabeled target training set and held-out target
/// test set.
#[derive(Debug, Clone, PartialEq)]
pub struct Benchmark {
    pub source: LabeledSet,
    pub target: LabeledSet,
    pub target_test: LabeledSet,
}

pub fn generate_benchmark(spec: &BenchmarkSpec, seed: u64) -> Result<Benchmark> {
    Ok(Benchmark {
        source: generate_domain(spec, &DomainSpec::SOURCE, seed, 1)?,
        target: generate_domain(spec, &DomainSpec::TARGET, seed, 2)?,
        target_test: generate_domain(spec, &DomainSpec::TARGET, seed, 3)?,
    })
}
