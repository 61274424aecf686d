//! Synthetic variable-speed signals and frame slicing.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Uniformly sampled real waveform.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<f64>,
    sample_rate: f64,
}

impl Signal {
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("empty signal"));
        }
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(Error::invalid(format!("sample_rate must be > 0, got {sample_rate}")));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("sample {i} is not finite")));
        }
        Ok(Self {
            samples,
            sample_rate,
        })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKind {
    LinearUp,
    LinearDown,
}

/// Linear shaft-speed ramp. Frequencies are in revolutions per second and stay
/// at `f_end` once `duration` has elapsed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpeedProfile {
    pub kind: SweepKind,
    pub f_start: f64,
    pub f_end: f64,
    pub duration: f64,
}

impl SpeedProfile {
    pub fn new(f_start: f64, f_end: f64, duration: f64) -> Result<Self> {
        let kind = if f_end >= f_start {
            SweepKind::LinearUp
        } else {
            SweepKind::LinearDown
        };
        let p = Self {
            kind,
            f_start,
            f_end,
            duration,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn constant(freq: f64, duration: f64) -> Result<Self> {
        Self::new(freq, freq, duration)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_start > 0.0 && self.f_end > 0.0) {
            return Err(Error::invalid("speed profile frequencies must be > 0"));
        }
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("speed profile duration must be > 0"));
        }
        let consistent = match self.kind {
            SweepKind::LinearUp => self.f_end >= self.f_start,
            SweepKind::LinearDown => self.f_end <= self.f_start,
        };
        if !consistent {
            return Err(Error::invalid(format!(
                "{:?} profile from {} to {} Hz",
                self.kind, self.f_start, self.f_end
            )));
        }
        Ok(())
    }

    fn slope(&self) -> f64 {
        (self.f_end - self.f_start) / self.duration
    }

    /// Instantaneous frequency at time `t` (seconds).
    pub fn frequency_at(&self, t: f64) -> f64 {
        if t >= self.duration {
            self.f_end
        } else {
            self.f_start + self.slope() * t
        }
    }

    /// Revolutions completed by time `t`, i.e. the integral of the frequency.
    pub fn revolutions_at(&self, t: f64) -> f64 {
        let d = self.duration;
        if t <= d {
            self.f_start * t + 0.5 * self.slope() * t * t
        } else {
            self.f_start * d + 0.5 * self.slope() * d * d + self.f_end * (t - d)
        }
    }

    /// Inverse of [`revolutions_at`](Self::revolutions_at) for `revs >= 0`.
    pub fn time_of_revolution(&self, revs: f64) -> f64 {
        let d = self.duration;
        let at_end = self.revolutions_at(d);
        if revs > at_end {
            return d + (revs - at_end) / self.f_end;
        }
        let a = 0.5 * self.slope();
        let b = self.f_start;
        if a.abs() < 1e-300 {
            return revs / b;
        }
        // stable root of a t^2 + b t - revs = 0 with t >= 0
        let disc = (b * b + 4.0 * a * revs).max(0.0);
        2.0 * revs / (b + disc.sqrt())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaultSpec {
    /// 0 = healthy, 1 = inner race, 2 = outer race, 3 = ball.
    pub class_id: usize,
    /// Impacts per shaft revolution; 0 for a healthy bearing.
    pub impulses_per_rev: f64,
    pub resonance_hz: f64,
    /// Exponential decay rate of each resonance burst, 1/s.
    pub decay: f64,
    /// Signal-to-noise ratio; `f64::INFINITY` disables noise.
    pub snr_db: f64,
    /// Peak amplitude of each burst relative to the unit shaft component.
    pub impulse_amplitude: f64,
}

impl FaultSpec {
    pub fn healthy(snr_db: f64) -> Self {
        Self {
            class_id: 0,
            impulses_per_rev: 0.0,
            resonance_hz: 1000.0,
            decay: 500.0,
            snr_db,
            impulse_amplitude: 0.0,
        }
    }

    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if self.class_id > 3 {
            return Err(Error::invalid(format!("class id {} not in 0..=3", self.class_id)));
        }
        if !(self.impulses_per_rev >= 0.0 && self.impulses_per_rev.is_finite()) {
            return Err(Error::invalid("impulses_per_rev must be >= 0"));
        }
        if !(self.resonance_hz > 0.0 && self.resonance_hz < sample_rate / 2.0) {
            return Err(Error::invalid(format!(
                "resonance {} Hz outside (0, {})",
                self.resonance_hz,
                sample_rate / 2.0
            )));
        }
        if !(self.decay > 0.0 && self.decay.is_finite()) {
            return Err(Error::invalid("decay must be > 0"));
        }
        if self.snr_db.is_nan() {
            return Err(Error::invalid("snr_db is NaN"));
        }
        Ok(())
    }
}

/// Linear-frequency sweep `amplitude * sin(2π ∫ f)`.
pub fn gen_chirp(
    profile: &SpeedProfile,
    sample_rate: f64,
    n_samples: usize,
    amplitude: f64,
) -> Result<Signal> {
    profile.validate()?;
    if n_samples == 0 {
        return Err(Error::invalid("n_samples must be > 0"));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::invalid("sample_rate must be > 0"));
    }
    let nyquist = sample_rate / 2.0;
    if profile.f_end >= nyquist || profile.f_start >= nyquist {
        return Err(Error::invalid(format!(
            "sweep reaches {} Hz, Nyquist is {nyquist} Hz",
            profile.f_end.max(profile.f_start)
        )));
    }
    let two_pi = 2.0 * std::f64::consts::PI;
    let samples = (0..n_samples)
        .map(|n| {
            let t = n as f64 / sample_rate;
            amplitude * (two_pi * profile.revolutions_at(t)).sin()
        })
        .collect();
    Signal::new(samples, sample_rate)
}

/// Times in `[0, horizon)` at which the shaft has turned a whole multiple of
/// `1 / impulses_per_rev` revolutions, starting with the onset at `t = 0`.
pub fn impulse_onsets(profile: &SpeedProfile, impulses_per_rev: f64, horizon: f64) -> Vec<f64> {
    if impulses_per_rev <= 0.0 {
        return Vec::new();
    }
    let mut onsets = Vec::new();
    let mut k = 0u64;
    loop {
        let t = profile.time_of_revolution(k as f64 / impulses_per_rev);
        if t >= horizon {
            break;
        }
        onsets.push(t);
        k += 1;
    }
    onsets
}

/// Shaft-rate chirp plus speed-locked decaying resonance bursts plus white
/// Gaussian noise at `fault.snr_db`. Deterministic for a fixed `rng_seed`.
pub fn gen_fault_signal(
    profile: &SpeedProfile,
    fault: &FaultSpec,
    sample_rate: f64,
    n_samples: usize,
    rng_seed: u64,
) -> Result<Signal> {
    fault.validate(sample_rate)?;
    let mut samples = gen_chirp(profile, sample_rate, n_samples, 1.0)?.into_samples();

    let horizon = n_samples as f64 / sample_rate;
    let two_pi = 2.0 * std::f64::consts::PI;
    // bursts are truncated once they have decayed by 120 dB
    let burst_len = (1e6f64.ln() / fault.decay * sample_rate).ceil() as usize + 1;
    if fault.impulse_amplitude != 0.0 {
        for onset in impulse_onsets(profile, fault.impulses_per_rev, horizon) {
            let first = (onset * sample_rate).ceil() as usize;
            let last = (first + burst_len).min(n_samples);
            for (n, s) in samples.iter_mut().enumerate().take(last).skip(first) {
                let tau = n as f64 / sample_rate - onset;
                *s += fault.impulse_amplitude
                    * (-fault.decay * tau).exp()
                    * (two_pi * fault.resonance_hz * tau).sin();
            }
        }
    }

    if fault.snr_db.is_finite() {
        let power = samples.iter().map(|v| v * v).sum::<f64>() / n_samples as f64;
        let noise_std = (power / 10f64.powf(fault.snr_db / 10.0)).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        for s in samples.iter_mut() {
            let z: f64 = StandardNormal.sample(&mut rng);
            *s += noise_std * z;
        }
    }
    Signal::new(samples, sample_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Padding {
    /// Right-pad with zeros to the smallest length on which the frame-count
    /// formula is exact.
    Zero,
    None,
}

/// Frame-count convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FrameCount {
    /// `floor(1 + (L' - N - 1) / hop)`: every frame leaves at least one
    /// trailing sample of the padded signal unused.
    #[default]
    Strict,
    /// `floor((L' - N) / hop) + 1`.
    Conventional,
}

/// Number of frames for a padded length `padded_len`, or a value < 1 when no
/// frame fits.
pub fn frame_count(padded_len: usize, support: usize, hop: usize, mode: FrameCount) -> i64 {
    assert!(hop >= 1, "hop must be >= 1");
    let l = padded_len as i64;
    let n = support as i64;
    let t = hop as i64;
    match mode {
        FrameCount::Strict => 1 + (l - n - 1).div_euclid(t),
        FrameCount::Conventional => (l - n).div_euclid(t) + 1,
    }
}

/// `n_T × N` slice matrix.
///
/// Row `i`, column `j` holds `samples[j + i * hop]` (0-based). In 1-based
/// notation this is `x_{1 + j + i·hop}` with `j` counted from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameMatrix {
    pub frames: Matrix,
    pub hop: usize,
    pub support: usize,
    /// Zeros appended to the right of the signal before slicing.
    pub pad_len: usize,
    pub sample_rate: f64,
}

impl FrameMatrix {
    pub fn n_frames(&self) -> usize {
        self.frames.rows()
    }

    pub fn frame(&self, i: usize) -> &[f64] {
        self.frames.row(i)
    }
}

pub fn frame_signal(x: &Signal, support: usize, hop: usize, pad: Padding) -> Result<FrameMatrix> {
    frame_signal_with(x, support, hop, pad, FrameCount::Strict)
}

pub fn frame_signal_with(
    x: &Signal,
    support: usize,
    hop: usize,
    pad: Padding,
    mode: FrameCount,
) -> Result<FrameMatrix> {
    if hop == 0 {
        return Err(Error::invalid("hop must be >= 1"));
    }
    if support == 0 {
        return Err(Error::invalid("support must be >= 1"));
    }
    let samples = x.samples();
    let len = samples.len();
    let padded_len = match pad {
        Padding::None => len,
        Padding::Zero => {
            // smallest L' >= len with (L' - base) divisible by hop and L' >= base
            let base = match mode {
                FrameCount::Strict => support + 1,
                FrameCount::Conventional => support,
            };
            if len <= base {
                base
            } else {
                base + (len - base).div_ceil(hop) * hop
            }
        }
    };
    if support > padded_len {
        return Err(Error::invalid(format!(
            "support {support} exceeds padded length {padded_len}"
        )));
    }
    let n_frames = frame_count(padded_len, support, hop, mode);
    if n_frames < 1 {
        return Err(Error::invalid(format!(
            "no complete frame: length {padded_len}, support {support}, hop {hop}"
        )));
    }
    let n_frames = n_frames as usize;
    let frames = Matrix::from_fn(n_frames, support, |i, j| {
        samples.get(j + i * hop).copied().unwrap_or(0.0)
    });
    Ok(FrameMatrix {
        frames,
        hop,
        support,
        pad_len: padded_len - len,
        sample_rate: x.sample_rate(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Signal {
        Signal::new((0..n).map(|v| v as f64).collect(), 1.0).unwrap()
    }

    #[test]
    fn signal_rejects_bad_input() {
        assert!(Signal::new(vec![], 1.0).is_err());
        assert!(Signal::new(vec![1.0], 0.0).is_err());
        assert!(Signal::new(vec![f64::NAN], 1.0).is_err());
    }

    #[test]
    fn zero_sweep_is_pure_sinusoid() {
        let p = SpeedProfile::constant(64.0, 1.0).unwrap();
        let x = gen_chirp(&p, 1024.0, 1024, 1.0).unwrap();
        for (n, v) in x.samples().iter().enumerate() {
            let want = (2.0 * std::f64::consts::PI * 64.0 * n as f64 / 1024.0).sin();
            assert!((v - want).abs() < 1e-9, "n={n}");
        }
    }

    #[test]
    fn zero_amplitude_chirp() {
        let p = SpeedProfile::new(10.0, 50.0, 1.0).unwrap();
        let x = gen_chirp(&p, 1024.0, 100, 0.0).unwrap();
        assert!(x.samples().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn chirp_midpoint_frequency() {
        let p = SpeedProfile::new(100.0, 400.0, 1.0).unwrap();
        assert_eq!(p.frequency_at(0.5), 250.0);
        assert!(gen_chirp(&p, 8192.0, 8192, 1.0).is_ok());
    }

    #[test]
    fn chirp_rejects_nyquist() {
        let p = SpeedProfile::new(100.0, 512.0, 1.0).unwrap();
        assert!(gen_chirp(&p, 1024.0, 1024, 1.0).is_err());
    }

    #[test]
    fn profile_kind_must_match_direction() {
        let mut p = SpeedProfile::new(10.0, 20.0, 1.0).unwrap();
        assert_eq!(p.kind, SweepKind::LinearUp);
        p.kind = SweepKind::LinearDown;
        assert!(p.validate().is_err());
        assert_eq!(SpeedProfile::new(20.0, 10.0, 1.0).unwrap().kind, SweepKind::LinearDown);
    }

    #[test]
    fn time_of_revolution_inverts_revolutions() {
        for p in [
            SpeedProfile::new(15.0, 40.0, 0.3).unwrap(),
            SpeedProfile::new(40.0, 15.0, 0.3).unwrap(),
            SpeedProfile::constant(10.0, 1.0).unwrap(),
        ] {
            for k in 0..50 {
                let t = k as f64 * 0.013;
                let r = p.revolutions_at(t);
                assert!((p.time_of_revolution(r) - t).abs() < 1e-12, "{p:?} t={t}");
            }
        }
    }

    #[test]
    fn healthy_noiseless_equals_chirp() {
        let p = SpeedProfile::new(20.0, 35.0, 0.25).unwrap();
        let x = gen_fault_signal(&p, &FaultSpec::healthy(f64::INFINITY), 12800.0, 3072, 1).unwrap();
        let c = gen_chirp(&p, 12800.0, 3072, 1.0).unwrap();
        assert_eq!(x, c);
    }

    #[test]
    fn fault_signal_is_deterministic() {
        let p = SpeedProfile::new(20.0, 35.0, 0.25).unwrap();
        let f = FaultSpec {
            class_id: 2,
            impulses_per_rev: 3.5,
            resonance_hz: 2000.0,
            decay: 400.0,
            snr_db: 5.0,
            impulse_amplitude: 2.0,
        };
        let a = gen_fault_signal(&p, &f, 12800.0, 3072, 7).unwrap();
        let b = gen_fault_signal(&p, &f, 12800.0, 3072, 7).unwrap();
        let c = gen_fault_signal(&p, &f, 12800.0, 3072, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn fault_spec_validation() {
        let mut f = FaultSpec::healthy(10.0);
        f.resonance_hz = 7000.0;
        assert!(f.validate(12800.0).is_err());
        f.resonance_hz = 1000.0;
        f.decay = 0.0;
        assert!(f.validate(12800.0).is_err());
        f.decay = 1.0;
        f.class_id = 4;
        assert!(f.validate(12800.0).is_err());
    }

    #[test]
    fn frame_count_examples() {
        assert_eq!(frame_count(1024, 128, 16, FrameCount::Strict), 56);
        assert_eq!(frame_count(129, 128, 1, FrameCount::Strict), 1);
        assert_eq!(frame_count(128, 128, 1, FrameCount::Strict), 0);
        assert_eq!(frame_count(1024, 128, 16, FrameCount::Conventional), 57);
    }

    #[test]
    fn ramp_slicing() {
        let fm = frame_signal(&ramp(10), 4, 2, Padding::None).unwrap();
        assert_eq!(fm.frame(0), &[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(fm.frame(1), &[2.0, 3.0, 4.0, 5.0]);
        // floor(1 + 5/2) = 3
        assert_eq!(fm.n_frames(), 3);
        assert_eq!(fm.pad_len, 0);
    }

    #[test]
    fn zero_padding_is_minimal() {
        // 3072 - 129 = 2943 -> next multiple of 16 is 2944, so one zero
        let x = Signal::new(vec![1.0; 3072], 1.0).unwrap();
        let fm = frame_signal(&x, 128, 16, Padding::Zero).unwrap();
        assert_eq!(fm.pad_len, 1);
        assert_eq!(fm.n_frames(), 185);
        assert_eq!(fm.frames[(184, 127)], 1.0);

        let short = Signal::new(vec![1.0; 5], 1.0).unwrap();
        let fm = frame_signal(&short, 8, 4, Padding::Zero).unwrap();
        assert_eq!(fm.pad_len, 4);
        assert_eq!(fm.n_frames(), 1);
    }

    #[test]
    fn framing_errors() {
        assert!(frame_signal(&ramp(10), 4, 0, Padding::None).is_err());
        assert!(frame_signal(&ramp(4), 4, 1, Padding::None).is_err());
        assert!(frame_signal(&ramp(3), 4, 1, Padding::None).is_err());
    }

    #[test]
    fn hop_equal_support_reconstructs_prefix() {
        let x = ramp(37);
        let fm = frame_signal(&x, 6, 6, Padding::None).unwrap();
        let joined: Vec<f64> = fm.frames.as_slice().to_vec();
        assert_eq!(&x.samples()[..joined.len()], joined.as_slice());
    }
}
