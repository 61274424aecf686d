//! `key=value` run configuration.
//!
//! Values are resolved in three layers: built-in defaults, then a config
//! file, then command-line overrides. Every layer goes through
//! [`RunConfig::set`], so unknown keys and bad values are rejected the same
//! way everywhere. [`RunConfig::render`] writes the resolved configuration
//! back in the same format.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::dft::DftMethod;
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_RENYI_ALPHA;
use crate::signal::FrameCount;
use crate::transfer::{FeatureTap, TrainConfig, WindowUpdate};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TransformMode {
    Stft,
    Dstft,
    #[default]
    Mdstft,
}

impl TransformMode {
    pub fn name(self) -> &'static str {
        match self {
            TransformMode::Stft => "stft",
            TransformMode::Dstft => "dstft",
            TransformMode::Mdstft => "mdstft",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    /// Rényi order.
    pub alpha: f64,
    pub classes: usize,
    pub per_class: usize,
    pub sample_rate: f64,
    /// Window optimisation iterations.
    pub iterations: usize,
    pub mode: TransformMode,
    pub dft: DftMethod,
    /// Export complex coefficients instead of magnitudes.
    pub complex: bool,
    pub input: Option<PathBuf>,
    pub lengths: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub data_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            alpha: DEFAULT_RENYI_ALPHA,
            classes: 4,
            per_class: 100,
            sample_rate: 12800.0,
            iterations: 200,
            mode: TransformMode::default(),
            dft: DftMethod::Direct,
            complex: false,
            input: None,
            lengths: None,
            output: None,
            data_dir: None,
        }
    }
}

/// Every accepted key, in render order.
pub const KEYS: &[&str] = &[
    "seed",
    "batch_size",
    "hop",
    "max_epoch",
    "lr_net",
    "lr_window",
    "lambda0",
    "lambda1",
    "lambda2",
    "sample_len",
    "support",
    "window",
    "beta",
    "soft_width",
    "smoothing",
    "weight_decay",
    "framecount",
    "pool_rows",
    "pool_cols",
    "hidden",
    "feature_tap",
    "window_update",
    "alpha",
    "classes",
    "per_class",
    "sample_rate",
    "iterations",
    "mode",
    "dft",
    "complex",
    "input",
    "lengths",
    "output",
    "data_dir",
];

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse()
        .map_err(|_| Error::invalid(format!("{key}: cannot parse {v:?}")))
}

fn finite(key: &str, v: &str) -> Result<f64> {
    let x: f64 = num(key, v)?;
    if !x.is_finite() {
        return Err(Error::invalid(format!("{key}: value must be finite")));
    }
    Ok(x)
}

fn boolean(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        _ => Err(Error::invalid(format!("{key}: expected on/off, got {v:?}"))),
    }
}

fn path(v: &str) -> Option<PathBuf> {
    if v.is_empty() {
        None
    } else {
        Some(PathBuf::from(v))
    }
}

fn show_path(p: &Option<PathBuf>) -> String {
    p.as_ref().map(|p| p.display().to_string()).unwrap_or_default()
}

impl RunConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        let t = &mut self.train;
        match key {
            "seed" => t.seed = num(key, v)?,
            "batch_size" => t.batch_size = num(key, v)?,
            "hop" => t.hop = num(key, v)?,
            "max_epoch" => t.max_epoch = num(key, v)?,
            "lr_net" => t.lr_net = finite(key, v)?,
            "lr_window" => t.lr_window = finite(key, v)?,
            "lambda0" => t.lambda0_enabled = boolean(key, v)?,
            "lambda1" => t.lambda1 = finite(key, v)?,
            "lambda2" => t.lambda2 = finite(key, v)?,
            "sample_len" => t.sample_len = num(key, v)?,
            "support" => t.support = num(key, v)?,
            "window" => {
                if v != "kaiser" {
                    return Err(Error::invalid(format!("window: only kaiser is supported, got {v:?}")));
                }
            }
            "beta" => t.beta = finite(key, v)?,
            "soft_width" => t.soft_width = finite(key, v)?,
            "smoothing" => t.smoothing = finite(key, v)?,
            "weight_decay" => t.weight_decay = finite(key, v)?,
            "framecount" => {
                t.framecount = match v {
                    "strict" => FrameCount::Strict,
                    "conventional" => FrameCount::Conventional,
                    _ => return Err(Error::invalid(format!("framecount: expected strict|conventional, got {v:?}"))),
                }
            }
            "pool_rows" => t.pool_rows = num(key, v)?,
            "pool_cols" => t.pool_cols = num(key, v)?,
            "hidden" => t.hidden = num(key, v)?,
            "feature_tap" => {
                t.feature_tap = match v {
                    "pooled" => FeatureTap::Pooled,
                    "hidden" => FeatureTap::Hidden,
                    _ => return Err(Error::invalid(format!("feature_tap: expected pooled|hidden, got {v:?}"))),
                }
            }
            "window_update" => {
                t.window_update = match v {
                    "adamw" => WindowUpdate::AdamW,
                    "sgd" => WindowUpdate::Sgd,
                    _ => return Err(Error::invalid(format!("window_update: expected adamw|sgd, got {v:?}"))),
                }
            }
            "alpha" => self.alpha = finite(key, v)?,
            "classes" => self.classes = num(key, v)?,
            "per_class" => self.per_class = num(key, v)?,
            "sample_rate" => self.sample_rate = finite(key, v)?,
            "iterations" => self.iterations = num(key, v)?,
            "mode" => {
                self.mode = match v {
                    "stft" => TransformMode::Stft,
                    "dstft" => TransformMode::Dstft,
                    "mdstft" => TransformMode::Mdstft,
                    _ => return Err(Error::invalid(format!("mode: expected stft|dstft|mdstft, got {v:?}"))),
                }
            }
            "dft" => {
                self.dft = match v {
                    "direct" => DftMethod::Direct,
                    "fft" => DftMethod::Fft,
                    _ => return Err(Error::invalid(format!("dft: expected direct|fft, got {v:?}"))),
                }
            }
            "complex" => self.complex = boolean(key, v)?,
            "input" => self.input = path(v),
            "lengths" => self.lengths = path(v),
            "output" => self.output = path(v),
            "data_dir" => self.data_dir = path(v),
            _ => return Err(Error::invalid(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<String> {
        let t = &self.train;
        let onoff = |b: bool| if b { "on" } else { "off" }.to_string();
        Ok(match key {
            "seed" => t.seed.to_string(),
            "batch_size" => t.batch_size.to_string(),
            "hop" => t.hop.to_string(),
            "max_epoch" => t.max_epoch.to_string(),
            "lr_net" => t.lr_net.to_string(),
            "lr_window" => t.lr_window.to_string(),
            "lambda0" => onoff(t.lambda0_enabled),
            "lambda1" => t.lambda1.to_string(),
            "lambda2" => t.lambda2.to_string(),
            "sample_len" => t.sample_len.to_string(),
            "support" => t.support.to_string(),
            "window" => "kaiser".to_string(),
            "beta" => t.beta.to_string(),
            "soft_width" => t.soft_width.to_string(),
            "smoothing" => t.smoothing.to_string(),
            "weight_decay" => t.weight_decay.to_string(),
            "framecount" => match t.framecount {
                FrameCount::Strict => "strict",
                FrameCount::Conventional => "conventional",
            }
            .to_string(),
            "pool_rows" => t.pool_rows.to_string(),
            "pool_cols" => t.pool_cols.to_string(),
            "hidden" => t.hidden.to_string(),
            "feature_tap" => match t.feature_tap {
                FeatureTap::Pooled => "pooled",
                FeatureTap::Hidden => "hidden",
            }
            .to_string(),
            "window_update" => match t.window_update {
                WindowUpdate::AdamW => "adamw",
                WindowUpdate::Sgd => "sgd",
            }
            .to_string(),
            "alpha" => self.alpha.to_string(),
            "classes" => self.classes.to_string(),
            "per_class" => self.per_class.to_string(),
            "sample_rate" => self.sample_rate.to_string(),
            "iterations" => self.iterations.to_string(),
            "mode" => self.mode.name().to_string(),
            "dft" => match self.dft {
                DftMethod::Direct => "direct",
                DftMethod::Fft => "fft",
            }
            .to_string(),
            "complex" => onoff(self.complex),
            "input" => show_path(&self.input),
            "lengths" => show_path(&self.lengths),
            "output" => show_path(&self.output),
            "data_dir" => show_path(&self.data_dir),
            _ => return Err(Error::invalid(format!("unknown config key {key:?}"))),
        })
    }

    /// Apply a config file on top of the current values.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = match raw.split_once('#') {
                Some((before, _)) => before,
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(i + 1, format!("expected key=value, found {line:?}")))?;
            self.set(k.trim(), v).map_err(|e| Error::parse(i + 1, e.to_string()))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Fully resolved configuration, one `key=value` per line. Floats use
    /// the shortest representation that parses back to the same value.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for k in KEYS {
            let _ = writeln!(out, "{k}={}", self.get(k).expect("known key"));
        }
        out
    }
}
