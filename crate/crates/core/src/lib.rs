//! Differentiable time-frequency analysis with per-frame learnable window
//! lengths.
//!
//! The crate is organised bottom-up:
//!
//! - [`signal`] synthesises variable-speed test signals and slices them into frames.
//! - [`window`] builds Kaiser windows, the modulation mask and the modulated
//!   per-frame window matrix together with its derivative in the window lengths.
//! - [`transform`] runs the vanilla, fixed-window and modulated transforms and
//!   their backward passes.
//! - [`metrics`] measures spectrogram quality (balanced spectrum quality with
//!   gradient, Rényi entropy).
//! - [`transfer`] holds the small cross-domain training harness.
//! - [`io`] and [`config`] define the text file formats used by the CLI.

pub mod config;
pub mod dft;
pub mod error;
pub mod io;
pub mod matrix;
pub mod metrics;
pub mod optimize;
pub mod signal;
pub mod transfer;
pub mod transform;
pub mod window;

pub use error::{Error, Result};
pub use matrix::Matrix;
pub use signal::{FaultSpec, FrameCount, FrameMatrix, Padding, Signal, SpeedProfile, SweepKind};
pub use transform::{Spectrogram, SpectrogramGrad};
pub use window::{MaskMatrix, ResampledTime, WindowParams};
