//! Vanilla, fixed-window and modulated short-time Fourier transforms.
//!
//! All three share one code path: each frame is multiplied by its window row
//! and sent through the same one-sided DFT, so the modulated transform with
//! every length at `N` is bit-identical to the vanilla transform with the
//! Kaiser window.

use num_complex::Complex64;

use crate::dft::{Dft, DftMethod};
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::signal::FrameMatrix;
use crate::window::{self, MaskMatrix, ResampledTime, WindowParams};

/// Cells with a smaller modulus pass no gradient through `|z|`.
pub const MAGNITUDE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    /// Row-major `n_frames × bins`.
    pub coeffs: Vec<Complex64>,
    pub n_frames: usize,
    pub bins: usize,
    pub support: usize,
    pub hop: usize,
    pub sample_rate: f64,
}

impl Spectrogram {
    pub fn get(&self, frame: usize, bin: usize) -> Complex64 {
        self.coeffs[frame * self.bins + bin]
    }

    pub fn row(&self, frame: usize) -> &[Complex64] {
        &self.coeffs[frame * self.bins..(frame + 1) * self.bins]
    }

    pub fn magnitude(&self) -> Matrix {
        magnitude(self)
    }

    /// Centre frequency of `bin` in Hz.
    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.sample_rate / self.support as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrogramGrad {
    /// `∂L/∂ϖ_i`.
    pub d_lengths: Vec<f64>,
    /// `∂L/∂β`, only when requested.
    pub d_beta: Option<f64>,
}

/// Elementwise modulus, `n_frames × bins`.
pub fn magnitude(spec: &Spectrogram) -> Matrix {
    Matrix::from_vec(
        spec.n_frames,
        spec.bins,
        spec.coeffs.iter().map(|c| c.norm()).collect(),
    )
}

fn transform_rows<'w>(dft: &Dft, frames: &FrameMatrix, window: impl Fn(usize) -> &'w [f64]) -> Spectrogram {
    let n = frames.support;
    let bins = dft.bins();
    let mut coeffs = vec![Complex64::new(0.0, 0.0); frames.n_frames() * bins];
    let mut y = vec![0.0; n];
    for (i, out) in coeffs.chunks_exact_mut(bins).enumerate() {
        let w = window(i);
        for ((yn, &x), &wn) in y.iter_mut().zip(frames.frame(i)).zip(w) {
            *yn = x * wn;
        }
        dft.forward(&y, out);
    }
    Spectrogram {
        coeffs,
        n_frames: frames.n_frames(),
        bins,
        support: n,
        hop: frames.hop,
        sample_rate: frames.sample_rate,
    }
}

fn check_dft(dft: &Dft, frames: &FrameMatrix) -> Result<()> {
    if dft.len() != frames.support {
        return Err(Error::shape(format!(
            "DFT length {} for frames of support {}",
            dft.len(),
            frames.support
        )));
    }
    Ok(())
}

/// Short-time Fourier transform with one window shared by every frame.
pub fn stft(frames: &FrameMatrix, window: &[f64]) -> Result<Spectrogram> {
    stft_with(&Dft::new(frames.support, DftMethod::Direct), frames, window)
}

pub fn stft_with(dft: &Dft, frames: &FrameMatrix, window: &[f64]) -> Result<Spectrogram> {
    check_dft(dft, frames)?;
    if window.len() != frames.support {
        return Err(Error::shape(format!(
            "window of {} taps for support {}",
            window.len(),
            frames.support
        )));
    }
    Ok(transform_rows(dft, frames, |_| window))
}

/// Differentiable transform whose frames all share one window length `theta`.
pub fn dstft_fixed(frames: &FrameMatrix, theta: f64, beta: f64, soft_width: f64) -> Result<Spectrogram> {
    let n = frames.support as f64;
    if !(theta > 1.0 && theta <= n) {
        return Err(Error::invalid(format!("theta {theta} outside (1, {n}]")));
    }
    let params = WindowParams::new(vec![theta; frames.n_frames()], beta, frames.support, frames.hop)?;
    mdstft(frames, &params, soft_width)
}

/// Modulated transform: frame `i` is windowed by a Kaiser window of length
/// `params.lengths[i]`.
pub fn mdstft(frames: &FrameMatrix, params: &WindowParams, soft_width: f64) -> Result<Spectrogram> {
    ModulatedTransform::new(params.clone(), soft_width, DftMethod::Direct)?.forward(frames)
}

/// Gradient of a loss `L(|F|)` with respect to the window lengths, given
/// `upstream = ∂L/∂|F|`.
pub fn mdstft_backward(
    frames: &FrameMatrix,
    params: &WindowParams,
    soft_width: f64,
    upstream: &Matrix,
) -> Result<SpectrogramGrad> {
    ModulatedTransform::new(params.clone(), soft_width, DftMethod::Direct)?.backward(frames, upstream, false)
}

/// A modulated transform with its window matrix and length derivatives
/// precomputed, for repeated use on many signals sharing one parameter set.
#[derive(Debug, Clone)]
pub struct ModulatedTransform {
    params: WindowParams,
    soft_width: f64,
    dft: Dft,
    bt: ResampledTime,
    mask: MaskMatrix,
    window: Matrix,
    dwindow: Matrix,
}

impl ModulatedTransform {
    pub fn new(params: WindowParams, soft_width: f64, method: DftMethod) -> Result<Self> {
        let (bt, mask, window) = window::window_matrix(&params, soft_width)?;
        let dwindow = window::window_grad_wrt_length(&mask, &params.lengths, &bt, params.beta)?;
        Ok(Self {
            dft: Dft::new(params.support, method),
            params,
            soft_width,
            bt,
            mask,
            window,
            dwindow,
        })
    }

    pub fn params(&self) -> &WindowParams {
        &self.params
    }

    pub fn window(&self) -> &Matrix {
        &self.window
    }

    pub fn soft_width(&self) -> f64 {
        self.soft_width
    }

    fn check_frames(&self, frames: &FrameMatrix) -> Result<()> {
        if frames.support != self.params.support || frames.n_frames() != self.params.n_frames() {
            return Err(Error::shape(format!(
                "frames {}x{} vs window parameters {}x{}",
                frames.n_frames(),
                frames.support,
                self.params.n_frames(),
                self.params.support
            )));
        }
        Ok(())
    }

    pub fn forward(&self, frames: &FrameMatrix) -> Result<Spectrogram> {
        self.check_frames(frames)?;
        Ok(transform_rows(&self.dft, frames, |i| self.window.row(i)))
    }

    /// `∂L/∂W` for one signal given `∂L/∂|F|`.
    pub fn window_cotangent(&self, frames: &FrameMatrix, upstream: &Matrix) -> Result<Matrix> {
        self.check_frames(frames)?;
        let bins = self.dft.bins();
        if upstream.shape() != (frames.n_frames(), bins) {
            return Err(Error::shape(format!(
                "upstream {:?}, spectrogram {:?}",
                upstream.shape(),
                (frames.n_frames(), bins)
            )));
        }
        let n = frames.support;
        let mut out = Matrix::zeros(frames.n_frames(), n);
        let mut y = vec![0.0; n];
        let mut c = vec![Complex64::new(0.0, 0.0); bins];
        let mut g = vec![Complex64::new(0.0, 0.0); bins];
        let mut dy = vec![0.0; n];
        for i in 0..frames.n_frames() {
            let up = upstream.row(i);
            if up.iter().all(|&u| u == 0.0) {
                continue;
            }
            let x = frames.frame(i);
            for ((yn, &xn), &wn) in y.iter_mut().zip(x).zip(self.window.row(i)) {
                *yn = xn * wn;
            }
            self.dft.forward(&y, &mut c);
            for ((gf, cf), &u) in g.iter_mut().zip(&c).zip(up) {
                let m = cf.norm();
                *gf = if m > MAGNITUDE_EPS {
                    cf * (u / m)
                } else {
                    Complex64::new(0.0, 0.0)
                };
            }
            self.dft.adjoint(&g, &mut dy);
            for ((o, &d), &xn) in out.row_mut(i).iter_mut().zip(&dy).zip(x) {
                *o = d * xn;
            }
        }
        Ok(out)
    }

    /// Contract `∂L/∂W` against `∂W/∂ϖ`; row `i` only touches `ϖ_i`.
    pub fn length_grad(&self, d_window: &Matrix) -> Vec<f64> {
        d_window
            .row_iter()
            .zip(self.dwindow.row_iter())
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum())
            .collect()
    }

    pub fn beta_grad(&self, d_window: &Matrix) -> Result<f64> {
        let db = window::window_grad_wrt_beta(&self.mask, &self.params.lengths, &self.bt, self.params.beta)?;
        Ok(d_window
            .as_slice()
            .iter()
            .zip(db.as_slice())
            .map(|(a, b)| a * b)
            .sum())
    }

    pub fn backward(&self, frames: &FrameMatrix, upstream: &Matrix, with_beta: bool) -> Result<SpectrogramGrad> {
        let dw = self.window_cotangent(frames, upstream)?;
        let d_beta = if with_beta {
            Some(self.beta_grad(&dw)?)
        } else {
            None
        };
        Ok(SpectrogramGrad {
            d_lengths: self.length_grad(&dw),
            d_beta,
        })
    }
}
