//! Window-length optimisation driven by BSQ alone.
//!
//! Each iteration takes a plain gradient step on the soft-mask BSQ and
//! accepts it only if the hard-mask BSQ does not rise by more than
//! [`ACCEPT_TOL`]; otherwise the step is halved and retried. A step that
//! never satisfies the test leaves the lengths unchanged, so the reported
//! hard-mask trajectory is nonincreasing up to the tolerance.

use crate::dft::DftMethod;
use crate::error::{Error, Result};
use crate::metrics::{bsq_grad, bsq_loss};
use crate::signal::FrameMatrix;
use crate::transform::{magnitude, ModulatedTransform};
use crate::window::{clamp_lengths, WindowParams};

pub const ACCEPT_TOL: f64 = 1e-6;

/// How the per-frame lengths are tied together.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tying {
    /// One free length per frame.
    PerFrame,
    /// A single length shared by every frame.
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeOptions {
    pub iterations: usize,
    pub lr: f64,
    pub soft_width: f64,
    pub eps: f64,
    pub max_halvings: usize,
    pub method: DftMethod,
    pub tying: Tying,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            iterations: 200,
            lr: 100.0,
            soft_width: 2.0,
            eps: crate::metrics::DEFAULT_EPS,
            max_halvings: 30,
            method: DftMethod::Fft,
            tying: Tying::PerFrame,
        }
    }
}

/// One iteration of the trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    /// 1-based iteration number.
    pub iter: usize,
    /// Hard-mask BSQ after the iteration.
    pub bsq: f64,
    /// Soft-mask BSQ the gradient was taken at.
    pub soft_bsq: f64,
    /// Step size actually used, 0 when every trial was rejected.
    pub step: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeResult {
    pub params: WindowParams,
    /// Hard-mask BSQ of the initial lengths.
    pub initial_bsq: f64,
    pub trajectory: Vec<TrajectoryRow>,
}

/// BSQ of the modulated spectrogram with the given mask width.
pub fn bsq_of(frames: &FrameMatrix, params: &WindowParams, soft_width: f64, eps: f64, method: DftMethod) -> Result<f64> {
    let t = ModulatedTransform::new(params.clone(), soft_width, method)?;
    bsq_loss(&magnitude(&t.forward(frames)?), eps)
}

/// Soft-mask BSQ and its gradient in the lengths.
pub fn bsq_and_grad(
    frames: &FrameMatrix,
    params: &WindowParams,
    soft_width: f64,
    eps: f64,
    method: DftMethod,
) -> Result<(f64, Vec<f64>)> {
    let t = ModulatedTransform::new(params.clone(), soft_width, method)?;
    let mag = magnitude(&t.forward(frames)?);
    let loss = bsq_loss(&mag, eps)?;
    let up = bsq_grad(&mag, eps, 1.0)?;
    Ok((loss, t.backward(frames, &up, false)?.d_lengths))
}

fn check_finite(what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Divergence(format!("{what} became {v}")))
    }
}

pub fn optimize_lengths(frames: &FrameMatrix, init: WindowParams, opts: &OptimizeOptions) -> Result<OptimizeResult> {
    if !(opts.lr > 0.0 && opts.lr.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be positive, got {}", opts.lr)));
    }
    let mut params = init;
    if opts.tying == Tying::Shared {
        let first = params.lengths[0];
        if params.lengths.iter().any(|&l| l != first) {
            return Err(Error::invalid("shared tying needs equal initial lengths"));
        }
    }
    let n = params.support;
    let mut current = bsq_of(frames, &params, 0.0, opts.eps, opts.method)?;
    check_finite("BSQ", current)?;
    let initial_bsq = current;
    let mut trajectory = Vec::with_capacity(opts.iterations);
    for iter in 1..=opts.iterations {
        let (soft, mut g) = bsq_and_grad(frames, &params, opts.soft_width, opts.eps, opts.method)?;
        check_finite("soft BSQ", soft)?;
        if opts.tying == Tying::Shared {
            let s: f64 = g.iter().sum();
            g.iter_mut().for_each(|v| *v = s);
        }
        let grad_norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        check_finite("gradient norm", grad_norm)?;
        let mut step = opts.lr;
        let mut accepted = None;
        if grad_norm > 0.0 {
            for _ in 0..=opts.max_halvings {
                let mut trial = params.clone();
                for (l, d) in trial.lengths.iter_mut().zip(&g) {
                    *l -= step * d;
                }
                clamp_lengths(&mut trial.lengths, n);
                if trial.lengths != params.lengths {
                    let b = bsq_of(frames, &trial, 0.0, opts.eps, opts.method)?;
                    if b.is_finite() && b <= current + ACCEPT_TOL {
                        accepted = Some((trial, b));
                        break;
                    }
                }
                step *= 0.5;
            }
        }
        let used = match accepted {
            Some((trial, b)) => {
                params = trial;
                current = b;
                step
            }
            None => 0.0,
        };
        trajectory.push(TrajectoryRow {
            iter,
            bsq: current,
            soft_bsq: soft,
            step: used,
            grad_norm,
        });
    }
    Ok(OptimizeResult {
        params,
        initial_bsq,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::{frame_signal, Padding, Signal};

    fn sinusoid_frames() -> FrameMatrix {
        let fs = 1024.0;
        let x: Vec<f64> = (0..1024)
            .map(|i| (2.0 * std::f64::consts::PI * 64.0 * i as f64 / fs).sin())
            .collect();
        frame_signal(&Signal::new(x, fs).unwrap(), 128, 16, Padding::Zero).unwrap()
    }

    #[test]
    fn zero_iterations_keep_init() {
        let f = sinusoid_frames();
        let init = WindowParams::full(f.n_frames(), 8.0, 128, 16).unwrap();
        let r = optimize_lengths(
            &f,
            init.clone(),
            &OptimizeOptions {
                iterations: 0,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.params, init);
        assert!(r.trajectory.is_empty());
    }

    #[test]
    fn descent_on_sinusoid() {
        let f = sinusoid_frames();
        let init = WindowParams::full(f.n_frames(), 8.0, 128, 16).unwrap();
        let r = optimize_lengths(
            &f,
            init,
            &OptimizeOptions {
                iterations: 10,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(r.trajectory.len(), 10);
        let mut prev = r.initial_bsq;
        for row in &r.trajectory {
            assert!(row.bsq <= prev + ACCEPT_TOL);
            prev = row.bsq;
        }
        assert!(prev <= r.initial_bsq);
    }

    #[test]
    fn shared_tying_keeps_lengths_equal() {
        let f = sinusoid_frames();
        let init = WindowParams::full(f.n_frames(), 8.0, 128, 16).unwrap();
        let r = optimize_lengths(
            &f,
            init,
            &OptimizeOptions {
                iterations: 5,
                tying: Tying::Shared,
                ..Default::default()
            },
        )
        .unwrap();
        let l0 = r.params.lengths[0];
        assert!(r.params.lengths.iter().all(|&l| l == l0));
    }
}
