//! Kaiser windows with per-frame learnable lengths.
//!
//! A frame's window is the Kaiser curve stretched to a continuous length
//! `ϖ_i` and evaluated on the fixed intra-frame index grid `0..N`. Positions at
//! or beyond `ϖ_i` are cut off by a mask. With `soft_width > 0` the cut-off is
//! replaced by a raised-cosine gate so that `ϖ_i` receives a gradient from the
//! boundary as well.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Lower clamp for optimised window lengths.
pub const MIN_WINDOW_LENGTH: f64 = 1.0 + 1e-6;

/// Modified Bessel function of the first kind, order zero.
///
/// Power series `Σ (x/2)^{2k} / (k!)²`. All terms are positive so the sum is
/// accurate to a few ulp; the result overflows `f64` for `|x| > ~713.9`.
pub fn bessel_i0(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term <= sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

/// Modified Bessel function of the first kind, order one.
pub fn bessel_i1(x: f64) -> f64 {
    x * bessel_i1_over_x(x)
}

/// `I₁(x) / x`, finite at zero (limit 1/2).
pub fn bessel_i1_over_x(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 0.5;
    let mut sum = 0.5;
    let mut k = 1.0;
    loop {
        term *= q / (k * (k + 1.0));
        sum += term;
        if term <= sum * 1e-17 {
            return sum;
        }
        k += 1.0;
    }
}

/// Squared-root argument `1 - (1 - 2b/(len-1))²` of the Kaiser formula before
/// clamping. Defined as 1 - 1 = 0 at `b = 0` for any length.
fn kaiser_arg(b: f64, len: f64) -> f64 {
    let r = kaiser_ratio(b, len);
    1.0 - r * r
}

fn kaiser_ratio(b: f64, len: f64) -> f64 {
    if b == 0.0 {
        1.0
    } else if len > 1.0 {
        1.0 - 2.0 * b / (len - 1.0)
    } else {
        f64::NEG_INFINITY
    }
}

/// Kaiser curve of continuous length `len` at grid position `b`.
fn kaiser_at(b: f64, len: f64, beta: f64, i0_beta: f64) -> f64 {
    let a = kaiser_arg(b, len).max(0.0);
    bessel_i0(beta * a.sqrt()) / i0_beta
}

/// `∂/∂len` of [`kaiser_at`]; zero where the argument is clamped.
fn kaiser_dlen(b: f64, len: f64, beta: f64, i0_beta: f64) -> f64 {
    if b == 0.0 || len <= 1.0 {
        return 0.0;
    }
    let r = kaiser_ratio(b, len);
    let a = 1.0 - r * r;
    if a <= 0.0 {
        return 0.0;
    }
    let dr = 2.0 * b / ((len - 1.0) * (len - 1.0));
    let da = -2.0 * r * dr;
    let y = beta * a.sqrt();
    0.5 * beta * beta * bessel_i1_over_x(y) * da / i0_beta
}

/// `∂/∂β` of [`kaiser_at`].
fn kaiser_dbeta(b: f64, len: f64, beta: f64, i0_beta: f64, i1_beta: f64) -> f64 {
    let s = kaiser_arg(b, len).max(0.0).sqrt();
    let y = beta * s;
    (s * bessel_i1(y) * i0_beta - bessel_i0(y) * i1_beta) / (i0_beta * i0_beta)
}

/// Symmetric Kaiser window of `support` taps.
pub fn kaiser_window(support: usize, beta: f64) -> Result<Vec<f64>> {
    if support < 2 {
        return Err(Error::invalid("kaiser window needs support >= 2"));
    }
    check_beta(beta)?;
    let i0_beta = bessel_i0(beta);
    let len = support as f64;
    Ok((0..support)
        .map(|n| kaiser_at(n as f64, len, beta, i0_beta))
        .collect())
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::invalid(format!("beta must be finite and >= 0, got {beta}")));
    }
    Ok(())
}

/// Learnable window description of one modulated transform.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowParams {
    /// Per-frame window length in samples. Optimisers keep these in
    /// `[MIN_WINDOW_LENGTH, support]`; exactly 1 is accepted as a one-tap window.
    pub lengths: Vec<f64>,
    pub beta: f64,
    pub support: usize,
    pub hop: usize,
}

impl WindowParams {
    pub fn new(lengths: Vec<f64>, beta: f64, support: usize, hop: usize) -> Result<Self> {
        if support < 2 {
            return Err(Error::invalid("support must be >= 2"));
        }
        if hop == 0 {
            return Err(Error::invalid("hop must be >= 1"));
        }
        check_beta(beta)?;
        if lengths.is_empty() {
            return Err(Error::invalid("window length vector is empty"));
        }
        let n = support as f64;
        if let Some((i, v)) = lengths
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 1.0 && **v <= n))
        {
            return Err(Error::invalid(format!(
                "window length {i} = {v} outside [1, {support}]"
            )));
        }
        Ok(Self {
            lengths,
            beta,
            support,
            hop,
        })
    }

    /// Every frame uses the full support.
    pub fn full(n_frames: usize, beta: f64, support: usize, hop: usize) -> Result<Self> {
        Self::new(vec![support as f64; n_frames], beta, support, hop)
    }

    pub fn n_frames(&self) -> usize {
        self.lengths.len()
    }

    /// Project the lengths back onto `[MIN_WINDOW_LENGTH, support]`.
    pub fn clamp(&mut self) {
        clamp_lengths(&mut self.lengths, self.support);
    }
}

pub fn clamp_lengths(lengths: &mut [f64], support: usize) {
    let hi = support as f64;
    for v in lengths.iter_mut() {
        *v = v.clamp(MIN_WINDOW_LENGTH, hi);
    }
}

/// Intra-frame sample positions, one identical row `0, 1, …, N-1` per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct ResampledTime {
    pub values: Matrix,
}

impl ResampledTime {
    pub fn n_frames(&self) -> usize {
        self.values.rows()
    }

    pub fn support(&self) -> usize {
        self.values.cols()
    }
}

pub fn resampled_time(n_frames: usize, support: usize) -> Result<ResampledTime> {
    if n_frames < 1 {
        return Err(Error::invalid("need at least one frame"));
    }
    if support < 2 {
        return Err(Error::invalid("support must be >= 2"));
    }
    Ok(ResampledTime {
        values: Matrix::from_fn(n_frames, support, |_, j| j as f64),
    })
}

/// Per-position keep flags and multiplicative gate.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskMatrix {
    /// `keep[i * N + j]` is true iff `B_t[i][j] < ϖ_i`.
    pub keep: Vec<bool>,
    /// 1/0 under the hard mask, raised-cosine values in the soft band.
    pub gate: Matrix,
    pub soft_width: f64,
}

impl MaskMatrix {
    pub fn is_kept(&self, i: usize, j: usize) -> bool {
        self.keep[i * self.gate.cols() + j]
    }

    /// Number of kept positions in row `i`.
    pub fn kept_len(&self, i: usize) -> usize {
        let n = self.gate.cols();
        self.keep[i * n..(i + 1) * n].iter().filter(|&&k| k).count()
    }
}

fn soft_gate(b: f64, len: f64, width: f64) -> (f64, f64) {
    // returns (gate, ∂gate/∂len)
    if b >= len {
        return (0.0, 0.0);
    }
    if width <= 0.0 || b <= len - width {
        return (1.0, 0.0);
    }
    let u = (b - (len - width)) / width;
    let pi = std::f64::consts::PI;
    let g = 0.5 * (1.0 + (pi * u).cos());
    let dg = 0.5 * pi * (pi * u).sin() / width;
    (g, dg)
}

pub fn mask_matrix(bt: &ResampledTime, lengths: &[f64], soft_width: f64) -> Result<MaskMatrix> {
    let (rows, cols) = bt.values.shape();
    if lengths.len() != rows {
        return Err(Error::shape(format!(
            "{} window lengths for {rows} frames",
            lengths.len()
        )));
    }
    if !(soft_width >= 0.0 && soft_width.is_finite()) {
        return Err(Error::invalid("soft_width must be finite and >= 0"));
    }
    let mut keep = Vec::with_capacity(rows * cols);
    let mut gate = Matrix::zeros(rows, cols);
    for (i, &len) in lengths.iter().enumerate() {
        for j in 0..cols {
            let b = bt.values[(i, j)];
            let k = b < len;
            keep.push(k);
            gate[(i, j)] = soft_gate(b, len, soft_width).0;
        }
    }
    Ok(MaskMatrix {
        keep,
        gate,
        soft_width,
    })
}

fn check_shapes(mask: &MaskMatrix, lengths: &[f64], bt: &ResampledTime) -> Result<()> {
    if mask.gate.shape() != bt.values.shape() || lengths.len() != bt.n_frames() {
        return Err(Error::shape(format!(
            "mask {:?}, resampled time {:?}, {} lengths",
            mask.gate.shape(),
            bt.values.shape(),
            lengths.len()
        )));
    }
    Ok(())
}

/// Modulated window matrix: Kaiser curve of length `ϖ_i` on kept positions,
/// exactly zero elsewhere, multiplied by the gate.
pub fn modulated_kaiser(
    mask: &MaskMatrix,
    lengths: &[f64],
    bt: &ResampledTime,
    beta: f64,
) -> Result<Matrix> {
    check_shapes(mask, lengths, bt)?;
    check_beta(beta)?;
    let i0_beta = bessel_i0(beta);
    let (rows, cols) = bt.values.shape();
    let mut w = Matrix::zeros(rows, cols);
    for (i, &len) in lengths.iter().enumerate() {
        for j in 0..cols {
            if !mask.is_kept(i, j) {
                continue;
            }
            let g = mask.gate[(i, j)];
            let k = kaiser_at(bt.values[(i, j)], len, beta, i0_beta);
            w[(i, j)] = if g == 1.0 { k } else { g * k };
        }
    }
    Ok(w)
}

/// `∂W[i][j] / ∂ϖ_i`.
///
/// Under the hard mask the cut-off itself contributes nothing; only the
/// stretched Kaiser curve depends on `ϖ_i`. In soft mode the gate derivative
/// is added.
pub fn window_grad_wrt_length(
    mask: &MaskMatrix,
    lengths: &[f64],
    bt: &ResampledTime,
    beta: f64,
) -> Result<Matrix> {
    check_shapes(mask, lengths, bt)?;
    check_beta(beta)?;
    let i0_beta = bessel_i0(beta);
    let (rows, cols) = bt.values.shape();
    let mut d = Matrix::zeros(rows, cols);
    for (i, &len) in lengths.iter().enumerate() {
        for j in 0..cols {
            if !mask.is_kept(i, j) {
                continue;
            }
            let b = bt.values[(i, j)];
            let (g, dg) = soft_gate(b, len, mask.soft_width);
            let mut v = g * kaiser_dlen(b, len, beta, i0_beta);
            if dg != 0.0 {
                v += dg * kaiser_at(b, len, beta, i0_beta);
            }
            d[(i, j)] = v;
        }
    }
    Ok(d)
}

/// `∂W[i][j] / ∂β`.
pub fn window_grad_wrt_beta(
    mask: &MaskMatrix,
    lengths: &[f64],
    bt: &ResampledTime,
    beta: f64,
) -> Result<Matrix> {
    check_shapes(mask, lengths, bt)?;
    check_beta(beta)?;
    let i0_beta = bessel_i0(beta);
    let i1_beta = bessel_i1(beta);
    let (rows, cols) = bt.values.shape();
    let mut d = Matrix::zeros(rows, cols);
    for (i, &len) in lengths.iter().enumerate() {
        for j in 0..cols {
            if mask.is_kept(i, j) {
                d[(i, j)] = mask.gate[(i, j)]
                    * kaiser_dbeta(bt.values[(i, j)], len, beta, i0_beta, i1_beta);
            }
        }
    }
    Ok(d)
}

/// Convenience: mask and modulated window for `params` in one call.
pub fn window_matrix(params: &WindowParams, soft_width: f64) -> Result<(ResampledTime, MaskMatrix, Matrix)> {
    let bt = resampled_time(params.n_frames(), params.support)?;
    let mask = mask_matrix(&bt, &params.lengths, soft_width)?;
    let w = modulated_kaiser(&mask, &params.lengths, &bt, params.beta)?;
    Ok((bt, mask, w))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Fixed 30-term series, independent of the adaptive stopping rule.
    fn i0_oracle(x: f64) -> f64 {
        let mut sum = 0.0;
        let mut fact = 1.0;
        for k in 0..30 {
            if k > 0 {
                fact *= k as f64;
            }
            sum += (x / 2.0).powi(2 * k) / (fact * fact);
        }
        sum
    }

    #[test]
    fn bessel_values() {
        assert_eq!(bessel_i0(0.0), 1.0);
        assert!((bessel_i0(1.0) - 1.266065877752008).abs() < 1e-15);
        assert!((bessel_i0(1.0) - i0_oracle(1.0)).abs() < 1e-15);
        assert_eq!(bessel_i0(-2.7), bessel_i0(2.7));
        for x in [0.3, 2.7, 8.6, 12.0] {
            let rel = (bessel_i0(x) - i0_oracle(x)).abs() / i0_oracle(x);
            assert!(rel < 1e-12, "x={x} rel={rel}");
        }
        // I1(1) = 0.5651591039924851
        assert!((bessel_i1(1.0) - 0.5651591039924851).abs() < 1e-15);
        assert_eq!(bessel_i1_over_x(0.0), 0.5);
    }

    #[test]
    fn kaiser_shape() {
        assert!(kaiser_window(8, 0.0).unwrap().iter().all(|&v| v == 1.0));
        let w = kaiser_window(9, 8.6).unwrap();
        assert_eq!(w[4], 1.0);
        assert!((w[0] - 1.0 / i0_oracle(8.6)).abs() < 1e-15);
        for n in 0..9 {
            assert_eq!(w[n], w[8 - n]);
        }
        assert!(kaiser_window(1, 1.0).is_err());
        assert!(kaiser_window(4, -1.0).is_err());
    }

    #[test]
    fn resampled_time_rows() {
        let bt = resampled_time(3, 5).unwrap();
        for i in 0..3 {
            assert_eq!(bt.values.row(i), &[0.0, 1.0, 2.0, 3.0, 4.0]);
        }
        assert_eq!(resampled_time(1, 2).unwrap().values.row(0), &[0.0, 1.0]);
        assert!(resampled_time(0, 2).is_err());
    }

    #[test]
    fn mask_prefix_lengths() {
        let bt = resampled_time(3, 5).unwrap();
        let m = mask_matrix(&bt, &[5.0, 3.0, 1.0], 0.0).unwrap();
        assert_eq!((m.kept_len(0), m.kept_len(1), m.kept_len(2)), (5, 3, 1));
        let full = mask_matrix(&bt, &[5.0; 3], 0.0).unwrap();
        assert!(full.keep.iter().all(|&k| k));
        // fractional lengths keep ceil(ϖ)
        let m = mask_matrix(&bt, &[2.2, 3.7, 4.01], 0.0).unwrap();
        assert_eq!((m.kept_len(0), m.kept_len(1), m.kept_len(2)), (3, 4, 5));
        assert!(mask_matrix(&bt, &[5.0; 2], 0.0).is_err());
    }

    #[test]
    fn soft_gate_limits() {
        let bt = resampled_time(1, 16).unwrap();
        let hard = mask_matrix(&bt, &[9.3], 0.0).unwrap();
        let soft = mask_matrix(&bt, &[9.3], 1e-9).unwrap();
        for j in 0..16 {
            let b = j as f64;
            if !(b > 9.3 - 1e-9 && b < 9.3) {
                assert_eq!(hard.gate[(0, j)], soft.gate[(0, j)]);
            }
        }
        let soft = mask_matrix(&bt, &[9.3], 2.0).unwrap();
        assert_eq!(soft.gate[(0, 7)], 1.0);
        assert!(soft.gate[(0, 8)] > 0.0 && soft.gate[(0, 8)] < 1.0);
        assert!(soft.gate[(0, 9)] > 0.0 && soft.gate[(0, 9)] < soft.gate[(0, 8)]);
        assert_eq!(soft.gate[(0, 10)], 0.0);
    }

    #[test]
    fn modulated_full_mask_equals_kaiser() {
        for n in [5usize, 16, 128] {
            let bt = resampled_time(3, n).unwrap();
            let lens = vec![n as f64; 3];
            let m = mask_matrix(&bt, &lens, 0.0).unwrap();
            let w = modulated_kaiser(&m, &lens, &bt, 8.0).unwrap();
            let k = kaiser_window(n, 8.0).unwrap();
            for i in 0..3 {
                assert_eq!(w.row(i), k.as_slice());
            }
        }
    }

    #[test]
    fn modulated_rectangular_example() {
        let bt = resampled_time(3, 5).unwrap();
        let lens = [5.0, 3.0, 1.0];
        let m = mask_matrix(&bt, &lens, 0.0).unwrap();
        let w = modulated_kaiser(&m, &lens, &bt, 0.0).unwrap();
        assert_eq!(w.row(0), &[1.0, 1.0, 1.0, 1.0, 1.0]);
        assert_eq!(w.row(1), &[1.0, 1.0, 1.0, 0.0, 0.0]);
        assert_eq!(w.row(2), &[1.0, 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn one_tap_window() {
        let bt = resampled_time(1, 8).unwrap();
        let m = mask_matrix(&bt, &[1.0], 0.0).unwrap();
        let w = modulated_kaiser(&m, &[1.0], &bt, 5.0).unwrap();
        assert!(w[(0, 0)] > 0.0);
        assert!(w.row(0)[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn masked_and_rectangular_gradients_vanish() {
        let bt = resampled_time(2, 8).unwrap();
        let lens = [4.5, 6.2];
        let m = mask_matrix(&bt, &lens, 0.0).unwrap();
        let d = window_grad_wrt_length(&m, &lens, &bt, 6.0).unwrap();
        assert_eq!(d[(0, 5)], 0.0);
        assert_eq!(d[(1, 7)], 0.0);
        let d0 = window_grad_wrt_length(&m, &lens, &bt, 0.0).unwrap();
        assert!(d0.as_slice().iter().all(|&v| v == 0.0));
    }

    fn fd_window_check(soft_width: f64, beta: f64) {
        let n = 32;
        let lens = [7.3, 12.6, 20.45, 31.2];
        let bt = resampled_time(lens.len(), n).unwrap();
        let m = mask_matrix(&bt, &lens, soft_width).unwrap();
        let d = window_grad_wrt_length(&m, &lens, &bt, beta).unwrap();
        for i in 0..lens.len() {
            let h = 1e-4 * lens[i];
            let mut up = lens;
            let mut dn = lens;
            up[i] += h;
            dn[i] -= h;
            let wu = modulated_kaiser(&mask_matrix(&bt, &up, soft_width).unwrap(), &up, &bt, beta).unwrap();
            let wd = modulated_kaiser(&mask_matrix(&bt, &dn, soft_width).unwrap(), &dn, &bt, beta).unwrap();
            for j in 0..n {
                let b = j as f64;
                // stay clear of the clamp kink at ϖ-1 and of the cut at ϖ
                let near_kink = (b - (lens[i] - 1.0)).abs() < 0.05 || (b - lens[i]).abs() < 0.05;
                if !m.is_kept(i, j) || near_kink {
                    continue;
                }
                let fd = (wu[(i, j)] - wd[(i, j)]) / (2.0 * h);
                let an = d[(i, j)];
                let scale = fd.abs().max(1e-8);
                assert!(
                    (fd - an).abs() <= 1e-5 * scale,
                    "row {i} col {j}: fd {fd} analytic {an}"
                );
            }
        }
    }

    #[test]
    fn length_gradient_matches_finite_differences() {
        fd_window_check(2.0, 8.0);
        fd_window_check(0.0, 8.0);
        fd_window_check(2.0, 3.0);
    }

    #[test]
    fn beta_gradient_matches_finite_differences() {
        let lens = [9.7, 16.0];
        let bt = resampled_time(2, 16).unwrap();
        let m = mask_matrix(&bt, &lens, 2.0).unwrap();
        let beta = 6.5;
        let d = window_grad_wrt_beta(&m, &lens, &bt, beta).unwrap();
        let h = 1e-5;
        let wu = modulated_kaiser(&m, &lens, &bt, beta + h).unwrap();
        let wd = modulated_kaiser(&m, &lens, &bt, beta - h).unwrap();
        for i in 0..2 {
            for j in 0..16 {
                let fd = (wu[(i, j)] - wd[(i, j)]) / (2.0 * h);
                assert!((fd - d[(i, j)]).abs() < 1e-7, "({i},{j}) {fd} {}", d[(i, j)]);
            }
        }
    }

    #[test]
    fn params_validation_and_clamp() {
        assert!(WindowParams::new(vec![0.5], 1.0, 8, 2).is_err());
        assert!(WindowParams::new(vec![9.0], 1.0, 8, 2).is_err());
        assert!(WindowParams::new(vec![4.0], -1.0, 8, 2).is_err());
        let mut p = WindowParams::new(vec![1.0, 8.0, 3.0], 1.0, 8, 2).unwrap();
        p.lengths[1] = 200.0;
        p.clamp();
        assert_eq!(p.lengths, vec![MIN_WINDOW_LENGTH, 8.0, 3.0]);
    }
}
