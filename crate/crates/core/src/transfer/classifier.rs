//! Small stand-in backbone: average-pool the magnitude spectrogram to a fixed
//! grid, compress with `ln(1 + ·)`, then one `tanh` hidden layer and a linear
//! output layer.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassifierShape {
    pub pool_rows: usize,
    pub pool_cols: usize,
    pub hidden: usize,
    pub classes: usize,
}

impl ClassifierShape {
    pub fn inputs(&self) -> usize {
        self.pool_rows * self.pool_cols
    }

    /// Flat parameter layout: `w1 (hidden × inputs)`, `b1`, `w2 (classes × hidden)`, `b2`.
    pub fn n_params(&self) -> usize {
        self.hidden * self.inputs() + self.hidden + self.classes * self.hidden + self.classes
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TinyClassifier {
    pub shape: ClassifierShape,
    pub params: Vec<f64>,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Activations {
    /// Pooled, log-compressed spectrogram.
    pub pooled: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
}

/// Half-open index ranges splitting `len` into `parts` nearly equal blocks.
fn blocks(len: usize, parts: usize) -> Vec<(usize, usize)> {
    (0..parts)
        .map(|p| (p * len / parts, (p + 1) * len / parts))
        .collect()
}

impl TinyClassifier {
    pub fn new(shape: ClassifierShape, rng: &mut impl Rng) -> Result<Self> {
        if shape.pool_rows == 0 || shape.pool_cols == 0 || shape.hidden == 0 || shape.classes < 2 {
            return Err(Error::invalid(format!("bad classifier shape {shape:?}")));
        }
        let mut params = Vec::with_capacity(shape.n_params());
        let a1 = (6.0 / (shape.inputs() + shape.hidden) as f64).sqrt();
        params.extend((0..shape.hidden * shape.inputs()).map(|_| rng.random_range(-a1..a1)));
        params.extend(std::iter::repeat_n(0.0, shape.hidden));
        let a2 = (6.0 / (shape.hidden + shape.classes) as f64).sqrt();
        params.extend((0..shape.classes * shape.hidden).map(|_| rng.random_range(-a2..a2)));
        params.extend(std::iter::repeat_n(0.0, shape.classes));
        Ok(Self { shape, params })
    }

    pub fn from_params(shape: ClassifierShape, params: Vec<f64>) -> Result<Self> {
        if params.len() != shape.n_params() {
            return Err(Error::shape(format!(
                "{} parameters for shape {shape:?} (want {})",
                params.len(),
                shape.n_params()
            )));
        }
        Ok(Self { shape, params })
    }

    fn split(&self) -> (&[f64], &[f64], &[f64], &[f64]) {
        let s = self.shape;
        let (w1, rest) = self.params.split_at(s.hidden * s.inputs());
        let (b1, rest) = rest.split_at(s.hidden);
        let (w2, b2) = rest.split_at(s.classes * s.hidden);
        (w1, b1, w2, b2)
    }

    pub fn pool(&self, mag: &Matrix) -> Result<Vec<f64>> {
        let s = self.shape;
        let (t, f) = mag.shape();
        if t < s.pool_rows || f < s.pool_cols {
            return Err(Error::shape(format!(
                "spectrogram {t}x{f} smaller than pooling grid {}x{}",
                s.pool_rows, s.pool_cols
            )));
        }
        let rb = blocks(t, s.pool_rows);
        let cb = blocks(f, s.pool_cols);
        let mut out = Vec::with_capacity(s.inputs());
        for &(r0, r1) in &rb {
            for &(c0, c1) in &cb {
                let mut acc = 0.0;
                for i in r0..r1 {
                    acc += mag.row(i)[c0..c1].iter().sum::<f64>();
                }
                let avg = acc / ((r1 - r0) * (c1 - c0)) as f64;
                out.push(avg.ln_1p());
            }
        }
        Ok(out)
    }

    /// `∂L/∂mag` from `∂L/∂pooled`.
    pub fn pool_backward(&self, pooled: &[f64], d_pooled: &[f64], rows: usize, cols: usize) -> Matrix {
        let s = self.shape;
        let rb = blocks(rows, s.pool_rows);
        let cb = blocks(cols, s.pool_cols);
        let mut out = Matrix::zeros(rows, cols);
        let mut k = 0;
        for &(r0, r1) in &rb {
            for &(c0, c1) in &cb {
                // d ln(1 + avg) = d avg / (1 + avg) = d avg · exp(-pooled)
                let g = d_pooled[k] * (-pooled[k]).exp() / ((r1 - r0) * (c1 - c0)) as f64;
                for i in r0..r1 {
                    for v in &mut out.row_mut(i)[c0..c1] {
                        *v = g;
                    }
                }
                k += 1;
            }
        }
        out
    }

    pub fn forward_pooled(&self, pooled: Vec<f64>) -> Activations {
        let s = self.shape;
        let (w1, b1, w2, b2) = self.split();
        let hidden: Vec<f64> = (0..s.hidden)
            .map(|h| {
                let row = &w1[h * s.inputs()..(h + 1) * s.inputs()];
                (b1[h] + row.iter().zip(&pooled).map(|(w, x)| w * x).sum::<f64>()).tanh()
            })
            .collect();
        let logits = (0..s.classes)
            .map(|k| {
                let row = &w2[k * s.hidden..(k + 1) * s.hidden];
                b2[k] + row.iter().zip(&hidden).map(|(w, x)| w * x).sum::<f64>()
            })
            .collect();
        Activations {
            pooled,
            hidden,
            logits,
        }
    }

    pub fn forward(&self, mag: &Matrix) -> Result<Activations> {
        Ok(self.forward_pooled(self.pool(mag)?))
    }

    /// Accumulates parameter gradients into `grads` and returns `∂L/∂pooled`.
    /// `d_hidden_extra` is added to the gradient arriving at the hidden layer.
    pub fn backward(
        &self,
        acts: &Activations,
        d_logits: &[f64],
        d_hidden_extra: Option<&[f64]>,
        grads: &mut [f64],
    ) -> Vec<f64> {
        let s = self.shape;
        let (w1, _, w2, _) = self.split();
        let n_w1 = s.hidden * s.inputs();
        let n_w2 = s.classes * s.hidden;
        let (gw1, rest) = grads.split_at_mut(n_w1);
        let (gb1, rest) = rest.split_at_mut(s.hidden);
        let (gw2, gb2) = rest.split_at_mut(n_w2);

        let mut d_hidden = d_hidden_extra.map_or_else(|| vec![0.0; s.hidden], |d| d.to_vec());
        for k in 0..s.classes {
            let g = d_logits[k];
            gb2[k] += g;
            for h in 0..s.hidden {
                gw2[k * s.hidden + h] += g * acts.hidden[h];
                d_hidden[h] += g * w2[k * s.hidden + h];
            }
        }
        let mut d_pooled = vec![0.0; s.inputs()];
        for h in 0..s.hidden {
            let a = acts.hidden[h];
            let g = d_hidden[h] * (1.0 - a * a);
            gb1[h] += g;
            let row = &w1[h * s.inputs()..(h + 1) * s.inputs()];
            let grow = &mut gw1[h * s.inputs()..(h + 1) * s.inputs()];
            for i in 0..s.inputs() {
                grow[i] += g * acts.pooled[i];
                d_pooled[i] += g * row[i];
            }
        }
        d_pooled
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Vector-Jacobian product of softmax: `∂L/∂z` from `∂L/∂p`.
pub fn softmax_backward(p: &[f64], d_p: &[f64]) -> Vec<f64> {
    let dot: f64 = p.iter().zip(d_p).map(|(a, b)| a * b).sum();
    p.iter().zip(d_p).map(|(pk, dk)| pk * (dk - dot)).collect()
}

/// Cross-entropy against `1 - smoothing` on the true class and
/// `smoothing / (K - 1)` elsewhere. Returns the loss and `∂loss/∂logits`.
pub fn smoothed_cross_entropy(logits: &[f64], label: usize, smoothing: f64) -> Result<(f64, Vec<f64>)> {
    let k = logits.len();
    if label >= k {
        return Err(Error::invalid(format!("class id {label} with {k} classes")));
    }
    if !(0.0..1.0).contains(&smoothing) {
        return Err(Error::invalid(format!("smoothing {smoothing} outside [0, 1)")));
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    let off = if k > 1 { smoothing / (k - 1) as f64 } else { 0.0 };
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(k);
    for (c, z) in logits.iter().enumerate() {
        let target = if c == label { 1.0 - smoothing } else { off };
        let log_p = z - lse;
        loss -= target * log_p;
        grad.push(log_p.exp() - target);
    }
    Ok((loss, grad))
}
