//! One-sided real DFT of length `N` and its adjoint.
//!
//! The direct path is an explicit `O(N²)` sum over a precomputed twiddle
//! table, accumulated in index order. The FFT path goes through `rustfft`
//! and agrees with the direct path to ~1e-12 relative.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DftMethod {
    #[default]
    Direct,
    Fft,
}

#[derive(Clone)]
pub struct Dft {
    n: usize,
    method: DftMethod,
    // cos/sin of 2π k / N for k in 0..N
    cos: Vec<f64>,
    sin: Vec<f64>,
    forward: Option<Arc<dyn Fft<f64>>>,
    inverse: Option<Arc<dyn Fft<f64>>>,
}

impl fmt::Debug for Dft {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dft")
            .field("n", &self.n)
            .field("method", &self.method)
            .finish()
    }
}

impl Dft {
    pub fn new(n: usize, method: DftMethod) -> Self {
        assert!(n >= 1, "DFT length must be >= 1");
        let step = 2.0 * std::f64::consts::PI / n as f64;
        let cos = (0..n).map(|k| (step * k as f64).cos()).collect();
        let sin = (0..n).map(|k| (step * k as f64).sin()).collect();
        let (forward, inverse) = match method {
            DftMethod::Direct => (None, None),
            DftMethod::Fft => {
                let mut planner = FftPlanner::new();
                (Some(planner.plan_fft_forward(n)), Some(planner.plan_fft_inverse(n)))
            }
        };
        Self {
            n,
            method,
            cos,
            sin,
            forward,
            inverse,
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn method(&self) -> DftMethod {
        self.method
    }

    /// Number of one-sided bins, `floor(N/2) + 1`.
    pub fn bins(&self) -> usize {
        self.n / 2 + 1
    }

    /// `out[f] = Σ_n input[n] · exp(-j 2π f n / N)` for `f < bins()`.
    pub fn forward(&self, input: &[f64], out: &mut [Complex64]) {
        assert_eq!(input.len(), self.n);
        assert_eq!(out.len(), self.bins());
        match &self.forward {
            None => {
                for (f, o) in out.iter_mut().enumerate() {
                    let mut re = 0.0;
                    let mut im = 0.0;
                    let mut k = 0usize;
                    for &x in input {
                        re += x * self.cos[k];
                        im -= x * self.sin[k];
                        k += f;
                        if k >= self.n {
                            k -= self.n;
                        }
                    }
                    *o = Complex64::new(re, im);
                }
            }
            Some(fft) => {
                let mut buf: Vec<Complex64> =
                    input.iter().map(|&x| Complex64::new(x, 0.0)).collect();
                fft.process(&mut buf);
                out.copy_from_slice(&buf[..out.len()]);
            }
        }
    }

    /// Adjoint of [`forward`](Self::forward) seen as a real-linear map
    /// `R^N -> C^F ≅ R^{2F}`: given `∂L/∂Re + j ∂L/∂Im` per bin, writes
    /// `∂L/∂input[n] = Re Σ_f g[f] · exp(+j 2π f n / N)`.
    pub fn adjoint(&self, grad: &[Complex64], out: &mut [f64]) {
        assert_eq!(grad.len(), self.bins());
        assert_eq!(out.len(), self.n);
        match &self.inverse {
            None => {
                for (n, o) in out.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    let mut k = 0usize;
                    for g in grad {
                        acc += g.re * self.cos[k] - g.im * self.sin[k];
                        k += n;
                        if k >= self.n {
                            k -= self.n;
                        }
                    }
                    *o = acc;
                }
            }
            Some(ifft) => {
                let mut buf = vec![Complex64::new(0.0, 0.0); self.n];
                buf[..grad.len()].copy_from_slice(grad);
                ifft.process(&mut buf);
                for (o, b) in out.iter_mut().zip(&buf) {
                    *o = b.re;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn naive(x: &[f64], f: usize) -> Complex64 {
        let n = x.len() as f64;
        x.iter()
            .enumerate()
            .map(|(k, &v)| {
                let ang = -2.0 * std::f64::consts::PI * (f * k) as f64 / n;
                Complex64::new(v * ang.cos(), v * ang.sin())
            })
            .sum()
    }

    fn test_signal(n: usize) -> Vec<f64> {
        (0..n).map(|k| ((k * 7919) % 113) as f64 / 50.0 - 1.1).collect()
    }

    #[test]
    fn direct_matches_naive_and_fft() {
        for n in [8usize, 15, 64, 128] {
            let x = test_signal(n);
            let d = Dft::new(n, DftMethod::Direct);
            let f = Dft::new(n, DftMethod::Fft);
            let mut a = vec![Complex64::default(); d.bins()];
            let mut b = a.clone();
            d.forward(&x, &mut a);
            f.forward(&x, &mut b);
            for k in 0..d.bins() {
                let want = naive(&x, k);
                assert!((a[k] - want).norm() < 1e-10);
                assert!((a[k] - b[k]).norm() < 1e-9);
            }
        }
    }

    #[test]
    fn adjoint_identity() {
        // <D x, g> = <x, D* g> with the real inner product on C
        for method in [DftMethod::Direct, DftMethod::Fft] {
            let n = 32;
            let d = Dft::new(n, method);
            let x = test_signal(n);
            let g: Vec<Complex64> = (0..d.bins())
                .map(|k| Complex64::new((k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()))
                .collect();
            let mut dx = vec![Complex64::default(); d.bins()];
            d.forward(&x, &mut dx);
            let lhs: f64 = dx.iter().zip(&g).map(|(a, b)| a.re * b.re + a.im * b.im).sum();
            let mut dg = vec![0.0; n];
            d.adjoint(&g, &mut dg);
            let rhs: f64 = x.iter().zip(&dg).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-10, "{method:?}: {lhs} vs {rhs}");
        }
    }
}
