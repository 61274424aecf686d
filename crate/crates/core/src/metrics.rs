//! Spectrogram quality: balanced spectrum quality (BSQ) and Rényi entropy.
//!
//! For a magnitude spectrogram `M` (`T` frames × `F` bins) every row and every
//! column gets a balanced coefficient of variation `c̃ = μ / (σ + eps)`. Each
//! family is normalised by its maximum and averaged into a quality coefficient
//! in `(0, 1]`, and BSQ is the harmonic mean of the two coefficients. Lower
//! BSQ means a few rows/columns stand out sharply against the rest.
//!
//! All reductions run in a fixed sequential order.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

pub const DEFAULT_EPS: f64 = 1e-12;
pub const DEFAULT_RENYI_ALPHA: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QualityReport {
    pub q_f: f64,
    pub q_t: f64,
    pub bsq: f64,
    /// Rényi entropy in bits.
    pub renyi: f64,
    /// Rows plus columns whose standard deviation did not exceed `eps`.
    pub eps_guard_hits: usize,
}

fn check_shape(mag: &Matrix) -> Result<()> {
    let (t, f) = mag.shape();
    if t < 2 || f < 2 {
        return Err(Error::Degenerate(format!("need at least 2x2 cells, got {t}x{f}")));
    }
    Ok(())
}

/// Per-frame mean over bins (`μ_f`, length T) and per-bin mean over frames
/// (`μ_t`, length F).
pub fn col_row_means(mag: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    check_shape(mag)?;
    let (t, f) = mag.shape();
    let mu_f = mag.row_iter().map(|r| r.iter().sum::<f64>() / f as f64).collect();
    let mut mu_t = vec![0.0; f];
    for r in mag.row_iter() {
        for (acc, v) in mu_t.iter_mut().zip(r) {
            *acc += v;
        }
    }
    for v in mu_t.iter_mut() {
        *v /= t as f64;
    }
    Ok((mu_f, mu_t))
}

/// Sample standard deviations with `F - 1` and `T - 1` denominators.
pub fn col_row_stds(mag: &Matrix, mu_f: &[f64], mu_t: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    check_shape(mag)?;
    let (t, f) = mag.shape();
    if mu_f.len() != t || mu_t.len() != f {
        return Err(Error::shape("mean vectors do not match the matrix"));
    }
    let sigma_f = mag
        .row_iter()
        .zip(mu_f)
        .map(|(r, &m)| (r.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (f - 1) as f64).sqrt())
        .collect();
    let mut ss = vec![0.0; f];
    for r in mag.row_iter() {
        for ((acc, v), m) in ss.iter_mut().zip(r).zip(mu_t) {
            *acc += (v - m) * (v - m);
        }
    }
    let sigma_t = ss.into_iter().map(|s| (s / (t - 1) as f64).sqrt()).collect();
    Ok((sigma_f, sigma_t))
}

pub fn balanced_cv(mu: &[f64], sigma: &[f64], eps: f64) -> Vec<f64> {
    mu.iter().zip(sigma).map(|(m, s)| m / (s + eps)).collect()
}

/// Index of the maximum, lowest index on ties.
fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn normalised_mean(c: &[f64]) -> Result<f64> {
    if c.is_empty() {
        return Err(Error::Degenerate("empty coefficient vector".into()));
    }
    let max = c[argmax(c)];
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::Degenerate(format!("coefficient maximum is {max}")));
    }
    Ok(c.iter().map(|v| v / max).sum::<f64>() / c.len() as f64)
}

/// `(Q̃_f, Q̃_t)`: max-normalised means of the row and column coefficients.
pub fn quality_coeffs(c_f: &[f64], c_t: &[f64]) -> Result<(f64, f64)> {
    Ok((normalised_mean(c_f)?, normalised_mean(c_t)?))
}

/// Harmonic mean of the two quality coefficients.
pub fn bsq(q_f: f64, q_t: f64) -> f64 {
    2.0 * q_f * q_t / (q_f + q_t)
}

struct Forward {
    mu_f: Vec<f64>,
    mu_t: Vec<f64>,
    sigma_f: Vec<f64>,
    sigma_t: Vec<f64>,
    c_f: Vec<f64>,
    c_t: Vec<f64>,
    q_f: f64,
    q_t: f64,
}

fn forward(mag: &Matrix, eps: f64) -> Result<Forward> {
    if !(eps > 0.0) {
        return Err(Error::invalid("eps must be > 0"));
    }
    let (mu_f, mu_t) = col_row_means(mag)?;
    let (sigma_f, sigma_t) = col_row_stds(mag, &mu_f, &mu_t)?;
    let c_f = balanced_cv(&mu_f, &sigma_f, eps);
    let c_t = balanced_cv(&mu_t, &sigma_t, eps);
    let (q_f, q_t) = quality_coeffs(&c_f, &c_t)?;
    Ok(Forward {
        mu_f,
        mu_t,
        sigma_f,
        sigma_t,
        c_f,
        c_t,
        q_f,
        q_t,
    })
}

/// BSQ of a magnitude spectrogram.
pub fn bsq_loss(mag: &Matrix, eps: f64) -> Result<f64> {
    let fw = forward(mag, eps)?;
    Ok(bsq(fw.q_f, fw.q_t))
}

/// Per-row and per-column `c̃` vectors, for export.
pub fn balanced_cv_vectors(mag: &Matrix, eps: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let fw = forward(mag, eps)?;
    Ok((fw.c_f, fw.c_t))
}

/// `∂q/∂c[k]` for `q = mean(c / max c)` with the max taken at the lowest
/// tied index.
fn normalised_mean_grad(c: &[f64]) -> Vec<f64> {
    let n = c.len() as f64;
    let star = argmax(c);
    let max = c[star];
    let total: f64 = c.iter().sum();
    let mut g = vec![1.0 / (n * max); c.len()];
    g[star] -= total / (n * max * max);
    g
}

/// `upstream · ∂BSQ/∂M`.
pub fn bsq_grad(mag: &Matrix, eps: f64, upstream: f64) -> Result<Matrix> {
    let (t, f) = mag.shape();
    if upstream == 0.0 {
        check_shape(mag)?;
        return Ok(Matrix::zeros(t, f));
    }
    let fw = forward(mag, eps)?;
    let denom = (fw.q_f + fw.q_t) * (fw.q_f + fw.q_t);
    let d_qf = upstream * 2.0 * fw.q_t * fw.q_t / denom;
    let d_qt = upstream * 2.0 * fw.q_f * fw.q_f / denom;

    // through c̃ = μ / (σ + eps) into (∂/∂μ, ∂/∂σ) per vector entry
    let split = |dq: f64, c: &[f64], mu: &[f64], sigma: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let dc = normalised_mean_grad(c);
        let d_mu = dc.iter().zip(sigma).map(|(g, s)| dq * g / (s + eps)).collect();
        let d_sigma = dc
            .iter()
            .zip(mu)
            .zip(sigma)
            .map(|((g, m), s)| -dq * g * m / ((s + eps) * (s + eps)))
            .collect();
        (d_mu, d_sigma)
    };
    let (dmu_f, dsig_f) = split(d_qf, &fw.c_f, &fw.mu_f, &fw.sigma_f);
    let (dmu_t, dsig_t) = split(d_qt, &fw.c_t, &fw.mu_t, &fw.sigma_t);

    // σ = 0 has no gradient (subgradient 0)
    let sigma_coef = |ds: f64, s: f64, n: usize| if s > 0.0 { ds / ((n - 1) as f64 * s) } else { 0.0 };
    let mut out = Matrix::zeros(t, f);
    for i in 0..t {
        let rs = sigma_coef(dsig_f[i], fw.sigma_f[i], f);
        let rm = dmu_f[i] / f as f64;
        for j in 0..f {
            let cs = sigma_coef(dsig_t[j], fw.sigma_t[j], t);
            let cm = dmu_t[j] / t as f64;
            let v = mag[(i, j)];
            out[(i, j)] = rm + rs * (v - fw.mu_f[i]) + cm + cs * (v - fw.mu_t[j]);
        }
    }
    Ok(out)
}

/// Rényi entropy (bits) of the normalised energy distribution `|M|² / Σ|M|²`.
/// Evaluation only: no gradient is provided.
pub fn renyi_entropy(mag: &Matrix, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) || alpha == 1.0 || !alpha.is_finite() {
        return Err(Error::invalid(format!("Rényi order must be > 0 and != 1, got {alpha}")));
    }
    let energy: f64 = mag.as_slice().iter().map(|v| v * v).sum();
    if !(energy > 0.0) {
        return Err(Error::Degenerate("all-zero spectrogram".into()));
    }
    let s: f64 = mag
        .as_slice()
        .iter()
        .map(|v| (v * v / energy).powf(alpha))
        .sum();
    Ok(s.log2() / (1.0 - alpha))
}

pub fn quality_report(mag: &Matrix, eps: f64, alpha: f64) -> Result<QualityReport> {
    let fw = forward(mag, eps)?;
    let hits = fw
        .sigma_f
        .iter()
        .chain(&fw.sigma_t)
        .filter(|&&s| s <= eps)
        .count();
    Ok(QualityReport {
        q_f: fw.q_f,
        q_t: fw.q_t,
        bsq: bsq(fw.q_f, fw.q_t),
        renyi: renyi_entropy(mag, alpha)?,
        eps_guard_hits: hits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcg(seed: u64, n: usize) -> Vec<f64> {
        let mut s = seed ^ 0x9E3779B97F4A7C15;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64
            })
            .collect()
    }

    #[test]
    fn means_examples() {
        let (a, b) = col_row_means(&Matrix::filled(4, 8, 1.0)).unwrap();
        assert!(a.iter().chain(&b).all(|&v| v == 1.0));
        let mut m = Matrix::zeros(4, 8);
        m[(0, 0)] = 3.0;
        let (a, b) = col_row_means(&m).unwrap();
        assert_eq!(a[0], 3.0 / 8.0);
        assert_eq!(b[0], 3.0 / 4.0);
        assert!(a[1..].iter().chain(&b[1..]).all(|&v| v == 0.0));
        assert!(col_row_means(&Matrix::zeros(1, 8)).is_err());
    }

    #[test]
    fn stds_examples() {
        let m = Matrix::filled(3, 3, 2.5);
        let (mf, mt) = col_row_means(&m).unwrap();
        let (sf, st) = col_row_stds(&m, &mf, &mt).unwrap();
        assert!(sf.iter().chain(&st).all(|&v| v == 0.0));

        let m = Matrix::from_vec(2, 2, vec![0.0, 2.0, 0.0, 2.0]);
        let (mf, mt) = col_row_means(&m).unwrap();
        let (sf, _) = col_row_stds(&m, &mf, &mt).unwrap();
        assert_eq!(sf[0], 2f64.sqrt());
    }

    #[test]
    fn cv_examples() {
        let c = balanced_cv(&[1.0, 0.0], &[0.0, 3.0], 1e-12);
        assert!((c[0] - 1e12).abs() < 1.0);
        assert_eq!(c[1], 0.0);
        let a = balanced_cv(&[2.0], &[0.5], 1e-12)[0];
        let b = balanced_cv(&[20.0], &[5.0], 1e-12)[0];
        assert!((a - b).abs() < 1e-9);
    }

    #[test]
    fn quality_coeff_examples() {
        assert_eq!(quality_coeffs(&[3.0; 5], &[0.2; 4]).unwrap(), (1.0, 1.0));
        let (q, _) = quality_coeffs(&[1.0, 0.0, 0.0, 0.0], &[1.0]).unwrap();
        assert_eq!(q, 0.25);
        let (a, _) = quality_coeffs(&[0.3, 0.9, 0.1], &[1.0]).unwrap();
        let (b, _) = quality_coeffs(&[3.0, 9.0, 1.0], &[1.0]).unwrap();
        assert!((a - b).abs() < 1e-15);
        assert!(quality_coeffs(&[0.0, 0.0], &[1.0]).is_err());
    }

    #[test]
    fn bsq_examples() {
        assert_eq!(bsq(0.5, 0.5), 0.5);
        assert!((bsq(0.2, 0.6) - 0.3).abs() < 1e-15);
        for (i, pair) in lcg(5, 200).chunks(2).enumerate() {
            let (a, b) = (pair[0].max(1e-6), pair[1].max(1e-6));
            let h = bsq(a, b);
            assert!(h >= a.min(b) - 1e-15 && h <= a.max(b) + 1e-15, "pair {i}");
            assert!(h <= a.min(b) + (a - b).abs() + 1e-15);
        }
    }

    #[test]
    fn uniform_spectrogram_bsq_is_one() {
        let m = Matrix::filled(7, 9, 0.3);
        assert_eq!(bsq_loss(&m, DEFAULT_EPS).unwrap(), 1.0);
        let r = quality_report(&m, DEFAULT_EPS, 3.0).unwrap();
        assert_eq!(r.eps_guard_hits, 16);
    }

    #[test]
    fn delta_has_lower_bsq_than_uniform() {
        let mut m = Matrix::filled(6, 6, 1e-3);
        m[(2, 3)] = 10.0;
        assert!(bsq_loss(&m, DEFAULT_EPS).unwrap() < 1.0);
    }

    #[test]
    fn renyi_examples() {
        let u = Matrix::filled(4, 8, 2.0);
        for alpha in [0.5, 2.0, 3.0] {
            assert!((renyi_entropy(&u, alpha).unwrap() - 5.0).abs() < 1e-12);
        }
        let mut d = Matrix::zeros(4, 8);
        d[(1, 1)] = 5.0;
        assert_eq!(renyi_entropy(&d, 3.0).unwrap(), 0.0);
        let mut near = Matrix::filled(4, 8, 1.0);
        near[(0, 0)] = 1.1;
        assert!(renyi_entropy(&d, 3.0).unwrap() < renyi_entropy(&near, 3.0).unwrap());
        assert!(renyi_entropy(&Matrix::zeros(2, 2), 3.0).is_err());
        assert!(renyi_entropy(&u, 1.0).is_err());
    }

    #[test]
    fn grad_zero_upstream() {
        let m = Matrix::from_vec(3, 4, lcg(1, 12));
        let g = bsq_grad(&m, DEFAULT_EPS, 0.0).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grad_constant_matrix_is_symmetric() {
        let m = Matrix::filled(4, 5, 2.0);
        let g = bsq_grad(&m, DEFAULT_EPS, 1.0).unwrap();
        // σ = 0 everywhere so only the mean paths contribute; those are
        // identical for all non-argmax rows/columns
        for i in 1..4 {
            for j in 1..5 {
                assert_eq!(g[(i, j)], g[(1, 1)]);
            }
        }
        assert!(g.is_finite());
    }

    #[test]
    fn grad_matches_finite_differences() {
        let m = Matrix::from_vec(6, 9, lcg(42, 54).into_iter().map(|v| 0.1 + v).collect());
        let g = bsq_grad(&m, DEFAULT_EPS, 1.0).unwrap();
        let h = 1e-6;
        for i in 0..6 {
            for j in 0..9 {
                let mut up = m.clone();
                let mut dn = m.clone();
                up[(i, j)] += h;
                dn[(i, j)] -= h;
                let fd = (bsq_loss(&up, DEFAULT_EPS).unwrap() - bsq_loss(&dn, DEFAULT_EPS).unwrap()) / (2.0 * h);
                assert!(
                    (fd - g[(i, j)]).abs() <= 1e-4 * fd.abs().max(1e-4),
                    "({i},{j}) fd {fd} an {}",
                    g[(i, j)]
                );
            }
        }
    }
}
