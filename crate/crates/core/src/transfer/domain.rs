//! Joint kernel discrepancy between source and target batches.
//!
//! The joint kernel is the product of a multi-bandwidth Gaussian on features
//! and a unit-bandwidth Gaussian on softmax outputs. The estimate is the
//! biased one: all ordered pairs, diagonal included, so `D(A, A) = 0`.

use crate::error::{Error, Result};
use crate::transfer::classifier::{softmax, softmax_backward};

/// Squared bandwidths `median · 2^k` for `k = -2..=2`, from the median
/// squared pairwise distance of the pooled batch. Falls back to 1 when all
/// points coincide.
pub fn median_bandwidths(x_s: &[Vec<f64>], x_t: &[Vec<f64>]) -> Vec<f64> {
    let all: Vec<&Vec<f64>> = x_s.iter().chain(x_t).collect();
    let mut d = Vec::with_capacity(all.len() * all.len() / 2);
    for i in 0..all.len() {
        for j in i + 1..all.len() {
            d.push(sq_dist(all[i], all[j]));
        }
    }
    d.sort_by(f64::total_cmp);
    let med = if d.is_empty() {
        0.0
    } else if d.len() % 2 == 1 {
        d[d.len() / 2]
    } else {
        0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2])
    };
    let med = if med > 0.0 && med.is_finite() { med } else { 1.0 };
    (-2..=2).map(|k| med * 2f64.powi(k)).collect()
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean over bandwidths of `exp(-|a-b|² / (2 s))`.
pub fn gaussian_kernel(a: &[f64], b: &[f64], sq_bandwidths: &[f64]) -> f64 {
    let d = sq_dist(a, b);
    sq_bandwidths.iter().map(|s| (-d / (2.0 * s)).exp()).sum::<f64>() / sq_bandwidths.len() as f64
}

/// Kernel value and `∂k/∂a` (equal to `-∂k/∂b`).
fn gaussian_kernel_grad(a: &[f64], b: &[f64], sq_bandwidths: &[f64]) -> (f64, Vec<f64>) {
    let d = sq_dist(a, b);
    let nb = sq_bandwidths.len() as f64;
    let mut k = 0.0;
    let mut coef = 0.0;
    for s in sq_bandwidths {
        let e = (-d / (2.0 * s)).exp();
        k += e / nb;
        coef -= e / (s * nb);
    }
    (k, a.iter().zip(b).map(|(x, y)| coef * (x - y)).collect())
}

const OUTPUT_SQ_BANDWIDTH: [f64; 1] = [1.0];

fn check(x_s: &[Vec<f64>], z_s: &[Vec<f64>], x_t: &[Vec<f64>], z_t: &[Vec<f64>]) -> Result<()> {
    if x_s.len() != z_s.len() || x_t.len() != z_t.len() {
        return Err(Error::shape("features and outputs differ in batch size"));
    }
    if x_s.len() != x_t.len() {
        return Err(Error::shape(format!(
            "source batch {} vs target batch {}",
            x_s.len(),
            x_t.len()
        )));
    }
    if x_s.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    Ok(())
}

/// Joint discrepancy of `(features, logits)` batches.
pub fn domain_metric(
    x_s: &[Vec<f64>],
    z_s: &[Vec<f64>],
    x_t: &[Vec<f64>],
    z_t: &[Vec<f64>],
    sq_bandwidths: &[f64],
) -> Result<f64> {
    check(x_s, z_s, x_t, z_t)?;
    let p_s: Vec<Vec<f64>> = z_s.iter().map(|z| softmax(z)).collect();
    let p_t: Vec<Vec<f64>> = z_t.iter().map(|z| softmax(z)).collect();
    let joint = |xa: &[f64], pa: &[f64], xb: &[f64], pb: &[f64]| {
        gaussian_kernel(xa, xb, sq_bandwidths) * gaussian_kernel(pa, pb, &OUTPUT_SQ_BANDWIDTH)
    };
    let n = x_s.len();
    let mut ss = 0.0;
    let mut tt = 0.0;
    let mut st = 0.0;
    for i in 0..n {
        for j in 0..n {
            ss += joint(&x_s[i], &p_s[i], &x_s[j], &p_s[j]);
            tt += joint(&x_t[i], &p_t[i], &x_t[j], &p_t[j]);
            st += joint(&x_s[i], &p_s[i], &x_t[j], &p_t[j]);
        }
    }
    Ok((ss + tt - 2.0 * st) / (n * n) as f64)
}

/// Gradients of [`domain_metric`] with respect to every input row.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainGrad {
    pub value: f64,
    pub d_x_s: Vec<Vec<f64>>,
    pub d_z_s: Vec<Vec<f64>>,
    pub d_x_t: Vec<Vec<f64>>,
    pub d_z_t: Vec<Vec<f64>>,
}

/// Value and gradient; bandwidths are treated as constants.
pub fn domain_metric_grad(
    x_s: &[Vec<f64>],
    z_s: &[Vec<f64>],
    x_t: &[Vec<f64>],
    z_t: &[Vec<f64>],
    sq_bandwidths: &[f64],
) -> Result<DomainGrad> {
    check(x_s, z_s, x_t, z_t)?;
    let n = x_s.len();
    let p_s: Vec<Vec<f64>> = z_s.iter().map(|z| softmax(z)).collect();
    let p_t: Vec<Vec<f64>> = z_t.iter().map(|z| softmax(z)).collect();
    // pooled index: 0..n source, n..2n target
    let x: Vec<&[f64]> = x_s.iter().chain(x_t).map(|v| v.as_slice()).collect();
    let p: Vec<&[f64]> = p_s.iter().chain(&p_t).map(|v| v.as_slice()).collect();
    let mut dx: Vec<Vec<f64>> = x.iter().map(|v| vec![0.0; v.len()]).collect();
    let mut dp: Vec<Vec<f64>> = p.iter().map(|v| vec![0.0; v.len()]).collect();
    let norm = 1.0 / (n * n) as f64;
    let mut value = 0.0;
    for a in 0..2 * n {
        for b in 0..2 * n {
            let same = (a < n) == (b < n);
            let w = if same { norm } else { -norm };
            let (k1, g1) = gaussian_kernel_grad(x[a], x[b], sq_bandwidths);
            let (k2, g2) = gaussian_kernel_grad(p[a], p[b], &OUTPUT_SQ_BANDWIDTH);
            value += w * k1 * k2;
            for (d, g) in dx[a].iter_mut().zip(&g1) {
                *d += w * k2 * g;
            }
            for (d, g) in dx[b].iter_mut().zip(&g1) {
                *d -= w * k2 * g;
            }
            for (d, g) in dp[a].iter_mut().zip(&g2) {
                *d += w * k1 * g;
            }
            for (d, g) in dp[b].iter_mut().zip(&g2) {
                *d -= w * k1 * g;
            }
        }
    }
    let dz: Vec<Vec<f64>> = p.iter().zip(&dp).map(|(pk, dk)| softmax_backward(pk, dk)).collect();
    let d_x_t = dx.split_off(n);
    let mut dz = dz;
    let d_z_t = dz.split_off(n);
    Ok(DomainGrad {
        value,
        d_x_s: dx,
        d_z_s: dz,
        d_x_t,
        d_z_t,
    })
}
