//! Adaptive-moment optimiser with decoupled weight decay, one instance per
//! parameter group.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl AdamWConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamW {
    pub config: AdamWConfig,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamW {
    pub fn new(config: AdamWConfig, n_params: usize) -> Self {
        Self {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != params.len() {
            return Err(Error::shape(format!(
                "optimizer state {} vs params {} vs grads {}",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Divergence(format!("non-finite gradient at index {i}: {}", grads[i])));
        }
        let c = self.config;
        self.t += 1;
        let bc1 = 1.0 - c.beta1.powi(self.t as i32);
        let bc2 = 1.0 - c.beta2.powi(self.t as i32);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *p -= c.lr * c.weight_decay * *p;
            *m = c.beta1 * *m + (1.0 - c.beta1) * g;
            *v = c.beta2 * *v + (1.0 - c.beta2) * g * g;
            let m_hat = *m / bc1;
            let v_hat = *v / bc2;
            *p -= c.lr * m_hat / (v_hat.sqrt() + c.eps);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_only_decays() {
        let mut opt = AdamW::new(AdamWConfig::new(0.1, 0.01), 2);
        let mut p = vec![1.0, -2.0];
        opt.step(&mut p, &[0.0, 0.0]).unwrap();
        assert!((p[0] - (1.0 - 0.1 * 0.01)).abs() < 1e-15);
        assert!((p[1] - (-2.0 + 0.1 * 0.01 * 2.0)).abs() < 1e-15);
    }

    #[test]
    fn moves_against_gradient() {
        let mut opt = AdamW::new(AdamWConfig::new(0.001, 0.0), 1);
        let mut p = vec![0.0];
        opt.step(&mut p, &[1.0]).unwrap();
        assert!(p[0] < 0.0);
        // bias-corrected first step has magnitude ~lr
        assert!((p[0] + 0.001).abs() < 1e-9);
    }

    #[test]
    fn rejects_nan() {
        let mut opt = AdamW::new(AdamWConfig::new(0.001, 0.0), 1);
        let mut p = vec![0.0];
        assert!(matches!(opt.step(&mut p, &[f64::NAN]), Err(Error::Divergence(_))));
        assert_eq!(p[0], 0.0);
    }
}
