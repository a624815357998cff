use crate::error::{Error, Result};

/// Bias-corrected Adam over a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(n: usize, beta1: f64, beta2: f64, eps: f64) -> Self {
        Adam {
            beta1,
            beta2,
            eps,
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    pub fn moments(&self) -> (&[f64], &[f64]) {
        (&self.m, &self.v)
    }

    pub fn steps(&self) -> u32 {
        self.t
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        self.step_scaled(params, grads, lr, None)
    }

    /// As [`Adam::step`] with parameter `i` using learning rate `lr * scale[i]`.
    pub fn step_scaled(&mut self, params: &mut [f64], grads: &[f64], lr: f64, scale: Option<&[f64]>) -> Result<()> {
        if scale.is_some_and(|s| s.len() != self.m.len()) {
            return Err(Error::LengthMismatch {
                expected: self.m.len(),
                actual: scale.map_or(0, |s| s.len()),
            });
        }
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::LengthMismatch {
                expected: self.m.len(),
                actual: grads.len().min(params.len()),
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient component {i}")));
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            let rate = scale.map_or(lr, |s| lr * s[i]);
            params[i] -= rate * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Cosine annealing with warm restarts every `period` ticks.
pub fn cosine_lr(iter: usize, lr_max: f64, lr_min: f64, period: usize) -> f64 {
    let phase = (iter % period) as f64 / period as f64;
    lr_min + 0.5 * (lr_max - lr_min) * (1.0 + (std::f64::consts::PI * phase).cos())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params_and_decays_moments() {
        let mut a = Adam::new(2, 0.5, 0.999, 1e-8);
        let mut p = [1.0, -2.0];
        a.step(&mut p, &[0.4, -0.2], 0.1).unwrap();
        let before = p;
        let (m0, v0) = (a.moments().0.to_vec(), a.moments().1.to_vec());
        a.m.iter_mut().for_each(|m| *m = 0.0);
        a.step(&mut p, &[0.0, 0.0], 0.1).unwrap();
        assert_eq!(p, before);
        for i in 0..2 {
            assert!(a.moments().1[i] < v0[i]);
            assert!(a.moments().1[i] > 0.0);
        }
        assert!(m0.iter().all(|m| *m != 0.0));
    }

    #[test]
    fn first_step_is_sign_scaled_by_lr() {
        let mut a = Adam::new(3, 0.5, 0.999, 1e-8);
        let mut p = [0.0; 3];
        let g = [3.0, -0.01, 1e-3];
        a.step(&mut p, &g, 0.25).unwrap();
        for i in 0..3 {
            let expect = -0.25 * g[i] / (g[i].abs() + 1e-8);
            assert!((p[i] - expect).abs() < 1e-12, "{} vs {expect}", p[i]);
        }
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut a = Adam::new(1, 0.5, 0.999, 1e-8);
        assert!(matches!(a.step(&mut [0.0], &[f64::NAN], 1.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn schedule_endpoints() {
        let (hi, lo) = (1.0, 1e-5);
        assert_eq!(cosine_lr(0, hi, lo, 20), hi);
        assert_eq!(cosine_lr(20, hi, lo, 20), hi);
        assert!((cosine_lr(10, hi, lo, 20) - 0.5 * (hi + lo)).abs() < 1e-15);
        assert!(cosine_lr(19, hi, lo, 20) < 0.01);
    }
}
