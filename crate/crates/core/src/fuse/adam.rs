use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam moments for a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub params: AdamParams,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl Adam {
    pub fn new(len: usize, params: AdamParams) -> Self {
        Self {
            params,
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    /// One bias-corrected update of `x` along `-grad`, optionally clamped.
    pub fn update(&mut self, x: &mut [f64], grad: &[f64], clamp: Option<(f64, f64)>) {
        assert_eq!(x.len(), self.m.len(), "parameter length changed");
        assert_eq!(grad.len(), self.m.len(), "gradient length mismatch");
        self.step += 1;
        let AdamParams { lr, beta1, beta2, eps } = self.params;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for i in 0..x.len() {
            let g = grad[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            x[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            if let Some((lo, hi)) = clamp {
                x[i] = x[i].clamp(lo, hi);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_on_quadratic() {
        let mut x = [1.0];
        let mut adam = Adam::new(1, AdamParams::default());
        let grad = [2.0 * x[0]];
        adam.update(&mut x, &grad, None);
        // m̂ = 2, v̂ = 4, so the step is 0.1 · 2 / (2 + 1e-8).
        let expected = 1.0 - 0.1 * 2.0 / (2.0 + 1e-8);
        assert!((x[0] - expected).abs() < 1e-15);
        assert!((x[0] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut x = [0.3, 0.7];
        let mut adam = Adam::new(2, AdamParams::default());
        adam.update(&mut x, &[0.0, 0.0], Some((0.0, 1.0)));
        assert_eq!(x, [0.3, 0.7]);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn equal_gradients_move_equally_and_clamp() {
        let mut x = [0.05, 0.05];
        let mut adam = Adam::new(2, AdamParams::default());
        adam.update(&mut x, &[1.0, 1.0], Some((0.0, 1.0)));
        assert_eq!(x[0], x[1]);
        assert_eq!(x[0], 0.0);
    }
}
