//! Adam with standard bias correction.

use super::net::Grads;
use super::Scalar;

/// Optimizer state: per-parameter first/second moment accumulators, the step
/// count, and the hyperparameters (defaults: lr 1e-4, betas 0.9/0.999,
/// eps 1e-8).
#[derive(Clone, Debug)]
pub struct AdamState<T> {
    pub lr: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub step: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(param_shapes: &[&[T]], lr: f64) -> AdamState<T> {
        AdamState {
            lr: T::from_f64(lr),
            beta1: T::from_f64(0.9),
            beta2: T::from_f64(0.999),
            eps: T::from_f64(1e-8),
            step: 0,
            m: param_shapes.iter().map(|p| vec![T::zero(); p.len()]).collect(),
            v: param_shapes.iter().map(|p| vec![T::zero(); p.len()]).collect(),
        }
    }

    /// One bias-corrected update. Moment shapes must match the parameters.
    pub fn step(&mut self, mut params: Vec<&mut [T]>, grads: &Grads<T>) {
        assert_eq!(params.len(), self.m.len(), "parameter slot count mismatch");
        assert_eq!(params.len(), grads.slots.len(), "gradient slot count mismatch");
        self.step += 1;
        let t = self.step as i32;
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        let one = T::one();
        for (slot, p) in params.iter_mut().enumerate() {
            let g = &grads.slots[slot];
            assert_eq!(p.len(), g.len(), "gradient shape mismatch in slot {slot}");
            let m = &mut self.m[slot];
            let v = &mut self.v[slot];
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (one - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (one - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] = p[i] - self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
