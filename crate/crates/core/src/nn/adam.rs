//! Adam optimizer with bias-corrected first and second moments.

use super::Scalar;

const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const EPS: f64 = 1e-8;

/// Keeps one pair of moment buffers per parameter array, in the order the
/// arrays are first presented; `step` must always be called with the same
/// array layout.
#[derive(Debug, Clone)]
pub struct Adam<S> {
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
    t: u64,
}

impl<S: Scalar> Adam<S> {
    /// `sizes` are the lengths of the parameter arrays, in update order.
    pub fn new(sizes: &[usize]) -> Self {
        Adam {
            m: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![S::zero(); n]).collect(),
            t: 0,
        }
    }

    /// One update over all parameter arrays.
    ///
    /// # Panics
    /// If the array count or any length differs from construction.
    pub fn step(&mut self, params: &mut [&mut [S]], grads: &[Vec<S>], lr: f64) {
        assert_eq!(params.len(), self.m.len(), "parameter array count changed");
        assert_eq!(grads.len(), self.m.len(), "gradient array count changed");
        self.t += 1;
        let b1 = S::of(BETA1);
        let b2 = S::of(BETA2);
        let one = S::one();
        // bias correction factors for step t
        let c1 = S::of(1.0 / (1.0 - BETA1.powi(self.t as i32)));
        let c2 = S::of(1.0 / (1.0 - BETA2.powi(self.t as i32)));
        let lr = S::of(lr);
        let eps = S::of(EPS);
        for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            assert_eq!(p.len(), self.m[i].len(), "parameter array {i} changed length");
            let m = &mut self.m[i];
            let v = &mut self.v[i];
            for j in 0..p.len() {
                let gj = g[j];
                m[j] = b1 * m[j] + (one - b1) * gj;
                v[j] = b2 * v[j] + (one - b2) * gj * gj;
                let m_hat = m[j] * c1;
                let v_hat = v[j] * c2;
                p[j] = p[j] - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
