use crate::error::{invalid, shape, Error, Result};

use super::network::Network;
use super::tensor::Real;

/// Adam optimizer state, one moment pair per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new<T: Real>(net: &Network<T>, learning_rate: f64) -> Result<Self> {
        if !(learning_rate.is_finite() && learning_rate >= 0.0) {
            return Err(invalid(format!("learning rate must be non-negative, got {learning_rate}")));
        }
        let zeros: Vec<Vec<f64>> = net.params().iter().map(|p| vec![0.0; p.len()]).collect();
        Ok(Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: zeros.clone(),
            v: zeros,
        })
    }

    /// One bias-corrected update. Non-finite gradients leave the network and
    /// state untouched.
    pub fn step<T: Real>(&mut self, net: &mut Network<T>, grads: &[Vec<f64>]) -> Result<()> {
        if grads.len() != self.m.len() {
            return Err(shape(format!("{} gradient tensors", self.m.len()), grads.len()));
        }
        for (i, (g, m)) in grads.iter().zip(&self.m).enumerate() {
            if g.len() != m.len() {
                return Err(shape(format!("{} entries in tensor {i}", m.len()), g.len()));
            }
            if g.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFiniteGradient { tensor: i });
            }
        }
        self.t += 1;
        let t = self.t as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let mut params = net.params_mut();
        for (k, g) in grads.iter().enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (j, p) in params[k].iter_mut().enumerate() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let update = self.learning_rate * (m[j] / c1) / ((v[j] / c2).sqrt() + self.eps);
                *p = T::of_f64(p.as_f64() - update);
            }
        }
        Ok(())
    }
}
