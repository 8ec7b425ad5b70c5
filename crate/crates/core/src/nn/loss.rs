use crate::error::{shape, Result};

use super::tensor::{Real, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Loss {
    /// Mean squared error over all output elements.
    Mse,
    /// Binary cross-entropy on the logit feeding the final sigmoid.
    Bce,
}

/// `mean((pred - target)²)` and its gradient with respect to `pred`.
pub fn mse_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<(f64, Tensor<T>)> {
    if pred.dims() != target.dims() {
        return Err(shape(format!("{:?}", target.dims()), format!("{:?}", pred.dims())));
    }
    let n = pred.len() as f64;
    let mut loss = 0.0;
    let mut grad = pred.clone();
    for (g, (&p, &t)) in grad.data.iter_mut().zip(pred.data.iter().zip(&target.data)) {
        let d = p.as_f64() - t.as_f64();
        loss += d * d;
        *g = T::of_f64(2.0 * d / n);
    }
    Ok((loss / n, grad))
}

/// Cross-entropy of `sigmoid(logit)` against `label`, in the overflow-free
/// form `max(z, 0) − z·y + ln(1 + e^{−|z|})`, with its derivative
/// `sigmoid(z) − y`.
pub fn bce_with_logits(logit: f64, label: f64) -> (f64, f64) {
    let loss = logit.max(0.0) - logit * label + (-logit.abs()).exp().ln_1p();
    (loss, super::layers::sigmoid(logit) - label)
}
