use rand::Rng;

use crate::tensor::Tensor;

/// Glorot/Xavier uniform initialisation, registered as a trainable parameter.
pub(crate) fn xavier<R: Rng + ?Sized>(
    shape: &[usize],
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    Tensor::uniform(shape, -limit, limit, rng).requires_grad()
}

pub(crate) fn zeros(shape: &[usize]) -> Tensor {
    Tensor::zeros(shape).requires_grad()
}

pub(crate) fn ones(shape: &[usize]) -> Tensor {
    Tensor::ones(shape).requires_grad()
}
