//! Dense row-major tensors.
//!
//! A [`Tensor`] is a value: a shape plus an immutable, reference-counted
//! buffer. Cloning is cheap. Tensors that take part in training carry a
//! parameter key (see [`Tensor::requires_grad`]) so a tape can map recorded
//! leaves back onto the parameter they came from.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

static NEXT_PARAM_KEY: AtomicU64 = AtomicU64::new(1);

pub(crate) fn numel(shape: &[usize]) -> usize {
    shape.iter().product()
}

#[derive(Clone)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Arc<Vec<f64>>,
    requires_grad: bool,
    grad: Option<Vec<f64>>,
    key: u64,
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        if shape.iter().any(|&d| d == 0) {
            return Err(Error::Input(format!(
                "tensor dimensions must be positive, got {shape:?}"
            )));
        }
        if numel(shape) != data.len() {
            return Err(Error::Input(format!(
                "shape {shape:?} holds {} elements but {} were given",
                numel(shape),
                data.len()
            )));
        }
        Ok(Self::from_parts(shape.to_vec(), Arc::new(data)))
    }

    pub(crate) fn from_parts(shape: Vec<usize>, data: Arc<Vec<f64>>) -> Self {
        debug_assert_eq!(numel(&shape), data.len());
        Tensor {
            shape,
            data,
            requires_grad: false,
            grad: None,
            key: 0,
        }
    }

    /// Internal constructor for op results whose shape is known to be valid.
    pub(crate) fn raw(shape: Vec<usize>, data: Vec<f64>) -> Self {
        Self::from_parts(shape, Arc::new(data))
    }

    pub fn scalar(value: f64) -> Self {
        Self::raw(Vec::new(), vec![value])
    }

    pub fn vector(data: Vec<f64>) -> Self {
        let n = data.len();
        assert!(n > 0, "empty vector");
        Self::raw(vec![n], data)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Input("ragged rows".into()));
        }
        Tensor::new(&[rows.len(), cols], rows.concat())
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn full(shape: &[usize], value: f64) -> Self {
        assert!(shape.iter().all(|&d| d > 0), "zero-sized shape {shape:?}");
        Self::raw(shape.to_vec(), vec![value; numel(shape)])
    }

    pub fn eye(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::raw(vec![n, n], data)
    }

    pub fn randn<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Self {
        let data = (0..numel(shape))
            .map(|_| StandardNormal.sample(rng))
            .collect();
        Self::raw(shape.to_vec(), data)
    }

    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], low: f64, high: f64, rng: &mut R) -> Self {
        let data = (0..numel(shape)).map(|_| rng.gen_range(low..high)).collect();
        Self::raw(shape.to_vec(), data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable access to the buffer; copies first if the buffer is shared.
    pub fn data_mut(&mut self) -> &mut [f64] {
        Arc::make_mut(&mut self.data).as_mut_slice()
    }

    pub fn into_vec(self) -> Vec<f64> {
        Arc::try_unwrap(self.data).unwrap_or_else(|arc| (*arc).clone())
    }

    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on tensor of shape {:?}", self.shape);
        self.data[0]
    }

    pub fn get(&self, index: &[usize]) -> f64 {
        assert_eq!(index.len(), self.shape.len());
        let mut flat = 0;
        for (&i, &d) in index.iter().zip(&self.shape) {
            assert!(i < d, "index {index:?} out of bounds for {:?}", self.shape);
            flat = flat * d + i;
        }
        self.data[flat]
    }

    /// Marks this tensor as a trainable leaf and gives it a fresh parameter key.
    pub fn requires_grad(mut self) -> Self {
        self.requires_grad = true;
        self.key = NEXT_PARAM_KEY.fetch_add(1, Ordering::Relaxed);
        self
    }

    pub fn is_param(&self) -> bool {
        self.requires_grad
    }

    pub(crate) fn key(&self) -> u64 {
        self.key
    }

    pub fn grad(&self) -> Option<Tensor> {
        self.grad
            .as_ref()
            .map(|g| Tensor::raw(self.shape.clone(), g.clone()))
    }

    pub fn accumulate_grad(&mut self, grad: &[f64]) {
        assert_eq!(grad.len(), self.numel());
        match &mut self.grad {
            Some(g) => g.iter_mut().zip(grad).for_each(|(a, b)| *a += b),
            None => self.grad = Some(grad.to_vec()),
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad = None;
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Tensor> {
        if numel(shape) != self.numel() || shape.iter().any(|&d| d == 0) {
            return Err(Error::dim("reshape", &self.shape, shape));
        }
        Ok(Tensor::from_parts(shape.to_vec(), self.data.clone()))
    }

    /// Row `i` of a 2-D tensor.
    pub fn row(&self, i: usize) -> Tensor {
        assert_eq!(self.ndim(), 2);
        let w = self.shape[1];
        Tensor::raw(vec![w], self.data[i * w..(i + 1) * w].to_vec())
    }

    pub fn rows(&self, indices: &[usize]) -> Tensor {
        assert_eq!(self.ndim(), 2);
        let w = self.shape[1];
        let mut out = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            out.extend_from_slice(&self.data[i * w..(i + 1) * w]);
        }
        Tensor::raw(vec![indices.len(), w], out)
    }

    pub fn transpose(&self) -> Tensor {
        assert_eq!(self.ndim(), 2);
        let (m, n) = (self.shape[0], self.shape[1]);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Tensor::raw(vec![n, m], out)
    }

    /// Concatenates plain values along `axis`.
    pub fn concat(parts: &[&Tensor], axis: usize) -> Result<Tensor> {
        let shapes: Vec<&[usize]> = parts.iter().map(|t| t.shape()).collect();
        let (shape, chunks) = concat_layout(&shapes, axis)?;
        let mut out = Vec::with_capacity(numel(&shape));
        let outer: usize = shape[..axis].iter().product();
        for o in 0..outer {
            for (part, &chunk) in parts.iter().zip(&chunks) {
                out.extend_from_slice(&part.data[o * chunk..(o + 1) * chunk]);
            }
        }
        Ok(Tensor::raw(shape, out))
    }

    /// Splits along `axis` into pieces of the given lengths; inverse of [`Tensor::concat`].
    pub fn split(&self, axis: usize, sizes: &[usize]) -> Result<Vec<Tensor>> {
        if axis >= self.ndim() || sizes.iter().sum::<usize>() != self.shape[axis] {
            return Err(Error::dim("split", &self.shape, sizes));
        }
        let outer: usize = self.shape[..axis].iter().product();
        let inner: usize = self.shape[axis + 1..].iter().product();
        let row = self.shape[axis] * inner;
        let mut offset = 0;
        let mut out = Vec::with_capacity(sizes.len());
        for &len in sizes {
            let mut shape = self.shape.clone();
            shape[axis] = len;
            let mut data = Vec::with_capacity(outer * len * inner);
            for o in 0..outer {
                let start = o * row + offset * inner;
                data.extend_from_slice(&self.data[start..start + len * inner]);
            }
            out.push(Tensor::new(&shape, data)?);
            offset += len;
        }
        Ok(out)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor::raw(self.shape.clone(), self.data.iter().map(|&x| f(x)).collect())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape, other.shape);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Output shape and per-part contiguous chunk sizes for a concat along `axis`.
pub(crate) fn concat_layout(shapes: &[&[usize]], axis: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    let first = *shapes
        .first()
        .ok_or_else(|| Error::Usage("concat of zero tensors".into()))?;
    if axis >= first.len() {
        return Err(Error::Usage(format!(
            "concat axis {axis} out of range for rank {}",
            first.len()
        )));
    }
    let mut shape = first.to_vec();
    shape[axis] = 0;
    for s in shapes {
        let compatible = s.len() == first.len()
            && s.iter()
                .zip(first)
                .enumerate()
                .all(|(i, (a, b))| i == axis || a == b);
        if !compatible {
            return Err(Error::dim("concat", first, s));
        }
        shape[axis] += s[axis];
    }
    let inner: usize = first[axis + 1..].iter().product();
    let chunks = shapes.iter().map(|s| s[axis] * inner).collect();
    Ok((shape, chunks))
}

impl PartialEq for Tensor {
    fn eq(&self, other: &Self) -> bool {
        self.shape == other.shape && self.data == other.data
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        const SHOWN: usize = 8;
        write!(f, "Tensor{:?} ", self.shape)?;
        let head: Vec<_> = self.data.iter().take(SHOWN).collect();
        if self.numel() > SHOWN {
            write!(f, "{head:?}..")
        } else {
            write!(f, "{head:?}")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shape_must_match_data() {
        assert!(Tensor::new(&[2, 3], vec![0.0; 5]).is_err());
        assert!(Tensor::new(&[0, 3], vec![]).is_err());
        assert_eq!(Tensor::new(&[2, 3], vec![0.0; 6]).unwrap().numel(), 6);
    }

    #[test]
    fn split_inverts_concat() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = Tensor::randn(&[3, 2, 4], &mut rng);
        let b = Tensor::randn(&[3, 5, 4], &mut rng);
        let c = Tensor::concat(&[&a, &b], 1).unwrap();
        assert_eq!(c.shape(), &[3, 7, 4]);
        let parts = c.split(1, &[2, 5]).unwrap();
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }

    #[test]
    fn concat_rejects_off_axis_mismatch() {
        let a = Tensor::zeros(&[2, 3]);
        let b = Tensor::zeros(&[3, 3]);
        assert!(matches!(
            Tensor::concat(&[&a, &b], 1),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn grad_accumulates() {
        let mut t = Tensor::zeros(&[2]).requires_grad();
        t.accumulate_grad(&[1.0, 2.0]);
        t.accumulate_grad(&[1.0, 2.0]);
        assert_eq!(t.grad().unwrap().data(), &[2.0, 4.0]);
        t.zero_grad();
        assert!(t.grad().is_none());
    }

    #[test]
    fn requires_grad_assigns_distinct_keys() {
        let a = Tensor::zeros(&[1]).requires_grad();
        let b = Tensor::zeros(&[1]).requires_grad();
        assert_ne!(a.key(), b.key());
        assert_eq!(a.clone().key(), a.key());
    }
}
