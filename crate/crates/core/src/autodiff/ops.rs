//! Differentiable ops on [`Var`].
//!
//! Shapes must match exactly; the only broadcast is [`Var::add_bias`], which
//! adds a vector along the last axis.

use super::kernels::{axis_split, col2im, gemm, im2col, sigmoid, ConvGeometry, Layout};
use super::Var;
use crate::error::{Error, Result};
use crate::tensor::{concat_layout, Tensor};

fn same_shape(op: &'static str, a: &Tensor, b: &Tensor) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::dim(op, a.shape(), b.shape()));
    }
    Ok(())
}

impl<'t> Var<'t> {
    pub fn matmul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        let (a, b) = (&self.value, &other.value);
        if a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0] {
            return Err(Error::dim("matmul", a.shape(), b.shape()));
        }
        let (m, k, n) = (a.shape()[0], a.shape()[1], b.shape()[1]);
        let mut c = vec![0.0; m * n];
        gemm(m, k, n, a.data(), Layout::Normal, b.data(), Layout::Normal, &mut c, false);
        let (a, b) = (a.clone(), b.clone());
        Ok(self.tape.record(Tensor::raw(vec![m, n], c), &[self, other], move |g, needs| {
            let ga = needs[0].then(|| {
                let mut out = vec![0.0; m * k];
                gemm(m, n, k, g, Layout::Normal, b.data(), Layout::Transposed, &mut out, false);
                out
            });
            let gb = needs[1].then(|| {
                let mut out = vec![0.0; k * n];
                gemm(k, m, n, a.data(), Layout::Transposed, g, Layout::Normal, &mut out, false);
                out
            });
            vec![ga, gb]
        }))
    }

    pub fn add(&self, other: &Var<'t>) -> Result<Var<'t>> {
        same_shape("add", &self.value, &other.value)?;
        let out: Vec<f64> = self.data().iter().zip(other.data()).map(|(a, b)| a + b).collect();
        let value = Tensor::raw(self.shape().to_vec(), out);
        Ok(self.tape.record(value, &[self, other], |g, needs| {
            vec![needs[0].then(|| g.to_vec()), needs[1].then(|| g.to_vec())]
        }))
    }

    pub fn sub(&self, other: &Var<'t>) -> Result<Var<'t>> {
        same_shape("sub", &self.value, &other.value)?;
        let out: Vec<f64> = self.data().iter().zip(other.data()).map(|(a, b)| a - b).collect();
        let value = Tensor::raw(self.shape().to_vec(), out);
        Ok(self.tape.record(value, &[self, other], |g, needs| {
            vec![
                needs[0].then(|| g.to_vec()),
                needs[1].then(|| g.iter().map(|x| -x).collect()),
            ]
        }))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&self, other: &Var<'t>) -> Result<Var<'t>> {
        same_shape("mul", &self.value, &other.value)?;
        let out: Vec<f64> = self.data().iter().zip(other.data()).map(|(a, b)| a * b).collect();
        let value = Tensor::raw(self.shape().to_vec(), out);
        let (a, b) = (self.value.clone(), other.value.clone());
        Ok(self.tape.record(value, &[self, other], move |g, needs| {
            let ga = needs[0].then(|| g.iter().zip(b.data()).map(|(g, b)| g * b).collect());
            let gb = needs[1].then(|| g.iter().zip(a.data()).map(|(g, a)| g * a).collect());
            vec![ga, gb]
        }))
    }

    /// Adds `bias` (length = last dim) to every leading-axis slice.
    pub fn add_bias(&self, bias: &Var<'t>) -> Result<Var<'t>> {
        let n = *self.shape().last().unwrap_or(&1);
        if bias.value.ndim() != 1 || bias.value.numel() != n || self.value.ndim() == 0 {
            return Err(Error::dim("add_bias", self.shape(), bias.shape()));
        }
        let b = bias.data();
        let out: Vec<f64> = self
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| x + b[i % n])
            .collect();
        let value = Tensor::raw(self.shape().to_vec(), out);
        Ok(self.tape.record(value, &[self, bias], move |g, needs| {
            let gb = needs[1].then(|| {
                let mut acc = vec![0.0; n];
                for row in g.chunks_exact(n) {
                    acc.iter_mut().zip(row).for_each(|(a, r)| *a += r);
                }
                acc
            });
            vec![needs[0].then(|| g.to_vec()), gb]
        }))
    }

    pub fn scale(&self, factor: f64) -> Var<'t> {
        let value = self.value.map(|x| x * factor);
        self.tape.record(value, &[self], move |g, _| {
            vec![Some(g.iter().map(|x| x * factor).collect())]
        })
    }

    pub fn sum(&self) -> Var<'t> {
        let n = self.value.numel();
        let value = Tensor::scalar(self.data().iter().sum());
        self.tape.record(value, &[self], move |g, _| vec![Some(vec![g[0]; n])])
    }

    pub fn mean(&self) -> Var<'t> {
        let n = self.value.numel();
        let value = Tensor::scalar(self.data().iter().sum::<f64>() / n as f64);
        self.tape
            .record(value, &[self], move |g, _| vec![Some(vec![g[0] / n as f64; n])])
    }

    pub fn relu(&self) -> Var<'t> {
        let x = self.value.clone();
        self.tape.record(self.value.map(|v| v.max(0.0)), &[self], move |g, _| {
            let gx = g
                .iter()
                .zip(x.data())
                .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                .collect();
            vec![Some(gx)]
        })
    }

    pub fn sigmoid(&self) -> Var<'t> {
        let y = self.value.map(sigmoid);
        let saved = y.clone();
        self.tape.record(y, &[self], move |g, _| {
            let gx = g
                .iter()
                .zip(saved.data())
                .map(|(g, y)| g * y * (1.0 - y))
                .collect();
            vec![Some(gx)]
        })
    }

    /// Softmax along `axis`, computed after subtracting each slice's maximum.
    pub fn softmax(&self, axis: usize) -> Result<Var<'t>> {
        if axis >= self.value.ndim() {
            return Err(Error::Usage(format!(
                "softmax axis {axis} out of range for shape {:?}",
                self.shape()
            )));
        }
        let (outer, len, inner) = axis_split(self.shape(), axis);
        let x = self.data();
        let mut y = vec![0.0; x.len()];
        for o in 0..outer {
            for i in 0..inner {
                let at = |j: usize| o * len * inner + j * inner + i;
                let max = (0..len).map(|j| x[at(j)]).fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for j in 0..len {
                    let e = (x[at(j)] - max).exp();
                    y[at(j)] = e;
                    total += e;
                }
                for j in 0..len {
                    y[at(j)] /= total;
                }
            }
        }
        let y = Tensor::raw(self.shape().to_vec(), y);
        let saved = y.clone();
        Ok(self.tape.record(y, &[self], move |g, _| {
            let y = saved.data();
            let mut gx = vec![0.0; y.len()];
            for o in 0..outer {
                for i in 0..inner {
                    let at = |j: usize| o * len * inner + j * inner + i;
                    let dot: f64 = (0..len).map(|j| g[at(j)] * y[at(j)]).sum();
                    for j in 0..len {
                        gx[at(j)] = y[at(j)] * (g[at(j)] - dot);
                    }
                }
            }
            vec![Some(gx)]
        }))
    }

    pub fn transpose(&self) -> Result<Var<'t>> {
        if self.value.ndim() != 2 {
            return Err(Error::dim("transpose", self.shape(), &[]));
        }
        let (m, n) = (self.shape()[0], self.shape()[1]);
        Ok(self.tape.record(self.value.transpose(), &[self], move |g, _| {
            let mut gx = vec![0.0; m * n];
            for i in 0..m {
                for j in 0..n {
                    gx[i * n + j] = g[j * m + i];
                }
            }
            vec![Some(gx)]
        }))
    }

    pub fn reshape(&self, shape: &[usize]) -> Result<Var<'t>> {
        let value = self.value.reshape(shape)?;
        Ok(self.tape.record(value, &[self], |g, _| vec![Some(g.to_vec())]))
    }

    /// Normalises the last axis to zero mean and unit variance, then applies `gain` and `bias`.
    pub fn layer_norm(&self, gain: &Var<'t>, bias: &Var<'t>, eps: f64) -> Result<Var<'t>> {
        let d = *self.shape().last().unwrap_or(&0);
        if self.value.ndim() == 0 || gain.shape() != [d] || bias.shape() != [d] {
            return Err(Error::dim("layer_norm", self.shape(), gain.shape()));
        }
        if eps <= 0.0 {
            return Err(Error::Config("layer_norm eps must be positive".into()));
        }
        let rows = self.value.numel() / d;
        let x = self.data();
        let mut xhat = vec![0.0; x.len()];
        let mut inv_std = vec![0.0; rows];
        for r in 0..rows {
            let row = &x[r * d..(r + 1) * d];
            let mean = row.iter().sum::<f64>() / d as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
            let s = 1.0 / (var + eps).sqrt();
            inv_std[r] = s;
            for (o, v) in xhat[r * d..(r + 1) * d].iter_mut().zip(row) {
                *o = (v - mean) * s;
            }
        }
        let (gn, bs) = (gain.data(), bias.data());
        let out: Vec<f64> = xhat
            .iter()
            .enumerate()
            .map(|(i, v)| v * gn[i % d] + bs[i % d])
            .collect();
        let value = Tensor::raw(self.shape().to_vec(), out);
        let gain_saved = gain.value.clone();
        Ok(self.tape.record(value, &[self, gain, bias], move |g, needs| {
            let gn = gain_saved.data();
            let gx = needs[0].then(|| {
                let mut gx = vec![0.0; xhat.len()];
                for r in 0..rows {
                    let span = r * d..(r + 1) * d;
                    let (g, xh) = (&g[span.clone()], &xhat[span.clone()]);
                    let dxh: Vec<f64> = g.iter().enumerate().map(|(j, g)| g * gn[j]).collect();
                    let mean_dxh = dxh.iter().sum::<f64>() / d as f64;
                    let mean_dxh_xh =
                        dxh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
                    for (j, o) in gx[span].iter_mut().enumerate() {
                        *o = inv_std[r] * (dxh[j] - mean_dxh - xh[j] * mean_dxh_xh);
                    }
                }
                gx
            });
            let ggain = needs[1].then(|| {
                let mut acc = vec![0.0; d];
                for (i, (g, xh)) in g.iter().zip(&xhat).enumerate() {
                    acc[i % d] += g * xh;
                }
                acc
            });
            let gbias = needs[2].then(|| {
                let mut acc = vec![0.0; d];
                for (i, g) in g.iter().enumerate() {
                    acc[i % d] += g;
                }
                acc
            });
            vec![gx, ggain, gbias]
        }))
    }

    pub fn concat(parts: &[Var<'t>], axis: usize) -> Result<Var<'t>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Usage("concat of zero tensors".into()))?;
        let values: Vec<&Tensor> = parts.iter().map(|p| &p.value).collect();
        let shapes: Vec<&[usize]> = values.iter().map(|v| v.shape()).collect();
        let (_, chunks) = concat_layout(&shapes, axis)?;
        let value = Tensor::concat(&values, axis)?;
        let outer: usize = value.shape()[..axis].iter().product();
        let inputs: Vec<&Var<'t>> = parts.iter().collect();
        Ok(first.tape.record(value, &inputs, move |g, needs| {
            let row: usize = chunks.iter().sum();
            let mut offset = 0;
            let mut out = Vec::with_capacity(chunks.len());
            for (&chunk, &need) in chunks.iter().zip(needs) {
                if need {
                    let mut gp = Vec::with_capacity(outer * chunk);
                    for o in 0..outer {
                        gp.extend_from_slice(&g[o * row + offset..o * row + offset + chunk]);
                    }
                    out.push(Some(gp));
                } else {
                    out.push(None);
                }
                offset += chunk;
            }
            out
        }))
    }

    /// The sub-range `start..start + len` along `axis`.
    pub fn narrow(&self, axis: usize, start: usize, len: usize) -> Result<Var<'t>> {
        if axis >= self.value.ndim() || len == 0 || start + len > self.shape()[axis] {
            return Err(Error::dim("narrow", self.shape(), &[axis, start, len]));
        }
        let (outer, full, inner) = axis_split(self.shape(), axis);
        let x = self.data();
        let mut out = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = (o * full + start) * inner;
            out.extend_from_slice(&x[base..base + len * inner]);
        }
        let mut shape = self.shape().to_vec();
        shape[axis] = len;
        let n = x.len();
        Ok(self.tape.record(Tensor::raw(shape, out), &[self], move |g, _| {
            let mut gx = vec![0.0; n];
            for o in 0..outer {
                let base = (o * full + start) * inner;
                gx[base..base + len * inner]
                    .copy_from_slice(&g[o * len * inner..(o + 1) * len * inner]);
            }
            vec![Some(gx)]
        }))
    }

    /// Mean squared error, a scalar.
    pub fn mse(&self, other: &Var<'t>) -> Result<Var<'t>> {
        same_shape("mse", &self.value, &other.value)?;
        let n = self.value.numel() as f64;
        let diff: Vec<f64> = self.data().iter().zip(other.data()).map(|(a, b)| a - b).collect();
        let value = Tensor::scalar(diff.iter().map(|d| d * d).sum::<f64>() / n);
        Ok(self.tape.record(value, &[self, other], move |g, needs| {
            let k = 2.0 * g[0] / n;
            vec![
                needs[0].then(|| diff.iter().map(|d| k * d).collect()),
                needs[1].then(|| diff.iter().map(|d| -k * d).collect()),
            ]
        }))
    }

    /// Cross-correlation of an H×W×C input with kh×kw×C×Cout kernels.
    pub fn conv2d(&self, kernels: &Var<'t>, stride: usize, pad: usize) -> Result<Var<'t>> {
        let (x, k) = (&self.value, &kernels.value);
        if x.ndim() != 3 || k.ndim() != 4 || x.shape()[2] != k.shape()[2] || stride == 0 {
            return Err(Error::dim("conv2d", x.shape(), k.shape()));
        }
        let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (kh, kw, cout) = (k.shape()[0], k.shape()[1], k.shape()[3]);
        if kh > h + 2 * pad || kw > w + 2 * pad {
            return Err(Error::dim("conv2d", x.shape(), k.shape()));
        }
        let geo = ConvGeometry {
            h,
            w,
            c,
            kh,
            kw,
            stride,
            pad,
            out_h: (h + 2 * pad - kh) / stride + 1,
            out_w: (w + 2 * pad - kw) / stride + 1,
        };
        let cols = im2col(x.data(), &geo);
        let (p, q) = (geo.positions(), geo.patch_len());
        let mut out = vec![0.0; p * cout];
        gemm(p, q, cout, &cols, Layout::Normal, k.data(), Layout::Normal, &mut out, false);
        let value = Tensor::raw(vec![geo.out_h, geo.out_w, cout], out);
        let k = k.clone();
        Ok(self.tape.record(value, &[self, kernels], move |g, needs| {
            let gx = needs[0].then(|| {
                let mut gcols = vec![0.0; p * q];
                gemm(p, cout, q, g, Layout::Normal, k.data(), Layout::Transposed, &mut gcols, false);
                col2im(&gcols, &geo)
            });
            let gk = needs[1].then(|| {
                let mut gk = vec![0.0; q * cout];
                gemm(q, p, cout, &cols, Layout::Transposed, g, Layout::Normal, &mut gk, false);
                gk
            });
            vec![gx, gk]
        }))
    }

    /// Per-window maximum over H×W×C; ties go to the first element in row-major order.
    pub fn maxpool2d(&self, window: usize, stride: usize) -> Result<Var<'t>> {
        let x = &self.value;
        if x.ndim() != 3 || window == 0 || stride == 0 {
            return Err(Error::dim("maxpool2d", x.shape(), &[window, stride]));
        }
        let (h, w, c) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        if window > h || window > w {
            return Err(Error::dim("maxpool2d", x.shape(), &[window, window]));
        }
        let (oh, ow) = ((h - window) / stride + 1, (w - window) / stride + 1);
        let data = x.data();
        let mut out = vec![0.0; oh * ow * c];
        let mut argmax = vec![0usize; oh * ow * c];
        for oy in 0..oh {
            for ox in 0..ow {
                for ch in 0..c {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_at = 0;
                    for dy in 0..window {
                        for dx in 0..window {
                            let at = ((oy * stride + dy) * w + ox * stride + dx) * c + ch;
                            if data[at] > best {
                                best = data[at];
                                best_at = at;
                            }
                        }
                    }
                    let o = (oy * ow + ox) * c + ch;
                    out[o] = best;
                    argmax[o] = best_at;
                }
            }
        }
        let n = data.len();
        let value = Tensor::raw(vec![oh, ow, c], out);
        Ok(self.tape.record(value, &[self], move |g, _| {
            vec![Some(scatter(n, &argmax, g))]
        }))
    }

    /// Per-channel maximum over the spatial axes of H×W×C.
    pub fn global_maxpool(&self) -> Result<Var<'t>> {
        let x = &self.value;
        if x.ndim() != 3 {
            return Err(Error::dim("global_maxpool", x.shape(), &[]));
        }
        let c = x.shape()[2];
        let mut out = vec![f64::NEG_INFINITY; c];
        let mut argmax = vec![0usize; c];
        for (i, &v) in x.data().iter().enumerate() {
            if v > out[i % c] {
                out[i % c] = v;
                argmax[i % c] = i;
            }
        }
        let n = x.numel();
        Ok(self.tape.record(Tensor::raw(vec![c], out), &[self], move |g, _| {
            vec![Some(scatter(n, &argmax, g))]
        }))
    }

    /// Per-channel mean over the spatial axes of H×W×C.
    pub fn global_avgpool(&self) -> Result<Var<'t>> {
        let x = &self.value;
        if x.ndim() != 3 {
            return Err(Error::dim("global_avgpool", x.shape(), &[]));
        }
        let c = x.shape()[2];
        let positions = (x.numel() / c) as f64;
        let mut out = vec![0.0; c];
        for (i, v) in x.data().iter().enumerate() {
            out[i % c] += v;
        }
        out.iter_mut().for_each(|v| *v /= positions);
        let n = x.numel();
        Ok(self.tape.record(Tensor::raw(vec![c], out), &[self], move |g, _| {
            vec![Some((0..n).map(|i| g[i % c] / positions).collect())]
        }))
    }

    /// Mean over the rows of a T×d tensor whose `mask` entry is set.
    pub fn masked_mean_rows(&self, mask: &[bool]) -> Result<Var<'t>> {
        let x = &self.value;
        if x.ndim() != 2 || mask.len() != x.shape()[0] {
            return Err(Error::dim("masked_mean_rows", x.shape(), &[mask.len()]));
        }
        let (t, d) = (x.shape()[0], x.shape()[1]);
        let valid = mask.iter().filter(|&&m| m).count();
        if valid == 0 {
            return Err(Error::Input("masked mean over zero valid rows".into()));
        }
        let k = 1.0 / valid as f64;
        let mut out = vec![0.0; d];
        for (r, row) in x.data().chunks_exact(d).enumerate() {
            if mask[r] {
                out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
            }
        }
        out.iter_mut().for_each(|v| *v *= k);
        let mask = mask.to_vec();
        Ok(self.tape.record(Tensor::raw(vec![d], out), &[self], move |g, _| {
            let mut gx = vec![0.0; t * d];
            for (r, row) in gx.chunks_exact_mut(d).enumerate() {
                if mask[r] {
                    row.iter_mut().zip(g).for_each(|(o, g)| *o = g * k);
                }
            }
            vec![Some(gx)]
        }))
    }
}

fn scatter(n: usize, positions: &[usize], g: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (&at, g) in positions.iter().zip(g) {
        out[at] += g;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::Tape;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::new(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn matmul_identity_and_hand_product() {
        let tape = Tape::no_grad();
        let a = tape.constant(t(&[2, 2], &[1., 2., 3., 4.]));
        let id = tape.constant(Tensor::eye(2));
        assert_eq!(a.matmul(&id).unwrap().data(), &[1., 2., 3., 4.]);
        let b = tape.constant(t(&[2, 1], &[5., 6.]));
        assert_eq!(a.matmul(&b).unwrap().data(), &[17., 39.]);
    }

    #[test]
    fn matmul_shape_error_names_both_shapes() {
        let tape = Tape::no_grad();
        let a = tape.constant(Tensor::zeros(&[2, 3]));
        let b = tape.constant(Tensor::zeros(&[2, 3]));
        let err = a.matmul(&b).unwrap_err();
        assert!(err.to_string().contains("[2, 3]"));
        assert!(matches!(err, Error::Dimension { .. }));
    }

    #[test]
    fn matmul_sum_gradient() {
        // d/dA sum(A·B) = 1·Bᵀ: every row is the row-sums of B.
        let tape = Tape::new();
        let a = tape.leaf(Tensor::eye(2));
        let b = tape.constant(t(&[2, 2], &[2., 3., 4., 5.]));
        let g = tape.backward(&a.matmul(&b).unwrap().sum()).unwrap();
        assert_eq!(g.wrt(&a).unwrap().data(), &[5., 9., 5., 9.]);
    }

    #[test]
    fn softmax_examples() {
        let tape = Tape::no_grad();
        let s = tape.constant(Tensor::zeros(&[4])).softmax(0).unwrap();
        assert_eq!(s.data(), &[0.25; 4]);
        let s = tape.constant(Tensor::vector(vec![1000.0, 0.0])).softmax(0).unwrap();
        assert!((s.data()[0] - 1.0).abs() < 1e-12 && s.data()[1] < 1e-12);
        let s = tape.constant(Tensor::vector(vec![1., 2., 3.])).softmax(0).unwrap();
        for (got, want) in s.data().iter().zip([0.0900, 0.2447, 0.6652]) {
            assert!((got - want).abs() < 1e-4);
        }
    }

    #[test]
    fn softmax_over_middle_axis_normalises_slices() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let tape = Tape::no_grad();
        let s = tape
            .constant(Tensor::randn(&[2, 3, 4], &mut rng).map(|x| 40.0 * x))
            .softmax(1)
            .unwrap();
        for o in 0..2 {
            for i in 0..4 {
                let total: f64 = (0..3).map(|j| s.value().get(&[o, j, i])).sum();
                assert!((total - 1.0).abs() < 1e-9);
            }
        }
        assert!(s.data().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn sigmoid_examples() {
        let tape = Tape::no_grad();
        let s = tape
            .constant(Tensor::vector(vec![0.0, -1000.0, 1.0]))
            .sigmoid();
        assert_eq!(s.data()[0], 0.5);
        assert!(s.data()[1] < 1e-12);
        assert!((s.data()[2] - 0.7310586).abs() < 1e-6);
    }

    #[test]
    fn conv_identity_kernel_and_strided_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tape = Tape::no_grad();
        let x = Tensor::randn(&[3, 3, 1], &mut rng);
        let k = tape.constant(Tensor::ones(&[1, 1, 1, 1]));
        let y = tape.constant(x.clone()).conv2d(&k, 1, 0).unwrap();
        assert_eq!(y.value(), &x);

        let ones = tape.constant(Tensor::ones(&[4, 4, 1]));
        let k = tape.constant(Tensor::ones(&[2, 2, 1, 1]));
        let y = ones.conv2d(&k, 2, 0).unwrap();
        assert_eq!(y.shape(), &[2, 2, 1]);
        assert_eq!(y.data(), &[4.0; 4]);
    }

    #[test]
    fn conv_output_size_with_padding() {
        let tape = Tape::no_grad();
        let x = tape.constant(Tensor::ones(&[5, 7, 2]));
        let k = tape.constant(Tensor::ones(&[3, 3, 2, 4]));
        let y = x.conv2d(&k, 2, 1).unwrap();
        assert_eq!(y.shape(), &[3, 4, 4]);
        // Corner window sees 2×2 real pixels × 2 channels.
        assert_eq!(y.value().get(&[0, 0, 0]), 8.0);
    }

    #[test]
    fn conv_kernel_larger_than_input_is_dimension_error() {
        let tape = Tape::no_grad();
        let x = tape.constant(Tensor::ones(&[2, 2, 1]));
        let k = tape.constant(Tensor::ones(&[3, 3, 1, 1]));
        assert!(matches!(x.conv2d(&k, 1, 0), Err(Error::Dimension { .. })));
        assert!(x.conv2d(&k, 1, 1).is_ok());
    }

    #[test]
    fn maxpool_examples() {
        let tape = Tape::no_grad();
        let c = tape.constant(Tensor::full(&[4, 4, 2], 3.5)).maxpool2d(2, 2).unwrap();
        assert_eq!(c.data(), &[3.5; 8]);
        let x = tape.constant(t(&[2, 2, 1], &[1., 2., 3., 4.]));
        assert_eq!(x.maxpool2d(2, 2).unwrap().data(), &[4.0]);
        assert!(matches!(x.maxpool2d(3, 1), Err(Error::Dimension { .. })));
    }

    #[test]
    fn maxpool_gradient_goes_to_first_maximum() {
        let tape = Tape::new();
        let x = tape.leaf(t(&[2, 2, 1], &[7., 7., 1., 7.]));
        let g = tape.backward(&x.maxpool2d(2, 2).unwrap().sum()).unwrap();
        assert_eq!(g.wrt(&x).unwrap().data(), &[1., 0., 0., 0.]);
    }

    #[test]
    fn global_maxpool_examples() {
        let tape = Tape::no_grad();
        let v = tape.constant(t(&[1, 1, 3], &[0.5, -1., 2.]));
        assert_eq!(v.global_maxpool().unwrap().data(), &[0.5, -1., 2.]);
        // channel 0 plane [[1,5],[3,2]], channel 1 all zero
        let x = tape.constant(t(&[2, 2, 2], &[1., 0., 5., 0., 3., 0., 2., 0.]));
        assert_eq!(x.global_maxpool().unwrap().data()[0], 5.0);
    }

    #[test]
    fn global_maxpool_matches_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::randn(&[7, 9, 4], &mut rng);
        let tape = Tape::no_grad();
        let got = tape.constant(x.clone()).global_maxpool().unwrap();
        for c in 0..4 {
            let mut best = f64::NEG_INFINITY;
            for i in 0..7 {
                for j in 0..9 {
                    best = best.max(x.get(&[i, j, c]));
                }
            }
            assert_eq!(got.data()[c], best);
        }
    }

    #[test]
    fn layer_norm_examples() {
        let tape = Tape::no_grad();
        let gain = tape.constant(Tensor::ones(&[3]));
        let bias = tape.constant(Tensor::zeros(&[3]));
        let y = tape
            .constant(Tensor::full(&[3], 4.2))
            .layer_norm(&gain, &bias, 1e-6)
            .unwrap();
        assert_eq!(y.data(), &[0.0; 3]);
        let gain = tape.constant(Tensor::ones(&[2]));
        let bias = tape.constant(Tensor::zeros(&[2]));
        let y = tape
            .constant(Tensor::vector(vec![1.0, 3.0]))
            .layer_norm(&gain, &bias, 1e-6)
            .unwrap();
        assert!((y.data()[0] + 1.0).abs() < 1e-3 && (y.data()[1] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn concat_widths_and_single_part() {
        let tape = Tape::no_grad();
        let parts: Vec<_> = [512, 2048, 768, 768]
            .iter()
            .map(|&n| tape.constant(Tensor::zeros(&[n])))
            .collect();
        assert_eq!(Var::concat(&parts, 0).unwrap().shape(), &[4096]);
        let x = tape.constant(Tensor::vector(vec![1., 2.]));
        assert_eq!(Var::concat(&[x.clone()], 0).unwrap().value(), x.value());
        let bad = tape.constant(Tensor::zeros(&[2, 2]));
        assert!(Var::concat(&[x, bad], 0).is_err());
    }

    #[test]
    fn concat_gradient_splits_back() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(&[2, 1]));
        let b = tape.leaf(Tensor::zeros(&[2, 2]));
        let w = tape.constant(t(&[2, 3], &[1., 2., 3., 4., 5., 6.]));
        let loss = Var::concat(&[a.clone(), b.clone()], 1).unwrap().mul(&w).unwrap().sum();
        let g = tape.backward(&loss).unwrap();
        assert_eq!(g.wrt(&a).unwrap().data(), &[1., 4.]);
        assert_eq!(g.wrt(&b).unwrap().data(), &[2., 3., 5., 6.]);
    }

    #[test]
    fn narrow_recovers_concat_parts() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let tape = Tape::no_grad();
        let a = Tensor::randn(&[3, 2], &mut rng);
        let b = Tensor::randn(&[3, 5], &mut rng);
        let c = Var::concat(&[tape.constant(a.clone()), tape.constant(b.clone())], 1).unwrap();
        assert_eq!(c.narrow(1, 0, 2).unwrap().value(), &a);
        assert_eq!(c.narrow(1, 2, 5).unwrap().value(), &b);
    }

    #[test]
    fn mse_examples() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::vector(vec![0.0, 0.0]));
        let b = tape.constant(Tensor::vector(vec![3.0, 4.0]));
        let loss = a.mse(&b).unwrap();
        assert_eq!(loss.value().item(), 12.5);
        let g = tape.backward(&loss).unwrap();
        assert_eq!(g.wrt(&a).unwrap().data(), &[-3.0, -4.0]);
        assert_eq!(a.mse(&a).unwrap().value().item(), 0.0);
        let c = tape.constant(Tensor::zeros(&[3]));
        assert!(matches!(a.mse(&c), Err(Error::Dimension { .. })));
    }

    #[test]
    fn masked_mean_ignores_padding() {
        let tape = Tape::no_grad();
        let x = tape.constant(t(&[3, 2], &[1., 2., 3., 4., 100., 100.]));
        let m = x.masked_mean_rows(&[true, true, false]).unwrap();
        assert_eq!(m.data(), &[2., 3.]);
        assert!(x.masked_mean_rows(&[false; 3]).is_err());
    }

    #[test]
    fn add_bias_broadcasts_over_rows() {
        let tape = Tape::new();
        let x = tape.leaf(Tensor::zeros(&[3, 2]));
        let b = tape.leaf(Tensor::vector(vec![1.0, -1.0]));
        let y = x.add_bias(&b).unwrap();
        assert_eq!(y.data(), &[1., -1., 1., -1., 1., -1.]);
        let g = tape.backward(&y.sum()).unwrap();
        assert_eq!(g.wrt(&b).unwrap().data(), &[3.0, 3.0]);
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = Tensor::randn(&[17, 33], &mut rng);
        let b = Tensor::randn(&[33, 9], &mut rng);
        let run = || {
            let tape = Tape::no_grad();
            tape.constant(a.clone())
                .matmul(&tape.constant(b.clone()))
                .unwrap()
                .softmax(1)
                .unwrap()
                .value()
                .clone()
        };
        let (x, y) = (run(), run());
        assert!(x.data().iter().zip(y.data()).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
