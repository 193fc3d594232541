use super::Tensor;
use crate::error::{Error, Result};

/// Recorded operation of a non-leaf tensor.
pub(crate) enum Op {
    Add(Tensor, Tensor),
    Sub(Tensor, Tensor),
    Mul(Tensor, Tensor),
    Scale(Tensor, f64),
    AddScalar(Tensor),
    MatMul(Tensor, Tensor),
    Relu(Tensor),
    Exp(Tensor),
    Ln(Tensor),
    Powf(Tensor, f64),
    Square(Tensor),
    Abs(Tensor),
    SoftmaxRows(Tensor),
    LogSoftmaxRows(Tensor),
    SumAxis(Tensor),
    MeanAxis(Tensor, usize),
    Sum(Tensor),
    Mean(Tensor),
    ConcatRows(Vec<Tensor>),
    SelectRows(Tensor, Vec<usize>),
}

impl Op {
    pub(crate) fn inputs(&self) -> Vec<&Tensor> {
        use Op::*;
        match self {
            Add(a, b) | Sub(a, b) | Mul(a, b) | MatMul(a, b) => vec![a, b],
            Scale(a, _)
            | AddScalar(a)
            | Relu(a)
            | Exp(a)
            | Ln(a)
            | Powf(a, _)
            | Square(a)
            | Abs(a)
            | SoftmaxRows(a)
            | LogSoftmaxRows(a)
            | SumAxis(a)
            | MeanAxis(a, _)
            | Sum(a)
            | Mean(a)
            | SelectRows(a, _) => vec![a],
            ConcatRows(parts) => parts.iter().collect(),
        }
    }

    /// Emits `(input, dL/dinput)` pairs given the output's value and gradient.
    pub(crate) fn backward(
        &self,
        out_shape: &[usize],
        out: &[f64],
        grad: &[f64],
        emit: &mut dyn FnMut(&Tensor, Vec<f64>),
    ) {
        use Op::*;
        match self {
            Add(a, b) => {
                emit(a, reduce_to(grad, out_shape, a.shape()));
                emit(b, reduce_to(grad, out_shape, b.shape()));
            }
            Sub(a, b) => {
                emit(a, reduce_to(grad, out_shape, a.shape()));
                let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
                emit(b, reduce_to(&neg, out_shape, b.shape()));
            }
            Mul(a, b) => {
                let (av, bv) = (a.values(), b.values());
                if a.requires_grad() {
                    let bo = broadcast_offsets(b.shape(), out_shape);
                    let ga: Vec<f64> = grad.iter().zip(&bo).map(|(g, &j)| g * bv[j]).collect();
                    emit(a, reduce_to(&ga, out_shape, a.shape()));
                }
                if b.requires_grad() {
                    let ao = broadcast_offsets(a.shape(), out_shape);
                    let gb: Vec<f64> = grad.iter().zip(&ao).map(|(g, &i)| g * av[i]).collect();
                    emit(b, reduce_to(&gb, out_shape, b.shape()));
                }
            }
            Scale(a, c) => emit(a, grad.iter().map(|g| g * c).collect()),
            AddScalar(a) => emit(a, grad.to_vec()),
            MatMul(a, b) => {
                let (m, k) = (a.shape()[0], a.shape()[1]);
                let n = b.shape()[1];
                if a.requires_grad() {
                    // dA = G · Bᵀ
                    let bv = b.values();
                    let mut ga = vec![0.0; m * k];
                    for i in 0..m {
                        for p in 0..k {
                            let mut s = 0.0;
                            for j in 0..n {
                                s += grad[i * n + j] * bv[p * n + j];
                            }
                            ga[i * k + p] = s;
                        }
                    }
                    emit(a, ga);
                }
                if b.requires_grad() {
                    // dB = Aᵀ · G
                    let av = a.values();
                    let mut gb = vec![0.0; k * n];
                    for i in 0..m {
                        for p in 0..k {
                            let aip = av[i * k + p];
                            if aip == 0.0 {
                                continue;
                            }
                            let row = &mut gb[p * n..(p + 1) * n];
                            for (r, g) in row.iter_mut().zip(&grad[i * n..(i + 1) * n]) {
                                *r += aip * g;
                            }
                        }
                    }
                    emit(b, gb);
                }
            }
            Relu(a) => {
                let av = a.values();
                emit(
                    a,
                    grad.iter()
                        .zip(av.iter())
                        .map(|(g, &x)| if x > 0.0 { *g } else { 0.0 })
                        .collect(),
                );
            }
            Exp(a) => emit(a, grad.iter().zip(out).map(|(g, y)| g * y).collect()),
            Ln(a) => {
                let av = a.values();
                emit(a, grad.iter().zip(av.iter()).map(|(g, x)| g / x).collect());
            }
            Powf(a, p) => {
                let av = a.values();
                emit(
                    a,
                    grad.iter()
                        .zip(av.iter())
                        .map(|(g, &x)| g * p * x.powf(p - 1.0))
                        .collect(),
                );
            }
            Square(a) => {
                let av = a.values();
                emit(a, grad.iter().zip(av.iter()).map(|(g, x)| 2.0 * g * x).collect());
            }
            Abs(a) => {
                let av = a.values();
                emit(
                    a,
                    grad.iter()
                        .zip(av.iter())
                        .map(|(g, &x)| if x == 0.0 { 0.0 } else { g * x.signum() })
                        .collect(),
                );
            }
            SoftmaxRows(a) => {
                let cols = *out_shape.last().unwrap();
                let mut ga = vec![0.0; out.len()];
                for ((gr, yr), dst) in grad.chunks(cols).zip(out.chunks(cols)).zip(ga.chunks_mut(cols)) {
                    let dot: f64 = gr.iter().zip(yr).map(|(g, y)| g * y).sum();
                    for ((d, g), y) in dst.iter_mut().zip(gr).zip(yr) {
                        *d = y * (g - dot);
                    }
                }
                emit(a, ga);
            }
            LogSoftmaxRows(a) => {
                let cols = *out_shape.last().unwrap();
                let mut ga = vec![0.0; out.len()];
                for ((gr, yr), dst) in grad.chunks(cols).zip(out.chunks(cols)).zip(ga.chunks_mut(cols)) {
                    let total: f64 = gr.iter().sum();
                    for ((d, g), y) in dst.iter_mut().zip(gr).zip(yr) {
                        *d = g - y.exp() * total;
                    }
                }
                emit(a, ga);
            }
            SumAxis(a) => emit(a, expand_from(grad, out_shape, a.shape(), 1.0)),
            MeanAxis(a, axis) => {
                let n = a.shape()[*axis] as f64;
                emit(a, expand_from(grad, out_shape, a.shape(), 1.0 / n));
            }
            Sum(a) => emit(a, vec![grad[0]; a.numel()]),
            Mean(a) => emit(a, vec![grad[0] / a.numel() as f64; a.numel()]),
            ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = p.numel();
                    emit(p, grad[offset..offset + n].to_vec());
                    offset += n;
                }
            }
            SelectRows(a, idx) => {
                let row = a.numel() / a.shape()[0];
                let mut ga = vec![0.0; a.numel()];
                for (k, &r) in idx.iter().enumerate() {
                    for (d, g) in ga[r * row..(r + 1) * row].iter_mut().zip(&grad[k * row..(k + 1) * row]) {
                        *d += g;
                    }
                }
                emit(a, ga);
            }
        }
    }
}

fn broadcast_shape(op: &'static str, a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => {
                return Err(Error::ShapeMismatch {
                    op,
                    lhs: a.to_vec(),
                    rhs: b.to_vec(),
                })
            }
        };
    }
    Ok(out)
}

/// For each element of `out_shape`, the flat offset of the input element it
/// reads under right-aligned broadcasting.
fn broadcast_offsets(in_shape: &[usize], out_shape: &[usize]) -> Vec<usize> {
    let n: usize = out_shape.iter().product();
    if in_shape == out_shape {
        return (0..n).collect();
    }
    let rank = out_shape.len();
    let pad = rank - in_shape.len();
    // input strides aligned to output axes, 0 where broadcast
    let mut strides = vec![0; rank];
    let mut s = 1;
    for i in (0..in_shape.len()).rev() {
        if in_shape[i] != 1 {
            strides[i + pad] = s;
        }
        s *= in_shape[i];
    }
    let mut offsets = Vec::with_capacity(n);
    let mut idx = vec![0; rank];
    for _ in 0..n {
        offsets.push(idx.iter().zip(&strides).map(|(i, s)| i * s).sum());
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            if idx[ax] < out_shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    offsets
}

/// Sums a gradient of `out_shape` down to a broadcast input of `in_shape`.
fn reduce_to(grad: &[f64], out_shape: &[usize], in_shape: &[usize]) -> Vec<f64> {
    if in_shape == out_shape {
        return grad.to_vec();
    }
    let n: usize = in_shape.iter().product();
    let mut acc = vec![0.0; n];
    for (g, &o) in grad.iter().zip(&broadcast_offsets(in_shape, out_shape)) {
        acc[o] += g;
    }
    acc
}

/// Inverse of a keep-dim reduction: copies each reduced gradient back over
/// the collapsed axis, times `factor`.
fn expand_from(grad: &[f64], out_shape: &[usize], in_shape: &[usize], factor: f64) -> Vec<f64> {
    broadcast_offsets(out_shape, in_shape)
        .into_iter()
        .map(|o| grad[o] * factor)
        .collect()
}

fn elementwise(
    op: &'static str,
    a: &Tensor,
    b: &Tensor,
    f: impl Fn(f64, f64) -> f64,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let shape = broadcast_shape(op, a.shape(), b.shape())?;
    let (av, bv) = (a.values(), b.values());
    let data = if a.shape() == b.shape() {
        av.iter().zip(bv.iter()).map(|(&x, &y)| f(x, y)).collect()
    } else {
        let ao = broadcast_offsets(a.shape(), &shape);
        let bo = broadcast_offsets(b.shape(), &shape);
        ao.iter().zip(&bo).map(|(&i, &j)| f(av[i], bv[j])).collect()
    };
    Ok((shape, data))
}

fn require_matrix(op: &'static str, t: &Tensor) -> Result<(usize, usize)> {
    match t.shape() {
        [r, c] => Ok((*r, *c)),
        s => Err(Error::InvalidShape {
            op,
            msg: format!("expected a 2-d tensor, got {s:?}"),
        }),
    }
}

impl Tensor {
    fn map(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.values().iter().map(|&x| f(x)).collect()
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        let (shape, data) = elementwise("add", self, other, |x, y| x + y)?;
        Ok(Tensor::from_op(shape, data, Op::Add(self.clone(), other.clone())))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        let (shape, data) = elementwise("sub", self, other, |x, y| x - y)?;
        Ok(Tensor::from_op(shape, data, Op::Sub(self.clone(), other.clone())))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor> {
        let (shape, data) = elementwise("mul", self, other, |x, y| x * y)?;
        Ok(Tensor::from_op(shape, data, Op::Mul(self.clone(), other.clone())))
    }

    pub fn scale(&self, c: f64) -> Tensor {
        let data = self.map(|x| x * c);
        Tensor::from_op(self.shape().to_vec(), data, Op::Scale(self.clone(), c))
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        let data = self.map(|x| x + c);
        Tensor::from_op(self.shape().to_vec(), data, Op::AddScalar(self.clone()))
    }

    /// `[m, k] · [k, n] → [m, n]`.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        let (m, k) = require_matrix("matmul", self)?;
        let (k2, n) = require_matrix("matmul", other)?;
        if k != k2 {
            return Err(Error::ShapeMismatch {
                op: "matmul",
                lhs: self.shape().to_vec(),
                rhs: other.shape().to_vec(),
            });
        }
        let (av, bv) = (self.values(), other.values());
        let mut data = vec![0.0; m * n];
        for i in 0..m {
            let out_row = &mut data[i * n..(i + 1) * n];
            for p in 0..k {
                let aip = av[i * k + p];
                for (o, b) in out_row.iter_mut().zip(&bv[p * n..(p + 1) * n]) {
                    *o += aip * b;
                }
            }
        }
        drop((av, bv));
        Ok(Tensor::from_op(
            vec![m, n],
            data,
            Op::MatMul(self.clone(), other.clone()),
        ))
    }

    pub fn relu(&self) -> Tensor {
        let data = self.map(|x| x.max(0.0));
        Tensor::from_op(self.shape().to_vec(), data, Op::Relu(self.clone()))
    }

    pub fn exp(&self) -> Result<Tensor> {
        let data = self.map(f64::exp);
        Ok(Tensor::from_op(self.shape().to_vec(), data, Op::Exp(self.clone())))
    }

    /// Natural log; every element must be strictly positive.
    pub fn ln(&self) -> Result<Tensor> {
        if let Some(bad) = self.values().iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::Domain {
                op: "ln",
                msg: format!("non-positive input {bad}"),
            });
        }
        let data = self.map(f64::ln);
        Ok(Tensor::from_op(self.shape().to_vec(), data, Op::Ln(self.clone())))
    }

    /// Elementwise `x^p`. Non-integer or negative `p` needs positive inputs.
    pub fn powf(&self, p: f64) -> Result<Tensor> {
        let needs_positive = p.fract() != 0.0 || p < 0.0;
        if needs_positive {
            if let Some(bad) = self.values().iter().find(|&&x| !(x > 0.0)) {
                return Err(Error::Domain {
                    op: "powf",
                    msg: format!("input {bad} with exponent {p}"),
                });
            }
        }
        let data = self.map(|x| x.powf(p));
        Ok(Tensor::from_op(self.shape().to_vec(), data, Op::Powf(self.clone(), p)))
    }

    pub fn square(&self) -> Result<Tensor> {
        let data = self.map(|x| x * x);
        Ok(Tensor::from_op(self.shape().to_vec(), data, Op::Square(self.clone())))
    }

    pub fn abs(&self) -> Tensor {
        let data = self.map(f64::abs);
        Tensor::from_op(self.shape().to_vec(), data, Op::Abs(self.clone()))
    }

    /// Softmax over each row of a matrix, shifted by the row maximum.
    pub fn softmax_rows(&self) -> Result<Tensor> {
        let (_, cols) = require_matrix("softmax_rows", self)?;
        let mut data = self.to_vec();
        for row in data.chunks_mut(cols) {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                total += *x;
            }
            row.iter_mut().for_each(|x| *x /= total);
        }
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            Op::SoftmaxRows(self.clone()),
        ))
    }

    pub fn log_softmax_rows(&self) -> Result<Tensor> {
        let (_, cols) = require_matrix("log_softmax_rows", self)?;
        let mut data = self.to_vec();
        for row in data.chunks_mut(cols) {
            let (arg, max) =
                row.iter().copied().enumerate().fold(
                    (0, f64::NEG_INFINITY),
                    |best, (i, x)| if x > best.1 { (i, x) } else { best },
                );
            // log Σ exp(x − max) = ln_1p(Σ_{j≠arg} exp(x_j − max))
            let rest: f64 = row
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != arg)
                .map(|(_, x)| (x - max).exp())
                .sum();
            let shift = rest.ln_1p();
            row.iter_mut().for_each(|x| *x = (*x - max) - shift);
        }
        Ok(Tensor::from_op(
            self.shape().to_vec(),
            data,
            Op::LogSoftmaxRows(self.clone()),
        ))
    }

    fn reduce_axis(&self, op: &'static str, axis: usize) -> Result<(Vec<usize>, Vec<f64>)> {
        if axis >= self.shape().len() {
            return Err(Error::InvalidShape {
                op,
                msg: format!("axis {axis} out of range for shape {:?}", self.shape()),
            });
        }
        let mut out_shape = self.shape().to_vec();
        out_shape[axis] = 1;
        let mut data = vec![0.0; out_shape.iter().product()];
        let offsets = broadcast_offsets(&out_shape, self.shape());
        for (x, &o) in self.values().iter().zip(&offsets) {
            data[o] += x;
        }
        Ok((out_shape, data))
    }

    /// Sum along `axis`, keeping it with size 1.
    pub fn sum_axis(&self, axis: usize) -> Result<Tensor> {
        let (shape, data) = self.reduce_axis("sum_axis", axis)?;
        Ok(Tensor::from_op(shape, data, Op::SumAxis(self.clone())))
    }

    /// Mean along `axis`, keeping it with size 1.
    pub fn mean_axis(&self, axis: usize) -> Result<Tensor> {
        let (shape, mut data) = self.reduce_axis("mean_axis", axis)?;
        let n = self.shape()[axis] as f64;
        data.iter_mut().for_each(|x| *x /= n);
        Ok(Tensor::from_op(shape, data, Op::MeanAxis(self.clone(), axis)))
    }

    pub fn sum(&self) -> Tensor {
        let s = self.values().iter().sum();
        Tensor::from_op(vec![1], vec![s], Op::Sum(self.clone()))
    }

    pub fn mean(&self) -> Tensor {
        let s: f64 = self.values().iter().sum();
        let m = s / self.numel() as f64;
        Tensor::from_op(vec![1], vec![m], Op::Mean(self.clone()))
    }

    /// Concatenation along axis 0; trailing dimensions must agree.
    pub fn concat_rows(parts: &[Tensor]) -> Result<Tensor> {
        let first = parts.first().ok_or_else(|| Error::InvalidShape {
            op: "concat_rows",
            msg: "no inputs".into(),
        })?;
        let tail = &first.shape()[1..];
        let mut rows = 0;
        let mut data = Vec::new();
        for p in parts {
            if &p.shape()[1..] != tail {
                return Err(Error::ShapeMismatch {
                    op: "concat_rows",
                    lhs: first.shape().to_vec(),
                    rhs: p.shape().to_vec(),
                });
            }
            rows += p.shape()[0];
            data.extend_from_slice(&p.values());
        }
        let mut shape = vec![rows];
        shape.extend_from_slice(tail);
        Ok(Tensor::from_op(shape, data, Op::ConcatRows(parts.to_vec())))
    }

    /// Gathers rows (axis 0) by index; indices may repeat.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Tensor> {
        let rows = self.shape()[0];
        if indices.is_empty() {
            return Err(Error::InvalidShape {
                op: "select_rows",
                msg: "empty index list".into(),
            });
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(Error::InvalidShape {
                op: "select_rows",
                msg: format!("row {bad} out of range for {rows} rows"),
            });
        }
        let width = self.numel() / rows;
        let v = self.values();
        let mut data = Vec::with_capacity(indices.len() * width);
        for &i in indices {
            data.extend_from_slice(&v[i * width..(i + 1) * width]);
        }
        drop(v);
        let mut shape = self.shape().to_vec();
        shape[0] = indices.len();
        Ok(Tensor::from_op(
            shape,
            data,
            Op::SelectRows(self.clone(), indices.to_vec()),
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: &[f64]) -> Tensor {
        Tensor::new(shape.to_vec(), v.to_vec()).unwrap()
    }

    #[test]
    fn identity_matmul() {
        let m = t(&[3, 3], &[1.0, -2.0, 3.5, 0.0, 4.0, 9.0, -7.0, 1.5, 2.0]);
        let out = Tensor::eye(3).unwrap().matmul(&m).unwrap();
        assert_eq!(out.to_vec(), m.to_vec());
    }

    #[test]
    fn softmax_of_zeros_is_uniform() {
        let s = t(&[1, 3], &[0.0, 0.0, 0.0]).softmax_rows().unwrap();
        for v in s.to_vec() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_survives_large_logits() {
        let s = t(&[1, 2], &[1000.0, 0.0]).softmax_rows().unwrap().to_vec();
        assert_eq!(s, vec![1.0, 0.0]);
        let ls = t(&[1, 2], &[1000.0, 0.0]).log_softmax_rows().unwrap().to_vec();
        assert_eq!(ls, vec![0.0, -1000.0]);
    }

    #[test]
    fn relu_definition() {
        assert_eq!(t(&[3], &[-2.0, 0.0, 5.0]).relu().to_vec(), vec![0.0, 0.0, 5.0]);
    }

    #[test]
    fn shape_mismatch_names_both_shapes() {
        let err = t(&[2, 3], &[0.0; 6]).add(&t(&[3, 2], &[0.0; 6])).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("[2, 3]") && msg.contains("[3, 2]"), "{msg}");
        let err = t(&[2, 3], &[0.0; 6]).matmul(&t(&[2, 3], &[0.0; 6])).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { op: "matmul", .. }));
    }

    #[test]
    fn log_rejects_non_positive() {
        assert!(matches!(t(&[2], &[1.0, 0.0]).ln(), Err(Error::Domain { op: "ln", .. })));
        assert!(t(&[1], &[-1.0]).ln().is_err());
    }

    #[test]
    fn broadcasting_row_and_scalar() {
        let x = t(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let r = t(&[1, 2], &[10.0, 20.0]);
        assert_eq!(x.add(&r).unwrap().to_vec(), vec![11.0, 22.0, 13.0, 24.0]);
        let s = t(&[1], &[2.0]);
        assert_eq!(x.mul(&s).unwrap().to_vec(), vec![2.0, 4.0, 6.0, 8.0]);
        let v = t(&[2], &[1.0, -1.0]);
        assert_eq!(x.sub(&v).unwrap().to_vec(), vec![0.0, 3.0, 2.0, 5.0]);
    }

    #[test]
    fn reductions_keep_dims() {
        let x = t(&[2, 3], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let s0 = x.sum_axis(0).unwrap();
        assert_eq!(s0.shape(), &[1, 3]);
        assert_eq!(s0.to_vec(), vec![5.0, 7.0, 9.0]);
        let m1 = x.mean_axis(1).unwrap();
        assert_eq!(m1.shape(), &[2, 1]);
        assert_eq!(m1.to_vec(), vec![2.0, 5.0]);
        assert!(x.sum_axis(2).is_err());
    }

    #[test]
    fn concat_and_select() {
        let a = t(&[1, 2], &[1.0, 2.0]);
        let b = t(&[2, 2], &[3.0, 4.0, 5.0, 6.0]);
        let c = Tensor::concat_rows(&[a, b]).unwrap();
        assert_eq!(c.shape(), &[3, 2]);
        let s = c.select_rows(&[2, 0, 2]).unwrap();
        assert_eq!(s.to_vec(), vec![5.0, 6.0, 1.0, 2.0, 5.0, 6.0]);
        assert!(c.select_rows(&[3]).is_err());
        assert!(Tensor::concat_rows(&[t(&[1, 2], &[0.0; 2]), t(&[1, 3], &[0.0; 3])]).is_err());
    }

    #[test]
    fn select_rows_accumulates_duplicate_grads() {
        let x = Tensor::param(vec![2, 1], vec![1.0, 2.0]).unwrap();
        x.select_rows(&[1, 1, 0]).unwrap().sum().backward().unwrap();
        assert_eq!(x.grad().unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn forward_is_bitwise_deterministic() {
        let a = t(
            &[3, 4],
            &[0.1, -0.7, 2.3, 1.1, 0.5, 0.25, -3.0, 9.0, 1e-3, 7.7, -0.2, 0.9],
        );
        let b = t(&[4, 2], &[1.3, 0.2, -0.4, 0.8, 2.0, -1.0, 0.6, 0.05]);
        let run = || {
            a.matmul(&b)
                .unwrap()
                .softmax_rows()
                .unwrap()
                .ln()
                .unwrap()
                .mean_axis(0)
                .unwrap()
                .to_vec()
        };
        let (x, y) = (run(), run());
        assert!(x.iter().zip(&y).all(|(p, q)| p.to_bits() == q.to_bits()));
    }
}
