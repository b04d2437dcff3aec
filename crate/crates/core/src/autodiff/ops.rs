//! Differentiable operations.
//!
//! Every op validates operand shapes, computes its forward value eagerly and
//! records itself on the graph. The matching backward rule lives in
//! [`backward_op`]. For complex tensors the incoming gradient `g` packs
//! `dL/dRe + i dL/dIm`; with that convention a holomorphic map `w = f(z)`
//! propagates as `g_z = conj(f'(z)) * g_w`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use super::graph::{Graph, Var};
use super::tensor::{split_axis, Data, Dtype, Tensor};
use crate::error::{Error, Result};

pub(crate) enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MulBcast(usize, usize),
    MulScalar(usize, usize),
    Affine(usize, f64),
    Recip(usize),
    Exp(usize),
    Log(usize),
    Sqrt(usize),
    Sigmoid(usize),
    Relu(usize),
    Clamp(usize, f64, f64),
    NormalCdf(usize),
    Magnitude(usize),
    RealPart(usize),
    ImagPart(usize),
    SumAll(usize),
    SumAxis(usize, usize),
    L2Norm(usize),
    Softmax(usize),
    MatMul(usize, usize),
    VecMat(usize, usize),
    Idft(usize, usize),
    Gather(usize, usize, Vec<usize>),
    Reshape(usize),
    SwapLast2(usize),
    Conv2d(usize, usize, usize),
    AvgPool2(usize),
    Upsample2(usize),
    Concat(usize, usize),
    Pad2d(usize),
    Crop2d(usize),
    MaxAll(usize, usize),
    PhaseRamp(usize, Arc<Vec<f64>>, Arc<Vec<f64>>),
}

impl Op {
    pub(crate) fn name(&self) -> &'static str {
        match self {
            Op::Leaf => "leaf",
            Op::Add(..) => "add",
            Op::Sub(..) => "sub",
            Op::Mul(..) => "mul",
            Op::MulBcast(..) => "mul_bcast",
            Op::MulScalar(..) => "mul_scalar",
            Op::Affine(..) => "affine",
            Op::Recip(..) => "recip",
            Op::Exp(..) => "exp",
            Op::Log(..) => "log",
            Op::Sqrt(..) => "sqrt",
            Op::Sigmoid(..) => "sigmoid",
            Op::Relu(..) => "relu",
            Op::Clamp(..) => "clamp",
            Op::NormalCdf(..) => "normal_cdf",
            Op::Magnitude(..) => "magnitude",
            Op::RealPart(..) => "real_part",
            Op::ImagPart(..) => "imag_part",
            Op::SumAll(..) => "sum_all",
            Op::SumAxis(..) => "sum_axis",
            Op::L2Norm(..) => "l2_norm",
            Op::Softmax(..) => "softmax",
            Op::MatMul(..) => "matmul",
            Op::VecMat(..) => "vecmat",
            Op::Idft(..) => "idft",
            Op::Gather(..) => "gather",
            Op::Reshape(..) => "reshape",
            Op::SwapLast2(..) => "swap_last2",
            Op::Conv2d(..) => "conv2d",
            Op::AvgPool2(..) => "avg_pool2",
            Op::Upsample2(..) => "upsample2",
            Op::Concat(..) => "concat",
            Op::Pad2d(..) => "pad2d",
            Op::Crop2d(..) => "crop2d",
            Op::MaxAll(..) => "max_all",
            Op::PhaseRamp(..) => "phase_ramp",
        }
    }

    pub(crate) fn parents(&self) -> Vec<usize> {
        match *self {
            Op::Leaf => vec![],
            Op::Add(a, b)
            | Op::Sub(a, b)
            | Op::Mul(a, b)
            | Op::MulBcast(a, b)
            | Op::MulScalar(a, b)
            | Op::MatMul(a, b)
            | Op::VecMat(a, b)
            | Op::Concat(a, b) => vec![a, b],
            Op::Conv2d(x, w, b) => vec![x, w, b],
            Op::Affine(a, _)
            | Op::Recip(a)
            | Op::Exp(a)
            | Op::Log(a)
            | Op::Sqrt(a)
            | Op::Sigmoid(a)
            | Op::Relu(a)
            | Op::Clamp(a, ..)
            | Op::NormalCdf(a)
            | Op::Magnitude(a)
            | Op::RealPart(a)
            | Op::ImagPart(a)
            | Op::SumAll(a)
            | Op::SumAxis(a, _)
            | Op::L2Norm(a)
            | Op::Softmax(a)
            | Op::Idft(a, _)
            | Op::Gather(a, ..)
            | Op::Reshape(a)
            | Op::SwapLast2(a)
            | Op::AvgPool2(a)
            | Op::Upsample2(a)
            | Op::Pad2d(a)
            | Op::Crop2d(a)
            | Op::MaxAll(a, _)
            | Op::PhaseRamp(a, ..) => vec![a],
        }
    }
}

fn shape_err(op: &'static str, left: &[usize], right: &[usize]) -> Error {
    Error::Shape { op, left: left.to_vec(), right: right.to_vec() }
}

fn map_real(t: &Tensor, f: impl Fn(f64) -> f64) -> Tensor {
    Tensor::from_real(t.shape().to_vec(), t.re().iter().map(|&x| f(x)).collect())
}

fn zip_real(a: &[f64], b: &[f64], f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect()
}

fn standard_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Twiddle table `exp(sign * 2 pi i j / n)` for `j in 0..n`.
fn twiddles(n: usize, sign: f64) -> Vec<Complex64> {
    (0..n).map(|j| Complex64::from_polar(1.0, sign * 2.0 * PI * j as f64 / n as f64)).collect()
}

/// `out[o, n, i] = scale * sum_k x[o, k, i] * tw[(k * n) % N]`.
fn dft_axis(x: &[Complex64], outer: usize, len: usize, inner: usize, sign: f64, scale: f64) -> Vec<Complex64> {
    let tw = twiddles(len, sign);
    let mut out = vec![Complex64::new(0.0, 0.0); x.len()];
    for o in 0..outer {
        let base = o * len * inner;
        for n in 0..len {
            let dst = &mut out[base + n * inner..base + (n + 1) * inner];
            for k in 0..len {
                let w = tw[(k * n) % len] * scale;
                let src = &x[base + k * inner..base + (k + 1) * inner];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += w * s;
                }
            }
        }
    }
    out
}

/// Index ranges `[lo, hi)` of output positions whose shifted input
/// position `pos + shift` falls inside `0..len`.
fn valid_range(len: usize, shift: isize) -> (usize, usize) {
    let lo = (-shift).max(0) as usize;
    let hi = (len as isize - shift).clamp(0, len as isize) as usize;
    (lo.min(hi), hi)
}

impl Graph {
    fn binary_same_shape(&self, a: Var, b: Var, op: &'static str) -> Result<(&Tensor, &Tensor)> {
        let (ta, tb) = (self.check(a)?, self.check(b)?);
        if ta.shape() != tb.shape() {
            return Err(shape_err(op, ta.shape(), tb.shape()));
        }
        if ta.dtype() != tb.dtype() {
            return Err(Error::Dtype { op, expected: ta.dtype() });
        }
        Ok((ta, tb))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = self.binary_same_shape(a, b, "add")?;
        let value = match (ta.data(), tb.data()) {
            (Data::Real(x), Data::Real(y)) => Tensor::from_real(ta.shape().to_vec(), zip_real(x, y, |p, q| p + q)),
            (Data::Complex(x), Data::Complex(y)) => {
                Tensor::from_complex(ta.shape().to_vec(), x.iter().zip(y).map(|(p, q)| p + q).collect())
            }
            _ => unreachable!(),
        };
        Ok(self.push(Op::Add(a.index, b.index), value))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = self.binary_same_shape(a, b, "sub")?;
        let value = match (ta.data(), tb.data()) {
            (Data::Real(x), Data::Real(y)) => Tensor::from_real(ta.shape().to_vec(), zip_real(x, y, |p, q| p - q)),
            (Data::Complex(x), Data::Complex(y)) => {
                Tensor::from_complex(ta.shape().to_vec(), x.iter().zip(y).map(|(p, q)| p - q).collect())
            }
            _ => unreachable!(),
        };
        Ok(self.push(Op::Sub(a.index, b.index), value))
    }

    /// Elementwise product of two tensors of equal shape and dtype.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (ta, tb) = self.binary_same_shape(a, b, "mul")?;
        let value = match (ta.data(), tb.data()) {
            (Data::Real(x), Data::Real(y)) => Tensor::from_real(ta.shape().to_vec(), zip_real(x, y, |p, q| p * q)),
            (Data::Complex(x), Data::Complex(y)) => {
                Tensor::from_complex(ta.shape().to_vec(), x.iter().zip(y).map(|(p, q)| p * q).collect())
            }
            _ => unreachable!(),
        };
        Ok(self.push(Op::Mul(a.index, b.index), value))
    }

    /// Multiplies `x` (real or complex) by a real `w` whose shape is a
    /// trailing suffix of `x`'s shape, broadcasting over leading axes.
    pub fn mul_bcast(&mut self, x: Var, w: Var) -> Result<Var> {
        let tx = self.check(x)?;
        let tw = self.check_dtype(w, Dtype::Real, "mul_bcast")?;
        let (xs, ws) = (tx.shape(), tw.shape());
        if ws.len() > xs.len() || xs[xs.len() - ws.len()..] != *ws {
            return Err(shape_err("mul_bcast", xs, ws));
        }
        let wv = tw.re();
        let n = wv.len().max(1);
        let value = match tx.data() {
            Data::Real(v) => Tensor::from_real(xs.to_vec(), v.iter().enumerate().map(|(i, a)| a * wv[i % n]).collect()),
            Data::Complex(v) => {
                Tensor::from_complex(xs.to_vec(), v.iter().enumerate().map(|(i, a)| a * wv[i % n]).collect())
            }
        };
        Ok(self.push(Op::MulBcast(x.index, w.index), value))
    }

    /// Multiplies `x` by a real single-element tensor `s`.
    pub fn mul_scalar(&mut self, x: Var, s: Var) -> Result<Var> {
        let tx = self.check(x)?;
        let ts = self.check_dtype(s, Dtype::Real, "mul_scalar")?;
        if ts.len() != 1 {
            return Err(shape_err("mul_scalar", tx.shape(), ts.shape()));
        }
        let c = ts.item();
        let value = match tx.data() {
            Data::Real(v) => Tensor::from_real(tx.shape().to_vec(), v.iter().map(|a| a * c).collect()),
            Data::Complex(v) => Tensor::from_complex(tx.shape().to_vec(), v.iter().map(|a| a * c).collect()),
        };
        Ok(self.push(Op::MulScalar(x.index, s.index), value))
    }

    /// `scale * x + offset`; complex inputs only accept `offset == 0`.
    pub fn affine(&mut self, x: Var, scale: f64, offset: f64) -> Result<Var> {
        let tx = self.check(x)?;
        let value = match tx.data() {
            Data::Real(v) => Tensor::from_real(tx.shape().to_vec(), v.iter().map(|a| scale * a + offset).collect()),
            Data::Complex(v) => {
                if offset != 0.0 {
                    return Err(Error::Dtype { op: "affine", expected: Dtype::Real });
                }
                Tensor::from_complex(tx.shape().to_vec(), v.iter().map(|a| a * scale).collect())
            }
        };
        Ok(self.push(Op::Affine(x.index, scale), value))
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Result<Var> {
        self.affine(x, c, 0.0)
    }

    fn unary_real(&mut self, x: Var, op: Op, f: impl Fn(f64) -> f64) -> Result<Var> {
        let tx = self.check_dtype(x, Dtype::Real, op.name())?;
        let value = map_real(tx, f);
        Ok(self.push(op, value))
    }

    pub fn recip(&mut self, x: Var) -> Result<Var> {
        self.unary_real(x, Op::Recip(x.index), |a| 1.0 / a)
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        self.unary_real(x, Op::Exp(x.index), f64::exp)
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        self.unary_real(x, Op::Log(x.index), f64::ln)
    }

    /// Square root; the derivative at 0 is taken as 0.
    pub fn sqrt(&mut self, x: Var) -> Result<Var> {
        self.unary_real(x, Op::Sqrt(x.index), f64::sqrt)
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        self.unary_real(x, Op::Sigmoid(x.index), |a| 1.0 / (1.0 + (-a).exp()))
    }

    /// Elementwise `max(x, 0)`.
    pub fn relu(&mut self, x: Var) -> Result<Var> {
        self.unary_real(x, Op::Relu(x.index), |a| a.max(0.0))
    }

    /// Clamps into `[lo, hi]`; the gradient is zero outside the interval.
    pub fn clamp(&mut self, x: Var, lo: f64, hi: f64) -> Result<Var> {
        self.unary_real(x, Op::Clamp(x.index, lo, hi), |a| a.clamp(lo, hi))
    }

    pub fn clamp_min(&mut self, x: Var, lo: f64) -> Result<Var> {
        self.clamp(x, lo, f64::INFINITY)
    }

    pub fn normal_cdf(&mut self, x: Var) -> Result<Var> {
        self.unary_real(x, Op::NormalCdf(x.index), normal_cdf)
    }

    /// Complex modulus `|z|`; the gradient at `z == 0` is taken as 0.
    pub fn magnitude(&mut self, z: Var) -> Result<Var> {
        let tz = self.check_dtype(z, Dtype::Complex, "magnitude")?;
        let value = Tensor::from_real(tz.shape().to_vec(), tz.cx().iter().map(|c| c.norm()).collect());
        Ok(self.push(Op::Magnitude(z.index), value))
    }

    pub fn real_part(&mut self, z: Var) -> Result<Var> {
        let tz = self.check_dtype(z, Dtype::Complex, "real_part")?;
        let value = Tensor::from_real(tz.shape().to_vec(), tz.cx().iter().map(|c| c.re).collect());
        Ok(self.push(Op::RealPart(z.index), value))
    }

    pub fn imag_part(&mut self, z: Var) -> Result<Var> {
        let tz = self.check_dtype(z, Dtype::Complex, "imag_part")?;
        let value = Tensor::from_real(tz.shape().to_vec(), tz.cx().iter().map(|c| c.im).collect());
        Ok(self.push(Op::ImagPart(z.index), value))
    }

    /// Sum of all elements, as a shape-`[]` tensor.
    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let tx = self.check(x)?;
        let value = match tx.data() {
            Data::Real(v) => Tensor::from_real(vec![], vec![v.iter().sum()]),
            Data::Complex(v) => Tensor::from_complex(vec![], vec![v.iter().sum()]),
        };
        Ok(self.push(Op::SumAll(x.index), value))
    }

    pub fn sum_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let tx = self.check(x)?;
        if axis >= tx.shape().len() {
            return Err(shape_err("sum_axis", tx.shape(), &[axis]));
        }
        let (outer, len, inner) = split_axis(tx.shape(), axis);
        let mut shape = tx.shape().to_vec();
        shape.remove(axis);
        let value = match tx.data() {
            Data::Real(v) => {
                let mut out = vec![0.0; outer * inner];
                for o in 0..outer {
                    for k in 0..len {
                        let src = &v[(o * len + k) * inner..(o * len + k + 1) * inner];
                        out[o * inner..(o + 1) * inner].iter_mut().zip(src).for_each(|(d, s)| *d += s);
                    }
                }
                Tensor::from_real(shape, out)
            }
            Data::Complex(v) => {
                let mut out = vec![Complex64::new(0.0, 0.0); outer * inner];
                for o in 0..outer {
                    for k in 0..len {
                        let src = &v[(o * len + k) * inner..(o * len + k + 1) * inner];
                        out[o * inner..(o + 1) * inner].iter_mut().zip(src).for_each(|(d, s)| *d += s);
                    }
                }
                Tensor::from_complex(shape, out)
            }
        };
        Ok(self.push(Op::SumAxis(x.index, axis), value))
    }

    pub fn mean_axis(&mut self, x: Var, axis: usize) -> Result<Var> {
        let len = *self.check(x)?.shape().get(axis).ok_or_else(|| shape_err("mean_axis", self.shape(x), &[axis]))?;
        let s = self.sum_axis(x, axis)?;
        self.scale(s, 1.0 / len as f64)
    }

    /// Euclidean norm of a real tensor; the gradient at 0 is taken as 0.
    pub fn l2_norm(&mut self, x: Var) -> Result<Var> {
        let tx = self.check_dtype(x, Dtype::Real, "l2_norm")?;
        let n = tx.re().iter().map(|a| a * a).sum::<f64>().sqrt();
        Ok(self.push(Op::L2Norm(x.index), Tensor::from_real(vec![], vec![n])))
    }

    /// Softmax over the last axis.
    pub fn softmax(&mut self, x: Var) -> Result<Var> {
        let tx = self.check_dtype(x, Dtype::Real, "softmax")?;
        let width = *tx.shape().last().ok_or_else(|| shape_err("softmax", tx.shape(), &[]))?;
        let mut out = tx.re().to_vec();
        if width > 0 {
            for row in out.chunks_mut(width) {
                let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let mut total = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - m).exp();
                    total += *v;
                }
                row.iter_mut().for_each(|v| *v /= total);
            }
        }
        let value = Tensor::from_real(tx.shape().to_vec(), out);
        Ok(self.push(Op::Softmax(x.index), value))
    }

    /// Real matrix product `(m, n) x (n, p) -> (m, p)`.
    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let ta = self.check_dtype(a, Dtype::Real, "matmul")?;
        let tb = self.check_dtype(b, Dtype::Real, "matmul")?;
        let (sa, sb) = (ta.shape(), tb.shape());
        if sa.len() != 2 || sb.len() != 2 || sa[1] != sb[0] {
            return Err(shape_err("matmul", sa, sb));
        }
        let (m, n, p) = (sa[0], sa[1], sb[1]);
        let (av, bv) = (ta.re(), tb.re());
        let mut out = vec![0.0; m * p];
        for i in 0..m {
            let dst = &mut out[i * p..(i + 1) * p];
            for k in 0..n {
                let aik = av[i * n + k];
                dst.iter_mut().zip(&bv[k * p..(k + 1) * p]).for_each(|(d, s)| *d += aik * s);
            }
        }
        let value = Tensor::from_real(vec![m, p], out);
        Ok(self.push(Op::MatMul(a.index, b.index), value))
    }

    /// Batched complex vector-matrix product:
    /// `out[b, q] = sum_m x[b, m] * h[b, m, q]`.
    pub fn vecmat(&mut self, x: Var, h: Var) -> Result<Var> {
        let tx = self.check_dtype(x, Dtype::Complex, "vecmat")?;
        let th = self.check_dtype(h, Dtype::Complex, "vecmat")?;
        let (sx, sh) = (tx.shape(), th.shape());
        if sx.len() != 2 || sh.len() != 3 || sx[0] != sh[0] || sx[1] != sh[1] {
            return Err(shape_err("vecmat", sx, sh));
        }
        let (nb, nm, nq) = (sh[0], sh[1], sh[2]);
        let (xv, hv) = (tx.cx(), th.cx());
        let mut out = vec![Complex64::new(0.0, 0.0); nb * nq];
        for b in 0..nb {
            let dst = &mut out[b * nq..(b + 1) * nq];
            for m in 0..nm {
                let xm = xv[b * nm + m];
                let row = &hv[(b * nm + m) * nq..(b * nm + m + 1) * nq];
                dst.iter_mut().zip(row).for_each(|(d, s)| *d += xm * s);
            }
        }
        let value = Tensor::from_complex(vec![nb, nq], out);
        Ok(self.push(Op::VecMat(x.index, h.index), value))
    }

    /// Inverse DFT along `axis` with the `1/N` convention:
    /// `y[n] = (1/N) sum_k x[k] exp(+2 pi i k n / N)`.
    pub fn idft(&mut self, x: Var, axis: usize) -> Result<Var> {
        let tx = self.check_dtype(x, Dtype::Complex, "idft")?;
        if axis >= tx.shape().len() {
            return Err(shape_err("idft", tx.shape(), &[axis]));
        }
        let (outer, len, inner) = split_axis(tx.shape(), axis);
        let out = dft_axis(tx.cx(), outer, len, inner, 1.0, 1.0 / len as f64);
        let value = Tensor::from_complex(tx.shape().to_vec(), out);
        Ok(self.push(Op::Idft(x.index, axis), value))
    }

    /// Selects `indices` along `axis` (repeats allowed).
    pub fn gather(&mut self, x: Var, axis: usize, indices: &[usize]) -> Result<Var> {
        let tx = self.check(x)?;
        if axis >= tx.shape().len() || indices.iter().any(|&i| i >= tx.shape()[axis]) {
            return Err(shape_err("gather", tx.shape(), indices));
        }
        let (outer, len, inner) = split_axis(tx.shape(), axis);
        let mut shape = tx.shape().to_vec();
        shape[axis] = indices.len();
        fn pick<T: Copy>(v: &[T], outer: usize, len: usize, inner: usize, idx: &[usize]) -> Vec<T> {
            let mut out = Vec::with_capacity(outer * idx.len() * inner);
            for o in 0..outer {
                for &i in idx {
                    out.extend_from_slice(&v[(o * len + i) * inner..(o * len + i + 1) * inner]);
                }
            }
            out
        }
        let value = match tx.data() {
            Data::Real(v) => Tensor::from_real(shape, pick(v, outer, len, inner, indices)),
            Data::Complex(v) => Tensor::from_complex(shape, pick(v, outer, len, inner, indices)),
        };
        Ok(self.push(Op::Gather(x.index, axis, indices.to_vec()), value))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let value = self.check(x)?.reshaped(shape)?;
        Ok(self.push(Op::Reshape(x.index), value))
    }

    /// Transposes the last two axes.
    pub fn swap_last2(&mut self, x: Var) -> Result<Var> {
        let tx = self.check(x)?;
        let s = tx.shape();
        if s.len() < 2 {
            return Err(shape_err("swap_last2", s, &[2]));
        }
        let value = swap_last2_tensor(tx);
        Ok(self.push(Op::SwapLast2(x.index), value))
    }

    /// Same-padded 2-D convolution. `x: (C_in, H, W)`,
    /// `w: (C_out, C_in, k, k)` with odd `k`, `b: (C_out)`.
    pub fn conv2d(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let tx = self.check_dtype(x, Dtype::Real, "conv2d")?;
        let tw = self.check_dtype(w, Dtype::Real, "conv2d")?;
        let tb = self.check_dtype(b, Dtype::Real, "conv2d")?;
        let (sx, sw) = (tx.shape(), tw.shape());
        if sx.len() != 3 || sw.len() != 4 || sw[1] != sx[0] || sw[2] != sw[3] || sw[2] % 2 == 0 {
            return Err(shape_err("conv2d", sx, sw));
        }
        if tb.shape() != [sw[0]] {
            return Err(shape_err("conv2d", sw, tb.shape()));
        }
        let out = conv2d_forward(tx.re(), sx, tw.re(), sw, tb.re());
        let value = Tensor::from_real(vec![sw[0], sx[1], sx[2]], out);
        Ok(self.push(Op::Conv2d(x.index, w.index, b.index), value))
    }

    /// 2x2 average pooling with stride 2 over `(C, H, W)`; H and W must be even.
    pub fn avg_pool2(&mut self, x: Var) -> Result<Var> {
        let tx = self.check_dtype(x, Dtype::Real, "avg_pool2")?;
        let s = tx.shape();
        if s.len() != 3 || s[1] % 2 != 0 || s[2] % 2 != 0 {
            return Err(shape_err("avg_pool2", s, &[2, 2]));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let (h2, w2) = (h / 2, w / 2);
        let v = tx.re();
        let mut out = vec![0.0; c * h2 * w2];
        for ch in 0..c {
            for y in 0..h2 {
                for xx in 0..w2 {
                    let i = ch * h * w + 2 * y * w + 2 * xx;
                    out[(ch * h2 + y) * w2 + xx] = 0.25 * (v[i] + v[i + 1] + v[i + w] + v[i + w + 1]);
                }
            }
        }
        let value = Tensor::from_real(vec![c, h2, w2], out);
        Ok(self.push(Op::AvgPool2(x.index), value))
    }

    /// Nearest-neighbour 2x upsampling over `(C, H, W)`.
    pub fn upsample2(&mut self, x: Var) -> Result<Var> {
        let tx = self.check_dtype(x, Dtype::Real, "upsample2")?;
        let s = tx.shape();
        if s.len() != 3 {
            return Err(shape_err("upsample2", s, &[3]));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        let v = tx.re();
        let mut out = vec![0.0; c * 4 * h * w];
        for ch in 0..c {
            for y in 0..2 * h {
                for xx in 0..2 * w {
                    out[(ch * 2 * h + y) * 2 * w + xx] = v[(ch * h + y / 2) * w + xx / 2];
                }
            }
        }
        let value = Tensor::from_real(vec![c, 2 * h, 2 * w], out);
        Ok(self.push(Op::Upsample2(x.index), value))
    }

    /// Concatenates along axis 0.
    pub fn concat(&mut self, a: Var, b: Var) -> Result<Var> {
        let ta = self.check_dtype(a, Dtype::Real, "concat")?;
        let tb = self.check_dtype(b, Dtype::Real, "concat")?;
        if ta.shape().is_empty() || ta.shape().len() != tb.shape().len() || ta.shape()[1..] != tb.shape()[1..] {
            return Err(shape_err("concat", ta.shape(), tb.shape()));
        }
        let mut shape = ta.shape().to_vec();
        shape[0] += tb.shape()[0];
        let mut out = ta.re().to_vec();
        out.extend_from_slice(tb.re());
        let value = Tensor::from_real(shape, out);
        Ok(self.push(Op::Concat(a.index, b.index), value))
    }

    /// Zero-pads `(C, H, W)` at the bottom and right to `(C, h, w)`.
    pub fn pad2d(&mut self, x: Var, h: usize, w: usize) -> Result<Var> {
        let tx = self.check_dtype(x, Dtype::Real, "pad2d")?;
        let s = tx.shape();
        if s.len() != 3 || h < s[1] || w < s[2] {
            return Err(shape_err("pad2d", s, &[h, w]));
        }
        let (c, h0, w0) = (s[0], s[1], s[2]);
        let v = tx.re();
        let mut out = vec![0.0; c * h * w];
        for ch in 0..c {
            for y in 0..h0 {
                out[(ch * h + y) * w..(ch * h + y) * w + w0]
                    .copy_from_slice(&v[(ch * h0 + y) * w0..(ch * h0 + y + 1) * w0]);
            }
        }
        let value = Tensor::from_real(vec![c, h, w], out);
        Ok(self.push(Op::Pad2d(x.index), value))
    }

    /// Keeps the top-left `(C, h, w)` block.
    pub fn crop2d(&mut self, x: Var, h: usize, w: usize) -> Result<Var> {
        let tx = self.check_dtype(x, Dtype::Real, "crop2d")?;
        let s = tx.shape();
        if s.len() != 3 || h > s[1] || w > s[2] {
            return Err(shape_err("crop2d", s, &[h, w]));
        }
        let (c, h0, w0) = (s[0], s[1], s[2]);
        let v = tx.re();
        let mut out = Vec::with_capacity(c * h * w);
        for ch in 0..c {
            for y in 0..h {
                out.extend_from_slice(&v[(ch * h0 + y) * w0..(ch * h0 + y) * w0 + w]);
            }
        }
        let value = Tensor::from_real(vec![c, h, w], out);
        Ok(self.push(Op::Crop2d(x.index), value))
    }

    /// Largest element; the gradient flows to the first maximiser.
    pub fn max_all(&mut self, x: Var) -> Result<Var> {
        let tx = self.check_dtype(x, Dtype::Real, "max_all")?;
        if tx.is_empty() {
            return Err(shape_err("max_all", tx.shape(), &[]));
        }
        let (arg, best) =
            tx.re()
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
        Ok(self.push(Op::MaxAll(x.index, arg), Tensor::from_real(vec![], vec![best])))
    }

    /// `h[k, m, q] = exp(i * kfac[k] * pos[m] * qfac[q])` for a real
    /// position vector `pos`.
    pub fn phase_ramp(&mut self, pos: Var, kfac: Arc<Vec<f64>>, qfac: Arc<Vec<f64>>) -> Result<Var> {
        let tp = self.check_dtype(pos, Dtype::Real, "phase_ramp")?;
        if tp.shape().len() != 1 {
            return Err(shape_err("phase_ramp", tp.shape(), &[1]));
        }
        let p = tp.re();
        let (nk, nm, nq) = (kfac.len(), p.len(), qfac.len());
        let mut out = Vec::with_capacity(nk * nm * nq);
        for &kf in kfac.iter() {
            for &pm in p {
                let a = kf * pm;
                out.extend(qfac.iter().map(|&qf| {
                    let (s, c) = (a * qf).sin_cos();
                    Complex64::new(c, s)
                }));
            }
        }
        let value = Tensor::from_complex(vec![nk, nm, nq], out);
        Ok(self.push(Op::PhaseRamp(pos.index, kfac, qfac), value))
    }
}

fn swap_last2_tensor(t: &Tensor) -> Tensor {
    let s = t.shape();
    let (r, c) = (s[s.len() - 2], s[s.len() - 1]);
    let mut shape = s.to_vec();
    let n = shape.len();
    shape.swap(n - 2, n - 1);
    fn swap<T: Copy>(v: &[T], r: usize, c: usize) -> Vec<T> {
        let mut out = Vec::with_capacity(v.len());
        for block in v.chunks(r * c) {
            for j in 0..c {
                out.extend((0..r).map(|i| block[i * c + j]));
            }
        }
        out
    }
    match t.data() {
        Data::Real(v) => Tensor::from_real(shape, swap(v, r, c)),
        Data::Complex(v) => Tensor::from_complex(shape, swap(v, r, c)),
    }
}

pub(crate) fn conv2d_forward(x: &[f64], sx: &[usize], w: &[f64], sw: &[usize], b: &[f64]) -> Vec<f64> {
    let (cin, h, wd) = (sx[0], sx[1], sx[2]);
    let (cout, k) = (sw[0], sw[2]);
    let pad = (k / 2) as isize;
    let plane = h * wd;
    let mut out = vec![0.0; cout * plane];
    for co in 0..cout {
        let dst_plane = &mut out[co * plane..(co + 1) * plane];
        dst_plane.iter_mut().for_each(|v| *v = b[co]);
        for ci in 0..cin {
            let src_plane = &x[ci * plane..(ci + 1) * plane];
            for ky in 0..k {
                let dy = ky as isize - pad;
                let (ylo, yhi) = valid_range(h, dy);
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let (xlo, xhi) = valid_range(wd, dx);
                    let wv = w[((co * cin + ci) * k + ky) * k + kx];
                    for y in ylo..yhi {
                        let sy = (y as isize + dy) as usize;
                        let src =
                            &src_plane[sy * wd + (xlo as isize + dx) as usize..sy * wd + (xhi as isize + dx) as usize];
                        let dst = &mut dst_plane[y * wd + xlo..y * wd + xhi];
                        dst.iter_mut().zip(src).for_each(|(d, s)| *d += wv * s);
                    }
                }
            }
        }
    }
    out
}

fn conv2d_backward(
    x: &[f64],
    sx: &[usize],
    w: &[f64],
    sw: &[usize],
    g: &[f64],
    want_x: bool,
    want_w: bool,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (cin, h, wd) = (sx[0], sx[1], sx[2]);
    let (cout, k) = (sw[0], sw[2]);
    let pad = (k / 2) as isize;
    let plane = h * wd;
    let mut gx = if want_x { vec![0.0; x.len()] } else { Vec::new() };
    let mut gw = if want_w { vec![0.0; w.len()] } else { Vec::new() };
    let gb: Vec<f64> = (0..cout).map(|co| g[co * plane..(co + 1) * plane].iter().sum()).collect();
    for co in 0..cout {
        let g_plane = &g[co * plane..(co + 1) * plane];
        for ci in 0..cin {
            let x_plane = &x[ci * plane..(ci + 1) * plane];
            for ky in 0..k {
                let dy = ky as isize - pad;
                let (ylo, yhi) = valid_range(h, dy);
                for kx in 0..k {
                    let dx = kx as isize - pad;
                    let (xlo, xhi) = valid_range(wd, dx);
                    let widx = ((co * cin + ci) * k + ky) * k + kx;
                    let wv = w[widx];
                    let mut acc = 0.0;
                    for y in ylo..yhi {
                        let sy = (y as isize + dy) as usize;
                        let s0 = sy * wd + (xlo as isize + dx) as usize;
                        let s1 = sy * wd + (xhi as isize + dx) as usize;
                        let grow = &g_plane[y * wd + xlo..y * wd + xhi];
                        if want_w {
                            acc += grow.iter().zip(&x_plane[s0..s1]).map(|(a, b)| a * b).sum::<f64>();
                        }
                        if want_x {
                            let dst = &mut gx[ci * plane + s0..ci * plane + s1];
                            dst.iter_mut().zip(grow).for_each(|(d, s)| *d += wv * s);
                        }
                    }
                    if want_w {
                        gw[widx] += acc;
                    }
                }
            }
        }
    }
    (gx, gw, gb)
}

/// Applies the backward rule of node `index`, feeding parent gradients.
pub(crate) fn backward_op(graph: &Graph, index: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
    let node = &graph.nodes[index];
    let val = |i: usize| -> &Tensor { &graph.nodes[i].value };
    let out = &node.value;
    let shape = |i: usize| val(i).shape().to_vec();
    match &node.op {
        Op::Leaf => {}
        Op::Add(a, b) => {
            graph.feed(grads, *a, g.clone());
            graph.feed(grads, *b, g.clone());
        }
        Op::Sub(a, b) => {
            graph.feed(grads, *a, g.clone());
            if graph.wants(*b) {
                let neg = match g.data() {
                    Data::Real(v) => Tensor::from_real(g.shape().to_vec(), v.iter().map(|x| -x).collect()),
                    Data::Complex(v) => Tensor::from_complex(g.shape().to_vec(), v.iter().map(|x| -x).collect()),
                };
                graph.feed(grads, *b, neg);
            }
        }
        Op::Mul(a, b) => {
            for (this, other) in [(*a, *b), (*b, *a)] {
                if !graph.wants(this) {
                    continue;
                }
                let t = match (g.data(), val(other).data()) {
                    (Data::Real(gv), Data::Real(ov)) => Tensor::from_real(shape(this), zip_real(gv, ov, |p, q| p * q)),
                    (Data::Complex(gv), Data::Complex(ov)) => {
                        Tensor::from_complex(shape(this), gv.iter().zip(ov).map(|(p, q)| q.conj() * p).collect())
                    }
                    _ => unreachable!(),
                };
                graph.feed(grads, this, t);
            }
        }
        Op::MulBcast(x, w) => {
            let wv = val(*w).re();
            let n = wv.len().max(1);
            if graph.wants(*x) {
                let t = match g.data() {
                    Data::Real(gv) => {
                        Tensor::from_real(shape(*x), gv.iter().enumerate().map(|(i, a)| a * wv[i % n]).collect())
                    }
                    Data::Complex(gv) => {
                        Tensor::from_complex(shape(*x), gv.iter().enumerate().map(|(i, a)| a * wv[i % n]).collect())
                    }
                };
                graph.feed(grads, *x, t);
            }
            if graph.wants(*w) {
                let mut gw = vec![0.0; wv.len()];
                match (g.data(), val(*x).data()) {
                    (Data::Real(gv), Data::Real(xv)) => {
                        for (i, (a, b)) in gv.iter().zip(xv).enumerate() {
                            gw[i % n] += a * b;
                        }
                    }
                    (Data::Complex(gv), Data::Complex(xv)) => {
                        for (i, (a, b)) in gv.iter().zip(xv).enumerate() {
                            gw[i % n] += (b.conj() * a).re;
                        }
                    }
                    _ => unreachable!(),
                }
                graph.feed(grads, *w, Tensor::from_real(shape(*w), gw));
            }
        }
        Op::MulScalar(x, s) => {
            let c = val(*s).item();
            if graph.wants(*x) {
                let t = match g.data() {
                    Data::Real(gv) => Tensor::from_real(shape(*x), gv.iter().map(|a| a * c).collect()),
                    Data::Complex(gv) => Tensor::from_complex(shape(*x), gv.iter().map(|a| a * c).collect()),
                };
                graph.feed(grads, *x, t);
            }
            if graph.wants(*s) {
                let total = match (g.data(), val(*x).data()) {
                    (Data::Real(gv), Data::Real(xv)) => gv.iter().zip(xv).map(|(a, b)| a * b).sum(),
                    (Data::Complex(gv), Data::Complex(xv)) => gv.iter().zip(xv).map(|(a, b)| (b.conj() * a).re).sum(),
                    _ => unreachable!(),
                };
                graph.feed(grads, *s, Tensor::from_real(shape(*s), vec![total]));
            }
        }
        Op::Affine(x, scale) => {
            let t = match g.data() {
                Data::Real(gv) => Tensor::from_real(shape(*x), gv.iter().map(|a| a * scale).collect()),
                Data::Complex(gv) => Tensor::from_complex(shape(*x), gv.iter().map(|a| a * scale).collect()),
            };
            graph.feed(grads, *x, t);
        }
        Op::Recip(x) => {
            let t = zip_real(g.re(), out.re(), |gi, y| -gi * y * y);
            graph.feed(grads, *x, Tensor::from_real(shape(*x), t));
        }
        Op::Exp(x) => {
            let t = zip_real(g.re(), out.re(), |gi, y| gi * y);
            graph.feed(grads, *x, Tensor::from_real(shape(*x), t));
        }
        Op::Log(x) => {
            let t = zip_real(g.re(), val(*x).re(), |gi, a| gi / a);
            graph.feed(grads, *x, Tensor::from_real(shape(*x), t));
        }
        Op::Sqrt(x) => {
            let t = zip_real(g.re(), out.re(), |gi, y| if y > 0.0 { gi * 0.5 / y } else { 0.0 });
            graph.feed(grads, *x, Tensor::from_real(shape(*x), t));
        }
        Op::Sigmoid(x) => {
            let t = zip_real(g.re(), out.re(), |gi, y| gi * y * (1.0 - y));
            graph.feed(grads, *x, Tensor::from_real(shape(*x), t));
        }
        Op::Relu(x) => {
            let t = zip_real(g.re(), val(*x).re(), |gi, a| if a > 0.0 { gi } else { 0.0 });
            graph.feed(grads, *x, Tensor::from_real(shape(*x), t));
        }
        Op::Clamp(x, lo, hi) => {
            let t = zip_real(g.re(), val(*x).re(), |gi, a| if a >= *lo && a <= *hi { gi } else { 0.0 });
            graph.feed(grads, *x, Tensor::from_real(shape(*x), t));
        }
        Op::NormalCdf(x) => {
            let t = zip_real(g.re(), val(*x).re(), |gi, a| gi * standard_normal_pdf(a));
            graph.feed(grads, *x, Tensor::from_real(shape(*x), t));
        }
        Op::Magnitude(z) => {
            let t = g
                .re()
                .iter()
                .zip(val(*z).cx())
                .zip(out.re())
                .map(|((gi, zi), m)| if *m > 0.0 { zi * (gi / m) } else { Complex64::new(0.0, 0.0) })
                .collect();
            graph.feed(grads, *z, Tensor::from_complex(shape(*z), t));
        }
        Op::RealPart(z) => {
            let t = g.re().iter().map(|&a| Complex64::new(a, 0.0)).collect();
            graph.feed(grads, *z, Tensor::from_complex(shape(*z), t));
        }
        Op::ImagPart(z) => {
            let t = g.re().iter().map(|&a| Complex64::new(0.0, a)).collect();
            graph.feed(grads, *z, Tensor::from_complex(shape(*z), t));
        }
        Op::SumAll(x) => {
            let n = val(*x).len();
            let t = match g.data() {
                Data::Real(gv) => Tensor::from_real(shape(*x), vec![gv[0]; n]),
                Data::Complex(gv) => Tensor::from_complex(shape(*x), vec![gv[0]; n]),
            };
            graph.feed(grads, *x, t);
        }
        Op::SumAxis(x, axis) => {
            let (outer, len, inner) = split_axis(val(*x).shape(), *axis);
            fn spread<T: Copy>(gv: &[T], outer: usize, len: usize, inner: usize) -> Vec<T> {
                let mut v = Vec::with_capacity(outer * len * inner);
                for o in 0..outer {
                    for _ in 0..len {
                        v.extend_from_slice(&gv[o * inner..(o + 1) * inner]);
                    }
                }
                v
            }
            let t = match g.data() {
                Data::Real(gv) => Tensor::from_real(shape(*x), spread(gv, outer, len, inner)),
                Data::Complex(gv) => Tensor::from_complex(shape(*x), spread(gv, outer, len, inner)),
            };
            graph.feed(grads, *x, t);
        }
        Op::L2Norm(x) => {
            let n = out.item();
            let gi = g.item();
            let t = val(*x).re().iter().map(|a| if n > 0.0 { gi * a / n } else { 0.0 }).collect();
            graph.feed(grads, *x, Tensor::from_real(shape(*x), t));
        }
        Op::Softmax(x) => {
            let width = *out.shape().last().unwrap();
            let y = out.re();
            let mut t = vec![0.0; y.len()];
            for ((trow, yrow), grow) in t.chunks_mut(width).zip(y.chunks(width)).zip(g.re().chunks(width)) {
                let dot: f64 = yrow.iter().zip(grow).map(|(a, b)| a * b).sum();
                for ((d, yi), gi) in trow.iter_mut().zip(yrow).zip(grow) {
                    *d = yi * (gi - dot);
                }
            }
            graph.feed(grads, *x, Tensor::from_real(shape(*x), t));
        }
        Op::MatMul(a, b) => {
            let (sa, sb) = (shape(*a), shape(*b));
            let (m, n, p) = (sa[0], sa[1], sb[1]);
            let gv = g.re();
            if graph.wants(*a) {
                let bv = val(*b).re();
                let mut ga = vec![0.0; m * n];
                for i in 0..m {
                    for k in 0..n {
                        ga[i * n + k] =
                            gv[i * p..(i + 1) * p].iter().zip(&bv[k * p..(k + 1) * p]).map(|(x, y)| x * y).sum();
                    }
                }
                graph.feed(grads, *a, Tensor::from_real(sa, ga));
            }
            if graph.wants(*b) {
                let av = val(*a).re();
                let mut gb = vec![0.0; n * p];
                for i in 0..m {
                    for k in 0..n {
                        let aik = av[i * n + k];
                        gb[k * p..(k + 1) * p].iter_mut().zip(&gv[i * p..(i + 1) * p]).for_each(|(d, s)| *d += aik * s);
                    }
                }
                graph.feed(grads, *b, Tensor::from_real(sb, gb));
            }
        }
        Op::VecMat(x, h) => {
            let sh = shape(*h);
            let (nb, nm, nq) = (sh[0], sh[1], sh[2]);
            let gv = g.cx();
            if graph.wants(*x) {
                let hv = val(*h).cx();
                let mut gx = vec![Complex64::new(0.0, 0.0); nb * nm];
                for b in 0..nb {
                    let grow = &gv[b * nq..(b + 1) * nq];
                    for m in 0..nm {
                        let row = &hv[(b * nm + m) * nq..(b * nm + m + 1) * nq];
                        gx[b * nm + m] = row.iter().zip(grow).map(|(hq, gq)| hq.conj() * gq).sum();
                    }
                }
                graph.feed(grads, *x, Tensor::from_complex(shape(*x), gx));
            }
            if graph.wants(*h) {
                let xv = val(*x).cx();
                let mut gh = vec![Complex64::new(0.0, 0.0); nb * nm * nq];
                for b in 0..nb {
                    let grow = &gv[b * nq..(b + 1) * nq];
                    for m in 0..nm {
                        let xc = xv[b * nm + m].conj();
                        gh[(b * nm + m) * nq..(b * nm + m + 1) * nq]
                            .iter_mut()
                            .zip(grow)
                            .for_each(|(d, gq)| *d = xc * gq);
                    }
                }
                graph.feed(grads, *h, Tensor::from_complex(sh, gh));
            }
        }
        Op::Idft(x, axis) => {
            let (outer, len, inner) = split_axis(out.shape(), *axis);
            let t = dft_axis(g.cx(), outer, len, inner, -1.0, 1.0 / len as f64);
            graph.feed(grads, *x, Tensor::from_complex(shape(*x), t));
        }
        Op::Gather(x, axis, indices) => {
            let sx = shape(*x);
            let (outer, len, inner) = split_axis(&sx, *axis);
            let count = indices.len();
            let mut t = val(*x).zeros_like();
            match (t.data(), g.data()) {
                (Data::Real(_), Data::Real(gv)) => {
                    let dst = t.re_mut();
                    for o in 0..outer {
                        for (j, &i) in indices.iter().enumerate() {
                            let src = &gv[(o * count + j) * inner..(o * count + j + 1) * inner];
                            dst[(o * len + i) * inner..(o * len + i + 1) * inner]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(d, s)| *d += s);
                        }
                    }
                }
                (Data::Complex(_), Data::Complex(gv)) => {
                    let dst = t.cx_mut();
                    for o in 0..outer {
                        for (j, &i) in indices.iter().enumerate() {
                            let src = &gv[(o * count + j) * inner..(o * count + j + 1) * inner];
                            dst[(o * len + i) * inner..(o * len + i + 1) * inner]
                                .iter_mut()
                                .zip(src)
                                .for_each(|(d, s)| *d += s);
                        }
                    }
                }
                _ => unreachable!(),
            }
            graph.feed(grads, *x, t);
        }
        Op::Reshape(x) => {
            let t = g.reshaped(&shape(*x)).expect("reshape gradient");
            graph.feed(grads, *x, t);
        }
        Op::SwapLast2(x) => graph.feed(grads, *x, swap_last2_tensor(g)),
        Op::Conv2d(x, w, b) => {
            let (sx, sw) = (shape(*x), shape(*w));
            let (gx, gw, gb) =
                conv2d_backward(val(*x).re(), &sx, val(*w).re(), &sw, g.re(), graph.wants(*x), graph.wants(*w));
            if graph.wants(*x) {
                graph.feed(grads, *x, Tensor::from_real(sx, gx));
            }
            if graph.wants(*w) {
                graph.feed(grads, *w, Tensor::from_real(sw, gw));
            }
            graph.feed(grads, *b, Tensor::from_real(shape(*b), gb));
        }
        Op::AvgPool2(x) => {
            let sx = shape(*x);
            let (c, h, w) = (sx[0], sx[1], sx[2]);
            let (h2, w2) = (h / 2, w / 2);
            let gv = g.re();
            let mut t = vec![0.0; c * h * w];
            for ch in 0..c {
                for y in 0..h {
                    for xx in 0..w {
                        t[(ch * h + y) * w + xx] = 0.25 * gv[(ch * h2 + y / 2) * w2 + xx / 2];
                    }
                }
            }
            graph.feed(grads, *x, Tensor::from_real(sx, t));
        }
        Op::Upsample2(x) => {
            let sx = shape(*x);
            let (c, h, w) = (sx[0], sx[1], sx[2]);
            let gv = g.re();
            let mut t = vec![0.0; c * h * w];
            for ch in 0..c {
                for y in 0..2 * h {
                    for xx in 0..2 * w {
                        t[(ch * h + y / 2) * w + xx / 2] += gv[(ch * 2 * h + y) * 2 * w + xx];
                    }
                }
            }
            graph.feed(grads, *x, Tensor::from_real(sx, t));
        }
        Op::Concat(a, b) => {
            let na = val(*a).len();
            let gv = g.re();
            graph.feed(grads, *a, Tensor::from_real(shape(*a), gv[..na].to_vec()));
            graph.feed(grads, *b, Tensor::from_real(shape(*b), gv[na..].to_vec()));
        }
        Op::Pad2d(x) => {
            let sx = shape(*x);
            let (c, h0, w0) = (sx[0], sx[1], sx[2]);
            let (h, w) = (out.shape()[1], out.shape()[2]);
            let gv = g.re();
            let mut t = Vec::with_capacity(c * h0 * w0);
            for ch in 0..c {
                for y in 0..h0 {
                    t.extend_from_slice(&gv[(ch * h + y) * w..(ch * h + y) * w + w0]);
                }
            }
            graph.feed(grads, *x, Tensor::from_real(sx, t));
        }
        Op::Crop2d(x) => {
            let sx = shape(*x);
            let (c, h0, w0) = (sx[0], sx[1], sx[2]);
            let (h, w) = (out.shape()[1], out.shape()[2]);
            let gv = g.re();
            let mut t = vec![0.0; c * h0 * w0];
            for ch in 0..c {
                for y in 0..h {
                    t[(ch * h0 + y) * w0..(ch * h0 + y) * w0 + w]
                        .copy_from_slice(&gv[(ch * h + y) * w..(ch * h + y + 1) * w]);
                }
            }
            graph.feed(grads, *x, Tensor::from_real(sx, t));
        }
        Op::MaxAll(x, arg) => {
            let mut t = Tensor::zeros(&shape(*x));
            t.re_mut()[*arg] = g.item();
            graph.feed(grads, *x, t);
        }
        Op::PhaseRamp(pos, kfac, qfac) => {
            let np = val(*pos).len();
            let nq = qfac.len();
            let hv = out.cx();
            let gv = g.cx();
            let mut t = vec![0.0; np];
            for (k, &kf) in kfac.iter().enumerate() {
                for (m, tm) in t.iter_mut().enumerate() {
                    let base = (k * np + m) * nq;
                    let acc: f64 = (0..nq).map(|q| qfac[q] * (hv[base + q].conj() * gv[base + q]).im).sum();
                    *tm += kf * acc;
                }
            }
            graph.feed(grads, *pos, Tensor::from_real(shape(*pos), t));
        }
    }
}
