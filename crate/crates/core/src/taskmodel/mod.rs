//! Encoder-decoder reconstruction network with symmetric skips.
//!
//! For depth `d` and base width `c`, encoder level `i` runs two convolutions
//! to `c 2^i` channels and average-pools by 2; the bottleneck runs two
//! convolutions at `c 2^d`; each decoder level upsamples (nearest), concatenates
//! the matching encoder output and runs two convolutions back to `c 2^i`. A
//! final `1 x 1` convolution maps to one channel. Every convolution except
//! the last is followed by `max(0, .)`.
//!
//! The input map is divided by its maximum, zero-padded to a multiple of
//! `2^d`, processed, cropped back and multiplied by the same maximum. With
//! `residual` set the network predicts a correction to the normalized input.
//! The output is `max(0, .)` so it remains a magnitude map.
//!
//! Parameters are stored in layer order (encoder, bottleneck, decoder,
//! output), each layer as weight `(out, in, k, k)` then bias `(out)`.

mod checkpoint;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};

use crate::autodiff::{Graph, Tensor, Var};
use crate::beamform::RangeAzimuthMap;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UNetDescriptor {
    pub depth: usize,
    pub base_channels: usize,
    pub kernel: usize,
    pub residual: bool,
}

impl Default for UNetDescriptor {
    fn default() -> Self {
        Self { depth: 3, base_channels: 8, kernel: 3, residual: true }
    }
}

impl UNetDescriptor {
    pub fn validate(&self) -> Result<()> {
        if !(1..=6).contains(&self.depth) {
            return Err(Error::Config("depth must be in 1..=6".into()));
        }
        if !(1..=256).contains(&self.base_channels) {
            return Err(Error::Config("base_channels must be in 1..=256".into()));
        }
        if self.kernel.is_multiple_of(2) || self.kernel > 15 {
            return Err(Error::Config("kernel must be odd and at most 15".into()));
        }
        Ok(())
    }

    /// `(in, out, kernel)` of every convolution in storage order.
    pub fn layers(&self) -> Vec<(usize, usize, usize)> {
        let (d, c, k) = (self.depth, self.base_channels, self.kernel);
        let width = |i: usize| c << i;
        let mut out = Vec::with_capacity(4 * d + 3);
        let mut prev = 1;
        for i in 0..d {
            out.push((prev, width(i), k));
            out.push((width(i), width(i), k));
            prev = width(i);
        }
        out.push((prev, width(d), k));
        out.push((width(d), width(d), k));
        for i in (0..d).rev() {
            out.push((width(i + 1) + width(i), width(i), k));
            out.push((width(i), width(i), k));
        }
        out.push((c, 1, 1));
        out
    }

    /// `sum over layers of out * in * k^2 + out`.
    pub fn param_count(&self) -> usize {
        self.layers().iter().map(|&(i, o, k)| o * i * k * k + o).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub descriptor: UNetDescriptor,
    /// Weight and bias per layer, alternating.
    pub tensors: Vec<Tensor>,
}

impl ModelParams {
    /// He-uniform weights (`U(-b, b)`, `b = sqrt(6 / fan_in)`, variance
    /// `2 / fan_in`) and zero biases.
    pub fn init<R: Rng + ?Sized>(descriptor: UNetDescriptor, rng: &mut R) -> Result<Self> {
        descriptor.validate()?;
        let mut tensors = Vec::new();
        for (cin, cout, k) in descriptor.layers() {
            let bound = (6.0 / (cin * k * k) as f64).sqrt();
            let w = (0..cout * cin * k * k).map(|_| rng.gen_range(-bound..bound)).collect();
            tensors.push(Tensor::real(&[cout, cin, k, k], w)?);
            tensors.push(Tensor::zeros(&[cout]));
        }
        Ok(Self { descriptor, tensors })
    }

    pub fn from_flat(descriptor: UNetDescriptor, flat: &[f64]) -> Result<Self> {
        descriptor.validate()?;
        if flat.len() != descriptor.param_count() {
            return Err(Error::Shape {
                op: "model_params",
                left: vec![descriptor.param_count()],
                right: vec![flat.len()],
            });
        }
        let mut tensors = Vec::new();
        let mut rest = flat;
        for (cin, cout, k) in descriptor.layers() {
            let (w, tail) = rest.split_at(cout * cin * k * k);
            let (b, tail) = tail.split_at(cout);
            tensors.push(Tensor::real(&[cout, cin, k, k], w.to_vec())?);
            tensors.push(Tensor::real(&[cout], b.to_vec())?);
            rest = tail;
        }
        Ok(Self { descriptor, tensors })
    }

    pub fn flat(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.re().iter().copied()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Tensor::is_finite)
    }
}

/// Parameter nodes of a network on one graph.
pub struct NetVars {
    pub descriptor: UNetDescriptor,
    pub vars: Vec<Var>,
}

impl NetVars {
    pub fn params(g: &mut Graph, p: &ModelParams) -> Self {
        Self { descriptor: p.descriptor, vars: p.tensors.iter().map(|t| g.param(t.clone())).collect() }
    }

    pub fn constants(g: &mut Graph, p: &ModelParams) -> Self {
        Self { descriptor: p.descriptor, vars: p.tensors.iter().map(|t| g.constant(t.clone())).collect() }
    }
}

/// Applies the network to a `(H, W)` map node; returns `(H, W)`.
pub fn forward_var(g: &mut Graph, net: &NetVars, z: Var) -> Result<Var> {
    let s = g.shape(z).to_vec();
    if s.len() != 2 {
        return Err(Error::Shape { op: "unet", left: s, right: vec![0, 0] });
    }
    let (h, w) = (s[0], s[1]);
    let d = net.descriptor.depth;
    let m = 1usize << d;
    let (hp, wp) = (h.div_ceil(m) * m, w.div_ceil(m) * m);

    let peak = g.max_all(z)?;
    let peak = g.clamp_min(peak, 1e-12)?;
    let inv = g.recip(peak)?;
    let xn = g.mul_scalar(z, inv)?;
    let x = g.reshape(xn, &[1, h, w])?;
    let mut x = g.pad2d(x, hp, wp)?;

    let mut layer = 0;
    let mut conv = |g: &mut Graph, x: Var, relu: bool| -> Result<Var> {
        let y = g.conv2d(x, net.vars[2 * layer], net.vars[2 * layer + 1])?;
        layer += 1;
        if relu {
            g.relu(y)
        } else {
            Ok(y)
        }
    };
    let mut skips = Vec::with_capacity(d);
    for _ in 0..d {
        x = conv(g, x, true)?;
        x = conv(g, x, true)?;
        skips.push(x);
        x = g.avg_pool2(x)?;
    }
    x = conv(g, x, true)?;
    x = conv(g, x, true)?;
    for skip in skips.into_iter().rev() {
        let up = g.upsample2(x)?;
        x = g.concat(up, skip)?;
        x = conv(g, x, true)?;
        x = conv(g, x, true)?;
    }
    x = conv(g, x, false)?;

    let x = g.crop2d(x, h, w)?;
    let mut x = g.reshape(x, &[h, w])?;
    if net.descriptor.residual {
        x = g.add(x, xn)?;
    }
    let x = g.relu(x)?;
    g.mul_scalar(x, peak)
}

/// Plain forward pass.
pub fn forward(z: &RangeAzimuthMap, params: &ModelParams) -> Result<RangeAzimuthMap> {
    let mut g = Graph::new();
    let net = NetVars::constants(&mut g, params);
    let x = g.constant(z.to_tensor());
    let y = forward_var(&mut g, &net, x)?;
    RangeAzimuthMap::from_tensor(g.value(y))
}

#[cfg(test)]
mod tests;
