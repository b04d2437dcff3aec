//! Central finite-difference gradient checker.
//!
//! Uses forward evaluation only, so it stays independent of the backward
//! rules it is used to verify.

use num_complex::Complex64;

use super::{Data, Graph, Tensor, Var};
use crate::error::Result;

/// Relative error between an analytic and a numeric gradient:
/// `max |a - n| / max(max |n|, max |a|, 1e-12)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff = analytic.iter().zip(numeric).map(|(a, n)| (a - n).abs()).fold(0.0, f64::max);
    let scale = analytic.iter().chain(numeric).map(|v| v.abs()).fold(1e-12, f64::max);
    diff / scale
}

/// Flattens a tensor into reals, complex entries as (re, im) pairs.
pub fn flatten(t: &Tensor) -> Vec<f64> {
    match t.data() {
        Data::Real(v) => v.clone(),
        Data::Complex(v) => v.iter().flat_map(|z| [z.re, z.im]).collect(),
    }
}

fn perturbed(t: &Tensor, slot: usize, delta: f64) -> Tensor {
    match t.data() {
        Data::Real(v) => {
            let mut v = v.clone();
            v[slot] += delta;
            Tensor::real(t.shape(), v).expect("finite perturbation")
        }
        Data::Complex(v) => {
            let mut v = v.clone();
            let z = &mut v[slot / 2];
            *z += if slot.is_multiple_of(2) { Complex64::new(delta, 0.0) } else { Complex64::new(0.0, delta) };
            Tensor::complex(t.shape(), v).expect("finite perturbation")
        }
    }
}

fn evaluate<F>(inputs: &[Tensor], build: &F) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.constant(t.clone())).collect();
    let root = build(&mut g, &vars)?;
    Ok(g.value(root).item())
}

/// Analytic and central-difference gradients of `build` w.r.t. every input.
pub fn gradients<F>(inputs: &[Tensor], build: F, step: f64) -> Result<Vec<(Vec<f64>, Vec<f64>)>>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    let mut g = Graph::new();
    let vars: Vec<Var> = inputs.iter().map(|t| g.param(t.clone())).collect();
    let root = build(&mut g, &vars)?;
    let grads = g.backward(root)?;
    let mut out = Vec::with_capacity(inputs.len());
    for (i, (t, v)) in inputs.iter().zip(&vars).enumerate() {
        let analytic = grads.get(*v).map(flatten).unwrap_or_else(|| vec![0.0; flatten(t).len()]);
        let mut numeric = Vec::with_capacity(analytic.len());
        for slot in 0..analytic.len() {
            let mut plus = inputs.to_vec();
            plus[i] = perturbed(t, slot, step);
            let mut minus = inputs.to_vec();
            minus[i] = perturbed(t, slot, -step);
            numeric.push((evaluate(&plus, &build)? - evaluate(&minus, &build)?) / (2.0 * step));
        }
        out.push((analytic, numeric));
    }
    Ok(out)
}

/// Worst relative error over all inputs.
pub fn max_relative_error<F>(inputs: &[Tensor], build: F, step: f64) -> Result<f64>
where
    F: Fn(&mut Graph, &[Var]) -> Result<Var>,
{
    Ok(gradients(inputs, build, step)?.iter().map(|(a, n)| relative_error(a, n)).fold(0.0, f64::max))
}

/// Reduces any tensor to a real scalar through a fixed, non-uniform linear
/// projection so every output element influences the root.
pub fn project(g: &mut Graph, out: Var) -> Result<Var> {
    let t = g.value(out).clone();
    let n = t.len();
    let shape = t.shape().to_vec();
    let wr: Vec<f64> = (0..n).map(|i| (1.3 * i as f64 + 0.7).cos()).collect();
    let w_re = g.constant(Tensor::real(&shape, wr)?);
    let re = match t.data() {
        Data::Real(_) => out,
        Data::Complex(_) => {
            let wi: Vec<f64> = (0..n).map(|i| (0.9 * i as f64 + 0.2).sin()).collect();
            let w_im = g.constant(Tensor::real(&shape, wi)?);
            let im = g.imag_part(out)?;
            let im = g.mul(im, w_im)?;
            let im = g.sum(im)?;
            let re = g.real_part(out)?;
            let re = g.mul(re, w_re)?;
            let re = g.sum(re)?;
            return g.add(re, im);
        }
    };
    let p = g.mul(re, w_re)?;
    g.sum(p)
}

type Builder = fn(&mut Graph, &[Var]) -> Result<Var>;
type Sampler = fn(&mut dyn FnMut() -> f64) -> Vec<Tensor>;

/// One differentiable op exercised by the gradient suite: a sampler that
/// draws inputs from a uniform source on `[0, 1)` and a builder that applies
/// the op and projects to a scalar.
pub struct OpCase {
    pub name: &'static str,
    pub sample: Sampler,
    pub build: Builder,
}

fn real_t(shape: &[usize], u: &mut dyn FnMut() -> f64, f: impl Fn(f64) -> f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::real(shape, (0..n).map(|_| f(u())).collect()).unwrap()
}

fn cx_t(shape: &[usize], u: &mut dyn FnMut() -> f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::complex(shape, (0..n).map(|_| Complex64::new(2.0 * u() - 1.0, 2.0 * u() - 1.0)).collect()).unwrap()
}

fn sym(x: f64) -> f64 {
    2.0 * x - 1.0
}

/// Away from zero: magnitude in [0.2, 1], random sign.
fn off_zero(x: f64) -> f64 {
    let m = 0.2 + 0.8 * (2.0 * x).fract();
    if x < 0.5 {
        -m
    } else {
        m
    }
}

/// Catalogue of every op with a backward rule.
pub fn op_cases() -> Vec<OpCase> {
    macro_rules! case {
        ($name:expr, |$u:ident| $sample:expr, |$g:ident, $v:ident| $build:expr) => {
            OpCase {
                name: $name,
                sample: |$u: &mut dyn FnMut() -> f64| $sample,
                build: |$g: &mut Graph, $v: &[Var]| {
                    let out = $build;
                    project($g, out)
                },
            }
        };
    }
    vec![
        case!("add", |u| vec![real_t(&[3, 4], u, sym), real_t(&[3, 4], u, sym)], |g, v| g.add(v[0], v[1])?),
        case!("add_complex", |u| vec![cx_t(&[5], u), cx_t(&[5], u)], |g, v| g.add(v[0], v[1])?),
        case!("sub", |u| vec![cx_t(&[2, 3], u), cx_t(&[2, 3], u)], |g, v| g.sub(v[0], v[1])?),
        case!("mul", |u| vec![real_t(&[3, 4], u, sym), real_t(&[3, 4], u, sym)], |g, v| g.mul(v[0], v[1])?),
        case!("mul_complex", |u| vec![cx_t(&[6], u), cx_t(&[6], u)], |g, v| g.mul(v[0], v[1])?),
        case!("mul_bcast", |u| vec![cx_t(&[2, 3, 4], u), real_t(&[4], u, sym)], |g, v| g.mul_bcast(v[0], v[1])?),
        case!("mul_bcast_real", |u| vec![real_t(&[3, 2, 2], u, sym), real_t(&[2, 2], u, sym)], |g, v| g
            .mul_bcast(v[0], v[1])?),
        case!("mul_scalar", |u| vec![cx_t(&[4, 2], u), real_t(&[], u, sym)], |g, v| g.mul_scalar(v[0], v[1])?),
        case!("affine", |u| vec![real_t(&[7], u, sym)], |g, v| g.affine(v[0], -1.7, 0.3)?),
        case!("affine_complex", |u| vec![cx_t(&[3], u)], |g, v| g.scale(v[0], 2.5)?),
        case!("recip", |u| vec![real_t(&[6], u, off_zero)], |g, v| g.recip(v[0])?),
        case!("exp", |u| vec![real_t(&[6], u, sym)], |g, v| g.exp(v[0])?),
        case!("log", |u| vec![real_t(&[6], u, |x| 0.2 + x)], |g, v| g.log(v[0])?),
        case!("sqrt", |u| vec![real_t(&[6], u, |x| 0.2 + x)], |g, v| g.sqrt(v[0])?),
        case!("sigmoid", |u| vec![real_t(&[6], u, |x| 4.0 * sym(x))], |g, v| g.sigmoid(v[0])?),
        case!("relu", |u| vec![real_t(&[8], u, off_zero)], |g, v| g.relu(v[0])?),
        case!("clamp", |u| vec![real_t(&[8], u, off_zero)], |g, v| g.clamp(v[0], -0.5, 0.5)?),
        case!("clamp_min", |u| vec![real_t(&[8], u, off_zero)], |g, v| g.clamp_min(v[0], 0.5)?),
        case!("normal_cdf", |u| vec![real_t(&[6], u, |x| 3.0 * sym(x))], |g, v| g.normal_cdf(v[0])?),
        case!("magnitude", |u| vec![cx_t(&[3, 3], u)], |g, v| g.magnitude(v[0])?),
        case!("real_part", |u| vec![cx_t(&[4], u)], |g, v| g.real_part(v[0])?),
        case!("imag_part", |u| vec![cx_t(&[4], u)], |g, v| g.imag_part(v[0])?),
        case!("sum", |u| vec![cx_t(&[2, 3], u)], |g, v| g.sum(v[0])?),
        case!("sum_axis", |u| vec![real_t(&[2, 3, 4], u, sym)], |g, v| g.sum_axis(v[0], 1)?),
        case!("mean_axis", |u| vec![cx_t(&[3, 4], u)], |g, v| g.mean_axis(v[0], 0)?),
        case!("l2_norm", |u| vec![real_t(&[3, 4], u, sym)], |g, v| g.l2_norm(v[0])?),
        case!("softmax", |u| vec![real_t(&[2, 5], u, |x| 3.0 * sym(x))], |g, v| g.softmax(v[0])?),
        case!("matmul", |u| vec![real_t(&[3, 4], u, sym), real_t(&[4, 2], u, sym)], |g, v| g.matmul(v[0], v[1])?),
        case!("vecmat", |u| vec![cx_t(&[3, 4], u), cx_t(&[3, 4, 5], u)], |g, v| g.vecmat(v[0], v[1])?),
        case!("idft_axis0", |u| vec![cx_t(&[6, 3], u)], |g, v| g.idft(v[0], 0)?),
        case!("idft_axis1", |u| vec![cx_t(&[2, 5], u)], |g, v| g.idft(v[0], 1)?),
        case!("gather", |u| vec![cx_t(&[3, 4, 2], u)], |g, v| g.gather(v[0], 1, &[3, 0, 3])?),
        case!("swap_last2", |u| vec![cx_t(&[2, 3, 4], u)], |g, v| g.swap_last2(v[0])?),
        case!("reshape", |u| vec![real_t(&[2, 6], u, sym)], |g, v| g.reshape(v[0], &[3, 4])?),
        case!(
            "conv2d",
            |u| vec![real_t(&[2, 5, 4], u, sym), real_t(&[3, 2, 3, 3], u, sym), real_t(&[3], u, sym)],
            |g, v| g.conv2d(v[0], v[1], v[2])?
        ),
        case!("avg_pool2", |u| vec![real_t(&[2, 4, 6], u, sym)], |g, v| g.avg_pool2(v[0])?),
        case!("upsample2", |u| vec![real_t(&[2, 2, 3], u, sym)], |g, v| g.upsample2(v[0])?),
        case!("concat", |u| vec![real_t(&[1, 2, 3], u, sym), real_t(&[2, 2, 3], u, sym)], |g, v| g
            .concat(v[0], v[1])?),
        case!("pad2d", |u| vec![real_t(&[2, 3, 3], u, sym)], |g, v| g.pad2d(v[0], 4, 5)?),
        case!("crop2d", |u| vec![real_t(&[2, 4, 5], u, sym)], |g, v| g.crop2d(v[0], 3, 3)?),
        case!("max_all", |u| vec![real_t(&[9], u, sym)], |g, v| g.max_all(v[0])?),
        case!("phase_ramp", |u| vec![real_t(&[3], u, |x| 4.0 * x)], |g, v| g.phase_ramp(
            v[0],
            std::sync::Arc::new(vec![0.9, 1.0, 1.1]),
            std::sync::Arc::new(vec![-0.5, 0.0, 0.25, 0.8])
        )?),
    ]
}
