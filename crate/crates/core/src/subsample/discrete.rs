//! Discrete receive selection through a copula-correlated relaxed top-k.
//!
//! Sampling a soft weight vector `psi`:
//! 1. `eps ~ N(0, I)`, `g = L eps`, `sigma_i = sqrt((L L^T)_ii)`;
//! 2. `U_i = Phi(g_i / sigma_i)`, clamped to `[1e-12, 1 - 1e-12]`;
//! 3. `l_i = log alpha_i + log U_i - log(1 - U_i)`;
//! 4. `psi = relaxed_topk(l, n_R, lambda)`.
//!
//! At inference the `n_R` largest `alpha_i` are kept.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

pub const U_CLAMP: f64 = 1e-12;
/// Smallest allowed diagonal entry of the copula factor.
pub const MIN_DIAG: f64 = 1e-6;
/// Floor for the unclaimed mass before taking its log in relaxed top-k.
const MASS_FLOOR: f64 = 1e-30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteDesign {
    /// `log alpha`, length `N_R`.
    pub log_alpha: Vec<f64>,
    /// Lower-triangular `N_R x N_R` factor `L`, row-major.
    pub l_factor: Vec<f64>,
    pub temperature: f64,
    pub budget: usize,
}

impl DiscreteDesign {
    /// Indifferent start: `alpha = 1`, `L = I`.
    pub fn new(n_rx: usize, budget: usize, temperature: f64) -> Result<Self> {
        let mut l_factor = vec![0.0; n_rx * n_rx];
        (0..n_rx).for_each(|i| l_factor[i * n_rx + i] = 1.0);
        let d = Self { log_alpha: vec![0.0; n_rx], l_factor, temperature, budget };
        d.validate()?;
        Ok(d)
    }

    pub fn n_rx(&self) -> usize {
        self.log_alpha.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_rx();
        if self.budget == 0 || self.budget > n {
            return Err(Error::Config(format!("budget {} outside 1..={n}", self.budget)));
        }
        if self.l_factor.len() != n * n {
            return Err(Error::Config("l_factor must be N_R x N_R".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        if self.log_alpha.iter().chain(&self.l_factor).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("discrete design"));
        }
        if (0..n).any(|i| self.l_factor[i * n + i] < MIN_DIAG) {
            return Err(Error::Config(format!("l_factor diagonal must be >= {MIN_DIAG}")));
        }
        Ok(())
    }

    pub fn alpha(&self) -> Vec<f64> {
        self.log_alpha.iter().map(|v| v.exp()).collect()
    }

    /// Restores the invariants after an unconstrained update.
    pub fn project(&mut self) {
        let n = self.n_rx();
        for i in 0..n {
            for j in i + 1..n {
                self.l_factor[i * n + j] = 0.0;
            }
            let d = &mut self.l_factor[i * n + i];
            *d = d.max(MIN_DIAG);
        }
    }

    /// Inference selection: the `budget` largest `alpha`, ascending indices.
    pub fn infer_selection(&self) -> Vec<usize> {
        top_n(&self.log_alpha, self.budget)
    }

    /// Draws the standard normal vector for one relaxed sample.
    pub fn draw_eps<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.n_rx()).map(|_| rng.sample(StandardNormal)).collect()
    }
}

/// Indices of the `n` largest entries, ties to the lower index, returned in
/// ascending order.
pub fn top_n(values: &[f64], n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    let mut keep = order[..n.min(values.len())].to_vec();
    keep.sort_unstable();
    keep
}

/// `n_R` largest `alpha_i` (ties to the lower index).
pub fn infer_discrete_selection(design: &DiscreteDesign) -> Vec<usize> {
    design.infer_selection()
}

/// Copula uniforms as graph nodes. `l_factor` is an `(N, N)` node whose
/// strictly upper part is ignored.
pub fn copula_uniforms_var(g: &mut Graph, l_factor: Var, eps: &[f64]) -> Result<Var> {
    let n = eps.len();
    let mask: Vec<f64> = (0..n * n).map(|i| if i % n <= i / n { 1.0 } else { 0.0 }).collect();
    let mask = g.constant(Tensor::real(&[n, n], mask)?);
    let l = g.mul(l_factor, mask)?;
    let e = g.constant(Tensor::real(&[n, 1], eps.to_vec())?);
    let gl = g.matmul(l, e)?;
    let gl = g.reshape(gl, &[n])?;
    let sq = g.mul(l, l)?;
    let var = g.sum_axis(sq, 1)?;
    let sigma = g.sqrt(var)?;
    if g.value(sigma).re().iter().any(|&s| s <= 0.0) {
        return Err(Error::Config("copula factor has a zero row".into()));
    }
    let inv = g.recip(sigma)?;
    let z = g.mul(gl, inv)?;
    let u = g.normal_cdf(z)?;
    g.clamp(u, U_CLAMP, 1.0 - U_CLAMP)
}

/// `l = log alpha + log U - log(1 - U)` with `U` clamped away from 0 and 1.
pub fn relaxed_logistic_var(g: &mut Graph, log_alpha: Var, u: Var) -> Result<Var> {
    let u = g.clamp(u, U_CLAMP, 1.0 - U_CLAMP)?;
    let lu = g.log(u)?;
    let v = g.affine(u, -1.0, 1.0)?;
    let lv = g.log(v)?;
    let logit = g.sub(lu, lv)?;
    g.add(log_alpha, logit)
}

/// Successive-softmax relaxed top-k: `n` rounds of `softmax(w / lambda)`,
/// each adding `log(1 - onehot)` of the previous round to `w`, summed.
pub fn relaxed_topk_var(g: &mut Graph, l: Var, n: usize, lambda: f64) -> Result<Var> {
    let len = g.shape(l).iter().product::<usize>();
    if g.shape(l).len() != 1 || n == 0 || n > len {
        return Err(Error::Config(format!("relaxed top-k: budget {n} for {len} entries")));
    }
    if lambda.is_nan() || lambda <= 0.0 {
        return Err(Error::Config("relaxed top-k: temperature must be positive".into()));
    }
    if n == len {
        return Ok(g.constant(Tensor::real(&[len], vec![1.0; len])?));
    }
    let mut w = l;
    let mut onehot: Option<Var> = None;
    let mut total: Option<Var> = None;
    for _ in 0..n {
        if let Some(h) = onehot {
            let rest = g.affine(h, -1.0, 1.0)?;
            let rest = g.clamp_min(rest, MASS_FLOOR)?;
            let mask = g.log(rest)?;
            w = g.add(w, mask)?;
        }
        let scaled = g.scale(w, 1.0 / lambda)?;
        let h = g.softmax(scaled)?;
        total = Some(match total {
            None => h,
            Some(t) => g.add(t, h)?,
        });
        onehot = Some(h);
    }
    Ok(total.expect("n >= 1"))
}

/// Soft receive weights for one draw, as graph nodes.
pub fn sample_weights_var(
    g: &mut Graph,
    log_alpha: Var,
    l_factor: Var,
    eps: &[f64],
    n: usize,
    lambda: f64,
) -> Result<Var> {
    let u = copula_uniforms_var(g, l_factor, eps)?;
    let l = relaxed_logistic_var(g, log_alpha, u)?;
    relaxed_topk_var(g, l, n, lambda)
}

/// Plain evaluation of the copula uniforms for a square factor.
pub fn gaussian_copula_uniforms<R: Rng + ?Sized>(l_factor: &[f64], n: usize, rng: &mut R) -> Result<Vec<f64>> {
    if l_factor.len() != n * n {
        return Err(Error::Shape { op: "copula", left: vec![n, n], right: vec![l_factor.len()] });
    }
    let eps: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let mut g = Graph::new();
    let l = g.constant(Tensor::real(&[n, n], l_factor.to_vec())?);
    let u = copula_uniforms_var(&mut g, l, &eps)?;
    Ok(g.value(u).re().to_vec())
}

pub fn relaxed_logistic(alpha: &[f64], u: &[f64]) -> Result<Vec<f64>> {
    if alpha.len() != u.len() {
        return Err(Error::Shape { op: "relaxed_logistic", left: vec![alpha.len()], right: vec![u.len()] });
    }
    if alpha.iter().any(|&a| a.is_nan() || a <= 0.0) {
        return Err(Error::Config("alpha must be positive".into()));
    }
    let mut g = Graph::new();
    let la = g.constant(Tensor::real(&[alpha.len()], alpha.iter().map(|a| a.ln()).collect())?);
    let uv = g.constant(Tensor::real(&[u.len()], u.to_vec())?);
    let l = relaxed_logistic_var(&mut g, la, uv)?;
    Ok(g.value(l).re().to_vec())
}

/// Relaxed Bernoulli `1 / (1 + exp(-l / lambda))`.
pub fn relaxed_bernoulli(l: f64, lambda: f64) -> f64 {
    1.0 / (1.0 + (-l / lambda).exp())
}

pub fn relaxed_topk(l: &[f64], n: usize, lambda: f64) -> Result<Vec<f64>> {
    let mut g = Graph::new();
    let lv = g.constant(Tensor::real(&[l.len()], l.to_vec())?);
    let psi = relaxed_topk_var(&mut g, lv, n, lambda)?;
    Ok(g.value(psi).re().to_vec())
}
