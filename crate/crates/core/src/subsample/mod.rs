//! The acquisition operator: which receive channels reach the beamformer.
//!
//! Virtual elements are indexed `tx * N_R + rx`, so selecting receiver `r`
//! keeps the strided column set `{tx * N_R + r}`. Sub-sampled matrices are
//! transmitter-major: column `tx * n_R + m` is transmitter `tx`, channel `m`.

mod continuous;
mod discrete;
mod export;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use continuous::{beta_of_alpha, beta_var, interp_weights_var, left_neighbours, ContinuousDesign, InterpWeights};
pub use discrete::{
    copula_uniforms_var, gaussian_copula_uniforms, infer_discrete_selection, relaxed_bernoulli, relaxed_logistic,
    relaxed_logistic_var, relaxed_topk, relaxed_topk_var, sample_weights_var, top_n, DiscreteDesign, MIN_DIAG, U_CLAMP,
};
pub use export::{export_design, parse_design, DesignMeta};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::radar::{ArrayConfig, BasebandCube};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Discrete,
    Continuous,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Discrete => "discrete",
            Scenario::Continuous => "continuous",
        }
    }
}

impl std::str::FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "discrete" => Ok(Scenario::Discrete),
            "continuous" => Ok(Scenario::Continuous),
            _ => Err(Error::Config(format!("unknown scenario `{s}`"))),
        }
    }
}

/// A fixed (hard) receive design, the form used at evaluation and exported
/// for programming the hardware.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Acquisition {
    /// Ascending receiver indices.
    Subset(Vec<usize>),
    /// Receiver coordinates in receive-pitch units.
    Coords(Vec<f64>),
}

impl Acquisition {
    pub fn scenario(&self) -> Scenario {
        match self {
            Acquisition::Subset(_) => Scenario::Discrete,
            Acquisition::Coords(_) => Scenario::Continuous,
        }
    }

    pub fn budget(&self) -> usize {
        match self {
            Acquisition::Subset(s) => s.len(),
            Acquisition::Coords(c) => c.len(),
        }
    }

    /// Receiver coordinates (indices as reals for subsets).
    pub fn rx_coords(&self) -> Vec<f64> {
        match self {
            Acquisition::Subset(s) => s.iter().map(|&r| r as f64).collect(),
            Acquisition::Coords(c) => c.clone(),
        }
    }

    pub fn validate(&self, n_rx: usize) -> Result<()> {
        match self {
            Acquisition::Subset(s) => {
                if s.is_empty() || s.windows(2).any(|w| w[0] >= w[1]) || s.last().is_some_and(|&r| r >= n_rx) {
                    return Err(Error::Config(format!("subset must be ascending, distinct, and below {n_rx}")));
                }
            }
            Acquisition::Coords(c) => {
                let top = n_rx.saturating_sub(1) as f64;
                if n_rx < 2 || c.is_empty() || c.iter().any(|x| !(x.is_finite() && (0.0..=top).contains(x))) {
                    return Err(Error::Config(format!("coordinates must lie in [0, {top}]")));
                }
            }
        }
        Ok(())
    }
}

/// Soft discrete acquisition on the temporally averaged cube `(K, T, R)`:
/// receiver group `r` scaled by `psi[r]`. Returns the `(K, T R)` matrix
/// and the element-mean factor `1 / (N_T sum psi)`.
pub fn apply_discrete_var(g: &mut Graph, s_bar: Var, psi: Var) -> Result<(Var, Var)> {
    let s = g.shape(s_bar).to_vec();
    if s.len() != 3 || g.shape(psi) != [s[2]] {
        return Err(Error::Shape { op: "apply_discrete", left: s, right: g.shape(psi).to_vec() });
    }
    let x = g.mul_bcast(s_bar, psi)?;
    let x = g.reshape(x, &[s[0], s[1] * s[2]])?;
    let mass = g.sum(psi)?;
    let mass = g.scale(mass, s[1] as f64)?;
    let scale = g.recip(mass)?;
    Ok((x, scale))
}

/// Soft discrete acquisition with fixed weights.
pub fn apply_discrete(cube: &BasebandCube, psi: &[f64]) -> Result<Tensor> {
    let mut g = Graph::new();
    let s = g.constant(cube.temporal_average());
    let p = g.constant(Tensor::real(&[psi.len()], psi.to_vec())?);
    let (x, _) = apply_discrete_var(&mut g, s, p)?;
    Ok(g.value(x).clone())
}

/// Hard discrete acquisition: the averaged cube restricted to `selection`.
pub fn apply_discrete_hard(cube: &BasebandCube, selection: &[usize]) -> Result<Tensor> {
    let (k, t, r) = cube.dims();
    if selection.is_empty() || selection.iter().any(|&i| i >= r) {
        return Err(Error::Shape { op: "apply_discrete_hard", left: vec![r], right: selection.to_vec() });
    }
    let mut g = Graph::new();
    let s = g.constant(cube.temporal_average());
    let x = g.gather(s, 2, selection)?;
    let x = g.reshape(x, &[k, t * selection.len()])?;
    Ok(g.value(x).clone())
}

fn stack_pairs(g: &mut Graph, first: Var, second: Var) -> Result<Var> {
    let n = g.shape(first)[0];
    let both = g.concat(first, second)?;
    let both = g.reshape(both, &[2, n])?;
    g.swap_last2(both)
}

/// Continuous acquisition on the raw cube `(K, T, R, 2)`. Returns `(K, T n_R)`.
pub fn apply_continuous_var(g: &mut Graph, cube: Var, w: &InterpWeights) -> Result<Var> {
    let s = g.shape(cube).to_vec();
    if s.len() != 4 || s[3] != 2 {
        return Err(Error::Shape { op: "apply_continuous", left: s, right: vec![0, 0, 0, 2] });
    }
    let n = w.left.len();
    let right: Vec<usize> = w.left.iter().map(|i| i + 1).collect();
    let left_cols = g.gather(cube, 2, &w.left)?;
    let right_cols = g.gather(cube, 2, &right)?;
    let wl = stack_pairs(g, w.weights[0], w.weights[2])?;
    let wr = stack_pairs(g, w.weights[1], w.weights[3])?;
    let a = g.mul_bcast(left_cols, wl)?;
    let b = g.mul_bcast(right_cols, wr)?;
    let sum = g.add(a, b)?;
    let ch = g.sum_axis(sum, 3)?;
    g.reshape(ch, &[s[0], s[1] * n])
}

pub fn apply_continuous(cube: &BasebandCube, design: &ContinuousDesign) -> Result<Tensor> {
    design.validate()?;
    let mut g = Graph::new();
    let c = g.constant_shared(cube.tensor().clone());
    let coords = g.constant(Tensor::real(&[design.budget()], design.coords.clone())?);
    let w = interp_weights_var(&mut g, coords, design.n_rx)?;
    let x = apply_continuous_var(&mut g, c, &w)?;
    Ok(g.value(x).clone())
}

/// Steering table for receivers at coordinate node `coords`, differentiable
/// in the coordinates: element `tx * n + m` sits at `tx * N_R + coords[m]`.
pub fn steering_var(g: &mut Graph, cfg: &ArrayConfig, coords: Var) -> Result<Var> {
    let n = g.shape(coords)[0];
    let idx: Vec<usize> = (0..cfg.n_tx).flat_map(|_| 0..n).collect();
    let offsets: Vec<f64> = (0..cfg.n_tx).flat_map(|tx| std::iter::repeat_n((tx * cfg.n_rx) as f64, n)).collect();
    let rep = g.gather(coords, 0, &idx)?;
    let off = g.constant(Tensor::real(&[idx.len()], offsets)?);
    let pos = g.add(rep, off)?;
    g.phase_ramp(pos, Arc::new(cfg.phase_factors()), Arc::new(cfg.sin_grid()))
}

#[cfg(test)]
mod tests;
