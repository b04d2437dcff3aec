//! Continuous receive placement emulated by space-time interpolation.
//!
//! A receiver at coordinate `i + a` (`0 <= a <= 1`) is emulated from the
//! neighbouring receivers `i, i + 1` at the two acquisitions `t, t + 1`:
//!
//! `c = (1 - b)((1 - a) c[t, i] + a c[t, i+1]) + b((1 - a) c[t+1, i] + a c[t+1, i+1])`
//!
//! with `b = beta_of_alpha(a)` chosen so the noise variance is `sigma^2 / 2`
//! for every `a`.

use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// `1/2 (1 + sqrt(-1 + 1 / (2a^2 - 2a + 1)))`; the radicand is floored at 0
/// against rounding near the endpoints.
pub fn beta_of_alpha(a: f64) -> f64 {
    let q = 2.0 * (a * a) + (-2.0 * a + 1.0);
    0.5 * (1.0 / q - 1.0).max(0.0).sqrt() + 0.5
}

pub fn beta_var(g: &mut Graph, a: Var) -> Result<Var> {
    let sq = g.mul(a, a)?;
    let sq = g.affine(sq, 2.0, 0.0)?;
    let lin = g.affine(a, -2.0, 1.0)?;
    let q = g.add(sq, lin)?;
    let inv = g.recip(q)?;
    let rad = g.affine(inv, 1.0, -1.0)?;
    let rad = g.clamp_min(rad, 0.0)?;
    let root = g.sqrt(rad)?;
    g.affine(root, 0.5, 0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContinuousDesign {
    /// Receiver coordinates in units of the receive pitch, in `[0, N_R - 1]`.
    pub coords: Vec<f64>,
    pub n_rx: usize,
}

impl ContinuousDesign {
    pub fn new(coords: Vec<f64>, n_rx: usize) -> Result<Self> {
        let d = Self { coords, n_rx };
        d.validate()?;
        Ok(d)
    }

    /// `n` coordinates evenly spread over `[0, N_R - 1]`, endpoints included.
    pub fn uniform(n_rx: usize, n: usize) -> Result<Self> {
        if n_rx < 2 {
            return Err(Error::Config("continuous placement needs N_R >= 2".into()));
        }
        let top = (n_rx - 1) as f64;
        let coords = match n {
            0 => return Err(Error::Config("budget must be at least 1".into())),
            1 => vec![0.5 * top],
            _ => (0..n).map(|m| top * m as f64 / (n - 1) as f64).collect(),
        };
        Self::new(coords, n_rx)
    }

    pub fn budget(&self) -> usize {
        self.coords.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rx < 2 {
            return Err(Error::Config("continuous placement needs N_R >= 2".into()));
        }
        if self.coords.is_empty() {
            return Err(Error::Config("budget must be at least 1".into()));
        }
        if self.coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("continuous design"));
        }
        Ok(())
    }

    /// Clamps coordinates into `[0, N_R - 1]`.
    pub fn project(&mut self) {
        let top = (self.n_rx - 1) as f64;
        self.coords.iter_mut().for_each(|c| *c = c.clamp(0.0, top));
    }
}

/// Left neighbour of each coordinate (`floor`, capped at `N_R - 2`).
pub fn left_neighbours(coords: &[f64], n_rx: usize) -> Vec<usize> {
    coords.iter().map(|&c| (c.max(0.0).floor() as usize).min(n_rx - 2)).collect()
}

/// Interpolation weights for `(i, t), (i + 1, t), (i, t + 1), (i + 1, t + 1)`.
pub struct InterpWeights {
    pub left: Vec<usize>,
    pub weights: [Var; 4],
    /// The clamped coordinates (gradient passes through in range).
    pub coords: Var,
}

/// Builds interpolation weights from a coordinate node, clamping values
/// outside `[0, N_R - 1]` with a warning.
pub fn interp_weights_var(g: &mut Graph, coords: Var, n_rx: usize) -> Result<InterpWeights> {
    if n_rx < 2 {
        return Err(Error::Config("continuous placement needs N_R >= 2".into()));
    }
    let top = (n_rx - 1) as f64;
    let raw = g.value(coords).re();
    if raw.iter().any(|&c| !(0.0..=top).contains(&c)) {
        log::warn!("receiver coordinates outside [0, {top}] clamped");
    }
    let coords = g.clamp(coords, 0.0, top)?;
    let left = left_neighbours(g.value(coords).re(), n_rx);
    let n = left.len();
    let base = g.constant(Tensor::real(&[n], left.iter().map(|&i| i as f64).collect())?);
    let a = g.sub(coords, base)?;
    let b = beta_var(g, a)?;
    let one_minus_a = g.affine(a, -1.0, 1.0)?;
    let one_minus_b = g.affine(b, -1.0, 1.0)?;
    let weights = [g.mul(one_minus_b, one_minus_a)?, g.mul(one_minus_b, a)?, g.mul(b, one_minus_a)?, g.mul(b, a)?];
    Ok(InterpWeights { left, weights, coords })
}
