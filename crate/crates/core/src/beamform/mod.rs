//! Delay-and-sum beamforming from sub-sampled measurements to a
//! range-azimuth magnitude map.
//!
//! `Z[n, q] = | IDFT_k( mean_m S_low[k, m] H[k, m, q] ) |` where the steering
//! table `H[k, m, q] = exp(+i phase_k pos_m sin(theta_q))` is the conjugate of
//! the simulator's azimuth phase, with the per-tone factor `phase_k` scaled by
//! `f_k / f_c` (wideband steering).

mod factored;
mod io;

use std::sync::Arc;

use num_complex::Complex64;

pub use factored::{ContinuousBasis, DiscreteBasis};
pub use io::{decode_map, decode_pgm, encode_map, encode_pgm, triptych};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::radar::ArrayConfig;

/// Steering phases for one set of active virtual elements.
#[derive(Clone, Debug)]
pub struct SteeringMatrix {
    phases: Arc<Tensor>,
    positions: Vec<f64>,
    azimuth_grid: Vec<f64>,
}

impl SteeringMatrix {
    /// Complex table of shape `(n_range, n_active, n_azimuth)`.
    pub fn phases(&self) -> &Arc<Tensor> {
        &self.phases
    }

    /// Active element positions in units of the virtual pitch.
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn azimuth_grid(&self) -> &[f64] {
        &self.azimuth_grid
    }
}

/// Builds `H` for elements at `positions` (virtual-pitch units).
pub fn build_steering(cfg: &ArrayConfig, positions: &[f64]) -> Result<SteeringMatrix> {
    cfg.validate()?;
    if positions.is_empty() {
        return Err(Error::Config("steering needs at least one active element".into()));
    }
    if positions.iter().any(|p| !p.is_finite()) {
        return Err(Error::NonFinite("steering positions"));
    }
    let kfac = cfg.phase_factors();
    let sin = cfg.sin_grid();
    let mut values = Vec::with_capacity(kfac.len() * positions.len() * sin.len());
    for &kf in &kfac {
        for &p in positions {
            values.extend(sin.iter().map(|&s| Complex64::from_polar(1.0, kf * p * s)));
        }
    }
    let phases = Tensor::complex(&[cfg.n_range, positions.len(), cfg.n_azimuth], values)?;
    Ok(SteeringMatrix { phases: Arc::new(phases), positions: positions.to_vec(), azimuth_grid: cfg.azimuth_grid() })
}

/// All virtual elements, `tx * n_rx + rx`.
pub fn full_positions(cfg: &ArrayConfig) -> Vec<f64> {
    (0..cfg.n_virtual()).map(|p| p as f64).collect()
}

/// Virtual positions of a receive design, transmitter-major: element
/// `tx * rx_coords.len() + m` sits at `tx * n_rx + rx_coords[m]`.
pub fn design_positions(cfg: &ArrayConfig, rx_coords: &[f64]) -> Vec<f64> {
    (0..cfg.n_tx).flat_map(|tx| rx_coords.iter().map(move |&r| (tx * cfg.n_rx) as f64 + r)).collect()
}

/// Nonnegative magnitude image of shape `(n_range, n_azimuth)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RangeAzimuthMap {
    n_range: usize,
    n_azimuth: usize,
    values: Vec<f64>,
}

impl RangeAzimuthMap {
    pub fn new(n_range: usize, n_azimuth: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_range * n_azimuth {
            return Err(Error::Shape {
                op: "range_azimuth_map",
                left: vec![n_range, n_azimuth],
                right: vec![values.len()],
            });
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Format { what: "map", reason: "entries must be finite and nonnegative".into() });
        }
        Ok(Self { n_range, n_azimuth, values })
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let s = t.shape();
        let values =
            t.as_real().ok_or(Error::Dtype { op: "range_azimuth_map", expected: crate::autodiff::Dtype::Real })?;
        if s.len() != 2 {
            return Err(Error::Shape { op: "range_azimuth_map", left: s.to_vec(), right: vec![0, 0] });
        }
        Self::new(s[0], s[1], values.to_vec())
    }

    pub fn to_tensor(&self) -> Tensor {
        Tensor::real(&[self.n_range, self.n_azimuth], self.values.clone()).expect("finite map")
    }

    pub fn n_range(&self) -> usize {
        self.n_range
    }

    pub fn n_azimuth(&self) -> usize {
        self.n_azimuth
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, n: usize, q: usize) -> f64 {
        self.values[n * self.n_azimuth + q]
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    /// `(range bin, azimuth bin)` of the largest entry; first one on ties.
    pub fn argmax(&self) -> (usize, usize) {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        (best / self.n_azimuth, best % self.n_azimuth)
    }
}

/// Graph form of the beamformer. `s_low` is complex `(n_range, m)`, `h` is
/// `(n_range, m, n_azimuth)`. The element mean uses `1/m` unless `scale`
/// (a real scalar node) is given, which soft weighting uses to divide by
/// the effective weight mass instead.
pub fn beamform_var(g: &mut Graph, s_low: Var, h: Var, scale: Option<Var>) -> Result<Var> {
    let m = g.shape(s_low).get(1).copied().unwrap_or(0);
    let y = g.vecmat(s_low, h)?;
    let y = match scale {
        Some(s) => g.mul_scalar(y, s)?,
        None => g.scale(y, 1.0 / m.max(1) as f64)?,
    };
    let y = g.idft(y, 0)?;
    g.magnitude(y)
}

/// Beamforms a complex `(n_range, m)` measurement matrix.
pub fn beamform(s_low: &Tensor, h: &SteeringMatrix) -> Result<RangeAzimuthMap> {
    let mut g = Graph::new();
    let x = g.constant(s_low.clone());
    let hv = g.constant_shared(h.phases.clone());
    let z = beamform_var(&mut g, x, hv, None)?;
    RangeAzimuthMap::from_tensor(g.value(z))
}

/// Full-array map of a cube: temporal average, all virtual elements.
pub fn full_array_map(cube: &crate::radar::BasebandCube, h_full: &SteeringMatrix) -> Result<RangeAzimuthMap> {
    let (k, t, r) = cube.dims();
    let avg = cube.temporal_average().reshaped(&[k, t * r])?;
    beamform(&avg, h_full)
}
