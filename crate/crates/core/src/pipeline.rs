//! Acquisition followed by beamforming, assembled on a graph.
//!
//! The `direct` builders materialize the sub-sampled measurement matrix and
//! beamform it with an explicit steering table. The `factored` builders use
//! the precomputed per-cube bases and are what training runs; tests hold the
//! two to the same values and gradients.

use crate::autodiff::{Graph, Tensor, Var};
use crate::beamform::{
    beamform, beamform_var, build_steering, design_positions, ContinuousBasis, DiscreteBasis, RangeAzimuthMap,
    SteeringMatrix,
};
use crate::error::Result;
use crate::radar::{ArrayConfig, BasebandCube};
use crate::subsample::{
    apply_continuous, apply_continuous_var, apply_discrete_hard, apply_discrete_var, interp_weights_var, steering_var,
    Acquisition, ContinuousDesign,
};

/// Soft discrete map from receive weights `psi`; `h_full` is the
/// full-array steering table.
pub fn discrete_map_direct(g: &mut Graph, cube: &BasebandCube, h_full: &SteeringMatrix, psi: Var) -> Result<Var> {
    let s = g.constant(cube.temporal_average());
    let (x, scale) = apply_discrete_var(g, s, psi)?;
    let h = g.constant_shared(h_full.phases().clone());
    beamform_var(g, x, h, Some(scale))
}

pub fn discrete_map_factored(g: &mut Graph, basis: &DiscreteBasis, n_tx: usize, psi: Var) -> Result<Var> {
    let mass = g.sum(psi)?;
    let mass = g.scale(mass, n_tx as f64)?;
    let scale = g.recip(mass)?;
    basis.beamform_var(g, psi, scale)
}

/// Continuous map from a coordinate node.
pub fn continuous_map_direct(g: &mut Graph, cfg: &ArrayConfig, cube: &BasebandCube, coords: Var) -> Result<Var> {
    let w = interp_weights_var(g, coords, cfg.n_rx)?;
    let c = g.constant_shared(cube.tensor().clone());
    let x = apply_continuous_var(g, c, &w)?;
    let h = steering_var(g, cfg, w.coords)?;
    beamform_var(g, x, h, None)
}

pub fn continuous_map_factored(g: &mut Graph, basis: &ContinuousBasis, n_rx: usize, coords: Var) -> Result<Var> {
    let w = interp_weights_var(g, coords, n_rx)?;
    basis.beamform_var(g, &w.left, w.weights, w.coords)
}

/// Map of a cube under a fixed design, as used for evaluation.
pub fn acquire_map(cfg: &ArrayConfig, cube: &BasebandCube, acq: &Acquisition) -> Result<RangeAzimuthMap> {
    acq.validate(cfg.n_rx)?;
    let x = match acq {
        Acquisition::Subset(sel) => apply_discrete_hard(cube, sel)?,
        Acquisition::Coords(c) => apply_continuous(cube, &ContinuousDesign::new(c.clone(), cfg.n_rx)?)?,
    };
    let h = build_steering(cfg, &design_positions(cfg, &acq.rx_coords()))?;
    beamform(&x, &h)
}

/// Factored form of [`acquire_map`] for a fixed design on a graph.
pub fn acquire_map_var(
    g: &mut Graph,
    cfg: &ArrayConfig,
    discrete: Option<&DiscreteBasis>,
    continuous: Option<&ContinuousBasis>,
    acq: &Acquisition,
) -> Result<Var> {
    match (acq, discrete, continuous) {
        (Acquisition::Subset(sel), Some(basis), _) => {
            let mut w = vec![0.0; cfg.n_rx];
            sel.iter().for_each(|&r| w[r] = 1.0);
            let psi = g.constant(Tensor::real(&[cfg.n_rx], w)?);
            let scale = g.constant(Tensor::scalar(1.0 / (cfg.n_tx * sel.len()) as f64));
            basis.beamform_var(g, psi, scale)
        }
        (Acquisition::Coords(c), _, Some(basis)) => {
            let coords = g.constant(Tensor::real(&[c.len()], c.clone())?);
            continuous_map_factored(g, basis, cfg.n_rx, coords)
        }
        _ => Err(crate::Error::Config("no precomputed basis for this design".into())),
    }
}
