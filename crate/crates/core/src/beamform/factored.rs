//! Factored beamforming for training.
//!
//! A virtual element at `tx * N_R + x` has steering phase
//! `exp(i f_k (tx N_R) s_q) * exp(i f_k x s_q)`, so the transmitter sum can be
//! folded into the data once per cube. What remains per step is a sum over
//! receive channels, which is what the design parameters act on. Both
//! routes are checked against the direct `vecmat` beamformer in tests.

use std::sync::Arc;

use num_complex::Complex64;

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::Result;
use crate::radar::{ArrayConfig, BasebandCube};

/// `out[k, q, r] = sum_tx x(k, tx, r) exp(i f_k tx N_R s_q)`.
fn fold_tx(cfg: &ArrayConfig, x: impl Fn(usize, usize, usize) -> Complex64) -> Vec<Complex64> {
    let (nk, nt, nr) = (cfg.n_range, cfg.n_tx, cfg.n_rx);
    let sin = cfg.sin_grid();
    let nq = sin.len();
    let kfac = cfg.phase_factors();
    let mut out = vec![Complex64::new(0.0, 0.0); nk * nq * nr];
    for k in 0..nk {
        for tx in 0..nt {
            let row: Vec<Complex64> = (0..nr).map(|r| x(k, tx, r)).collect();
            for (q, &s) in sin.iter().enumerate() {
                let a = Complex64::from_polar(1.0, kfac[k] * (tx * nr) as f64 * s);
                let dst = &mut out[(k * nq + q) * nr..(k * nq + q + 1) * nr];
                dst.iter_mut().zip(&row).for_each(|(d, v)| *d += a * v);
            }
        }
    }
    out
}

fn finish(g: &mut Graph, per_rx: Var, scale: Var) -> Result<Var> {
    let y = g.sum_axis(per_rx, 2)?;
    let y = g.mul_scalar(y, scale)?;
    let y = g.idft(y, 0)?;
    g.magnitude(y)
}

/// Precomputed receive-channel beams for discrete selection:
/// `P[k, q, r] = exp(i f_k r s_q) sum_tx Sbar[k, tx, r] exp(i f_k tx N_R s_q)`.
#[derive(Clone, Debug)]
pub struct DiscreteBasis {
    beams: Arc<Tensor>,
}

impl DiscreteBasis {
    pub fn new(cfg: &ArrayConfig, cube: &BasebandCube) -> Self {
        let sin = cfg.sin_grid();
        let kfac = cfg.phase_factors();
        let (nq, nr) = (sin.len(), cfg.n_rx);
        let mut p = fold_tx(cfg, |k, tx, r| (cube.get(k, tx, r, 0) + cube.get(k, tx, r, 1)) * 0.5);
        for (i, v) in p.iter_mut().enumerate() {
            let (k, q, r) = (i / (nq * nr), (i / nr) % nq, i % nr);
            *v *= Complex64::from_polar(1.0, kfac[k] * r as f64 * sin[q]);
        }
        let beams = Tensor::complex(&[cfg.n_range, nq, nr], p).expect("finite cube");
        Self { beams: Arc::new(beams) }
    }

    /// Map for receive weights `psi` (length `N_R`) and a real scalar
    /// `scale` applied before the range transform (`1 / (N_T sum psi)`).
    pub fn beamform_var(&self, g: &mut Graph, psi: Var, scale: Var) -> Result<Var> {
        let p = g.constant_shared(self.beams.clone());
        let x = g.mul_bcast(p, psi)?;
        finish(g, x, scale)
    }
}

/// Per-acquisition transmitter-folded data for continuous placement:
/// `T_t[k, q, r] = sum_tx S[k, tx, r, t] exp(i f_k tx N_R s_q)`.
#[derive(Clone, Debug)]
pub struct ContinuousBasis {
    folded: [Arc<Tensor>; 2],
    kfac: Arc<Vec<f64>>,
    sin: Arc<Vec<f64>>,
    n_tx: usize,
}

impl ContinuousBasis {
    pub fn new(cfg: &ArrayConfig, cube: &BasebandCube) -> Self {
        let shape = [cfg.n_range, cfg.n_azimuth, cfg.n_rx];
        let folded = [0, 1].map(|t| {
            let v = fold_tx(cfg, |k, tx, r| cube.get(k, tx, r, t));
            Arc::new(Tensor::complex(&shape, v).expect("finite cube"))
        });
        Self { folded, kfac: Arc::new(cfg.phase_factors()), sin: Arc::new(cfg.sin_grid()), n_tx: cfg.n_tx }
    }

    /// Map for channels interpolated between receivers `idx[m]` and
    /// `idx[m] + 1`. `weights` are length-`n_R` nodes for
    /// `(i, t), (i + 1, t), (i, t + 1), (i + 1, t + 1)`; `coords` places the
    /// steering phase of each channel.
    pub fn beamform_var(&self, g: &mut Graph, idx: &[usize], weights: [Var; 4], coords: Var) -> Result<Var> {
        let next: Vec<usize> = idx.iter().map(|i| i + 1).collect();
        let mut acc = None;
        for (j, w) in weights.into_iter().enumerate() {
            let t = g.constant_shared(self.folded[j / 2].clone());
            let cols = g.gather(t, 2, if j % 2 == 0 { idx } else { &next })?;
            let term = g.mul_bcast(cols, w)?;
            acc = Some(match acc {
                None => term,
                Some(a) => g.add(a, term)?,
            });
        }
        let ramp = g.phase_ramp(coords, self.kfac.clone(), self.sin.clone())?;
        let ramp = g.swap_last2(ramp)?;
        let x = g.mul(acc.expect("four weights"), ramp)?;
        let scale = g.constant(Tensor::scalar(1.0 / (self.n_tx * idx.len()) as f64));
        finish(g, x, scale)
    }
}
