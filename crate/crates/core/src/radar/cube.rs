use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{ArrayConfig, Scene, SPEED_OF_LIGHT};
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Number of temporally consecutive acquisitions per cube.
pub const N_ACQ: usize = 2;

/// Complex baseband measurements of shape `(n_range, n_tx, n_rx, 2)`:
/// tone, transmitter, receiver, acquisition.
#[derive(Clone, Debug, PartialEq)]
pub struct BasebandCube {
    values: Arc<Tensor>,
    pub noise_sigma: f64,
}

impl BasebandCube {
    pub fn new(values: Tensor, noise_sigma: f64) -> Result<Self> {
        let s = values.shape();
        if s.len() != 4 || s[3] != N_ACQ || values.as_complex().is_none() {
            return Err(Error::Shape { op: "baseband_cube", left: s.to_vec(), right: vec![0, 0, 0, N_ACQ] });
        }
        Ok(Self { values: Arc::new(values), noise_sigma })
    }

    pub fn tensor(&self) -> &Arc<Tensor> {
        &self.values
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.values.shape();
        (s[0], s[1], s[2])
    }

    pub fn get(&self, k: usize, tx: usize, rx: usize, t: usize) -> Complex64 {
        let (_, n_tx, n_rx) = self.dims();
        self.values.cx()[((k * n_tx + tx) * n_rx + rx) * N_ACQ + t]
    }

    /// Average of the two acquisitions, shape `(n_range, n_tx, n_rx)`.
    pub fn temporal_average(&self) -> Tensor {
        let v = self.values.cx();
        let (k, tx, rx) = self.dims();
        let avg = v.chunks(N_ACQ).map(|p| (p[0] + p[1]) * 0.5).collect();
        Tensor::complex(&[k, tx, rx], avg).expect("finite cube")
    }
}

/// Noise-free returns, shape `(n_range, n_tx, n_rx)`:
/// `sum a exp(-2 pi i f_k 2r/c) exp(-i phase_k p sin(theta))`.
pub fn noiseless_signal(scene: &Scene, cfg: &ArrayConfig) -> Vec<Complex64> {
    let (nk, nt, nr) = (cfg.n_range, cfg.n_tx, cfg.n_rx);
    let factors = cfg.phase_factors();
    let mut out = vec![Complex64::new(0.0, 0.0); nk * nt * nr];
    for r in &scene.reflectors {
        let s = r.azimuth.sin();
        for k in 0..nk {
            let range_phase =
                Complex64::from_polar(r.amplitude, -2.0 * PI * cfg.tone(k) * 2.0 * r.range / SPEED_OF_LIGHT);
            let step = -factors[k] * s;
            let row = &mut out[k * nt * nr..(k + 1) * nt * nr];
            for (p, v) in row.iter_mut().enumerate() {
                *v += range_phase * Complex64::from_polar(1.0, step * p as f64);
            }
        }
    }
    out
}

/// Simulates one cube. Both acquisitions carry the identical noise-free
/// component; each adds independent circular complex Gaussian noise with
/// per-component variance `sigma^2 / 2`, drawn in storage order.
pub fn synth_baseband<R: Rng + ?Sized>(
    scene: &Scene,
    cfg: &ArrayConfig,
    sigma: f64,
    rng: &mut R,
) -> Result<BasebandCube> {
    cfg.validate()?;
    scene.validate(cfg)?;
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let signal = noiseless_signal(scene, cfg);
    let scale = sigma / 2f64.sqrt();
    let mut values = Vec::with_capacity(signal.len() * N_ACQ);
    for s in &signal {
        for _ in 0..N_ACQ {
            let (re, im): (f64, f64) =
                if sigma > 0.0 { (rng.sample(StandardNormal), rng.sample(StandardNormal)) } else { (0.0, 0.0) };
            values.push(s + Complex64::new(scale * re, scale * im));
        }
    }
    let tensor = Tensor::complex(&[cfg.n_range, cfg.n_tx, cfg.n_rx, N_ACQ], values)?;
    BasebandCube::new(tensor, sigma)
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::radar::Reflector;

    fn small() -> ArrayConfig {
        ArrayConfig { n_tx: 3, n_rx: 4, n_range: 8, n_azimuth: 8, ..ArrayConfig::default() }
    }

    #[test]
    fn empty_noiseless_scene_is_all_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cube = synth_baseband(&Scene::default(), &small(), 0.0, &mut rng).unwrap();
        assert!(cube.tensor().cx().iter().all(|z| z.re == 0.0 && z.im == 0.0));
    }

    #[test]
    fn broadside_reflector_has_equal_element_phases() {
        let cfg = small();
        let scene = Scene::new(vec![Reflector { range: 0.04, azimuth: 0.0, amplitude: 0.7 }]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cube = synth_baseband(&scene, &cfg, 0.0, &mut rng).unwrap();
        for k in 0..cfg.n_range {
            let first = cube.get(k, 0, 0, 0);
            for tx in 0..cfg.n_tx {
                for rx in 0..cfg.n_rx {
                    assert_eq!(cube.get(k, tx, rx, 0), first);
                    assert_eq!(cube.get(k, tx, rx, 1), first);
                }
            }
        }
    }

    #[test]
    fn acquisitions_share_the_noiseless_component() {
        let cfg = small();
        let scene = Scene::new(vec![
            Reflector { range: 0.03, azimuth: 0.2, amplitude: 1.0 },
            Reflector { range: 0.09, azimuth: -0.4, amplitude: 0.3 },
        ]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let clean = synth_baseband(&scene, &cfg, 0.0, &mut rng).unwrap();
        for pair in clean.tensor().cx().chunks(N_ACQ) {
            assert_eq!(pair[0], pair[1]);
        }
        let signal = noiseless_signal(&scene, &cfg);
        let noisy = synth_baseband(&scene, &cfg, 0.5, &mut rng).unwrap();
        for (pair, s) in noisy.tensor().cx().chunks(N_ACQ).zip(&signal) {
            assert_ne!(pair[0], pair[1]);
            assert!((pair[0] - s).norm() < 5.0);
        }
    }

    #[test]
    fn noise_components_have_half_variance() {
        // Monte-Carlo: sigma = 0.1 -> Var(Re) = Var(Im) = 0.005 over 1e5 draws
        let cfg = ArrayConfig { n_tx: 10, n_rx: 10, n_range: 25, n_azimuth: 8, ..ArrayConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut re = Vec::new();
        let mut im = Vec::new();
        while re.len() < 100_000 {
            let cube = synth_baseband(&Scene::default(), &cfg, 0.1, &mut rng).unwrap();
            re.extend(cube.tensor().cx().iter().map(|z| z.re));
            im.extend(cube.tensor().cx().iter().map(|z| z.im));
        }
        for v in [re, im] {
            let n = v.len() as f64;
            let mean = v.iter().sum::<f64>() / n;
            let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
            assert!((var / 0.005 - 1.0).abs() < 0.05, "variance {var}");
        }
    }

    #[test]
    fn invalid_inputs_are_errors() {
        let cfg = small();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let far = Scene::new(vec![Reflector { range: 10.0, azimuth: 0.0, amplitude: 1.0 }]);
        assert!(synth_baseband(&far, &cfg, 0.0, &mut rng).is_err());
        assert!(synth_baseband(&Scene::default(), &cfg, -1.0, &mut rng).is_err());
    }
}
