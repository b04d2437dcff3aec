use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ArrayConfig;
use crate::error::{Error, Result};

/// A point reflector. Range in meters, azimuth in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reflector {
    pub range: f64,
    pub azimuth: f64,
    pub amplitude: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub reflectors: Vec<Reflector>,
}

impl Scene {
    pub fn new(reflectors: Vec<Reflector>) -> Self {
        Self { reflectors }
    }

    pub fn validate(&self, cfg: &ArrayConfig) -> Result<()> {
        let max_range = cfg.max_range();
        for (i, r) in self.reflectors.iter().enumerate() {
            if !(r.range.is_finite() && r.range >= 0.0 && r.range < max_range) {
                return Err(Error::Scene(format!(
                    "reflector {i}: range {} outside unambiguous span [0, {max_range})",
                    r.range
                )));
            }
            if !(r.azimuth.is_finite() && r.azimuth > -FRAC_PI_2 && r.azimuth < FRAC_PI_2) {
                return Err(Error::Scene(format!("reflector {i}: azimuth {} outside (-pi/2, pi/2)", r.azimuth)));
            }
            if !(r.amplitude.is_finite() && r.amplitude >= 0.0) {
                return Err(Error::Scene(format!("reflector {i}: amplitude {} must be >= 0", r.amplitude)));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AzimuthMode {
    /// Azimuths drawn from the beamforming grid (excluding the endfire bin).
    Grid,
    /// `sin(theta)` uniform over the open interval `(-1, 1)`.
    Continuous,
}

/// Random scene family: a handful of reflectors of mixed strength in the
/// middle of the unambiguous range span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSampler {
    pub min_reflectors: usize,
    pub max_reflectors: usize,
    pub min_amplitude: f64,
    pub max_amplitude: f64,
    /// Fraction of the unambiguous span, centered, that ranges are drawn from.
    pub range_fraction: f64,
    pub azimuth: AzimuthMode,
}

impl Default for SceneSampler {
    fn default() -> Self {
        Self {
            min_reflectors: 1,
            max_reflectors: 7,
            min_amplitude: 0.2,
            max_amplitude: 1.0,
            range_fraction: 0.8,
            azimuth: AzimuthMode::Grid,
        }
    }
}

impl SceneSampler {
    pub fn validate(&self) -> Result<()> {
        if self.min_reflectors > self.max_reflectors {
            return Err(Error::Config("min_reflectors > max_reflectors".into()));
        }
        if !(self.min_amplitude > 0.0 && self.min_amplitude <= self.max_amplitude && self.max_amplitude.is_finite()) {
            return Err(Error::Config("need 0 < min_amplitude <= max_amplitude".into()));
        }
        if !(self.range_fraction > 0.0 && self.range_fraction <= 1.0) {
            return Err(Error::Config("range_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, cfg: &ArrayConfig, rng: &mut R) -> Scene {
        let count = rng.gen_range(self.min_reflectors..=self.max_reflectors);
        let span = cfg.max_range();
        let lo = 0.5 * (1.0 - self.range_fraction) * span;
        let hi = lo + self.range_fraction * span;
        let (la, lb) = (self.min_amplitude.ln(), self.max_amplitude.ln());
        let grid = cfg.sin_grid();
        let reflectors = (0..count)
            .map(|_| {
                let range = rng.gen_range(lo..hi);
                let amplitude = if la < lb { rng.gen_range(la..lb).exp() } else { self.min_amplitude };
                let s = match self.azimuth {
                    AzimuthMode::Grid if grid.len() > 1 => grid[rng.gen_range(1..grid.len())],
                    AzimuthMode::Grid => 0.0,
                    AzimuthMode::Continuous => loop {
                        let s: f64 = rng.gen_range(-1.0..1.0);
                        if s > -1.0 {
                            break s;
                        }
                    },
                };
                Reflector { range, azimuth: s.asin(), amplitude }
            })
            .collect();
        Scene { reflectors }
    }
}
