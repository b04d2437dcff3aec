use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Geometry and waveform of the MIMO array.
///
/// The waveform is stepped-frequency CW: `n_range` tones uniformly spaced
/// over `[f_start, f_stop]` inclusive. The virtual array is a uniform linear
/// array of `n_tx * n_rx` elements at `element_pitch`, with virtual index
/// `tx * n_rx + rx` (Rx fastest).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArrayConfig {
    pub n_tx: usize,
    pub n_rx: usize,
    pub n_range: usize,
    pub f_start: f64,
    pub f_stop: f64,
    /// Virtual-array pitch in meters; half the center wavelength by default.
    pub element_pitch: f64,
    pub n_azimuth: usize,
}

impl Default for ArrayConfig {
    fn default() -> Self {
        let (f_start, f_stop) = (62e9, 69e9);
        Self {
            n_tx: 20,
            n_rx: 20,
            n_range: 75,
            f_start,
            f_stop,
            element_pitch: SPEED_OF_LIGHT / (f_start + f_stop),
            n_azimuth: 64,
        }
    }
}

impl ArrayConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.n_tx == 0 || self.n_rx == 0 || self.n_range == 0 || self.n_azimuth == 0 {
            return bad("array counts must be at least 1");
        }
        if !(self.f_start.is_finite() && self.f_stop.is_finite() && self.f_start > 0.0 && self.f_stop > self.f_start) {
            return bad("need 0 < f_start < f_stop");
        }
        if !(self.element_pitch.is_finite() && self.element_pitch > 0.0) {
            return bad("element_pitch must be positive");
        }
        Ok(())
    }

    pub fn n_virtual(&self) -> usize {
        self.n_tx * self.n_rx
    }

    pub fn center_frequency(&self) -> f64 {
        0.5 * (self.f_start + self.f_stop)
    }

    pub fn center_wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.center_frequency()
    }

    /// Tone spacing. A single tone is treated as spanning the full band.
    pub fn frequency_step(&self) -> f64 {
        (self.f_stop - self.f_start) / (self.n_range.max(2) - 1) as f64
    }

    pub fn tone(&self, k: usize) -> f64 {
        self.f_start + k as f64 * self.frequency_step()
    }

    /// Unambiguous range span `c / (2 df)`.
    pub fn max_range(&self) -> f64 {
        SPEED_OF_LIGHT / (2.0 * self.frequency_step())
    }

    pub fn range_bin_width(&self) -> f64 {
        self.max_range() / self.n_range as f64
    }

    /// `sin(theta)` of the azimuth bins: uniform over `[-1, 1)`.
    pub fn sin_grid(&self) -> Vec<f64> {
        let n = self.n_azimuth as f64;
        (0..self.n_azimuth).map(|q| -1.0 + 2.0 * q as f64 / n).collect()
    }

    pub fn azimuth_grid(&self) -> Vec<f64> {
        self.sin_grid().into_iter().map(f64::asin).collect()
    }

    /// Per-tone factor of the element phase: the phase of virtual position
    /// `p` (in pitch units) toward `sin(theta) = s` at tone `k` is
    /// `phase_factors()[k] * p * s`.
    pub fn phase_factors(&self) -> Vec<f64> {
        let fc = self.center_frequency();
        let lc = self.center_wavelength();
        (0..self.n_range).map(|k| 2.0 * PI * (self.tone(k) / fc) * (self.element_pitch / lc)).collect()
    }
}
