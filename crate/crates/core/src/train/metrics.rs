//! Image-quality metrics and their summaries.

use serde::{Deserialize, Serialize};

use crate::beamform::RangeAzimuthMap;
use crate::error::{Error, Result};

/// Reported PSNR for identical images.
pub const PSNR_CAP: f64 = 99.0;
pub const SSIM_WINDOW: usize = 7;

fn check_pair(est: &RangeAzimuthMap, truth: &RangeAzimuthMap) -> Result<f64> {
    if (est.n_range(), est.n_azimuth()) != (truth.n_range(), truth.n_azimuth()) {
        return Err(Error::Shape {
            op: "metric",
            left: vec![est.n_range(), est.n_azimuth()],
            right: vec![truth.n_range(), truth.n_azimuth()],
        });
    }
    let peak = truth.max();
    if peak <= 0.0 {
        return Err(Error::Metric("reference map is all zero".into()));
    }
    Ok(peak)
}

/// `20 log10(max(Z) / RMSE)`, capped at [`PSNR_CAP`].
pub fn psnr(est: &RangeAzimuthMap, truth: &RangeAzimuthMap) -> Result<f64> {
    let peak = check_pair(est, truth)?;
    let n = truth.values().len() as f64;
    let mse = est.values().iter().zip(truth.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((20.0 * (peak / mse.sqrt()).log10()).min(PSNR_CAP))
}

/// Summed-area table with a zero first row and column.
fn integral(v: &[f64], h: usize, w: usize) -> Vec<f64> {
    let mut s = vec![0.0; (h + 1) * (w + 1)];
    for y in 0..h {
        let mut row = 0.0;
        for x in 0..w {
            row += v[y * w + x];
            s[(y + 1) * (w + 1) + x + 1] = s[y * (w + 1) + x + 1] + row;
        }
    }
    s
}

fn window_sum(s: &[f64], w: usize, y: usize, x: usize, k: usize) -> f64 {
    let w1 = w + 1;
    s[(y + k) * w1 + x + k] - s[y * w1 + x + k] - s[(y + k) * w1 + x] + s[y * w1 + x]
}

/// Mean SSIM over all fully contained `7 x 7` uniform windows (the window
/// shrinks to the image for smaller maps), with sample (co)variances and
/// `C1 = (0.01 L)^2`, `C2 = (0.03 L)^2`, `L = max(Z)`.
pub fn ssim(est: &RangeAzimuthMap, truth: &RangeAzimuthMap) -> Result<f64> {
    let peak = check_pair(est, truth)?;
    let (h, w) = (truth.n_range(), truth.n_azimuth());
    let k = SSIM_WINDOW.min(h).min(w);
    let n = (k * k) as f64;
    let (c1, c2) = ((0.01 * peak).powi(2), (0.03 * peak).powi(2));
    let (x, y) = (est.values(), truth.values());
    let xx: Vec<f64> = x.iter().map(|a| a * a).collect();
    let yy: Vec<f64> = y.iter().map(|a| a * a).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let [sx, sy, sxx, syy, sxy] = [x, y, &xx[..], &yy[..], &xy[..]].map(|v| integral(v, h, w));
    let cov_norm = if n > 1.0 { n / (n - 1.0) } else { 1.0 };
    let mut total = 0.0;
    let mut count = 0usize;
    for r in 0..=h - k {
        for c in 0..=w - k {
            let mx = window_sum(&sx, w, r, c, k) / n;
            let my = window_sum(&sy, w, r, c, k) / n;
            let vx = cov_norm * (window_sum(&sxx, w, r, c, k) / n - mx * mx);
            let vy = cov_norm * (window_sum(&syy, w, r, c, k) / n - my * my);
            let vxy = cov_norm * (window_sum(&sxy, w, r, c, k) / n - mx * my);
            let num = (2.0 * mx * my + c1) * (2.0 * vxy + c2);
            let den = (mx * mx + my * my + c1) * (vx + vy + c2);
            total += num / den;
            count += 1;
        }
    }
    Ok((total / count as f64).clamp(-1.0, 1.0))
}

/// Mean and 95% normal-approximation half-width.
pub fn mean_ci(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let sd = (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    (mean, 1.96 * sd / n.sqrt())
}

/// Per-image scores of one evaluated variant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub variant: String,
    pub psnr: Vec<f64>,
    pub ssim: Vec<f64>,
}

impl EvalReport {
    pub fn psnr_summary(&self) -> (f64, f64) {
        mean_ci(&self.psnr)
    }

    pub fn ssim_summary(&self) -> (f64, f64) {
        mean_ci(&self.ssim)
    }

    pub fn mean_psnr(&self) -> f64 {
        self.psnr_summary().0
    }
}
