use rayon::prelude::*;

use super::metrics::{psnr, ssim, EvalReport};
use crate::beamform::RangeAzimuthMap;
use crate::error::Result;
use crate::pipeline::acquire_map;
use crate::radar::{ArrayConfig, Record};
use crate::subsample::Acquisition;
use crate::taskmodel::{forward, ModelParams};

/// Splits training records into a fitting part and a validation tail of
/// `max(1, n / 10)` records. With fewer than two records both parts are the
/// whole input.
pub fn split_validation(train: &[Record]) -> (&[Record], &[Record]) {
    if train.len() < 2 {
        return (train, train);
    }
    let n_val = (train.len() / 10).max(1);
    train.split_at(train.len() - n_val)
}

/// Scores measured maps (one per record) against the records' ground truth,
/// optionally after the reconstruction network.
pub fn evaluate_maps(
    maps: &[RangeAzimuthMap],
    records: &[Record],
    model: Option<&ModelParams>,
    variant: &str,
) -> Result<EvalReport> {
    let scores: Vec<(f64, f64)> = maps
        .par_iter()
        .zip(records)
        .map(|(z_dis, rec)| {
            let est = match model {
                Some(p) => forward(z_dis, p)?,
                None => z_dis.clone(),
            };
            Ok((psnr(&est, &rec.truth)?, ssim(&est, &rec.truth)?))
        })
        .collect::<Result<_>>()?;
    let (psnr, ssim) = scores.into_iter().unzip();
    Ok(EvalReport { variant: variant.to_string(), psnr, ssim })
}

/// Hard-design maps of every record's cube.
pub fn measured_maps(cfg: &ArrayConfig, records: &[Record], acq: &Acquisition) -> Result<Vec<RangeAzimuthMap>> {
    records.par_iter().map(|r| acquire_map(cfg, &r.cube, acq)).collect()
}

/// Evaluates a hard design on `records`. Every design sees the same cubes,
/// so comparisons between designs are paired.
pub fn evaluate(
    cfg: &ArrayConfig,
    records: &[Record],
    acq: &Acquisition,
    model: Option<&ModelParams>,
    variant: &str,
) -> Result<EvalReport> {
    let maps = measured_maps(cfg, records, acq)?;
    evaluate_maps(&maps, records, model, variant)
}
