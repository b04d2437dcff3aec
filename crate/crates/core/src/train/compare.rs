use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::{evaluate, evaluate_maps, measured_maps, split_validation};
use super::metrics::EvalReport;
use super::trainer::{train_fixed, TrainConfig};
use crate::error::{Error, Result};
use crate::radar::Dataset;
use crate::rng::{stream, Domain};
use crate::subsample::{Acquisition, ContinuousDesign, Scenario};
use crate::taskmodel::ModelParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalConfig {
    /// Random designs drawn for the best-of-k baseline.
    pub random_designs: usize,
    /// Pick the best random design on the test split instead of the
    /// validation tail of the training split.
    pub select_on_test: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { random_designs: 10, select_on_test: false }
    }
}

#[derive(Clone, Debug)]
pub struct BaselineOutcome {
    /// Test scores of the chosen design.
    pub report: EvalReport,
    pub candidates: Vec<Acquisition>,
    /// Mean PSNR of each candidate on the selection split.
    pub selection_psnr: Vec<f64>,
    pub best: usize,
    pub model: Option<ModelParams>,
}

fn variant(kind: &str, recon: bool) -> String {
    format!("{kind}-{}", if recon { "with-recon" } else { "without-recon" })
}

/// `n` receivers drawn uniformly without replacement (ascending), or `n`
/// coordinates uniform on `[0, N_R - 1]` (ascending).
pub fn random_acquisition<R: Rng + ?Sized>(
    scenario: Scenario,
    n_rx: usize,
    n: usize,
    rng: &mut R,
) -> Result<Acquisition> {
    if n == 0 || n > n_rx {
        return Err(Error::Config(format!("budget {n} outside 1..={n_rx}")));
    }
    let acq = match scenario {
        Scenario::Discrete => {
            let mut sel = index::sample(rng, n_rx, n).into_vec();
            sel.sort_unstable();
            Acquisition::Subset(sel)
        }
        Scenario::Continuous => {
            let top = (n_rx - 1) as f64;
            let mut c: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=top)).collect();
            c.sort_by(f64::total_cmp);
            Acquisition::Coords(c)
        }
    };
    acq.validate(n_rx)?;
    Ok(acq)
}

/// Scores each candidate on the selection split (training a network per
/// candidate when `cfg.reconstruct`) and reports the best one on the test
/// split.
fn best_of(
    ds: &Dataset,
    cfg: &TrainConfig,
    candidates: Vec<Acquisition>,
    select_on_test: bool,
    seed: u64,
    kind: &str,
) -> Result<BaselineOutcome> {
    let name = variant(kind, cfg.reconstruct);
    let selection = if select_on_test { ds.test() } else { split_validation(ds.train()).1 };
    let scored: Vec<(f64, Option<ModelParams>)> = candidates
        .par_iter()
        .map(|acq| {
            let model = match cfg.reconstruct {
                true => train_fixed(ds, cfg, acq, seed)?.model,
                false => None,
            };
            let r = evaluate(&ds.cfg, selection, acq, model.as_ref(), &name)?;
            Ok((r.mean_psnr(), model))
        })
        .collect::<Result<_>>()?;
    let selection_psnr: Vec<f64> = scored.iter().map(|s| s.0).collect();
    let best = (0..selection_psnr.len())
        .reduce(|a, b| if selection_psnr[b] > selection_psnr[a] { b } else { a })
        .ok_or_else(|| Error::Config("at least one candidate design is required".into()))?;
    let model = scored.into_iter().nth(best).and_then(|s| s.1);
    let report = evaluate(&ds.cfg, ds.test(), &candidates[best], model.as_ref(), &name)?;
    Ok(BaselineOutcome { report, candidates, selection_psnr, best, model })
}

/// Best of `k` random designs for `cfg.scenario` and `cfg.budget`. Candidate
/// `j` draws from its own stream, so the set is the same with or without
/// reconstruction and for any thread count.
pub fn baseline_random_best(
    ds: &Dataset,
    cfg: &TrainConfig,
    k: usize,
    select_on_test: bool,
    seed: u64,
) -> Result<BaselineOutcome> {
    if k == 0 {
        return Err(Error::Config("random_designs must be at least 1".into()));
    }
    let candidates = (0..k as u64)
        .map(|j| random_acquisition(cfg.scenario, ds.cfg.n_rx, cfg.budget, &mut stream(seed, Domain::RandomDesign, j)))
        .collect::<Result<Vec<_>>>()?;
    best_of(ds, cfg, candidates, select_on_test, seed, "random")
}

/// Evenly spread coordinates over `[0, N_R - 1]`.
pub fn baseline_uniform(ds: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<BaselineOutcome> {
    if cfg.budget < 2 {
        return Err(Error::Config("uniform baseline needs a budget of at least 2".into()));
    }
    let acq = Acquisition::Coords(ContinuousDesign::uniform(ds.cfg.n_rx, cfg.budget)?.coords);
    best_of(ds, cfg, vec![acq], false, seed, "uniform")
}

/// Test-split reports for a learned design and the baselines of its
/// scenario. Rows come in this order: learned, random, then uniform
/// (continuous only); each with reconstruction (when `cfg.reconstruct`)
/// followed by without.
pub fn compare(
    ds: &Dataset,
    cfg: &TrainConfig,
    eval: &EvalConfig,
    learned: &Acquisition,
    model: Option<&ModelParams>,
    seed: u64,
) -> Result<Vec<EvalReport>> {
    if cfg.reconstruct && model.is_none() {
        return Err(Error::Config("reconstruction enabled but no trained model given".into()));
    }
    let modes: &[bool] = if cfg.reconstruct { &[true, false] } else { &[false] };
    let maps = measured_maps(&ds.cfg, ds.test(), learned)?;
    let mut out = Vec::new();
    for &recon in modes {
        let m = if recon { model } else { None };
        out.push(evaluate_maps(&maps, ds.test(), m, &variant("learned", recon))?);
    }
    for &recon in modes {
        let c = TrainConfig { reconstruct: recon, ..cfg.clone() };
        out.push(baseline_random_best(ds, &c, eval.random_designs, eval.select_on_test, seed)?.report);
    }
    if cfg.scenario == Scenario::Continuous {
        for &recon in modes {
            let c = TrainConfig { reconstruct: recon, ..cfg.clone() };
            out.push(baseline_uniform(ds, &c, seed)?.report);
        }
    }
    Ok(out)
}

/// One line of the metrics table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub variant: String,
    pub n_r: usize,
    pub seed: u64,
    pub psnr_mean: f64,
    pub psnr_ci: f64,
    pub ssim_mean: f64,
    pub ssim_ci: f64,
}

impl MetricsRow {
    pub fn new(scenario: Scenario, n_r: usize, seed: u64, report: &EvalReport) -> Self {
        let (psnr_mean, psnr_ci) = report.psnr_summary();
        let (ssim_mean, ssim_ci) = report.ssim_summary();
        Self {
            scenario: scenario.as_str().to_string(),
            variant: report.variant.clone(),
            n_r,
            seed,
            psnr_mean,
            psnr_ci,
            ssim_mean,
            ssim_ci,
        }
    }
}

/// CSV text with a header row; `ci` columns are 95% half-widths.
pub fn metrics_csv(rows: &[MetricsRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::Format { what: "metrics csv", reason: e.to_string() })?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format { what: "metrics csv", reason: e.to_string() })?;
    String::from_utf8(bytes).map_err(|e| Error::Format { what: "metrics csv", reason: e.to_string() })
}
