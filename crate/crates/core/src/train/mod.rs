//! Joint optimization of the receive design and the reconstruction network,
//! evaluation metrics and the baseline protocols.

mod adam;
mod compare;
mod eval;
mod metrics;
mod trainer;

pub use adam::Adam;
pub use compare::{
    baseline_random_best, baseline_uniform, compare, metrics_csv, random_acquisition, BaselineOutcome, EvalConfig,
    MetricsRow,
};
pub use eval::{evaluate, evaluate_maps, measured_maps, split_validation};
pub use metrics::{mean_ci, psnr, ssim, EvalReport, PSNR_CAP, SSIM_WINDOW};
pub use trainer::{loss, loss_var, train, train_fixed, DesignState, EpochLog, History, TrainConfig, TrainOutcome};

#[cfg(test)]
mod tests;
