//! Run configuration read from TOML.
//!
//! ```toml
//! seed = 7
//!
//! [array]
//! n_rx = 20
//!
//! [simulate]
//! n_train = 300
//! n_test = 50
//! noise_sigma = 0.5
//!
//! [train]
//! scenario = "discrete"
//! budget = 10
//!
//! [train.model]
//! depth = 3
//!
//! [eval]
//! random_designs = 10
//! ```
//!
//! Every table and key is optional; unknown keys are errors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::radar::{ArrayConfig, SceneSampler};
use crate::train::{EvalConfig, TrainConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub n_train: usize,
    pub n_test: usize,
    /// Per-channel complex noise standard deviation.
    pub noise_sigma: f64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { n_train: 300, n_test: 50, noise_sigma: 0.5 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    pub array: ArrayConfig,
    pub sampler: SceneSampler,
    pub simulate: SimulateConfig,
    pub train: TrainConfig,
    pub eval: EvalConfig,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }

    pub fn validate(&self) -> Result<()> {
        self.array.validate()?;
        self.sampler.validate()?;
        if !(self.simulate.noise_sigma >= 0.0 && self.simulate.noise_sigma.is_finite()) {
            return Err(Error::Config("noise_sigma must be finite and >= 0".into()));
        }
        self.train.validate(self.array.n_rx)?;
        if self.eval.random_designs == 0 {
            return Err(Error::Config("random_designs must be at least 1".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subsample::Scenario;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn module_docs_example_parses() {
        let text = "seed = 7\n[array]\nn_rx = 20\n[simulate]\nn_train = 300\nn_test = 50\nnoise_sigma = 0.5\n\
                    [train]\nscenario = \"discrete\"\nbudget = 10\n[train.model]\ndepth = 3\n[eval]\nrandom_designs = 10\n";
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.train.scenario, Scenario::Discrete);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for text in ["sed = 1", "[train]\nbudjet = 3", "[train.model]\nwidth = 4", "[extra]\n", "[array]\nn_rxx = 4"] {
            assert!(matches!(RunConfig::parse(text), Err(Error::Config(_))), "{text}");
        }
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "[train]\nbudget = 21",
            "[simulate]\nnoise_sigma = -1.0",
            "[eval]\nrandom_designs = 0",
            "[train]\nepochs = 0",
        ] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn round_trips_through_toml() {
        let mut cfg = RunConfig::default();
        cfg.train.scenario = Scenario::Continuous;
        cfg.train.budget = 5;
        cfg.train.design_learning_rate = Some(0.25);
        cfg.seed = 99;
        let text = cfg.to_toml();
        assert_eq!(RunConfig::parse(&text).unwrap(), cfg);
        assert_eq!(RunConfig::parse(&text).unwrap().to_toml(), text);
    }
}
