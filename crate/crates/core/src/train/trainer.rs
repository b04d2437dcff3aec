use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::eval::{measured_maps, split_validation};
use crate::autodiff::{Gradients, Graph, Tensor, Var};
use crate::beamform::{ContinuousBasis, DiscreteBasis, RangeAzimuthMap};
use crate::error::{Error, Result};
use crate::pipeline::{continuous_map_factored, discrete_map_factored};
use crate::radar::{ArrayConfig, Dataset, Record};
use crate::rng::{stream, Domain};
use crate::subsample::{sample_weights_var, Acquisition, ContinuousDesign, DiscreteDesign, Scenario};
use crate::taskmodel::{forward, forward_var, ModelParams, NetVars, UNetDescriptor};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub scenario: Scenario,
    /// Number of active receivers `n_R`.
    pub budget: usize,
    pub learning_rate: f64,
    /// Adam step for the design parameters; `learning_rate` when unset.
    pub design_learning_rate: Option<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    /// Relaxed top-k temperature `lambda`.
    pub temperature: f64,
    /// Train a reconstruction network; otherwise the task model is the
    /// identity and only the design is learned.
    pub reconstruct: bool,
    pub model: UNetDescriptor,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Discrete,
            budget: 10,
            learning_rate: 1e-3,
            design_learning_rate: None,
            epochs: 200,
            batch_size: 8,
            temperature: 1e-3,
            reconstruct: true,
            model: UNetDescriptor::default(),
        }
    }
}

impl TrainConfig {
    pub fn design_rate(&self) -> f64 {
        self.design_learning_rate.unwrap_or(self.learning_rate)
    }

    /// A zero learning rate is accepted; it turns a run into a pass over the
    /// data that leaves every parameter untouched.
    pub fn validate(&self, n_rx: usize) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be finite and >= 0".into()));
        }
        if self.design_learning_rate.is_some_and(|r| !(r >= 0.0 && r.is_finite())) {
            return Err(Error::Config("design_learning_rate must be finite and >= 0".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.budget == 0 || self.budget > n_rx {
            return Err(Error::Config(format!("budget {} outside 1..={n_rx}", self.budget)));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        self.model.validate()
    }
}

/// Trainable (or fixed) receive design.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DesignState {
    Discrete(DiscreteDesign),
    Continuous(ContinuousDesign),
    Fixed { acquisition: Acquisition },
}

impl DesignState {
    /// Hard form used at inference.
    pub fn acquisition(&self) -> Acquisition {
        match self {
            DesignState::Discrete(d) => Acquisition::Subset(d.infer_selection()),
            DesignState::Continuous(c) => Acquisition::Coords(c.coords.clone()),
            DesignState::Fixed { acquisition } => acquisition.clone(),
        }
    }

    /// Logged per epoch: `alpha` for discrete designs, coordinates otherwise.
    pub fn trajectory_point(&self) -> Vec<f64> {
        match self {
            DesignState::Discrete(d) => d.alpha(),
            DesignState::Continuous(c) => c.coords.clone(),
            DesignState::Fixed { acquisition } => acquisition.rx_coords(),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        match self {
            DesignState::Discrete(d) => d.log_alpha.iter().chain(&d.l_factor).copied().collect(),
            DesignState::Continuous(c) => c.coords.clone(),
            DesignState::Fixed { .. } => Vec::new(),
        }
    }

    fn set_flat(&mut self, flat: &[f64]) {
        match self {
            DesignState::Discrete(d) => {
                let n = d.log_alpha.len();
                d.log_alpha.copy_from_slice(&flat[..n]);
                d.l_factor.copy_from_slice(&flat[n..]);
                d.project();
            }
            DesignState::Continuous(c) => {
                c.coords.copy_from_slice(flat);
                c.project();
            }
            DesignState::Fixed { .. } => {}
        }
    }

    fn is_learnable(&self) -> bool {
        !matches!(self, DesignState::Fixed { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean per-sample loss over the epoch.
    pub train_loss: f64,
    pub design: Vec<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochLog>,
    /// Mean validation loss with the relaxed design used in training.
    pub soft_val_loss: Option<f64>,
    /// Mean validation loss with the hard inference design.
    pub hard_val_loss: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub design: DesignState,
    pub acquisition: Acquisition,
    pub model: Option<ModelParams>,
    pub history: History,
}

/// `||est - truth||_2` (not squared).
pub fn loss_var(g: &mut Graph, est: Var, truth: Var) -> Result<Var> {
    let d = g.sub(est, truth)?;
    g.l2_norm(d)
}

pub fn loss(est: &RangeAzimuthMap, truth: &RangeAzimuthMap) -> Result<f64> {
    if (est.n_range(), est.n_azimuth()) != (truth.n_range(), truth.n_azimuth()) {
        return Err(Error::Shape {
            op: "loss",
            left: vec![est.n_range(), est.n_azimuth()],
            right: vec![truth.n_range(), truth.n_azimuth()],
        });
    }
    Ok(est.values().iter().zip(truth.values()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
}

/// Learns a receive design for `cfg.scenario` (and a network when
/// `cfg.reconstruct`) on the fitting part of the training split.
pub fn train(ds: &Dataset, cfg: &TrainConfig, seed: u64) -> Result<TrainOutcome> {
    cfg.validate(ds.cfg.n_rx)?;
    let design = match cfg.scenario {
        Scenario::Discrete => DesignState::Discrete(DiscreteDesign::new(ds.cfg.n_rx, cfg.budget, cfg.temperature)?),
        Scenario::Continuous => DesignState::Continuous(ContinuousDesign::uniform(ds.cfg.n_rx, cfg.budget)?),
    };
    run(ds, cfg, seed, design)
}

/// Trains only the network for a fixed hard design. Without
/// reconstruction there is nothing to fit and the outcome has no epochs.
pub fn train_fixed(ds: &Dataset, cfg: &TrainConfig, acq: &Acquisition, seed: u64) -> Result<TrainOutcome> {
    acq.validate(ds.cfg.n_rx)?;
    let cfg = TrainConfig { budget: acq.budget(), scenario: acq.scenario(), ..cfg.clone() };
    cfg.validate(ds.cfg.n_rx)?;
    run(ds, &cfg, seed, DesignState::Fixed { acquisition: acq.clone() })
}

/// Per-record inputs to the map builder.
enum Sources {
    Discrete(Vec<DiscreteBasis>),
    Continuous(Vec<ContinuousBasis>),
    Fixed(Vec<Tensor>),
}

impl Sources {
    fn new(cfg: &ArrayConfig, records: &[Record], design: &DesignState) -> Result<Self> {
        Ok(match design {
            DesignState::Discrete(_) => {
                Sources::Discrete(records.par_iter().map(|r| DiscreteBasis::new(cfg, &r.cube)).collect())
            }
            DesignState::Continuous(_) => {
                Sources::Continuous(records.par_iter().map(|r| ContinuousBasis::new(cfg, &r.cube)).collect())
            }
            DesignState::Fixed { acquisition } => Sources::Fixed(
                measured_maps(cfg, records, acquisition)?.iter().map(RangeAzimuthMap::to_tensor).collect(),
            ),
        })
    }
}

/// Design nodes on one graph.
enum DesignVars {
    Discrete { log_alpha: Var, l_factor: Var },
    Continuous { coords: Var },
    Fixed,
}

impl DesignVars {
    fn new(g: &mut Graph, design: &DesignState, learn: bool) -> Result<Self> {
        let mut leaf = |t: Tensor| if learn { g.param(t) } else { g.constant(t) };
        Ok(match design {
            DesignState::Discrete(d) => {
                let n = d.n_rx();
                let log_alpha = leaf(Tensor::real(&[n], d.log_alpha.clone())?);
                let l_factor = leaf(Tensor::real(&[n, n], d.l_factor.clone())?);
                DesignVars::Discrete { log_alpha, l_factor }
            }
            DesignState::Continuous(c) => {
                DesignVars::Continuous { coords: leaf(Tensor::real(&[c.coords.len()], c.coords.clone())?) }
            }
            DesignState::Fixed { .. } => DesignVars::Fixed,
        })
    }

    fn grads(&self, grads: &Gradients, design: &DesignState) -> Vec<f64> {
        let take = |v: Var, len: usize| grads.get(v).map(|t| t.re().to_vec()).unwrap_or_else(|| vec![0.0; len]);
        match (self, design) {
            (DesignVars::Discrete { log_alpha, l_factor }, DesignState::Discrete(d)) => {
                let n = d.n_rx();
                let mut out = take(*log_alpha, n);
                out.extend(take(*l_factor, n * n));
                out
            }
            (DesignVars::Continuous { coords }, DesignState::Continuous(c)) => take(*coords, c.coords.len()),
            _ => Vec::new(),
        }
    }
}

/// Builds the measured map of record `i`, drawing a fresh relaxed sample for
/// discrete designs.
fn map_var<R: Rng>(
    g: &mut Graph,
    cfg: &ArrayConfig,
    sources: &Sources,
    i: usize,
    design: &DesignState,
    vars: &DesignVars,
    rng: &mut R,
) -> Result<Var> {
    match (sources, design, vars) {
        (Sources::Discrete(b), DesignState::Discrete(d), DesignVars::Discrete { log_alpha, l_factor }) => {
            let eps = d.draw_eps(rng);
            let psi = sample_weights_var(g, *log_alpha, *l_factor, &eps, d.budget, d.temperature)?;
            discrete_map_factored(g, &b[i], cfg.n_tx, psi)
        }
        (Sources::Continuous(b), DesignState::Continuous(_), DesignVars::Continuous { coords }) => {
            continuous_map_factored(g, &b[i], cfg.n_rx, *coords)
        }
        (Sources::Fixed(maps), ..) => Ok(g.constant(maps[i].clone())),
        _ => unreachable!("sources built from the same design"),
    }
}

fn sum_all(g: &mut Graph, vars: &[Var]) -> Result<Var> {
    let mut acc = vars[0];
    for &v in &vars[1..] {
        acc = g.add(acc, v)?;
    }
    Ok(acc)
}

fn check_finite(g: &Graph, v: Var) -> Result<f64> {
    let x = g.value(v).item();
    if x.is_finite() {
        return Ok(x);
    }
    let op = g.first_non_finite().map(|(_, op)| op).unwrap_or("loss");
    Err(Error::NanLoss { op })
}

fn run(ds: &Dataset, cfg: &TrainConfig, seed: u64, mut design: DesignState) -> Result<TrainOutcome> {
    let (fit, val) = split_validation(ds.train());
    if fit.is_empty() {
        return Err(Error::Config("training split is empty".into()));
    }
    let acfg = &ds.cfg;
    let mut model = match cfg.reconstruct {
        true => Some(ModelParams::init(cfg.model, &mut stream(seed, Domain::NetInit, 0))?),
        false => None,
    };
    let learn_design = design.is_learnable();
    let mut history = History::default();
    if !learn_design && model.is_none() {
        let acquisition = design.acquisition();
        return Ok(TrainOutcome { design, acquisition, model, history });
    }

    let sources = Sources::new(acfg, fit, &design)?;
    let mut rng = stream(seed, Domain::Training, 0);
    let mut design_opt = Adam::new(cfg.design_rate(), design.flat().len());
    let mut model_opt = model.as_ref().map(|m| Adam::new(cfg.learning_rate, m.descriptor.param_count()));
    let mut order: Vec<usize> = (0..fit.len()).collect();

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut g = Graph::new();
            let dv = DesignVars::new(&mut g, &design, learn_design)?;
            let net = model.as_ref().map(|m| NetVars::params(&mut g, m));
            let mut losses = Vec::with_capacity(batch.len());
            for &i in batch {
                let z = map_var(&mut g, acfg, &sources, i, &design, &dv, &mut rng)?;
                let est = match &net {
                    Some(n) => forward_var(&mut g, n, z)?,
                    None => z,
                };
                let truth = g.constant(fit[i].truth.to_tensor());
                losses.push(loss_var(&mut g, est, truth)?);
            }
            let batch_loss = sum_all(&mut g, &losses)?;
            total += check_finite(&g, batch_loss)?;
            let grads = g.backward(batch_loss)?;

            if learn_design {
                let gd = dv.grads(&grads, &design);
                if gd.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NanGradient("design"));
                }
                let mut flat = design.flat();
                design_opt.step(&mut flat, &gd);
                if flat.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("design after update"));
                }
                design.set_flat(&flat);
            }
            if let (Some(m), Some(n), Some(opt)) = (model.as_mut(), &net, model_opt.as_mut()) {
                let gm: Vec<f64> = n
                    .vars
                    .iter()
                    .zip(&m.tensors)
                    .flat_map(|(v, t)| grads.get(*v).map(|x| x.re().to_vec()).unwrap_or_else(|| vec![0.0; t.len()]))
                    .collect();
                if gm.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NanGradient("network"));
                }
                let mut flat = m.flat();
                opt.step(&mut flat, &gm);
                if flat.iter().any(|v| !v.is_finite()) {
                    return Err(Error::NonFinite("network after update"));
                }
                *m = ModelParams::from_flat(m.descriptor, &flat)?;
            }
        }
        let train_loss = total / fit.len() as f64;
        log::info!("epoch {epoch}/{}: loss {train_loss:.6}", cfg.epochs);
        history.epochs.push(EpochLog { epoch, train_loss, design: design.trajectory_point() });
    }

    if learn_design {
        let (soft, hard) = soft_hard_losses(acfg, val, &design, model.as_ref(), seed)?;
        history.soft_val_loss = Some(soft);
        history.hard_val_loss = Some(hard);
    }
    let acquisition = design.acquisition();
    Ok(TrainOutcome { design, acquisition, model, history })
}

/// Mean validation losses of the relaxed training-time design and of its
/// hard inference form.
fn soft_hard_losses(
    cfg: &ArrayConfig,
    val: &[Record],
    design: &DesignState,
    model: Option<&ModelParams>,
    seed: u64,
) -> Result<(f64, f64)> {
    let sources = Sources::new(cfg, val, design)?;
    let mut rng = stream(seed, Domain::Training, 1);
    let mut soft = 0.0;
    for (i, rec) in val.iter().enumerate() {
        let mut g = Graph::new();
        let dv = DesignVars::new(&mut g, design, false)?;
        let z = map_var(&mut g, cfg, &sources, i, design, &dv, &mut rng)?;
        let est = RangeAzimuthMap::from_tensor(g.value(z))?;
        let est = match model {
            Some(p) => forward(&est, p)?,
            None => est,
        };
        soft += loss(&est, &rec.truth)?;
    }
    let maps = measured_maps(cfg, val, &design.acquisition())?;
    let mut hard = 0.0;
    for (z, rec) in maps.iter().zip(val) {
        let est = match model {
            Some(p) => forward(z, p)?,
            None => z.clone(),
        };
        hard += loss(&est, &rec.truth)?;
    }
    let n = val.len() as f64;
    Ok((soft / n, hard / n))
}
