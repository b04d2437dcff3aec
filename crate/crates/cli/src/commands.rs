use std::fs;
use std::path::{Path, PathBuf};

use sal::beamform::triptych;
use sal::config::RunConfig;
use sal::fsio::write_atomic;
use sal::pipeline::acquire_map;
use sal::radar::{make_dataset, read_dataset, write_dataset, Dataset, Record};
use sal::subsample::{export_design as design_text, parse_design, Acquisition, Scenario};
use sal::taskmodel::{encode_checkpoint, forward, read_checkpoint, ModelParams};
use sal::train::{compare, metrics_csv, train as run_training, DesignState, MetricsRow};
use sal::{Error, Result};

use crate::{Common, ScenarioArg, SplitArg};

const CONFIG_FILE: &str = "config.toml";
const DESIGN_FILE: &str = "design.txt";
const STATE_FILE: &str = "design.json";
const HISTORY_FILE: &str = "history.json";
const MODEL_FILE: &str = "model.salc";

pub fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Config(_) => "config",
        Error::Format { .. } => "format",
        Error::Exists(_) => "exists",
        Error::Io(_) => "io",
        Error::NanLoss { .. } | Error::NanGradient(_) | Error::NonFinite(_) => "numeric",
        Error::Metric(_) => "metric",
        Error::Scene(_) => "scene",
        _ => "internal",
    }
}

/// Files written by one command; removed again unless the command finishes.
#[derive(Default)]
struct Outputs {
    written: Vec<PathBuf>,
    created_dir: Option<PathBuf>,
}

impl Outputs {
    fn ensure_dir(&mut self, dir: &Path) -> Result<()> {
        if !dir.exists() {
            fs::create_dir_all(dir)?;
            self.created_dir = Some(dir.to_path_buf());
        }
        Ok(())
    }

    fn write(&mut self, path: &Path, bytes: &[u8], force: bool) -> Result<()> {
        write_atomic(path, bytes, force)?;
        self.written.push(path.to_path_buf());
        Ok(())
    }

    fn commit(mut self) {
        self.written.clear();
        self.created_dir = None;
    }
}

impl Drop for Outputs {
    fn drop(&mut self) {
        for p in &self.written {
            let _ = fs::remove_file(p);
        }
        if let Some(d) = &self.created_dir {
            let _ = fs::remove_dir(d);
        }
    }
}

fn refuse_existing(paths: &[PathBuf], force: bool) -> Result<()> {
    match paths.iter().find(|p| p.exists()) {
        Some(p) if !force => Err(Error::Exists(p.display().to_string())),
        _ => Ok(()),
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig> {
    let mut cfg = match path {
        Some(p) => RunConfig::parse(&fs::read_to_string(p)?)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Uses the dataset's array geometry, which is what its cubes were simulated with.
fn adopt_dataset_array(cfg: &mut RunConfig, ds: &Dataset) -> Result<()> {
    if cfg.array != ds.cfg {
        log::warn!("array settings taken from the dataset, not the config");
        cfg.array = ds.cfg.clone();
    }
    cfg.validate()
}

fn to_json<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_string_pretty(v).expect("plain data serializes");
    s.push('\n');
    s.into_bytes()
}

pub fn simulate(common: &Common, out: &Path) -> Result<()> {
    let cfg = load_config(common.config.as_deref(), common.seed)?;
    refuse_existing(&[out.to_path_buf()], common.force)?;
    let s = &cfg.simulate;
    let ds = make_dataset(s.n_train, s.n_test, &cfg.array, &cfg.sampler, s.noise_sigma, cfg.seed)?;
    write_dataset(out, &ds, common.force)
}

pub fn train(
    common: &Common,
    data: &Path,
    out: &Path,
    scenario: Option<ScenarioArg>,
    budget: Option<usize>,
) -> Result<()> {
    let mut cfg = load_config(common.config.as_deref(), common.seed)?;
    if let Some(s) = scenario {
        cfg.train.scenario = match s {
            ScenarioArg::Discrete => Scenario::Discrete,
            ScenarioArg::Continuous => Scenario::Continuous,
        };
    }
    if let Some(b) = budget {
        cfg.train.budget = b;
    }
    let ds = read_dataset(data)?;
    adopt_dataset_array(&mut cfg, &ds)?;
    let files: Vec<PathBuf> =
        [CONFIG_FILE, DESIGN_FILE, STATE_FILE, HISTORY_FILE, MODEL_FILE].iter().map(|f| out.join(f)).collect();
    refuse_existing(&files, common.force)?;

    let outcome = run_training(&ds, &cfg.train, cfg.seed)?;
    let mut outputs = Outputs::default();
    outputs.ensure_dir(out)?;
    outputs.write(&files[0], cfg.to_toml().as_bytes(), common.force)?;
    outputs.write(&files[1], design_text(&outcome.acquisition, ds.cfg.n_rx)?.as_bytes(), common.force)?;
    outputs.write(&files[2], &to_json(&outcome.design), common.force)?;
    outputs.write(&files[3], &to_json(&outcome.history), common.force)?;
    if let Some(m) = &outcome.model {
        outputs.write(&files[4], &encode_checkpoint(m), common.force)?;
    }
    outputs.commit();
    Ok(())
}

fn read_design(run: &Path, n_rx: usize) -> Result<Acquisition> {
    let (meta, acq) = parse_design(&fs::read_to_string(run.join(DESIGN_FILE))?)?;
    if meta.n_rx != n_rx {
        return Err(Error::Config(format!("design is for {} receivers, dataset has {n_rx}", meta.n_rx)));
    }
    Ok(acq)
}

fn run_model(run: &Path, cfg: &RunConfig) -> Result<Option<ModelParams>> {
    if !cfg.train.reconstruct {
        return Ok(None);
    }
    let m = read_checkpoint(&run.join(MODEL_FILE))?;
    if m.descriptor != cfg.train.model {
        return Err(Error::Config("checkpoint does not match the configured network".into()));
    }
    Ok(Some(m))
}

pub fn eval(common: &Common, data: &Path, run: &Path, out: &Path, select_on_test: bool) -> Result<()> {
    let config_path = common.config.clone().unwrap_or_else(|| run.join(CONFIG_FILE));
    let mut cfg = load_config(Some(&config_path), common.seed)?;
    cfg.eval.select_on_test |= select_on_test;
    let ds = read_dataset(data)?;
    let acq = read_design(run, ds.cfg.n_rx)?;
    cfg.train.scenario = acq.scenario();
    cfg.train.budget = acq.budget();
    adopt_dataset_array(&mut cfg, &ds)?;
    refuse_existing(&[out.to_path_buf()], common.force)?;
    let model = run_model(run, &cfg)?;

    let reports = compare(&ds, &cfg.train, &cfg.eval, &acq, model.as_ref(), cfg.seed)?;
    let rows: Vec<MetricsRow> =
        reports.iter().map(|r| MetricsRow::new(cfg.train.scenario, cfg.train.budget, cfg.seed, r)).collect();
    let mut outputs = Outputs::default();
    outputs.write(out, metrics_csv(&rows)?.as_bytes(), common.force)?;
    outputs.commit();
    Ok(())
}

pub fn export_design(run: &Path, out: &Path, force: bool) -> Result<()> {
    let state: DesignState = serde_json::from_str(&fs::read_to_string(run.join(STATE_FILE))?)
        .map_err(|e| Error::Format { what: "design state", reason: e.to_string() })?;
    let n_rx = match &state {
        DesignState::Discrete(d) => d.n_rx(),
        DesignState::Continuous(c) => c.n_rx,
        DesignState::Fixed { .. } => return Err(Error::Config("run has no learned design".into())),
    };
    let text = design_text(&state.acquisition(), n_rx)?;
    let mut outputs = Outputs::default();
    outputs.write(out, text.as_bytes(), force)?;
    outputs.commit();
    Ok(())
}

fn pick_record(ds: &Dataset, split: SplitArg, index: usize) -> Result<&Record> {
    let (name, records) = match split {
        SplitArg::Train => ("train", ds.train()),
        SplitArg::Test => ("test", ds.test()),
    };
    records
        .get(index)
        .ok_or_else(|| Error::Config(format!("{name} split has {} records, index {index} requested", records.len())))
}

pub fn render(data: &Path, run: Option<&Path>, split: SplitArg, index: usize, out: &Path, force: bool) -> Result<()> {
    let ds = read_dataset(data)?;
    let rec = pick_record(&ds, split, index)?;
    let (acq, model) = match run {
        Some(dir) => {
            let cfg = load_config(Some(&dir.join(CONFIG_FILE)), None)?;
            (read_design(dir, ds.cfg.n_rx)?, run_model(dir, &cfg)?)
        }
        None => (Acquisition::Subset((0..ds.cfg.n_rx).collect()), None),
    };
    refuse_existing(&[out.to_path_buf()], force)?;
    let z_dis = acquire_map(&ds.cfg, &rec.cube, &acq)?;
    let z_hat = match &model {
        Some(m) => forward(&z_dis, m)?,
        None => z_dis.clone(),
    };
    let mut outputs = Outputs::default();
    outputs.write(out, &triptych(&rec.truth, &z_dis, &z_hat)?, force)?;
    outputs.commit();
    Ok(())
}
