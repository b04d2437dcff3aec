use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::{gradcheck, Tensor};
use crate::beamform::RangeAzimuthMap;
use crate::radar::{make_dataset, ArrayConfig, Dataset, SceneSampler};
use crate::subsample::{Acquisition, Scenario};
use crate::taskmodel::UNetDescriptor;
use crate::Error;

fn tiny_cfg() -> ArrayConfig {
    ArrayConfig { n_tx: 3, n_rx: 6, n_range: 8, n_azimuth: 8, ..ArrayConfig::default() }
}

fn tiny_dataset(n_train: usize, n_test: usize, seed: u64) -> Dataset {
    make_dataset(n_train, n_test, &tiny_cfg(), &SceneSampler::default(), 0.05, seed).unwrap()
}

fn tiny_train(scenario: Scenario, budget: usize) -> TrainConfig {
    TrainConfig {
        scenario,
        budget,
        learning_rate: 1e-2,
        design_learning_rate: None,
        epochs: 2,
        batch_size: 3,
        temperature: 0.5,
        reconstruct: true,
        model: UNetDescriptor { depth: 1, base_channels: 2, kernel: 3, residual: true },
    }
}

#[test]
fn loss_examples() {
    let z = RangeAzimuthMap::new(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(loss(&z, &z).unwrap(), 0.0);
    let zh = RangeAzimuthMap::new(2, 2, vec![4.0, 6.0, 3.0, 4.0]).unwrap();
    assert_eq!(loss(&zh, &z).unwrap(), 5.0);
    let other = RangeAzimuthMap::new(1, 4, vec![0.0; 4]).unwrap();
    assert!(matches!(loss(&other, &z), Err(Error::Shape { .. })));
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let est = Tensor::real(&[3, 4], (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let truth = Tensor::real(&[3, 4], (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
    let err = gradcheck::max_relative_error(
        std::slice::from_ref(&est),
        |g, v| {
            let t = g.constant(truth.clone());
            loss_var(g, v[0], t)
        },
        1e-6,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
    // analytic form (est - truth) / loss
    let mut g = crate::autodiff::Graph::new();
    let e = g.param(est.clone());
    let t = g.constant(truth.clone());
    let l = loss_var(&mut g, e, t).unwrap();
    let n = g.value(l).item();
    let grads = g.backward(l).unwrap();
    for ((gv, a), b) in grads.get(e).unwrap().re().iter().zip(est.re()).zip(truth.re()) {
        assert!((gv - (a - b) / n).abs() < 1e-15);
    }
}

#[test]
fn validation_split_sizes() {
    let ds = tiny_dataset(25, 1, 0);
    let (fit, val) = split_validation(ds.train());
    assert_eq!((fit.len(), val.len()), (23, 2));
    let ds = tiny_dataset(1, 1, 0);
    let (fit, val) = split_validation(ds.train());
    assert_eq!((fit.len(), val.len()), (1, 1));
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let ds = tiny_dataset(8, 2, 1);
    for scenario in [Scenario::Discrete, Scenario::Continuous] {
        let cfg =
            TrainConfig { learning_rate: 0.0, design_learning_rate: Some(0.0), epochs: 1, ..tiny_train(scenario, 3) };
        let out = train(&ds, &cfg, 5).unwrap();
        let fresh = train(&ds, &TrainConfig { epochs: 1, ..cfg.clone() }, 5).unwrap();
        assert_eq!(out.history.epochs.len(), 1);
        let init = match scenario {
            Scenario::Discrete => DesignState::Discrete(crate::subsample::DiscreteDesign::new(6, 3, 0.5).unwrap()),
            Scenario::Continuous => DesignState::Continuous(crate::subsample::ContinuousDesign::uniform(6, 3).unwrap()),
        };
        assert_eq!(out.design, init);
        let net0 =
            crate::taskmodel::ModelParams::init(cfg.model, &mut crate::rng::stream(5, crate::rng::Domain::NetInit, 0))
                .unwrap();
        assert_eq!(out.model.unwrap(), net0);
        assert_eq!(fresh.design, out.design);
    }
}

#[test]
fn training_is_deterministic() {
    let ds = tiny_dataset(8, 2, 2);
    let cfg = tiny_train(Scenario::Discrete, 3);
    let a = train(&ds, &cfg, 11).unwrap();
    let b = train(&ds, &cfg, 11).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model, b.model);
    assert_eq!(a.design, b.design);
    let c = train(&ds, &cfg, 12).unwrap();
    assert_ne!(a.history, c.history);
}

#[test]
fn both_parameter_groups_move() {
    let ds = tiny_dataset(8, 2, 3);
    for scenario in [Scenario::Discrete, Scenario::Continuous] {
        let cfg = tiny_train(scenario, 3);
        let out = train(&ds, &cfg, 4).unwrap();
        let zero = train(&ds, &TrainConfig { learning_rate: 0.0, ..cfg.clone() }, 4).unwrap();
        let dpsi: f64 = out.design.flat().iter().zip(zero.design.flat()).map(|(a, b)| (a - b).powi(2)).sum();
        let dtheta: f64 =
            out.model.unwrap().flat().iter().zip(zero.model.unwrap().flat()).map(|(a, b)| (a - b).powi(2)).sum();
        assert!(dpsi > 0.0 && dtheta > 0.0, "{scenario:?}: {dpsi} {dtheta}");
        assert!(out.history.soft_val_loss.is_some() && out.history.hard_val_loss.is_some());
        assert_eq!(out.acquisition, out.design.acquisition());
    }
}

#[test]
fn design_only_training_has_no_network() {
    let ds = tiny_dataset(6, 2, 4);
    let cfg = TrainConfig { reconstruct: false, ..tiny_train(Scenario::Continuous, 2) };
    let out = train(&ds, &cfg, 1).unwrap();
    assert!(out.model.is_none());
    assert_eq!(out.history.epochs.len(), 2);
    let coords = out.history.epochs[1].design.clone();
    assert_eq!(Acquisition::Coords(coords), out.acquisition);
    let fixed = train_fixed(&ds, &cfg, &out.acquisition, 1).unwrap();
    assert!(fixed.history.epochs.is_empty() && fixed.model.is_none());
}

#[test]
fn runaway_updates_report_the_first_bad_op() {
    let ds = tiny_dataset(6, 2, 5);
    let cfg = TrainConfig { learning_rate: 1e300, batch_size: 1, ..tiny_train(Scenario::Discrete, 2) };
    match train(&ds, &cfg, 0) {
        Err(Error::NanLoss { op }) => assert!(!op.is_empty()),
        Err(Error::NanGradient(group)) => assert_eq!(group, "network"),
        other => panic!("expected a NaN diagnostic, got {other:?}"),
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let ds = tiny_dataset(4, 1, 6);
    let base = tiny_train(Scenario::Discrete, 3);
    for bad in [
        TrainConfig { epochs: 0, ..base.clone() },
        TrainConfig { budget: 7, ..base.clone() },
        TrainConfig { learning_rate: -1.0, ..base.clone() },
        TrainConfig { batch_size: 0, ..base.clone() },
        TrainConfig { temperature: 0.0, ..base.clone() },
        TrainConfig { design_learning_rate: Some(f64::NAN), ..base.clone() },
    ] {
        assert!(matches!(train(&ds, &bad, 0), Err(Error::Config(_))));
    }
}

#[test]
fn best_of_k_is_the_maximum_on_the_selection_split() {
    let ds = tiny_dataset(6, 4, 7);
    let cfg = TrainConfig { reconstruct: false, ..tiny_train(Scenario::Discrete, 2) };
    let out = baseline_random_best(&ds, &cfg, 10, true, 3).unwrap();
    let max = out.selection_psnr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    assert_eq!(out.selection_psnr[out.best], max);
    assert_eq!(out.report.mean_psnr(), max);
    for (acq, &p) in out.candidates.iter().zip(&out.selection_psnr) {
        let r = evaluate(&ds.cfg, ds.test(), acq, None, "x").unwrap();
        assert_eq!(r.mean_psnr(), p);
    }
    let one = baseline_random_best(&ds, &cfg, 1, true, 3).unwrap();
    assert_eq!(one.candidates, out.candidates[..1]);
    assert!(matches!(baseline_random_best(&ds, &cfg, 0, true, 3), Err(Error::Config(_))));
}

#[test]
fn full_budget_random_designs_all_match_the_full_array() {
    let ds = tiny_dataset(4, 3, 8);
    let cfg = TrainConfig { reconstruct: false, ..tiny_train(Scenario::Discrete, 6) };
    let out = baseline_random_best(&ds, &cfg, 5, false, 9).unwrap();
    assert!(out.candidates.iter().all(|c| *c == Acquisition::Subset((0..6).collect())));
    assert!(out.selection_psnr.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn uniform_baseline_is_seed_free() {
    let ds = tiny_dataset(4, 3, 9);
    let cfg = TrainConfig { reconstruct: false, ..tiny_train(Scenario::Continuous, 5) };
    let a = baseline_uniform(&ds, &cfg, 1).unwrap();
    let b = baseline_uniform(&ds, &cfg, 2).unwrap();
    assert_eq!(a.candidates, vec![Acquisition::Coords(vec![0.0, 1.25, 2.5, 3.75, 5.0])]);
    assert_eq!(a.report, b.report);
    assert!(baseline_uniform(&ds, &TrainConfig { budget: 1, ..cfg }, 1).is_err());
}

#[test]
fn random_designs_are_valid_and_seeded() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..50 {
        let Acquisition::Subset(s) = random_acquisition(Scenario::Discrete, 20, 5, &mut rng).unwrap() else { panic!() };
        assert!(s.windows(2).all(|w| w[0] < w[1]) && s.len() == 5 && s[4] < 20);
        let Acquisition::Coords(c) = random_acquisition(Scenario::Continuous, 20, 5, &mut rng).unwrap() else {
            panic!()
        };
        assert!(c.windows(2).all(|w| w[0] <= w[1]) && c.iter().all(|x| (0.0..=19.0).contains(x)));
    }
    assert!(random_acquisition(Scenario::Discrete, 4, 5, &mut rng).is_err());
}

#[test]
fn comparison_rows_and_csv() {
    let ds = tiny_dataset(5, 3, 10);
    let eval = EvalConfig { random_designs: 2, select_on_test: false };
    for (scenario, recon, rows) in [
        (Scenario::Discrete, true, 4),
        (Scenario::Discrete, false, 2),
        (Scenario::Continuous, true, 6),
        (Scenario::Continuous, false, 3),
    ] {
        let cfg = TrainConfig { reconstruct: recon, epochs: 1, ..tiny_train(scenario, 3) };
        let out = train(&ds, &cfg, 2).unwrap();
        let reports = compare(&ds, &cfg, &eval, &out.acquisition, out.model.as_ref(), 2).unwrap();
        assert_eq!(reports.len(), rows);
        assert!(reports.iter().all(|r| r.psnr.len() == 3 && r.ssim.iter().all(|s| (-1.0..=1.0).contains(s))));
        let table: Vec<MetricsRow> = reports.iter().map(|r| MetricsRow::new(scenario, 3, 2, r)).collect();
        let text = metrics_csv(&table).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("scenario,variant,n_r,seed,psnr_mean,psnr_ci,ssim_mean,ssim_ci"));
        assert_eq!(lines.count(), rows);
    }
    let cfg = tiny_train(Scenario::Discrete, 3);
    assert!(compare(&ds, &cfg, &eval, &Acquisition::Subset(vec![0, 1, 2]), None, 0).is_err());
}

#[test]
fn learned_without_recon_row_matches_direct_evaluation() {
    let ds = tiny_dataset(5, 3, 11);
    let cfg = TrainConfig { reconstruct: false, epochs: 1, ..tiny_train(Scenario::Discrete, 3) };
    let out = train(&ds, &cfg, 0).unwrap();
    let eval = EvalConfig { random_designs: 1, select_on_test: false };
    let reports = compare(&ds, &cfg, &eval, &out.acquisition, None, 0).unwrap();
    let direct = evaluate(&ds.cfg, ds.test(), &out.acquisition, None, "learned-without-recon").unwrap();
    assert_eq!(reports[0], direct);
    assert_eq!(reports[1].variant, "random-without-recon");
}

#[test]
fn design_rate_falls_back_to_the_network_rate() {
    let ds = tiny_dataset(6, 2, 12);
    let cfg = tiny_train(Scenario::Continuous, 3);
    assert_eq!(cfg.design_rate(), cfg.learning_rate);
    // a frozen design with a learning network
    let frozen = train(&ds, &TrainConfig { design_learning_rate: Some(0.0), ..cfg.clone() }, 1).unwrap();
    assert_eq!(frozen.acquisition, Acquisition::Coords(vec![0.0, 2.5, 5.0]));
    let moved = train(&ds, &cfg, 1).unwrap();
    assert_ne!(moved.acquisition, frozen.acquisition);
    assert_ne!(frozen.model, train(&ds, &TrainConfig { learning_rate: 0.0, ..cfg }, 1).unwrap().model);
}
