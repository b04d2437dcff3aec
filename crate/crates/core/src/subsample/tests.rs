use std::f64::consts::E;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::gradcheck;
use crate::beamform::{build_steering, full_positions};
use crate::beamform::{ContinuousBasis, DiscreteBasis};
use crate::pipeline::{continuous_map_direct, continuous_map_factored, discrete_map_direct, discrete_map_factored};
use crate::radar::{noiseless_signal, synth_baseband, Scene, SceneSampler};

/// Two-sided Kolmogorov-Smirnov statistic against Uniform(0, 1).
fn ks_uniform(mut u: Vec<f64>) -> f64 {
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter().enumerate().map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n)).fold(0.0, f64::max)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    idx.iter().enumerate().for_each(|(rank, &i)| r[i] = rank as f64);
    r
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn identity(n: usize) -> Vec<f64> {
    (0..n * n).map(|i| if i / n == i % n { 1.0 } else { 0.0 }).collect()
}

// 1% critical value of the two-sided KS test for n = 1e4
const KS_CRIT: f64 = 1.6276 / 100.0;

#[test]
fn copula_marginals_are_uniform_and_independent_for_identity() {
    let n = 4;
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let draws: Vec<Vec<f64>> =
        (0..10_000).map(|_| gaussian_copula_uniforms(&identity(n), n, &mut rng).unwrap()).collect();
    for i in 0..n {
        let col: Vec<f64> = draws.iter().map(|d| d[i]).collect();
        assert!(ks_uniform(col) < KS_CRIT);
    }
    let u1: Vec<f64> = draws.iter().map(|d| d[0]).collect();
    let u2: Vec<f64> = draws.iter().map(|d| d[1]).collect();
    assert!(pearson(&ranks(&u1), &ranks(&u2)).abs() < 0.05);
}

#[test]
fn copula_marginals_stay_uniform_under_correlation() {
    let l = vec![1.0, 0.0, 0.0, 0.8, 0.3, 0.0, -2.0, 0.5, 0.1];
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let draws: Vec<Vec<f64>> = (0..10_000).map(|_| gaussian_copula_uniforms(&l, 3, &mut rng).unwrap()).collect();
    for i in 0..3 {
        assert!(ks_uniform(draws.iter().map(|d| d[i]).collect()) < KS_CRIT);
    }
    let u1: Vec<f64> = draws.iter().map(|d| d[0]).collect();
    let u2: Vec<f64> = draws.iter().map(|d| d[1]).collect();
    assert!(pearson(&ranks(&u1), &ranks(&u2)) > 0.8);
}

#[test]
fn identical_factor_rows_give_identical_uniforms() {
    let l = vec![0.7, 0.0, 0.0, 0.7, 0.0, 0.0, 0.2, -0.4, 1.0];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..200 {
        let u = gaussian_copula_uniforms(&l, 3, &mut rng).unwrap();
        assert_eq!(u[0], u[1]);
    }
    assert!(gaussian_copula_uniforms(&[0.0, 0.0, 1.0, 1.0], 2, &mut rng).is_err());
}

#[test]
fn relaxed_logistic_examples() {
    let l = relaxed_logistic(&[1.0, E], &[0.5, 0.5]).unwrap();
    assert_eq!(l[0], 0.0);
    assert!((l[1] - 1.0).abs() < 1e-15);
    assert_eq!(relaxed_bernoulli(l[0], 0.001), 0.5);
    // clamped, never infinite
    assert!(relaxed_logistic(&[1.0, 1.0], &[0.0, 1.0]).unwrap().iter().all(|v| v.is_finite()));
}

#[test]
fn relaxed_bernoulli_acceptance_tends_to_alpha_ratio() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let alpha = 3.0;
    let n = 10_000;
    let hits = (0..n)
        .filter(|_| {
            let u: f64 = rng.gen();
            relaxed_bernoulli(relaxed_logistic(&[alpha], &[u]).unwrap()[0], 0.001) > 0.5
        })
        .count();
    assert!((hits as f64 / n as f64 - 0.75).abs() < 0.02);
}

#[test]
fn relaxed_topk_examples() {
    assert_eq!(relaxed_topk(&[0.3, -1.0, 2.0], 3, 0.001).unwrap(), vec![1.0; 3]);
    let psi = relaxed_topk(&[10.0, 0.0, -10.0], 1, 0.001).unwrap();
    for (p, e) in psi.iter().zip([1.0, 0.0, 0.0]) {
        assert!((p - e).abs() < 1e-6);
    }
    assert!(relaxed_topk(&[1.0, 2.0], 0, 0.1).is_err());
    assert!(relaxed_topk(&[1.0, 2.0], 3, 0.1).is_err());
}

#[test]
fn relaxed_topk_sums_to_budget_and_selects_top_entries() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..100 {
        let len = rng.gen_range(2..12);
        let n = rng.gen_range(1..=len);
        let l: Vec<f64> = (0..len).map(|_| rng.gen_range(-3.0..3.0)).collect();
        for lambda in [1.0, 0.1, 0.001] {
            let psi = relaxed_topk(&l, n, lambda).unwrap();
            assert!((psi.iter().sum::<f64>() - n as f64).abs() < 1e-9, "trial {trial}");
        }
        let psi = relaxed_topk(&l, n, 0.001).unwrap();
        assert_eq!(top_n(&psi, n), top_n(&l, n), "trial {trial}: {l:?}");
    }
}

#[test]
fn inference_ranks_alpha_with_low_index_ties() {
    let d = DiscreteDesign {
        log_alpha: [1.0f64, 2.0, 3.0, 4.0].map(f64::ln).to_vec(),
        ..DiscreteDesign::new(4, 2, 0.001).unwrap()
    };
    assert_eq!(infer_discrete_selection(&d), vec![2, 3]);
    let flat = DiscreteDesign::new(4, 2, 0.001).unwrap();
    assert_eq!(infer_discrete_selection(&flat), vec![0, 1]);
    assert_eq!(infer_discrete_selection(&flat), infer_discrete_selection(&flat));
}

#[test]
fn design_projection_restores_invariants() {
    let mut d = DiscreteDesign::new(3, 2, 0.001).unwrap();
    d.l_factor = vec![-1.0, 5.0, 5.0, 0.2, 0.0, 5.0, 0.1, 0.2, 2.0];
    d.project();
    assert_eq!(d.l_factor, vec![MIN_DIAG, 0.0, 0.0, 0.2, MIN_DIAG, 0.0, 0.1, 0.2, 2.0]);
    d.validate().unwrap();
    assert!(DiscreteDesign::new(3, 4, 0.001).is_err());
    let mut c = ContinuousDesign::new(vec![-1.0, 3.2, 40.0], 20).unwrap();
    c.project();
    assert_eq!(c.coords, vec![0.0, 3.2, 19.0]);
}

fn small_cfg() -> ArrayConfig {
    ArrayConfig { n_tx: 3, n_rx: 6, n_range: 8, n_azimuth: 8, ..ArrayConfig::default() }
}

fn noisy_cube(cfg: &ArrayConfig, sigma: f64, seed: u64) -> BasebandCube {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scene = SceneSampler::default().sample(cfg, &mut rng);
    synth_baseband(&scene, cfg, sigma, &mut rng).unwrap()
}

#[test]
fn all_ones_hard_selection_is_the_averaged_cube() {
    let cfg = small_cfg();
    let cube = noisy_cube(&cfg, 0.3, 1);
    let all: Vec<usize> = (0..cfg.n_rx).collect();
    let hard = apply_discrete_hard(&cube, &all).unwrap();
    let avg = cube.temporal_average();
    assert_eq!(hard.cx(), avg.cx());
    assert_eq!(apply_discrete(&cube, &[1.0; 6]).unwrap().cx(), avg.cx());
}

#[test]
fn one_hot_weights_keep_a_single_receiver() {
    let cfg = small_cfg();
    let cube = noisy_cube(&cfg, 0.3, 2);
    let mut psi = vec![0.0; cfg.n_rx];
    psi[4] = 1.0;
    let x = apply_discrete(&cube, &psi).unwrap();
    for (i, z) in x.cx().iter().enumerate() {
        let rx = i % cfg.n_rx;
        assert_eq!(*z != Complex64::new(0.0, 0.0), rx == 4, "column {i}");
    }
}

#[test]
fn soft_all_ones_equals_hard_full_array_map() {
    let cfg = small_cfg();
    let cube = noisy_cube(&cfg, 0.3, 3);
    let h = build_steering(&cfg, &full_positions(&cfg)).unwrap();
    let mut g = Graph::new();
    let psi = g.constant(Tensor::real(&[cfg.n_rx], vec![1.0; cfg.n_rx]).unwrap());
    let soft = discrete_map_direct(&mut g, &cube, &h, psi).unwrap();
    let hard = crate::beamform::full_array_map(&cube, &h).unwrap();
    assert_eq!(g.value(soft).re(), hard.values());
}

/// Sample variance of complex noise samples, `E|n|^2`.
fn complex_var(v: &[Complex64]) -> f64 {
    let n = v.len() as f64;
    let mean = v.iter().sum::<Complex64>() / n;
    v.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / (n - 1.0)
}

#[test]
fn temporal_average_halves_noise_variance() {
    let cfg = ArrayConfig { n_tx: 10, n_rx: 10, n_range: 10, n_azimuth: 4, ..ArrayConfig::default() };
    let sigma = 0.7;
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let scene = SceneSampler::default().sample(&cfg, &mut rng);
    let signal = noiseless_signal(&scene, &cfg);
    let mut noise = Vec::new();
    while noise.len() < 100_000 {
        let cube = synth_baseband(&scene, &cfg, sigma, &mut rng).unwrap();
        let avg = cube.temporal_average();
        noise.extend(avg.cx().iter().zip(&signal).map(|(a, s)| a - s));
    }
    let ratio = complex_var(&noise) / (sigma * sigma);
    assert!((ratio - 0.5).abs() < 0.5 * 0.02, "ratio {ratio}");
}

#[test]
fn beta_closed_form_values() {
    assert_eq!(beta_of_alpha(0.0), 0.5);
    assert_eq!(beta_of_alpha(1.0), 0.5);
    assert_eq!(beta_of_alpha(0.5), 1.0);
    for i in 0..=1000 {
        let a = i as f64 / 1000.0;
        assert!((beta_of_alpha(a) - beta_of_alpha(1.0 - a)).abs() < 1e-12);
        let mut g = Graph::new();
        let av = g.constant(Tensor::real(&[1], vec![a]).unwrap());
        let b = beta_var(&mut g, av).unwrap();
        assert_eq!(g.value(b).re()[0], beta_of_alpha(a));
    }
}

#[test]
fn integer_and_half_coordinates_follow_the_bilinear_form() {
    let cfg = small_cfg();
    let cube = noisy_cube(&cfg, 0.5, 6);
    let (k, t, _) = cube.dims();
    for (coord, expect) in [(3.0, [(3, 0, 0.5), (3, 1, 0.5)]), (3.5, [(3, 1, 0.5), (4, 1, 0.5)])] {
        let x = apply_continuous(&cube, &ContinuousDesign::new(vec![coord], cfg.n_rx).unwrap()).unwrap();
        assert_eq!(x.shape(), &[k, t]);
        for kk in 0..k {
            for tx in 0..t {
                let want: Complex64 = expect.iter().map(|&(r, acq, w)| cube.get(kk, tx, r, acq) * w).sum();
                assert!((x.cx()[kk * t + tx] - want).norm() < 1e-14);
            }
        }
    }
}

#[test]
fn interpolated_noise_variance_is_flat() {
    let cfg = ArrayConfig { n_tx: 50, n_rx: 5, n_range: 20, n_azimuth: 4, ..ArrayConfig::default() };
    let sigma = 1.3;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for step in 0..=10 {
        let coord = 2.0 + step as f64 / 10.0;
        let design = ContinuousDesign::new(vec![coord], cfg.n_rx).unwrap();
        let mut noise = Vec::new();
        while noise.len() < 100_000 {
            let cube = synth_baseband(&Scene::default(), &cfg, sigma, &mut rng).unwrap();
            noise.extend_from_slice(apply_continuous(&cube, &design).unwrap().cx());
        }
        let ratio = complex_var(&noise) / (sigma * sigma);
        assert!((ratio - 0.5).abs() < 0.5 * 0.02, "coord {coord}: ratio {ratio}");
    }
}

fn target_map(cfg: &ArrayConfig, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let v = (0..cfg.n_range * cfg.n_azimuth).map(|_| rng.gen_range(0.0..0.3)).collect();
    Tensor::real(&[cfg.n_range, cfg.n_azimuth], v).unwrap()
}

fn loss(g: &mut Graph, z: Var, target: &Tensor) -> crate::Result<Var> {
    let t = g.constant(target.clone());
    let d = g.sub(z, t)?;
    g.l2_norm(d)
}

#[test]
fn discrete_path_gradients_match_finite_differences() {
    let cfg = small_cfg();
    let cube = noisy_cube(&cfg, 0.2, 9);
    let h = build_steering(&cfg, &full_positions(&cfg)).unwrap();
    let basis = DiscreteBasis::new(&cfg, &cube);
    let target = target_map(&cfg, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut design = DiscreteDesign::new(cfg.n_rx, 3, 0.5).unwrap();
    design.log_alpha = (0..cfg.n_rx).map(|_| rng.gen_range(-0.5..0.5)).collect();
    for i in 0..cfg.n_rx {
        for j in 0..i {
            design.l_factor[i * cfg.n_rx + j] = rng.gen_range(-0.5..0.5);
        }
    }
    let eps = design.draw_eps(&mut rng);
    let inputs = [
        Tensor::real(&[cfg.n_rx], design.log_alpha.clone()).unwrap(),
        Tensor::real(&[cfg.n_rx, cfg.n_rx], design.l_factor.clone()).unwrap(),
    ];
    for factored in [false, true] {
        let err = gradcheck::max_relative_error(
            &inputs,
            |g, v| {
                let psi = sample_weights_var(g, v[0], v[1], &eps, 3, 0.5)?;
                let z = if factored {
                    discrete_map_factored(g, &basis, cfg.n_tx, psi)?
                } else {
                    discrete_map_direct(g, &cube, &h, psi)?
                };
                loss(g, z, &target)
            },
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-4, "factored={factored}: {err}");
    }
}

#[test]
fn continuous_path_gradients_match_finite_differences() {
    let cfg = small_cfg();
    let cube = noisy_cube(&cfg, 0.2, 11);
    let basis = ContinuousBasis::new(&cfg, &cube);
    let target = target_map(&cfg, 2);
    let coords = Tensor::real(&[3], vec![0.3, 2.45, 4.8]).unwrap();
    for factored in [false, true] {
        let err = gradcheck::max_relative_error(
            std::slice::from_ref(&coords),
            |g, v| {
                let z = if factored {
                    continuous_map_factored(g, &basis, cfg.n_rx, v[0])?
                } else {
                    continuous_map_direct(g, &cfg, &cube, v[0])?
                };
                loss(g, z, &target)
            },
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-4, "factored={factored}: {err}");
    }
}

#[test]
fn factored_and_direct_continuous_maps_agree_off_grid() {
    let cfg = small_cfg();
    let cube = noisy_cube(&cfg, 0.2, 12);
    let basis = ContinuousBasis::new(&cfg, &cube);
    let mut g = Graph::new();
    let c = g.constant(Tensor::real(&[4], vec![0.0, 1.25, 3.5, 5.0]).unwrap());
    let a = continuous_map_direct(&mut g, &cfg, &cube, c).unwrap();
    let b = continuous_map_factored(&mut g, &basis, cfg.n_rx, c).unwrap();
    for (x, y) in g.value(a).re().iter().zip(g.value(b).re()) {
        assert!((x - y).abs() < 1e-12);
    }
}
