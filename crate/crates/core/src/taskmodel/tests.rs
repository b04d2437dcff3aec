use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::autodiff::gradcheck;
use crate::beamform::{build_steering, full_positions};
use crate::pipeline::{continuous_map_direct, discrete_map_direct};
use crate::radar::{synth_baseband, ArrayConfig, SceneSampler};
use crate::subsample::sample_weights_var;

fn random_map(h: usize, w: usize, seed: u64) -> RangeAzimuthMap {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    RangeAzimuthMap::new(h, w, (0..h * w).map(|_| rng.gen_range(0.0..2.0)).collect()).unwrap()
}

fn small() -> UNetDescriptor {
    UNetDescriptor { depth: 2, base_channels: 3, kernel: 3, residual: false }
}

#[test]
fn parameter_count_matches_closed_form() {
    let d = UNetDescriptor { depth: 2, base_channels: 8, kernel: 3, residual: false };
    // conv(a -> b) = 9ab + b: 1->8, 8->8, 8->16, 16->16, 16->32, 32->32,
    // (32+16)->16, 16->16, (16+8)->8, 8->8, then 1x1 8->1
    let by_hand = 80 + 584 + 1168 + 2320 + 4640 + 9248 + 6928 + 2320 + 1736 + 584 + 9;
    assert_eq!(by_hand, 29617);
    assert_eq!(d.param_count(), 29617);
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    assert_eq!(ModelParams::init(d, &mut rng).unwrap().flat().len(), 29617);
}

#[test]
fn output_shape_matches_input_shape() {
    let d = UNetDescriptor::default();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = ModelParams::init(d, &mut rng).unwrap();
    let z = random_map(75, 64, 2);
    let y = forward(&z, &p).unwrap();
    assert_eq!((y.n_range(), y.n_azimuth()), (75, 64));
    let p = ModelParams::init(small(), &mut rng).unwrap();
    for (h, w) in [(1, 1), (5, 7), (8, 8), (13, 3)] {
        let y = forward(&random_map(h, w, 3), &p).unwrap();
        assert_eq!((y.n_range(), y.n_azimuth()), (h, w));
        assert!(y.values().iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn same_seed_same_parameters_and_output() {
    let d = UNetDescriptor::default();
    let a = ModelParams::init(d, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    let b = ModelParams::init(d, &mut ChaCha8Rng::seed_from_u64(7)).unwrap();
    assert_eq!(a, b);
    let z = random_map(20, 16, 4);
    assert_eq!(forward(&z, &a).unwrap(), forward(&z, &b).unwrap());
}

#[test]
fn init_variance_is_two_over_fan_in() {
    let d = UNetDescriptor::default();
    let p = ModelParams::init(d, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    for (t, (cin, _, k)) in p.tensors.iter().step_by(2).zip(d.layers()) {
        let v = t.re();
        if v.len() < 5000 {
            continue;
        }
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let want = 2.0 / (cin * k * k) as f64;
        assert!((var / want - 1.0).abs() < 0.1, "{var} vs {want}");
    }
    assert!(p.tensors.iter().skip(1).step_by(2).all(|b| b.re().iter().all(|&x| x == 0.0)));
}

#[test]
fn weight_gradient_matches_finite_differences() {
    let d = small();
    let p = ModelParams::init(d, &mut ChaCha8Rng::seed_from_u64(11)).unwrap();
    let z = random_map(6, 5, 12);
    for probe in [0, 4, 10] {
        let err = gradcheck::max_relative_error(
            &[p.tensors[probe].clone()],
            |g, v| {
                let mut net = NetVars::constants(g, &p);
                net.vars[probe] = v[0];
                let x = g.constant(z.to_tensor());
                let y = forward_var(g, &net, x)?;
                g.sum(y)
            },
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-4, "layer tensor {probe}: {err}");
    }
}

#[test]
fn checkpoint_round_trips_and_rejects_corruption() {
    let p = ModelParams::init(small(), &mut ChaCha8Rng::seed_from_u64(13)).unwrap();
    let bytes = encode_checkpoint(&p);
    let back = decode_checkpoint(&bytes).unwrap();
    assert_eq!(back, p);
    assert_eq!(encode_checkpoint(&back), bytes);
    assert!(decode_checkpoint(&bytes[..bytes.len() - 3]).is_err());
    let mut wrong = bytes.clone();
    wrong[6] = 9;
    assert!(decode_checkpoint(&wrong).is_err());
    let mut flag = bytes;
    flag[18] = 2;
    assert!(decode_checkpoint(&flag).is_err());
}

#[test]
fn design_gradients_flow_through_the_network() {
    let cfg = ArrayConfig { n_tx: 3, n_rx: 6, n_range: 8, n_azimuth: 8, ..ArrayConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let scene = SceneSampler::default().sample(&cfg, &mut rng);
    let cube = synth_baseband(&scene, &cfg, 0.1, &mut rng).unwrap();
    let h = build_steering(&cfg, &full_positions(&cfg)).unwrap();
    let params = ModelParams::init(small(), &mut rng).unwrap();
    let eps: Vec<f64> = (0..6).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut g = Graph::new();
    let la = g.param(Tensor::real(&[6], vec![0.1, -0.2, 0.3, 0.0, 0.2, -0.1]).unwrap());
    let mut eye = vec![0.0; 36];
    (0..6).for_each(|i| eye[i * 7] = 1.0);
    let lf = g.param(Tensor::real(&[6, 6], eye).unwrap());
    let coords = g.param(Tensor::real(&[3], vec![0.4, 2.3, 4.6]).unwrap());
    let net = NetVars::params(&mut g, &params);
    let psi = sample_weights_var(&mut g, la, lf, &eps, 3, 0.5).unwrap();
    let a = discrete_map_direct(&mut g, &cube, &h, psi).unwrap();
    let b = continuous_map_direct(&mut g, &cfg, &cube, coords).unwrap();
    let ya = forward_var(&mut g, &net, a).unwrap();
    let yb = forward_var(&mut g, &net, b).unwrap();
    let sa = g.sum(ya).unwrap();
    let sb = g.sum(yb).unwrap();
    let total = g.add(sa, sb).unwrap();
    let grads = g.backward(total).unwrap();
    for v in [la, lf, coords] {
        let gv = grads.get(v).unwrap();
        assert!(gv.re().iter().any(|&x| x != 0.0));
    }
}
