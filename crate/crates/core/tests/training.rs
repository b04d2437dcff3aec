use sal::radar::{make_dataset, ArrayConfig, SceneSampler};
use sal::subsample::Scenario;
use sal::taskmodel::UNetDescriptor;
use sal::train::{train, TrainConfig};

#[test]
fn training_loss_drops_over_200_epochs_on_50_scenes() {
    let cfg = ArrayConfig { n_tx: 8, n_rx: 8, n_range: 16, n_azimuth: 16, ..ArrayConfig::default() };
    let ds = make_dataset(50, 1, &cfg, &SceneSampler::default(), 0.3, 4).unwrap();
    for scenario in [Scenario::Discrete, Scenario::Continuous] {
        let train_cfg = TrainConfig {
            scenario,
            budget: 3,
            epochs: 200,
            batch_size: 8,
            model: UNetDescriptor { depth: 1, base_channels: 2, kernel: 3, residual: true },
            ..TrainConfig::default()
        };
        let out = train(&ds, &train_cfg, 5).unwrap();
        let losses: Vec<f64> = out.history.epochs.iter().map(|e| e.train_loss).collect();
        assert_eq!(losses.len(), 200);
        let (first, last) = (losses[0], losses[199]);
        assert!(last < 0.95 * first, "{scenario:?}: {first} -> {last}");
    }
}
