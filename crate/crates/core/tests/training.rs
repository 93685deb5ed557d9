use patchcast::data::{PreparedData, SplitPolicy, WindowSet};
use patchcast::model::{ModelConfig, PatchMlp};
use patchcast::numerics::{Matrix, Parameterized, Rng};
use patchcast::synth::{column_names, generate, SynthSpec};
use patchcast::training::{evaluate, train, TrainConfig};
use patchcast::Error;

fn small_model(variables: usize) -> ModelConfig {
    let mut c = ModelConfig::new(24, 12, variables);
    c.d_model = 16;
    c.pool_kernel = 5;
    c
}

fn noisy_sine(length: usize, seed: u64) -> PreparedData {
    let mut spec = SynthSpec::periodic(length, 2, &[12], seed);
    spec.noise_sigma = 0.3;
    let values = generate(&spec).unwrap();
    PreparedData::new("sine", &values, column_names(2), SplitPolicy::Ratio { train: 0.6, val: 0.2 }, 24, 12).unwrap()
}

fn quick() -> TrainConfig {
    TrainConfig {
        max_epochs: 4,
        batch_size: 16,
        seed: 9,
        ..Default::default()
    }
}

fn fit(data: &PreparedData, config: &TrainConfig) -> (PatchMlp, patchcast::training::RunReport) {
    let mut model = PatchMlp::init(&small_model(data.variables()), &mut Rng::new(config.seed)).unwrap();
    let report = train(&mut model, data, config).unwrap();
    (model, report)
}

#[test]
fn same_seed_same_report() {
    let data = noisy_sine(600, 1);
    let (a_model, mut a) = fit(&data, &quick());
    let (b_model, mut b) = fit(&data, &quick());
    a.seconds = 0.0;
    b.seconds = 0.0;
    assert_eq!(a, b);
    assert_eq!(a_model.snapshot(), b_model.snapshot());
    assert_eq!(a.fingerprint.len(), 16);
}

#[test]
fn seed_changes_trajectory() {
    let data = noisy_sine(600, 1);
    let (_, a) = fit(&data, &quick());
    let (_, b) = fit(&data, &TrainConfig { seed: 10, ..quick() });
    assert_ne!(a.epochs, b.epochs);
    assert_ne!(a.fingerprint, b.fingerprint);
}

#[test]
fn returns_the_best_validation_checkpoint() {
    let data = noisy_sine(600, 2);
    let config = TrainConfig {
        max_epochs: 6,
        lr: 5e-3,
        ..quick()
    };
    let (mut model, report) = fit(&data, &config);
    let min = report.epochs.iter().map(|e| e.val_mse).fold(f64::INFINITY, f64::min);
    assert_eq!(report.best_val_mse, min);
    assert_eq!(report.epochs[report.best_epoch - 1].val_mse, min);
    let val = evaluate(&mut model, &data, &data.val_windows(1), config.batch_size).unwrap();
    assert_eq!(val.mse, min);
}

#[test]
fn early_stopping_waits_for_patience() {
    let data = noisy_sine(600, 3);
    let config = TrainConfig {
        max_epochs: 200,
        patience: 2,
        lr: 1e-2,
        ..quick()
    };
    let (_, report) = fit(&data, &config);
    assert!(report.stopped_early, "ran all {} epochs", report.epochs.len());
    assert_eq!(report.epochs.len(), report.best_epoch + config.patience);
}

#[test]
fn max_steps_caps_training() {
    let data = noisy_sine(600, 4);
    let (_, report) = fit(&data, &TrainConfig { max_steps: Some(7), ..quick() });
    assert_eq!(report.steps, 7);
}

fn zero_model(variables: usize) -> PatchMlp {
    let mut c = small_model(variables);
    c.use_instance_norm = false;
    let mut model = PatchMlp::init(&c, &mut Rng::new(0)).unwrap();
    model.visit_params_mut(&mut |_, p| p.value.fill(0.0));
    model
}

#[test]
fn perfect_predictor_scores_zero() {
    let values = Matrix::<f64>::zeros(200, 2);
    let data = PreparedData::new("flat", &values, column_names(2), SplitPolicy::Ratio { train: 0.6, val: 0.2 }, 24, 12)
        .unwrap();
    let m = evaluate(&mut zero_model(2), &data, &data.test_windows(1), 8).unwrap();
    assert_eq!((m.mse, m.mae), (0.0, 0.0));
}

#[test]
fn zero_predictor_on_white_noise_scores_its_variance() {
    let mut spec = SynthSpec::periodic(40_000, 2, &[], 5);
    spec.noise_sigma = 1.0;
    let values = generate(&spec).unwrap();
    let data = PreparedData::new("noise", &values, column_names(2), SplitPolicy::Ratio { train: 0.5, val: 0.1 }, 24, 12)
        .unwrap();
    let m = evaluate(&mut zero_model(2), &data, &data.test_windows(1), 256).unwrap();
    assert!((m.mse - 1.0).abs() < 0.03, "mse {}", m.mse);
    // E|z| for a standard normal
    assert!((m.mae - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.03, "mae {}", m.mae);
}

#[test]
fn duplicated_windows_give_the_same_metrics() {
    let data = noisy_sine(400, 6);
    let mut model = PatchMlp::<f32>::init(&small_model(2), &mut Rng::new(1)).unwrap();
    let once = data.test_windows(1);
    let twice = WindowSet {
        origins: once.origins.iter().chain(&once.origins).copied().collect(),
        ..once.clone()
    };
    let a = evaluate(&mut model, &data, &once, 16).unwrap();
    let b = evaluate(&mut model, &data, &twice, 16).unwrap();
    assert!((a.mse - b.mse).abs() <= 1e-12 * a.mse);
    assert!((a.mae - b.mae).abs() <= 1e-12 * a.mae);
}

#[test]
fn needs_validation_windows() {
    let values = generate(&SynthSpec::periodic(300, 1, &[12], 0)).unwrap();
    let data = PreparedData::new("short", &values, column_names(1), SplitPolicy::Ratio { train: 0.9, val: 0.0 }, 24, 12);
    match data {
        Err(e) => assert!(matches!(e, Error::Data(_))),
        Ok(d) => {
            let mut model = PatchMlp::<f32>::init(&small_model(1), &mut Rng::new(0)).unwrap();
            assert!(matches!(train(&mut model, &d, &quick()), Err(Error::Data(_))));
        }
    }
}

#[test]
fn empty_window_set_is_rejected() {
    let data = noisy_sine(400, 7);
    let empty = WindowSet {
        origins: Vec::new(),
        lookback: 24,
        horizon: 12,
    };
    assert!(evaluate(&mut zero_model(2), &data, &empty, 8).is_err());
}
