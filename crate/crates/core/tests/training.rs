use smm_core::integrators::Discretization;
use smm_core::models::{ModelCheckpoint, ModelClass, ModelConfig, TrueModel};
use smm_core::systems::{SystemKind, SystemSpec};
use smm_core::training::{
    dataset_loss, evaluate_jacobian_error, evaluate_mse, fit_normalizer, sample_dataset, train, Dataset, EpochOrder,
    SamplingBox, TrainConfig,
};

fn disc() -> Discretization {
    Discretization::rk4(0.05).with_substeps(5)
}

fn small_model(class: ModelClass, spec: &SystemSpec, data: &Dataset, seed: u64) -> ModelCheckpoint {
    let cfg = ModelConfig::new(class, spec.n_q(), spec.n_u(), spec.angle_mask()).with_hidden(&[16, 16]);
    let norm = fit_normalizer(&cfg, data).unwrap();
    ModelCheckpoint::init(cfg.with_normalizer(norm), seed).unwrap()
}

#[test]
fn dataset_size_and_seeding() {
    let spec = SystemSpec::new(SystemKind::Cartpole);
    let a = sample_dataset(&spec, 256, 4, &disc()).unwrap();
    assert_eq!(a.len(), 256);
    assert_eq!(a, sample_dataset(&spec, 256, 4, &disc()).unwrap());
    let b = sample_dataset(&spec, 256, 5, &disc()).unwrap();
    assert_ne!(a.transitions[0], b.transitions[0]);
    // Per-sample streams make smaller datasets prefixes of larger ones.
    let c = sample_dataset(&spec, 64, 4, &disc()).unwrap();
    assert_eq!(c.transitions[..], a.transitions[..64]);
}

#[test]
fn samples_stay_inside_the_box() {
    let spec = SystemSpec::new(SystemKind::Furuta);
    let data = sample_dataset(&spec, 32768, 1, &disc()).unwrap();
    let b = SamplingBox::for_system(&spec);
    assert!(data.transitions.iter().all(|t| b.contains(&t.x, &t.u)));
}

#[test]
fn zero_epochs_leave_parameters_unchanged() {
    let spec = SystemSpec::new(SystemKind::Pendulum);
    let data = sample_dataset(&spec, 32, 0, &disc()).unwrap();
    let init = small_model(ModelClass::SmmC, &spec, &data, 2);
    let cfg = TrainConfig { epochs: Some(0), ..TrainConfig::default() };
    assert_eq!(train(&init, &data, &cfg).unwrap().params, init.params);
}

#[test]
fn loss_decreases_on_small_pendulum_dataset() {
    let spec = SystemSpec::new(SystemKind::Pendulum);
    let data = sample_dataset(&spec, 16, 3, &disc()).unwrap();
    for class in [ModelClass::Bbnn, ModelClass::Smm, ModelClass::SmmC] {
        let init = small_model(class, &spec, &data, 7);
        let cfg = TrainConfig { epochs: Some(60), learning_rate: 1e-3, ..TrainConfig::default() };
        let trained = train(&init, &data, &cfg).unwrap();
        let curve = &trained.metadata.loss_curve;
        assert_eq!(curve.len(), 60);
        assert!(curve.last().unwrap() < &curve[0], "{class:?}: {} -> {}", curve[0], curve.last().unwrap());
        assert!(dataset_loss(&trained, &data).unwrap() < dataset_loss(&init, &data).unwrap());
    }
}

#[test]
fn training_helps_in_sample_for_every_class() {
    let spec = SystemSpec::new(SystemKind::Cartpole);
    let data = sample_dataset(&spec, 128, 8, &disc()).unwrap();
    for class in [ModelClass::Bbnn, ModelClass::Smm, ModelClass::SmmC] {
        let init = small_model(class, &spec, &data, 1);
        let trained = train(&init, &data, &TrainConfig { epochs: Some(20), ..TrainConfig::default() }).unwrap();
        let before = evaluate_mse(&init, &data).unwrap();
        let after = evaluate_mse(&trained, &data).unwrap();
        assert!(after <= before, "{class:?}: {before} -> {after}");
    }
}

#[test]
fn training_is_bit_reproducible() {
    let spec = SystemSpec::new(SystemKind::Cartpole);
    let data = sample_dataset(&spec, 96, 2, &disc()).unwrap();
    let init = small_model(ModelClass::SmmC, &spec, &data, 3);
    let cfg = TrainConfig { epochs: Some(5), seed: 11, ..TrainConfig::default() };
    let a = train(&init, &data, &cfg).unwrap();
    let b = train(&init, &data, &cfg).unwrap();
    assert_eq!(a, b);
    let other = train(&init, &data, &TrainConfig { seed: 12, ..cfg }).unwrap();
    assert_ne!(a.params, other.params);
}

#[test]
fn shuffling_permutes_without_dropping_samples() {
    let mut order = EpochOrder::new(100, 5, true);
    let first = order.next_epoch().to_vec();
    let second = order.next_epoch().to_vec();
    assert_ne!(first, second);
    for epoch in [first, second] {
        let mut sorted = epoch.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..100).collect::<Vec<_>>());
    }
    let mut fixed = EpochOrder::new(10, 5, false);
    assert_eq!(fixed.next_epoch(), &(0..10).collect::<Vec<_>>()[..]);
}

#[test]
fn true_model_is_self_consistent() {
    let spec = SystemSpec::new(SystemKind::Acrobot);
    let data = sample_dataset(&spec, 256, 6, &disc()).unwrap();
    let truth = TrueModel::new(spec, disc());
    assert!(evaluate_mse(&truth, &data).unwrap() < 1e-12);
    let je = evaluate_jacobian_error(&truth, &truth, &data).unwrap();
    assert!(je.ex_mean < 1e-9 && je.eu_mean < 1e-9);
}

#[test]
fn metrics_are_nonnegative_and_order_free() {
    let spec = SystemSpec::new(SystemKind::Cartpole);
    let data = sample_dataset(&spec, 64, 9, &disc()).unwrap();
    let model = small_model(ModelClass::Bbnn, &spec, &data, 4);
    let truth = TrueModel::new(spec, disc());
    let mut reversed = data.clone();
    reversed.transitions.reverse();
    let mse = evaluate_mse(&model, &data).unwrap();
    assert!(mse >= 0.0);
    assert!((mse - evaluate_mse(&model, &reversed).unwrap()).abs() <= 1e-12 * mse);
    let a = evaluate_jacobian_error(&model, &truth, &data).unwrap();
    let b = evaluate_jacobian_error(&model, &truth, &reversed).unwrap();
    assert!((a.ex_mean - b.ex_mean).abs() <= 1e-12 * a.ex_mean);
    assert!((a.eu_mean - b.eu_mean).abs() <= 1e-12 * a.eu_mean);
}

#[test]
fn rejects_mismatched_dataset() {
    let cart = SystemSpec::new(SystemKind::Cartpole);
    let pend = SystemSpec::new(SystemKind::Pendulum);
    let data = sample_dataset(&pend, 16, 0, &disc()).unwrap();
    let cfg = ModelConfig::new(ModelClass::Bbnn, cart.n_q(), 1, cart.angle_mask());
    let model = ModelCheckpoint::init(cfg, 0).unwrap();
    assert!(train(&model, &data, &TrainConfig { epochs: Some(1), ..TrainConfig::default() }).is_err());
}
