mod common;

use std::collections::BTreeMap;
use std::path::Path;

use common::{tiny_bundle, tiny_fusion};
use thumbforge::fusion::{FusionConfig, FusionNet};
use thumbforge::nn::Module;
use thumbforge::training::{
    ema, epoch_order, load_model, loss_curve_csv, run_training, run_training_with, Adam, AdamConfig, Control,
    ModelKind, TrainConfig,
};
use thumbforge::{Error, Tensor};

fn scalar_param(v: f64) -> Tensor {
    Tensor::vector(vec![v]).requires_grad()
}

#[test]
fn zero_gradient_leaves_parameters_and_counts_step() {
    let mut p = Tensor::vector(vec![1.5, -2.0]).requires_grad();
    let mut adam = Adam::new(AdamConfig::with_lr(0.1));
    adam.step_with([("p".to_string(), &mut p, &[0.0, 0.0][..])]).unwrap();
    assert_eq!(p.data(), &[1.5, -2.0]);
    assert_eq!(adam.step, 1);
}

#[test]
fn first_two_steps_match_closed_form() {
    let cfg = AdamConfig::with_lr(0.01);
    let mut p = scalar_param(0.0);
    let mut adam = Adam::new(cfg);
    adam.step_with([("p".to_string(), &mut p, &[1.0][..])]).unwrap();
    // m̂ = g, v̂ = g², so the step is −lr·g/(|g| + ε).
    let want1 = -cfg.lr / (1.0 + cfg.eps);
    assert!((p.data()[0] - want1).abs() < 1e-12);
    assert!((p.data()[0] + cfg.lr).abs() < 1e-9);

    adam.step_with([("p".to_string(), &mut p, &[3.0][..])]).unwrap();
    let m = (1.0 - cfg.beta1) * (cfg.beta1 * 1.0 + 3.0);
    let v = (1.0 - cfg.beta2) * (cfg.beta2 * 1.0 + 9.0);
    let m_hat = m / (1.0 - cfg.beta1.powi(2));
    let v_hat = v / (1.0 - cfg.beta2.powi(2));
    let want2 = want1 - cfg.lr * m_hat / (v_hat.sqrt() + cfg.eps);
    assert!((p.data()[0] - want2).abs() < 1e-12);
}

#[test]
fn nan_gradient_aborts_naming_parameter() {
    let mut a = scalar_param(1.0);
    let mut b = scalar_param(2.0);
    let mut adam = Adam::new(AdamConfig::default());
    let err = adam
        .step_with([("a".to_string(), &mut a, &[0.5][..]), ("b.weight".to_string(), &mut b, &[f64::NAN][..])])
        .unwrap_err();
    match err {
        Error::NonFinite { param, index } => assert_eq!((param.as_str(), index), ("b.weight", 0)),
        other => panic!("unexpected {other}"),
    }
    assert_eq!(a.data(), &[1.0]);
    assert_eq!(adam.step, 0);
}

#[test]
fn nan_features_abort_training() {
    let mut b = tiny_bundle(1, 3, 2);
    b.title.data_mut()[0] = f64::NAN;
    let net = FusionNet::new(tiny_fusion(0)).unwrap();
    let err = run_training(net, &[b], &[], &TrainConfig::new(ModelKind::Fusion, 1, 1e-3, 0)).err().unwrap();
    assert!(matches!(err, Error::NonFinite { .. }), "{err}");
}

#[test]
fn config_validation() {
    assert!(TrainConfig::new(ModelKind::Fusion, 0, 1e-3, 0).validate().is_err());
    assert!(TrainConfig::new(ModelKind::Fusion, 1, 0.0, 0).validate().is_err());
    assert!(TrainConfig::new(ModelKind::Fusion, 1, 1e-3, 0).validate().is_ok());
    let net = FusionNet::new(tiny_fusion(0)).unwrap();
    let wrong = TrainConfig::new(ModelKind::Filter, 1, 1e-3, 0);
    assert!(matches!(run_training(net, &[tiny_bundle(0, 2, 2)], &[], &wrong), Err(Error::Config(_))));
}

#[test]
fn empty_or_unlabelled_data_fails_before_any_step() {
    let net = FusionNet::new(tiny_fusion(0)).unwrap();
    let cfg = TrainConfig::new(ModelKind::Fusion, 1, 1e-3, 0);
    assert!(matches!(run_training(net.clone(), &[], &[], &cfg), Err(Error::TrainingData(_))));
    let mut b = tiny_bundle(0, 2, 2);
    b.ground_truth = None;
    assert!(matches!(run_training(net, &[tiny_bundle(1, 2, 2)], &[b], &cfg), Err(Error::TrainingData(_))));
}

#[test]
fn epoch_order_is_a_seeded_permutation() {
    let a = epoch_order(7, 3, 20);
    assert_eq!(a, epoch_order(7, 3, 20));
    assert_ne!(a, epoch_order(7, 4, 20));
    let mut sorted = a.clone();
    sorted.sort_unstable();
    assert_eq!(sorted, (0..20).collect::<Vec<_>>());
}

#[test]
fn ema_smoothing() {
    assert_eq!(ema(&[], 0.5), Vec::<f64>::new());
    assert_eq!(ema(&[4.0, 0.0, 2.0], 0.5), [4.0, 2.0, 2.0]);
}

#[test]
fn one_video_overfits_in_200_epochs() {
    let bundle = thumbforge::data_io::synth_bundle(5, 12, 6, true, FusionConfig::small().dims).unwrap();
    let net = FusionNet::new(FusionConfig::small().with_seed(5)).unwrap();
    let out = run_training(net, std::slice::from_ref(&bundle), &[], &TrainConfig::new(ModelKind::Fusion, 200, 1e-3, 5)).unwrap();
    assert_eq!(out.history.len(), 200);
    let last = out.history.last().unwrap().val_mse;
    assert!(last < 1e-3, "final loss {last}");
    assert_eq!(out.model.select(&bundle).unwrap().selected_row, bundle.ground_truth.unwrap());
}

fn read_dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in walk(dir) {
        let rel = entry.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
        out.insert(rel, std::fs::read(&entry).unwrap());
    }
    out
}

fn walk(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut files = Vec::new();
    for e in std::fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files.extend(walk(&p));
        } else {
            files.push(p);
        }
    }
    files
}

fn run(dir: &Path, epochs: usize, resume: bool) -> Vec<f64> {
    let train = [tiny_bundle(1, 4, 3), tiny_bundle(2, 6, 2), tiny_bundle(3, 3, 3)];
    let val = [tiny_bundle(4, 5, 2)];
    let cfg = TrainConfig { checkpoint_dir: Some(dir.to_path_buf()), resume, ..TrainConfig::new(ModelKind::Fusion, epochs, 3e-3, 11) };
    let out = run_training(FusionNet::new(tiny_fusion(11)).unwrap(), &train, &val, &cfg).unwrap();
    out.history.iter().map(|r| r.train_mse).collect()
}

#[test]
fn identical_runs_write_identical_checkpoints() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run(a.path(), 3, false);
    run(b.path(), 3, false);
    let files = read_dir_bytes(a.path());
    assert!(files.contains_key("loss_curve.csv"));
    assert!(files.keys().any(|k| k.starts_with("best")));
    assert!(files.keys().any(|k| k.contains("adam.m.")));
    assert_eq!(files, read_dir_bytes(b.path()));
}

#[test]
fn resume_reproduces_uninterrupted_run() {
    let straight = tempfile::tempdir().unwrap();
    let split = tempfile::tempdir().unwrap();
    let full = run(straight.path(), 5, false);
    run(split.path(), 2, false);
    let resumed = run(split.path(), 5, true);
    assert_eq!(resumed.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), full.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    let (a, b) = (read_dir_bytes(&straight.path().join("last")), read_dir_bytes(&split.path().join("last")));
    let differing: Vec<&String> = a.keys().filter(|k| a.get(*k) != b.get(*k)).collect();
    assert!(differing.is_empty(), "{differing:?}");
    assert_eq!(a.len(), b.len());
    assert_eq!(read_dir_bytes(straight.path()).get("loss_curve.csv"), read_dir_bytes(split.path()).get("loss_curve.csv"));
}

#[test]
fn resume_with_other_seed_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), 1, false);
    let cfg = TrainConfig { checkpoint_dir: Some(dir.path().to_path_buf()), resume: true, ..TrainConfig::new(ModelKind::Fusion, 2, 3e-3, 12) };
    let err = run_training(FusionNet::new(tiny_fusion(11)).unwrap(), &[tiny_bundle(1, 4, 3)], &[], &cfg).err().unwrap();
    assert!(matches!(err, Error::Checkpoint(_)));
}

#[test]
fn loss_curve_has_one_row_per_epoch() {
    let dir = tempfile::tempdir().unwrap();
    run(dir.path(), 4, false);
    let csv = std::fs::read_to_string(dir.path().join("loss_curve.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "epoch,train_mse,val_mse");
    assert_eq!(lines.len(), 5);
    assert!(lines[4].starts_with("4,"));
}

#[test]
fn best_checkpoint_reloads_to_same_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let train = [tiny_bundle(1, 4, 3)];
    let cfg = TrainConfig { checkpoint_dir: Some(dir.path().to_path_buf()), ..TrainConfig::new(ModelKind::Fusion, 3, 1e-3, 0) };
    let out = run_training_with(FusionNet::new(tiny_fusion(0)).unwrap(), &train, &[], &cfg, |_, _| Control::Continue).unwrap();
    let last: FusionNet = load_model(dir.path().join("last")).unwrap();
    assert_eq!(last.predict(&train[0]).unwrap(), out.model.predict(&train[0]).unwrap());
    let best: FusionNet = load_model(dir.path()).unwrap();
    assert_eq!(best.param_count(), out.model.param_count());
    let filter = load_model::<thumbforge::filter::FilterNet>(dir.path());
    assert!(matches!(filter, Err(Error::Checkpoint(_))));
}

#[test]
fn callback_can_stop_early() {
    let train = [tiny_bundle(1, 4, 3)];
    let cfg = TrainConfig::new(ModelKind::Fusion, 50, 1e-3, 0);
    let out = run_training_with(FusionNet::new(tiny_fusion(0)).unwrap(), &train, &[], &cfg, |_, r| {
        if r.epoch == 3 { Control::Stop } else { Control::Continue }
    })
    .unwrap();
    assert_eq!(out.history.len(), 3);
    assert_eq!(loss_curve_csv(&out.history).lines().count(), 4);
}
