#![allow(dead_code)]

pub mod gradcheck;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thumbforge::data_io::{synth_bundle, FeatureBundle, FeatureDims};
use thumbforge::fusion::FusionConfig;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A narrow fusion configuration for tests that only need the structure.
pub fn tiny_fusion(seed: u64) -> FusionConfig {
    FusionConfig {
        dims: FeatureDims { frame: 8, audio: 12, text: 6 },
        heads: 2,
        layers: 2,
        d_ff: 8,
        hidden: 10,
        max_frames: 1000,
        max_audio: 300,
        ..FusionConfig::small()
    }
    .with_seed(seed)
}

pub fn tiny_bundle(seed: u64, t_f: usize, t_a: usize) -> FeatureBundle {
    synth_bundle(seed, t_f, t_a, true, tiny_fusion(0).dims).unwrap()
}

/// Exhaustive scan: the lowest MSE, ties to the smaller frame id.
pub fn oracle_select(o: &[f64], rows: &[Vec<f64>], ids: &[usize]) -> (usize, f64) {
    let mut best: Option<(usize, f64)> = None;
    for (row, &id) in rows.iter().zip(ids) {
        let mut sum = 0.0;
        for j in 0..o.len() {
            sum += (row[j] - o[j]) * (row[j] - o[j]);
        }
        let mse = sum / o.len() as f64;
        best = match best {
            Some((bid, bmse)) if bmse < mse || (bmse == mse && bid < id) => Some((bid, bmse)),
            _ => Some((id, mse)),
        };
    }
    best.expect("at least one row")
}

/// A random selection fixture; with `ties`, some rows are exact copies and
/// `o` sits on one of the duplicated rows half of the time.
pub fn selection_fixture(seed: u64, ties: bool) -> (Vec<f64>, Vec<Vec<f64>>, Vec<usize>) {
    use rand::seq::SliceRandom;
    use rand::Rng;
    let mut r = rng(seed);
    let d = r.gen_range(1..16);
    let n = r.gen_range(1..40);
    let mut rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.gen_range(-1.0..1.0)).collect()).collect();
    let mut o: Vec<f64> = (0..d).map(|_| r.gen_range(-1.0..1.0)).collect();
    if ties && n > 1 {
        let src = r.gen_range(0..n);
        for _ in 0..r.gen_range(1..4) {
            let dst = r.gen_range(0..n);
            rows[dst] = rows[src].clone();
        }
        if r.gen_bool(0.5) {
            o = rows[src].clone();
        }
    }
    let mut ids: Vec<usize> = (0..n).map(|i| i * 3 + r.gen_range(0..3)).collect();
    ids.shuffle(&mut r);
    (o, rows, ids)
}

/// Trains a fresh filter on 10 synthetic pairs, stopping once the
/// training-set MSE drops below `target`; returns (epochs run, final MSE).
pub fn filter_overfit(seed: u64, max_epochs: usize, target: f64) -> thumbforge::Result<(usize, f64)> {
    use thumbforge::filter::{aesthetic_samples, synthetic::synthetic_aesthetic, FilterConfig, FilterNet};
    use thumbforge::training::{evaluate, run_training_with, Control, ModelKind, TrainConfig};
    let config = FilterConfig { seed, crop_seed: seed, ..FilterConfig::default() };
    let samples = aesthetic_samples(&synthetic_aesthetic(seed, 10, config.view_size), &config)?;
    let mut net = FilterNet::new(config)?;
    net.set_head_bias(samples.iter().map(|s| s.label).sum::<f64>() / samples.len() as f64);
    let train = TrainConfig::new(ModelKind::Filter, max_epochs, 1e-3, seed);
    let outcome = run_training_with(net, &samples, &[], &train, |_, r| {
        if r.val_mse < target { Control::Stop } else { Control::Continue }
    })?;
    Ok((outcome.history.len(), evaluate(&outcome.model, &samples)?))
}

/// Reference precisions at θ = 500, 750, 1000: (model, comparator, expected % difference).
pub const REFERENCE_RUNS: [([f64; 3], [f64; 3], [f64; 3]); 2] = [
    ([0.197, 0.408, 0.648], [0.113, 0.267, 0.601], [74.3, 52.8, 7.8]),
    ([0.116, 0.387, 0.689], [0.189, 0.401, 0.621], [-38.6, -3.49, 11.0]),
];

/// Whether `value` rounds to `printed` at the number of decimals `printed` was written with.
pub fn rounds_to(value: f64, printed: f64) -> bool {
    let text = format!("{printed}");
    let decimals = text.split('.').nth(1).map_or(0, str::len) as i32;
    (value - printed).abs() <= 0.5 * 10f64.powi(-decimals) + 1e-12
}

/// A report from precision values over `total` videos, θ = 500, 750, 1000.
pub fn report_from_precisions(precisions: [f64; 3]) -> thumbforge::eval::EvalReport {
    use thumbforge::eval::{EvalReport, EvalRow, Space};
    EvalReport {
        space: Space::Pixel,
        resolution: Some(224),
        value_range: "8-bit RGB, 0-255".into(),
        rows: [500.0, 750.0, 1000.0]
            .iter()
            .zip(precisions)
            .map(|(&theta, precision)| EvalRow {
                theta,
                precision,
                true_positives: 0,
                total: 0,
                comparator: None,
                percent_difference: None,
            })
            .collect(),
    }
}

/// Brute force: for every θ, count distances at most θ.
pub fn count_oracle(distances: &[f64], thetas: &[f64]) -> Vec<(f64, usize)> {
    let mut sorted: Vec<f64> = thetas.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.dedup();
    sorted
        .into_iter()
        .map(|t| {
            let mut n = 0;
            for &d in distances {
                if d <= t {
                    n += 1;
                }
            }
            (t, n)
        })
        .collect()
}

pub struct Run {
    pub code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Runs the built binary with `args` inside `cwd`.
pub fn thumbforge(cwd: &std::path::Path, args: &[&str]) -> Run {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_thumbforge"))
        .args(args)
        .current_dir(cwd)
        .env_remove("THUMBFORGE_SEED")
        .output()
        .expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

pub fn ok(cwd: &std::path::Path, args: &[&str]) -> Run {
    let run = thumbforge(cwd, args);
    assert_eq!(run.code, 0, "{args:?} failed: {}", run.stderr);
    run
}

/// Writes `n` frame images `frame00000.ppm…` into `dir`.
pub fn write_frames(dir: &std::path::Path, n: usize, size: usize) {
    use thumbforge::filter::synthetic::synthetic_aesthetic_image;
    std::fs::create_dir_all(dir).unwrap();
    let mut r = rng(77);
    for i in 0..n {
        let img = synthetic_aesthetic_image(size, (i % 10) as f64 / 9.0, &mut r);
        thumbforge::data_io::write_ppm(dir.join(format!("frame{i:05}.ppm")), &img).unwrap();
    }
}

/// Synth data, filter training, score-frames, fusion training, select and
/// eval. Returns the score CSV, ranking JSON, eval JSON and select stdout.
pub fn pipeline(root: &std::path::Path, seed: &str) -> Vec<Vec<u8>> {
    let s = ["--seed", seed];
    ok(root, &[&s[..], &["synth", "--out", "data", "--train", "3", "--test", "2", "--frames", "18", "--images", "--aesthetic", "30"]].concat());
    ok(root, &[&s[..], &["train-filter", "--labels", "data/aesthetic/labels.csv", "--images", "data/aesthetic/images", "--out", "filter", "--epochs", "2"]].concat());
    ok(root, &[&s[..], &["score-frames", "--frames", "data/manifests/video0003/frames", "--filter-checkpoint", "filter", "--stride", "2", "--top-k", "6", "--output", "scores.csv"]].concat());
    ok(root, &[&s[..], &["train-fusion", "--dataset", "data/split.json", "--out", "fusion", "--epochs", "4", "--lr", "1e-3", "--preset", "small"]].concat());
    let select = ok(root, &[&s[..], &["select", "--manifest", "data/manifests/video0003.json", "--checkpoint", "fusion", "--top-k", "6", "--scores", "scores.csv", "--emit-ranking", "ranking.json"]].concat());
    ok(root, &[&s[..], &["eval", "--dataset", "data/split.json", "--checkpoint", "fusion", "--space", "feature", "--theta", "0.5,0.25,1", "--output", "eval.json"]].concat());
    ["scores.csv", "ranking.json", "eval.json"]
        .iter()
        .map(|f| std::fs::read(root.join(f)).unwrap())
        .chain([select.stdout.into_bytes()])
        .collect()
}
