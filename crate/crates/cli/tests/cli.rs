use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn irbm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_irbm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn train(dir: &Path, extra: &[&str]) -> Output {
    let out = dir.to_str().unwrap();
    let mut args = vec![
        "train", "--out-dir", out, "--synth-side", "3", "--synth-train", "60", "--synth-test",
        "30", "--minibatch-size", "20", "--seed", "4",
    ];
    args.extend_from_slice(extra);
    irbm(&args)
}

fn ok(o: &Output) {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn two_epochs_write_two_metric_rows() {
    let dir = tempfile::tempdir().unwrap();
    ok(&train(dir.path(), &["--epochs", "2"]));
    let csv = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# irbm-metrics v1");
    assert_eq!(lines[1], "epoch,avg_loglik,error,N_h,l_t,M_t,max_log_mass");
    assert_eq!(lines.len(), 4);
    // Evaluation runs on the final epoch even off the default cadence.
    assert!(lines[3].starts_with("2,-"));
    assert!(dir.path().join("checkpoint.irbm").exists());
    assert!(dir.path().join("config.txt").exists());
}

#[test]
fn resume_continues_the_same_trajectory() {
    let straight = tempfile::tempdir().unwrap();
    ok(&train(straight.path(), &["--epochs", "4", "--regroup-mode", "adaptive"]));

    let split = tempfile::tempdir().unwrap();
    ok(&train(split.path(), &["--epochs", "2", "--regroup-mode", "adaptive"]));
    let ckpt = split.path().join("checkpoint.irbm");
    let ckpt = ckpt.to_str().unwrap();
    ok(&train(
        split.path(),
        &["--resume", ckpt, "--epochs", "4", "--regroup-mode", "adaptive"],
    ));

    let a = std::fs::read(straight.path().join("checkpoint.irbm")).unwrap();
    let b = std::fs::read(split.path().join("checkpoint.irbm")).unwrap();
    assert_eq!(a, b);
    let rows = std::fs::read_to_string(split.path().join("metrics.csv")).unwrap();
    assert_eq!(rows.lines().count(), 6);
}

#[test]
fn resume_rejects_conflicting_training_keys() {
    let dir = tempfile::tempdir().unwrap();
    ok(&train(dir.path(), &["--epochs", "1"]));
    let ckpt = dir.path().join("checkpoint.irbm");
    let o = train(
        dir.path(),
        &["--resume", ckpt.to_str().unwrap(), "--epochs", "2", "--global-lr", "0.9"],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_keys_exit_with_validation_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = train(dir.path(), &["--epochs", "1", "--no-such-key", "3"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_key"));
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "epochs = 1\nlearning_rate = 0.1\n").unwrap();
    let o = irbm(&["train", "--config", cfg.to_str().unwrap(), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    std::fs::write(&cfg, "epochs = 5\nsynth_side = 3\nsynth_train = 40\nminibatch_size = 20\n").unwrap();
    let out = dir.path().join("run");
    ok(&irbm(&[
        "train", "--config", cfg.to_str().unwrap(), "--out-dir", out.to_str().unwrap(), "--epochs", "1",
    ]));
    let resolved = std::fs::read_to_string(out.join("config.txt")).unwrap();
    assert!(resolved.contains("epochs = 1\n"));
    assert!(resolved.contains("synth_train = 40\n"));
}

#[test]
fn eval_reports_exact_path_and_order_averaging() {
    let dir = tempfile::tempdir().unwrap();
    ok(&train(dir.path(), &["--epochs", "2", "--regroup-mode", "fixed_fraction"]));
    let ckpt = dir.path().join("checkpoint.irbm");
    let common = ["eval", "--checkpoint", ckpt.to_str().unwrap(), "--synth-side", "3", "--seed", "4"];
    let mut one = common.to_vec();
    one.extend(["--perms", "1"]);
    let r1 = irbm(&one);
    ok(&r1);
    let mut five = common.to_vec();
    five.extend(["--perms", "5", "--converted-rbm"]);
    let r5 = irbm(&five);
    ok(&r5);
    let (j1, j5) = (json(&r1), json(&r5));
    assert_eq!(j5["schema"], "irbm-eval/1");
    assert_eq!(j5["loglik_method"], "exact");
    assert_eq!(j1["report"]["orders"], 1);
    assert_eq!(j5["report"]["orders"], 5);
    assert!(j1["permutation_gain"].as_f64().unwrap().abs() < 1e-12);
    assert!(j5["permutation_gain"].is_f64());
    assert!(j5["report"]["converted_rbm_loglik"].is_f64());
    let hist = j5["report"]["z_m_histogram"].as_object().unwrap();
    let total: u64 = hist.values().map(|v| v.as_u64().unwrap()).sum();
    assert_eq!(total, j5["report"]["examples"].as_u64().unwrap());
}

#[test]
fn labeled_eval_reports_error() {
    let dir = tempfile::tempdir().unwrap();
    ok(&train(dir.path(), &["--epochs", "2", "--objective", "hybrid"]));
    let ckpt = dir.path().join("checkpoint.irbm");
    let r = irbm(&["eval", "--checkpoint", ckpt.to_str().unwrap(), "--synth-side", "3", "--seed", "4"]);
    ok(&r);
    let e = json(&r)["report"]["classification_error"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&e));
}

#[test]
fn sampling_is_deterministic_and_optional() {
    let dir = tempfile::tempdir().unwrap();
    ok(&train(dir.path(), &["--epochs", "1"]));
    let ckpt = dir.path().join("checkpoint.irbm");
    let ckpt = ckpt.to_str().unwrap();
    let none = dir.path().join("none");
    ok(&irbm(&["sample", "--checkpoint", ckpt, "--n-samples", "0", "--out-dir", none.to_str().unwrap()]));
    assert!(!none.exists());

    let mut images = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        ok(&irbm(&[
            "sample", "--checkpoint", ckpt, "--n-samples", "4", "--n-steps", "50", "--seed", "9",
            "--out-dir", out.to_str().unwrap(),
        ]));
        images.push(std::fs::read(out.join("samples.pgm")).unwrap());
        assert!(std::fs::read(out.join("filters.pgm")).unwrap().starts_with(b"P5\n"));
    }
    assert_eq!(images[0], images[1]);
}

#[test]
fn check_passes_on_fresh_model_and_fails_on_corruption() {
    let dir = tempfile::tempdir().unwrap();
    ok(&train(dir.path(), &["--epochs", "0"]));
    let ckpt = dir.path().join("checkpoint.irbm");
    let r = irbm(&["check", "--checkpoint", ckpt.to_str().unwrap()]);
    ok(&r);
    let j = json(&r);
    assert_eq!(j["passed"], true);
    assert_eq!(j["checks"].as_array().unwrap().len(), 5);

    let mut bytes = std::fs::read(&ckpt).unwrap();
    let k = bytes.len() / 3;
    bytes[k] ^= 1;
    let bad = dir.path().join("bad.irbm");
    std::fs::write(&bad, bytes).unwrap();
    let r = irbm(&["check", "--checkpoint", bad.to_str().unwrap()]);
    assert_eq!(r.status.code(), Some(3));
}

#[test]
fn check_reports_log_mass_of_permuted_model() {
    let dir = tempfile::tempdir().unwrap();
    ok(&train(dir.path(), &["--epochs", "2", "--regroup-mode", "fixed_fraction"]));
    let ckpt = dir.path().join("checkpoint.irbm");
    let r = irbm(&["check", "--checkpoint", ckpt.to_str().unwrap(), "--synth-side", "3"]);
    let j = json(&r);
    assert!(j["invariance"]["m"].as_u64().unwrap() > 0);
    assert!(j["invariance"]["max_log_mass"].as_f64().unwrap() <= 0.0);
}

#[test]
fn converted_dataset_trains() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("bs.ibmp");
    ok(&irbm(&[
        "convert-dataset", "--out", file.to_str().unwrap(), "--synth-side", "3", "--synth-train", "30",
    ]));
    let bytes = std::fs::read(&file).unwrap();
    assert!(bytes.starts_with(b"IBMP"));
    let run = dir.path().join("run");
    ok(&irbm(&[
        "train", "--out-dir", run.to_str().unwrap(), "--data-format", "ibmp", "--data-path",
        file.to_str().unwrap(), "--epochs", "1", "--minibatch-size", "10",
    ]));
}

#[test]
fn cli_training_matches_library_trajectory() {
    use irbm::data::synth_bars_and_stripes;
    use irbm::training::{TrainConfig, TrainState};
    use sha2::{Digest, Sha256};

    let dir = tempfile::tempdir().unwrap();
    ok(&train(dir.path(), &["--epochs", "3", "--regroup-mode", "off"]));
    let bytes = std::fs::read(dir.path().join("checkpoint.irbm")).unwrap();

    let data = synth_bars_and_stripes(3, 60, 4).unwrap();
    let mut cfg = TrainConfig::default();
    cfg.minibatch_size = 20;
    cfg.seed = 4;
    let mut s = TrainState::new(cfg, data.visible(), data.classes(), data.len()).unwrap();
    for _ in 0..3 {
        s.train_epoch(&data).unwrap();
    }
    let flat: Vec<u8> = s.params().to_flat().iter().flat_map(|x| x.to_le_bytes()).collect();
    let want = Sha256::digest(&flat);
    // Parameters follow the config text and the three dimensions.
    let config_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let start = 16 + config_len + 24 + 8;
    let got = Sha256::digest(&bytes[start..start + flat.len()]);
    assert_eq!(got, want);
}
