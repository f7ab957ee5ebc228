use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use imbalseg::inference::ensemble_mean;
use imbalseg::io::{read_image, read_prob_map};
use imbalseg::model::{predict, read_checkpoint};

const TINY: &str = "\
seed = 3
dataset.manifest = data/manifest.jsonl
dataset.classes = bg,a,b
dataset.synth.num_images = 6
dataset.synth.height = 24
dataset.synth.width = 24
dataset.synth.shares = 0.8,0.1,0.1
dataset.eval_images = 3
rcs.enabled = true
rcs.min_pixels = 5
augment.crop_size = 16
augment.scale_min = 0.8
augment.scale_max = 1.2
acw.enabled = true
train.max_iter = 40
train.batch_size = 2
train.lr0 = 0.5
tta.transforms = identity,hflip
";

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_imbalseg"));
    c.env_remove("IMBALSEG_THREADS");
    c
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.conf"), TINY).unwrap();
    ok(dir.path(), &["synth", "--config", "tiny.conf", "--out", "data"]);
    dir
}

fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(d, &["--help"]).status.code(), Some(0));
    assert_eq!(run(d, &["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(d, &["stats", "--manifest", "missing.jsonl"]).status.code(), Some(2));
    std::fs::write(d.join("bad.conf"), "rcs.temperature = -1\n").unwrap();
    assert_eq!(run(d, &["stats", "--config", "bad.conf"]).status.code(), Some(1));
    assert_eq!(run(d, &["--threads", "0", "stats"]).status.code(), Some(1));
    std::fs::write(d.join("spec.txt"), "shares = 0.5,0.1,0.1,0.1,0.1,0.1,0.1,0.1,0.1\n").unwrap();
    let out = run(d, &["synth", "--spec", "spec.txt", "--out", "x"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("shares"));
    assert!(!d.join("x").exists());
    // No manifest configured.
    assert_eq!(run(d, &["train", "--out", "run"]).status.code(), Some(1));
}

#[test]
fn thread_env_fallback_is_accepted() {
    let dir = setup();
    let out = bin()
        .current_dir(dir.path())
        .env("IMBALSEG_THREADS", "1")
        .args(["stats", "--config", "tiny.conf"])
        .output()
        .unwrap();
    assert!(out.status.success());
    let bad = bin()
        .current_dir(dir.path())
        .env("IMBALSEG_THREADS", "zero")
        .args(["stats", "--config", "tiny.conf"])
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn synth_is_deterministic_and_stats_agree() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["synth", "--config", "tiny.conf", "--out", "again"]);
    assert_eq!(tree_bytes(&d.join("data")), tree_bytes(&d.join("again")));
    ok(d, &["synth", "--config", "tiny.conf", "--seed", "4", "--out", "other"]);
    assert_ne!(tree_bytes(&d.join("data")), tree_bytes(&d.join("other")));

    let cached = ok(d, &["stats", "--config", "tiny.conf"]);
    let recount = ok(d, &["stats", "--config", "tiny.conf", "--recount"]);
    assert_eq!(cached, recount);
    let sum: f64 = cached.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap()).sum();
    assert!((sum - 1.0).abs() < 1e-5);
    ok(d, &["stats", "--config", "tiny.conf", "--out", "s.csv"]);
    assert_eq!(std::fs::read_to_string(d.join("s.csv")).unwrap(), cached);
}

#[test]
fn train_predict_eval() {
    let dir = setup();
    let d = dir.path();
    ok(d, &["train", "--config", "tiny.conf", "--out", "run1"]);
    ok(d, &["train", "--config", "tiny.conf", "--seed", "11", "--out", "run2"]);
    assert!(d.join("run1/train_log.csv").exists());

    // Neutral single-checkpoint prediction is the plain model output.
    ok(
        d,
        &[
            "predict", "--config", "tiny.conf", "--checkpoint", "run1/model.segw", "--images", "data", "--out", "plain",
            "--tta", "none", "--post-multipliers", "none",
        ],
    );
    let params = read_checkpoint(d.join("run1/model.segw")).unwrap();
    let image = read_image(d.join("data/rgb/s00000.png"), d.join("data/nir/s00000.png")).unwrap();
    let direct = predict(&params, &image);
    let written = read_prob_map(d.join("plain/s00000.segp")).unwrap();
    for (a, b) in direct.data().iter().zip(written.data()) {
        assert!((a - b).abs() < 1e-6);
    }

    // Two checkpoints give the mean of the single-checkpoint runs.
    for (name, ckpts) in [
        ("p1", vec!["run1/model.segw"]),
        ("p2", vec!["run2/model.segw"]),
        ("p12", vec!["run1/model.segw", "run2/model.segw"]),
    ] {
        let mut args = vec!["predict", "--config", "tiny.conf", "--out", name, "--checkpoint"];
        args.extend(ckpts);
        ok(d, &args);
    }
    for i in 0..6 {
        let f = format!("s{i:05}.segp");
        let a = read_prob_map(d.join("p1").join(&f)).unwrap();
        let b = read_prob_map(d.join("p2").join(&f)).unwrap();
        let both = read_prob_map(d.join("p12").join(&f)).unwrap();
        let mean = ensemble_mean(&[a, b]).unwrap();
        for (x, y) in mean.data().iter().zip(both.data()) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    let report = ok(d, &["eval", "--config", "tiny.conf", "--pred", "p12", "--gt", "data/labels", "--out", "r.csv"]);
    assert!(report.starts_with("architecture,backbone,bg,a,b,mIoU\n"));
    assert_eq!(std::fs::read_to_string(d.join("r.csv")).unwrap(), report);
    let selfcheck = ok(d, &["eval", "--config", "tiny.conf", "--pred", "p12", "--gt", "p12"]);
    assert!(selfcheck.lines().nth(1).unwrap().ends_with(",1.000"));
    assert_eq!(run(d, &["eval", "--config", "tiny.conf", "--pred", "p12", "--gt", "nowhere"]).status.code(), Some(2));
    assert_eq!(
        run(d, &["predict", "--config", "tiny.conf", "--checkpoint", "run1/model.segw", "--out", "q", "--tta", "hflip"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn ablate_emits_four_rows_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("tiny.conf"), TINY).unwrap();
    let out = ok(dir.path(), &["ablate", "--config", "tiny.conf", "--seeds", "1,2", "--out", "t.csv"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "seed,method,mIoU,fg_mIoU,rare_recall");
    assert_eq!(lines.len(), 9);
    let methods: Vec<&str> = lines[1..5].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(
        methods,
        [
            "baseline",
            "baseline+ACWLoss",
            "baseline+ACWLoss+RCS_Mosaic",
            "baseline+ACWLoss+RCS_Mosaic+Post"
        ]
    );
    assert!(lines[5].starts_with("2,"));
    assert_eq!(std::fs::read_to_string(dir.path().join("t.csv")).unwrap(), out);
}
