use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use plcrf::formats::{read_camera, read_manifest, read_poses_2d, read_poses_3d};
use plcrf::geometry::{error_2d, project_perspective};
use plcrf::heatmap::HeatMapVolume;

fn plcrf(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_plcrf"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = plcrf(dir, args);
    assert!(
        out.status.success(),
        "plcrf {args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn code(dir: &Path, args: &[&str]) -> i32 {
    plcrf(dir, args).status.code().expect("exit code")
}

/// Every file under `root`, keyed by relative path.
fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(
                    path.strip_prefix(root).unwrap().to_path_buf(),
                    std::fs::read(&path).unwrap(),
                );
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

const SMALL: &str = r#"
[train]
epochs = 5
hidden = [32, 32]
[inference]
candidates = 12
"#;

/// Training and test datasets plus a small trained model.
fn fixture(dir: &Path) {
    std::fs::write(dir.join("small.toml"), SMALL).unwrap();
    ok(
        dir,
        &[
            "synth", "--output", "train", "--frames", "120", "--seed", "1",
        ],
    );
    ok(
        dir,
        &[
            "synth",
            "--output",
            "test",
            "--frames",
            "6",
            "--seed",
            "2",
            "--distractor-probability",
            "0.3",
        ],
    );
    ok(
        dir,
        &[
            "train-lifter",
            "--config",
            "small.toml",
            "--poses-2d",
            "train/poses_2d.jsonl",
            "--poses-3d",
            "train/poses_3d.jsonl",
            "--output",
            "model.plnm",
        ],
    );
}

#[test]
fn synth_is_reproducible_and_self_consistent() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(
        d,
        &[
            "synth",
            "--output",
            "a",
            "--frames",
            "12",
            "--seed",
            "4",
            "--distractor-probability",
            "0.2",
        ],
    );
    ok(
        d,
        &[
            "synth",
            "--output",
            "b",
            "--frames",
            "12",
            "--seed",
            "4",
            "--distractor-probability",
            "0.2",
            "--workers",
            "3",
        ],
    );
    ok(
        d,
        &[
            "synth",
            "--output",
            "c",
            "--frames",
            "12",
            "--seed",
            "5",
            "--distractor-probability",
            "0.2",
        ],
    );
    assert_eq!(snapshot(&d.join("a")), snapshot(&d.join("b")));
    assert_ne!(snapshot(&d.join("a")), snapshot(&d.join("c")));

    let manifest = read_manifest(&d.join("a/manifest.txt")).unwrap();
    assert_eq!(manifest.len(), 12);
    let camera = read_camera(&d.join("a/camera.json")).unwrap();
    let p2 = read_poses_2d(&d.join("a/poses_2d.jsonl")).unwrap();
    let p3 = read_poses_3d(&d.join("a/poses_3d.jsonl")).unwrap();
    for ((entry, (f2, pose_2d)), (f3, pose_3d)) in manifest.iter().zip(&p2).zip(&p3) {
        assert_eq!((entry.frame, *f2), (*f3, *f3));
        let bbox = HeatMapVolume::load(&entry.path).unwrap().bbox;
        let reprojected = project_perspective(pose_3d, &camera).unwrap();
        let e = error_2d(
            &bbox.pose_to_crop(pose_2d),
            &bbox.pose_to_crop(&reprojected),
        )
        .unwrap();
        assert!(e < 1e-9, "frame {f2}: {e}");
    }
    let provenance: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("a/provenance.json")).unwrap()).unwrap();
    assert_eq!(provenance["seed"], 4);
    assert!(provenance["spec_sha256"]["skeleton"].is_string());
}

#[test]
fn synth_refuses_to_clobber() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--output", "a", "--frames", "2"]);
    assert_eq!(code(d, &["synth", "--output", "a", "--frames", "2"]), 1);
    ok(
        d,
        &["synth", "--output", "a", "--frames", "3", "--overwrite"],
    );
    assert_eq!(read_manifest(&d.join("a/manifest.txt")).unwrap().len(), 3);
}

#[test]
fn train_is_deterministic_and_atomic() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    let args = |out: &'static str| {
        vec![
            "train-lifter",
            "--config",
            "small.toml",
            "--poses-2d",
            "train/poses_2d.jsonl",
            "--poses-3d",
            "train/poses_3d.jsonl",
            "--output",
            out,
        ]
    };
    ok(d, &args("again.plnm"));
    assert_eq!(
        std::fs::read(d.join("model.plnm")).unwrap(),
        std::fs::read(d.join("again.plnm")).unwrap()
    );
    assert_eq!(
        std::fs::read(d.join("model.plnm.summary.json")).unwrap(),
        std::fs::read(d.join("again.plnm.summary.json")).unwrap()
    );
    let mut other = args("other.plnm");
    other.extend(["--seed", "9"]);
    ok(d, &other);
    assert_ne!(
        std::fs::read(d.join("model.plnm")).unwrap(),
        std::fs::read(d.join("other.plnm")).unwrap()
    );

    let missing = [
        "train-lifter",
        "--poses-2d",
        "nope.jsonl",
        "--poses-3d",
        "train/poses_3d.jsonl",
        "--output",
        "m.plnm",
    ];
    assert_ne!(code(d, &missing), 0);
    assert!(!d.join("m.plnm").exists() && !d.join("m.plnm.summary.json").exists());

    let diverge = [
        "train-lifter",
        "--poses-2d",
        "train/poses_2d.jsonl",
        "--poses-3d",
        "train/poses_3d.jsonl",
        "--output",
        "nan.plnm",
        "--learning-rate",
        "1e6",
        "--epochs",
        "3",
        "--hidden",
        "16",
    ];
    assert_eq!(code(d, &diverge), 3);
    assert!(!d.join("nan.plnm").exists());

    let full = std::fs::read_to_string(d.join("train/poses_3d.jsonl")).unwrap();
    let lines: Vec<&str> = full.lines().take(50).collect();
    std::fs::write(d.join("short.jsonl"), lines.join("\n")).unwrap();
    let mismatch = [
        "train-lifter",
        "--poses-2d",
        "train/poses_2d.jsonl",
        "--poses-3d",
        "short.jsonl",
        "--output",
        "mm.plnm",
    ];
    assert_eq!(code(d, &mismatch), 2);
    assert!(!d.join("mm.plnm").exists());
}

#[test]
fn train_memorizes_toy_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--output", "toy", "--frames", "1"]);
    ok(
        d,
        &[
            "train-lifter",
            "--poses-2d",
            "toy/poses_2d.jsonl",
            "--poses-3d",
            "toy/poses_3d.jsonl",
            "--output",
            "toy.plnm",
            "--noise-std",
            "0",
            "--epochs",
            "300",
            "--batch-size",
            "1",
            "--hidden",
            "32,32",
        ],
    );
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("toy.plnm.summary.json")).unwrap()).unwrap();
    let loss = summary["final_loss"].as_f64().unwrap();
    assert!(loss < 1e-3, "final loss {loss}");
}

#[test]
fn infer_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    let base = [
        "infer",
        "--config",
        "small.toml",
        "--manifest",
        "test/manifest.txt",
        "--model",
        "model.plnm",
    ];
    let run = |extra: &[&str]| {
        let mut args = base.to_vec();
        args.extend_from_slice(extra);
        ok(d, &args);
    };
    run(&["--output", "crf"]);
    run(&["--output", "crf2", "--workers", "2"]);
    assert_eq!(snapshot(&d.join("crf")), snapshot(&d.join("crf2")));

    run(&["--output", "zero", "--lambda", "0"]);
    run(&["--output", "greedy", "--greedy"]);
    for file in [
        "poses_2d.jsonl",
        "poses_3d.jsonl",
        "poses_3d_absolute.jsonl",
    ] {
        assert_eq!(
            std::fs::read(d.join("zero").join(file)).unwrap(),
            std::fs::read(d.join("greedy").join(file)).unwrap(),
            "{file}"
        );
    }
    let frames = std::fs::read_to_string(d.join("zero/frames.jsonl")).unwrap();
    assert_eq!(frames.lines().count(), 6);
    assert!(frames.lines().all(|l| l.contains("\"k_star\":0")));

    run(&[
        "--output",
        "persp",
        "--prior",
        "perspective",
        "--camera",
        "test/camera.json",
    ]);
    let mut args = base.to_vec();
    args.extend(["--output", "nocam", "--prior", "perspective"]);
    assert_eq!(code(d, &args), 1);
    assert!(!d.join("nocam").exists());

    // One unreadable volume: the batch finishes, the frame is marked, the exit is nonzero.
    let manifest = std::fs::read_to_string(d.join("test/manifest.txt")).unwrap();
    std::fs::write(d.join("test/broken.plhm"), b"PLHM junk").unwrap();
    std::fs::write(
        d.join("test/broken.txt"),
        format!("{manifest}6 broken.plhm\n"),
    )
    .unwrap();
    let broken = [
        "infer",
        "--config",
        "small.toml",
        "--manifest",
        "test/broken.txt",
        "--model",
        "model.plnm",
        "--output",
        "broken",
    ];
    assert_eq!(code(d, &broken), 2);
    let frames = std::fs::read_to_string(d.join("broken/frames.jsonl")).unwrap();
    assert_eq!(frames.lines().count(), 7);
    assert!(frames.lines().last().unwrap().contains("\"failed\""));
    assert_eq!(
        std::fs::read_to_string(d.join("broken/poses_2d.jsonl"))
            .unwrap()
            .lines()
            .count(),
        6
    );
}

#[test]
fn eval_contracts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("gt3.jsonl"),
        "{\"frame\":0,\"joints\":[[0,0,0],[100,0,0],[0,100,0]]}\n{\"frame\":1,\"joints\":[[0,0,0],[100,0,0],[0,100,0]]}\n",
    )
    .unwrap();
    std::fs::write(
        d.join("pred3.jsonl"),
        "{\"frame\":0,\"joints\":[[0,0,0],[100,0,30],[0,140,0]]}\n{\"frame\":1,\"joints\":[[5,5,5],[105,5,5],[5,105,5]]}\n",
    )
    .unwrap();
    std::fs::write(
        d.join("shifted3.jsonl"),
        "{\"frame\":0,\"joints\":[[-7,2,900],[93,2,930],[-7,142,900]]}\n{\"frame\":1,\"joints\":[[1,1,1],[101,1,1],[1,101,1]]}\n",
    )
    .unwrap();
    std::fs::write(
        d.join("gt2.jsonl"),
        "{\"frame\":0,\"joints\":[[0,0],[10,0],[0,10]]}\n{\"frame\":1,\"joints\":[[0,0],[10,0],[0,10]]}\n",
    )
    .unwrap();
    std::fs::write(
        d.join("pred2.jsonl"),
        "{\"frame\":0,\"joints\":[[3,4],[10,0],[0,10]]}\n{\"frame\":1,\"joints\":[[0,0],[10,0],[0,16]]}\n",
    )
    .unwrap();
    let report = |pred3: &str, pred2: &str, out: &str| -> serde_json::Value {
        ok(
            d,
            &[
                "eval",
                "--predictions-3d",
                pred3,
                "--ground-truth-3d",
                "gt3.jsonl",
                "--predictions-2d",
                pred2,
                "--ground-truth-2d",
                "gt2.jsonl",
                "--output",
                out,
            ],
        );
        serde_json::from_slice(&std::fs::read(d.join(out)).unwrap()).unwrap()
    };

    let exact = report("gt3.jsonl", "gt2.jsonl", "exact.json");
    assert_eq!(exact["mpjpe"], 0.0);
    assert!(exact["similarity"].as_f64().unwrap().abs() < 1e-9);
    assert_eq!(exact["error_2d"], 0.0);

    let hand = report("pred3.jsonl", "pred2.jsonl", "hand.json");
    assert!((hand["mpjpe"].as_f64().unwrap() - 35.0 / 3.0).abs() < 1e-12);
    assert!((hand["per_frame"][0]["mpjpe"].as_f64().unwrap() - 70.0 / 3.0).abs() < 1e-12);
    assert!(hand["per_frame"][1]["similarity"].as_f64().unwrap() < 1e-9);
    assert!((hand["error_2d"].as_f64().unwrap() - 11.0 / 6.0).abs() < 1e-12);
    assert_eq!(hand["error_2d_units"], "image");

    let shifted = report("shifted3.jsonl", "pred2.jsonl", "shifted.json");
    assert_eq!(shifted["per_frame"][1]["mpjpe"], 0.0);
    assert!((shifted["per_frame"][0]["mpjpe"].as_f64().unwrap() - 70.0 / 3.0).abs() < 1e-12);

    std::fs::write(
        d.join("one.jsonl"),
        "{\"frame\":0,\"joints\":[[0,0,0],[100,0,0],[0,100,0]]}\n",
    )
    .unwrap();
    assert_eq!(
        code(
            d,
            &[
                "eval",
                "--predictions-3d",
                "one.jsonl",
                "--ground-truth-3d",
                "gt3.jsonl"
            ]
        ),
        2
    );
    assert_eq!(code(d, &["eval", "--predictions-3d", "gt3.jsonl"]), 1);
}

#[test]
fn config_file_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fixture(d);
    std::fs::write(d.join("bad.toml"), "[inference]\nlamda = 0.5\n").unwrap();
    assert_eq!(
        code(d, &["synth", "--config", "bad.toml", "--output", "x"]),
        1
    );
    assert!(!d.join("x").exists());

    std::fs::write(
        d.join("run.toml"),
        "seed = 3\n[paths]\nmanifest = \"test/manifest.txt\"\nmodel = \"model.plnm\"\n[inference]\nlambda = 0.25\ncandidates = 4\n",
    )
    .unwrap();
    ok(
        d,
        &["infer", "--config", "run.toml", "--output", "from-config"],
    );
    ok(
        d,
        &[
            "infer",
            "--config",
            "run.toml",
            "--output",
            "flag-wins",
            "--lambda",
            "0.75",
        ],
    );
    let record = |p: &str| -> serde_json::Value {
        serde_json::from_slice(&std::fs::read(d.join(p).join("run.json")).unwrap()).unwrap()
    };
    assert_eq!(record("from-config")["inference"]["lambda"], 0.25);
    assert_eq!(record("flag-wins")["inference"]["lambda"], 0.75);
    assert_eq!(record("flag-wins")["seed"], 3);
    assert_eq!(code(d, &["infer", "--output", "nothing"]), 1);
}

#[test]
fn bench_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("tiny.toml"), "[train]\nepochs = 2\nhidden = [16]\n[inference]\ncandidates = 6\n[bench]\nbootstrap_resamples = 50\n").unwrap();
    let args = |out: &'static str| {
        [
            "bench",
            "--config",
            "tiny.toml",
            "--train-frames",
            "40",
            "--test-frames",
            "3",
            "--output",
            out,
        ]
    };
    ok(d, &args("a"));
    ok(d, &args("b"));
    assert_eq!(snapshot(&d.join("a")), snapshot(&d.join("b")));
    let report = std::fs::read_to_string(d.join("a/report.txt")).unwrap();
    assert!(report.contains("unary+orthographic vs unary"));
}
