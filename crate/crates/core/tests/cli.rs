use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use pccsnet::synthetic::{intersection, write_corpus, IntersectionConfig};

fn pccsnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pccsnet"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = pccsnet(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> String {
    p.to_str().unwrap().to_string()
}

fn small_corpus(root: &Path) {
    let data = intersection(&IntersectionConfig {
        train_scenes: 2,
        test_scenes: 1,
        pedestrians_per_scene: 15,
        ..IntersectionConfig::default()
    });
    write_corpus(&data.corpus, root).unwrap();
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = s(dir.path());
    assert_eq!(pccsnet(&["prepare", "--data", &empty]).status.code(), Some(2));

    let data = dir.path().join("data");
    small_corpus(&data);
    let data = s(&data);
    let out = pccsnet(&["train", "--data", &data, "--holdout", "synth_test", "--k-clusters", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pccsnet(&["train", "--data", &data, "--holdout", "nowhere"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nowhere"));
}

#[test]
fn prepare_counts_windows_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    small_corpus(dir.path());
    let data = s(dir.path());
    let first = ok(&["prepare", "--data", &data]);
    assert!(first.contains("synth_train\t30"), "{first}");
    assert!(first.contains("synth_test\t15"), "{first}");
    assert!(first.contains("total\t45"), "{first}");
    assert_eq!(ok(&["prepare", "--data", &data]), first);
}

#[test]
fn train_predict_eval_plot() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    small_corpus(&data);
    let data = s(&data);
    let common = |out: &Path| {
        vec![
            "--data".to_string(), data.clone(), "--holdout".into(), "synth_test".into(), "--out".into(), s(out),
            "--k-clusters".into(), "3".into(), "--topk".into(), "3".into(), "--seed".into(), "4".into(),
            "--epochs-stage1".into(), "1".into(), "--epochs-stage2".into(), "1".into(), "--epochs-stage3".into(), "1".into(),
        ]
    };
    let run = |name: &str| {
        let out = dir.path().join(name);
        let args: Vec<String> = std::iter::once("train".to_string()).chain(common(&out)).collect();
        let printed = ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
        (out, printed)
    };
    let (a, printed_a) = run("a");
    let (b, printed_b) = run("b");
    let model = a.join("model.pccs");
    assert_eq!(fs::read(&model).unwrap(), fs::read(b.join("model.pccs")).unwrap());
    assert_eq!(printed_a.split('\t').nth(1), printed_b.split('\t').nth(1));
    assert!(fs::read_to_string(a.join("training_log.csv")).unwrap().lines().count() > 1);

    // a scene with one usable track and one that is too short
    let mut scene = fs::read_to_string(dir.path().join("data/synth_test/scene_02.txt")).unwrap();
    for f in 0..5 {
        scene.push_str(&format!("{}\t999\t1.0\t{}.0\n", 100000 + 10 * f, f));
    }
    let input = dir.path().join("scene.txt");
    fs::write(&input, scene).unwrap();
    let preds = dir.path().join("pred.csv");
    let predict = |out: &Path| {
        ok(&["predict", "--checkpoint", &s(&model), "--input", &s(&input), "--topk", "3", "--out", &s(out)]);
        fs::read_to_string(out).unwrap()
    };
    let csv = predict(&preds);
    assert_eq!(csv, predict(&dir.path().join("again.csv")));
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 15 * 3);
    assert!(rows.iter().all(|r| r.len() == 4 + 24 && r[0] != "999"));
    for track in rows.chunks(3) {
        let p: Vec<f64> = track.iter().map(|r| r[3].parse().unwrap()).collect();
        assert!(p[0] >= p[1] && p[1] >= p[2], "{p:?}");
    }

    let args: Vec<String> = ["eval", "--checkpoint", &s(&model)].iter().map(|v| v.to_string()).chain(common(&a)).collect();
    let summary = ok(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert!(summary.contains("synth_test"), "{summary}");
    let metrics = fs::read_to_string(a.join("metrics_synth_test.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 1 + 15 + 2);

    let svg = dir.path().join("svg");
    ok(&["plot", "--predictions", &s(&preds), "--scene", &s(&input), "--out", &s(&svg)]);
    assert_eq!(fs::read_dir(&svg).unwrap().count(), 15);
}
