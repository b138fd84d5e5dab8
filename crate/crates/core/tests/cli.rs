use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use vsumm::dataio::{load_dataset_dir, load_video, write_video_to_dir, SplitSpec};
use vsumm::evaluation::Report;
use vsumm::numerics::load_checkpoint;
use vsumm::policy_net::{forward, PolicyParams};
use vsumm::summarizer::{upsample_scores, SummaryExport};
use vsumm::synthgen::make_corpus;

fn vsumm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vsumm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, videos: usize, seed: u64) -> PathBuf {
    let out = vsumm(&[
        "synth",
        "--out",
        s(dir),
        "--videos",
        &videos.to_string(),
        "--frames-per-cluster",
        "8",
        "--dim",
        "6",
        "--seed",
        &seed.to_string(),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    dir.to_path_buf()
}

const FAST: &[&str] = &["--hidden", "12", "--epochs", "3", "--lr", "1e-2"];

fn train(data: &[&Path], out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["train"];
    for d in data {
        args.extend(["--data", s(d)]);
    }
    args.extend(["--out", s(out)]);
    args.extend_from_slice(FAST);
    args.extend_from_slice(extra);
    vsumm(&args)
}

fn listing(dir: &Path) -> Vec<PathBuf> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    files.sort();
    files
}

#[test]
fn train_then_eval_writes_consistent_reports() {
    let root = tempfile::tempdir().unwrap();
    let data = synth(&root.path().join("data"), 10, 1);
    let before = listing(&data);
    let run = root.path().join("run");
    let out = train(&[&data], &run, &[]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        listing(&data),
        before,
        "training must not write next to the data"
    );

    let split = SplitSpec::load(&run.join("split.json"), "canonical").unwrap();
    assert_eq!(split.folds.len(), 5);
    for i in 0..5 {
        let log = std::fs::read_to_string(run.join(format!("fold_{i}/rewards.csv"))).unwrap();
        let mut lines = log.lines();
        assert_eq!(
            lines.next(),
            Some("epoch,mean_reward,r_div,r_rep,pct_loss,wt_loss")
        );
        assert_eq!(lines.count(), 3);
        let set = load_checkpoint(&run.join(format!("fold_{i}/checkpoint.fvsp"))).unwrap();
        let policy = PolicyParams::from_set(set).unwrap();
        assert_eq!((policy.input_dim(), policy.hidden()), (6, 12));
    }

    let out = vsumm(&[
        "eval",
        "--data",
        s(&data),
        "--out",
        s(&run),
        "--hidden",
        "12",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: Report =
        serde_json::from_str(&std::fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.setting, "canonical");

    // hand-average the CSV: per-fold means, then their mean
    let csv = std::fs::read_to_string(run.join("report.csv")).unwrap();
    let mut per_fold = vec![Vec::new(); 5];
    for line in csv.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        per_fold[cols[0].parse::<usize>().unwrap()].push(cols[4].parse::<f64>().unwrap());
    }
    let fold_means: Vec<f64> = per_fold
        .iter()
        .map(|f| f.iter().sum::<f64>() / f.len() as f64)
        .collect();
    let hand = fold_means.iter().sum::<f64>() / 5.0;
    assert!(
        (report.mean_f_score - hand).abs() < 1e-5,
        "{} vs {hand}",
        report.mean_f_score
    );
    for (fold, mean) in report.folds.iter().zip(&fold_means) {
        assert!((fold.mean_f_score - mean).abs() < 1e-5);
        assert_eq!(fold.videos.len(), 2);
    }
}

#[test]
fn summaries_match_a_direct_forward_pass() {
    let root = tempfile::tempdir().unwrap();
    let data = synth(&root.path().join("data"), 5, 7);
    let run = root.path().join("run");
    assert!(train(&[&data], &run, &[]).status.success());
    let ckpt = run.join("fold_2/checkpoint.fvsp");
    let out = vsumm(&[
        "summarize",
        "--data",
        s(&data),
        "--out",
        s(&run),
        "--checkpoint",
        s(&ckpt),
        "--budget",
        "0.2",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let policy = PolicyParams::from_set(load_checkpoint(&ckpt).unwrap()).unwrap();
    for record in load_dataset_dir(&data).unwrap() {
        let path = run
            .join("summaries")
            .join(format!("{}.json", record.video_id));
        let export: SummaryExport =
            serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
        let trace = forward(&policy, record.features.view()).unwrap();
        assert_eq!(export.step_scores, trace.probs);
        assert_eq!(
            export.frame_scores,
            upsample_scores(&trace.probs, &record.picks, record.n_frames_original)
        );
        let mask = export.mask();
        assert_eq!(mask.len(), record.n_frames_original);
        let budget = (0.2 * record.n_frames_original as f64).floor() as usize;
        let selected = mask.iter().filter(|&&m| m == 1).count();
        assert!(
            selected <= budget && selected > 0,
            "{selected} frames vs budget {budget}"
        );
        let covered: usize = export.shots.iter().map(|[a, b]| b - a + 1).sum();
        assert_eq!(covered, selected);
    }
}

#[test]
fn settings_derive_the_documented_splits() {
    let root = tempfile::tempdir().unwrap();
    let a = synth(&root.path().join("a"), 6, 10);
    let b = synth(&root.path().join("b"), 3, 50);
    let ids = |d: &Path| -> Vec<String> {
        load_dataset_dir(d)
            .unwrap()
            .into_iter()
            .map(|r| r.video_id)
            .collect()
    };

    let out = root.path().join("aug");
    assert!(vsumm(&[
        "split",
        "--data",
        s(&a),
        "--data",
        s(&b),
        "--setting",
        "augmented",
        "--out",
        s(&out)
    ])
    .status
    .success());
    let split = SplitSpec::load(&out.join("split.json"), "augmented").unwrap();
    assert_eq!(split.folds.len(), 5);
    let mut tested: Vec<String> = split.folds.iter().flat_map(|f| f.test.clone()).collect();
    tested.sort();
    assert_eq!(tested, ids(&a));
    assert!(split
        .folds
        .iter()
        .all(|f| ids(&b).iter().all(|id| f.train.contains(id))));

    let out = root.path().join("transfer");
    assert!(vsumm(&[
        "split",
        "--data",
        s(&a),
        "--data",
        s(&b),
        "--setting",
        "transfer",
        "--out",
        s(&out)
    ])
    .status
    .success());
    let split = SplitSpec::load(&out.join("split.json"), "transfer").unwrap();
    assert_eq!(split.folds.len(), 1);
    assert_eq!(split.folds[0].test, ids(&a));
    assert_eq!(split.folds[0].train, ids(&b));

    // an explicit split file wins over the setting
    let run = root.path().join("run");
    let out = train(&[&a, &b], &run, &["--split", s(&out.join("split.json"))]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(run.join("fold_0/checkpoint.fvsp").is_file());
    assert!(!run.join("fold_1").exists());
}

#[test]
fn config_file_values_reach_training() {
    let root = tempfile::tempdir().unwrap();
    let data = synth(&root.path().join("data"), 5, 3);
    let cfg = root.path().join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "data = [{:?}]\nhidden = 7\nepochs = 2\nlr = 0.01\n",
            s(&data)
        ),
    )
    .unwrap();
    let run = root.path().join("run");
    let out = vsumm(&[
        "train",
        "--config",
        s(&cfg),
        "--out",
        s(&run),
        "--epochs",
        "1",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let log = std::fs::read_to_string(run.join("fold_0/rewards.csv")).unwrap();
    assert_eq!(log.lines().count(), 2, "flag --epochs 1 overrides the file");
    let policy =
        PolicyParams::from_set(load_checkpoint(&run.join("fold_0/checkpoint.fvsp")).unwrap())
            .unwrap();
    assert_eq!(policy.hidden(), 7, "file value overrides the default");
}

#[test]
fn exit_codes_separate_config_and_data_errors() {
    let root = tempfile::tempdir().unwrap();
    let data = synth(&root.path().join("data"), 5, 2);
    let out = root.path().join("out");
    let code = |o: Output| o.status.code().unwrap();

    assert_eq!(
        code(vsumm(&[
            "train",
            "--data",
            s(&root.path().join("missing")),
            "--out",
            s(&out)
        ])),
        2
    );
    assert_eq!(
        code(vsumm(&[
            "train",
            "--data",
            s(&data),
            "--out",
            s(&out),
            "--epsilon",
            "2"
        ])),
        2
    );
    assert_eq!(
        code(vsumm(&[
            "train",
            "--data",
            s(&data),
            "--out",
            s(&out),
            "--mode",
            "weird"
        ])),
        2
    );
    assert_eq!(code(vsumm(&["train", "--data", s(&data)])), 2);
    assert_eq!(
        code(vsumm(&["summarize", "--data", s(&data), "--out", s(&out)])),
        2
    );
    assert_eq!(
        code(vsumm(&["eval", "--data", s(&data), "--out", s(&out)])),
        2,
        "no checkpoints yet"
    );

    // a video without annotations cannot be evaluated
    let bare = root.path().join("bare");
    let mut records = make_corpus(5, 3, 8, 6, 0.05, 2);
    for r in &mut records {
        r.user_summaries = None;
        write_video_to_dir(r, &bare).unwrap();
    }
    let run = root.path().join("run");
    assert!(train(&[&bare], &run, &[]).status.success());
    assert_eq!(
        code(vsumm(&[
            "eval",
            "--data",
            s(&bare),
            "--out",
            s(&run),
            "--checkpoint",
            s(&run)
        ])),
        3
    );

    // corrupt payload and broken sidecar
    let fvs = data.join("synth_2.fvs");
    let bytes = std::fs::read(&fvs).unwrap();
    std::fs::write(&fvs, &bytes[..bytes.len() - 4]).unwrap();
    assert!(load_video(&fvs).is_err());
    assert_eq!(
        code(vsumm(&["split", "--data", s(&data), "--out", s(&out)])),
        3
    );
    std::fs::write(&fvs, &bytes).unwrap();
    std::fs::write(data.join("synth_3.json"), "{\"video_id\": 3}").unwrap();
    assert_eq!(
        code(vsumm(&["split", "--data", s(&data), "--out", s(&out)])),
        3
    );
}
