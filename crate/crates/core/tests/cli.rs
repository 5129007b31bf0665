use std::path::Path;
use std::process::{Command, Output};

use octmargin::nn::{checkpoint, ArchitectureSpec, NetworkParams, PoolKind};
use octmargin::preproc::patches::PatchSet;
use octmargin::rng::{stream, Stream};

fn octmargin(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_octmargin")).current_dir(dir).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn synth_small(dir: &Path, name: &str, seed: &str) {
    let o = octmargin(
        dir,
        &["synth", "--out", name, "--seed", seed, "--rows", "192", "--cols", "256", "--frames", "3", "--surface-row", "30"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn missing_lambda_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = octmargin(dir.path(), &["train", "--patches", "p.octp", "--out", "m.octm", "--method", "WD"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    let last = err.lines().last().unwrap();
    assert!(last.starts_with("error[usage]:"), "{err}");
    assert!(last.contains("lambda"), "{err}");
}

#[test]
fn unknown_flag_and_config_key_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = octmargin(dir.path(), &["train", "--lamda", "1"]);
    assert_eq!(o.status.code(), Some(2));
    std::fs::write(dir.path().join("run.cfg"), "lamda = 1\n").unwrap();
    let o = octmargin(dir.path(), &["--config", "run.cfg", "train"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("error[usage]"));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = octmargin(dir.path(), &["detect", "--volume", "absent.octv", "--out", "s.csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).lines().last().unwrap().starts_with("error[io]:"));
}

#[test]
fn detect_writes_one_row_per_column() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "v.octv", "4");
    let o = octmargin(dir.path(), &["detect", "--volume", "v.octv", "--out", "s.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("frame,col,row,provenance"));
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(str::to_string).collect()).collect();
    for f in 0..3 {
        let frame: Vec<_> = rows.iter().filter(|r| r[0] == f.to_string()).collect();
        assert_eq!(frame.len(), 256);
        for (c, r) in frame.iter().enumerate() {
            assert_eq!(r[1], c.to_string());
            let row: f64 = r[2].parse().unwrap();
            assert!((row - 60.0).abs() <= 5.0, "frame {f} col {c}: {row}");
        }
    }
}

#[test]
fn config_file_supplies_options_and_flags_override_it() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("synth.cfg"), "seed = 3\nrows = 128\ncols = 96\nframes = 4\nout = a.octv\n").unwrap();
    let o = octmargin(dir.path(), &["--config", "synth.cfg", "synth", "--out", "b.octv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(!dir.path().join("a.octv").exists());
    let v = octmargin::preproc::volume::BScanVolume::load(&dir.path().join("b.octv")).unwrap();
    assert_eq!((v.rows, v.cols, v.frames), (128, 96, 4));
    assert!(stderr(&o).contains("seed = 3"));
}

#[test]
fn eval_report_footer_is_mean_and_sample_std_of_trials() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "test.octv", "8");
    let o = octmargin(dir.path(), &["extract", "--volume", "test.octv", "--out", "test.octp", "--mode", "test"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let set = PatchSet::load(&dir.path().join("test.octp")).unwrap();
    assert!(set.labeled().count() > 10);

    let mut roster = String::new();
    for k in 0..4u64 {
        let arch = ArchitectureSpec::standard(if k % 2 == 0 { PoolKind::Max } else { PoolKind::Average });
        let p = NetworkParams::init(&arch, &mut stream(k, Stream::Init)).unwrap();
        checkpoint::save(&p, &dir.path().join(format!("m{k}.octm"))).unwrap();
        roster.push_str(&format!("trial{k} m{k}.octm test.octp\n"));
    }
    std::fs::write(dir.path().join("roster.txt"), roster).unwrap();
    let o = octmargin(dir.path(), &["eval", "--roster", "roster.txt", "--out", "report.csv", "--roc", "roc.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));

    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    let lines: Vec<&str> = report.lines().collect();
    assert_eq!(lines[0], "trial,Se,Sp,Pr,F1,G,MCC,ACC,AUC,EER");
    assert_eq!(lines.len(), 6);
    let footer: Vec<&str> = lines[5].split(',').collect();
    assert_eq!(footer[0], "mean±std");
    for col in 1..10 {
        let vals: Vec<f64> = lines[1..5].iter().filter_map(|l| l.split(',').nth(col).unwrap().parse().ok()).collect();
        if vals.is_empty() {
            assert_eq!(footer[col], "undefined");
            continue;
        }
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let sd = if vals.len() > 1 {
            (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        let (m, s) = footer[col].split_once('±').unwrap();
        let (m, s): (f64, f64) = (m.parse().unwrap(), s.parse().unwrap());
        assert!((m - mean).abs() < 2e-4, "column {col}: {m} vs {mean}");
        assert!((s - sd).abs() < 2e-4, "column {col}: {s} vs {sd}");
    }

    let roc = std::fs::read_to_string(dir.path().join("roc.csv")).unwrap();
    assert_eq!(roc.lines().next(), Some("fpr,tpr_mean,tpr_std"));
    assert_eq!(roc.lines().count(), 102);
}

#[test]
fn pipeline_runs_end_to_end_on_a_tiny_network() {
    let dir = tempfile::tempdir().unwrap();
    synth_small(dir.path(), "train.octv", "1");
    synth_small(dir.path(), "test.octv", "2");
    for (v, p, mode) in [("train.octv", "train.octp", "train"), ("test.octv", "test.octp", "test")] {
        let o = octmargin(dir.path(), &["extract", "--volume", v, "--out", p, "--mode", mode]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let tiny = ["--filters", "2,3,2", "--hidden", "4", "--epochs", "2", "--seed", "5", "--lr-scale", "0.1"];
    let mut args = vec!["train", "--patches", "train.octp", "--out", "m.octm", "--method", "WD", "--lambda", "1e-3"];
    args.extend(tiny);
    let o = octmargin(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("warning"), "desk-scale epochs should warn");

    let mut args = vec!["select", "--patches", "train.octp", "--out", "cv.csv", "--method", "WD", "--folds", "2"];
    args.extend(["--lambdas", "1e-3,1e1", "--poolings", "max", "--workers", "1"]);
    args.extend(tiny);
    let o = octmargin(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(dir.path().join("cv.csv")).unwrap();
    assert_eq!(table.lines().next(), Some("method,lambda,dropout,pooling,auc1,auc2,mean"));
    assert_eq!(table.lines().count(), 3);

    let o = octmargin(dir.path(), &["overlay", "--model", "m.octm", "--volume", "test.octv", "--out-dir", "ov", "--field"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ov = dir.path().join("ov");
    assert!(ov.join("slice_000.png").exists());
    assert!(ov.join("timing.csv").exists());
}
