use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use dimtrack_core::config::TrackerConfig;

fn dimtrack(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dimtrack"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = dimtrack(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Keeps the first `n` frames of a written sequence.
fn truncate_sequence(dir: &Path, n: usize) {
    for entry in fs::read_dir(dir.join("img")).unwrap() {
        let path = entry.unwrap().path();
        let idx: usize = path.file_stem().unwrap().to_str().unwrap().parse().unwrap();
        if idx > n {
            fs::remove_file(path).unwrap();
        }
    }
    let gt = fs::read_to_string(dir.join("groundtruth_rect.txt")).unwrap();
    let kept: Vec<&str> = gt.lines().take(n).collect();
    fs::write(dir.join("groundtruth_rect.txt"), kept.join("\n") + "\n").unwrap();
}

#[test]
fn help_lists_flags_with_defaults() {
    let cfg = TrackerConfig::default();
    for sub in ["track", "eval"] {
        let help = ok(&[sub, "--help"]);
        for (flag, key) in [
            ("--lambda", "lambda"),
            ("--eta", "eta"),
            ("--sigma-factor", "sigma_factor"),
            ("--padding", "padding"),
            ("--n-scales", "n_scales"),
            ("--n-interp", "n_interp"),
            ("--scale-step", "scale_step"),
            ("--t-r", "t_r"),
            ("--t-a", "t_a"),
            ("--update-interval", "update_interval"),
            ("--rematch-interval", "rematch_interval"),
            ("--quality", "quality"),
        ] {
            assert!(help.contains(flag), "{sub}: {flag} missing");
            let default = format!("[default: {}]", cfg.get(key).unwrap());
            let needle = format!("{flag} <");
            let line = help.lines().skip_while(|l| !l.contains(&needle)).take(3).collect::<String>();
            assert!(line.contains(&default), "{sub} {flag}: expected {default} in {line:?}");
        }
        assert!(help.contains("--config") && help.contains("--out") && help.contains("--enhance"));
    }
    for sub in ["enhance", "synth"] {
        assert!(ok(&[sub, "--help"]).contains("--out"));
    }
    assert!(ok(&["enhance", "--help"]).contains("[default: fast]"));
    assert!(ok(&["track", "--help"]).contains("[default: gt]"));
}

#[test]
fn synth_then_track_with_gt_init() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("translate");
    ok(&["synth", "--kind", "translate", "--out", p(&seq)]);
    truncate_sequence(&seq, 12);
    let out = dir.path().join("boxes.txt");
    let diag = dir.path().join("diag.csv");
    ok(&["track", "--seq", p(&seq), "--init", "gt", "--out", p(&out), "--diag", p(&diag)]);
    let boxes = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = boxes.lines().collect();
    assert_eq!(lines.len(), 12);
    assert_eq!(lines[0], "1,40.00,100.00,40.00,40.00");
    for (k, line) in lines.iter().enumerate() {
        let v: Vec<f64> = line.split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(v[0] as usize, k + 1);
        let cx = v[1] + v[3] / 2.0;
        assert!((cx - (60.0 + 2.0 * k as f64)).abs() <= 3.0, "{line}");
    }
    let diag = fs::read_to_string(&diag).unwrap();
    assert!(diag.starts_with("frame,r_max,apce"));
    assert_eq!(diag.lines().count(), 13);

    let again = dir.path().join("again.txt");
    ok(&["track", "--seq", p(&seq), "--init", "40,100,40,40", "--out", p(&again)]);
    assert_eq!(fs::read(&out).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn enhance_methods() {
    let dir = tempfile::tempdir().unwrap();
    let seq = dir.path().join("darken");
    ok(&["synth", "--kind", "darken", "--out", p(&seq)]);
    let bright = seq.join("img/0001.png");
    let dark = seq.join("img/0080.png");

    let copy = dir.path().join("bright.png");
    ok(&["enhance", "--in", p(&bright), "--out", p(&copy), "--method", "fast"]);
    assert_eq!(fs::read(&bright).unwrap(), fs::read(&copy).unwrap());

    for method in ["fast", "lime", "inverted"] {
        let out = dir.path().join(format!("{method}.png"));
        ok(&["enhance", "--in", p(&dark), "--out", p(&out), "--method", method]);
        let before = image::open(&dark).unwrap().to_luma8();
        let after = image::open(&out).unwrap().to_luma8();
        let mean = |img: &image::GrayImage| img.pixels().map(|p| p.0[0] as f64).sum::<f64>() / img.len() as f64;
        assert!(mean(&after) > mean(&before), "{method}");
    }
}

#[test]
fn eval_tre_writes_curves() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    let seq = data.join("translate");
    ok(&["synth", "--kind", "translate", "--out", p(&seq)]);
    truncate_sequence(&seq, 25);
    let out = dir.path().join("results");
    let stdout = ok(&["eval", "--dataset", p(&data), "--mode", "tre", "--out", p(&out)]);
    assert!(stdout.contains("sequence,frames,dp20,auc,auc_pct,fps"));
    let success = fs::read_to_string(out.join("tre_success.txt")).unwrap();
    assert_eq!(success.lines().count(), 22);
    let precision = fs::read_to_string(out.join("tre_precision.txt")).unwrap();
    assert_eq!(precision.lines().count(), 52);
    let summary = fs::read_to_string(out.join("tre_summary.csv")).unwrap();
    let all = summary.lines().find(|l| l.starts_with("ALL")).unwrap();
    let frames: usize = all.split(',').nth(1).unwrap().parse().unwrap();
    // 20 segments starting at frames 0, 1, 2, 3, 5, ...: total frames counted per segment
    let expected: usize = (0..20).map(|i| 25 - i * 25 / 20).sum();
    assert_eq!(frames, expected);
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    assert!(!dimtrack(&["track", "--bogus"]).status.success());
    let missing = dimtrack(&["track", "--seq", "/nonexistent", "--out", p(&dir.path().join("o"))]);
    assert!(!missing.status.success());
    assert!(String::from_utf8_lossy(&missing.stderr).contains("error"));
    let seq = dir.path().join("s");
    ok(&["synth", "--kind", "translate", "--out", p(&seq)]);
    truncate_sequence(&seq, 2);
    let bad = dimtrack(&["track", "--seq", p(&seq), "--init", "1,2,x,4", "--out", p(&dir.path().join("o"))]);
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("malformed --init"));
}
