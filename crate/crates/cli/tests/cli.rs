use std::path::Path;
use std::process::{Command, Output};

fn fdmap(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fdmap")).args(args).current_dir(cwd).output().expect("run fdmap")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn hash_line(o: &Output) -> String {
    stdout(o).lines().find(|l| l.starts_with("config_hash:")).expect("hash line").to_string()
}

const SMALL_SWEEP: &[&str] = &["decode-sweep", "--snr", "0,6", "--n", "5000", "--divergences", "sl", "--epochs", "2", "--steps-per-epoch", "20"];

#[test]
fn verify_passes_and_reports_every_property() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdmap(&["verify", "--out", "out"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 8, "{text}");
    assert!(!text.contains("FAIL"));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("out/verify.json")).unwrap()).unwrap();
    assert_eq!(json["records"].as_array().unwrap().len(), 8);
}

#[test]
fn sweeps_are_byte_identical_across_runs_and_modes() {
    let dir = tempfile::tempdir().unwrap();
    let run = |out: &str, extra: &[&str]| {
        let mut args = SMALL_SWEEP.to_vec();
        args.extend(["--seed", "7", "--out", out]);
        args.extend(extra);
        let o = fdmap(&args, dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        std::fs::read(dir.path().join(out).join("decode-sweep.csv")).unwrap()
    };
    let a = run("a", &[]);
    let b = run("b", &[]);
    let c = run("c", &["--sequential"]);
    assert_eq!(a, b);
    assert_eq!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("snr_db,decoder,ser,stderr,n_symbols,seed\n"), "{text}");
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}

#[test]
fn unknown_divergence_is_a_validation_error_naming_the_field() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["decode-sweep", "--divergences", "kl,bogus", "--dry-run"][..],
        &["toy", "--divergence", "bogus", "--dry-run"][..],
        &["mixture-bench", "--divergences", "bogus", "--dry-run"][..],
    ] {
        let o = fdmap(args, dir.path());
        assert_eq!(o.status.code(), Some(1));
        assert!(stderr(&o).contains("`divergence`") && stderr(&o).contains("bogus"), "{}", stderr(&o));
    }
    std::fs::write(dir.path().join("bad.toml"), "divergence = \"nope\"\n").unwrap();
    let o = fdmap(&["toy", "--config", "bad.toml", "--dry-run"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("`divergence`"), "{}", stderr(&o));
}

#[test]
fn other_validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("typo.toml"), "learning_rate = 0.1\n").unwrap();
    let cases: [&[&str]; 5] = [
        &["toy", "--config", "typo.toml", "--dry-run"],
        &["toy", "--arch", "supervised", "--dry-run"],
        &["toy", "--support-box", "0,2", "--tx-measure", "3", "--dry-run"],
        &["decode-sweep", "--channel", "qam", "--dry-run"],
        &["not-a-command"],
    ];
    for args in cases {
        let o = fdmap(args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn config_hash_ignores_key_order_and_tracks_values() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.toml"), "divergence = \"sl\"\ntask = \"gauss\"\nlr = 0.001\nepochs = 5\nseed = 3\n").unwrap();
    std::fs::write(dir.path().join("b.toml"), "seed = 3\nepochs = 5\nlr = 0.001\ntask = \"gauss\"\ndivergence = \"sl\"\n").unwrap();
    std::fs::write(dir.path().join("c.toml"), "seed = 3\nepochs = 6\nlr = 0.001\ntask = \"gauss\"\ndivergence = \"sl\"\n").unwrap();
    let h = |args: &[&str]| {
        let o = fdmap(args, dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        hash_line(&o)
    };
    let a = h(&["toy", "--config", "a.toml", "--dry-run"]);
    assert_eq!(a, h(&["toy", "--config", "b.toml", "--dry-run"]));
    assert_ne!(a, h(&["toy", "--config", "c.toml", "--dry-run"]));
    // flags override the file
    assert_eq!(h(&["toy", "--config", "c.toml", "--epochs", "5", "--dry-run"]), a);
    // the output location is not part of the experiment
    assert_eq!(h(&["toy", "--config", "a.toml", "--out", "elsewhere", "--dry-run"]), a);
}

#[test]
fn diverging_training_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdmap(
        &["mixture-bench", "--divergences", "kl", "--optimizer", "sgd", "--lr", "1e12", "--epochs", "1", "--n-test", "100", "--out", "o"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn toy_writes_grid_summary_and_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdmap(
        &[
            "toy", "--task", "gauss", "--divergence", "sl,kl", "--epochs", "1", "--steps-per-epoch", "20", "--n-train", "2000",
            "--checkpoint-dir", "ck", "--out", "o",
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let grid = std::fs::read_to_string(dir.path().join("o/toy-gauss-sl.csv")).unwrap();
    assert!(grid.starts_with("x,y,estimate,oracle\n"));
    assert_eq!(grid.lines().count(), 1 + 50 * 50);
    let summary: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("o/toy-gauss.json")).unwrap()).unwrap();
    let mse: Vec<_> = summary["records"].as_array().unwrap().iter().filter(|r| r["metric"] == "mse").collect();
    assert_eq!(mse.len(), 2);
    let ck = std::fs::read_to_string(dir.path().join("ck/toy-gauss-kl.net")).unwrap();
    assert!(ck.starts_with("fdmap-net 1\n") && ck.trim_end().ends_with("end"));
}

#[test]
fn mixture_posteriors_can_be_normalised() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["mixture-bench", "--divergences", "hd", "--epochs", "1", "--n-test", "500", "--posteriors", "3", "--normalize", "--out", "o"];
    let o = fdmap(&args, dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("o/mixture-posteriors.csv")).unwrap();
    let mut sums = [0.0f64; 3];
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        sums[cols[1].parse::<usize>().unwrap()] += cols[3].parse::<f64>().unwrap();
    }
    for s in sums {
        assert!((s - 1.0).abs() < 1e-12, "{s}");
    }
}

#[test]
fn divergence_report_covers_all_divergences() {
    let dir = tempfile::tempdir().unwrap();
    let o = fdmap(&["divergence-report", "--points", "5", "--tx-measure", "2", "--out", "o"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("o/divergence-report.csv")).unwrap();
    for name in ["kl", "rkl", "hd", "gan", "p", "sl"] {
        assert!(text.lines().any(|l| l.starts_with(&format!("{name},unsupervised,f_star,"))), "{name}");
    }
}
