use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dml(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dml"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("dml runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(o));
}

/// Tiny desk-profile datasets in `dir/dml-out`.
fn tiny_data(dir: &Path) {
    ok(&dml(
        dir,
        &[
            "generate-data",
            "--profile",
            "desk",
            "--train-sequences",
            "4",
            "--test-sequences",
            "2",
        ],
    ));
}

#[test]
fn help_exits_zero_with_usage() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dml(tmp.path(), &["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(out.contains("Usage"));
    assert!(out.contains("generate-data"));
}

#[test]
fn unknown_flag_prints_usage_and_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dml(tmp.path(), &["train", "--no-such-flag"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"));
    assert!(o.stdout.is_empty());
}

#[test]
fn missing_subcommand_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(dml(tmp.path(), &[]).status.code(), Some(1));
}

#[test]
fn missing_laser_params_names_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dml(tmp.path(), &["generate-data", "--laser-params", "absent/laser.cfg"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("absent/laser.cfg"), "{}", stderr(&o));
}

#[test]
fn unwritable_output_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("blocker"), b"file").unwrap();
    let o = dml(
        tmp.path(),
        &["generate-data", "--out", "blocker/sub", "--train-sequences", "1"],
    );
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_settings_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("run.cfg"), "epochz = 3\n").unwrap();
    let cases: [&[&str]; 4] = [
        &["train", "--config", "run.cfg", "--model", "tdnn"],
        &["train", "--model", "transformer"],
        &["train", "--model", "tdnn", "--heads", "2"],
        &["generate-data", "--profile", "huge"],
    ];
    for args in cases {
        let o = dml(tmp.path(), args);
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn train_without_data_exits_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = dml(tmp.path(), &["train", "--model", "tdnn"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("train.dmld"));
}

#[test]
fn generate_then_train_cat_writes_checkpoint_and_report() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_data(tmp.path());
    let o = dml(tmp.path(), &["train", "--model", "cat", "--epochs", "2"]);
    ok(&o);
    let out = tmp.path().join("dml-out");
    assert!(out.join("model.dmlw").is_file());
    let report = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(report.contains("embedding=64 heads=4"), "{report}");
    assert!(report.contains("epochs_run = 2"));
    let manifest = fs::read_to_string(out.join("train.manifest.txt")).unwrap();
    for key in [
        "command = train",
        "code_version = ",
        "seed = 1",
        "profile = desk",
        "epochs = 2",
    ] {
        assert!(manifest.contains(key), "{key} missing from\n{manifest}");
    }
}

#[test]
fn command_line_overrides_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_data(tmp.path());
    fs::write(
        tmp.path().join("run.cfg"),
        "model = tdnn\nepochs = 3\nhidden-nodes = 8\n",
    )
    .unwrap();
    ok(&dml(tmp.path(), &["train", "--config", "run.cfg", "--epochs", "1"]));
    let manifest = fs::read_to_string(tmp.path().join("dml-out/train.manifest.txt")).unwrap();
    assert!(manifest.contains("epochs = 1\n"));
    assert!(manifest.contains("hidden-nodes = 8\n"));
    let report = fs::read_to_string(tmp.path().join("dml-out/report.txt")).unwrap();
    assert!(report.contains("hidden_nodes=8"));
}

#[test]
fn manifest_alone_reproduces_the_checkpoint() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_data(tmp.path());
    let args = [
        "train",
        "--model",
        "tdnn",
        "--epochs",
        "2",
        "--hidden-nodes",
        "8",
        "--seed",
        "5",
    ];
    ok(&dml(tmp.path(), &args));
    let out = tmp.path().join("dml-out");
    let first = fs::read(out.join("model.dmlw")).unwrap();
    fs::copy(out.join("train.manifest.txt"), tmp.path().join("replay.cfg")).unwrap();
    fs::remove_file(out.join("model.dmlw")).unwrap();
    ok(&dml(tmp.path(), &["train", "--config", "replay.cfg"]));
    assert_eq!(fs::read(out.join("model.dmlw")).unwrap(), first);
}

#[test]
fn training_leaves_its_inputs_untouched() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_data(tmp.path());
    let out = tmp.path().join("dml-out");
    let before: Vec<Vec<u8>> = ["train.dmld", "test.dmld", "train.meta", "test.meta"]
        .iter()
        .map(|f| fs::read(out.join(f)).unwrap())
        .collect();
    ok(&dml(tmp.path(), &["train", "--model", "volterra"]));
    ok(&dml(tmp.path(), &["evaluate"]));
    let after: Vec<Vec<u8>> = ["train.dmld", "test.dmld", "train.meta", "test.meta"]
        .iter()
        .map(|f| fs::read(out.join(f)).unwrap())
        .collect();
    assert_eq!(before, after);
    let eval = fs::read_to_string(out.join("evaluation.txt")).unwrap();
    assert!(eval.contains("sequences = 2"));
    assert_eq!(
        fs::read_to_string(out.join("evaluation.csv")).unwrap().lines().count(),
        3
    );
}

#[test]
fn sweep_csv_shape_and_rerun_identity() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &'static str| {
        [
            "sweep",
            "--out",
            out,
            "--seed",
            "7",
            "--deterministic",
            "--models",
            "volterra,tdnn",
            "--hidden-nodes",
            "8",
            "--train-sequences",
            "2",
            "--test-sequences",
            "1",
            "--epochs",
            "1",
        ]
    };
    ok(&dml(tmp.path(), &args("a")));
    ok(&dml(tmp.path(), &args("b")));
    let a = fs::read(tmp.path().join("a/sweep.csv")).unwrap();
    assert_eq!(a, fs::read(tmp.path().join("b/sweep.csv")).unwrap());
    let text = String::from_utf8(a).unwrap();
    assert_eq!(text.lines().count(), 2 * 6 + 1);
    assert_eq!(text.lines().next(), Some("model,fraction,nrmse"));
}

#[test]
fn eye_writes_csv_and_pgm_per_trace() {
    let tmp = tempfile::tempdir().unwrap();
    ok(&dml(tmp.path(), &["eye", "--symbols", "32", "--bins", "16"]));
    let out = tmp.path().join("dml-out");
    for trace in ["ideal", "input", "solver"] {
        let pgm = fs::read(out.join(format!("eye_{trace}.pgm"))).unwrap();
        let header = b"P5\n64 16\n255\n";
        assert_eq!(&pgm[..header.len()], header);
        assert_eq!(pgm.len(), header.len() + 64 * 16);
        let csv = fs::read_to_string(out.join(format!("eye_{trace}.csv"))).unwrap();
        assert_eq!(csv.lines().count(), 17);
    }
}

#[test]
fn benchmark_writes_a_timing_table() {
    let tmp = tempfile::tempdir().unwrap();
    tiny_data(tmp.path());
    ok(&dml(
        tmp.path(),
        &[
            "benchmark",
            "--models",
            "volterra,tdnn",
            "--hidden-nodes",
            "8",
            "--runs",
            "2",
        ],
    ));
    let csv = fs::read_to_string(tmp.path().join("dml-out/timing.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with("volterra,"));
    assert!(rows[3].starts_with("solver,"));
}

#[test]
fn simulate_maps_a_drive_file_to_power() {
    let tmp = tempfile::tempdir().unwrap();
    let drive: String = (0..128)
        .map(|i| format!("{}\n", if (i / 32) % 2 == 0 { 0.2 } else { 0.8 }))
        .collect();
    fs::write(tmp.path().join("drive.txt"), drive).unwrap();
    ok(&dml(tmp.path(), &["simulate", "--input", "drive.txt"]));
    let csv = fs::read_to_string(tmp.path().join("dml-out/power.csv")).unwrap();
    assert_eq!(csv.lines().count(), 129);
    let norm: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    assert!(norm.iter().all(|v| (0.0..=1.0).contains(v)));

    fs::write(tmp.path().join("bad.txt"), "0.5\nhalf\n").unwrap();
    let o = dml(tmp.path(), &["simulate", "--input", "bad.txt"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("line 2"));
}
