use std::path::Path;
use std::process::{Command, Output};

fn dganet(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dganet"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

const TINY: &[&str] = &[
    "--hidden",
    "8",
    "--attention",
    "8",
    "--layers",
    "1",
    "--window",
    "2",
    "--steps",
    "2",
    "--max-epochs",
    "2",
    "--batch-size",
    "16",
    "--learning-rate",
    "0.003",
];

fn data_flags() -> Vec<&'static str> {
    vec![
        "--vocab",
        "data/vocab.txt",
        "--labels",
        "data/labels.txt",
        "--train",
        "data/train.jsonl",
        "--valid",
        "data/valid.jsonl",
        "--test",
        "data/test.jsonl",
    ]
}

fn gen(dir: &Path) {
    let out = dganet(
        dir,
        &["gen-synth", "--task", "shared-window", "--out", "data", "--train", "64", "--valid", "32", "--test", "32"],
    );
    stdout_json(&out);
}

#[test]
fn train_eval_and_trace_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let mut args = vec!["train", "--checkpoint", "m.ckpt", "--report", "r.json", "--dump-trace", "t.jsonl"];
    args.extend(TINY);
    args.extend(data_flags());
    let trained = stdout_json(&dganet(dir.path(), &args));
    let test_acc = trained["test_accuracy"].as_f64().unwrap();

    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert!(report["epochs"].as_array().unwrap().len() <= 2);
    assert_eq!(report["config"]["hidden"], 8);
    assert!(std::fs::read_to_string(dir.path().join("t.jsonl")).unwrap().lines().count() == 32 * 2);

    let mut args = vec!["eval", "--checkpoint", "m.ckpt"];
    args.extend(TINY);
    args.extend(data_flags());
    let eval = stdout_json(&dganet(dir.path(), &args));
    assert_eq!(eval["accuracy"].as_f64().unwrap(), test_acc);
    assert_eq!(eval["total"], 32);

    let mut args = vec!["dump-trace", "--checkpoint", "m.ckpt", "--output", "t2.jsonl", "--limit", "2"];
    args.extend(TINY);
    args.extend(data_flags());
    assert!(dganet(dir.path(), &args).status.success());
    assert_eq!(std::fs::read_to_string(dir.path().join("t2.jsonl")).unwrap().lines().count(), 4);
}

#[test]
fn config_file_values_are_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    std::fs::write(
        dir.path().join("run.toml"),
        "hidden = 8\nattention = 8\nlayers = 1\nwindow = 2\nsteps = 2\nmax-epochs = 3\nbatch-size = 16\n\
         vocab = \"data/vocab.txt\"\nlabels = \"data/labels.txt\"\ntrain = \"data/train.jsonl\"\nvalid = \"data/valid.jsonl\"\n",
    )
    .unwrap();
    let out = dganet(dir.path(), &["train", "--config", "run.toml", "--max-epochs", "1", "--report", "r.json"]);
    stdout_json(&out);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["max-epochs"], 1);
    assert_eq!(report["config"]["hidden"], 8);
    assert_eq!(report["epochs"].as_array().unwrap().len(), 1);
}

#[test]
fn checkpoint_mismatch_exits_with_4() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let mut args = vec!["train", "--checkpoint", "m.ckpt"];
    args.extend(TINY);
    args.extend(data_flags());
    stdout_json(&dganet(dir.path(), &args));

    let mut args = vec!["eval", "--checkpoint", "m.ckpt", "--hidden", "16"];
    args.extend(&TINY[2..]);
    args.extend(data_flags());
    assert_eq!(dganet(dir.path(), &args).status.code(), Some(4));
}

#[test]
fn input_errors_exit_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dganet(dir.path(), &["gen-synth", "--task", "nonsense", "--out", "data"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));

    let out = dganet(dir.path(), &["train", "--train", "missing.jsonl"]);
    assert_eq!(out.status.code(), Some(2));

    std::fs::write(dir.path().join("bad.toml"), "windw = 3\n").unwrap();
    assert_eq!(dganet(dir.path(), &["train", "--config", "bad.toml"]).status.code(), Some(2));
}

#[test]
fn divergence_exits_with_3() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    let mut args = vec!["train", "--checkpoint", "m.ckpt", "--learning-rate", "1e308", "--max-epochs", "3"];
    args.extend(&TINY[..TINY.len() - 6]);
    args.extend(["--batch-size", "16"]);
    args.extend(data_flags());
    let out = dganet(dir.path(), &args);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn convert_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    gen(dir.path());
    std::fs::write(
        dir.path().join("pairs.tsv"),
        "s1\ts2\tlabel\na man sleeps\ta person rests\tentailment\na dog runs\tthe cat sits\tcontradiction\nx\ty\t-\n",
    )
    .unwrap();
    let out = dganet(
        dir.path(),
        &[
            "convert",
            "--input",
            "pairs.tsv",
            "--output",
            "pairs.jsonl",
            "--skip-header",
            "--skip-label",
            "-",
            "--labels-out",
            "labels.txt",
            "--vocab-out",
            "vocab.txt",
        ],
    );
    let summary = stdout_json(&out);
    assert_eq!(summary["written"], 2);
    assert_eq!(summary["skipped"], 1);
    assert_eq!(std::fs::read_to_string(dir.path().join("labels.txt")).unwrap().trim(), "entailment\ncontradiction");

    let mut args =
        vec!["sweep", "--grid-windows", "1,2", "--grid-steps", "1", "--output", "s.csv", "--max-epochs", "1"];
    args.extend(&TINY[..10]);
    args.extend(data_flags());
    assert!(dganet(dir.path(), &args).status.success());
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "D,T,seed,valid_acc,test_acc,status");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("1,1,0,") && lines[2].starts_with("2,1,1,"));
}
