use dganet::harness::sweep::{read_csv, write_csv};
use dganet::harness::train::save_checkpoint;
use dganet::harness::*;
use dganet::Error;

fn tiny_config() -> RunConfig {
    RunConfig {
        hidden: 8,
        attention: 8,
        layers: 1,
        window: 2,
        steps: 2,
        batch_size: 16,
        max_epochs: 6,
        learning_rate: 3e-3,
        seed: 11,
        ..Default::default()
    }
}

fn tiny_data() -> (SyntheticData, Splits) {
    let data = generate_synthetic(Task::SharedWindow, [96, 48, 48], 5).unwrap();
    let splits = data.splits(tiny_config().tokenize_options()).unwrap();
    (data, splits)
}

#[test]
fn patience_zero_stops_one_epoch_after_the_best() {
    let (data, splits) = tiny_data();
    let config = RunConfig { patience: 0, max_epochs: 20, ..tiny_config() };
    let out = train(&config, &splits, data.vocab.len()).unwrap();
    let r = &out.report;
    if r.epochs.len() < config.max_epochs {
        assert_eq!(r.epochs.len(), r.best_epoch + 2);
    }
}

#[test]
fn epoch_zero_loss_is_bit_identical_across_runs() {
    let (data, splits) = tiny_data();
    let config = RunConfig { max_epochs: 1, ..tiny_config() };
    let a = train(&config, &splits, data.vocab.len()).unwrap();
    let b = train(&config, &splits, data.vocab.len()).unwrap();
    assert_eq!(a.report.epochs[0].train_loss.to_bits(), b.report.epochs[0].train_loss.to_bits());
    for (x, y) in a.params.iter().zip(b.params.iter()) {
        assert_eq!(x.value, y.value, "{}", x.name);
    }
}

#[test]
fn returned_model_has_the_best_observed_validation_accuracy() {
    let (data, splits) = tiny_data();
    let out = train(&RunConfig { patience: 10, ..tiny_config() }, &splits, data.vocab.len()).unwrap();
    let r = &out.report;
    let max = r.epochs.iter().map(|e| e.valid_accuracy).fold(0.0, f64::max);
    assert_eq!(r.best_valid_accuracy, max);
    assert_eq!(r.epochs[r.best_epoch].valid_accuracy, max);
    assert!(r.epochs.len() <= 6);
    assert!(r.epochs.iter().all(|e| (0.0..=1.0).contains(&e.valid_accuracy)));
    assert_eq!(evaluate(&out.net, &out.params, &splits.valid).unwrap().accuracy, max);
}

#[test]
fn checkpoint_round_trip_reproduces_accuracy() {
    let (data, splits) = tiny_data();
    let config = RunConfig { max_epochs: 2, ..tiny_config() };
    let out = train(&config, &splits, data.vocab.len()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.ckpt");
    save_checkpoint(&out.params, &path).unwrap();

    let (net, params) = load_model(&config, data.vocab.len(), 2, None, &path).unwrap();
    let test = splits.test.as_ref().unwrap();
    let before = evaluate(&out.net, &out.params, test).unwrap();
    let after = evaluate(&net, &params, test).unwrap();
    assert_eq!(before, after);

    let wider = RunConfig { hidden: 9, ..config };
    assert!(matches!(load_model(&wider, data.vocab.len(), 2, None, &path), Err(Error::Checkpoint(_))));
}

#[test]
fn report_round_trips_through_json() {
    let (data, splits) = tiny_data();
    let out = train(&RunConfig { max_epochs: 1, ..tiny_config() }, &splits, data.vocab.len()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    out.report.write(&path).unwrap();
    assert_eq!(RunReport::read(&path).unwrap(), out.report);
}

#[test]
fn trace_has_one_record_per_step() {
    let (data, splits) = tiny_data();
    let out = train(&RunConfig { max_epochs: 1, ..tiny_config() }, &splits, data.vocab.len()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    let n = dump_trace(&out.net, &out.params, &splits.valid, Some(3), &path).unwrap();
    assert_eq!(n, 3 * 2);
    let text = std::fs::read_to_string(&path).unwrap();
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        let w: Vec<f64> = serde_json::from_value(v["weights"].clone()).unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(v["p_t"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn sweep_rows_are_ordered_and_failures_recorded() {
    let (data, splits) = tiny_data();
    let config = RunConfig { max_epochs: 1, ..tiny_config() };
    let grid = SweepGrid { windows: vec![1, 2], steps: vec![1, 3], seeds: 1 };
    let rows = sweep(&config, &splits, data.vocab.len(), &grid, false).unwrap();
    let keys: Vec<_> = rows.iter().map(|r| (r.window, r.steps, r.seed)).collect();
    assert_eq!(keys, vec![(1, 1, 11), (1, 3, 12), (2, 1, 13), (2, 3, 14)]);
    assert!(rows.iter().all(|r| r.status == "ok"));
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    assert_eq!(read_csv(buf.as_slice()).unwrap(), rows);

    let one = SweepGrid { windows: vec![3], steps: vec![1], seeds: 1 };
    assert_eq!(sweep(&config, &splits, data.vocab.len(), &one, false).unwrap().len(), 1);

    let broken = SweepGrid { windows: vec![0, 1], steps: vec![1], seeds: 1 };
    let rows = sweep(&config, &splits, data.vocab.len(), &broken, false).unwrap();
    assert!(rows[0].status.starts_with("error"));
    assert_eq!(rows[0].valid_acc, None);
    assert_eq!(rows[1].status, "ok");

    let empty = SweepGrid { windows: vec![], steps: vec![1], seeds: 1 };
    assert!(sweep(&config, &splits, data.vocab.len(), &empty, false).is_err());
}

#[test]
fn parallel_sweep_matches_sequential() {
    let (data, splits) = tiny_data();
    let config = RunConfig { max_epochs: 1, ..tiny_config() };
    let grid = SweepGrid { windows: vec![1, 2], steps: vec![2], seeds: 2 };
    let seq = sweep(&config, &splits, data.vocab.len(), &grid, false).unwrap();
    let par = sweep(&config, &splits, data.vocab.len(), &grid, true).unwrap();
    assert_eq!(seq, par);
}
