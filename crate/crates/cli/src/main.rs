use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dganet::harness::dataset::{build_vocabulary, convert_tsv, read_jsonl, TsvColumns};
use dganet::harness::sweep::{write_csv_file, SweepGrid};
use dganet::harness::train::save_checkpoint;
use dganet::harness::{
    dump_trace, evaluate, generate_synthetic, load_config_split, load_model, load_run_data, sweep, train,
    write_synthetic, LabelSet, RunConfig, Task,
};
use dganet::numeric::Real;
use dganet::{Error, Result};

#[derive(Parser)]
#[command(name = "dganet", version, about = "Sentence-pair matching with dynamic Gaussian attention")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model with early stopping on validation accuracy.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Where to write the best checkpoint.
        #[arg(long, default_value = "model.ckpt")]
        checkpoint: PathBuf,
        /// Where to write the JSON run report.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Write per-step attention traces for the validation split.
        #[arg(long)]
        dump_trace: Option<PathBuf>,
    },
    /// Evaluate a checkpoint; prints accuracy and the confusion matrix as JSON.
    Eval {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Split to score. Defaults to the configured test split.
        #[arg(long)]
        split: Option<PathBuf>,
    },
    /// Train one model per (window, steps) grid point and write a CSV report.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated window sizes.
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6])]
        grid_windows: Vec<usize>,
        /// Comma-separated step counts.
        #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 3, 4, 5, 6, 7, 8])]
        grid_steps: Vec<usize>,
        /// Seeds per grid point.
        #[arg(long, default_value_t = 1)]
        replicates: usize,
        /// Run grid points on all cores.
        #[arg(long)]
        parallel: bool,
        #[arg(long, default_value = "sweep.csv")]
        output: PathBuf,
    },
    /// Generate a synthetic dataset directory.
    GenSynth {
        /// `shared-window` or `keyword-overlap`.
        #[arg(long)]
        task: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8000)]
        train: usize,
        #[arg(long, default_value_t = 1000)]
        valid: usize,
        #[arg(long, default_value_t = 1000)]
        test: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Convert a tab-separated pair file to line-delimited JSON.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Zero-based columns of sentence a, sentence b and label.
        #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [0, 1, 2])]
        columns: Vec<usize>,
        #[arg(long)]
        skip_header: bool,
        /// Drop rows with this label (repeatable).
        #[arg(long)]
        skip_label: Vec<String>,
        /// Stop after this many converted rows.
        #[arg(long)]
        limit: Option<usize>,
        /// Also write the label header file (labels in first-seen order).
        #[arg(long)]
        labels_out: Option<PathBuf>,
        /// Also write a vocabulary covering the converted rows.
        #[arg(long)]
        vocab_out: Option<PathBuf>,
    },
    /// Write per-step focus positions and attention weights for a split.
    DumpTrace {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to the configured validation split.
        #[arg(long)]
        split: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        /// Only the first N pairs.
        #[arg(long)]
        limit: Option<usize>,
    },
}

/// Run configuration flags. Anything given here overrides `--config`.
#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Key-value config file using the same names as these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Gaussian window width D [default: 4]
    #[arg(long)]
    window: Option<usize>,
    /// Number of dynamic attention steps T [default: 4]
    #[arg(long)]
    steps: Option<usize>,
    /// Attention size [default: 200]
    #[arg(long)]
    attention: Option<usize>,
    /// Hidden size of the encoder and attention state [default: 64]
    #[arg(long)]
    hidden: Option<usize>,
    /// Encoder layers mixed into H [default: 2]
    #[arg(long)]
    layers: Option<usize>,
    /// Classifier hidden size [default: --hidden]
    #[arg(long)]
    mlp_hidden: Option<usize>,
    /// Max tokens per pair, markers included [default: 128]
    #[arg(long)]
    max_len: Option<usize>,
    /// Vocabulary file, one token per line
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Label file, one label per line
    #[arg(long)]
    labels: Option<PathBuf>,
    /// Training split (JSONL)
    #[arg(long)]
    train: Option<PathBuf>,
    /// Validation split (JSONL)
    #[arg(long)]
    valid: Option<PathBuf>,
    /// Test split (JSONL)
    #[arg(long)]
    test: Option<PathBuf>,
    /// Token vectors per split; `{split}` is replaced by train/valid/test.
    #[arg(long)]
    embeddings_file: Option<String>,
    /// Adam step size [default: 1e-4]
    #[arg(long)]
    learning_rate: Option<Real>,
    /// [default: 0.9]
    #[arg(long)]
    beta1: Option<Real>,
    /// [default: 0.999]
    #[arg(long)]
    beta2: Option<Real>,
    /// [default: 1e-8]
    #[arg(long)]
    adam_epsilon: Option<Real>,
    /// L2 penalty weight [default: 0]
    #[arg(long)]
    weight_decay: Option<Real>,
    /// [default: 32]
    #[arg(long)]
    batch_size: Option<usize>,
    /// [default: 30]
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Epochs without a new best validation accuracy before stopping [default: 3]
    #[arg(long)]
    patience: Option<usize>,
    /// [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Penalise the L2 norm instead of its square
    #[arg(long)]
    l2_norm_exact: bool,
    /// Drop the global vector from the match features
    #[arg(long)]
    no_global: bool,
    /// Drop the pooled dynamic state from the match features
    #[arg(long)]
    no_detail: bool,
    /// Disable the Gaussian prior (plain dynamic attention)
    #[arg(long)]
    no_gaussian: bool,
    /// Average H instead of summing it when predicting positions
    #[arg(long)]
    mean_pool_position: bool,
    /// Add the Gaussian as a log-domain mask instead of multiplying scores
    #[arg(long)]
    log_mask: bool,
    /// End pairs with [SEP] instead of a trailing [CLS]
    #[arg(long)]
    single_cls: bool,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => { $(if let Some(v) = self.$field.clone() { c.$field = v; })* };
        }
        set!(window, steps, attention, hidden, layers, max_len, batch_size, max_epochs, patience, seed);
        set!(learning_rate, beta1, beta2, adam_epsilon, weight_decay);
        if let Some(v) = self.mlp_hidden {
            c.mlp_hidden = Some(v);
        }
        for (value, slot) in [
            (&self.vocab, &mut c.vocab),
            (&self.labels, &mut c.labels),
            (&self.train, &mut c.train),
            (&self.valid, &mut c.valid),
            (&self.test, &mut c.test),
        ] {
            if value.is_some() {
                slot.clone_from(value);
            }
        }
        if self.embeddings_file.is_some() {
            c.embeddings_file.clone_from(&self.embeddings_file);
        }
        c.l2_norm_exact |= self.l2_norm_exact;
        c.no_global |= self.no_global;
        c.no_detail |= self.no_detail;
        c.no_gaussian |= self.no_gaussian;
        c.mean_pool_position |= self.mean_pool_position;
        c.log_mask |= self.log_mask;
        c.single_cls |= self.single_cls;
        c.validate()?;
        Ok(c)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn print_json(value: &serde_json::Value) {
    println!("{}", serde_json::to_string_pretty(value).expect("json"));
}

/// Loads the model described by `config` from `checkpoint`, taking vocabulary,
/// label and embedding sizes from the configured files.
fn model_for(
    config: &RunConfig,
    checkpoint: &Path,
    split_path: &Path,
    split_name: &str,
) -> Result<(dganet::model::DgaNet, dganet::numeric::ModelParams, dganet::harness::DatasetSplit)> {
    let vocab = dganet::encoder::Vocabulary::from_file(
        config.vocab.as_deref().ok_or_else(|| Error::Input("vocab is not set".into()))?,
    )?;
    let labels =
        LabelSet::from_file(config.labels.as_deref().ok_or_else(|| Error::Input("labels is not set".into()))?)?;
    let split = load_config_split(config, split_path, split_name, &vocab, &labels)?;
    let (net, params) = load_model(config, vocab.len(), labels.len(), split.external_dim(), checkpoint)?;
    Ok((net, params, split))
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train { run, checkpoint, report, dump_trace: trace } => {
            let config = run.resolve()?;
            let data = load_run_data(&config)?;
            let out = train(&config, &data.splits, data.vocab.len())?;
            save_checkpoint(&out.params, &checkpoint)?;
            if let Some(path) = &report {
                out.report.write(path)?;
            }
            if let Some(path) = &trace {
                dump_trace(&out.net, &out.params, &data.splits.valid, None, path)?;
            }
            print_json(&serde_json::json!({
                "best_epoch": out.report.best_epoch,
                "best_valid_accuracy": out.report.best_valid_accuracy,
                "test_accuracy": out.report.test_accuracy,
                "epochs": out.report.epochs.len(),
                "wall_time_secs": out.report.wall_time_secs,
                "checkpoint": checkpoint,
            }));
            Ok(())
        }
        Command::Eval { run, checkpoint, split } => {
            let config = run.resolve()?;
            let (path, name) = match split {
                Some(p) => (p, "test"),
                None => (
                    config.test.clone().ok_or_else(|| Error::Input("no split given and test is not set".into()))?,
                    "test",
                ),
            };
            let (net, params, split) = model_for(&config, &checkpoint, &path, name)?;
            let e = evaluate(&net, &params, &split)?;
            print_json(&serde_json::json!({
                "accuracy": e.accuracy,
                "correct": e.correct,
                "total": e.total,
                "labels": split.labels.names(),
                "confusion": e.confusion,
            }));
            Ok(())
        }
        Command::Sweep { run, grid_windows, grid_steps, replicates, parallel, output } => {
            let config = run.resolve()?;
            let data = load_run_data(&config)?;
            let grid = SweepGrid { windows: grid_windows, steps: grid_steps, seeds: replicates };
            let rows = sweep(&config, &data.splits, data.vocab.len(), &grid, parallel)?;
            write_csv_file(&rows, &output)?;
            let failed = rows.iter().filter(|r| r.status != "ok").count();
            log::info!("wrote {} rows to {} ({failed} failed)", rows.len(), output.display());
            Ok(())
        }
        Command::GenSynth { task, out, train, valid, test, seed } => {
            let task: Task = task.parse()?;
            let data = generate_synthetic(task, [train, valid, test], seed)?;
            let paths = write_synthetic(&data, &out)?;
            log::info!("wrote {} pairs to {}", train + valid + test, out.display());
            print_json(&serde_json::json!({
                "train": paths.train, "valid": paths.valid, "test": paths.test,
                "labels": paths.labels, "vocab": paths.vocab,
            }));
            Ok(())
        }
        Command::Convert { input, output, columns, skip_header, skip_label, limit, labels_out, vocab_out } => {
            let columns = TsvColumns { sentence_a: columns[0], sentence_b: columns[1], label: columns[2] };
            let summary = convert_tsv(&input, &output, columns, skip_header, &skip_label, limit)?;
            if let Some(path) = &labels_out {
                LabelSet::new(summary.labels.clone())?.write(path)?;
            }
            if let Some(path) = &vocab_out {
                build_vocabulary(&read_jsonl(&output)?).write(path)?;
            }
            print_json(&serde_json::json!({
                "written": summary.written, "skipped": summary.skipped, "labels": summary.labels,
            }));
            Ok(())
        }
        Command::DumpTrace { run, checkpoint, split, output, limit } => {
            let config = run.resolve()?;
            let (path, name) = match split {
                Some(p) => (p, "valid"),
                None => (
                    config.valid.clone().ok_or_else(|| Error::Input("no split given and valid is not set".into()))?,
                    "valid",
                ),
            };
            let (net, params, split) = model_for(&config, &checkpoint, &path, name)?;
            let n = dump_trace(&net, &params, &split, limit, &output)?;
            log::info!("wrote {n} trace records to {}", output.display());
            Ok(())
        }
    }
}
