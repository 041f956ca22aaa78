use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::train::Splits;
use crate::encoder::{read_embeddings, tokenize_pair, EncoderInput, TokenizeOptions, TokenizedPair, Vocabulary};
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Fraction of malformed lines tolerated before a file is rejected.
pub const MALFORMED_CAP: f64 = 0.01;

/// One input record.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub sentence_a: String,
    pub sentence_b: String,
    pub label: String,
}

/// Ordered class names; class index = position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl LabelSet {
    pub fn new<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut index = HashMap::new();
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(Error::Input("empty label name".into()));
            }
            if index.insert(l.clone(), i).is_some() {
                return Err(Error::Input(format!("duplicate label {l:?}")));
            }
        }
        if labels.len() < 2 {
            return Err(Error::Input("a label set needs at least two labels".into()));
        }
        Ok(Self { labels, index })
    }

    /// Header file: one label per line, blank lines ignored.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let labels = text.lines().map(str::trim).filter(|l| !l.is_empty());
        Self::new(labels).map_err(|e| Error::format(path, e.to_string()))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.labels.join("\n");
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn name(&self, index: usize) -> &str {
        &self.labels[index]
    }

    pub fn names(&self) -> &[String] {
        &self.labels
    }
}

#[derive(Debug, Clone)]
pub struct Example {
    pub pair: LabeledPair,
    pub tokens: TokenizedPair,
    pub label: usize,
    /// Precomputed `l_ab × dim` token vectors, when external embeddings are used.
    pub external: Option<Matrix>,
}

impl Example {
    pub fn input(&self) -> EncoderInput<'_> {
        match &self.external {
            Some(m) => EncoderInput::External(m),
            None => EncoderInput::Tokens(&self.tokens.ids),
        }
    }
}

#[derive(Debug, Clone)]
pub struct DatasetSplit {
    pub name: String,
    pub labels: LabelSet,
    pub examples: Vec<Example>,
    /// Lines skipped as malformed.
    pub malformed: usize,
}

impl DatasetSplit {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn inputs(&self) -> Vec<(EncoderInput<'_>, usize)> {
        self.examples.iter().map(|e| (e.input(), e.label)).collect()
    }

    pub fn external_dim(&self) -> Option<usize> {
        self.examples.first().and_then(|e| e.external.as_ref().map(Matrix::cols))
    }

    /// Splits a concatenated embedding matrix (pairs in record order) across
    /// the examples by their token counts.
    pub fn attach_embeddings(&mut self, vectors: &Matrix, path: &Path) -> Result<()> {
        let total: usize = self.examples.iter().map(|e| e.tokens.len()).sum();
        if vectors.rows() != total {
            return Err(Error::format(
                path,
                format!("{} token vectors for {} tokens in split {}", vectors.rows(), total, self.name),
            ));
        }
        let dim = vectors.cols();
        let mut offset = 0;
        for e in &mut self.examples {
            let len = e.tokens.len();
            let slice = vectors.as_slice()[offset * dim..(offset + len) * dim].to_vec();
            e.external = Some(Matrix::from_vec(len, dim, slice));
            offset += len;
        }
        Ok(())
    }

    pub fn load_embeddings(&mut self, path: &Path) -> Result<()> {
        let vectors = read_embeddings(path)?;
        self.attach_embeddings(&vectors, path)
    }
}

fn split_name(path: &Path) -> String {
    path.file_stem().and_then(|s| s.to_str()).unwrap_or("split").to_string()
}

/// Reads a line-delimited JSON dataset. Lines that do not parse as a
/// `{sentence_a, sentence_b, label}` record, or whose sentences are empty,
/// are skipped and counted; more than 1% of them is a format error. A label
/// outside `labels` is always a format error.
pub fn load_dataset(
    path: &Path,
    vocab: &Vocabulary,
    labels: &LabelSet,
    options: TokenizeOptions,
) -> Result<DatasetSplit> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut examples = Vec::new();
    let mut malformed = 0usize;
    let mut lines = 0usize;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        lines += 1;
        let pair: LabeledPair = match serde_json::from_str(&line) {
            Ok(p) => p,
            Err(e) => {
                log::debug!("{}:{}: skipping malformed record: {e}", path.display(), n + 1);
                malformed += 1;
                continue;
            }
        };
        let Some(label) = labels.index(&pair.label) else {
            return Err(Error::format(path, format!("line {}: unknown label {:?}", n + 1, pair.label)));
        };
        match tokenize_pair(&pair.sentence_a, &pair.sentence_b, vocab, options) {
            Ok(tokens) => examples.push(Example { tokens: tokens.with_label(label), pair, label, external: None }),
            Err(Error::Input(m)) => {
                log::debug!("{}:{}: skipping record: {m}", path.display(), n + 1);
                malformed += 1;
            }
            Err(e) => return Err(e),
        }
    }
    if malformed as f64 > MALFORMED_CAP * lines as f64 {
        return Err(Error::format(path, format!("{malformed} of {lines} records are malformed (cap is 1%)")));
    }
    if malformed > 0 {
        log::warn!("{}: skipped {malformed} malformed records", path.display());
    }
    if examples.is_empty() {
        return Err(Error::format(path, "dataset has no records"));
    }
    Ok(DatasetSplit { name: split_name(path), labels: labels.clone(), examples, malformed })
}

/// Tokenizes in-memory pairs into a split. Unlike [`load_dataset`] every pair
/// must be well formed.
pub fn split_from_pairs(
    name: &str,
    pairs: &[LabeledPair],
    vocab: &Vocabulary,
    labels: &LabelSet,
    options: TokenizeOptions,
) -> Result<DatasetSplit> {
    if pairs.is_empty() {
        return Err(Error::Input(format!("{name} split is empty")));
    }
    let examples = pairs
        .iter()
        .map(|pair| {
            let label =
                labels.index(&pair.label).ok_or_else(|| Error::Input(format!("unknown label {:?}", pair.label)))?;
            let tokens = tokenize_pair(&pair.sentence_a, &pair.sentence_b, vocab, options)?;
            Ok(Example { tokens: tokens.with_label(label), pair: pair.clone(), label, external: None })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DatasetSplit { name: name.to_string(), labels: labels.clone(), examples, malformed: 0 })
}

pub fn write_jsonl(path: &Path, pairs: &[LabeledPair]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for p in pairs {
        serde_json::to_writer(&mut w, p).map_err(|e| Error::io(path, e.into()))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Column layout of a tab-separated pair file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TsvColumns {
    pub sentence_a: usize,
    pub sentence_b: usize,
    pub label: usize,
}

impl Default for TsvColumns {
    fn default() -> Self {
        Self { sentence_a: 0, sentence_b: 1, label: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvertSummary {
    pub written: usize,
    pub skipped: usize,
    /// Labels in first-seen order.
    pub labels: Vec<String>,
}

/// Converts a tab-separated pair file (SNLI/SICK/Quora/MSRP style) to the
/// line-delimited JSON format. Rows with too few columns, empty sentences,
/// or a label in `skip_labels` (e.g. SNLI's `-`) are skipped.
pub fn convert_tsv(
    input: &Path,
    output: &Path,
    columns: TsvColumns,
    skip_header: bool,
    skip_labels: &[String],
    limit: Option<usize>,
) -> Result<ConvertSummary> {
    let file = File::open(input).map_err(|e| Error::io(input, e))?;
    let mut pairs = Vec::new();
    let mut skipped = 0;
    let mut labels: Vec<String> = Vec::new();
    let need = columns.sentence_a.max(columns.sentence_b).max(columns.label) + 1;
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(input, e))?;
        if (skip_header && n == 0) || line.trim().is_empty() {
            continue;
        }
        if limit.is_some_and(|l| pairs.len() >= l) {
            break;
        }
        let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if fields.len() < need {
            skipped += 1;
            continue;
        }
        let (a, b, label) =
            (fields[columns.sentence_a].trim(), fields[columns.sentence_b].trim(), fields[columns.label].trim());
        if a.is_empty() || b.is_empty() || label.is_empty() || skip_labels.iter().any(|s| s == label) {
            skipped += 1;
            continue;
        }
        if !labels.iter().any(|l| l == label) {
            labels.push(label.to_string());
        }
        pairs.push(LabeledPair { sentence_a: a.into(), sentence_b: b.into(), label: label.into() });
    }
    write_jsonl(output, &pairs)?;
    Ok(ConvertSummary { written: pairs.len(), skipped, labels })
}

/// Vocabulary over every lowercased whitespace token of `pairs`.
pub fn build_vocabulary(pairs: &[LabeledPair]) -> Vocabulary {
    let mut words: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for p in pairs {
        for w in crate::encoder::words(&p.sentence_a).into_iter().chain(crate::encoder::words(&p.sentence_b)) {
            if seen.insert(w.clone()) {
                words.push(w);
            }
        }
    }
    Vocabulary::build(words)
}

pub fn read_jsonl(path: &Path) -> Result<Vec<LabeledPair>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::format(path, format!("line {}: {e}", n + 1)))?);
    }
    Ok(out)
}

/// Paths of a dataset directory laid out as written by the generators.
#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub train: PathBuf,
    pub valid: PathBuf,
    pub test: PathBuf,
    pub labels: PathBuf,
    pub vocab: PathBuf,
}

impl DatasetPaths {
    pub fn in_dir(dir: &Path) -> Self {
        Self {
            train: dir.join("train.jsonl"),
            valid: dir.join("valid.jsonl"),
            test: dir.join("test.jsonl"),
            labels: dir.join("labels.txt"),
            vocab: dir.join("vocab.txt"),
        }
    }
}

/// Vocabulary, label set and splits named by a run configuration.
#[derive(Debug, Clone)]
pub struct RunData {
    pub vocab: Vocabulary,
    pub labels: LabelSet,
    pub splits: Splits,
}

fn required<'a>(path: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    path.as_deref().ok_or_else(|| Error::Input(format!("{key} is not set")))
}

/// Loads one split and, when `embeddings-file` is set, its token vectors.
pub fn load_config_split(
    config: &RunConfig,
    path: &Path,
    name: &str,
    vocab: &Vocabulary,
    labels: &LabelSet,
) -> Result<DatasetSplit> {
    let mut split = load_dataset(path, vocab, labels, config.tokenize_options())?;
    split.name = name.to_string();
    if let Some(emb) = config.embeddings_for(name) {
        split.load_embeddings(&emb)?;
    }
    Ok(split)
}

/// Reads `vocab`, `labels`, `train`, `valid` and (if set) `test`.
pub fn load_run_data(config: &RunConfig) -> Result<RunData> {
    let vocab = Vocabulary::from_file(required(&config.vocab, "vocab")?)?;
    let labels = LabelSet::from_file(required(&config.labels, "labels")?)?;
    let load = |path: &Path, name| load_config_split(config, path, name, &vocab, &labels);
    let train = load(required(&config.train, "train")?, "train")?;
    let valid = load(required(&config.valid, "valid")?, "valid")?;
    let test = config.test.as_deref().map(|p| load(p, "test")).transpose()?;
    if train.external_dim() != valid.external_dim()
        || test.as_ref().is_some_and(|t| t.external_dim() != train.external_dim())
    {
        return Err(Error::Input("embedding dimensions differ between splits".into()));
    }
    Ok(RunData { vocab, labels, splits: Splits { train, valid, test } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn setup() -> (tempfile::TempDir, Vocabulary, LabelSet) {
        let dir = tempfile::tempdir().unwrap();
        let vocab = Vocabulary::build(["a", "man", "sleeps", "woman", "runs"]);
        let labels = LabelSet::new(["entailment", "neutral", "contradiction"]).unwrap();
        (dir, vocab, labels)
    }

    fn record(label: &str) -> String {
        format!("{{\"sentence_a\":\"a man sleeps\",\"sentence_b\":\"a woman runs\",\"label\":\"{label}\"}}\n")
    }

    #[test]
    fn loads_valid_records() {
        let (dir, vocab, labels) = setup();
        let path = dir.path().join("train.jsonl");
        fs::write(&path, record("neutral") + &record("contradiction")).unwrap();
        let split = load_dataset(&path, &vocab, &labels, TokenizeOptions::default()).unwrap();
        assert_eq!(split.len(), 2);
        assert_eq!(split.name, "train");
        assert_eq!(split.examples[1].label, 2);
        assert_eq!(split.malformed, 0);
    }

    #[test]
    fn record_without_label_is_skipped_and_counted() {
        let (dir, vocab, labels) = setup();
        let path = dir.path().join("train.jsonl");
        let mut f = File::create(&path).unwrap();
        for _ in 0..150 {
            f.write_all(record("neutral").as_bytes()).unwrap();
        }
        f.write_all(b"{\"sentence_a\":\"a man\",\"sentence_b\":\"a woman\"}\n").unwrap();
        drop(f);
        let split = load_dataset(&path, &vocab, &labels, TokenizeOptions::default()).unwrap();
        assert_eq!(split.malformed, 1);
        assert_eq!(split.len(), 150);
    }

    #[test]
    fn too_many_malformed_lines_is_an_error() {
        let (dir, vocab, labels) = setup();
        let path = dir.path().join("train.jsonl");
        fs::write(&path, record("neutral") + "not json\n").unwrap();
        let err = load_dataset(&path, &vocab, &labels, TokenizeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
    }

    #[test]
    fn unknown_label_is_named() {
        let (dir, vocab, labels) = setup();
        let path = dir.path().join("train.jsonl");
        fs::write(&path, record("neutral") + &record("hidden")).unwrap();
        let err = load_dataset(&path, &vocab, &labels, TokenizeOptions::default()).unwrap_err();
        assert!(err.to_string().contains("\"hidden\""), "{err}");
    }

    #[test]
    fn tsv_conversion() {
        let (dir, _, _) = setup();
        let input = dir.path().join("pairs.tsv");
        fs::write(&input, "id\ts1\ts2\tgold\n1\tA man\tA woman\tneutral\n2\tshort\n3\tx\ty\t-\n4\tp\tq\tentailment\n")
            .unwrap();
        let out = dir.path().join("pairs.jsonl");
        let cols = TsvColumns { sentence_a: 1, sentence_b: 2, label: 3 };
        let summary = convert_tsv(&input, &out, cols, true, &["-".to_string()], None).unwrap();
        assert_eq!(summary.written, 2);
        assert_eq!(summary.skipped, 2);
        assert_eq!(summary.labels, vec!["neutral", "entailment"]);
        let pairs = read_jsonl(&out).unwrap();
        assert_eq!(pairs[0].sentence_a, "A man");
    }

    #[test]
    fn embeddings_are_split_by_pair_length() {
        let (dir, vocab, labels) = setup();
        let path = dir.path().join("test.jsonl");
        fs::write(&path, record("neutral") + &record("neutral")).unwrap();
        let mut split = load_dataset(&path, &vocab, &labels, TokenizeOptions::default()).unwrap();
        let total = split.examples.iter().map(|e| e.tokens.len()).sum::<usize>();
        let m = Matrix::from_vec(total, 2, (0..total * 2).map(|i| i as crate::numeric::Real).collect());
        split.attach_embeddings(&m, &path).unwrap();
        assert_eq!(split.examples[1].external.as_ref().unwrap().get(0, 0), 18.0);
        assert_eq!(split.external_dim(), Some(2));
        let short = Matrix::zeros(total - 1, 2);
        assert!(split.attach_embeddings(&short, &path).is_err());
    }
}
