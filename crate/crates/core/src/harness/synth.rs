//! Synthetic sentence-pair tasks.
//!
//! `shared-window`: five-token sentences, each with the trigger noun and a
//! colour next to it. Half of all sentences also carry the other colour at
//! least three tokens from the trigger. A pair is positive iff both
//! sentences share a trigger and a modifier within two tokens of it, so a
//! negative is the same object with a different local colour, and the
//! second sentence's distant colour (when present) is the first sentence's
//! local one. Bag-of-words overlap gets about 73%; the rest needs the local
//! context of the trigger.
//!
//! `keyword-overlap`: sentences are sets of content words; a pair is
//! positive iff they share at least [`OVERLAP_THRESHOLD`] words. Word order
//! and locality carry no signal.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::dataset::{split_from_pairs, write_jsonl, DatasetPaths, LabelSet, LabeledPair};
use super::train::Splits;
use crate::encoder::{TokenizeOptions, Vocabulary};
use crate::error::{Error, Result};
use crate::numeric::rng::{stream, DATA_STREAMS};

pub const TRIGGERS: [&str; 1] = ["shirt"];
pub const MODIFIERS: [&str; 2] = ["purple", "blue"];
pub const FILLERS: [&str; 12] =
    ["the", "a", "woman", "man", "with", "near", "sits", "walks", "old", "young", "street", "park"];
/// Max distance between a trigger and a modifier that counts as local.
pub const WINDOW: usize = 2;
pub const SENTENCE_LEN: usize = 5;
/// Share of sentences carrying a distant colour.
pub const DECOY_RATE: f64 = 0.5;

pub const KEYWORDS: [&str; 24] = [
    "river", "stone", "cloud", "piano", "lemon", "tiger", "candle", "garden", "rocket", "violin", "desert", "harbor",
    "pepper", "marble", "forest", "copper", "winter", "saddle", "anchor", "meadow", "falcon", "basket", "summit",
    "lantern",
];
pub const KEYWORD_COUNT: usize = 5;
pub const OVERLAP_THRESHOLD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    SharedWindow,
    KeywordOverlap,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::SharedWindow => "shared-window",
            Task::KeywordOverlap => "keyword-overlap",
        }
    }

    /// Ground-truth rule for a pair of sentences.
    pub fn label(self, a: &str, b: &str) -> usize {
        match self {
            Task::SharedWindow => shared_window_label(a, b),
            Task::KeywordOverlap => keyword_overlap_label(a, b),
        }
    }
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "shared-window" => Ok(Task::SharedWindow),
            "keyword-overlap" => Ok(Task::KeywordOverlap),
            other => Err(Error::Input(format!(
                "unknown synthetic task {other:?} (expected shared-window or keyword-overlap)"
            ))),
        }
    }
}

fn is_trigger(w: &str) -> bool {
    TRIGGERS.contains(&w)
}

fn is_modifier(w: &str) -> bool {
    MODIFIERS.contains(&w)
}

/// `(trigger, modifier)` pairs with the modifier within [`WINDOW`] tokens.
pub fn local_attributes(sentence: &str) -> HashSet<(String, String)> {
    let words: Vec<&str> = sentence.split_whitespace().collect();
    let mut out = HashSet::new();
    for (i, w) in words.iter().enumerate() {
        if !is_trigger(w) {
            continue;
        }
        let lo = i.saturating_sub(WINDOW);
        let hi = (i + WINDOW).min(words.len() - 1);
        for m in &words[lo..=hi] {
            if is_modifier(m) {
                out.insert((w.to_string(), m.to_string()));
            }
        }
    }
    out
}

pub fn shared_window_label(a: &str, b: &str) -> usize {
    let la = local_attributes(a);
    let lb = local_attributes(b);
    la.intersection(&lb).next().is_some() as usize
}

pub fn keyword_overlap_label(a: &str, b: &str) -> usize {
    let sa: HashSet<&str> = a.split_whitespace().collect();
    let sb: HashSet<&str> = b.split_whitespace().collect();
    (sa.intersection(&sb).count() >= OVERLAP_THRESHOLD) as usize
}

/// Builds a [`SENTENCE_LEN`]-token sentence with `near` adjacent to
/// `trigger` and, with probability [`DECOY_RATE`], `far` more than
/// [`WINDOW`] tokens from it.
fn window_sentence(rng: &mut ChaCha8Rng, trigger: &str, near: &str, far: &str) -> String {
    let mut words: Vec<&str> = (0..SENTENCE_LEN).map(|_| *FILLERS.choose(rng).unwrap()).collect();
    // Only positions with room for a distant slot.
    let slots: Vec<usize> =
        (1..SENTENCE_LEN - 1).filter(|&t| (0..SENTENCE_LEN).any(|i| i.abs_diff(t) > WINDOW)).collect();
    let t = *slots.choose(rng).unwrap();
    let n = if rng.gen_bool(0.5) { t - 1 } else { t + 1 };
    words[t] = trigger;
    words[n] = near;
    if rng.gen_bool(DECOY_RATE) {
        let distant: Vec<usize> = (0..SENTENCE_LEN).filter(|&i| i.abs_diff(t) > WINDOW).collect();
        words[*distant.choose(rng).unwrap()] = far;
    }
    words.join(" ")
}

fn other<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], not: &[&str]) -> &'a str {
    let choices: Vec<&str> = pool.iter().copied().filter(|w| !not.contains(w)).collect();
    choices.choose(rng).unwrap()
}

fn shared_window_pair(rng: &mut ChaCha8Rng, label: usize) -> (String, String) {
    let trigger = *TRIGGERS.choose(rng).unwrap();
    let near_a = *MODIFIERS.choose(rng).unwrap();
    let far_a = other(rng, &MODIFIERS, &[near_a]);
    let a = window_sentence(rng, trigger, near_a, far_a);
    let (near_b, far_b) = if label == 1 {
        (near_a, other(rng, &MODIFIERS, &[near_a]))
    } else {
        (other(rng, &MODIFIERS, &[near_a]), near_a)
    };
    (a, window_sentence(rng, trigger, near_b, far_b))
}

fn keyword_overlap_pair(rng: &mut ChaCha8Rng, label: usize) -> (String, String) {
    let mut pool = KEYWORDS.to_vec();
    pool.shuffle(rng);
    let a: Vec<&str> = pool[..KEYWORD_COUNT].to_vec();
    let shared =
        if label == 1 { rng.gen_range(OVERLAP_THRESHOLD..=KEYWORD_COUNT) } else { rng.gen_range(0..OVERLAP_THRESHOLD) };
    let mut b: Vec<&str> = a[..shared].to_vec();
    b.extend_from_slice(&pool[KEYWORD_COUNT..KEYWORD_COUNT + KEYWORD_COUNT - shared]);
    b.shuffle(rng);
    (a.join(" "), b.join(" "))
}

/// Generated splits plus the label set and vocabulary covering them.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub train: Vec<LabeledPair>,
    pub valid: Vec<LabeledPair>,
    pub test: Vec<LabeledPair>,
    pub labels: LabelSet,
    pub vocab: Vocabulary,
}

/// Generates balanced, pairwise-distinct train/valid/test splits. Labels are
/// assigned by the task rule, never by construction intent.
pub fn generate_synthetic(task: Task, sizes: [usize; 3], seed: u64) -> Result<SyntheticData> {
    let total: usize = sizes.iter().sum();
    if total == 0 {
        return Err(Error::Input("synthetic split sizes are all zero".into()));
    }
    let mut rng = stream(seed, DATA_STREAMS + task as u64);
    let mut seen = HashSet::new();
    let mut splits: Vec<Vec<LabeledPair>> = Vec::with_capacity(3);
    let mut attempts = 0usize;
    for &n in &sizes {
        let mut split = Vec::with_capacity(n);
        for i in 0..n {
            let want = i % 2;
            loop {
                attempts += 1;
                if attempts > 100 * total + 1000 {
                    return Err(Error::Input(format!("could not generate {total} distinct {} pairs", task.name())));
                }
                let (a, b) = match task {
                    Task::SharedWindow => shared_window_pair(&mut rng, want),
                    Task::KeywordOverlap => keyword_overlap_pair(&mut rng, want),
                };
                if task.label(&a, &b) != want || !seen.insert((a.clone(), b.clone())) {
                    continue;
                }
                split.push(LabeledPair { sentence_a: a, sentence_b: b, label: want.to_string() });
                break;
            }
        }
        split.shuffle(&mut rng);
        splits.push(split);
    }
    let test = splits.pop().unwrap();
    let valid = splits.pop().unwrap();
    let train = splits.pop().unwrap();
    // Fixed lexicon order, so vocabularies agree across seeds and sizes.
    let vocab = match task {
        Task::SharedWindow => Vocabulary::build(TRIGGERS.iter().chain(&MODIFIERS).chain(&FILLERS)),
        Task::KeywordOverlap => Vocabulary::build(KEYWORDS),
    };
    Ok(SyntheticData { train, valid, test, labels: LabelSet::new(["0", "1"])?, vocab })
}

impl SyntheticData {
    /// Tokenized splits ready for training. An empty test split is omitted.
    pub fn splits(&self, options: TokenizeOptions) -> Result<Splits> {
        let make = |name, pairs| split_from_pairs(name, pairs, &self.vocab, &self.labels, options);
        Ok(Splits {
            train: make("train", &self.train)?,
            valid: make("valid", &self.valid)?,
            test: if self.test.is_empty() { None } else { Some(make("test", &self.test)?) },
        })
    }
}

/// Writes `train.jsonl`, `valid.jsonl`, `test.jsonl`, `labels.txt` and
/// `vocab.txt` into `dir`.
pub fn write_synthetic(data: &SyntheticData, dir: &Path) -> Result<DatasetPaths> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let paths = DatasetPaths::in_dir(dir);
    write_jsonl(&paths.train, &data.train)?;
    write_jsonl(&paths.valid, &data.valid)?;
    write_jsonl(&paths.test, &data.test)?;
    data.labels.write(&paths.labels)?;
    data.vocab.write(&paths.vocab)?;
    Ok(paths)
}
