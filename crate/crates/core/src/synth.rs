//! Synthetic slot-filling corpus with long-range dependencies.
//!
//! Each sentence is filler words plus, for every channel `c`, one trigger word
//! `k{c}_{j}` and, `distance` positions later, a query word `q{c}`. The query is
//! labelled `B-v{(j + c) mod label_count}`; every other position is `O`. The label
//! of a query is therefore a function of the most recent trigger of its channel.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::data::{Corpus, TaggedSequence, Vocab};
use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    /// Number of distinct filler words.
    pub vocab_size: usize,
    /// Number of distinct slot labels (excluding `O`).
    pub label_count: usize,
    /// Trigger/query pairs per sentence.
    pub channels: usize,
    pub triggers_per_channel: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub min_distance: usize,
    pub max_distance: usize,
    pub train_size: usize,
    pub test_size: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 20150901,
            vocab_size: 40,
            label_count: 4,
            channels: 3,
            triggers_per_channel: 4,
            min_len: 16,
            max_len: 22,
            min_distance: 8,
            max_distance: 12,
            train_size: 2000,
            test_size: 400,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.vocab_size == 0 || self.label_count == 0 || self.channels == 0 || self.triggers_per_channel == 0 {
            return bad("synthetic vocabulary, label, channel and trigger counts must be positive".into());
        }
        if self.min_len > self.max_len || self.min_distance > self.max_distance || self.min_distance == 0 {
            return bad(format!(
                "synthetic ranges must be ordered and distances positive: len {}..{}, distance {}..{}",
                self.min_len, self.max_len, self.min_distance, self.max_distance
            ));
        }
        if self.max_distance >= self.min_len {
            return bad(format!(
                "max distance {} must be below the minimum sentence length {}",
                self.max_distance, self.min_len
            ));
        }
        if 2 * self.channels > self.min_len {
            return bad(format!("{} channels do not fit in sentences of length {}", self.channels, self.min_len));
        }
        if self.train_size == 0 {
            return bad("synthetic training set must be nonempty".into());
        }
        Ok(())
    }

    pub fn filler(i: usize) -> String {
        format!("w{i}")
    }

    pub fn trigger(channel: usize, j: usize) -> String {
        format!("k{channel}_{j}")
    }

    pub fn query(channel: usize) -> String {
        format!("q{channel}")
    }

    pub fn slot_label(&self, channel: usize, trigger: usize) -> String {
        format!("B-v{}", (trigger + channel) % self.label_count)
    }

    fn vocabularies(&self) -> (Vocab, Vocab) {
        let mut words = Vocab::with_specials();
        for i in 0..self.vocab_size {
            words.insert(&Self::filler(i));
        }
        for c in 0..self.channels {
            for j in 0..self.triggers_per_channel {
                words.insert(&Self::trigger(c, j));
            }
            words.insert(&Self::query(c));
        }
        let mut labels = Vocab::new();
        labels.insert("O");
        for l in 0..self.label_count {
            labels.insert(&format!("B-v{l}"));
        }
        (words, labels)
    }
}

/// Deterministic train/test corpora sharing one vocabulary. No test sentence repeats a training sentence.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<(Corpus, Corpus)> {
    cfg.validate()?;
    let (words, labels) = cfg.vocabularies();
    let root = Rng::new(cfg.seed);
    let mut train_rng = root.fork(1);
    let mut test_rng = root.fork(2);
    let mut seen = HashSet::new();
    let mut train = Vec::with_capacity(cfg.train_size);
    for _ in 0..cfg.train_size {
        let s = sentence(cfg, &words, &labels, &mut train_rng);
        seen.insert(s.raw_tokens.clone());
        train.push(s);
    }
    let mut test = Vec::with_capacity(cfg.test_size);
    while test.len() < cfg.test_size {
        let s = sentence(cfg, &words, &labels, &mut test_rng);
        if !seen.contains(&s.raw_tokens) {
            test.push(s);
        }
    }
    let corpus = |sequences| Corpus {
        sequences,
        words: words.clone(),
        labels: labels.clone(),
    };
    Ok((corpus(train), corpus(test)))
}

fn sentence(cfg: &SynthConfig, words: &Vocab, labels: &Vocab, rng: &mut Rng) -> TaggedSequence {
    loop {
        let len = rng.range_inclusive(cfg.min_len, cfg.max_len);
        let mut tokens: Vec<Option<String>> = vec![None; len];
        let mut tags: Vec<String> = vec!["O".to_string(); len];
        let mut order: Vec<usize> = (0..cfg.channels).collect();
        rng.shuffle(&mut order);
        let mut placed = true;
        for &c in &order {
            let mut ok = false;
            for _ in 0..50 {
                let d = rng.range_inclusive(cfg.min_distance, cfg.max_distance);
                let start = rng.below(len - d);
                if tokens[start].is_none() && tokens[start + d].is_none() {
                    let j = rng.below(cfg.triggers_per_channel);
                    tokens[start] = Some(SynthConfig::trigger(c, j));
                    tokens[start + d] = Some(SynthConfig::query(c));
                    tags[start + d] = cfg.slot_label(c, j);
                    ok = true;
                    break;
                }
            }
            if !ok {
                placed = false;
                break;
            }
        }
        if !placed {
            continue;
        }
        let raw_tokens: Vec<String> = tokens
            .into_iter()
            .map(|t| t.unwrap_or_else(|| SynthConfig::filler(rng.below(cfg.vocab_size))))
            .collect();
        return TaggedSequence {
            words: raw_tokens.iter().map(|t| words.get(t).expect("synthetic token in vocab")).collect(),
            labels: tags.iter().map(|l| labels.get(l).expect("synthetic label in vocab")).collect(),
            raw_tokens,
            raw_labels: tags,
        };
    }
}
