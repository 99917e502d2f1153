//! Vocabularies, tagged sentences and the two-column CoNLL format.
//!
//! Input files hold one `token<TAB or spaces>label` pair per line with a blank
//! line between sentences. Extra columns are ignored, so prediction files
//! (`token gold predicted`) load back with their gold labels.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAD_TOKEN: &str = "<pad>";
pub const UNK_TOKEN: &str = "<unk>";
pub const PAD: usize = 0;
pub const UNK: usize = 1;

/// Labels treated as "no slot".
pub const NULL_LABELS: [&str; 2] = ["O", "-"];

/// Insertion-ordered string interner.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    items: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocab {
    fn from(items: Vec<String>) -> Self {
        let index = items.iter().enumerate().map(|(i, s)| (s.clone(), i)).collect();
        Vocab { items, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.items
    }
}

impl Vocab {
    pub fn new() -> Self {
        Vocab::default()
    }

    /// Word vocabulary starting with the padding and unknown tokens.
    pub fn with_specials() -> Self {
        let mut v = Vocab::new();
        v.insert(PAD_TOKEN);
        v.insert(UNK_TOKEN);
        v
    }

    pub fn insert(&mut self, item: &str) -> usize {
        if let Some(&i) = self.index.get(item) {
            return i;
        }
        let i = self.items.len();
        self.items.push(item.to_string());
        self.index.insert(item.to_string(), i);
        i
    }

    pub fn get(&self, item: &str) -> Option<usize> {
        self.index.get(item).copied()
    }

    pub fn item(&self, i: usize) -> &str {
        &self.items[i]
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Index of the first null label present, if any.
    pub fn null_label(&self) -> Option<usize> {
        NULL_LABELS.iter().find_map(|l| self.get(l))
    }
}

/// One sentence with aligned word and label indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaggedSequence {
    pub words: Vec<usize>,
    pub labels: Vec<usize>,
    pub raw_tokens: Vec<String>,
    /// Label strings as read; differ from `labels` only for labels unknown to a reused vocabulary.
    pub raw_labels: Vec<String>,
}

impl TaggedSequence {
    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Corpus {
    pub sequences: Vec<TaggedSequence>,
    pub words: Vocab,
    pub labels: Vocab,
}

impl Corpus {
    pub fn token_count(&self) -> usize {
        self.sequences.iter().map(|s| s.len()).sum()
    }

    pub fn label_strings(&self) -> Vec<Vec<String>> {
        self.sequences.iter().map(|s| s.raw_labels.clone()).collect()
    }

    /// Word indices that occur exactly once.
    pub fn singletons(&self) -> Vec<bool> {
        let mut counts = vec![0usize; self.words.len()];
        for s in &self.sequences {
            for &w in &s.words {
                counts[w] += 1;
            }
        }
        counts.into_iter().map(|c| c == 1).collect()
    }

    /// Human-readable counts: sentences, tokens, vocabulary and label inventory.
    pub fn stats(&self) -> CorpusStats {
        let null = self.labels.null_label();
        let tokens = self.token_count();
        let null_tokens = self
            .sequences
            .iter()
            .flat_map(|s| &s.labels)
            .filter(|&&l| Some(l) == null)
            .count();
        CorpusStats {
            sentences: self.sequences.len(),
            tokens,
            vocabulary: self.words.len(),
            labels: self.labels.len(),
            null_fraction: if tokens == 0 { 0.0 } else { null_tokens as f64 / tokens as f64 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorpusStats {
    pub sentences: usize,
    pub tokens: usize,
    pub vocabulary: usize,
    pub labels: usize,
    pub null_fraction: f64,
}

/// How `load_conll` maps strings to indices.
#[derive(Clone, Debug)]
pub enum VocabMode {
    /// Build fresh vocabularies from this file (training data).
    Build,
    /// Map through existing vocabularies; unknown words become UNK and unknown
    /// labels map to the null label while keeping their string in `raw_labels`.
    Reuse { words: Vocab, labels: Vocab },
}

pub fn load_conll(path: impl AsRef<Path>, mode: VocabMode) -> Result<Corpus> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_conll(&text, &path.display().to_string(), mode)
}

pub fn parse_conll(text: &str, source: &str, mode: VocabMode) -> Result<Corpus> {
    let (mut words, mut labels, build) = match mode {
        VocabMode::Build => (Vocab::with_specials(), Vocab::new(), true),
        VocabMode::Reuse { words, labels } => (words, labels, false),
    };
    let null = labels.null_label();
    let mut sequences = Vec::new();
    let mut current = TaggedSequence {
        words: vec![],
        labels: vec![],
        raw_tokens: vec![],
        raw_labels: vec![],
    };
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: source.to_string(),
        line,
        msg,
    };
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let mut fields = line.split_whitespace();
        let Some(token) = fields.next() else {
            if !current.is_empty() {
                sequences.push(std::mem::replace(
                    &mut current,
                    TaggedSequence {
                        words: vec![],
                        labels: vec![],
                        raw_tokens: vec![],
                        raw_labels: vec![],
                    },
                ));
            }
            continue;
        };
        let label = fields
            .next()
            .ok_or_else(|| parse_err(line_no, format!("expected 'token label', found '{line}'")))?;
        let (w, l) = if build {
            (words.insert(token), labels.insert(label))
        } else {
            let w = words.get(token).unwrap_or(UNK);
            let l = match labels.get(label).or(null) {
                Some(l) => l,
                None => return Err(parse_err(line_no, format!("label '{label}' not in the model's label set"))),
            };
            (w, l)
        };
        current.words.push(w);
        current.labels.push(l);
        current.raw_tokens.push(token.to_string());
        current.raw_labels.push(label.to_string());
    }
    if !current.is_empty() {
        sequences.push(current);
    }
    if sequences.is_empty() {
        return Err(parse_err(0, "no sentences found".into()));
    }
    Ok(Corpus {
        sequences,
        words,
        labels,
    })
}

/// Writes `token<TAB>label` lines with a blank line after every sentence.
pub fn write_conll(path: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_conll(corpus)).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn format_conll(corpus: &Corpus) -> String {
    let mut out = String::new();
    for s in &corpus.sequences {
        for (t, l) in s.raw_tokens.iter().zip(&s.raw_labels) {
            out.push_str(t);
            out.push('\t');
            out.push_str(l);
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

/// Three-column `token<TAB>gold<TAB>predicted` output.
pub fn write_predictions(
    path: impl AsRef<Path>,
    sequences: &[TaggedSequence],
    predicted: &[Vec<String>],
) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(format!("writing {}", path.display()), e);
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    for (s, p) in sequences.iter().zip(predicted) {
        for ((t, g), q) in s.raw_tokens.iter().zip(&s.raw_labels).zip(p) {
            writeln!(f, "{t}\t{g}\t{q}").map_err(io)?;
        }
        writeln!(f).map_err(io)?;
    }
    f.flush().map_err(io)
}
