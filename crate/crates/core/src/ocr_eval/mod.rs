//! Character- and word-level OCR evaluation.
//!
//! Corpus figures are micro-averaged: edit operations and reference lengths
//! are summed over documents before dividing. When normalization is
//! requested, both raw and canonicalized figures are reported and labelled.

mod align;
mod taxonomy;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use align::{align, align_chars, edit_distance, Alignment, EditCounts, EditKind, EditOp};
pub use taxonomy::{
    build_confusion, classify_substitution, classify_with, ConfusionEntry, ConfusionMatrix, ErrorClass, LetterBreakdown,
};

use crate::greek_text::{default_table, CanonicalizationTable};
use crate::par::{map_ordered, Execution};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("reference text is empty")]
    EmptyReference,
    #[error("corpus has no reference text")]
    EmptyCorpus,
    #[error("no hypothesis file for reference {0:?}")]
    UnpairedFile(String),
    #[error("manifest line {line}: {reason}")]
    Manifest { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> EvalError + '_ {
    move |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Whitespace tokenization; punctuation stays attached.
pub fn words(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

/// Character error rate: edit distance over reference codepoints.
pub fn cer(reference: &str, hypothesis: &str) -> Result<f64, EvalError> {
    let r: Vec<char> = reference.chars().collect();
    if r.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let h: Vec<char> = hypothesis.chars().collect();
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}

/// Word error rate over whitespace tokens.
pub fn wer(reference: &str, hypothesis: &str) -> Result<f64, EvalError> {
    let r = words(reference);
    if r.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    let h = words(hypothesis);
    Ok(edit_distance(&r, &h) as f64 / r.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextMode {
    /// Texts compared exactly as read.
    Raw,
    /// Both sides canonicalized before alignment.
    Canonicalized,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentPair {
    pub id: String,
    pub reference: String,
    pub hypothesis: String,
}

impl DocumentPair {
    pub fn new(id: impl Into<String>, reference: impl Into<String>, hypothesis: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            reference: reference.into(),
            hypothesis: hypothesis.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct EvalOptions {
    pub normalize_first: bool,
    pub execution: Execution,
}

/// Figures for one text mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub mode: TextMode,
    /// `None` only for a document with an empty reference.
    pub cer: Option<f64>,
    pub wer: Option<f64>,
    pub n_ref_chars: u64,
    pub n_ref_words: u64,
    pub char_edits: EditCounts,
    pub word_edits: EditCounts,
}

impl Scores {
    fn from_counts(mode: TextMode, char_edits: EditCounts, word_edits: EditCounts) -> Self {
        let n_ref_chars = char_edits.reference_len();
        let n_ref_words = word_edits.reference_len();
        let ratio = |e: u64, n: u64| (n > 0).then(|| e as f64 / n as f64);
        Scores {
            mode,
            cer: ratio(char_edits.errors(), n_ref_chars),
            wer: ratio(word_edits.errors(), n_ref_words),
            n_ref_chars,
            n_ref_words,
            char_edits,
            word_edits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentScore {
    pub id: String,
    pub raw: Scores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<Scores>,
}

/// Corpus-level OCR evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Mode of the headline figures and of the confusion matrix.
    pub mode: TextMode,
    pub cer: f64,
    pub wer: f64,
    pub n_ref_chars: u64,
    pub n_ref_words: u64,
    pub raw: Scores,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalized: Option<Scores>,
    pub confusion: ConfusionMatrix,
    pub per_document: Vec<DocumentScore>,
}

struct DocResult {
    raw: (EditCounts, EditCounts),
    normalized: Option<(EditCounts, EditCounts)>,
    confusion: ConfusionMatrix,
}

fn score_pair(
    table: &CanonicalizationTable,
    reference: &str,
    hypothesis: &str,
    confusion: Option<&mut ConfusionMatrix>,
) -> (EditCounts, EditCounts) {
    let r: Vec<char> = reference.chars().collect();
    let h: Vec<char> = hypothesis.chars().collect();
    let chars = align(&r, &h);
    if let Some(m) = confusion {
        m.add_alignment(table, &chars);
    }
    let words = align(&words(reference), &words(hypothesis));
    (chars.counts(), words.counts())
}

fn evaluate_document(table: &CanonicalizationTable, pair: &DocumentPair, normalize: bool) -> DocResult {
    let mut confusion = ConfusionMatrix::new();
    if normalize {
        let raw = score_pair(table, &pair.reference, &pair.hypothesis, None);
        let r = table.canonicalize(&pair.reference);
        let h = table.canonicalize(&pair.hypothesis);
        let norm = score_pair(table, &r, &h, Some(&mut confusion));
        DocResult {
            raw,
            normalized: Some(norm),
            confusion,
        }
    } else {
        let raw = score_pair(table, &pair.reference, &pair.hypothesis, Some(&mut confusion));
        DocResult {
            raw,
            normalized: None,
            confusion,
        }
    }
}

/// Evaluates a corpus with the built-in canonicalization table.
pub fn evaluate_corpus(pairs: &[DocumentPair], opts: EvalOptions) -> Result<EvalReport, EvalError> {
    evaluate_corpus_with(default_table(), pairs, opts)
}

pub fn evaluate_corpus_with(
    table: &CanonicalizationTable,
    pairs: &[DocumentPair],
    opts: EvalOptions,
) -> Result<EvalReport, EvalError> {
    let results = map_ordered(opts.execution, pairs, |p| {
        evaluate_document(table, p, opts.normalize_first)
    });

    let mut raw_c = EditCounts::default();
    let mut raw_w = EditCounts::default();
    let mut norm_c = EditCounts::default();
    let mut norm_w = EditCounts::default();
    let mut confusion = ConfusionMatrix::new();
    let mut per_document = Vec::with_capacity(pairs.len());
    for (pair, res) in pairs.iter().zip(&results) {
        raw_c.add(&res.raw.0);
        raw_w.add(&res.raw.1);
        if let Some((c, w)) = &res.normalized {
            norm_c.add(c);
            norm_w.add(w);
        }
        confusion.merge(&res.confusion);
        per_document.push(DocumentScore {
            id: pair.id.clone(),
            raw: Scores::from_counts(TextMode::Raw, res.raw.0, res.raw.1),
            normalized: res
                .normalized
                .map(|(c, w)| Scores::from_counts(TextMode::Canonicalized, c, w)),
        });
    }

    let raw = Scores::from_counts(TextMode::Raw, raw_c, raw_w);
    let normalized = opts
        .normalize_first
        .then(|| Scores::from_counts(TextMode::Canonicalized, norm_c, norm_w));
    let primary = normalized.as_ref().unwrap_or(&raw);
    let (Some(cer), Some(wer)) = (primary.cer, primary.wer) else {
        return Err(EvalError::EmptyCorpus);
    };
    Ok(EvalReport {
        mode: primary.mode,
        cer,
        wer,
        n_ref_chars: primary.n_ref_chars,
        n_ref_words: primary.n_ref_words,
        raw: raw.clone(),
        normalized: normalized.clone(),
        confusion,
        per_document,
    })
}

fn read_text(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

/// Pairs every regular file in `ref_dir` with the same-named file in
/// `hyp_dir`, sorted by file name. Extra hypothesis files are ignored.
pub fn read_paired_dirs(ref_dir: &Path, hyp_dir: &Path) -> Result<Vec<DocumentPair>, EvalError> {
    let mut names: Vec<(String, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(ref_dir).map_err(io_err(ref_dir))? {
        let entry = entry.map_err(io_err(ref_dir))?;
        let path = entry.path();
        if path.is_file() {
            names.push((entry.file_name().to_string_lossy().into_owned(), path));
        }
    }
    names.sort();
    let mut pairs = Vec::with_capacity(names.len());
    for (name, ref_path) in names {
        let hyp_path = hyp_dir.join(&name);
        if !hyp_path.is_file() {
            return Err(EvalError::UnpairedFile(name));
        }
        pairs.push(DocumentPair {
            reference: read_text(&ref_path)?,
            hypothesis: read_text(&hyp_path)?,
            id: name,
        });
    }
    Ok(pairs)
}

/// Reads a two-column TSV manifest (`ref_path<TAB>hyp_path`, `#` comments).
/// Relative paths resolve against the manifest's directory.
pub fn read_manifest(manifest: &Path) -> Result<Vec<DocumentPair>, EvalError> {
    let text = read_text(manifest)?;
    let base = manifest.parent().unwrap_or_else(|| Path::new("."));
    let mut pairs = Vec::new();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 2 {
            return Err(EvalError::Manifest {
                line: idx + 1,
                reason: format!("expected 2 columns, found {}", cols.len()),
            });
        }
        let ref_path = base.join(cols[0].trim());
        let hyp_path = base.join(cols[1].trim());
        let mut id = cols[0].trim().to_owned();
        let n = seen.entry(id.clone()).or_insert(0);
        *n += 1;
        if *n > 1 {
            id = format!("{id}#{n}");
        }
        pairs.push(DocumentPair {
            id,
            reference: read_text(&ref_path)?,
            hypothesis: read_text(&hyp_path)?,
        });
    }
    Ok(pairs)
}
