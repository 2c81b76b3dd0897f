//! Tokenization, lexicon annotation and the five-layer vertical corpus format.
//!
//! Each token line carries `wordform`, `intuitive_form`, `lemma`,
//! `intuitive_lemma` and `pos`, separated by tabs, inside
//! `<doc>`/`<page>`/`<line>`/`<w>` structure tags. See [`emit_vert`] for the
//! exact layout.

mod format;

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;

use crate::greek_text::{default_table, intuitive_form, CanonicalizationTable};

pub use format::{emit_vert, parse_vert, to_vert_string, validate_vert, ValidationIssue, ValidationReport};

pub const UNKNOWN_POS: &str = "UNK";

/// Elision marks and the numeral keraia, which stay attached to the word
/// they follow.
pub const ATTACHED_MARKS: [char; 6] = ['\u{2019}', '\'', '\u{1FBD}', '\u{02BC}', '\u{1FBF}', '\u{0374}'];

#[derive(Debug, Error)]
pub enum VertError {
    #[error("line {line_no}: {reason}")]
    MalformedVert { line_no: usize, reason: String },
    #[error("lexicon line {line}: {reason}")]
    MalformedLexicon { line: usize, reason: String },
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error("no documents given")]
    EmptyCorpus,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

/// True if the token contains no letter or digit.
pub fn is_punctuation_token(token: &str) -> bool {
    !token.chars().any(char::is_alphanumeric)
}

/// Splits on whitespace, then peels leading and trailing punctuation off
/// each chunk one character at a time. [`ATTACHED_MARKS`] directly after the
/// last word character stay with the word.
pub fn tokenize(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in line.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let Some(first) = chars.iter().position(|&c| is_word_char(c)) else {
            out.extend(chars.iter().map(|c| c.to_string()));
            continue;
        };
        let mut last = chars.iter().rposition(|&c| is_word_char(c)).unwrap_or(first);
        while last + 1 < chars.len() && ATTACHED_MARKS.contains(&chars[last + 1]) {
            last += 1;
        }
        out.extend(chars[..first].iter().map(|c| c.to_string()));
        out.push(chars[first..=last].iter().collect());
        out.extend(chars[last + 1..].iter().map(|c| c.to_string()));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Candidate {
    pub lemma: String,
    pub pos: String,
}

/// Wordform to ordered `(lemma, pos)` candidates. Keys and lemmas are
/// canonicalized on insertion and lookups canonicalize the query, so
/// encoding duplicates of a form resolve to the same entry. Lookup is case
/// sensitive.
#[derive(Debug, Clone)]
pub struct Lexicon {
    table: CanonicalizationTable,
    entries: BTreeMap<String, Vec<Candidate>>,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::new(default_table().clone())
    }
}

impl Lexicon {
    pub fn new(table: CanonicalizationTable) -> Self {
        Lexicon {
            table,
            entries: BTreeMap::new(),
        }
    }

    /// Appends a candidate unless an identical one is already listed.
    pub fn insert(&mut self, wordform: &str, lemma: &str, pos: &str) {
        let key = self.table.canonicalize(wordform);
        let cand = Candidate {
            lemma: self.table.canonicalize(lemma),
            pos: pos.to_owned(),
        };
        let list = self.entries.entry(key).or_default();
        if !list.contains(&cand) {
            list.push(cand);
        }
    }

    /// Parses `wordform TAB lemma TAB pos` lines; `#` starts a comment line.
    pub fn parse_tsv(text: &str, table: CanonicalizationTable) -> Result<Self, VertError> {
        let mut lex = Lexicon::new(table);
        for (i, raw) in text.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            let line = if i == 0 {
                line.trim_start_matches('\u{FEFF}')
            } else {
                line
            };
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let bad = |reason: String| VertError::MalformedLexicon { line: i + 1, reason };
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 tab-separated fields, found {}", fields.len())));
            }
            let fields: Vec<&str> = fields.iter().map(|f| f.trim()).collect();
            if let Some(n) = fields.iter().position(|f| f.is_empty()) {
                return Err(bad(format!("field {} is empty", n + 1)));
            }
            lex.insert(fields[0], fields[1], fields[2]);
        }
        Ok(lex)
    }

    pub fn load(path: &Path, table: CanonicalizationTable) -> Result<Self, VertError> {
        Self::parse_tsv(&std::fs::read_to_string(path)?, table)
    }

    pub fn candidates(&self, wordform: &str) -> &[Candidate] {
        self.entries
            .get(&self.table.canonicalize(wordform))
            .map_or(&[], Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The five annotation layers of one wordform.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub wordform: String,
    pub intuitive_form: String,
    pub lemma: String,
    pub intuitive_lemma: String,
    pub pos: String,
    pub known: bool,
}

/// Looks the form up and fills the intuitive layers. Unknown forms get
/// themselves as lemma and the `UNK` tag.
pub fn annotate(wordform: &str, lexicon: &Lexicon) -> Annotation {
    let (lemma, pos, known) = match lexicon.candidates(wordform).first() {
        Some(c) => (c.lemma.clone(), c.pos.clone(), true),
        None => (wordform.to_owned(), UNKNOWN_POS.to_owned(), false),
    };
    Annotation {
        wordform: wordform.to_owned(),
        intuitive_form: intuitive_form(wordform),
        intuitive_lemma: intuitive_form(&lemma),
        lemma,
        pos,
        known,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertWord {
    pub id: String,
    pub wordform: String,
    pub intuitive_form: String,
    pub lemma: String,
    pub intuitive_lemma: String,
    pub pos: String,
}

impl VertWord {
    pub fn from_annotation(id: impl Into<String>, a: Annotation) -> Self {
        VertWord {
            id: id.into(),
            wordform: a.wordform,
            intuitive_form: a.intuitive_form,
            lemma: a.lemma,
            intuitive_lemma: a.intuitive_lemma,
            pos: a.pos,
        }
    }

    fn fields(&self) -> [&str; 5] {
        [
            &self.wordform,
            &self.intuitive_form,
            &self.lemma,
            &self.intuitive_lemma,
            &self.pos,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertLine {
    pub id: String,
    pub words: Vec<VertWord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertPage {
    pub n: u32,
    pub pdf: String,
    pub lines: Vec<VertLine>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VertDocument {
    pub doc_id: String,
    pub date: Option<String>,
    pub pages: Vec<VertPage>,
}

/// One token with its full structural context.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub wordform: String,
    pub intuitive_form: String,
    pub lemma: String,
    pub intuitive_lemma: String,
    pub pos: String,
    pub word_id: String,
    pub line_id: String,
    pub page_ref: String,
    pub doc_id: String,
}

impl VertDocument {
    pub fn new(doc_id: impl Into<String>) -> Self {
        VertDocument {
            doc_id: doc_id.into(),
            date: None,
            pages: Vec::new(),
        }
    }

    pub fn words(&self) -> impl Iterator<Item = &VertWord> {
        self.pages.iter().flat_map(|p| &p.lines).flat_map(|l| &l.words)
    }

    pub fn tokens(&self) -> Vec<Token> {
        let mut out = Vec::new();
        for p in &self.pages {
            for l in &p.lines {
                for w in &l.words {
                    out.push(Token {
                        wordform: w.wordform.clone(),
                        intuitive_form: w.intuitive_form.clone(),
                        lemma: w.lemma.clone(),
                        intuitive_lemma: w.intuitive_lemma.clone(),
                        pos: w.pos.clone(),
                        word_id: w.id.clone(),
                        line_id: l.id.clone(),
                        page_ref: p.pdf.clone(),
                        doc_id: self.doc_id.clone(),
                    });
                }
            }
        }
        out
    }

    /// Word count excluding pure-punctuation tokens.
    pub fn word_count(&self) -> u64 {
        self.words().filter(|w| !is_punctuation_token(&w.wordform)).count() as u64
    }

    /// Checks what emission relies on: wordform, lemma and pos non-empty, no
    /// field containing a tab or line break; page numbers unique; line ids unique per page;
    /// word ids unique per document.
    pub fn validate(&self) -> Result<(), VertError> {
        let bad = |m: String| Err(VertError::InvalidDocument(m));
        let mut pages = HashSet::new();
        let mut word_ids = HashSet::new();
        for p in &self.pages {
            if !pages.insert(p.n) {
                return bad(format!("duplicate page n={}", p.n));
            }
            let mut line_ids = HashSet::new();
            for l in &p.lines {
                if !line_ids.insert(&l.id) {
                    return bad(format!("duplicate line id {:?} on page {}", l.id, p.n));
                }
                for w in &l.words {
                    if !word_ids.insert(&w.id) {
                        return bad(format!("duplicate word id {:?}", w.id));
                    }
                    if [&w.wordform, &w.lemma, &w.pos].iter().any(|f| f.is_empty()) {
                        return bad(format!("word {:?} has an empty wordform, lemma or pos", w.id));
                    }
                    for f in w.fields() {
                        if f.contains(['\t', '\n', '\r']) {
                            return bad(format!("word {:?} has a tab or line break in {f:?}", w.id));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Lexicon candidates for one token whose form had more than one reading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AmbiguityRecord {
    pub word_id: String,
    pub wordform: String,
    pub candidates: Vec<Candidate>,
}

/// Records for every word whose form has more than one lexicon candidate.
pub fn ambiguity_records(doc: &VertDocument, lexicon: &Lexicon) -> Vec<AmbiguityRecord> {
    doc.words()
        .filter_map(|w| {
            let c = lexicon.candidates(&w.wordform);
            (c.len() > 1).then(|| AmbiguityRecord {
                word_id: w.id.clone(),
                wordform: w.wordform.clone(),
                candidates: c.to_vec(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StatsRow {
    pub doc_id: String,
    pub date_label: String,
    pub word_count: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub rows: Vec<StatsRow>,
    pub total: u64,
}

pub const TOTAL_LABEL: &str = "TOTAL";

impl CorpusStats {
    /// `doc_id,date_label,word_count` with a closing `TOTAL` row.
    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(["doc_id", "date_label", "word_count"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record([r.doc_id.as_str(), &r.date_label, &r.word_count.to_string()])
                .expect("in-memory write");
        }
        w.write_record([TOTAL_LABEL, "", &self.total.to_string()])
            .expect("in-memory write");
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
    }
}

pub fn corpus_stats(docs: &[VertDocument]) -> Result<CorpusStats, VertError> {
    if docs.is_empty() {
        return Err(VertError::EmptyCorpus);
    }
    let rows: Vec<StatsRow> = docs
        .iter()
        .map(|d| StatsRow {
            doc_id: d.doc_id.clone(),
            date_label: d.date.clone().unwrap_or_default(),
            word_count: d.word_count(),
        })
        .collect();
    let total = rows.iter().map(|r| r.word_count).sum();
    Ok(CorpusStats { rows, total })
}
