//! Substitution error classes and the character confusion matrix.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::char::{decompose_canonical, is_combining_mark};

use super::align::Alignment;
use crate::greek_text::{decompose_profile, default_table, intuitive_form, CanonicalizationTable};

/// Kinds of character substitution, tested in declaration order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ErrorClass {
    /// Identical after canonicalization (e.g. tonos versus oxia).
    EncodingDuplicate,
    /// Same base letter, different diacritics.
    DiacriticVariation,
    /// Same base letter and diacritics, different case.
    CaseConfusion,
    /// Different base letters.
    LetterConfusion,
    /// Either side is not a letter.
    PunctuationOrSpacing,
}

impl ErrorClass {
    pub const ALL: [ErrorClass; 5] = [
        ErrorClass::EncodingDuplicate,
        ErrorClass::DiacriticVariation,
        ErrorClass::CaseConfusion,
        ErrorClass::LetterConfusion,
        ErrorClass::PunctuationOrSpacing,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::EncodingDuplicate => "EncodingDuplicate",
            ErrorClass::DiacriticVariation => "DiacriticVariation",
            ErrorClass::CaseConfusion => "CaseConfusion",
            ErrorClass::LetterConfusion => "LetterConfusion",
            ErrorClass::PunctuationOrSpacing => "PunctuationOrSpacing",
        }
    }

    /// Classes where the letter is right and only its marks are wrong.
    pub fn is_diacritic(self) -> bool {
        matches!(self, ErrorClass::EncodingDuplicate | ErrorClass::DiacriticVariation)
    }
}

impl fmt::Display for ErrorClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

struct LetterShape {
    base: char,
    marks: Vec<char>,
    upper: bool,
}

fn letter_shape(c: char) -> Option<LetterShape> {
    if let Ok(p) = decompose_profile(c) {
        // Marks are compared through the profile; encode them as a tuple of
        // discriminants so the generic comparison below applies.
        let marks = vec![
            char::from(b'0' + p.breathing as u8),
            char::from(b'0' + p.accent as u8),
            char::from(b'0' + u8::from(p.iota_subscript)),
            char::from(b'0' + u8::from(p.diaeresis)),
            char::from(b'0' + p.length_mark as u8),
        ];
        return Some(LetterShape {
            base: p.base_letter,
            marks,
            upper: p.case == crate::greek_text::LetterCase::Upper,
        });
    }
    if !c.is_alphabetic() {
        return None;
    }
    let mut parts = Vec::new();
    decompose_canonical(c, |d| parts.push(d));
    let (&base, rest) = parts.split_first()?;
    let mut marks = rest.to_vec();
    marks.sort_unstable();
    let mut lower = base.to_lowercase();
    let base_lower = match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => base,
    };
    Some(LetterShape {
        base: base_lower,
        marks,
        upper: base.is_uppercase(),
    })
}

/// Classifies a substitution with the built-in canonicalization table.
pub fn classify_substitution(reference: char, hypothesis: char) -> ErrorClass {
    classify_with(default_table(), reference, hypothesis)
}

pub fn classify_with(table: &CanonicalizationTable, reference: char, hypothesis: char) -> ErrorClass {
    let mut buf_r = [0u8; 4];
    let mut buf_h = [0u8; 4];
    if table.canonicalize(reference.encode_utf8(&mut buf_r)) == table.canonicalize(hypothesis.encode_utf8(&mut buf_h)) {
        return ErrorClass::EncodingDuplicate;
    }
    if is_combining_mark(reference) && is_combining_mark(hypothesis) {
        return ErrorClass::DiacriticVariation;
    }
    match (letter_shape(reference), letter_shape(hypothesis)) {
        (Some(r), Some(h)) => {
            if r.base != h.base {
                ErrorClass::LetterConfusion
            } else if r.marks != h.marks {
                ErrorClass::DiacriticVariation
            } else if r.upper != h.upper {
                ErrorClass::CaseConfusion
            } else {
                // Same letter, marks and case but distinct codepoints that the
                // table does not merge: an encoding-level difference.
                ErrorClass::DiacriticVariation
            }
        }
        _ => ErrorClass::PunctuationOrSpacing,
    }
}

/// Substitution counts keyed by `(reference, hypothesis)` codepoint.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "ConfusionRepr", into = "ConfusionRepr")]
pub struct ConfusionMatrix {
    counts: BTreeMap<(char, char), (u64, ErrorClass)>,
    class_totals: BTreeMap<ErrorClass, u64>,
    total_errors: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionEntry {
    pub reference: char,
    pub hypothesis: char,
    pub count: u64,
    pub class: ErrorClass,
}

/// Errors grouped under one reference base letter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LetterBreakdown {
    pub total: u64,
    pub by_class: BTreeMap<ErrorClass, u64>,
    pub patterns: Vec<ConfusionEntry>,
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, reference: char, hypothesis: char, class: ErrorClass) {
        self.record_n(reference, hypothesis, class, 1);
    }

    fn record_n(&mut self, reference: char, hypothesis: char, class: ErrorClass, n: u64) {
        let slot = self.counts.entry((reference, hypothesis)).or_insert((0, class));
        slot.0 += n;
        *self.class_totals.entry(class).or_insert(0) += n;
        self.total_errors += n;
    }

    /// Adds every substitution of `alignment`.
    pub fn add_alignment(&mut self, table: &CanonicalizationTable, alignment: &Alignment<char>) {
        for (&r, &h) in alignment.substitutions() {
            let class = match self.counts.get(&(r, h)) {
                Some(&(_, class)) => class,
                None => classify_with(table, r, h),
            };
            self.record(r, h, class);
        }
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        for (&(r, h), &(n, class)) in &other.counts {
            self.record_n(r, h, class, n);
        }
    }

    pub fn count(&self, reference: char, hypothesis: char) -> u64 {
        self.counts.get(&(reference, hypothesis)).map_or(0, |e| e.0)
    }

    pub fn total_errors(&self) -> u64 {
        self.total_errors
    }

    pub fn class_total(&self, class: ErrorClass) -> u64 {
        self.class_totals.get(&class).copied().unwrap_or(0)
    }

    pub fn class_totals(&self) -> &BTreeMap<ErrorClass, u64> {
        &self.class_totals
    }

    /// Number of distinct `(reference, hypothesis)` patterns.
    pub fn distinct_patterns(&self) -> usize {
        self.counts.len()
    }

    /// Fraction of errors falling in `classes`; 0 for an empty matrix.
    pub fn class_share(&self, classes: &[ErrorClass]) -> f64 {
        if self.total_errors == 0 {
            return 0.0;
        }
        let n: u64 = classes.iter().map(|c| self.class_total(*c)).sum();
        n as f64 / self.total_errors as f64
    }

    /// Share of encoding-duplicate plus diacritic-variation errors.
    pub fn diacritic_share(&self) -> f64 {
        self.class_share(&[ErrorClass::EncodingDuplicate, ErrorClass::DiacriticVariation])
    }

    /// All patterns, most frequent first; ties by codepoint.
    pub fn entries(&self) -> Vec<ConfusionEntry> {
        let mut v: Vec<ConfusionEntry> = self
            .counts
            .iter()
            .map(|(&(r, h), &(count, class))| ConfusionEntry {
                reference: r,
                hypothesis: h,
                count,
                class,
            })
            .collect();
        v.sort_by(|a, b| {
            b.count
                .cmp(&a.count)
                .then(a.reference.cmp(&b.reference))
                .then(a.hypothesis.cmp(&b.hypothesis))
        });
        v
    }

    pub fn top_k(&self, k: usize) -> Vec<ConfusionEntry> {
        let mut v = self.entries();
        v.truncate(k);
        v
    }

    /// Errors grouped by the reference character's lowercase base letter
    /// (its intuitive form). Non-letters group under themselves.
    pub fn by_base_letter(&self) -> BTreeMap<String, LetterBreakdown> {
        let mut out: BTreeMap<String, LetterBreakdown> = BTreeMap::new();
        for e in self.entries() {
            let key = intuitive_form(&e.reference.to_string());
            let key = if key.is_empty() { e.reference.to_string() } else { key };
            let slot = out.entry(key).or_default();
            slot.total += e.count;
            *slot.by_class.entry(e.class).or_insert(0) += e.count;
            slot.patterns.push(e);
        }
        out
    }

    /// CSV with columns `ref_char_hex,hyp_char_hex,count,error_class`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("ref_char_hex,hyp_char_hex,count,error_class\n");
        for e in self.entries() {
            out.push_str(&format!(
                "{:04X},{:04X},{},{}\n",
                e.reference as u32, e.hypothesis as u32, e.count, e.class
            ));
        }
        out
    }
}

/// Builds the matrix over the substitution ops of `alignments`.
pub fn build_confusion(alignments: &[Alignment<char>]) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::new();
    for a in alignments {
        m.add_alignment(default_table(), a);
    }
    m
}

#[derive(Serialize, Deserialize)]
struct PatternRepr {
    reference: String,
    hypothesis: String,
    ref_hex: String,
    hyp_hex: String,
    count: u64,
    class: ErrorClass,
}

#[derive(Serialize, Deserialize)]
struct ConfusionRepr {
    total_errors: u64,
    distinct_patterns: usize,
    class_totals: BTreeMap<ErrorClass, u64>,
    patterns: Vec<PatternRepr>,
}

impl From<ConfusionMatrix> for ConfusionRepr {
    fn from(m: ConfusionMatrix) -> Self {
        ConfusionRepr {
            total_errors: m.total_errors,
            distinct_patterns: m.counts.len(),
            class_totals: m.class_totals.clone(),
            patterns: m
                .entries()
                .into_iter()
                .map(|e| PatternRepr {
                    reference: e.reference.to_string(),
                    hypothesis: e.hypothesis.to_string(),
                    ref_hex: format!("{:04X}", e.reference as u32),
                    hyp_hex: format!("{:04X}", e.hypothesis as u32),
                    count: e.count,
                    class: e.class,
                })
                .collect(),
        }
    }
}

impl TryFrom<ConfusionRepr> for ConfusionMatrix {
    type Error = String;

    fn try_from(r: ConfusionRepr) -> Result<Self, Self::Error> {
        let parse = |hex: &str| {
            u32::from_str_radix(hex, 16)
                .ok()
                .and_then(char::from_u32)
                .ok_or_else(|| format!("bad codepoint {hex:?}"))
        };
        let mut m = ConfusionMatrix::new();
        for p in r.patterns {
            m.record_n(parse(&p.ref_hex)?, parse(&p.hyp_hex)?, p.class, p.count);
        }
        if m.total_errors != r.total_errors {
            return Err("confusion totals do not tie out".into());
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ocr_eval::align::align_chars;

    #[test]
    fn listed_examples() {
        assert_eq!(
            classify_substitution('\u{03AC}', '\u{1F71}'),
            ErrorClass::EncodingDuplicate
        );
        assert_eq!(classify_substitution('ἰ', 'ἱ'), ErrorClass::DiacriticVariation);
        assert_eq!(classify_substitution('ς', ','), ErrorClass::PunctuationOrSpacing);
        assert_eq!(classify_substitution('σ', 'δ'), ErrorClass::LetterConfusion);
    }

    #[test]
    fn more_classes() {
        assert_eq!(classify_substitution('Δ', 'Λ'), ErrorClass::LetterConfusion);
        assert_eq!(classify_substitution('Α', 'α'), ErrorClass::CaseConfusion);
        assert_eq!(classify_substitution('Ἀ', 'ἀ'), ErrorClass::CaseConfusion);
        assert_eq!(classify_substitution('ά', 'α'), ErrorClass::DiacriticVariation);
        assert_eq!(classify_substitution('ῳ', 'ω'), ErrorClass::DiacriticVariation);
        assert_eq!(classify_substitution(' ', 'ι'), ErrorClass::PunctuationOrSpacing);
        assert_eq!(classify_substitution('.', ','), ErrorClass::PunctuationOrSpacing);
        assert_eq!(
            classify_substitution('\u{0313}', '\u{0314}'),
            ErrorClass::DiacriticVariation
        );
        assert_eq!(classify_substitution('e', 'é'), ErrorClass::DiacriticVariation);
        assert_eq!(classify_substitution('ο', 'o'), ErrorClass::LetterConfusion);
    }

    #[test]
    fn empty_input_gives_zero_matrix() {
        let m = build_confusion(&[]);
        assert_eq!(m.total_errors(), 0);
        assert_eq!(m.diacritic_share(), 0.0);
        assert!(m.class_totals().is_empty());
    }

    #[test]
    fn single_substitution() {
        let m = build_confusion(&[align_chars("αβγ", "αδγ")]);
        assert_eq!(m.total_errors(), 1);
        assert_eq!(m.count('β', 'δ'), 1);
        assert_eq!(m.class_total(ErrorClass::LetterConfusion), 1);
    }

    #[test]
    fn csv_and_json() {
        let m = build_confusion(&[align_chars("ἰά", "ἱ\u{1F71}")]);
        let csv = m.to_csv();
        assert!(csv.starts_with("ref_char_hex,hyp_char_hex,count,error_class\n"));
        assert!(csv.contains("03AC,1F71,1,EncodingDuplicate"));
        assert!(csv.contains("1F30,1F31,1,DiacriticVariation"));
        let json = serde_json::to_string(&m).unwrap();
        let back: ConfusionMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn grouping_by_letter() {
        let m = build_confusion(&[align_chars("ἰίο", "ἱιδ")]);
        let g = m.by_base_letter();
        assert_eq!(g["ι"].total, 2);
        assert_eq!(g["ο"].by_class[&ErrorClass::LetterConfusion], 1);
        assert_eq!(m.top_k(1).len(), 1);
    }
}
