//! Unicode handling for polytonic Greek.
//!
//! Three concerns live here:
//!
//! * [`CanonicalizationTable`] and [`canonicalize`] merge visually identical
//!   codepoints that differ only in how the acute accent is encoded
//!   (Greek Extended *oxia* forms versus Greek-and-Coptic *tonos* forms).
//! * [`decompose_profile`] splits a Greek letter into its base letter and a
//!   [`DiacriticProfile`], the axes along which OCR errors are classified.
//! * [`intuitive_form`] derives the lowercase, diacritic-free rendering used
//!   for naive lexical search.
//!
//! Greek punctuation that Unicode normalization would otherwise rewrite
//! (ano teleia, the Greek question mark, the numeral sign) is passed through
//! verbatim by every function in this module.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::{decompose_canonical, is_combining_mark};
use unicode_normalization::UnicodeNormalization;

const COMBINING_GRAVE: char = '\u{0300}';
const COMBINING_ACUTE: char = '\u{0301}';
const COMBINING_MACRON: char = '\u{0304}';
const COMBINING_BREVE: char = '\u{0306}';
const COMBINING_DIAERESIS: char = '\u{0308}';
const COMBINING_PSILI: char = '\u{0313}';
const COMBINING_DASIA: char = '\u{0314}';
const COMBINING_GRAVE_TONE: char = '\u{0340}';
const COMBINING_ACUTE_TONE: char = '\u{0341}';
const COMBINING_PERISPOMENI: char = '\u{0342}';
const COMBINING_YPOGEGRAMMENI: char = '\u{0345}';

/// Greek punctuation with singleton canonical decompositions. NFC/NFD would
/// replace these with Latin look-alikes, so they are shielded from
/// normalization.
const PROTECTED_PUNCTUATION: [char; 3] = [
    '\u{0374}', // numeral sign (keraia)
    '\u{037E}', // question mark
    '\u{0387}', // ano teleia
];

/// Oxia (Greek Extended) to tonos (Greek and Coptic) pairs.
const DEFAULT_PAIRS: [(char, char); 16] = [
    ('\u{1F71}', '\u{03AC}'), // alpha
    ('\u{1F73}', '\u{03AD}'), // epsilon
    ('\u{1F75}', '\u{03AE}'), // eta
    ('\u{1F77}', '\u{03AF}'), // iota
    ('\u{1F79}', '\u{03CC}'), // omicron
    ('\u{1F7B}', '\u{03CD}'), // upsilon
    ('\u{1F7D}', '\u{03CE}'), // omega
    ('\u{1FD3}', '\u{0390}'), // iota with dialytika
    ('\u{1FE3}', '\u{03B0}'), // upsilon with dialytika
    ('\u{1FBB}', '\u{0386}'), // Alpha
    ('\u{1FC9}', '\u{0388}'), // Epsilon
    ('\u{1FCB}', '\u{0389}'), // Eta
    ('\u{1FDB}', '\u{038A}'), // Iota
    ('\u{1FF9}', '\u{038C}'), // Omicron
    ('\u{1FEB}', '\u{038E}'), // Upsilon
    ('\u{1FFB}', '\u{038F}'), // Omega
];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GreekTextError {
    #[error("{0:?} (U+{code:04X}) is not a Greek letter", code = *.0 as u32)]
    NotGreekLetter(char),
    #[error("table line {line}: {reason}")]
    MalformedTable { line: usize, reason: String },
    #[error("table maps U+{:04X} to more than one canonical form", *.0 as u32)]
    ConflictingVariant(char),
    #[error("table chains: canonical U+{:04X} is also listed as a variant", *.0 as u32)]
    ChainedMapping(char),
    #[error("table target U+{:04X} is not stable under composed normalization", *.0 as u32)]
    UnstableTarget(char),
    #[error("failed to read table: {0}")]
    Io(String),
}

/// Mapping from variant codepoints to their canonical partner.
///
/// The mapping is a function without chains, so applying it once or twice
/// gives the same result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalizationTable {
    pairs: BTreeMap<char, char>,
}

impl Default for CanonicalizationTable {
    fn default() -> Self {
        Self::from_pairs(DEFAULT_PAIRS).expect("built-in table is valid")
    }
}

impl CanonicalizationTable {
    /// Builds a table, rejecting conflicting variants, chains and targets
    /// that composed normalization would itself rewrite.
    pub fn from_pairs<I>(pairs: I) -> Result<Self, GreekTextError>
    where
        I: IntoIterator<Item = (char, char)>,
    {
        let mut map = BTreeMap::new();
        for (variant, canonical) in pairs {
            if variant == canonical {
                continue;
            }
            match map.insert(variant, canonical) {
                Some(prev) if prev != canonical => return Err(GreekTextError::ConflictingVariant(variant)),
                _ => {}
            }
        }
        for &canonical in map.values() {
            if map.contains_key(&canonical) {
                return Err(GreekTextError::ChainedMapping(canonical));
            }
            let mut nfc = std::iter::once(canonical).nfc();
            if nfc.next() != Some(canonical) || nfc.next().is_some() {
                return Err(GreekTextError::UnstableTarget(canonical));
            }
        }
        Ok(Self { pairs: map })
    }

    /// Parses the TSV form: `variant_hex<TAB>canonical_hex`, `#` comments,
    /// blank lines ignored. Hex may carry a `U+` or `0x` prefix.
    pub fn parse_tsv(text: &str) -> Result<Self, GreekTextError> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 2 {
                return Err(GreekTextError::MalformedTable {
                    line: line_no,
                    reason: format!("expected 2 tab-separated fields, found {}", fields.len()),
                });
            }
            let variant = parse_hex_char(fields[0]).ok_or_else(|| GreekTextError::MalformedTable {
                line: line_no,
                reason: format!("bad codepoint {:?}", fields[0]),
            })?;
            let canonical = parse_hex_char(fields[1]).ok_or_else(|| GreekTextError::MalformedTable {
                line: line_no,
                reason: format!("bad codepoint {:?}", fields[1]),
            })?;
            pairs.push((variant, canonical));
        }
        Self::from_pairs(pairs)
    }

    pub fn load(path: &Path) -> Result<Self, GreekTextError> {
        let text = std::fs::read_to_string(path).map_err(|e| GreekTextError::Io(format!("{}: {e}", path.display())))?;
        Self::parse_tsv(&text)
    }

    /// Renders the table back to its TSV form.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("# variant\tcanonical\n");
        for (v, c) in &self.pairs {
            out.push_str(&format!("{:04X}\t{:04X}\n", *v as u32, *c as u32));
        }
        out
    }

    pub fn get(&self, ch: char) -> Option<char> {
        self.pairs.get(&ch).copied()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (char, char)> + '_ {
        self.pairs.iter().map(|(v, c)| (*v, *c))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Composed normalization followed by table substitution, repeated until
    /// stable. Protected Greek punctuation is copied through untouched.
    pub fn canonicalize(&self, text: &str) -> String {
        let mut out = String::with_capacity(text.len());
        for_each_segment(text, |segment| match segment {
            Segment::Protected(c) => out.push(c),
            Segment::Text(s) => out.push_str(&self.canonicalize_segment(s)),
        });
        out
    }

    fn canonicalize_segment(&self, s: &str) -> String {
        // NFC leaves ASCII alone; the shortcut only holds if the table
        // has no ASCII keys (keys are sorted, so checking the first suffices).
        if s.is_ascii() && !self.pairs.keys().next().is_some_and(char::is_ascii) {
            return s.to_owned();
        }
        let mut current: String = s.nfc().collect();
        // Substitution can expose new compositions (variant followed by a
        // combining mark), so iterate to a fixpoint. Every round that changes
        // anything removes a variant, so this terminates quickly.
        for _ in 0..8 {
            if !current.chars().any(|c| self.pairs.contains_key(&c)) {
                break;
            }
            let mapped: String = current.chars().map(|c| self.get(c).unwrap_or(c)).collect();
            current = mapped.nfc().collect();
        }
        current
    }
}

fn parse_hex_char(field: &str) -> Option<char> {
    let hex = field
        .strip_prefix("U+")
        .or_else(|| field.strip_prefix("u+"))
        .or_else(|| field.strip_prefix("0x"))
        .or_else(|| field.strip_prefix("0X"))
        .unwrap_or(field);
    u32::from_str_radix(hex, 16).ok().and_then(char::from_u32)
}

enum Segment<'a> {
    Text(&'a str),
    Protected(char),
}

fn for_each_segment<'a>(text: &'a str, mut f: impl FnMut(Segment<'a>)) {
    let mut start = 0;
    for (idx, ch) in text.char_indices() {
        if PROTECTED_PUNCTUATION.contains(&ch) {
            if start < idx {
                f(Segment::Text(&text[start..idx]));
            }
            f(Segment::Protected(ch));
            start = idx + ch.len_utf8();
        }
    }
    if start < text.len() {
        f(Segment::Text(&text[start..]));
    }
}

/// Canonicalizes with the built-in table.
pub fn canonicalize(text: &str) -> String {
    default_table().canonicalize(text)
}

/// The built-in table, constructed once.
pub fn default_table() -> &'static CanonicalizationTable {
    static TABLE: std::sync::OnceLock<CanonicalizationTable> = std::sync::OnceLock::new();
    TABLE.get_or_init(CanonicalizationTable::default)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Breathing {
    None,
    Smooth,
    Rough,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Accent {
    None,
    Acute,
    Grave,
    Circumflex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthMark {
    None,
    Macron,
    Breve,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LetterCase {
    Upper,
    Lower,
}

/// A Greek letter split into base letter and diacritics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiacriticProfile {
    /// Lowercase base letter without any combining marks.
    pub base_letter: char,
    pub breathing: Breathing,
    pub accent: Accent,
    pub iota_subscript: bool,
    pub diaeresis: bool,
    pub length_mark: LengthMark,
    pub case: LetterCase,
}

impl DiacriticProfile {
    /// True when the two profiles carry the same marks, ignoring base letter
    /// and case.
    pub fn same_marks(&self, other: &Self) -> bool {
        self.breathing == other.breathing
            && self.accent == other.accent
            && self.iota_subscript == other.iota_subscript
            && self.diaeresis == other.diaeresis
            && self.length_mark == other.length_mark
    }

    pub fn has_marks(&self) -> bool {
        self.breathing != Breathing::None
            || self.accent != Accent::None
            || self.iota_subscript
            || self.diaeresis
            || self.length_mark != LengthMark::None
    }

    /// Recomposes the profile into NFC text. Usually a single codepoint;
    /// combinations without a precomposed form keep trailing combining marks.
    pub fn compose(&self) -> String {
        let mut s = String::new();
        match self.case {
            LetterCase::Lower => s.push(self.base_letter),
            LetterCase::Upper => s.extend(self.base_letter.to_uppercase()),
        }
        match self.length_mark {
            LengthMark::None => {}
            LengthMark::Macron => s.push(COMBINING_MACRON),
            LengthMark::Breve => s.push(COMBINING_BREVE),
        }
        if self.diaeresis {
            s.push(COMBINING_DIAERESIS);
        }
        match self.breathing {
            Breathing::None => {}
            Breathing::Smooth => s.push(COMBINING_PSILI),
            Breathing::Rough => s.push(COMBINING_DASIA),
        }
        match self.accent {
            Accent::None => {}
            Accent::Acute => s.push(COMBINING_ACUTE),
            Accent::Grave => s.push(COMBINING_GRAVE),
            Accent::Circumflex => s.push(COMBINING_PERISPOMENI),
        }
        if self.iota_subscript {
            s.push(COMBINING_YPOGEGRAMMENI);
        }
        s.nfc().collect()
    }
}

impl fmt::Display for DiacriticProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.compose())
    }
}

/// Splits a Greek letter into base letter and diacritic profile via full
/// canonical decomposition.
pub fn decompose_profile(ch: char) -> Result<DiacriticProfile, GreekTextError> {
    if PROTECTED_PUNCTUATION.contains(&ch) {
        return Err(GreekTextError::NotGreekLetter(ch));
    }
    let mut parts = Vec::with_capacity(4);
    decompose_canonical(ch, |c| parts.push(c));
    let (&base, marks) = parts.split_first().ok_or(GreekTextError::NotGreekLetter(ch))?;
    if !is_greek_letter(base) {
        return Err(GreekTextError::NotGreekLetter(ch));
    }
    let case = if base.is_uppercase() {
        LetterCase::Upper
    } else {
        LetterCase::Lower
    };
    let mut lower = base.to_lowercase();
    let base_letter = match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => base,
    };
    let mut profile = DiacriticProfile {
        base_letter,
        breathing: Breathing::None,
        accent: Accent::None,
        iota_subscript: false,
        diaeresis: false,
        length_mark: LengthMark::None,
        case,
    };
    for &mark in marks {
        match mark {
            COMBINING_PSILI => profile.breathing = Breathing::Smooth,
            COMBINING_DASIA => profile.breathing = Breathing::Rough,
            COMBINING_ACUTE | COMBINING_ACUTE_TONE => profile.accent = Accent::Acute,
            COMBINING_GRAVE | COMBINING_GRAVE_TONE => profile.accent = Accent::Grave,
            COMBINING_PERISPOMENI => profile.accent = Accent::Circumflex,
            COMBINING_YPOGEGRAMMENI => profile.iota_subscript = true,
            COMBINING_DIAERESIS => profile.diaeresis = true,
            COMBINING_MACRON => profile.length_mark = LengthMark::Macron,
            COMBINING_BREVE => profile.length_mark = LengthMark::Breve,
            _ => return Err(GreekTextError::NotGreekLetter(ch)),
        }
    }
    Ok(profile)
}

/// Options for [`intuitive_form_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntuitiveOptions {
    /// Fold final sigma (ς) to σ.
    pub fold_final_sigma: bool,
}

impl Default for IntuitiveOptions {
    fn default() -> Self {
        Self { fold_final_sigma: true }
    }
}

/// Lowercase, diacritic-free rendering with final sigma folded to σ.
pub fn intuitive_form(text: &str) -> String {
    intuitive_form_with(text, IntuitiveOptions::default())
}

pub fn intuitive_form_with(text: &str, opts: IntuitiveOptions) -> String {
    let mut out = String::with_capacity(text.len());
    for_each_segment(text, |segment| match segment {
        Segment::Protected(c) => out.push(c),
        Segment::Text(s) => {
            // Lowercase before decomposing: some lowercase mappings introduce
            // combining marks of their own.
            let lowered: String = s.chars().flat_map(char::to_lowercase).collect();
            for c in lowered.nfd() {
                if is_combining_mark(c) {
                    continue;
                }
                if opts.fold_final_sigma && c == 'ς' {
                    out.push('σ');
                } else {
                    out.push(c);
                }
            }
        }
    });
    out
}

fn in_greek_blocks(ch: char) -> bool {
    matches!(ch as u32, 0x0370..=0x03FF | 0x1F00..=0x1FFF)
}

/// Letter from the Greek and Coptic or Greek Extended blocks, including
/// precomposed polytonic forms.
pub fn is_greek_letter(ch: char) -> bool {
    in_greek_blocks(ch) && ch.is_alphabetic() && ch != '\u{037A}'
}

/// Letter from the Latin blocks (Basic Latin through Latin Extended-B, Latin
/// Extended Additional, and the Latin ligatures).
pub fn is_latin_letter(ch: char) -> bool {
    let cp = ch as u32;
    let in_block = matches!(
        cp,
        0x0041..=0x005A
            | 0x0061..=0x007A
            | 0x00C0..=0x024F
            | 0x1E00..=0x1EFF
            | 0x2C60..=0x2C7F
            | 0xA720..=0xA7FF
            | 0xFB00..=0xFB06
    );
    in_block && ch.is_alphabetic()
}
