//! Cleanup of OCR lines before annotation.
//!
//! Every edit is recorded in a [`ProvenanceLog`]; cases the rules cannot
//! settle are flagged for review instead of being edited. The composed
//! [`clean`] runs drop_empty_lines, dehyphenate and filter_latin in that order,
//! repeating the sequence until nothing changes, since removing Latin tokens
//! can expose a new line-final hyphen.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::greek_text::{is_greek_letter, is_latin_letter};

pub const DEFAULT_LATIN_THRESHOLD: f64 = 0.5;
pub const DEFAULT_HYPHENS: [char; 3] = ['\u{2D}', '\u{2010}', '\u{2011}'];

#[derive(Debug, Error, PartialEq)]
pub enum TextPipelineError {
    #[error("Latin threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),
    #[error("hyphen character U+{:04X} is alphanumeric or whitespace", *.0 as u32)]
    InvalidHyphen(char),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Line {
    pub id: String,
    pub text: String,
}

impl Line {
    pub fn new(id: impl Into<String>, text: impl Into<String>) -> Self {
        Line {
            id: id.into(),
            text: text.into(),
        }
    }

    /// Lines with ids `l1`, `l2`, ...
    pub fn numbered<S: AsRef<str>>(texts: &[S]) -> Vec<Line> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Line::new(format!("l{}", i + 1), t.as_ref()))
            .collect()
    }
}

pub fn texts(lines: &[Line]) -> Vec<&str> {
    lines.iter().map(|l| l.text.as_str()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Operation {
    Dehyphenate,
    DropEmptyLine,
    DropLatinLine,
    DropLatinToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceEntry {
    pub operation: Operation,
    /// For a merge, the line that keeps the word first, then the line the
    /// fragment came from.
    pub line_ids: Vec<String>,
    pub removed: String,
    /// Fragment moved up by a merge.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub moved: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagReason {
    UnmergedHyphen,
    MixedScriptToken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReviewFlag {
    pub line_id: String,
    pub reason: FlagReason,
    pub content: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProvenanceLog {
    pub entries: Vec<ProvenanceEntry>,
    pub flags: Vec<ReviewFlag>,
}

impl ProvenanceLog {
    pub fn is_empty(&self) -> bool {
        self.entries.is_empty() && self.flags.is_empty()
    }

    /// Appends `other` after the entries already present.
    pub fn extend(&mut self, other: ProvenanceLog) {
        self.entries.extend(other.entries);
        self.flags.extend(other.flags);
    }

    fn record(&mut self, operation: Operation, line_ids: Vec<String>, removed: impl Into<String>) {
        self.entries.push(ProvenanceEntry {
            operation,
            line_ids,
            removed: removed.into(),
            moved: String::new(),
        });
    }

    fn flag(&mut self, line_id: &str, reason: FlagReason, content: &str) {
        self.flags.push(ReviewFlag {
            line_id: line_id.to_owned(),
            reason,
            content: content.to_owned(),
        });
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("log serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleanOptions {
    pub latin_threshold: f64,
    /// Hyphen characters beyond the three defaults.
    pub extra_hyphens: Vec<char>,
}

impl Default for CleanOptions {
    fn default() -> Self {
        CleanOptions {
            latin_threshold: DEFAULT_LATIN_THRESHOLD,
            extra_hyphens: Vec::new(),
        }
    }
}

impl CleanOptions {
    pub fn validate(&self) -> Result<(), TextPipelineError> {
        if !(0.0..=1.0).contains(&self.latin_threshold) {
            return Err(TextPipelineError::InvalidThreshold(self.latin_threshold));
        }
        if let Some(&c) = self
            .extra_hyphens
            .iter()
            .find(|c| c.is_alphanumeric() || c.is_whitespace())
        {
            return Err(TextPipelineError::InvalidHyphen(c));
        }
        Ok(())
    }

    fn is_hyphen(&self, c: char) -> bool {
        DEFAULT_HYPHENS.contains(&c) || self.extra_hyphens.contains(&c)
    }
}

/// Removes lines that are empty or whitespace-only.
pub fn drop_empty_lines(lines: &[Line], log: &mut ProvenanceLog) -> Vec<Line> {
    let mut out = Vec::with_capacity(lines.len());
    for l in lines {
        if l.text.trim().is_empty() {
            log.record(Operation::DropEmptyLine, vec![l.id.clone()], l.text.clone());
        } else {
            out.push(l.clone());
        }
    }
    out
}

/// The line-final hyphen of `text`, if it follows a non-space character.
fn word_final_hyphen(text: &str, opts: &CleanOptions) -> Option<(usize, char)> {
    let trimmed = text.trim_end();
    let mut rev = trimmed.char_indices().rev();
    let (pos, c) = rev.next()?;
    if !opts.is_hyphen(c) {
        return None;
    }
    match rev.next() {
        Some((_, prev)) if !prev.is_whitespace() && !opts.is_hyphen(prev) => Some((pos, c)),
        _ => None,
    }
}

/// Joins line-final hyphenated fragments with the first token of the next
/// line. The hyphen is left in place and the line flagged when there is no
/// next line, the next line is blank, or the next line's first token is
/// itself hyphenated with more text after it.
pub fn dehyphenate(lines: &[Line], opts: &CleanOptions, log: &mut ProvenanceLog) -> Vec<Line> {
    let mut out: Vec<Line> = Vec::with_capacity(lines.len());
    let mut pending: Vec<Line> = lines.to_vec();
    pending.reverse();
    while let Some(mut cur) = pending.pop() {
        while let Some((pos, hyphen)) = word_final_hyphen(&cur.text, opts) {
            let Some(next) = pending.last_mut() else {
                log.flag(&cur.id, FlagReason::UnmergedHyphen, &cur.text);
                break;
            };
            let rest = next.text.trim_start();
            let token_end = rest.find(char::is_whitespace).unwrap_or(rest.len());
            let (token, remainder) = rest.split_at(token_end);
            let remainder = remainder.trim_start();
            let token_hyphenated = token.chars().last().is_some_and(|c| opts.is_hyphen(c));
            if token.is_empty() || (token_hyphenated && !remainder.is_empty()) {
                log.flag(&cur.id, FlagReason::UnmergedHyphen, &cur.text);
                break;
            }
            log.entries.push(ProvenanceEntry {
                operation: Operation::Dehyphenate,
                line_ids: vec![cur.id.clone(), next.id.clone()],
                removed: hyphen.to_string(),
                moved: token.to_owned(),
            });
            let mut merged = cur.text[..pos].to_owned();
            merged.push_str(token);
            cur.text = merged;
            let remainder = remainder.to_owned();
            if remainder.is_empty() {
                pending.pop();
            } else {
                next.text = remainder;
            }
        }
        out.push(cur);
    }
    out
}

#[derive(Default)]
struct LetterCounts {
    letters: usize,
    latin: usize,
    greek: usize,
}

fn letter_counts(s: &str) -> LetterCounts {
    let mut c = LetterCounts::default();
    for ch in s.chars().filter(|c| c.is_alphabetic()) {
        c.letters += 1;
        if is_latin_letter(ch) {
            c.latin += 1;
        } else if is_greek_letter(ch) {
            c.greek += 1;
        }
    }
    c
}

/// Drops lines whose Latin share of letters exceeds `line_threshold`, then
/// removes all-Latin tokens from the remaining lines. Mixed-script tokens are
/// kept and flagged. A line containing any Greek letter is never dropped.
pub fn filter_latin(lines: &[Line], line_threshold: f64, log: &mut ProvenanceLog) -> Vec<Line> {
    let threshold = line_threshold.clamp(0.0, 1.0);
    let mut out = Vec::with_capacity(lines.len());
    for l in lines {
        let counts = letter_counts(&l.text);
        if counts.letters > 0 && counts.greek == 0 && counts.latin as f64 / counts.letters as f64 > threshold {
            log.record(Operation::DropLatinLine, vec![l.id.clone()], l.text.clone());
            continue;
        }
        let mut kept = Vec::new();
        let mut removed_any = false;
        for token in l.text.split_whitespace() {
            let tc = letter_counts(token);
            if tc.letters > 0 && tc.latin == tc.letters {
                log.record(Operation::DropLatinToken, vec![l.id.clone()], token);
                removed_any = true;
            } else {
                if tc.latin > 0 {
                    log.flag(&l.id, FlagReason::MixedScriptToken, token);
                }
                kept.push(token);
            }
        }
        let text = if removed_any { kept.join(" ") } else { l.text.clone() };
        out.push(Line { id: l.id.clone(), text });
    }
    out
}

/// drop_empty_lines, dehyphenate, filter_latin, repeated to a fixpoint.
/// Edits from every pass are logged; review flags come from the last pass.
pub fn clean(lines: &[Line], opts: &CleanOptions) -> (Vec<Line>, ProvenanceLog) {
    let mut log = ProvenanceLog::default();
    let mut current = lines.to_vec();
    loop {
        let mut pass = ProvenanceLog::default();
        let a = drop_empty_lines(&current, &mut pass);
        let b = dehyphenate(&a, opts, &mut pass);
        let c = filter_latin(&b, opts.latin_threshold, &mut pass);
        let done = pass.entries.is_empty();
        log.entries.extend(pass.entries);
        log.flags = pass.flags;
        current = c;
        if done {
            return (current, log);
        }
    }
}
