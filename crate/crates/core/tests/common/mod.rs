#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use proptest::prelude::*;

use pg_forge_core::corpus_vert::{annotate, Lexicon, VertDocument, VertLine, VertPage, VertWord};
use pg_forge_core::layout_model::Polygon;

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
}

/// Thirty Greek codepoints: plain letters, tonos forms and their oxia twins.
pub const GREEK_30: [char; 30] = [
    'α', 'β', 'γ', 'δ', 'ε', 'η', 'ι', 'κ', 'λ', 'ο', 'π', 'σ', 'ς', 'τ', 'υ', 'ω', '\u{03AC}', '\u{1F71}', '\u{03AD}',
    '\u{1F73}', '\u{03AE}', '\u{1F75}', '\u{03AF}', '\u{1F77}', '\u{03CC}', '\u{1F79}', '\u{03CD}', '\u{1F7B}',
    '\u{03CE}', '\u{1F7D}',
];

/// The seven tonos/oxia pairs.
pub const TONOS_OXIA: [(char, char); 7] = [
    ('\u{03AF}', '\u{1F77}'),
    ('\u{03AC}', '\u{1F71}'),
    ('\u{03AD}', '\u{1F73}'),
    ('\u{03CC}', '\u{1F79}'),
    ('\u{03CD}', '\u{1F7B}'),
    ('\u{03AE}', '\u{1F75}'),
    ('\u{03CE}', '\u{1F7D}'),
];

/// Levenshtein distance by its recursive definition, memoized on suffix
/// positions.
pub fn recursive_levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let d = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), d);
        d
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

/// Unmemoized recursion; exponential, only for very short inputs.
pub fn naive_levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    match (a.split_first(), b.split_first()) {
        (None, _) => b.len(),
        (_, None) => a.len(),
        (Some((x, ra)), Some((y, rb))) => {
            if x == y {
                naive_levenshtein(ra, rb)
            } else {
                1 + naive_levenshtein(ra, b)
                    .min(naive_levenshtein(a, rb))
                    .min(naive_levenshtein(ra, rb))
            }
        }
    }
}

/// Full-matrix Wagner-Fischer distance.
pub fn full_dp<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut d = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in d.iter_mut().enumerate() {
        row[0] = i;
    }
    for (j, cell) in d[0].iter_mut().enumerate() {
        *cell = j;
    }
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = d[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            d[i][j] = sub.min(d[i - 1][j] + 1).min(d[i][j - 1] + 1);
        }
    }
    d[a.len()][b.len()]
}

pub fn greek30_string(max_len: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(GREEK_30.to_vec()), 0..=max_len).prop_map(|v| v.into_iter().collect())
}

/// Mixed text: polytonic letters, combining marks, Latin, digits,
/// punctuation (Greek ones included), hyphens and whitespace.
pub fn messy_char() -> impl Strategy<Value = char> {
    prop_oneof![
        4 => prop::sample::select(GREEK_30.to_vec()),
        2 => prop::char::range('\u{1F00}', '\u{1FFE}'),
        1 => prop::char::range('\u{0386}', '\u{03CE}'),
        1 => prop::sample::select(vec!['\u{0301}', '\u{0313}', '\u{0314}', '\u{0342}', '\u{0345}', '\u{0308}', '\u{0300}']),
        2 => prop::char::range('a', 'z'),
        1 => prop::char::range('A', 'Z'),
        1 => prop::sample::select(vec!['.', ',', ';', '\u{0387}', '\u{037E}', '\u{0374}', '’', '«', '»', '(', ')', '0', '7']),
        1 => prop::sample::select(vec!['-', '\u{2010}', '\u{2011}']),
        2 => Just(' '),
    ]
}

pub fn messy_string(max_len: usize) -> impl Strategy<Value = String> {
    prop::collection::vec(messy_char(), 0..=max_len).prop_map(|v| v.into_iter().collect())
}

/// Lines that often end in a hyphen and include blanks and Latin words.
pub fn ocr_lines() -> impl Strategy<Value = Vec<String>> {
    let line = prop_oneof![
        4 => messy_string(24),
        1 => Just(String::new()),
        1 => Just("  ".to_owned()),
        2 => (messy_string(12), prop::sample::select(vec!["-", "\u{2010}", " -", "--"])).prop_map(|(s, h)| s + h),
        1 => Just("Sancti Patris nostri".to_owned()),
    ];
    prop::collection::vec(line, 0..8)
}

/// Axis-aligned rectangles with integer corners inside a 100x100 canvas.
pub fn rect() -> impl Strategy<Value = Polygon> {
    (0i32..90, 0i32..90, 1i32..40, 1i32..40)
        .prop_map(|(x, y, w, h)| Polygon::rect(x as f64, y as f64, w as f64, h as f64).unwrap())
}

/// Star-shaped simple polygons around a centre, possibly concave.
pub fn star_polygon() -> impl Strategy<Value = Polygon> {
    (20.0f64..80.0, 20.0f64..80.0, prop::collection::vec(3.0f64..20.0, 3..9)).prop_map(|(cx, cy, radii)| {
        let n = radii.len();
        let pts = radii
            .iter()
            .enumerate()
            .map(|(i, r)| {
                let t = std::f64::consts::TAU * i as f64 / n as f64;
                (cx + r * t.cos(), cy + r * t.sin())
            })
            .collect();
        Polygon::new(pts).unwrap()
    })
}

fn vert_text() -> impl Strategy<Value = String> {
    prop::collection::vec(messy_char(), 1..10)
        .prop_map(|v| v.into_iter().filter(|c| !c.is_whitespace()).collect::<String>())
        .prop_filter("non-empty", |s| !s.is_empty())
}

/// Random documents with attribute values that need escaping.
pub fn vert_document() -> impl Strategy<Value = VertDocument> {
    let attr = "[a-zA-Z0-9 _&<>\"'\\t\\nα-ω.-]{0,12}";
    let word = vert_text();
    let line = prop::collection::vec(word, 0..5);
    let page = (attr, prop::collection::vec(line, 0..4));
    (attr, prop::option::of(attr), prop::collection::vec(page, 0..4)).prop_map(|(doc_id, date, pages)| {
        let lex = Lexicon::default();
        let mut next = 0;
        let pages = pages
            .into_iter()
            .enumerate()
            .map(|(pi, (pdf, lines))| VertPage {
                n: pi as u32 + 1,
                pdf,
                lines: lines
                    .into_iter()
                    .enumerate()
                    .map(|(li, words)| VertLine {
                        id: format!("p{pi}<l{li}>"),
                        words: words
                            .iter()
                            .map(|w| {
                                next += 1;
                                VertWord::from_annotation(format!("w{next}"), annotate(w, &lex))
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect();
        VertDocument { doc_id, date, pages }
    })
}
