//! Pages to vertical corpus: relevance filtering, linearization,
//! canonicalization, cleanup, tokenization and annotation.
//!
//! Pages are processed independently (in parallel when enabled); word ids
//! `w1..wN` are then assigned in page order so the output does not depend on
//! scheduling.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus_vert::{
    ambiguity_records, annotate, AmbiguityRecord, Lexicon, VertDocument, VertLine, VertPage, VertWord,
};
use crate::greek_text::CanonicalizationTable;
use crate::layout_model::{filter_relevant, linearize, load_page, LayoutError, Page};
use crate::par::{map_ordered, try_map_ordered, Execution};
use crate::text_pipeline::{clean, CleanOptions, Line, ProvenanceLog};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Page {
        path: PathBuf,
        #[source]
        source: LayoutError,
    },
}

/// Provenance of one page's cleanup.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PageProvenance {
    pub n: u32,
    pub pdf: String,
    #[serde(flatten)]
    pub log: ProvenanceLog,
}

#[derive(Debug, Clone)]
pub struct BuildOutput {
    pub document: VertDocument,
    pub provenance: Vec<PageProvenance>,
    pub ambiguities: Vec<AmbiguityRecord>,
    pub unknown_words: usize,
}

#[derive(Debug, Clone)]
pub struct BuildOptions<'a> {
    pub table: &'a CanonicalizationTable,
    pub lexicon: &'a Lexicon,
    pub clean: CleanOptions,
    pub execution: Execution,
}

/// Cleaned lines of one page after relevance filtering and canonicalization.
pub fn prepare_page(page: &Page, table: &CanonicalizationTable, opts: &CleanOptions) -> (Vec<Line>, ProvenanceLog) {
    let lines: Vec<Line> = linearize(&filter_relevant(page))
        .into_iter()
        .map(|l| Line::new(l.line_id, table.canonicalize(&l.text)))
        .collect();
    clean(&lines, opts)
}

/// Builds a document from pages given in document order. Page `n` is the
/// 1-based position and `pdf` the page's image reference.
pub fn build_vert(pages: &[Page], doc_id: &str, date: Option<&str>, opts: &BuildOptions) -> BuildOutput {
    let annotated = map_ordered(opts.execution, pages, |page| {
        let (lines, log) = prepare_page(page, opts.table, &opts.clean);
        let lines: Vec<(String, Vec<_>)> = lines
            .into_iter()
            .map(|l| {
                let words = crate::corpus_vert::tokenize(&l.text)
                    .iter()
                    .map(|w| annotate(w, opts.lexicon))
                    .collect();
                (l.id, words)
            })
            .collect();
        (lines, log)
    });

    let mut doc = VertDocument::new(doc_id);
    doc.date = date.map(str::to_owned);
    let mut provenance = Vec::with_capacity(pages.len());
    let mut next_word = 1usize;
    let mut unknown_words = 0;
    for (i, (page, (lines, log))) in pages.iter().zip(annotated).enumerate() {
        let n = u32::try_from(i + 1).expect("page count fits u32");
        let lines = lines
            .into_iter()
            .map(|(id, words)| VertLine {
                id,
                words: words
                    .into_iter()
                    .map(|a| {
                        unknown_words += usize::from(!a.known);
                        let w = VertWord::from_annotation(format!("w{next_word}"), a);
                        next_word += 1;
                        w
                    })
                    .collect(),
            })
            .collect();
        doc.pages.push(VertPage {
            n,
            pdf: page.image_ref.clone(),
            lines,
        });
        provenance.push(PageProvenance {
            n,
            pdf: page.image_ref.clone(),
            log,
        });
    }
    let ambiguities = ambiguity_records(&doc, opts.lexicon);
    BuildOutput {
        document: doc,
        provenance,
        ambiguities,
        unknown_words,
    }
}

/// Loads pages from files in the given order.
pub fn load_pages(paths: &[PathBuf], execution: Execution) -> Result<Vec<Page>, PipelineError> {
    try_map_ordered(execution, paths, |p| {
        load_page(p)
            .map(|parsed| parsed.page)
            .map_err(|source| PipelineError::Page {
                path: p.clone(),
                source,
            })
    })
}

/// `.xml` and `.json` files of a directory sorted by file name.
pub fn page_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if path.is_file() && matches!(ext.as_deref(), Some("xml" | "json")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::greek_text::default_table;
    use crate::layout_model::{Polygon, RegionClass, TextLine, TextRegion};

    fn region(id: &str, class: RegionClass, idx: usize, texts: &[&str]) -> TextRegion {
        TextRegion {
            id: id.into(),
            class,
            polygon: Polygon::rect(0.0, 0.0, 10.0, 10.0).unwrap(),
            lines: texts
                .iter()
                .enumerate()
                .map(|(i, t)| TextLine {
                    id: format!("{id}_l{i}"),
                    polygon: None,
                    text: (*t).into(),
                    reading_index: i,
                    score: None,
                })
                .collect(),
            reading_index: idx,
            score: None,
        }
    }

    fn page(image: &str) -> Page {
        Page {
            image_ref: image.into(),
            width: 100,
            height: 100,
            regions: vec![
                region("t", RegionClass::MainTextTitle, 0, &["ΛΟΓΟΣ Α\u{0374}."]),
                region("lat", RegionClass::MainTextColLatin, 1, &["Sermo primus"]),
                region(
                    "g",
                    RegionClass::MainTextColGreek,
                    2,
                    &["ὁ θεο-", "λ\u{1F79}γος est", ""],
                ),
                region("n", RegionClass::MarginaliaPageNumber, 3, &["12"]),
            ],
        }
    }

    #[test]
    fn builds_document() {
        let lex = Lexicon::parse_tsv("λόγος\tλόγος\tN\nὁ\tὁ\tART\n", default_table().clone()).unwrap();
        let opts = BuildOptions {
            table: default_table(),
            lexicon: &lex,
            clean: CleanOptions::default(),
            execution: Execution::Sequential,
        };
        let out = build_vert(&[page("a.png"), page("b.png")], "d", Some("4th c."), &opts);
        let doc = &out.document;
        assert_eq!(doc.pages.len(), 2);
        assert_eq!(doc.pages[1].n, 2);
        assert_eq!(doc.pages[1].pdf, "b.png");
        let forms: Vec<&str> = doc.pages[0]
            .lines
            .iter()
            .flat_map(|l| &l.words)
            .map(|w| w.wordform.as_str())
            .collect();
        assert_eq!(forms, ["ΛΟΓΟΣ", "Α\u{0374}", ".", "ὁ", "θεολόγος"]);
        let ids: Vec<&str> = doc.words().map(|w| w.id.as_str()).collect();
        assert_eq!(ids.first(), Some(&"w1"));
        assert_eq!(ids.last(), Some(&"w10"));
        assert!(out.provenance[0].log.entries.iter().any(|e| e.removed == "est"));
        let parallel = build_vert(
            &[page("a.png"), page("b.png")],
            "d",
            Some("4th c."),
            &BuildOptions {
                execution: Execution::Parallel,
                ..opts
            },
        );
        assert_eq!(parallel.document, out.document);
    }
}
