//! Page layout ground truth: semantic regions, line polygons and reading
//! order.
//!
//! Pages come from a PAGE-style XML subset (see [`page_xml`]) or from the
//! JSON mirror produced by serde on [`Page`]. Only Greek columns and titles
//! feed the text pipeline; [`filter_relevant`] drops everything else.

mod geometry;
pub mod page_xml;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use geometry::{intersection_area, polygon_iou, BBox, Point, Polygon};
pub use page_xml::{parse_page_xml, write_page_xml};

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("unknown region class {0:?}")]
    UnknownRegionClass(String),
    #[error("region {0:?} has no structure type")]
    MissingRegionClass(String),
    #[error("{0} has no coordinates")]
    MissingCoords(String),
    #[error("invalid coordinates: {0}")]
    InvalidCoords(String),
    #[error("degenerate polygon (zero area)")]
    DegeneratePolygon,
    #[error("malformed page JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// The eight semantic zone classes of the ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum RegionClass {
    MainTextColGreek,
    MainTextColLatin,
    MainTextTitle,
    Marginalia,
    MarginaliaFootnote,
    MarginaliaPageNumber,
    MarginaliaParagraphNumber,
    TitleRunningTitle,
}

impl RegionClass {
    pub const ALL: [RegionClass; 8] = [
        RegionClass::MainTextColGreek,
        RegionClass::MainTextColLatin,
        RegionClass::MainTextTitle,
        RegionClass::Marginalia,
        RegionClass::MarginaliaFootnote,
        RegionClass::MarginaliaPageNumber,
        RegionClass::MarginaliaParagraphNumber,
        RegionClass::TitleRunningTitle,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RegionClass::MainTextColGreek => "MainText_ColGreek",
            RegionClass::MainTextColLatin => "MainText_ColLatin",
            RegionClass::MainTextTitle => "MainText_Title",
            RegionClass::Marginalia => "Marginalia",
            RegionClass::MarginaliaFootnote => "Marginalia_Footnote",
            RegionClass::MarginaliaPageNumber => "Marginalia_PageNumber",
            RegionClass::MarginaliaParagraphNumber => "Marginalia_ParagraphNumber",
            RegionClass::TitleRunningTitle => "Title_RunningTitle",
        }
    }

    /// Greek columns and titles are the only classes carried into the corpus.
    pub fn is_relevant(self) -> bool {
        matches!(self, RegionClass::MainTextColGreek | RegionClass::MainTextTitle)
    }
}

impl fmt::Display for RegionClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for RegionClass {
    type Err = LayoutError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "Running" {
            return Ok(RegionClass::TitleRunningTitle);
        }
        RegionClass::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| LayoutError::UnknownRegionClass(s.to_owned()))
    }
}

impl TryFrom<String> for RegionClass {
    type Error = LayoutError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<RegionClass> for String {
    fn from(c: RegionClass) -> Self {
        c.label().to_owned()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextLine {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polygon: Option<Polygon>,
    #[serde(default)]
    pub text: String,
    pub reading_index: usize,
    /// Confidence, only present on predicted layouts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextRegion {
    pub id: String,
    pub class: RegionClass,
    pub polygon: Polygon,
    #[serde(default)]
    pub lines: Vec<TextLine>,
    pub reading_index: usize,
    /// Confidence, only present on predicted layouts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
}

impl TextRegion {
    /// Lines sorted by reading index.
    pub fn lines_in_reading_order(&self) -> Vec<&TextLine> {
        let mut lines: Vec<&TextLine> = self.lines.iter().collect();
        lines.sort_by_key(|l| l.reading_index);
        lines
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Page {
    pub image_ref: String,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub regions: Vec<TextRegion>,
}

impl Page {
    pub fn from_json(text: &str) -> Result<Self, LayoutError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("page serializes")
    }

    /// Regions sorted by reading index.
    pub fn regions_in_reading_order(&self) -> Vec<&TextRegion> {
        let mut regions: Vec<&TextRegion> = self.regions.iter().collect();
        regions.sort_by_key(|r| r.reading_index);
        regions
    }

    /// Polygons that leave the page frame, as human-readable warnings.
    pub fn bounds_warnings(&self) -> Vec<String> {
        let (w, h) = (self.width as f64, self.height as f64);
        let mut warnings = Vec::new();
        for region in &self.regions {
            if !region.polygon.within(w, h) {
                warnings.push(format!("region {} extends outside the page", region.id));
            }
            for line in &region.lines {
                if matches!(&line.polygon, Some(p) if !p.within(w, h)) {
                    warnings.push(format!("line {} extends outside the page", line.id));
                }
            }
        }
        warnings
    }
}

/// Where region reading order was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadingOrderSource {
    /// A `ReadingOrder` element with indexed region references.
    ReadingOrderElement,
    /// `readingOrder {index:N;}` in region `custom` attributes.
    CustomIndex,
    /// No explicit order; document order was used.
    DocumentOrder,
}

/// Diagnostics collected while parsing a page.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParseReport {
    pub reading_order: ReadingOrderSource,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedPage {
    pub page: Page,
    pub report: ParseReport,
}

/// Loads a page from `.xml` (PAGE subset) or `.json` (mirror) by extension.
pub fn load_page(path: &Path) -> Result<ParsedPage, LayoutError> {
    let text = std::fs::read_to_string(path).map_err(|source| LayoutError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let is_json = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let page = Page::from_json(&text)?;
        let warnings = page.bounds_warnings();
        Ok(ParsedPage {
            page,
            report: ParseReport {
                reading_order: ReadingOrderSource::CustomIndex,
                warnings,
            },
        })
    } else {
        parse_page_xml(&text)
    }
}

/// Keeps only Greek-column and title regions, in their original order.
pub fn filter_relevant(page: &Page) -> Page {
    Page {
        image_ref: page.image_ref.clone(),
        width: page.width,
        height: page.height,
        regions: page.regions.iter().filter(|r| r.class.is_relevant()).cloned().collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LinearLine {
    pub line_id: String,
    pub text: String,
}

/// Lines region by region in region reading order, then by line reading
/// order within each region.
pub fn linearize(page: &Page) -> Vec<LinearLine> {
    page.regions_in_reading_order()
        .into_iter()
        .flat_map(|r| r.lines_in_reading_order())
        .map(|l| LinearLine {
            line_id: l.id.clone(),
            text: l.text.clone(),
        })
        .collect()
}
