//! Reader and writer for the PAGE XML subset used by layout ground truth.
//!
//! Recognized elements: `Page` (imageFilename, imageWidth, imageHeight),
//! `TextRegion` (id, custom `structure {type:...;}`), `Coords` (`points` or
//! `Point` children), `TextLine` (id, Coords, first `TextEquiv/Unicode`) and
//! `ReadingOrder/OrderedGroup/RegionRefIndexed`. Anything else, including
//! `Word` and `Glyph` content, is skipped. Namespaces are ignored.

use std::collections::HashMap;

use quick_xml::escape::resolve_predefined_entity;
use quick_xml::events::{BytesStart, Event};
use quick_xml::{Reader, XmlVersion};

use super::{
    LayoutError, Page, ParseReport, ParsedPage, Polygon, ReadingOrderSource, RegionClass, TextLine, TextRegion,
};

#[derive(Default)]
struct LineBuilder {
    id: String,
    custom: Option<String>,
    coords: Option<String>,
    points: Vec<(f64, f64)>,
    text: Option<String>,
}

#[derive(Default)]
struct RegionBuilder {
    id: String,
    custom: Option<String>,
    coords: Option<String>,
    points: Vec<(f64, f64)>,
    lines: Vec<LineBuilder>,
}

#[derive(Default)]
struct State {
    page: Option<(String, u32, u32)>,
    regions: Vec<RegionBuilder>,
    /// Open TextRegion indices into `regions`.
    open_regions: Vec<usize>,
    open_line: Option<(usize, LineBuilder)>,
    /// Local names of open elements.
    stack: Vec<String>,
    /// Text being collected for the current line's first TextEquiv.
    capture: Option<String>,
    line_has_equiv: bool,
    groups: Vec<Vec<(i64, String)>>,
    region_order: Vec<String>,
}

fn local(e: &BytesStart<'_>) -> String {
    e.local_name().as_ref().to_owned()
}

fn attrs(e: &BytesStart<'_>) -> Result<HashMap<String, String>, LayoutError> {
    let mut out = HashMap::new();
    for attr in e.attributes() {
        let attr = attr.map_err(|err| LayoutError::MalformedXml(err.to_string()))?;
        let key = attr.key.local_name().as_ref().to_owned();
        let value = attr
            .normalized_value(XmlVersion::Implicit1_0)
            .map_err(|err| LayoutError::MalformedXml(err.to_string()))?
            .into_owned();
        out.insert(key, value);
    }
    Ok(out)
}

fn parse_coord(s: &str, what: &str) -> Result<f64, LayoutError> {
    s.trim()
        .parse()
        .map_err(|_| LayoutError::InvalidCoords(format!("bad {what} {s:?}")))
}

impl State {
    fn parent(&self) -> Option<&str> {
        self.stack.last().map(String::as_str)
    }

    fn start(&mut self, e: &BytesStart<'_>, empty: bool) -> Result<(), LayoutError> {
        let name = local(e);
        let parent = self.parent().map(str::to_owned);
        match name.as_str() {
            "Page" => {
                let a = attrs(e)?;
                let dim = |key: &str| -> Result<u32, LayoutError> {
                    let v = a
                        .get(key)
                        .ok_or_else(|| LayoutError::MalformedXml(format!("Page lacks {key}")))?;
                    v.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite() && *x >= 0.0)
                        .map(|x| x.round() as u32)
                        .ok_or_else(|| LayoutError::MalformedXml(format!("bad {key} {v:?}")))
                };
                let image = a.get("imageFilename").cloned().unwrap_or_default();
                self.page = Some((image, dim("imageWidth")?, dim("imageHeight")?));
            }
            "TextRegion" => {
                let a = attrs(e)?;
                let id = a
                    .get("id")
                    .cloned()
                    .ok_or_else(|| LayoutError::MalformedXml("TextRegion without id".into()))?;
                self.regions.push(RegionBuilder {
                    id,
                    custom: a.get("custom").cloned(),
                    ..Default::default()
                });
                if !empty {
                    self.open_regions.push(self.regions.len() - 1);
                }
            }
            "TextLine" => {
                let region = *self
                    .open_regions
                    .last()
                    .ok_or_else(|| LayoutError::MalformedXml("TextLine outside TextRegion".into()))?;
                let a = attrs(e)?;
                let id = a
                    .get("id")
                    .cloned()
                    .ok_or_else(|| LayoutError::MalformedXml("TextLine without id".into()))?;
                let line = LineBuilder {
                    id,
                    custom: a.get("custom").cloned(),
                    ..Default::default()
                };
                if empty {
                    self.regions[region].lines.push(line);
                } else {
                    self.open_line = Some((region, line));
                    self.line_has_equiv = false;
                }
            }
            "Coords" => {
                let points = attrs(e)?.get("points").cloned();
                match parent.as_deref() {
                    Some("TextLine") => {
                        if let Some((_, line)) = self.open_line.as_mut() {
                            line.coords = points;
                        }
                    }
                    Some("TextRegion") => {
                        if let Some(&r) = self.open_regions.last() {
                            self.regions[r].coords = points;
                        }
                    }
                    _ => {}
                }
            }
            "Point" => {
                let grandparent = self.stack.iter().rev().nth(1).map(String::as_str);
                if parent.as_deref() == Some("Coords") {
                    let a = attrs(e)?;
                    let x = parse_coord(a.get("x").map(String::as_str).unwrap_or(""), "x")?;
                    let y = parse_coord(a.get("y").map(String::as_str).unwrap_or(""), "y")?;
                    match grandparent {
                        Some("TextLine") => {
                            if let Some((_, line)) = self.open_line.as_mut() {
                                line.points.push((x, y));
                            }
                        }
                        Some("TextRegion") => {
                            if let Some(&r) = self.open_regions.last() {
                                self.regions[r].points.push((x, y));
                            }
                        }
                        _ => {}
                    }
                }
            }
            "TextEquiv" => {}
            "Unicode" => {
                let in_line_equiv = parent.as_deref() == Some("TextEquiv")
                    && self.stack.iter().rev().nth(1).map(String::as_str) == Some("TextLine");
                if in_line_equiv && !self.line_has_equiv {
                    self.line_has_equiv = true;
                    if empty {
                        if let Some((_, line)) = self.open_line.as_mut() {
                            line.text = Some(String::new());
                        }
                    } else {
                        self.capture = Some(String::new());
                    }
                }
            }
            "OrderedGroup" | "OrderedGroupIndexed" => {
                if !empty {
                    self.groups.push(Vec::new());
                }
            }
            "RegionRefIndexed" => {
                let a = attrs(e)?;
                if let (Some(group), Some(r)) = (self.groups.last_mut(), a.get("regionRef")) {
                    let index = a.get("index").and_then(|i| i.trim().parse().ok()).unwrap_or(i64::MAX);
                    group.push((index, r.clone()));
                }
            }
            _ => {}
        }
        if !empty {
            self.stack.push(name);
        }
        Ok(())
    }

    fn end(&mut self) {
        let Some(name) = self.stack.pop() else { return };
        match name.as_str() {
            "TextRegion" => {
                self.open_regions.pop();
            }
            "TextLine" => {
                if let Some((region, line)) = self.open_line.take() {
                    self.regions[region].lines.push(line);
                }
            }
            "Unicode" => {
                if let Some(text) = self.capture.take() {
                    if let Some((_, line)) = self.open_line.as_mut() {
                        line.text = Some(text);
                    }
                }
            }
            "OrderedGroup" | "OrderedGroupIndexed" => {
                if let Some(mut group) = self.groups.pop() {
                    group.sort_by_key(|(i, _)| *i);
                    self.region_order.extend(group.into_iter().map(|(_, r)| r));
                }
            }
            _ => {}
        }
    }
}

/// `readingOrder {index:0;} structure {type:MainText_ColGreek;}` into
/// `(block, key) -> value`.
fn parse_custom(custom: &str) -> HashMap<(String, String), String> {
    let mut out = HashMap::new();
    let mut rest = custom;
    while let Some(open) = rest.find('{') {
        let block = rest[..open].trim().to_owned();
        let Some(close) = rest[open..].find('}') else { break };
        let body = &rest[open + 1..open + close];
        for entry in body.split(';') {
            if let Some((k, v)) = entry.split_once(':') {
                out.insert((block.clone(), k.trim().to_owned()), v.trim().to_owned());
            }
        }
        rest = &rest[open + close + 1..];
    }
    out
}

fn custom_index(custom: &Option<String>) -> Option<i64> {
    let map = parse_custom(custom.as_deref()?);
    map.get(&("readingOrder".to_owned(), "index".to_owned()))?.parse().ok()
}

/// Ranks items by an explicit key, ties broken by document order.
fn ranks_by_key(keys: &[i64]) -> (Vec<usize>, bool) {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by_key(|&i| keys[i]);
    let mut ranks = vec![0; keys.len()];
    for (rank, &i) in order.iter().enumerate() {
        ranks[i] = rank;
    }
    let mut sorted = keys.to_vec();
    sorted.sort_unstable();
    let has_duplicates = sorted.windows(2).any(|w| w[0] == w[1]);
    (ranks, has_duplicates)
}

fn build_polygon(coords: Option<String>, points: Vec<(f64, f64)>) -> Option<Result<Polygon, LayoutError>> {
    match coords {
        Some(c) => Some(Polygon::parse_points(&c)),
        None if !points.is_empty() => Some(Polygon::new(points)),
        None => None,
    }
}

/// Parses a PAGE XML document.
pub fn parse_page_xml(xml: &str) -> Result<ParsedPage, LayoutError> {
    let mut reader = Reader::from_str(xml);
    let mut st = State::default();
    loop {
        let event = reader
            .read_event()
            .map_err(|e| LayoutError::MalformedXml(format!("at byte {}: {e}", reader.error_position())))?;
        match event {
            Event::Start(e) => st.start(&e, false)?,
            Event::Empty(e) => st.start(&e, true)?,
            Event::End(_) => st.end(),
            Event::Text(t) => {
                if let Some(buf) = st.capture.as_mut() {
                    buf.push_str(&t.xml10_content());
                }
            }
            Event::CData(t) => {
                if let Some(buf) = st.capture.as_mut() {
                    buf.push_str(&t);
                }
            }
            Event::GeneralRef(r) => {
                if let Some(buf) = st.capture.as_mut() {
                    let resolved = r
                        .resolve_char_ref()
                        .map_err(|e| LayoutError::MalformedXml(e.to_string()))?;
                    match resolved {
                        Some(c) => buf.push(c),
                        None => {
                            let name: &str = &r;
                            let value = resolve_predefined_entity(name)
                                .ok_or_else(|| LayoutError::MalformedXml(format!("unknown entity &{name};")))?;
                            buf.push_str(value);
                        }
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !st.stack.is_empty() {
        return Err(LayoutError::MalformedXml(format!(
            "unclosed element <{}>",
            st.stack.last().unwrap()
        )));
    }
    let (image_ref, width, height) = st
        .page
        .ok_or_else(|| LayoutError::MalformedXml("no Page element".into()))?;

    let mut warnings = Vec::new();
    let mut regions = Vec::with_capacity(st.regions.len());
    let mut region_keys = Vec::with_capacity(st.regions.len());
    for rb in st.regions {
        let custom = rb.custom.as_deref().map(parse_custom).unwrap_or_default();
        let label = custom
            .get(&("structure".to_owned(), "type".to_owned()))
            .ok_or_else(|| LayoutError::MissingRegionClass(rb.id.clone()))?;
        let class: RegionClass = label.parse()?;
        let polygon = build_polygon(rb.coords, rb.points)
            .ok_or_else(|| LayoutError::MissingCoords(format!("region {}", rb.id)))??;

        let line_keys: Vec<Option<i64>> = rb.lines.iter().map(|l| custom_index(&l.custom)).collect();
        let line_ranks: Vec<usize> = if !line_keys.is_empty() && line_keys.iter().all(Option::is_some) {
            let keys: Vec<i64> = line_keys.iter().map(|k| k.unwrap()).collect();
            let (ranks, dup) = ranks_by_key(&keys);
            if dup {
                warnings.push(format!("region {}: duplicate line reading indices", rb.id));
            }
            ranks
        } else {
            if line_keys.iter().any(Option::is_some) {
                warnings.push(format!(
                    "region {}: partial line reading order ignored, using document order",
                    rb.id
                ));
            }
            (0..line_keys.len()).collect()
        };

        let mut lines = Vec::with_capacity(rb.lines.len());
        for (lb, rank) in rb.lines.into_iter().zip(line_ranks) {
            let polygon = match build_polygon(lb.coords, lb.points) {
                Some(Ok(p)) => Some(p),
                Some(Err(e)) => {
                    warnings.push(format!("line {}: {e}; polygon dropped", lb.id));
                    None
                }
                None => None,
            };
            lines.push(TextLine {
                id: lb.id,
                polygon,
                text: lb.text.unwrap_or_default(),
                reading_index: rank,
                score: None,
            });
        }
        region_keys.push(custom_index(&rb.custom));
        regions.push(TextRegion {
            id: rb.id,
            class,
            polygon,
            lines,
            reading_index: 0,
            score: None,
        });
    }

    let source = if !st.region_order.is_empty() {
        let position: HashMap<&str, usize> = st
            .region_order
            .iter()
            .enumerate()
            .rev()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        for id in &st.region_order {
            if !regions.iter().any(|r| &r.id == id) {
                warnings.push(format!("reading order references unknown region {id}"));
            }
        }
        let keys: Vec<i64> = regions
            .iter()
            .enumerate()
            .map(|(doc_idx, r)| match position.get(r.id.as_str()) {
                Some(&p) => p as i64,
                None => {
                    warnings.push(format!("region {} missing from reading order", r.id));
                    (st.region_order.len() + doc_idx) as i64
                }
            })
            .collect();
        let (ranks, _) = ranks_by_key(&keys);
        for (r, rank) in regions.iter_mut().zip(ranks) {
            r.reading_index = rank;
        }
        ReadingOrderSource::ReadingOrderElement
    } else if !region_keys.is_empty() && region_keys.iter().all(Option::is_some) {
        let keys: Vec<i64> = region_keys.iter().map(|k| k.unwrap()).collect();
        let (ranks, dup) = ranks_by_key(&keys);
        if dup {
            warnings.push("duplicate region reading indices".into());
        }
        for (r, rank) in regions.iter_mut().zip(ranks) {
            r.reading_index = rank;
        }
        ReadingOrderSource::CustomIndex
    } else {
        if region_keys.iter().any(Option::is_some) {
            warnings.push("partial region reading order ignored, using document order".into());
        }
        for (i, r) in regions.iter_mut().enumerate() {
            r.reading_index = i;
        }
        ReadingOrderSource::DocumentOrder
    };

    let page = Page {
        image_ref,
        width,
        height,
        regions,
    };
    warnings.extend(page.bounds_warnings());
    Ok(ParsedPage {
        page,
        report: ParseReport {
            reading_order: source,
            warnings,
        },
    })
}

fn escape_xml(s: &str, attribute: bool) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' if attribute => out.push_str("&quot;"),
            '\r' => out.push_str("&#13;"),
            '\n' if attribute => out.push_str("&#10;"),
            '\t' if attribute => out.push_str("&#9;"),
            _ => out.push(c),
        }
    }
    out
}

/// Serializes a page to the PAGE XML subset. Reading order is written both
/// as a `ReadingOrder` element and as `custom` indices.
pub fn write_page_xml(page: &Page) -> String {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    out.push_str("<PcGts xmlns=\"http://schema.primaresearch.org/PAGE/gts/pagecontent/2013-07-15\">\n");
    out.push_str(&format!(
        "  <Page imageFilename=\"{}\" imageWidth=\"{}\" imageHeight=\"{}\">\n",
        escape_xml(&page.image_ref, true),
        page.width,
        page.height
    ));
    if !page.regions.is_empty() {
        out.push_str("    <ReadingOrder>\n      <OrderedGroup id=\"ro_1\">\n");
        for (i, r) in page.regions_in_reading_order().into_iter().enumerate() {
            out.push_str(&format!(
                "        <RegionRefIndexed index=\"{i}\" regionRef=\"{}\"/>\n",
                escape_xml(&r.id, true)
            ));
        }
        out.push_str("      </OrderedGroup>\n    </ReadingOrder>\n");
    }
    for r in &page.regions {
        out.push_str(&format!(
            "    <TextRegion id=\"{}\" custom=\"readingOrder {{index:{};}} structure {{type:{};}}\">\n",
            escape_xml(&r.id, true),
            r.reading_index,
            r.class.label()
        ));
        out.push_str(&format!(
            "      <Coords points=\"{}\"/>\n",
            r.polygon.to_points_string()
        ));
        for l in &r.lines {
            out.push_str(&format!(
                "      <TextLine id=\"{}\" custom=\"readingOrder {{index:{};}}\">\n",
                escape_xml(&l.id, true),
                l.reading_index
            ));
            if let Some(p) = &l.polygon {
                out.push_str(&format!("        <Coords points=\"{}\"/>\n", p.to_points_string()));
            }
            out.push_str(&format!(
                "        <TextEquiv><Unicode>{}</Unicode></TextEquiv>\n",
                escape_xml(&l.text, false)
            ));
            out.push_str("      </TextLine>\n");
        }
        out.push_str("    </TextRegion>\n");
    }
    out.push_str("  </Page>\n</PcGts>\n");
    out
}
