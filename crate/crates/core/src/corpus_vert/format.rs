use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{VertDocument, VertError, VertLine, VertPage, VertWord};
use crate::greek_text::intuitive_form;

fn escape_attr(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

/// Writes the document in vertical format:
///
/// ```text
/// <doc id="ID" date="DATE">
/// <page n="1" pdf="IMAGE">
/// <line id="LINE">
/// <w id="w1">
/// wordform<TAB>intuitive<TAB>lemma<TAB>intuitive_lemma<TAB>pos
/// </w>
/// </line>
/// </page>
/// </doc>
/// ```
///
/// `date` is omitted when absent. Attribute values are XML-escaped, with
/// tabs and line breaks as character references. UTF-8, LF, no BOM.
pub fn emit_vert<W: Write>(doc: &VertDocument, sink: &mut W) -> Result<(), VertError> {
    doc.validate()?;
    write!(sink, "<doc id=\"{}\"", escape_attr(&doc.doc_id))?;
    if let Some(date) = &doc.date {
        write!(sink, " date=\"{}\"", escape_attr(date))?;
    }
    sink.write_all(b">\n")?;
    for p in &doc.pages {
        writeln!(sink, "<page n=\"{}\" pdf=\"{}\">", p.n, escape_attr(&p.pdf))?;
        for l in &p.lines {
            writeln!(sink, "<line id=\"{}\">", escape_attr(&l.id))?;
            for w in &l.words {
                writeln!(sink, "<w id=\"{}\">", escape_attr(&w.id))?;
                writeln!(sink, "{}", w.fields().join("\t"))?;
                sink.write_all(b"</w>\n")?;
            }
            sink.write_all(b"</line>\n")?;
        }
        sink.write_all(b"</page>\n")?;
    }
    sink.write_all(b"</doc>\n")?;
    Ok(())
}

pub fn to_vert_string(doc: &VertDocument) -> Result<String, VertError> {
    let mut buf = Vec::new();
    emit_vert(doc, &mut buf)?;
    Ok(String::from_utf8(buf).expect("emitted text is UTF-8"))
}

/// Parses `<name a="v" b="w">` with attributes exactly from `allowed`
/// (in any order). Returns values in `allowed` order.
fn parse_open_tag(line: &str, name: &str, allowed: &[&str]) -> Result<Vec<Option<String>>, String> {
    let rest = line
        .strip_prefix('<')
        .and_then(|r| r.strip_prefix(name))
        .and_then(|r| r.strip_suffix('>'))
        .ok_or_else(|| format!("expected <{name} ...>"))?;
    let mut values = vec![None; allowed.len()];
    let mut rest = rest;
    while !rest.is_empty() {
        rest = rest.strip_prefix(' ').ok_or("expected a space before attribute")?;
        let eq = rest.find("=\"").ok_or("expected name=\"value\"")?;
        let key = &rest[..eq];
        rest = &rest[eq + 2..];
        let end = rest.find('"').ok_or("unterminated attribute value")?;
        let raw = &rest[..end];
        rest = &rest[end + 1..];
        if raw.contains('<') {
            return Err(format!("unescaped '<' in attribute {key}"));
        }
        let value = quick_xml::escape::unescape(raw).map_err(|e| format!("attribute {key}: {e}"))?;
        let slot = allowed
            .iter()
            .position(|a| *a == key)
            .ok_or_else(|| format!("unexpected attribute {key:?} on <{name}>"))?;
        if values[slot].replace(value.into_owned()).is_some() {
            return Err(format!("duplicate attribute {key:?}"));
        }
    }
    Ok(values)
}

fn required(v: Option<String>, tag: &str, attr: &str) -> Result<String, String> {
    v.ok_or_else(|| format!("<{tag}> lacks attribute {attr:?}"))
}

enum State {
    Start,
    Doc,
    Page,
    Line,
    WordOpen(String),
    WordFields,
    Done,
}

/// Parses text produced by [`emit_vert`]. Rejects a BOM, CR characters,
/// blank lines, unbalanced structure and token lines that do not have
/// exactly five tab-separated fields.
pub fn parse_vert(source: &str) -> Result<VertDocument, VertError> {
    let err = |line_no: usize, reason: String| VertError::MalformedVert { line_no, reason };
    if source.starts_with('\u{FEFF}') {
        return Err(err(1, "byte order mark".into()));
    }
    let body = source
        .strip_suffix('\n')
        .ok_or_else(|| err(source.lines().count().max(1), "missing final newline".into()))?;
    let mut doc = VertDocument::new("");
    let mut state = State::Start;
    for (i, line) in body.split('\n').enumerate() {
        let line_no = i + 1;
        let fail = |reason: String| err(line_no, reason);
        if line.contains('\r') {
            return Err(fail("carriage return".into()));
        }
        state = match state {
            State::Start => {
                let v = parse_open_tag(line, "doc", &["id", "date"]).map_err(fail)?;
                let mut v = v.into_iter();
                doc.doc_id = required(v.next().flatten(), "doc", "id").map_err(fail)?;
                doc.date = v.next().flatten();
                State::Doc
            }
            State::Doc if line == "</doc>" => State::Done,
            State::Doc => {
                let v = parse_open_tag(line, "page", &["n", "pdf"]).map_err(fail)?;
                let mut v = v.into_iter();
                let n = required(v.next().flatten(), "page", "n").map_err(fail)?;
                let n: u32 = n.parse().map_err(|_| fail(format!("page n {n:?} is not a number")))?;
                let pdf = required(v.next().flatten(), "page", "pdf").map_err(fail)?;
                doc.pages.push(VertPage {
                    n,
                    pdf,
                    lines: Vec::new(),
                });
                State::Page
            }
            State::Page if line == "</page>" => State::Doc,
            State::Page => {
                let v = parse_open_tag(line, "line", &["id"]).map_err(fail)?;
                let id = required(v.into_iter().next().flatten(), "line", "id").map_err(fail)?;
                let page = doc.pages.last_mut().expect("inside a page");
                page.lines.push(VertLine { id, words: Vec::new() });
                State::Line
            }
            State::Line if line == "</line>" => State::Page,
            State::Line => {
                let v = parse_open_tag(line, "w", &["id"]).map_err(fail)?;
                State::WordOpen(required(v.into_iter().next().flatten(), "w", "id").map_err(fail)?)
            }
            State::WordOpen(id) => {
                let f: Vec<&str> = line.split('\t').collect();
                if f.len() != 5 {
                    return Err(fail(format!("token line has {} fields, expected 5", f.len())));
                }
                if [f[0], f[2], f[4]].iter().any(|x| x.is_empty()) {
                    return Err(fail("empty wordform, lemma or pos".into()));
                }
                let word = VertWord {
                    id,
                    wordform: f[0].to_owned(),
                    intuitive_form: f[1].to_owned(),
                    lemma: f[2].to_owned(),
                    intuitive_lemma: f[3].to_owned(),
                    pos: f[4].to_owned(),
                };
                let page = doc.pages.last_mut().expect("inside a page");
                page.lines.last_mut().expect("inside a line").words.push(word);
                State::WordFields
            }
            State::WordFields if line == "</w>" => State::Line,
            State::WordFields => return Err(fail("expected </w>".into())),
            State::Done => return Err(fail("content after </doc>".into())),
        };
    }
    if !matches!(state, State::Done) {
        return Err(err(body.split('\n').count(), "unexpected end of input".into()));
    }
    doc.validate().map_err(|e| err(0, e.to_string()))?;
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationIssue {
    pub line_no: usize,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub token_lines: usize,
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.issues.is_empty()
    }
}

/// Line-level check of vert text that does not go through [`parse_vert`]:
/// every line after a `<w ...>` opener must have five fields, with field 2
/// equal to the intuitive form of field 1 and field 4 to that of field 3.
/// Tag nesting is checked with a stack.
pub fn validate_vert(text: &str) -> ValidationReport {
    let mut report = ValidationReport::default();
    let mut stack: Vec<&str> = Vec::new();
    let mut expect_token = false;
    let mut issue = |line_no: usize, message: String| report.issues.push(ValidationIssue { line_no, message });
    let mut token_lines = 0;
    for (i, line) in text.lines().enumerate() {
        let n = i + 1;
        if expect_token {
            expect_token = false;
            token_lines += 1;
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 5 {
                issue(n, format!("{} fields", f.len()));
                continue;
            }
            if f[1] != intuitive_form(f[0]) {
                issue(n, format!("field 2 {:?} is not the intuitive form of {:?}", f[1], f[0]));
            }
            if f[3] != intuitive_form(f[2]) {
                issue(n, format!("field 4 {:?} is not the intuitive form of {:?}", f[3], f[2]));
            }
            continue;
        }
        if let Some(name) = line.strip_prefix("</").and_then(|r| r.strip_suffix('>')) {
            if stack.pop() != Some(name) {
                issue(n, format!("unbalanced </{name}>"));
            }
        } else if let Some(rest) = line.strip_prefix('<') {
            let name = rest.split([' ', '>']).next().unwrap_or("");
            let parent = stack.last().copied();
            let ok = matches!(
                (parent, name),
                (None, "doc") | (Some("doc"), "page") | (Some("page"), "line") | (Some("line"), "w")
            );
            if !ok {
                issue(n, format!("<{name}> not allowed here"));
            }
            stack.push(name);
            expect_token = name == "w";
        } else {
            issue(n, "token line outside <w>".into());
        }
    }
    if !stack.is_empty() {
        issue(text.lines().count(), format!("unclosed <{}>", stack.join("> <")));
    }
    report.token_lines = token_lines;
    report
}
