//! DailyMed SPL client: drug name to set id via the listing endpoint, then
//! set id to the full label document.

use std::fmt::Write as _;

use quick_xml::escape::resolve_predefined_entity;
use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{ExecError, Executor};
use crate::http::HttpRequest;
use crate::retrieval::tokenize;

pub const DAILYMED_BASE: &str = "https://dailymed.nlm.nih.gov/dailymed/services/v2";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DailymedError {
    #[error("drug name must be non-empty")]
    EmptyName,
    #[error("no DailyMed label found for `{0}`")]
    NotFound(String),
    #[error("DailyMed upstream error: {0}")]
    Upstream(String),
    #[error("malformed DailyMed response: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplSection {
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplDocument {
    pub set_id: String,
    pub version: u32,
    pub drug_name: String,
    pub sections: Vec<SplSection>,
}

impl SplDocument {
    pub fn section(&self, needle: &str) -> Option<&SplSection> {
        let needle = needle.to_lowercase();
        self.sections.iter().find(|s| s.title.to_lowercase().contains(&needle))
    }

    fn check(&self) -> Result<(), DailymedError> {
        if self.set_id.trim().is_empty() {
            return Err(DailymedError::Malformed("document has no set id".into()));
        }
        if self.version < 1 {
            return Err(DailymedError::Malformed("document version must be at least 1".into()));
        }
        if self.sections.is_empty() {
            return Err(DailymedError::Malformed("document has no sections".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplLookup {
    pub document: SplDocument,
    /// The listing held several distinct labels for the name.
    pub ambiguous: bool,
}

impl SplLookup {
    /// Full narrative as tool payload text.
    pub fn render(&self) -> String {
        let doc = &self.document;
        let mut out = format!(
            "Drug: {}\nSet ID: {}\nVersion: {}\n",
            doc.drug_name, doc.set_id, doc.version
        );
        if self.ambiguous {
            out.push_str("Note: several labels match this name; the most recent exact match was used.\n");
        }
        for s in &doc.sections {
            let _ = write!(out, "\n## {}\n{}\n", s.title, s.text);
        }
        out
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ListingEntry {
    pub setid: String,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub spl_version: u32,
    #[serde(default)]
    pub published_date: Option<String>,
}

#[derive(Debug, Deserialize)]
struct Listing {
    #[serde(default)]
    data: Vec<ListingEntry>,
}

pub fn listing_request(base: &str, drug_name: &str) -> HttpRequest {
    let mut url = url::Url::parse(&format!("{}/spls.json", base.trim_end_matches('/')))
        .expect("DailyMed base is a valid URL");
    url.query_pairs_mut().append_pair("drug_name", drug_name);
    HttpRequest::get(url.to_string())
}

pub fn label_request(base: &str, set_id: &str) -> HttpRequest {
    HttpRequest::get(format!("{}/spls/{}.xml", base.trim_end_matches('/'), set_id))
}

/// Highest version among entries whose title starts with the name's tokens,
/// else the first entry. The flag reports more than one distinct set id.
pub fn select_entry<'a>(drug_name: &str, entries: &'a [ListingEntry]) -> Option<(&'a ListingEntry, bool)> {
    let first = entries.first()?;
    let wanted = tokenize(drug_name);
    let mut best: Option<&ListingEntry> = None;
    for e in entries {
        if tokenize(&e.title).starts_with(&wanted) && best.is_none_or(|b| e.spl_version > b.spl_version) {
            best = Some(e);
        }
    }
    let mut ids: Vec<&str> = entries.iter().map(|e| e.setid.as_str()).collect();
    ids.sort_unstable();
    ids.dedup();
    Some((best.unwrap_or(first), ids.len() > 1))
}

fn collapse(text: &str) -> String {
    text.lines()
        .map(|l| l.split_whitespace().collect::<Vec<_>>().join(" "))
        .filter(|l| !l.is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

struct OpenSection {
    index: usize,
    title_done: bool,
}

const BLOCK_ELEMENTS: [&[u8]; 6] = [b"paragraph", b"item", b"tr", b"br", b"caption", b"list"];
// table cells end with a space so adjacent cells do not run together
const CELL_ELEMENTS: [&[u8]; 2] = [b"td", b"th"];

/// Parses an SPL XML document. Nested sections become separate entries in
/// document order; titles are kept as written, with whitespace collapsed.
pub fn parse_spl(xml: &str, fallback_name: &str) -> Result<SplDocument, DailymedError> {
    let mut reader = Reader::from_str(xml);
    let mut set_id = String::new();
    let mut version = 0u32;
    let mut drug_name = String::new();
    let mut raw: Vec<(String, String)> = Vec::new();
    let mut open: Vec<OpenSection> = Vec::new();
    let mut path: Vec<Vec<u8>> = Vec::new();
    // depth (in `path`) of the title or text element being captured
    let mut capture: Option<(usize, bool)> = None;
    let mut product_name_depth: Option<usize> = None;

    let malformed = |e: &dyn std::fmt::Display| DailymedError::Malformed(e.to_string());

    loop {
        let event = reader.read_event().map_err(|e| malformed(&e))?;
        match event {
            Event::Start(ref e) | Event::Empty(ref e) => {
                let is_empty = matches!(event, Event::Empty(_));
                let name = e.local_name().as_ref().to_vec();
                let parent = path.last().map(Vec::as_slice);
                match name.as_slice() {
                    b"setId" if parent == Some(b"document") => {
                        if let Some(a) = e.try_get_attribute("root").map_err(|e| malformed(&e))? {
                            set_id = a.unescape_value().map_err(|e| malformed(&e))?.into_owned();
                        }
                    }
                    b"versionNumber" if parent == Some(b"document") => {
                        if let Some(a) = e.try_get_attribute("value").map_err(|e| malformed(&e))? {
                            let v = a.unescape_value().map_err(|e| malformed(&e))?;
                            version = v.trim().parse().map_err(|_| malformed(&format!("bad version `{v}`")))?;
                        }
                    }
                    b"section" if !is_empty => {
                        raw.push((String::new(), String::new()));
                        open.push(OpenSection {
                            index: raw.len() - 1,
                            title_done: false,
                        });
                    }
                    b"title" if !is_empty && capture.is_none() => {
                        if let Some(s) = open.last() {
                            if !s.title_done && parent == Some(b"section") {
                                capture = Some((path.len(), true));
                            }
                        }
                    }
                    b"text" if !is_empty && capture.is_none() && parent == Some(b"section") => {
                        if !open.is_empty() {
                            capture = Some((path.len(), false));
                        }
                    }
                    b"name"
                        if !is_empty
                            && drug_name.is_empty()
                            && product_name_depth.is_none()
                            && matches!(parent, Some(b"manufacturedProduct" | b"manufacturedMedicine")) =>
                    {
                        product_name_depth = Some(path.len());
                    }
                    _ => {}
                }
                if is_empty {
                    if let (Some((_, false)), Some(s)) = (capture, open.last()) {
                        if BLOCK_ELEMENTS.contains(&name.as_slice()) {
                            raw[s.index].1.push('\n');
                        }
                    }
                } else {
                    path.push(name);
                }
            }
            Event::End(ref e) => {
                let name = e.local_name().as_ref().to_vec();
                if path.last() != Some(&name) {
                    return Err(malformed(&format!(
                        "unexpected closing tag `{}`",
                        String::from_utf8_lossy(&name)
                    )));
                }
                path.pop();
                if let Some((depth, is_title)) = capture {
                    if path.len() == depth {
                        capture = None;
                        if is_title {
                            if let Some(s) = open.last_mut() {
                                s.title_done = true;
                            }
                        }
                    } else if !is_title && BLOCK_ELEMENTS.contains(&name.as_slice()) {
                        if let Some(s) = open.last() {
                            raw[s.index].1.push('\n');
                        }
                    } else if !is_title && CELL_ELEMENTS.contains(&name.as_slice()) {
                        if let Some(s) = open.last() {
                            raw[s.index].1.push(' ');
                        }
                    }
                }
                if product_name_depth == Some(path.len()) {
                    product_name_depth = None;
                }
                if name == b"section" {
                    open.pop();
                }
            }
            Event::Text(ref t) => {
                let text = t.decode().map_err(|e| malformed(&e))?;
                push_text(&text, capture, &open, &mut raw, product_name_depth.is_some(), &mut drug_name);
            }
            Event::CData(ref t) => {
                let text = t.decode().map_err(|e| malformed(&e))?;
                push_text(&text, capture, &open, &mut raw, product_name_depth.is_some(), &mut drug_name);
            }
            Event::GeneralRef(ref r) => {
                let resolved = match r.resolve_char_ref().map_err(|e| malformed(&e))? {
                    Some(c) => c.to_string(),
                    None => {
                        let entity = r.decode().map_err(|e| malformed(&e))?;
                        resolve_predefined_entity(&entity)
                            .map(str::to_string)
                            .unwrap_or_else(|| format!("&{entity};"))
                    }
                };
                push_text(&resolved, capture, &open, &mut raw, product_name_depth.is_some(), &mut drug_name);
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if !path.is_empty() {
        return Err(malformed(&"document ends inside an open element"));
    }

    let sections: Vec<SplSection> = raw
        .into_iter()
        .map(|(title, text)| SplSection {
            title: title.split_whitespace().collect::<Vec<_>>().join(" "),
            text: collapse(&text),
        })
        .filter(|s| !(s.title.is_empty() && s.text.is_empty()))
        .collect();
    let drug_name = match drug_name.split_whitespace().collect::<Vec<_>>().join(" ") {
        n if n.is_empty() => fallback_name.trim().to_string(),
        n => n,
    };
    let doc = SplDocument {
        set_id,
        version,
        drug_name,
        sections,
    };
    doc.check()?;
    Ok(doc)
}

fn push_text(
    text: &str,
    capture: Option<(usize, bool)>,
    open: &[OpenSection],
    raw: &mut [(String, String)],
    in_product_name: bool,
    drug_name: &mut String,
) {
    if in_product_name {
        drug_name.push_str(text);
    }
    if let (Some((_, is_title)), Some(s)) = (capture, open.last()) {
        let slot = &mut raw[s.index];
        if is_title {
            slot.0.push_str(text);
        } else {
            slot.1.push_str(text);
        }
    }
}

fn upstream(err: ExecError) -> DailymedError {
    DailymedError::Upstream(err.to_string())
}

/// Resolves `drug_name` to its most recent label and parses it.
pub fn dailymed_lookup(executor: &Executor, drug_name: &str) -> Result<SplLookup, DailymedError> {
    let name = drug_name.trim();
    if name.is_empty() {
        return Err(DailymedError::EmptyName);
    }
    let base = &executor.env().dailymed_base;
    let listing = match executor.fetch_ok(&listing_request(base, name)) {
        Ok(body) => body,
        // in fixtures-only mode an unrecorded name is simply unknown
        Err(ExecError::FixtureMissing(_)) | Err(ExecError::Status(404)) => {
            return Err(DailymedError::NotFound(name.to_string()))
        }
        Err(e) => return Err(upstream(e)),
    };
    let listing: Listing =
        serde_json::from_str(&listing).map_err(|e| DailymedError::Malformed(format!("listing: {e}")))?;
    let (entry, ambiguous) =
        select_entry(name, &listing.data).ok_or_else(|| DailymedError::NotFound(name.to_string()))?;
    let xml = executor
        .fetch_ok(&label_request(base, &entry.setid))
        .map_err(upstream)?;
    let mut document = parse_spl(&xml, name)?;
    if document.version == 0 {
        document.version = entry.spl_version;
    }
    Ok(SplLookup { document, ambiguous })
}
