//! Wiktionary dumps: page indexing, article section walks and wikitext
//! stripping, producing the first numbered English definition of a lemma.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use quick_xml::escape::resolve_predefined_entity;
use quick_xml::events::Event;
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::morphology::Pos;

const INDEX_MAGIC: &str = "DEFAUG-WIKTIONARY-INDEX v1";

#[derive(Debug, Error)]
pub enum WiktionaryError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed dump {path} at byte {offset}: {message}")]
    Xml {
        path: PathBuf,
        offset: u64,
        message: String,
    },
    #[error("bad index file {path}: {message}")]
    Index { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dictionary {
    SimpleEnglish,
    English,
}

impl Dictionary {
    pub fn as_str(self) -> &'static str {
        match self {
            Dictionary::SimpleEnglish => "simple_english",
            Dictionary::English => "english",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DefinitionEntry {
    pub lemma: String,
    pub pos: Pos,
    /// Plain text, markup stripped, ending in a period.
    pub definition: String,
    pub source: Dictionary,
}

/// Anything that can define a lemma in a part of speech.
pub trait DefinitionSource: Send + Sync {
    fn lookup(&self, lemma: &str, pos: &Pos) -> Option<DefinitionEntry>;
}

/// Fixed table of definitions, mostly for tests and benchmarks.
#[derive(Debug, Clone, Default)]
pub struct StaticDefinitions {
    entries: HashMap<(String, Pos), DefinitionEntry>,
}

impl StaticDefinitions {
    pub fn insert(&mut self, lemma: &str, pos: Pos, definition: &str, source: Dictionary) {
        self.entries.insert(
            (lemma.to_string(), pos.clone()),
            DefinitionEntry { lemma: lemma.into(), pos, definition: definition.into(), source },
        );
    }
}

impl DefinitionSource for StaticDefinitions {
    fn lookup(&self, lemma: &str, pos: &Pos) -> Option<DefinitionEntry> {
        self.entries.get(&(lemma.to_string(), pos.clone())).cloned()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub offset: u64,
    pub len: u64,
}

/// Title → byte range of the `<page>` element, for namespace-0 non-redirect pages.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DumpIndex {
    pub dictionary: Dictionary,
    /// Size of the dump when indexed; a mismatch invalidates a persisted index.
    pub dump_len: u64,
    pub entries: BTreeMap<String, IndexEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Page {
    pub title: String,
    pub namespace: i64,
    pub redirect: bool,
    pub text: String,
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    None,
    Title,
    Ns,
    Text,
}

/// Streams `<page>` elements out of MediaWiki XML, reporting each with its
/// byte range relative to the start of `input`.
fn scan_pages<R: BufRead>(
    input: R,
    path: &Path,
    mut on_page: impl FnMut(Page, IndexEntry),
) -> Result<(), WiktionaryError> {
    let mut reader = Reader::from_reader(input);
    let mut buf = Vec::new();
    let mut page: Option<(Page, u64)> = None;
    let mut field = Field::None;
    let mut ns_text = String::new();
    let xml_err = |reader: &Reader<R>, message: String| WiktionaryError::Xml {
        path: path.to_path_buf(),
        offset: reader.error_position().max(reader.buffer_position()),
        message,
    };

    loop {
        let before = reader.buffer_position();
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_err(&reader, e.to_string()))?;
        match event {
            Event::Start(e) => match e.local_name().as_ref() {
                "page" => {
                    if page.is_some() {
                        return Err(xml_err(&reader, "nested <page>".into()));
                    }
                    page = Some((Page::default(), before));
                }
                "title" if page.is_some() => field = Field::Title,
                "ns" if page.is_some() => {
                    field = Field::Ns;
                    ns_text.clear();
                }
                "text" if page.is_some() => field = Field::Text,
                "redirect" => {
                    if let Some((p, _)) = page.as_mut() {
                        p.redirect = true;
                    }
                }
                _ => {}
            },
            Event::Empty(e) if e.local_name().as_ref() == "redirect" => {
                if let Some((p, _)) = page.as_mut() {
                    p.redirect = true;
                }
            }
            Event::End(e) => match e.local_name().as_ref() {
                "page" => {
                    let Some((mut p, start)) = page.take() else {
                        return Err(xml_err(&reader, "</page> without <page>".into()));
                    };
                    if !ns_text.trim().is_empty() {
                        p.namespace = ns_text
                            .trim()
                            .parse()
                            .map_err(|_| xml_err(&reader, format!("bad namespace {ns_text:?}")))?;
                    }
                    if p.text.trim_start().get(..9).is_some_and(|s| s.eq_ignore_ascii_case("#redirect")) {
                        p.redirect = true;
                    }
                    let end = reader.buffer_position();
                    on_page(p, IndexEntry { offset: start, len: end - start });
                    ns_text.clear();
                    field = Field::None;
                }
                "title" | "ns" | "text" => field = Field::None,
                _ => {}
            },
            Event::Text(t) => {
                let content = t.xml10_content();
                push_field(&mut page, field, &mut ns_text, &content);
            }
            Event::CData(t) => {
                let content = t.xml10_content();
                push_field(&mut page, field, &mut ns_text, &content);
            }
            Event::GeneralRef(r) => {
                let name = r.xml10_content();
                let resolved = match r.resolve_char_ref() {
                    Ok(Some(c)) => c.to_string(),
                    Ok(None) => resolve_predefined_entity(&name)
                        .map(str::to_string)
                        .ok_or_else(|| xml_err(&reader, format!("unknown entity &{name};")))?,
                    Err(e) => return Err(xml_err(&reader, e.to_string())),
                };
                push_field(&mut page, field, &mut ns_text, &resolved);
            }
            Event::Eof => {
                if page.is_some() {
                    return Err(xml_err(&reader, "unterminated <page>".into()));
                }
                return Ok(());
            }
            _ => {}
        }
        buf.clear();
    }
}

fn push_field(page: &mut Option<(Page, u64)>, field: Field, ns_text: &mut String, content: &str) {
    let Some((p, _)) = page.as_mut() else { return };
    match field {
        Field::Title => p.title.push_str(content),
        Field::Ns => ns_text.push_str(content),
        Field::Text => p.text.push_str(content),
        Field::None => {}
    }
}

impl DumpIndex {
    /// Scans the dump and indexes every namespace-0, non-redirect page.
    pub fn build(dump_path: &Path, dictionary: Dictionary) -> Result<Self, WiktionaryError> {
        let io_err = |source| WiktionaryError::Io { path: dump_path.to_path_buf(), source };
        let file = File::open(dump_path).map_err(io_err)?;
        let dump_len = file.metadata().map_err(io_err)?.len();
        let mut entries = BTreeMap::new();
        scan_pages(BufReader::new(file), dump_path, |page, entry| {
            if page.namespace == 0 && !page.redirect {
                entries.entry(page.title).or_insert(entry);
            }
        })?;
        Ok(Self { dictionary, dump_len, entries })
    }

    pub fn sidecar_path(dump_path: &Path) -> PathBuf {
        let mut name = dump_path.as_os_str().to_owned();
        name.push(".idx");
        PathBuf::from(name)
    }

    /// Loads the sidecar index when it matches the dump, otherwise builds and
    /// persists a fresh one. Returns whether an existing index was reused.
    pub fn load_or_build(dump_path: &Path, dictionary: Dictionary) -> Result<(Self, bool), WiktionaryError> {
        let sidecar = Self::sidecar_path(dump_path);
        let dump_len = fs::metadata(dump_path)
            .map_err(|source| WiktionaryError::Io { path: dump_path.to_path_buf(), source })?
            .len();
        if sidecar.exists() {
            match Self::load(&sidecar) {
                Ok(index) if index.dictionary == dictionary && index.dump_len == dump_len => {
                    return Ok((index, true))
                }
                Ok(_) => log::info!("index {} is stale; rebuilding", sidecar.display()),
                Err(e) => log::warn!("{e}; rebuilding"),
            }
        }
        let index = Self::build(dump_path, dictionary)?;
        index.save(&sidecar)?;
        Ok((index, false))
    }

    pub fn save(&self, path: &Path) -> Result<(), WiktionaryError> {
        let io_err = |source| WiktionaryError::Io { path: path.to_path_buf(), source };
        let mut out = std::io::BufWriter::new(File::create(path).map_err(io_err)?);
        writeln!(out, "{INDEX_MAGIC}").map_err(io_err)?;
        serde_json::to_writer(&mut out, self).map_err(|e| WiktionaryError::Index {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        out.write_all(b"\n").and_then(|_| out.flush()).map_err(io_err)
    }

    pub fn load(path: &Path) -> Result<Self, WiktionaryError> {
        let text = fs::read_to_string(path)
            .map_err(|source| WiktionaryError::Io { path: path.to_path_buf(), source })?;
        let bad = |message: String| WiktionaryError::Index { path: path.to_path_buf(), message };
        let (magic, body) = text.split_once('\n').ok_or_else(|| bad("missing header".into()))?;
        if magic != INDEX_MAGIC {
            return Err(bad(format!("unknown header {magic:?}")));
        }
        serde_json::from_str(body).map_err(|e| bad(e.to_string()))
    }

    pub fn get(&self, title: &str) -> Option<IndexEntry> {
        self.entries.get(title).copied()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Reads the single page stored at `entry`.
pub fn read_page(dump_path: &Path, entry: IndexEntry) -> Result<Page, WiktionaryError> {
    let io_err = |source| WiktionaryError::Io { path: dump_path.to_path_buf(), source };
    let mut file = File::open(dump_path).map_err(io_err)?;
    file.seek(SeekFrom::Start(entry.offset)).map_err(io_err)?;
    let mut bytes = vec![0; entry.len as usize];
    file.read_exact(&mut bytes).map_err(io_err)?;
    let mut found = None;
    scan_pages(&bytes[..], dump_path, |page, _| {
        found.get_or_insert(page);
    })?;
    found.ok_or_else(|| WiktionaryError::Xml {
        path: dump_path.to_path_buf(),
        offset: entry.offset,
        message: "no page at indexed offset".into(),
    })
}

/// An indexed dump file.
pub struct Dump {
    pub path: PathBuf,
    pub index: DumpIndex,
}

impl Dump {
    pub fn open(path: &Path, dictionary: Dictionary) -> Result<Self, WiktionaryError> {
        let (index, _) = DumpIndex::load_or_build(path, dictionary)?;
        Ok(Self { path: path.to_path_buf(), index })
    }

    /// Indexes the dump in memory, leaving any sidecar file untouched.
    pub fn scan(path: &Path, dictionary: Dictionary) -> Result<Self, WiktionaryError> {
        Ok(Self { path: path.to_path_buf(), index: DumpIndex::build(path, dictionary)? })
    }

    pub fn article(&self, title: &str) -> Result<Option<String>, WiktionaryError> {
        match self.index.get(title) {
            Some(entry) => Ok(Some(read_page(&self.path, entry)?.text)),
            None => Ok(None),
        }
    }
}

type LookupKey = (String, Pos);

/// Definition lookup over the Simple English dump, then the English dump.
pub struct Wiktionary {
    simple: Option<Dump>,
    english: Option<Dump>,
    cache: Mutex<HashMap<LookupKey, Option<DefinitionEntry>>>,
    strip_warnings: AtomicUsize,
    read_errors: AtomicUsize,
}

impl Wiktionary {
    pub fn new(simple: Option<Dump>, english: Option<Dump>) -> Self {
        Self {
            simple,
            english,
            cache: Mutex::new(HashMap::new()),
            strip_warnings: AtomicUsize::new(0),
            read_errors: AtomicUsize::new(0),
        }
    }

    pub fn open(simple: Option<&Path>, english: Option<&Path>) -> Result<Self, WiktionaryError> {
        let simple = simple.map(|p| Dump::open(p, Dictionary::SimpleEnglish)).transpose()?;
        let english = english.map(|p| Dump::open(p, Dictionary::English)).transpose()?;
        Ok(Self::new(simple, english))
    }

    /// Unbalanced-markup warnings seen while stripping definitions.
    pub fn strip_warnings(&self) -> usize {
        self.strip_warnings.load(Ordering::Relaxed)
    }

    pub fn read_errors(&self) -> usize {
        self.read_errors.load(Ordering::Relaxed)
    }

    /// Tries each dictionary in precedence order and, within it, the exact
    /// title, the lowercase title and the capitalized title. The first title
    /// yielding a definition wins.
    pub fn lookup_definition(&self, word: &str, pos: &Pos) -> Result<Option<DefinitionEntry>, WiktionaryError> {
        let key = (word.to_string(), pos.clone());
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let found = self.lookup_uncached(word, pos)?;
        self.cache.lock().expect("cache lock").insert(key, found.clone());
        Ok(found)
    }

    fn lookup_uncached(&self, word: &str, pos: &Pos) -> Result<Option<DefinitionEntry>, WiktionaryError> {
        let dumps = [(&self.simple, Dictionary::SimpleEnglish), (&self.english, Dictionary::English)];
        for (dump, dictionary) in dumps {
            let Some(dump) = dump else { continue };
            for title in title_variants(word) {
                let Some(text) = dump.article(&title)? else { continue };
                let (definition, warnings) = extract_definition(&text, pos, dictionary);
                self.strip_warnings.fetch_add(warnings, Ordering::Relaxed);
                if let Some(definition) = definition {
                    return Ok(Some(DefinitionEntry {
                        lemma: word.to_string(),
                        pos: pos.clone(),
                        definition,
                        source: dictionary,
                    }));
                }
            }
        }
        Ok(None)
    }
}

impl DefinitionSource for Wiktionary {
    fn lookup(&self, lemma: &str, pos: &Pos) -> Option<DefinitionEntry> {
        match self.lookup_definition(lemma, pos) {
            Ok(found) => found,
            Err(e) => {
                log::warn!("definition lookup for {lemma:?} failed: {e}");
                self.read_errors.fetch_add(1, Ordering::Relaxed);
                None
            }
        }
    }
}

fn title_variants(word: &str) -> Vec<String> {
    let lower = word.to_lowercase();
    let mut chars = lower.chars();
    let capitalized = match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    };
    let mut out = vec![word.to_string()];
    for v in [lower, capitalized] {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn parse_heading(line: &str) -> Option<(usize, &str)> {
    let line = line.trim();
    if !line.starts_with('=') || !line.ends_with('=') || line.len() < 3 {
        return None;
    }
    let lead = line.bytes().take_while(|&b| b == b'=').count();
    let trail = line.bytes().rev().take_while(|&b| b == b'=').count();
    if lead + trail >= line.len() {
        return None;
    }
    let level = lead.min(trail);
    let title = line[level..line.len() - level].trim_matches('=').trim();
    (!title.is_empty()).then_some((level, title))
}

/// First top-level numbered sense of `pos` in the English section of an
/// article, with the number of unbalanced-markup warnings raised while
/// stripping. Simple English pages without an "English" heading are read
/// from the page root.
pub fn extract_definition(article: &str, pos: &Pos, dictionary: Dictionary) -> (Option<String>, usize) {
    let lines: Vec<&str> = article.lines().collect();
    let headings: Vec<Option<(usize, &str)>> = lines.iter().map(|l| parse_heading(l)).collect();
    let section_end = |from: usize, level: usize| {
        (from..lines.len())
            .find(|&i| headings[i].is_some_and(|(l, _)| l <= level))
            .unwrap_or(lines.len())
    };

    let english = (0..lines.len()).find(|&i| headings[i].is_some_and(|(l, t)| l == 2 && t == "English"));
    let (start, end, base_level) = match (english, dictionary) {
        (Some(i), _) => (i + 1, section_end(i + 1, 2), 2),
        (None, Dictionary::SimpleEnglish) => (0, lines.len(), 1),
        (None, Dictionary::English) => return (None, 0),
    };

    let Some(sub) = (start..end).find(|&i| {
        headings[i].is_some_and(|(l, t)| l > base_level && pos.matches_heading(&strip_wikitext(t)))
    }) else {
        return (None, 0);
    };
    let sub_level = headings[sub].map(|(l, _)| l).unwrap_or(base_level + 1);
    let sub_end = section_end(sub + 1, sub_level).min(end);

    let mut warnings = 0;
    for line in &lines[sub + 1..sub_end] {
        let line = line.trim_start();
        let Some(rest) = line.strip_prefix('#') else { continue };
        if rest.starts_with(['#', ':', '*', ';']) {
            continue;
        }
        let (text, w) = strip_wikitext_counted(rest);
        warnings += w;
        if !text.is_empty() {
            return (Some(ensure_period(text)), warnings);
        }
    }
    (None, warnings)
}

fn ensure_period(mut text: String) -> String {
    if !text.ends_with('.') {
        text.push('.');
    }
    text
}

/// `"{word} means: {definition}."` with exactly one terminal period.
pub fn format_definition(surface_word: &str, definition: &str) -> String {
    let body = definition.trim().trim_end_matches('.').trim_end();
    format!("{surface_word} means: {body}.")
}

pub fn strip_wikitext(markup: &str) -> String {
    strip_wikitext_counted(markup).0
}

const LINK_TEMPLATES: &[&str] = &["l", "m", "l-self", "link", "mention", "ll"];

fn render_template(inner: &str) -> String {
    let mut parts = inner.split('|').map(str::trim);
    let name = parts.next().unwrap_or_default().to_lowercase();
    let positional: Vec<&str> = parts.filter(|p| !p.contains('=')).collect();
    if LINK_TEMPLATES.contains(&name.as_str()) {
        // {{l|lang|target|display}}
        return positional
            .get(2)
            .filter(|s| !s.is_empty())
            .or_else(|| positional.get(1))
            .map(|s| s.to_string())
            .unwrap_or_default();
    }
    if name == "w" {
        return positional.last().map(|s| s.to_string()).unwrap_or_default();
    }
    String::new()
}

fn render_link(inner: &str) -> String {
    let target = inner.split('|').next().unwrap_or_default().trim();
    if let Some((prefix, _)) = target.split_once(':') {
        let prefix = prefix.trim().to_lowercase();
        if ["file", "image", "category", "media"].contains(&prefix.as_str()) {
            return String::new();
        }
    }
    inner.rsplit('|').next().unwrap_or_default().to_string()
}

/// Replaces innermost `open…close` pairs until none remain, then removes any
/// unmatched delimiters. Returns the number of unmatched delimiters removed.
fn reduce_pairs(text: &mut String, open: &str, close: &str, render: impl Fn(&str) -> String) -> usize {
    let mut unmatched = 0;
    while let Some(close_at) = text.find(close) {
        match text[..close_at].rfind(open) {
            Some(open_at) => {
                let rendered = render(&text[open_at + open.len()..close_at]);
                text.replace_range(open_at..close_at + close.len(), &rendered);
            }
            None => {
                text.replace_range(close_at..close_at + close.len(), " ");
                unmatched += 1;
            }
        }
    }
    let open_left = text.matches(open).count();
    if open_left > 0 {
        *text = text.replace(open, " ");
    }
    unmatched + open_left
}

fn remove_between(text: &mut String, open: &str, close: &str) -> usize {
    let mut warnings = 0;
    while let Some(start) = text.find(open) {
        match text[start + open.len()..].find(close) {
            Some(rel) => text.replace_range(start..start + open.len() + rel + close.len(), ""),
            None => {
                text.truncate(start);
                warnings += 1;
            }
        }
    }
    warnings
}

fn strip_tags(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(lt) = rest.find('<') {
        out.push_str(&rest[..lt]);
        let after = &rest[lt + 1..];
        let is_tag = after.starts_with(|c: char| c.is_ascii_alphabetic() || c == '/');
        match (is_tag, after.find('>')) {
            (true, Some(gt)) => rest = &after[gt + 1..],
            _ => {
                out.push('<');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn strip_external_links(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(at) = rest.find("[http") {
        out.push_str(&rest[..at]);
        let after = &rest[at + 1..];
        match after.find(']') {
            Some(end) => {
                if let Some((_, label)) = after[..end].split_once(' ') {
                    out.push_str(label.trim());
                }
                rest = &after[end + 1..];
            }
            None => {
                out.push('[');
                rest = after;
            }
        }
    }
    out.push_str(rest);
    out
}

fn remove_quote_runs(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if chars[i] == '\'' {
            let run = chars[i..].iter().take_while(|&&c| c == '\'').count();
            if run == 1 {
                out.push('\'');
            }
            i += run;
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

fn tidy_whitespace(text: &str) -> String {
    let mut out = text.split_whitespace().collect::<Vec<_>>().join(" ");
    for p in [".", ",", ";", ":", "!", "?"] {
        out = out.replace(&format!(" {p}"), p);
    }
    out
}

/// Plain text of a wikitext fragment, plus a count of unbalanced delimiters
/// removed on a best-effort basis.
pub fn strip_wikitext_counted(markup: &str) -> (String, usize) {
    let mut text = markup.to_string();
    let mut warnings = remove_between(&mut text, "<!--", "-->");
    warnings += remove_between(&mut text, "<ref", "</ref>");
    text = strip_tags(&text);
    warnings += reduce_pairs(&mut text, "{{", "}}", render_template);
    warnings += reduce_pairs(&mut text, "[[", "]]", render_link);
    text = strip_external_links(&text);
    text = remove_quote_runs(&text);
    for (entity, plain) in [("&nbsp;", " "), ("&ndash;", "-"), ("&mdash;", "-"), ("&quot;", "\""), ("&lt;", "<"), ("&gt;", ">"), ("&amp;", "&")] {
        text = text.replace(entity, plain);
    }
    let text = text.trim().trim_start_matches(|c: char| c == '#' || c.is_whitespace());
    (tidy_whitespace(text), warnings)
}
