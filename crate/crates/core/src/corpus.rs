//! Per-researcher annual publication counts.
//!
//! Two ingestion paths produce the same [`PublicationCorpus`]: a streaming reader
//! for the dblp XML export and a flat `researcher_id,year,count` CSV. The flat
//! format doubles as the normalized on-disk representation.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Read, Write};

use quick_xml::escape::resolve_html5_entity;
use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const COUNTS_HEADER: [&str; 3] = ["researcher_id", "year", "count"];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("malformed XML at byte {offset}: {message}")]
    Xml { offset: u64, message: String },
    #[error("line {line}: {message}")]
    Line { line: u64, message: String },
    #[error("year {year} outside corpus span {span}")]
    YearOutOfSpan { year: i32, span: YearSpan },
    #[error("invalid year span {start}..={end}")]
    InvalidSpan { start: i32, end: i32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Inclusive calendar-year interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearSpan {
    pub start: i32,
    pub end: i32,
}

impl YearSpan {
    pub fn new(start: i32, end: i32) -> Result<Self, CorpusError> {
        if start > end {
            return Err(CorpusError::InvalidSpan { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }
}

impl std::fmt::Display for YearSpan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "[{}, {}]", self.start, self.end)
    }
}

/// One aggregated `(researcher, year)` cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicationRecord {
    pub researcher_id: String,
    pub year: i32,
    pub count: u64,
}

/// Aggregated researcher → year → count mapping.
///
/// Only positive counts are stored, so every researcher present has published
/// at least once. Equality compares records and the declared span.
#[derive(Debug, Clone, Default)]
pub struct PublicationCorpus {
    records: BTreeMap<String, BTreeMap<i32, u64>>,
    span: Option<YearSpan>,
    span_inferred: bool,
    publication_total: u64,
}

impl PartialEq for PublicationCorpus {
    fn eq(&self, other: &Self) -> bool {
        self.span == other.span && self.records == other.records
    }
}

impl Eq for PublicationCorpus {}

impl PublicationCorpus {
    /// Empty corpus. With `span = None` the span grows to cover added years.
    pub fn new(span: Option<YearSpan>) -> Self {
        Self {
            records: BTreeMap::new(),
            span_inferred: span.is_none(),
            span,
            publication_total: 0,
        }
    }

    /// Adds `count` publications; zero counts are ignored.
    pub fn add(&mut self, researcher: &str, year: i32, count: u64) -> Result<(), CorpusError> {
        match self.span {
            Some(span) if !span.contains(year) && self.is_declared() => {
                return Err(CorpusError::YearOutOfSpan { year, span })
            }
            _ => {}
        }
        if count == 0 {
            return Ok(());
        }
        self.extend_span(year);
        *self
            .records
            .entry(researcher.to_string())
            .or_default()
            .entry(year)
            .or_insert(0) += count;
        self.publication_total += count;
        Ok(())
    }

    fn is_declared(&self) -> bool {
        !self.span_inferred
    }

    fn extend_span(&mut self, year: i32) {
        if self.span_inferred {
            self.span = Some(match self.span {
                None => YearSpan {
                    start: year,
                    end: year,
                },
                Some(s) => YearSpan {
                    start: s.start.min(year),
                    end: s.end.max(year),
                },
            });
        }
    }

    pub fn span(&self) -> Option<YearSpan> {
        self.span
    }

    pub fn researcher_count(&self) -> usize {
        self.records.len()
    }

    /// Sum of all counts (authorship credits under full counting).
    pub fn publication_total(&self) -> u64 {
        self.publication_total
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Researcher ids in ascending order.
    pub fn researchers(&self) -> impl Iterator<Item = &str> {
        self.records.keys().map(String::as_str)
    }

    pub fn contains(&self, researcher: &str) -> bool {
        self.records.contains_key(researcher)
    }

    pub fn years_of(&self, researcher: &str) -> Option<&BTreeMap<i32, u64>> {
        self.records.get(researcher)
    }

    pub fn count_in(&self, researcher: &str, year: i32) -> u64 {
        self.records
            .get(researcher)
            .and_then(|years| years.get(&year))
            .copied()
            .unwrap_or(0)
    }

    /// Publications of `researcher` over `[span start, through_year]`.
    /// Unknown researchers have no history.
    pub fn history(&self, researcher: &str, through_year: i32) -> u64 {
        match self.span {
            Some(span) => self.history_between(researcher, span.start, through_year),
            None => 0,
        }
    }

    /// Publications of `researcher` over `[from_year, through_year]`.
    pub fn history_between(&self, researcher: &str, from_year: i32, through_year: i32) -> u64 {
        if from_year > through_year {
            return 0;
        }
        self.records
            .get(researcher)
            .map(|years| years.range(from_year..=through_year).map(|(_, c)| c).sum())
            .unwrap_or(0)
    }

    /// All aggregated records ordered by researcher, then year.
    pub fn records(&self) -> impl Iterator<Item = PublicationRecord> + '_ {
        self.records.iter().flat_map(|(id, years)| {
            years.iter().map(move |(&year, &count)| PublicationRecord {
                researcher_id: id.clone(),
                year,
                count,
            })
        })
    }

    pub fn summary(&self) -> CorpusSummary {
        let researchers = self.researcher_count();
        CorpusSummary {
            researchers,
            publication_total: self.publication_total,
            average_publications: if researchers == 0 {
                0.0
            } else {
                self.publication_total as f64 / researchers as f64
            },
            span: self.span,
        }
    }

    /// Writes the flat counts format.
    pub fn write_counts<W: Write>(&self, out: W) -> Result<(), CorpusError> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        let to_io = |e: csv::Error| CorpusError::Io(e.into());
        writer.write_record(COUNTS_HEADER).map_err(to_io)?;
        for record in self.records() {
            writer
                .write_record([
                    record.researcher_id.as_str(),
                    &record.year.to_string(),
                    &record.count.to_string(),
                ])
                .map_err(to_io)?;
        }
        writer.flush()?;
        Ok(())
    }
}

/// Table-style corpus summary: researchers, authorship credits and their ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub researchers: usize,
    pub publication_total: u64,
    pub average_publications: f64,
    pub span: Option<YearSpan>,
}

/// Parses the flat counts format. With `span = None` the span is inferred from
/// the data; otherwise years outside it are rejected.
pub fn parse_counts_file<R: Read>(
    input: R,
    span: Option<YearSpan>,
) -> Result<PublicationCorpus, CorpusError> {
    let mut corpus = PublicationCorpus::new(span);
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input);

    let header = reader.headers().map_err(|e| csv_error(e, 1))?.clone();
    if header.len() != 3 || header.iter().zip(COUNTS_HEADER).any(|(a, b)| a != b) {
        return Err(CorpusError::Line {
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                COUNTS_HEADER.join(","),
                header.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }

    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line();
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => return Err(csv_error(e, line)),
        }
        let line = record.position().map_or(line, |p| p.line());
        let field = |k: usize| record.get(k).unwrap_or("");
        if record.len() != 3 {
            return Err(CorpusError::Line {
                line,
                message: format!("expected 3 fields, found {}", record.len()),
            });
        }
        let year: i32 = field(1).parse().map_err(|_| CorpusError::Line {
            line,
            message: format!("year `{}` is not an integer", field(1)),
        })?;
        let count: i64 = field(2).parse().map_err(|_| CorpusError::Line {
            line,
            message: format!("count `{}` is not an integer", field(2)),
        })?;
        if count < 0 {
            return Err(CorpusError::Line {
                line,
                message: format!("negative count {count}"),
            });
        }
        corpus
            .add(field(0), year, count as u64)
            .map_err(|e| CorpusError::Line {
                line,
                message: e.to_string(),
            })?;
    }
    Ok(corpus)
}

fn csv_error(e: csv::Error, line: u64) -> CorpusError {
    let line = e.position().map_or(line, |p| p.line());
    CorpusError::Line {
        line,
        message: e.to_string(),
    }
}

/// Filters applied while streaming a dblp export.
#[derive(Debug, Clone)]
pub struct DblpOptions {
    pub year_range: YearSpan,
    /// Venue keys such as `journals/tkde` or `conf/icde`, matched against the
    /// first two segments of each element's `key` attribute.
    pub venue_filter: Option<BTreeSet<String>>,
}

/// Tallies from a dblp pass. Out-of-range years are a filter, not a skip.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    /// Counted `article`/`inproceedings` elements.
    pub publications: u64,
    pub missing_year: u64,
    pub other_kind: u64,
    pub venue_filtered: u64,
    pub out_of_range: u64,
}

impl IngestReport {
    /// Elements dropped for structural reasons.
    pub fn skipped(&self) -> u64 {
        self.missing_year + self.other_kind
    }
}

const COUNTED_KINDS: [&[u8]; 2] = [b"article", b"inproceedings"];

#[derive(Default)]
struct Entry {
    counted: bool,
    venue: Option<String>,
    authors: Vec<String>,
    year: Option<String>,
}

#[derive(Clone, Copy, PartialEq)]
enum Field {
    Author,
    Year,
}

/// Streams a dblp XML export, counting one publication per distinct author of
/// every `article` and `inproceedings` element whose year lies in range.
pub fn parse_dblp_xml<R: BufRead>(
    input: R,
    options: &DblpOptions,
) -> Result<(PublicationCorpus, IngestReport), CorpusError> {
    let mut reader = Reader::from_reader(input);
    reader.config_mut().trim_text(true);
    let mut corpus = PublicationCorpus::new(Some(options.year_range));
    let mut report = IngestReport::default();

    let mut buf = Vec::new();
    let mut depth = 0usize;
    let mut entry: Option<Entry> = None;
    let mut field: Option<(Field, String)> = None;

    let xml_error = |reader: &Reader<R>, message: String| CorpusError::Xml {
        offset: reader.error_position(),
        message,
    };

    loop {
        let event = reader
            .read_event_into(&mut buf)
            .map_err(|e| xml_error(&reader, e.to_string()))?;
        match event {
            Event::Start(start) => {
                depth += 1;
                if depth == 2 {
                    entry = Some(open_entry(&start));
                } else if depth == 3 && entry.as_ref().is_some_and(|e| e.counted) {
                    field = match start.local_name().as_ref() {
                        b"author" => Some((Field::Author, String::new())),
                        b"year" => Some((Field::Year, String::new())),
                        _ => None,
                    };
                }
            }
            Event::Empty(start) => {
                if depth == 1 {
                    let e = open_entry(&start);
                    close_entry(e, options, &mut corpus, &mut report)?;
                }
            }
            Event::Text(text) => {
                if let Some((_, value)) = field.as_mut() {
                    // unknown entities keep their raw spelling
                    match text.unescape_with(resolve_html5_entity) {
                        Ok(resolved) => value.push_str(&resolved),
                        Err(_) => value.push_str(&String::from_utf8_lossy(&text)),
                    }
                }
            }
            Event::CData(data) => {
                if let Some((_, value)) = field.as_mut() {
                    value.push_str(&String::from_utf8_lossy(&data));
                }
            }
            Event::End(_) => {
                if depth == 0 {
                    return Err(xml_error(&reader, "unbalanced end tag".into()));
                }
                if depth == 3 {
                    if let (Some((kind, value)), Some(e)) = (field.take(), entry.as_mut()) {
                        let value = value.trim().to_string();
                        match kind {
                            Field::Author if !value.is_empty() => e.authors.push(value),
                            Field::Year => e.year = Some(value),
                            _ => {}
                        }
                    }
                } else if depth == 2 {
                    if let Some(e) = entry.take() {
                        close_entry(e, options, &mut corpus, &mut report)?;
                    }
                }
                depth -= 1;
            }
            Event::Eof => {
                if depth != 0 {
                    return Err(CorpusError::Xml {
                        offset: reader.buffer_position(),
                        message: "unexpected end of document".into(),
                    });
                }
                break;
            }
            _ => {}
        }
        buf.clear();
    }
    Ok((corpus, report))
}

fn open_entry(start: &BytesStart<'_>) -> Entry {
    let counted = COUNTED_KINDS.contains(&start.local_name().as_ref());
    let venue = start
        .try_get_attribute("key")
        .ok()
        .flatten()
        .and_then(|a| a.unescape_value().ok().map(|v| venue_key(&v)));
    Entry {
        counted,
        venue,
        ..Entry::default()
    }
}

fn venue_key(key: &str) -> String {
    key.split('/').take(2).collect::<Vec<_>>().join("/")
}

fn close_entry(
    entry: Entry,
    options: &DblpOptions,
    corpus: &mut PublicationCorpus,
    report: &mut IngestReport,
) -> Result<(), CorpusError> {
    if !entry.counted {
        report.other_kind += 1;
        return Ok(());
    }
    let Some(year) = entry.year.as_deref().and_then(|y| y.parse::<i32>().ok()) else {
        report.missing_year += 1;
        return Ok(());
    };
    if let Some(filter) = &options.venue_filter {
        if !entry.venue.as_ref().is_some_and(|v| filter.contains(v)) {
            report.venue_filtered += 1;
            return Ok(());
        }
    }
    if !options.year_range.contains(year) {
        report.out_of_range += 1;
        return Ok(());
    }
    let authors: BTreeSet<&String> = entry.authors.iter().collect();
    for author in authors {
        corpus.add(author, year, 1)?;
    }
    report.publications += 1;
    Ok(())
}
