//! Occurrence ingestion: delimited text or Darwin Core archives mapped onto
//! [`SpecimenRecord`], plus the eligibility filter applied before collector
//! resolution.

mod dwca;
mod mapping;

use std::borrow::Cow;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use csv::ByteRecord;

pub(crate) use mapping::ResolvedColumns;
pub use mapping::{ColumnMapping, Field};

use crate::error::{Error, Result};
use crate::record::{non_blank, split_media, SpecimenRecord};

/// Row accounting for one source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ParseStats {
    pub rows_emitted: u64,
    pub rows_skipped: u64,
}

impl ParseStats {
    pub fn rows_read(&self) -> u64 {
        self.rows_emitted + self.rows_skipped
    }
}

impl std::ops::AddAssign for ParseStats {
    fn add_assign(&mut self, rhs: Self) {
        self.rows_emitted += rhs.rows_emitted;
        self.rows_skipped += rhs.rows_skipped;
    }
}

/// Streaming reader of specimen records in source order.
///
/// Rows with the wrong number of columns are skipped and counted. Invalid
/// UTF-8 is replaced, never fatal. I/O failures are yielded as errors.
pub struct RecordStream {
    reader: csv::Reader<Box<dyn Read + Send>>,
    columns: ResolvedColumns,
    expected_len: Option<usize>,
    label: String,
    row: u64,
    stats: ParseStats,
    media: HashMap<String, Vec<String>>,
    media_key: Option<usize>,
    buf: ByteRecord,
}

impl std::fmt::Debug for RecordStream {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RecordStream")
            .field("label", &self.label)
            .field("row", &self.row)
            .field("stats", &self.stats)
            .finish_non_exhaustive()
    }
}

pub(crate) struct Dialect {
    pub delimiter: u8,
    pub quote: Option<u8>,
}

impl RecordStream {
    /// Reads delimited text with a header row (or positional columns).
    pub fn from_reader<R: Read + Send + 'static>(
        source: R,
        label: impl Into<String>,
        mapping: &ColumnMapping,
    ) -> Result<Self> {
        let dialect = Dialect { delimiter: mapping.delimiter, quote: mapping.quote };
        let mut reader = build_reader(Box::new(source), &dialect, mapping.has_header);
        let (columns, expected_len) = if mapping.has_header {
            let header: Vec<String> = reader.byte_headers()?.iter().map(|c| lossy(c).trim().to_string()).collect();
            let header = strip_bom(header);
            (mapping.resolve(Some(&header))?, (!header.is_empty()).then_some(header.len()))
        } else {
            (mapping.resolve(None)?, None)
        };
        Ok(Self::assemble(reader, columns, expected_len, label.into()))
    }

    fn assemble(
        reader: csv::Reader<Box<dyn Read + Send>>,
        columns: ResolvedColumns,
        expected_len: Option<usize>,
        label: String,
    ) -> Self {
        RecordStream {
            reader,
            columns,
            expected_len,
            label,
            row: 0,
            stats: ParseStats::default(),
            media: HashMap::new(),
            media_key: None,
            buf: ByteRecord::new(),
        }
    }

    pub fn stats(&self) -> ParseStats {
        self.stats
    }

    /// Source label used in synthesized record ids.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// 1-based data row of the most recently yielded record.
    pub fn row(&self) -> u64 {
        self.row
    }

    fn field(&self, field: Field) -> Cow<'_, str> {
        match self.columns.get(field).and_then(|i| self.buf.get(i)) {
            Some(bytes) => match lossy(bytes) {
                Cow::Borrowed(s) => Cow::Borrowed(s.trim()),
                Cow::Owned(s) => Cow::Owned(s.trim().to_string()),
            },
            None => Cow::Borrowed(""),
        }
    }

    fn build(&self) -> SpecimenRecord {
        let mut rec = record_from_fields(|f| self.field(f), || format!("{}:{}", self.label, self.row));
        if let Some(key) = self.media_key.and_then(|i| self.buf.get(i)) {
            if let Some(extra) = self.media.get(lossy(key).trim()) {
                for m in extra {
                    if !rec.media_refs.contains(m) {
                        rec.media_refs.push(m.clone());
                    }
                }
            }
        }
        rec
    }
}

impl Iterator for RecordStream {
    type Item = Result<SpecimenRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            match self.reader.read_byte_record(&mut self.buf) {
                Ok(false) => return None,
                Ok(true) => {
                    self.row += 1;
                    let len = self.buf.len();
                    let expected = *self.expected_len.get_or_insert(len);
                    if len != expected {
                        self.stats.rows_skipped += 1;
                        continue;
                    }
                    self.stats.rows_emitted += 1;
                    return Some(Ok(self.build()));
                }
                Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Some(Err(e.into())),
                Err(_) => {
                    self.row += 1;
                    self.stats.rows_skipped += 1;
                }
            }
        }
    }
}

/// Builds a record from trimmed field values; `fallback_id` supplies the id
/// when the record_id field is blank.
pub(crate) fn record_from_fields<'a>(
    field: impl Fn(Field) -> Cow<'a, str>,
    fallback_id: impl FnOnce() -> String,
) -> SpecimenRecord {
    let event_date_raw = field(Field::EventDate).into_owned();
    let mut rec = SpecimenRecord {
        record_id: non_blank(&field(Field::RecordId)).unwrap_or_else(fallback_id),
        recorded_by: field(Field::RecordedBy).into_owned(),
        record_number_raw: field(Field::RecordNumber).into_owned(),
        event_date: parse_event_date(&event_date_raw),
        event_date_raw,
        country_code: non_blank(&field(Field::CountryCode)).map(|c| c.to_uppercase()),
        taxon_order: non_blank(&field(Field::Order)),
        family: non_blank(&field(Field::Family)),
        scientific_name: non_blank(&field(Field::ScientificName)),
        institution_code: field(Field::InstitutionCode).into_owned(),
        type_status_raw: non_blank(&field(Field::TypeStatus)),
        latitude: None,
        longitude: None,
        media_refs: split_media(&field(Field::Media)),
    };
    rec.set_coordinates(field(Field::Latitude).parse().ok(), field(Field::Longitude).parse().ok());
    rec
}

pub(crate) fn build_reader(
    source: Box<dyn Read + Send>,
    dialect: &Dialect,
    has_headers: bool,
) -> csv::Reader<Box<dyn Read + Send>> {
    let mut b = csv::ReaderBuilder::new();
    b.delimiter(dialect.delimiter).flexible(true).has_headers(has_headers);
    match dialect.quote {
        Some(q) => b.quote(q),
        None => b.quoting(false),
    };
    b.from_reader(source)
}

fn lossy(bytes: &[u8]) -> Cow<'_, str> {
    String::from_utf8_lossy(bytes)
}

fn strip_bom(mut header: Vec<String>) -> Vec<String> {
    if let Some(first) = header.first_mut() {
        if let Some(rest) = first.strip_prefix('\u{feff}') {
            *first = rest.to_string();
        }
    }
    header
}

/// Opens a delimited file, or a Darwin Core archive (detected by its zip
/// signature). For archives the column layout comes from `meta.xml`; the
/// mapping is only consulted for mandatory fields the archive does not
/// declare.
pub fn parse_source(path: &Path, mapping: &ColumnMapping) -> Result<RecordStream> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut magic = [0u8; 4];
    let n = read_prefix(&mut file, &mut magic).map_err(|e| Error::io(path, e))?;
    drop(file);
    if n == 4 && magic == *b"PK\x03\x04" {
        return dwca::open(path, mapping);
    }
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let label = source_label(path);
    RecordStream::from_reader(BufReader::with_capacity(1 << 16, file), label, mapping)
}

fn read_prefix(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut n = 0;
    while n < buf.len() {
        match r.read(&mut buf[n..])? {
            0 => break,
            k => n += k,
        }
    }
    Ok(n)
}

pub(crate) fn source_label(path: &Path) -> String {
    path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

/// Parses a verbatim date that names exactly one day.
///
/// Accepted: `YYYY-MM-DD`, `YYYY-MM-DDThh:mm:ss...`, `YYYYMMDD`.
pub fn parse_event_date(raw: &str) -> Option<NaiveDate> {
    let s = raw.trim();
    if s.contains('/') {
        return None;
    }
    let b = s.as_bytes();
    let (y, m, d) = if b.len() == 8 && b.iter().all(u8::is_ascii_digit) {
        (&s[0..4], &s[4..6], &s[6..8])
    } else if b.len() >= 10 && b[4] == b'-' && b[7] == b'-' && (b.len() == 10 || (b[10] == b'T' && b.len() > 11)) {
        let digits = |r: std::ops::Range<usize>| b[r].iter().all(u8::is_ascii_digit);
        if !(digits(0..4) && digits(5..7) && digits(8..10)) {
            return None;
        }
        (&s[0..4], &s[5..7], &s[8..10])
    } else {
        return None;
    };
    NaiveDate::from_ymd_opt(y.parse().ok()?, m.parse().ok()?, d.parse().ok()?)
}

/// A record enters collector resolution only with a numeric record number,
/// a day-precise date and a collector name.
pub fn is_eligible(r: &SpecimenRecord) -> bool {
    r.record_number_raw.bytes().any(|b| b.is_ascii_digit())
        && r.event_date.is_some()
        && !r.recorded_by.trim().is_empty()
}

/// Writes records in the canonical tab-delimited layout (see [`Field::ALL`]).
pub fn write_records<'a, W: Write>(out: W, records: impl IntoIterator<Item = &'a SpecimenRecord>) -> Result<()> {
    let mut w = canonical_writer(out);
    w.write_record(Field::ALL.iter().map(|f| f.name()))?;
    for r in records {
        w.write_record(canonical_row(r).iter().map(String::as_str))?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn canonical_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().delimiter(b'\t').from_writer(out)
}

pub(crate) fn canonical_row(r: &SpecimenRecord) -> Vec<String> {
    let opt = |o: &Option<String>| o.clone().unwrap_or_default();
    let coord = |c: Option<f64>| c.map(|v| v.to_string()).unwrap_or_default();
    vec![
        r.record_id.clone(),
        r.recorded_by.clone(),
        r.record_number_raw.clone(),
        r.event_date_raw.clone(),
        opt(&r.country_code),
        opt(&r.taxon_order),
        opt(&r.family),
        opt(&r.scientific_name),
        r.institution_code.clone(),
        opt(&r.type_status_raw),
        coord(r.latitude),
        coord(r.longitude),
        r.media_refs.join("|"),
    ]
}
