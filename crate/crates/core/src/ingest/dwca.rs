//! Darwin Core archive support: `meta.xml` describes the core data file and
//! its columns; an optional multimedia extension supplies image links.

use std::collections::HashMap;
use std::fs::File;
use std::io::{self, BufReader, Read, Seek};
use std::path::Path;

use quick_xml::events::{BytesStart, Event};
use quick_xml::Reader;
use zip::ZipArchive;

use super::{build_reader, lossy, source_label, ColumnMapping, Dialect, Field, RecordStream, ResolvedColumns};
use crate::error::{Error, Result};

#[derive(Debug, Default, Clone)]
pub(crate) struct FileDescriptor {
    pub row_type: String,
    pub location: String,
    pub delimiter: u8,
    pub quote: Option<u8>,
    pub header_lines: usize,
    /// `<id>` for the core, `<coreid>` for extensions.
    pub key_index: Option<usize>,
    /// (column index, term URI)
    pub fields: Vec<(usize, String)>,
}

#[derive(Debug, Default)]
pub(crate) struct ArchiveMeta {
    pub core: Option<FileDescriptor>,
    pub extensions: Vec<FileDescriptor>,
}

pub(crate) fn open(path: &Path, mapping: &ColumnMapping) -> Result<RecordStream> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut zip = ZipArchive::new(file).map_err(|e| Error::Archive(e.to_string()))?;
    let meta_xml = read_entry_string(&mut zip, "meta.xml")?;
    let meta = parse_meta(&meta_xml)?;
    let core = meta.core.ok_or_else(|| Error::Archive("meta.xml declares no core file".into()))?;
    if core.location.is_empty() || zip.index_for_name(&core.location).is_none() {
        return Err(Error::Archive(format!("core data file `{}` missing", core.location)));
    }

    let mut media = HashMap::new();
    for ext in meta.extensions.iter().filter(|e| e.row_type.ends_with("Multimedia")) {
        // best effort: a broken extension never prevents reading the core
        if let Ok(m) = read_multimedia(&mut zip, ext) {
            media = m;
        }
    }

    let spool = spool_entry(&mut zip, &core.location)?;
    let dialect = Dialect { delimiter: core.delimiter, quote: core.quote };
    let mut reader = build_reader(Box::new(BufReader::with_capacity(1 << 16, spool)), &dialect, core.header_lines > 0);
    let header = read_header_lines(&mut reader, core.header_lines)?;

    let mut idx = [None; Field::ALL.len()];
    for (i, term) in &core.fields {
        if let Some(f) = Field::from_dwc_term(term) {
            idx[f as usize] = Some(*i);
        }
    }
    if idx[Field::RecordId as usize].is_none() {
        idx[Field::RecordId as usize] = core.key_index;
    }
    for f in Field::ALL.into_iter().filter(|f| f.is_mandatory()) {
        if idx[f as usize].is_some() {
            continue;
        }
        let col = mapping.column(f).ok_or(Error::UnmappedField { field: f.name() })?;
        let pos = header
            .as_ref()
            .and_then(|h| h.iter().position(|c| c == col))
            .ok_or_else(|| Error::MissingColumn { field: f.name(), column: col.to_string() })?;
        idx[f as usize] = Some(pos);
    }

    let label = format!("{}!{}", source_label(path), core.location);
    let mut stream = RecordStream::assemble(reader, ResolvedColumns { idx }, None, label);
    stream.media = media;
    stream.media_key = core.key_index;
    Ok(stream)
}

fn read_entry_string<R: Read + Seek>(zip: &mut ZipArchive<R>, name: &str) -> Result<String> {
    let mut entry = zip.by_name(name).map_err(|_| Error::Archive(format!("`{name}` not found in archive")))?;
    let mut bytes = Vec::new();
    entry.read_to_end(&mut bytes)?;
    Ok(lossy(&bytes).into_owned())
}

/// Copies an archive member into an anonymous temporary file so the stream
/// can own its reader.
fn spool_entry<R: Read + Seek>(zip: &mut ZipArchive<R>, name: &str) -> Result<File> {
    let mut entry = zip.by_name(name).map_err(|e| Error::Archive(format!("cannot open `{name}`: {e}")))?;
    let mut tmp = tempfile::tempfile()?;
    io::copy(&mut entry, &mut tmp)?;
    tmp.rewind()?;
    Ok(tmp)
}

/// Consumes `lines` header rows, returning the first one.
fn read_header_lines(reader: &mut csv::Reader<Box<dyn Read + Send>>, lines: usize) -> Result<Option<Vec<String>>> {
    if lines == 0 {
        return Ok(None);
    }
    let first: Vec<String> = reader.byte_headers()?.iter().map(|c| lossy(c).trim().to_string()).collect();
    let mut rec = csv::ByteRecord::new();
    for _ in 1..lines {
        reader.read_byte_record(&mut rec)?;
    }
    Ok(Some(first))
}

fn read_multimedia<R: Read + Seek>(
    zip: &mut ZipArchive<R>,
    ext: &FileDescriptor,
) -> Result<HashMap<String, Vec<String>>> {
    let key = ext.key_index.ok_or_else(|| Error::Archive("multimedia extension lacks coreid".into()))?;
    let ident = ext
        .fields
        .iter()
        .find(|(_, t)| t.ends_with("/identifier"))
        .or_else(|| ext.fields.iter().find(|(_, t)| t.ends_with("/references")))
        .map(|(i, _)| *i)
        .ok_or_else(|| Error::Archive("multimedia extension lacks identifier".into()))?;
    let spool = spool_entry(zip, &ext.location)?;
    let dialect = Dialect { delimiter: ext.delimiter, quote: ext.quote };
    let mut reader = build_reader(Box::new(BufReader::new(spool)), &dialect, ext.header_lines > 0);
    let mut out: HashMap<String, Vec<String>> = HashMap::new();
    let mut rec = csv::ByteRecord::new();
    let mut skip = ext.header_lines.saturating_sub(1);
    while reader.read_byte_record(&mut rec)? {
        if skip > 0 {
            skip -= 1;
            continue;
        }
        let (Some(k), Some(v)) = (rec.get(key), rec.get(ident)) else { continue };
        let v = lossy(v).trim().to_string();
        if !v.is_empty() {
            out.entry(lossy(k).trim().to_string()).or_default().push(v);
        }
    }
    Ok(out)
}

fn attr(e: &BytesStart<'_>, name: &str) -> Option<String> {
    e.attributes()
        .flatten()
        .find(|a| a.key.local_name().as_ref() == name)
        .and_then(|a| a.normalized_value(quick_xml::XmlVersion::Implicit1_0).ok().map(|v| v.into_owned()))
}

fn dialect_char(raw: Option<String>, default: Option<u8>) -> Option<u8> {
    match raw.as_deref() {
        None => default,
        Some("") => None,
        Some("\\t") | Some("\t") => Some(b'\t'),
        Some(s) if s.len() == 1 => Some(s.as_bytes()[0]),
        Some(_) => default,
    }
}

fn descriptor(e: &BytesStart<'_>) -> FileDescriptor {
    FileDescriptor {
        row_type: attr(e, "rowType").unwrap_or_default(),
        location: String::new(),
        delimiter: dialect_char(attr(e, "fieldsTerminatedBy"), Some(b',')).unwrap_or(b','),
        quote: dialect_char(attr(e, "fieldsEnclosedBy"), Some(b'"')),
        header_lines: attr(e, "ignoreHeaderLines").and_then(|v| v.trim().parse().ok()).unwrap_or(0),
        key_index: None,
        fields: Vec::new(),
    }
}

pub(crate) fn parse_meta(xml: &str) -> Result<ArchiveMeta> {
    let mut reader = Reader::from_str(xml);
    reader.config_mut().trim_text(true);
    let mut meta = ArchiveMeta::default();
    let mut current: Option<(bool, FileDescriptor)> = None;
    let mut in_location = false;
    loop {
        let ev = reader.read_event().map_err(|e| Error::Archive(format!("meta.xml: {e}")))?;
        match ev {
            Event::Start(e) | Event::Empty(e) => {
                let name = e.local_name();
                match name.as_ref() {
                    "core" | "extension" => {
                        current = Some((name.as_ref() == "core", descriptor(&e)));
                    }
                    "location" => in_location = true,
                    "id" | "coreid" => {
                        if let Some((_, d)) = current.as_mut() {
                            d.key_index = attr(&e, "index").and_then(|v| v.parse().ok());
                        }
                    }
                    "field" => {
                        if let (Some((_, d)), Some(i), Some(t)) =
                            (current.as_mut(), attr(&e, "index").and_then(|v| v.parse().ok()), attr(&e, "term"))
                        {
                            d.fields.push((i, t));
                        }
                    }
                    _ => {}
                }
            }
            Event::Text(t) if in_location => {
                if let Some((_, d)) = current.as_mut() {
                    if d.location.is_empty() {
                        d.location = t.xml10_content().trim().to_string();
                    }
                }
            }
            Event::End(e) => match e.local_name().as_ref() {
                "location" => in_location = false,
                "core" | "extension" => {
                    if let Some((is_core, d)) = current.take() {
                        if is_core {
                            meta.core = Some(d);
                        } else {
                            meta.extensions.push(d);
                        }
                    }
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    Ok(meta)
}
