use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Canonical fields of [`SpecimenRecord`](crate::SpecimenRecord).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Field {
    RecordId,
    RecordedBy,
    RecordNumber,
    EventDate,
    CountryCode,
    Order,
    Family,
    ScientificName,
    InstitutionCode,
    TypeStatus,
    Latitude,
    Longitude,
    Media,
}

impl Field {
    /// Canonical column order, also the checkpoint layout.
    pub const ALL: [Field; 13] = [
        Field::RecordId,
        Field::RecordedBy,
        Field::RecordNumber,
        Field::EventDate,
        Field::CountryCode,
        Field::Order,
        Field::Family,
        Field::ScientificName,
        Field::InstitutionCode,
        Field::TypeStatus,
        Field::Latitude,
        Field::Longitude,
        Field::Media,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Field::RecordId => "record_id",
            Field::RecordedBy => "recorded_by",
            Field::RecordNumber => "record_number",
            Field::EventDate => "event_date",
            Field::CountryCode => "country_code",
            Field::Order => "order",
            Field::Family => "family",
            Field::ScientificName => "scientific_name",
            Field::InstitutionCode => "institution_code",
            Field::TypeStatus => "type_status",
            Field::Latitude => "latitude",
            Field::Longitude => "longitude",
            Field::Media => "media",
        }
    }

    /// Darwin Core term (local name) conventionally holding this field.
    pub fn dwc_term(self) -> &'static str {
        match self {
            Field::RecordId => "occurrenceID",
            Field::RecordedBy => "recordedBy",
            Field::RecordNumber => "recordNumber",
            Field::EventDate => "eventDate",
            Field::CountryCode => "countryCode",
            Field::Order => "order",
            Field::Family => "family",
            Field::ScientificName => "scientificName",
            Field::InstitutionCode => "institutionCode",
            Field::TypeStatus => "typeStatus",
            Field::Latitude => "decimalLatitude",
            Field::Longitude => "decimalLongitude",
            Field::Media => "associatedMedia",
        }
    }

    pub fn is_mandatory(self) -> bool {
        matches!(self, Field::RecordedBy | Field::RecordNumber | Field::EventDate | Field::InstitutionCode)
    }

    pub fn from_dwc_term(term: &str) -> Option<Field> {
        let local = term.rsplit(['/', '#']).next().unwrap_or(term);
        Field::ALL.into_iter().find(|f| f.dwc_term() == local)
    }
}

impl fmt::Display for Field {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Field {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim();
        Field::ALL
            .into_iter()
            .find(|f| f.name() == key)
            .ok_or_else(|| Error::Mapping(format!("unknown canonical field `{key}`")))
    }
}

/// Maps canonical fields onto source columns, plus the dialect of the source.
///
/// Without a header row, column names are 0-based positions ("0", "1", ...).
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnMapping {
    columns: BTreeMap<Field, String>,
    pub delimiter: u8,
    pub quote: Option<u8>,
    pub has_header: bool,
}

impl Default for ColumnMapping {
    fn default() -> Self {
        Self::darwin_core()
    }
}

impl ColumnMapping {
    /// Empty mapping; every field must be set explicitly.
    pub fn empty() -> Self {
        ColumnMapping { columns: BTreeMap::new(), delimiter: b'\t', quote: None, has_header: true }
    }

    /// GBIF-style tab-separated occurrence download, no quoting.
    pub fn darwin_core() -> Self {
        let mut m = Self::empty();
        for f in Field::ALL {
            m.columns.insert(f, f.dwc_term().to_string());
        }
        m
    }

    /// Layout of the canonical record checkpoint.
    pub fn canonical() -> Self {
        let mut m = Self::empty();
        for f in Field::ALL {
            m.columns.insert(f, f.name().to_string());
        }
        m.quote = Some(b'"');
        m
    }

    pub fn with_column(mut self, field: Field, column: impl Into<String>) -> Self {
        self.set(field, column);
        self
    }

    pub fn set(&mut self, field: Field, column: impl Into<String>) {
        self.columns.insert(field, column.into());
    }

    pub fn remove(&mut self, field: Field) {
        self.columns.remove(&field);
    }

    pub fn column(&self, field: Field) -> Option<&str> {
        self.columns.get(&field).map(String::as_str)
    }

    /// Parses `key=value` lines. Keys are canonical field names or one of
    /// `delimiter`, `quote`, `header`. Fields not named keep their current
    /// mapping; `field=` (empty value) unmaps a field.
    pub fn apply_config(&mut self, text: &str) -> Result<()> {
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Mapping(format!("line {}: expected key=value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            match key {
                "delimiter" => self.delimiter = parse_dialect_byte(value)?.unwrap_or(b'\t'),
                "quote" => self.quote = parse_dialect_byte(value)?,
                "header" => {
                    self.has_header = match value {
                        "true" | "yes" | "1" => true,
                        "false" | "no" | "0" => false,
                        v => return Err(Error::Mapping(format!("bad header flag `{v}`"))),
                    }
                }
                _ => {
                    let field: Field = key.parse()?;
                    if value.is_empty() {
                        self.remove(field);
                    } else {
                        self.set(field, value);
                    }
                }
            }
        }
        Ok(())
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut m = Self::darwin_core();
        m.apply_config(&text)?;
        Ok(m)
    }

    /// Resolves column positions against a header row (or positional names).
    pub(crate) fn resolve(&self, header: Option<&[String]>) -> Result<ResolvedColumns> {
        let mut idx = [None; Field::ALL.len()];
        for (slot, field) in Field::ALL.into_iter().enumerate() {
            let Some(column) = self.column(field) else {
                if field.is_mandatory() {
                    return Err(Error::UnmappedField { field: field.name() });
                }
                continue;
            };
            let found = match header {
                Some(h) => h.iter().position(|c| c == column),
                None => column.parse::<usize>().ok(),
            };
            match found {
                Some(i) => idx[slot] = Some(i),
                None if field.is_mandatory() => {
                    return Err(Error::MissingColumn { field: field.name(), column: column.to_string() })
                }
                None => {}
            }
        }
        Ok(ResolvedColumns { idx })
    }
}

fn parse_dialect_byte(value: &str) -> Result<Option<u8>> {
    match value {
        "" | "none" => Ok(None),
        "\\t" | "tab" => Ok(Some(b'\t')),
        "comma" => Ok(Some(b',')),
        v if v.len() == 1 && v.is_ascii() => Ok(Some(v.as_bytes()[0])),
        v => Err(Error::Mapping(format!("unsupported dialect character `{v}`"))),
    }
}

/// Column positions per canonical field.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ResolvedColumns {
    pub(crate) idx: [Option<usize>; Field::ALL.len()],
}

impl ResolvedColumns {
    pub(crate) fn get(&self, field: Field) -> Option<usize> {
        self.idx[field as usize]
    }
}
