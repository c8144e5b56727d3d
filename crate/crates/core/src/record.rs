//! Canonical specimen record model shared by every pipeline stage.

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

/// Dense identifier of a resolved collector entity, numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CollectorId(pub u32);

/// Dense identifier of a duplicate group, numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GroupId(pub u32);

impl fmt::Display for CollectorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// One occurrence row after column mapping.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SpecimenRecord {
    pub record_id: String,
    pub recorded_by: String,
    pub record_number_raw: String,
    pub event_date_raw: String,
    /// Present only when `event_date_raw` names exactly one day.
    pub event_date: Option<NaiveDate>,
    pub country_code: Option<String>,
    pub taxon_order: Option<String>,
    pub family: Option<String>,
    pub scientific_name: Option<String>,
    pub institution_code: String,
    pub type_status_raw: Option<String>,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
    pub media_refs: Vec<String>,
}

impl SpecimenRecord {
    /// Minimal record carrying only the collecting-event fields.
    pub fn new(
        record_id: impl Into<String>,
        recorded_by: impl Into<String>,
        record_number: impl Into<String>,
        event_date: impl Into<String>,
        institution_code: impl Into<String>,
    ) -> Self {
        let event_date_raw = event_date.into();
        SpecimenRecord {
            record_id: record_id.into(),
            recorded_by: recorded_by.into(),
            record_number_raw: record_number.into(),
            event_date: crate::ingest::parse_event_date(&event_date_raw),
            event_date_raw,
            institution_code: institution_code.into().trim().to_string(),
            ..Default::default()
        }
    }

    /// Sets both coordinates, or clears both when either is invalid.
    pub fn set_coordinates(&mut self, latitude: Option<f64>, longitude: Option<f64>) {
        match (latitude, longitude) {
            (Some(lat), Some(lon))
                if lat.is_finite()
                    && lon.is_finite()
                    && (-90.0..=90.0).contains(&lat)
                    && (-180.0..=180.0).contains(&lon) =>
            {
                self.latitude = Some(lat);
                self.longitude = Some(lon);
            }
            _ => {
                self.latitude = None;
                self.longitude = None;
            }
        }
    }

    /// Splits a `|`-separated media column, dropping blanks.
    pub fn set_media(&mut self, raw: &str) {
        self.media_refs = split_media(raw);
    }
}

pub(crate) fn split_media(raw: &str) -> Vec<String> {
    raw.split('|').map(str::trim).filter(|s| !s.is_empty()).map(str::to_string).collect()
}

/// Trims and drops empty strings.
pub(crate) fn non_blank(raw: &str) -> Option<String> {
    let t = raw.trim();
    (!t.is_empty()).then(|| t.to_string())
}
