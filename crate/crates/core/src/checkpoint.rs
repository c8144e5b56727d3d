//! Tab-delimited stage checkpoints, so each stage can be rerun from the
//! previous stage's output.
//!
//! The labelled table is the canonical record layout followed by
//! `collector_id` and `duplicate_group_id` (blank before grouping). The
//! assessment table has one row per group.

use std::borrow::Cow;
use std::io::{Read, Write};

use crate::assess::GroupAssessment;
use crate::collector::LabelledRecord;
use crate::dedup::{detect_duplicate_groups, Grouping};
use crate::error::{Error, Result};
use crate::ingest::{canonical_row, canonical_writer, record_from_fields, Field};
use crate::record::{CollectorId, GroupId};

const LABELLED_EXTRA: [&str; 2] = ["collector_id", "duplicate_group_id"];
const ASSESSMENT_HEADER: [&str; 5] =
    ["duplicate_group_id", "countrycode_conservative", "order_conservative", "family_conservative", "conservative"];

fn bad(message: impl Into<String>) -> Error {
    Error::format("checkpoint", message)
}

fn tsv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().delimiter(b'\t').from_reader(input)
}

fn expect_header(found: &csv::StringRecord, expected: impl IntoIterator<Item = impl AsRef<str>>) -> Result<()> {
    let expected: Vec<String> = expected.into_iter().map(|s| s.as_ref().to_string()).collect();
    if found.iter().ne(expected.iter().map(String::as_str)) {
        return Err(bad(format!("expected header `{}`", expected.join("\t"))));
    }
    Ok(())
}

fn parse_id(raw: &str, what: &str) -> Result<u32> {
    raw.parse().map_err(|_| bad(format!("bad {what} `{raw}`")))
}

/// Writes labelled records, with group ids when `assignment` is given.
pub fn write_labelled<W: Write>(out: W, labelled: &[LabelledRecord], assignment: Option<&[GroupId]>) -> Result<()> {
    if let Some(a) = assignment {
        if a.len() != labelled.len() {
            return Err(Error::InvalidParameter(format!("{} group ids for {} records", a.len(), labelled.len())));
        }
    }
    let mut w = canonical_writer(out);
    w.write_record(Field::ALL.iter().map(|f| f.name()).chain(LABELLED_EXTRA))?;
    for (i, l) in labelled.iter().enumerate() {
        let mut row = canonical_row(&l.record);
        row.push(l.collector_id.to_string());
        row.push(assignment.map(|a| a[i].to_string()).unwrap_or_default());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Default)]
pub struct LabelledTable {
    pub labelled: Vec<LabelledRecord>,
    /// Present when every row carries a group id.
    pub assignment: Option<Vec<GroupId>>,
}

impl LabelledTable {
    /// Regroups the records and checks the result against the stored group
    /// ids, if any.
    pub fn grouping(&self, partitions: usize) -> Result<Grouping> {
        let grouping = detect_duplicate_groups(&self.labelled, partitions)?;
        if let Some(stored) = &self.assignment {
            if let Some(i) = (0..stored.len()).find(|&i| stored[i] != grouping.assignment[i]) {
                return Err(bad(format!(
                    "record `{}` is stored in group {} but groups into {}",
                    self.labelled[i].record.record_id, stored[i], grouping.assignment[i]
                )));
            }
        }
        Ok(grouping)
    }
}

pub fn read_labelled<R: Read>(input: R) -> Result<LabelledTable> {
    let mut r = tsv_reader(input);
    expect_header(r.headers()?, Field::ALL.iter().map(|f| f.name()).chain(LABELLED_EXTRA))?;
    let n = Field::ALL.len();
    let mut table = LabelledTable::default();
    let mut groups = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let record = record_from_fields(
            |f| Cow::Borrowed(rec.get(f as usize).unwrap_or("").trim()),
            || format!("labelled:{}", row + 1),
        );
        let collector_id = CollectorId(parse_id(&rec[n], "collector_id")?);
        match rec[n + 1].trim() {
            "" => {}
            g => groups.push(GroupId(parse_id(g, "duplicate_group_id")?)),
        }
        table.labelled.push(LabelledRecord { record, collector_id });
    }
    if !groups.is_empty() {
        if groups.len() != table.labelled.len() {
            return Err(bad("duplicate_group_id is set on some rows only"));
        }
        table.assignment = Some(groups);
    }
    Ok(table)
}

pub fn write_assessments<W: Write>(out: W, assessments: &[GroupAssessment]) -> Result<()> {
    let mut w = canonical_writer(out);
    w.write_record(ASSESSMENT_HEADER)?;
    for a in assessments {
        w.write_record([
            a.duplicate_group_id.to_string(),
            a.countrycode_conservative.to_string(),
            a.order_conservative.to_string(),
            a.family_conservative.to_string(),
            a.conservative.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_assessments<R: Read>(input: R) -> Result<Vec<GroupAssessment>> {
    let mut r = tsv_reader(input);
    expect_header(r.headers()?, ASSESSMENT_HEADER)?;
    let flag = |s: &str| s.parse::<bool>().map_err(|_| bad(format!("bad flag `{s}`")));
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let a = GroupAssessment {
            duplicate_group_id: GroupId(parse_id(&rec[0], "duplicate_group_id")?),
            countrycode_conservative: flag(&rec[1])?,
            order_conservative: flag(&rec[2])?,
            family_conservative: flag(&rec[3])?,
            conservative: flag(&rec[4])?,
        };
        if a.conservative != (a.countrycode_conservative && a.order_conservative && a.family_conservative) {
            return Err(bad(format!("group {}: conservative disagrees with its flags", a.duplicate_group_id)));
        }
        out.push(a);
    }
    Ok(out)
}
