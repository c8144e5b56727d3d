//! Disk-backed grouping: keys are spilled into hash partitions, each
//! partition is grouped and sorted into a run file, and the runs are merged
//! in key order to assign group ids.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;

use super::{keys_of, partition_of, GroupKey, Grouping};
use crate::collector::LabelledRecord;
use crate::error::{Error, Result};
use crate::record::CollectorId;

type Row = (GroupKey, Vec<usize>);

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::WriterBuilder::new().delimiter(b'\t').has_headers(false).from_writer(BufWriter::new(f)))
}

fn reader(path: &Path) -> Result<csv::Reader<BufReader<File>>> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new().delimiter(b'\t').has_headers(false).flexible(true).from_reader(BufReader::new(f)))
}

fn write_row(w: &mut csv::Writer<BufWriter<File>>, key: &GroupKey, members: &[usize]) -> Result<()> {
    let members = members.iter().map(usize::to_string).collect::<Vec<_>>().join(",");
    w.write_record([key.collector_id.0.to_string(), key.event_date.to_string(), key.record_number.clone(), members])?;
    Ok(())
}

fn read_row(rec: &csv::StringRecord) -> Result<Row> {
    let bad = || Error::format("spill partition", format!("corrupt row {rec:?}"));
    let collector_id = CollectorId(rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(bad)?);
    let event_date: NaiveDate = rec.get(1).and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let record_number = rec.get(2).ok_or_else(bad)?.to_string();
    let members =
        rec.get(3).ok_or_else(bad)?.split(',').map(|m| m.parse().map_err(|_| bad())).collect::<Result<Vec<usize>>>()?;
    Ok((GroupKey { collector_id, event_date, record_number }, members))
}

fn group_partition(input: &Path, output: &Path) -> Result<()> {
    let mut map: HashMap<GroupKey, Vec<usize>> = HashMap::new();
    for rec in reader(input)?.records() {
        let (key, members) = read_row(&rec?)?;
        map.entry(key).or_default().extend(members);
    }
    let mut rows: Vec<Row> = map.into_iter().collect();
    rows.sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut w = writer(output)?;
    for (k, m) in &rows {
        write_row(&mut w, k, m)?;
    }
    w.flush()?;
    Ok(())
}

/// Same result as [`super::detect_duplicate_groups`], holding at most one
/// partition's hash table in memory at a time. Scratch files live in a
/// temporary directory under `scratch`.
pub fn detect_duplicate_groups_spilling(
    labelled: &[LabelledRecord],
    partitions: usize,
    scratch: &Path,
) -> Result<Grouping> {
    let partitions = partitions.max(1);
    let dir = tempfile::Builder::new().prefix("dedup-spill").tempdir_in(scratch).map_err(|e| Error::io(scratch, e))?;
    let spill_path = |p: usize| dir.path().join(format!("part-{p:04}.tsv"));
    let run_path = |p: usize| dir.path().join(format!("run-{p:04}.tsv"));

    {
        let keys = keys_of(labelled)?;
        let mut writers = (0..partitions).map(|p| writer(&spill_path(p))).collect::<Result<Vec<_>>>()?;
        for (i, k) in keys.iter().enumerate() {
            write_row(&mut writers[partition_of(k, partitions)], k, &[i])?;
        }
        for w in &mut writers {
            w.flush()?;
        }
    }

    (0..partitions).into_par_iter().try_for_each(|p| group_partition(&spill_path(p), &run_path(p)))?;

    // k-way merge; partitions hold disjoint keys
    let mut runs =
        (0..partitions).map(|p| reader(&run_path(p)).map(|r| r.into_records())).collect::<Result<Vec<_>>>()?;
    let mut heap = BinaryHeap::new();
    for (p, run) in runs.iter_mut().enumerate() {
        if let Some(rec) = run.next() {
            heap.push(Reverse((read_row(&rec?)?, p)));
        }
    }
    let mut merged: Vec<Row> = Vec::new();
    while let Some(Reverse((row, p))) = heap.pop() {
        merged.push(row);
        if let Some(rec) = runs[p].next() {
            heap.push(Reverse((read_row(&rec?)?, p)));
        }
    }
    Ok(super::number_groups(merged, labelled))
}
