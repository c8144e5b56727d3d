//! Duplicate-group detection: labelled specimens sharing collector, event
//! date and normalized record number form one group.

mod spill;

use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::Serialize;

pub use spill::detect_duplicate_groups_spilling;

use crate::collector::LabelledRecord;
use crate::error::{Error, Result};
use crate::record::{CollectorId, GroupId};

/// Strips the leading run of letters, whitespace, periods, hyphens and
/// apostrophes before the first digit ("Hutchison 5738" -> "5738"). Any
/// suffix after the first digit is kept; trailing whitespace is trimmed.
pub fn normalize_record_number(raw: &str) -> String {
    let start = raw
        .char_indices()
        .find(|&(_, c)| !(c.is_alphabetic() || c.is_whitespace() || matches!(c, '.' | '-' | '\'')))
        .map_or(raw.len(), |(i, _)| i);
    raw[start..].trim_end().to_string()
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct GroupKey {
    pub collector_id: CollectorId,
    pub event_date: NaiveDate,
    /// Normalized and case-folded.
    pub record_number: String,
}

impl GroupKey {
    pub fn of(r: &LabelledRecord) -> Option<GroupKey> {
        Some(GroupKey {
            collector_id: r.collector_id,
            event_date: r.record.event_date?,
            record_number: normalize_record_number(&r.record.record_number_raw).to_lowercase(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DuplicateGroup {
    pub duplicate_group_id: GroupId,
    pub key: GroupKey,
    /// Positions of the members in the labelled input, ascending.
    pub members: Vec<usize>,
    pub member_record_ids: Vec<String>,
}

impl DuplicateGroup {
    pub fn size(&self) -> usize {
        self.members.len()
    }

    /// Groups of two or more records are duplicate relationships.
    pub fn is_duplicate(&self) -> bool {
        self.size() >= 2
    }
}

/// Result of grouping: the groups in id order plus, for every input
/// record, the id of its group.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Grouping {
    pub groups: Vec<DuplicateGroup>,
    pub assignment: Vec<GroupId>,
}

impl Grouping {
    pub fn group(&self, id: GroupId) -> &DuplicateGroup {
        &self.groups[id.0 as usize - 1]
    }

    pub fn duplicate_group_count(&self) -> usize {
        self.groups.iter().filter(|g| g.is_duplicate()).count()
    }

    /// Records participating in a group of size >= 2.
    pub fn duplicate_record_count(&self) -> usize {
        self.groups.iter().filter(|g| g.is_duplicate()).map(DuplicateGroup::size).sum()
    }

    /// Group size -> number of groups.
    pub fn size_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for g in &self.groups {
            *h.entry(g.size()).or_default() += 1;
        }
        h
    }
}

pub(crate) fn keys_of(labelled: &[LabelledRecord]) -> Result<Vec<GroupKey>> {
    labelled
        .par_iter()
        .map(|r| {
            GroupKey::of(r).ok_or_else(|| {
                Error::InvalidParameter(format!("record `{}` has no day-precise event date", r.record.record_id))
            })
        })
        .collect()
}

/// Builds numbered groups from (key, member positions) pairs whose keys are
/// distinct. Groups are numbered from 1 in key order.
pub(crate) fn number_groups(mut raw: Vec<(GroupKey, Vec<usize>)>, labelled: &[LabelledRecord]) -> Grouping {
    raw.par_sort_unstable_by(|a, b| a.0.cmp(&b.0));
    let mut assignment = vec![GroupId(0); labelled.len()];
    let groups = raw
        .into_iter()
        .enumerate()
        .map(|(i, (key, mut members))| {
            let id = GroupId(i as u32 + 1);
            members.sort_unstable();
            for &m in &members {
                assignment[m] = id;
            }
            DuplicateGroup {
                duplicate_group_id: id,
                key,
                member_record_ids: members.iter().map(|&m| labelled[m].record.record_id.clone()).collect(),
                members,
            }
        })
        .collect();
    Grouping { groups, assignment }
}

pub(crate) fn partition_of(key: &GroupKey, partitions: usize) -> usize {
    // DefaultHasher::new uses fixed keys, so partitions are reproducible
    let mut h = std::collections::hash_map::DefaultHasher::new();
    key.hash(&mut h);
    (h.finish() % partitions as u64) as usize
}

/// Groups labelled specimens in memory, hash-partitioned on the key so the
/// partitions are grouped in parallel. Every record must carry an event date.
pub fn detect_duplicate_groups(labelled: &[LabelledRecord], partitions: usize) -> Result<Grouping> {
    let partitions = partitions.max(1);
    let keys = keys_of(labelled)?;
    let mut parts: Vec<Vec<usize>> = vec![Vec::new(); partitions];
    for (i, k) in keys.iter().enumerate() {
        parts[partition_of(k, partitions)].push(i);
    }
    let raw: Vec<(GroupKey, Vec<usize>)> = parts
        .into_par_iter()
        .flat_map_iter(|idx| {
            let mut map: HashMap<&GroupKey, Vec<usize>> = HashMap::new();
            for i in idx {
                map.entry(&keys[i]).or_default().push(i);
            }
            map.into_iter().map(|(k, v)| (k.clone(), v)).collect::<Vec<_>>()
        })
        .collect();
    Ok(number_groups(raw, labelled))
}
