//! Confidence assessment of duplicate groups: a group is conservative when
//! its members agree on country code, order and family.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::collector::LabelledRecord;
use crate::dedup::{DuplicateGroup, Grouping};
use crate::error::{Error, Result};
use crate::record::{GroupId, SpecimenRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AssessOptions {
    /// Count a missing value as a value of its own, so {"BR", missing}
    /// disagrees. Off by default: absent values are ignored.
    pub strict_missing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupAssessment {
    pub duplicate_group_id: GroupId,
    pub countrycode_conservative: bool,
    pub order_conservative: bool,
    pub family_conservative: bool,
    pub conservative: bool,
}

impl GroupAssessment {
    pub fn combination(&self) -> FlagCombination {
        FlagCombination {
            countrycode: self.countrycode_conservative,
            order: self.order_conservative,
            family: self.family_conservative,
        }
    }
}

fn single_value<'a>(values: impl Iterator<Item = Option<&'a str>>, opts: AssessOptions) -> bool {
    let mut distinct: HashSet<Option<String>> = HashSet::new();
    for v in values {
        let v = v.map(str::trim).filter(|s| !s.is_empty()).map(str::to_lowercase);
        if v.is_none() && !opts.strict_missing {
            continue;
        }
        distinct.insert(v);
        if distinct.len() > 1 {
            return false;
        }
    }
    true
}

/// Assesses one group from its member records. A group with no observed
/// value for a field has nothing in conflict, so that flag is true.
pub fn assess_group<'a, I>(id: GroupId, members: I, opts: AssessOptions) -> GroupAssessment
where
    I: IntoIterator<Item = &'a SpecimenRecord>,
    I::IntoIter: Clone,
{
    let it = members.into_iter();
    let countrycode = single_value(it.clone().map(|r| r.country_code.as_deref()), opts);
    let order = single_value(it.clone().map(|r| r.taxon_order.as_deref()), opts);
    let family = single_value(it.map(|r| r.family.as_deref()), opts);
    GroupAssessment {
        duplicate_group_id: id,
        countrycode_conservative: countrycode,
        order_conservative: order,
        family_conservative: family,
        conservative: countrycode && order && family,
    }
}

/// Assessment of every group, indexed like `grouping.groups`.
pub fn assess_groups(grouping: &Grouping, labelled: &[LabelledRecord], opts: AssessOptions) -> Vec<GroupAssessment> {
    grouping
        .groups
        .par_iter()
        .map(|g| assess_group(g.duplicate_group_id, g.members.iter().map(|&m| &labelled[m].record), opts))
        .collect()
}

/// One of the eight combinations of the three assessment flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FlagCombination {
    pub countrycode: bool,
    pub order: bool,
    pub family: bool,
}

impl FlagCombination {
    /// All combinations, most conservative (all true) first.
    pub fn all() -> [FlagCombination; 8] {
        std::array::from_fn(|i| FlagCombination { countrycode: i & 4 == 0, order: i & 2 == 0, family: i & 1 == 0 })
    }

    fn index(self) -> usize {
        (!self.countrycode as usize) << 2 | (!self.order as usize) << 1 | !self.family as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinationCell {
    #[serde(flatten)]
    pub flags: FlagCombination,
    pub group_count: u64,
    pub record_count: u64,
}

/// Group and record counts for each flag combination.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CombinationCounts {
    pub cells: [CombinationCell; 8],
}

impl Default for CombinationCounts {
    fn default() -> Self {
        CombinationCounts {
            cells: FlagCombination::all().map(|flags| CombinationCell { flags, group_count: 0, record_count: 0 }),
        }
    }
}

impl CombinationCounts {
    pub fn cell(&self, flags: FlagCombination) -> &CombinationCell {
        &self.cells[flags.index()]
    }

    pub fn total_groups(&self) -> u64 {
        self.cells.iter().map(|c| c.group_count).sum()
    }

    pub fn total_records(&self) -> u64 {
        self.cells.iter().map(|c| c.record_count).sum()
    }

    pub fn write_tsv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = crate::ingest::canonical_writer(out);
        w.write_record([
            "countrycode_conservative",
            "order_conservative",
            "family_conservative",
            "group_count",
            "record_count",
        ])?;
        for c in &self.cells {
            w.write_record([
                c.flags.countrycode.to_string(),
                c.flags.order.to_string(),
                c.flags.family.to_string(),
                c.group_count.to_string(),
                c.record_count.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ConservativeSelection<'a> {
    pub groups: Vec<&'a DuplicateGroup>,
    pub counts: CombinationCounts,
}

/// Keeps the groups whose three flags are all true and tallies every flag
/// combination. `assessments` must hold exactly one entry per group.
pub fn conservative_filter<'a>(
    groups: &'a [DuplicateGroup],
    assessments: &[GroupAssessment],
) -> Result<ConservativeSelection<'a>> {
    if groups.len() != assessments.len() {
        return Err(Error::InvalidParameter(format!("{} groups but {} assessments", groups.len(), assessments.len())));
    }
    let mut counts = CombinationCounts::default();
    let mut kept = Vec::new();
    for (g, a) in groups.iter().zip(assessments) {
        if g.duplicate_group_id != a.duplicate_group_id {
            return Err(Error::InvalidParameter(format!(
                "assessment for group {} paired with group {}",
                a.duplicate_group_id, g.duplicate_group_id
            )));
        }
        let cell = &mut counts.cells[a.combination().index()];
        cell.group_count += 1;
        cell.record_count += g.size() as u64;
        if a.conservative {
            kept.push(g);
        }
    }
    Ok(ConservativeSelection { groups: kept, counts })
}
