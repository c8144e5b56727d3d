//! Annotation propagation: per-specimen annotation flags, groups where an
//! annotation is set on some but not all members, and corpus totals of the
//! specimens that could receive one.

mod vocab;

use std::collections::HashSet;
use std::io::Write;
use std::ops::AddAssign;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use vocab::{normalize_status, TypeVocabulary};

use crate::error::Result;
use crate::record::{GroupId, SpecimenRecord};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct AnnotationFlags {
    pub georef: bool,
    pub typestatus: bool,
    pub image: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AnnotationClass {
    Georef,
    TypeStatus,
    Image,
}

impl AnnotationClass {
    pub const ALL: [AnnotationClass; 3] =
        [AnnotationClass::Georef, AnnotationClass::TypeStatus, AnnotationClass::Image];

    pub fn name(self) -> &'static str {
        match self {
            AnnotationClass::Georef => "georef",
            AnnotationClass::TypeStatus => "typestatus",
            AnnotationClass::Image => "image",
        }
    }
}

impl AnnotationFlags {
    pub fn get(&self, class: AnnotationClass) -> bool {
        match class {
            AnnotationClass::Georef => self.georef,
            AnnotationClass::TypeStatus => self.typestatus,
            AnnotationClass::Image => self.image,
        }
    }

    pub fn set(&mut self, class: AnnotationClass, value: bool) {
        match class {
            AnnotationClass::Georef => self.georef = value,
            AnnotationClass::TypeStatus => self.typestatus = value,
            AnnotationClass::Image => self.image = value,
        }
    }
}

/// Georeferenced means both coordinates in range and not the (0, 0) point.
pub fn is_georeferenced(r: &SpecimenRecord) -> bool {
    match (r.latitude, r.longitude) {
        (Some(lat), Some(lon)) => {
            (-90.0..=90.0).contains(&lat) && (-180.0..=180.0).contains(&lon) && !(lat == 0.0 && lon == 0.0)
        }
        _ => false,
    }
}

pub fn compute_annotation_flags(r: &SpecimenRecord, vocab: &TypeVocabulary) -> AnnotationFlags {
    AnnotationFlags {
        georef: is_georeferenced(r),
        typestatus: r.type_status_raw.as_deref().is_some_and(|s| vocab.is_type(s)),
        image: !r.media_refs.is_empty(),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ClassPropagation {
    pub any_set: bool,
    pub all_set: bool,
    pub propagable: bool,
    pub count_with: u64,
    pub count_without: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct GroupPropagation {
    pub duplicate_group_id: GroupId,
    pub georef: ClassPropagation,
    pub typestatus: ClassPropagation,
    pub image: ClassPropagation,
    /// Two or more distinct scientific names among the members.
    pub name_divergent: bool,
}

impl GroupPropagation {
    pub fn class(&self, class: AnnotationClass) -> &ClassPropagation {
        match class {
            AnnotationClass::Georef => &self.georef,
            AnnotationClass::TypeStatus => &self.typestatus,
            AnnotationClass::Image => &self.image,
        }
    }

    fn class_mut(&mut self, class: AnnotationClass) -> &mut ClassPropagation {
        match class {
            AnnotationClass::Georef => &mut self.georef,
            AnnotationClass::TypeStatus => &mut self.typestatus,
            AnnotationClass::Image => &mut self.image,
        }
    }

    pub fn size(&self) -> u64 {
        self.georef.count_with + self.georef.count_without
    }
}

/// Case-folded with runs of whitespace collapsed.
pub fn normalize_scientific_name(name: &str) -> String {
    name.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

/// Per-class propagability of one group from its members' flags and
/// scientific names.
pub fn find_propagable<'a>(
    id: GroupId,
    members: impl IntoIterator<Item = (AnnotationFlags, Option<&'a str>)>,
) -> GroupPropagation {
    let mut g = GroupPropagation {
        duplicate_group_id: id,
        georef: ClassPropagation::default(),
        typestatus: ClassPropagation::default(),
        image: ClassPropagation::default(),
        name_divergent: false,
    };
    let mut names: HashSet<String> = HashSet::new();
    for (flags, name) in members {
        for class in AnnotationClass::ALL {
            let c = g.class_mut(class);
            if flags.get(class) {
                c.count_with += 1;
            } else {
                c.count_without += 1;
            }
        }
        if let Some(n) = name.map(normalize_scientific_name).filter(|n| !n.is_empty()) {
            names.insert(n);
        }
    }
    for class in AnnotationClass::ALL {
        let c = g.class_mut(class);
        c.any_set = c.count_with > 0;
        c.all_set = c.count_without == 0 && c.count_with > 0;
        c.propagable = c.any_set && !c.all_set;
    }
    g.name_divergent = names.len() >= 2;
    g
}

/// Propagation state of every group in `groups`, each given as its member
/// records with precomputed flags.
pub fn find_propagable_groups(
    groups: &[(GroupId, Vec<usize>)],
    records: &[SpecimenRecord],
    flags: &[AnnotationFlags],
) -> Vec<GroupPropagation> {
    groups
        .par_iter()
        .map(|(id, members)| {
            find_propagable(*id, members.iter().map(|&m| (flags[m], records[m].scientific_name.as_deref())))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub groups_propagable: u64,
    pub specimens_receivable: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergenceSummary {
    pub groups_divergent: u64,
    pub specimens_in_divergent_groups: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PropagationSummary {
    pub groups: u64,
    pub specimens: u64,
    pub typestatus: ClassSummary,
    pub georef: ClassSummary,
    pub image: ClassSummary,
    pub name_divergence: DivergenceSummary,
}

impl PropagationSummary {
    pub fn class(&self, class: AnnotationClass) -> &ClassSummary {
        match class {
            AnnotationClass::Georef => &self.georef,
            AnnotationClass::TypeStatus => &self.typestatus,
            AnnotationClass::Image => &self.image,
        }
    }

    fn class_mut(&mut self, class: AnnotationClass) -> &mut ClassSummary {
        match class {
            AnnotationClass::Georef => &mut self.georef,
            AnnotationClass::TypeStatus => &mut self.typestatus,
            AnnotationClass::Image => &mut self.image,
        }
    }

    fn of_group(g: &GroupPropagation) -> Self {
        let mut s = PropagationSummary { groups: 1, specimens: g.size(), ..Default::default() };
        for class in AnnotationClass::ALL {
            let c = g.class(class);
            if c.propagable {
                let sum = s.class_mut(class);
                sum.groups_propagable = 1;
                sum.specimens_receivable = c.count_without;
            }
        }
        if g.name_divergent {
            s.name_divergence = DivergenceSummary { groups_divergent: 1, specimens_in_divergent_groups: g.size() };
        }
        s
    }
}

impl AddAssign for PropagationSummary {
    fn add_assign(&mut self, o: Self) {
        self.groups += o.groups;
        self.specimens += o.specimens;
        for class in AnnotationClass::ALL {
            let (a, b) = (self.class_mut(class), o.class(class));
            a.groups_propagable += b.groups_propagable;
            a.specimens_receivable += b.specimens_receivable;
        }
        self.name_divergence.groups_divergent += o.name_divergence.groups_divergent;
        self.name_divergence.specimens_in_divergent_groups += o.name_divergence.specimens_in_divergent_groups;
    }
}

/// Corpus totals. Callers pass only conservatively assessed groups.
pub fn summarize<'a>(groups: impl IntoParallelIterator<Item = &'a GroupPropagation>) -> PropagationSummary {
    groups.into_par_iter().map(PropagationSummary::of_group).reduce(PropagationSummary::default, |mut a, b| {
        a += b;
        a
    })
}

/// One row per group with every flag and count.
pub fn write_group_report<'a, W: Write>(out: W, groups: impl IntoIterator<Item = &'a GroupPropagation>) -> Result<()> {
    let mut w = crate::ingest::canonical_writer(out);
    let mut header = vec!["duplicate_group_id".to_string(), "size".to_string()];
    for class in AnnotationClass::ALL {
        for col in ["any", "all", "propagable", "with", "without"] {
            header.push(format!("{}_{col}", class.name()));
        }
    }
    header.push("name_divergent".into());
    w.write_record(&header)?;
    for g in groups {
        let mut row = vec![g.duplicate_group_id.to_string(), g.size().to_string()];
        for class in AnnotationClass::ALL {
            let c = g.class(class);
            row.extend([
                c.any_set.to_string(),
                c.all_set.to_string(),
                c.propagable.to_string(),
                c.count_with.to_string(),
                c.count_without.to_string(),
            ]);
        }
        row.push(g.name_divergent.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
