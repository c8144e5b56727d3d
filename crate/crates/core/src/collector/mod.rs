//! Collector resolution: team strings are reduced to a primary collector,
//! parsed into surname and initials, and clustered with DBSCAN under
//! [`name_distance`] so that variant spellings share one [`CollectorId`].

mod distance;
mod name;
mod simjoin;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Write;

use rayon::prelude::*;

pub use distance::{initials_compatible, name_distance, normalized_surname_distance, SURNAME_CUTOFF};
pub use name::{extract_primary, parse_name, ParsedName};

use crate::error::{Error, Result};
use crate::ingest::is_eligible;
use crate::record::{CollectorId, SpecimenRecord};
use simjoin::{similar_lists, SimilarityJoin};

pub const DEFAULT_EPS: f64 = 0.2;
pub const DEFAULT_MIN_PTS: usize = 1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterParams {
    pub eps: f64,
    pub min_pts: usize,
}

impl Default for ClusterParams {
    fn default() -> Self {
        ClusterParams { eps: DEFAULT_EPS, min_pts: DEFAULT_MIN_PTS }
    }
}

impl ClusterParams {
    pub fn new(eps: f64, min_pts: usize) -> Result<Self> {
        let p = ClusterParams { eps, min_pts };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::InvalidParameter(format!("eps must be in (0, 1], got {}", self.eps)));
        }
        if self.min_pts == 0 {
            return Err(Error::InvalidParameter("min_pts must be at least 1".into()));
        }
        Ok(())
    }
}

/// How an entity came about.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Resolution {
    Clustered,
    /// DBSCAN noise (only possible with `min_pts > 1`).
    Unresolved,
    /// No surname could be isolated; the raw string stands alone.
    Unparsed,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectorEntity {
    pub collector_id: CollectorId,
    pub members: BTreeSet<String>,
    pub canonical_surname: String,
    pub resolution: Resolution,
}

impl CollectorEntity {
    /// Display label; noise entities read as `unresolved-<id>`.
    pub fn label(&self) -> String {
        match self.resolution {
            Resolution::Unresolved => format!("unresolved-{}", self.collector_id),
            _ => self.canonical_surname.clone(),
        }
    }

    fn sort_key(&self) -> (&str, &str) {
        (self.canonical_surname.as_str(), self.members.iter().next().map(String::as_str).unwrap_or(""))
    }
}

/// Numbers entities from 1 in (canonical surname, smallest member) order.
fn number_entities(entities: &mut [CollectorEntity]) {
    entities.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()).then(a.resolution.cmp(&b.resolution)));
    for (i, e) in entities.iter_mut().enumerate() {
        e.collector_id = CollectorId(i as u32 + 1);
    }
}

/// Distinct (surname, initials) with the raw strings that produced it.
#[derive(Debug)]
struct NameKey {
    surname: ParsedName,
    raws: Vec<String>,
}

#[derive(Debug, Default)]
pub(crate) struct DisjointSet {
    parent: Vec<usize>,
}

impl DisjointSet {
    pub(crate) fn new(n: usize) -> Self {
        DisjointSet { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Partitions distinct surnames so that any two surnames close enough to be
/// DBSCAN neighbours share a block. Blocks are the connected components of
/// the surname-similarity graph.
pub fn surname_blocks(surnames: &[String], eps: f64) -> Vec<usize> {
    let n = surnames.len();
    if eps >= 1.0 {
        return vec![0; n];
    }
    let names: Vec<&str> = surnames.iter().map(String::as_str).collect();
    let mut ds = DisjointSet::new(n);
    for (a, b) in SimilarityJoin::new(&names, eps.min(SURNAME_CUTOFF)).pairs() {
        ds.union(a, b);
    }
    (0..n).map(|i| ds.find(i)).collect()
}

/// Neighbourhoods `{j : name_distance(i, j) <= eps}` of every key. Below
/// eps = 1 a neighbour's surname must be within the surname cutoff, so
/// candidates come from a similarity join over the block's surnames.
fn neighbourhoods(keys: &[&NameKey], eps: f64) -> Vec<Vec<usize>> {
    let mut surnames: Vec<&str> = keys.iter().map(|k| k.surname.surname.as_str()).collect();
    surnames.sort_unstable();
    surnames.dedup();
    let mut by_surname: Vec<Vec<usize>> = vec![Vec::new(); surnames.len()];
    let index: HashMap<&str, usize> = surnames.iter().enumerate().map(|(i, s)| (*s, i)).collect();
    for (i, k) in keys.iter().enumerate() {
        by_surname[index[k.surname.surname.as_str()]].push(i);
    }
    let similar = similar_lists(&surnames, eps.min(SURNAME_CUTOFF));
    (0..keys.len())
        .into_par_iter()
        .map(|i| {
            let mut nb: Vec<usize> = similar[index[keys[i].surname.surname.as_str()]]
                .iter()
                .flat_map(|&s| by_surname[s].iter().copied())
                .filter(|&j| name_distance(&keys[i].surname, &keys[j].surname) <= eps)
                .collect();
            nb.sort_unstable();
            nb
        })
        .collect()
}

/// DBSCAN over one block of distinct names; each key weighs as many points
/// as it has raw strings. Returns clusters and noise as key indices.
fn dbscan_block(keys: &[&NameKey], eps: f64, min_pts: usize) -> (Vec<Vec<usize>>, Vec<usize>) {
    let n = keys.len();
    if eps >= 1.0 {
        // every pair is within reach, so all points share one neighbourhood
        let total: usize = keys.iter().map(|k| k.raws.len()).sum();
        return if total >= min_pts { (vec![(0..n).collect()], Vec::new()) } else { (Vec::new(), (0..n).collect()) };
    }
    let neighbours = neighbourhoods(keys, eps);
    let weight = |idx: &[usize]| idx.iter().map(|&j| keys[j].raws.len()).sum::<usize>();
    let is_core: Vec<bool> = neighbours.iter().map(|nb| weight(nb) >= min_pts).collect();

    const UNSEEN: usize = usize::MAX;
    const NOISE: usize = usize::MAX - 1;
    let mut label = vec![UNSEEN; n];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        if label[i] != UNSEEN {
            continue;
        }
        if !is_core[i] {
            label[i] = NOISE;
            continue;
        }
        let c = clusters.len();
        let mut members = vec![i];
        label[i] = c;
        let mut queue: Vec<usize> = neighbours[i].clone();
        while let Some(j) = queue.pop() {
            if label[j] == NOISE {
                label[j] = c;
                members.push(j);
                continue;
            }
            if label[j] != UNSEEN {
                continue;
            }
            label[j] = c;
            members.push(j);
            if is_core[j] {
                queue.extend(neighbours[j].iter().copied().filter(|&k| label[k] == UNSEEN || label[k] == NOISE));
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }
    let noise = (0..n).filter(|&i| label[i] == NOISE).collect();
    (clusters, noise)
}

fn canonical_surname(keys: &[&NameKey]) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for k in keys {
        *counts.entry(k.surname.surname.as_str()).or_default() += k.raws.len();
    }
    // ties go to the lexicographically smallest surname
    let best = counts.values().copied().max().unwrap_or(0);
    counts.into_iter().find(|&(_, c)| c == best).map(|(s, _)| s.to_string()).unwrap_or_default()
}

/// Density-based clustering of parsed names.
///
/// Names are grouped by their `raw` string (duplicates collapse). Clusters
/// become [`Resolution::Clustered`] entities; with `min_pts > 1` each noise
/// string becomes its own [`Resolution::Unresolved`] entity.
pub fn cluster_collectors<'a>(
    names: impl IntoIterator<Item = &'a ParsedName>,
    params: ClusterParams,
) -> Result<Vec<CollectorEntity>> {
    params.validate()?;
    let mut entities = cluster_unnumbered(names, params);
    number_entities(&mut entities);
    Ok(entities)
}

fn cluster_unnumbered<'a>(
    names: impl IntoIterator<Item = &'a ParsedName>,
    params: ClusterParams,
) -> Vec<CollectorEntity> {
    let mut by_key: BTreeMap<(String, Vec<char>), BTreeSet<String>> = BTreeMap::new();
    for n in names {
        by_key.entry((n.surname.clone(), n.initials.clone())).or_default().insert(n.raw.clone());
    }
    let keys: Vec<NameKey> = by_key
        .into_iter()
        .map(|((surname, initials), raws)| NameKey {
            surname: ParsedName { surname, initials, raw: String::new() },
            raws: raws.into_iter().collect(),
        })
        .collect();

    let mut surnames: Vec<String> = keys.iter().map(|k| k.surname.surname.clone()).collect();
    surnames.dedup();
    let block_of_surname = surname_blocks(&surnames, params.eps);
    let surname_index: HashMap<&str, usize> = surnames.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
    let mut blocks: BTreeMap<usize, Vec<&NameKey>> = BTreeMap::new();
    for k in &keys {
        let b = block_of_surname[surname_index[k.surname.surname.as_str()]];
        blocks.entry(b).or_default().push(k);
    }

    let per_block: Vec<Vec<CollectorEntity>> = blocks
        .into_values()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|block| {
            let (clusters, noise) = dbscan_block(&block, params.eps, params.min_pts);
            let mut out = Vec::with_capacity(clusters.len() + noise.len());
            for c in clusters {
                let members: Vec<&NameKey> = c.iter().map(|&i| block[i]).collect();
                out.push(CollectorEntity {
                    collector_id: CollectorId(0),
                    canonical_surname: canonical_surname(&members),
                    members: members.iter().flat_map(|k| k.raws.iter().cloned()).collect(),
                    resolution: Resolution::Clustered,
                });
            }
            for i in noise {
                for raw in &block[i].raws {
                    out.push(CollectorEntity {
                        collector_id: CollectorId(0),
                        canonical_surname: block[i].surname.surname.clone(),
                        members: BTreeSet::from([raw.clone()]),
                        resolution: Resolution::Unresolved,
                    });
                }
            }
            out
        })
        .collect();
    per_block.into_iter().flatten().collect()
}

/// Resolved collectors plus the lookup from verbatim `recorded_by` strings.
#[derive(Debug, Clone, Default)]
pub struct CollectorTable {
    entities: Vec<CollectorEntity>,
    by_name: HashMap<String, CollectorId>,
}

impl CollectorTable {
    pub fn from_entities(mut entities: Vec<CollectorEntity>) -> Self {
        entities.sort_by_key(|e| e.collector_id);
        let by_name =
            entities.iter().flat_map(|e| e.members.iter().map(move |m| (m.clone(), e.collector_id))).collect();
        CollectorTable { entities, by_name }
    }

    pub fn entities(&self) -> &[CollectorEntity] {
        &self.entities
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn lookup(&self, recorded_by: &str) -> Option<CollectorId> {
        self.by_name.get(recorded_by).copied()
    }

    pub fn entity(&self, id: CollectorId) -> Option<&CollectorEntity> {
        self.entities.get((id.0 as usize).checked_sub(1)?)
    }

    /// Entity table: collector_id, canonical_surname, member_count, members.
    pub fn write_entities<W: Write>(&self, out: W) -> Result<()> {
        let mut w = crate::ingest::canonical_writer(out);
        w.write_record(["collector_id", "canonical_surname", "member_count", "members"])?;
        for e in &self.entities {
            let members: Vec<&str> = e.members.iter().map(String::as_str).collect();
            w.write_record([e.collector_id.to_string(), e.label(), e.members.len().to_string(), members.join("|")])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Unambiguous name lookup table: recorded_by, collector_id.
    pub fn write_name_index<W: Write>(&self, out: W) -> Result<()> {
        let mut w = crate::ingest::canonical_writer(out);
        w.write_record(["recorded_by", "collector_id"])?;
        let sorted: BTreeMap<&String, &CollectorId> = self.by_name.iter().collect();
        for (name, id) in sorted {
            w.write_record([name.as_str(), &id.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a table written by [`write_name_index`](Self::write_name_index).
    /// Entities are rebuilt with their members; surnames are re-derived.
    pub fn read_name_index<R: std::io::Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().delimiter(b'\t').from_reader(input);
        let mut members: BTreeMap<u32, BTreeSet<String>> = BTreeMap::new();
        for row in r.records() {
            let row = row?;
            let (Some(name), Some(id)) = (row.get(0), row.get(1)) else {
                return Err(Error::format("collector index", "expected two columns"));
            };
            let id: u32 =
                id.parse().map_err(|_| Error::format("collector index", format!("bad collector id `{id}`")))?;
            members.entry(id).or_default().insert(name.to_string());
        }
        let entities = members
            .into_iter()
            .map(|(id, members)| {
                let parsed: Vec<ParsedName> = members.iter().filter_map(|m| parse_name(&extract_primary(m))).collect();
                let resolution = if parsed.is_empty() { Resolution::Unparsed } else { Resolution::Clustered };
                let canonical_surname = parsed
                    .first()
                    .map(|p| p.surname.clone())
                    .unwrap_or_else(|| unparsed_surname(members.iter().next().unwrap()));
                CollectorEntity { collector_id: CollectorId(id), members, canonical_surname, resolution }
            })
            .collect();
        Ok(Self::from_entities(entities))
    }
}

fn unparsed_surname(raw: &str) -> String {
    raw.trim().to_lowercase()
}

/// Clusters the distinct collector strings and numbers the result.
/// Strings without a parseable name become singleton entities.
pub fn resolve_collectors<'a>(
    recorded_by: impl IntoIterator<Item = &'a str>,
    params: ClusterParams,
) -> Result<CollectorTable> {
    params.validate()?;
    let distinct: BTreeSet<&str> = recorded_by.into_iter().collect();
    let mut parsed = Vec::with_capacity(distinct.len());
    let mut unparsed = Vec::new();
    for raw in distinct {
        match parse_name(&extract_primary(raw)) {
            Some(mut p) => {
                p.raw = raw.to_string();
                parsed.push(p);
            }
            None => unparsed.push(raw),
        }
    }
    let mut entities = cluster_unnumbered(&parsed, params);
    entities.extend(unparsed.into_iter().map(|raw| CollectorEntity {
        collector_id: CollectorId(0),
        members: BTreeSet::from([raw.to_string()]),
        canonical_surname: unparsed_surname(raw),
        resolution: Resolution::Unparsed,
    }));
    number_entities(&mut entities);
    Ok(CollectorTable::from_entities(entities))
}

/// An eligible record carrying its collector.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelledRecord {
    pub record: SpecimenRecord,
    pub collector_id: CollectorId,
}

#[derive(Debug, Clone, Default)]
pub struct Labelling {
    pub labelled: Vec<LabelledRecord>,
    /// Records failing [`is_eligible`].
    pub ineligible: u64,
    /// Eligible records whose collector string is absent from the table.
    pub unresolved: u64,
}

impl Labelling {
    pub fn excluded(&self) -> u64 {
        self.ineligible + self.unresolved
    }
}

pub fn assign_collector_ids(records: impl IntoIterator<Item = SpecimenRecord>, table: &CollectorTable) -> Labelling {
    let mut out = Labelling::default();
    for record in records {
        if !is_eligible(&record) {
            out.ineligible += 1;
            continue;
        }
        match table.lookup(&record.recorded_by) {
            Some(collector_id) => out.labelled.push(LabelledRecord { record, collector_id }),
            None => out.unresolved += 1,
        }
    }
    out
}
