//! Slow, direct re-implementations used to cross-check the library.

use std::collections::{BTreeMap, BTreeSet};

use dupset::LabelledRecord;

/// Institution pair -> number of groups holding both, by enumerating every
/// pair of distinct codes in every group.
pub fn brute_pairs(groups: &[Vec<&str>]) -> BTreeMap<(String, String), u64> {
    let mut out = BTreeMap::new();
    for g in groups {
        let codes: BTreeSet<&str> = g.iter().copied().filter(|c| !c.trim().is_empty()).collect();
        let codes: Vec<&str> = codes.into_iter().collect();
        for i in 0..codes.len() {
            for j in i + 1..codes.len() {
                *out.entry((codes[i].to_string(), codes[j].to_string())).or_default() += 1;
            }
        }
    }
    out
}

/// Modularity from a dense adjacency matrix.
pub fn modularity(n: usize, edges: &[(usize, usize, f64)], community: &[usize], gamma: f64) -> f64 {
    let mut a = vec![vec![0.0; n]; n];
    for &(i, j, w) in edges {
        a[i][j] += w;
        a[j][i] += w;
    }
    let k: Vec<f64> = a.iter().map(|row| row.iter().sum()).collect();
    let m2: f64 = k.iter().sum();
    if m2 == 0.0 {
        return 0.0;
    }
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if community[i] == community[j] {
                q += a[i][j] - gamma * k[i] * k[j] / m2;
            }
        }
    }
    q / m2
}

/// Best modularity over every partition of `n` nodes, enumerated as
/// restricted growth strings.
pub fn exhaustive_optimum(n: usize, edges: &[(usize, usize, f64)], gamma: f64) -> (f64, Vec<usize>) {
    let mut best = (f64::NEG_INFINITY, Vec::new());
    let mut rgs = vec![0usize; n];
    loop {
        let q = modularity(n, edges, &rgs, gamma);
        if q > best.0 {
            best = (q, rgs.clone());
        }
        // next restricted growth string
        let mut i = n;
        loop {
            if i <= 1 {
                return best;
            }
            i -= 1;
            let max_prefix = rgs[..i].iter().copied().max().unwrap_or(0);
            if rgs[i] <= max_prefix {
                rgs[i] += 1;
                for r in &mut rgs[i + 1..] {
                    *r = 0;
                }
                break;
            }
        }
    }
}

/// No single node can move to another existing community, or to a new one,
/// and raise modularity by more than `tol`.
pub fn is_local_optimum(n: usize, edges: &[(usize, usize, f64)], community: &[usize], gamma: f64, tol: f64) -> bool {
    let q = modularity(n, edges, community, gamma);
    let fresh = community.iter().copied().max().unwrap_or(0) + 1;
    let labels: BTreeSet<usize> = community.iter().copied().chain([fresh]).collect();
    for v in 0..n {
        for &c in &labels {
            if c == community[v] {
                continue;
            }
            let mut moved = community.to_vec();
            moved[v] = c;
            if modularity(n, edges, &moved, gamma) > q + tol {
                return false;
            }
        }
    }
    true
}

fn naive_record_number(raw: &str) -> String {
    let tail: String =
        raw.chars().skip_while(|c| c.is_alphabetic() || c.is_whitespace() || ".-'".contains(*c)).collect();
    tail.trim_end().to_lowercase()
}

fn naive_value(v: &Option<String>) -> Option<String> {
    v.as_deref().map(|s| s.trim().to_lowercase()).filter(|s| !s.is_empty())
}

fn naive_is_type(raw: &Option<String>) -> bool {
    let s: String =
        raw.as_deref().unwrap_or("").chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect();
    s.contains("type") && s != "notatype"
}

fn naive_georef(r: &dupset::SpecimenRecord) -> bool {
    match (r.latitude, r.longitude) {
        (Some(a), Some(b)) => a.abs() <= 90.0 && b.abs() <= 180.0 && (a, b) != (0.0, 0.0),
        _ => false,
    }
}

fn naive_name(n: &Option<String>) -> Option<String> {
    let s = n.as_deref()?.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase();
    (!s.is_empty()).then_some(s)
}

/// Per-group assessment: (country, order, family, conservative).
pub type Flags = [bool; 4];

/// Totals in the order typestatus, georef, image:
/// (groups propagable, specimens receivable); then divergent groups and
/// their specimens.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NaiveSummary {
    pub groups: u64,
    pub specimens: u64,
    pub classes: [(u64, u64); 3],
    pub divergent: (u64, u64),
}

#[derive(Debug, Clone)]
pub struct NaiveRun {
    /// Groups as sets of record ids.
    pub groups: Vec<BTreeSet<String>>,
    pub flags: Vec<Flags>,
    pub summary: NaiveSummary,
}

/// Grouping, assessment and propagation by pairwise comparison of the
/// labelled records, missing values ignored.
pub fn naive_procedures(labelled: &[LabelledRecord]) -> NaiveRun {
    // Grouping: compare each record against the first member of every group.
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..labelled.len() {
        let a = &labelled[i];
        let home = groups.iter().position(|g| {
            let b = &labelled[g[0]];
            a.collector_id == b.collector_id
                && a.record.event_date == b.record.event_date
                && naive_record_number(&a.record.record_number_raw) == naive_record_number(&b.record.record_number_raw)
        });
        match home {
            Some(h) => groups[h].push(i),
            None => groups.push(vec![i]),
        }
    }

    let mut flags = Vec::with_capacity(groups.len());
    let mut summary = NaiveSummary::default();
    for g in &groups {
        let agree = |f: fn(&LabelledRecord) -> &Option<String>| {
            let vals: BTreeSet<String> = g.iter().filter_map(|&m| naive_value(f(&labelled[m]))).collect();
            vals.len() <= 1
        };
        let c = agree(|l| &l.record.country_code);
        let o = agree(|l| &l.record.taxon_order);
        let f = agree(|l| &l.record.family);
        flags.push([c, o, f, c && o && f]);
        if !(c && o && f) {
            continue;
        }
        summary.groups += 1;
        summary.specimens += g.len() as u64;
        let tests: [fn(&dupset::SpecimenRecord) -> bool; 3] =
            [|r| naive_is_type(&r.type_status_raw), naive_georef, |r| !r.media_refs.is_empty()];
        for (k, test) in tests.iter().enumerate() {
            let with = g.iter().filter(|&&m| test(&labelled[m].record)).count() as u64;
            let without = g.len() as u64 - with;
            if with > 0 && without > 0 {
                summary.classes[k].0 += 1;
                summary.classes[k].1 += without;
            }
        }
        let names: BTreeSet<String> =
            g.iter().filter_map(|&m| naive_name(&labelled[m].record.scientific_name)).collect();
        if names.len() >= 2 {
            summary.divergent.0 += 1;
            summary.divergent.1 += g.len() as u64;
        }
    }
    let groups = groups.iter().map(|g| g.iter().map(|&m| labelled[m].record.record_id.clone()).collect()).collect();
    NaiveRun { groups, flags, summary }
}

/// Connected components of the graph joining every pair with `close(i, j)`.
pub fn components(n: usize, close: impl Fn(usize, usize) -> bool) -> BTreeSet<BTreeSet<usize>> {
    let mut label: Vec<usize> = (0..n).collect();
    for i in 0..n {
        for j in i + 1..n {
            if close(i, j) {
                let (a, b) = (label[i], label[j]);
                if a != b {
                    for l in &mut label {
                        if *l == b {
                            *l = a;
                        }
                    }
                }
            }
        }
    }
    let mut sets: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    for (i, l) in label.into_iter().enumerate() {
        sets.entry(l).or_default().insert(i);
    }
    sets.into_values().collect()
}

/// Levenshtein distance by the full dynamic-programming table.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for (i, row) in t.iter_mut().enumerate() {
        row[0] = i;
    }
    t[0] = (0..=b.len()).collect();
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            let sub = t[i - 1][j - 1] + usize::from(a[i - 1] != b[j - 1]);
            t[i][j] = sub.min(t[i - 1][j] + 1).min(t[i][j - 1] + 1);
        }
    }
    t[a.len()][b.len()]
}
