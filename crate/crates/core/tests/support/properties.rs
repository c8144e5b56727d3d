//! Invariant suites, each run for [`CASES`] generated cases.

use std::collections::{BTreeSet, HashMap};
use std::fmt::Debug;
use std::io::Cursor;

use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

use dupset::assess::{assess_group, assess_groups, conservative_filter};
use dupset::collector::{cluster_collectors, name_distance, normalized_surname_distance, surname_blocks};
use dupset::dedup::{detect_duplicate_groups, detect_duplicate_groups_spilling, normalize_record_number, GroupKey};
use dupset::graph::{build_graph, louvain_communities, modularity};
use dupset::ingest::{is_eligible, RecordStream};
use dupset::propagate::{find_propagable, summarize};
use dupset::{
    run_pipeline, AnnotationClass, AnnotationFlags, AssessOptions, ClusterParams, CollectorId, ColumnMapping, GroupId,
    InstitutionGraph, LabelledRecord, LouvainOptions, ParsedName, PipelineConfig, SpecimenRecord,
};

use super::oracle;

pub const CASES: u32 = 1000;

pub type Suite = (&'static str, fn() -> Result<(), String>);

pub const SUITES: [Suite; 20] = [
    ("ingest: emitted + skipped = data rows", stream_cardinality),
    ("ingest: eligibility is pure and monotone", eligibility_monotone),
    ("collector: name_distance symmetric, zero on identity", name_distance_metric),
    ("collector: clusters equal threshold components", dbscan_matches_components),
    ("collector: clustering ignores input order", dbscan_permutation_invariant),
    ("collector: blocking never separates close surnames", blocking_soundness),
    ("dedup: partition with faithful keys", dedup_partition),
    ("dedup: grouping ignores input order and spilling", dedup_order_independent),
    ("assess: combination cells sum to totals", assess_cells_sum),
    ("assess: copying a family leaves other flags", assess_field_independence),
    ("assess: singletons are conservative", assess_singletons),
    ("propagate: receivable bounds", propagation_bounds),
    ("propagate: propagating everything is idempotent", propagation_idempotent),
    ("propagate: singletons never diverge", propagation_singletons),
    ("graph: weight total equals pair count", graph_counting_identity),
    ("graph: construction ignores order", graph_order_independent),
    ("graph: Louvain beats trivial partitions, monotone trace", louvain_bounds),
    ("graph: Louvain local optimum on small graphs", louvain_local_optimum),
    ("pipeline: every stage conserves records", pipeline_conservation),
    ("pipeline: reruns are identical", pipeline_deterministic),
];

fn check<S>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) -> Result<(), String>
where
    S: Strategy,
    S::Value: Debug,
{
    let mut runner = TestRunner::new(Config { cases: CASES, failure_persistence: None, ..Config::default() });
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn fail(e: impl std::fmt::Display) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

// ---- ingest ----

fn row_fields(n: usize) -> impl Strategy<Value = Vec<String>> {
    ("[A-Za-z0-9]{1,5}", prop::collection::vec("[A-Za-z0-9 .,-]{0,6}", n - 1)).prop_map(|(first, mut rest)| {
        rest.insert(0, first);
        rest
    })
}

pub fn stream_cardinality() -> Result<(), String> {
    let row = prop_oneof![3 => row_fields(13), 1 => (1usize..20).prop_flat_map(row_fields)];
    check(prop::collection::vec(row, 0..40), |rows| {
        let mut text = super::DWC_HEADER.join("\t");
        for r in &rows {
            text.push('\n');
            text.push_str(&r.join("\t"));
        }
        let mut stream = RecordStream::from_reader(Cursor::new(text.into_bytes()), "p", &ColumnMapping::darwin_core())
            .map_err(fail)?;
        let yielded = stream.by_ref().collect::<Result<Vec<_>, _>>().map_err(fail)?.len() as u64;
        let stats = stream.stats();
        prop_assert_eq!(stats.rows_emitted + stats.rows_skipped, rows.len() as u64);
        prop_assert_eq!(stats.rows_emitted, yielded);
        prop_assert_eq!(yielded, rows.iter().filter(|r| r.len() == 13).count() as u64);
        Ok(())
    })
}

pub fn eligibility_monotone() -> Result<(), String> {
    let date = prop_oneof![
        (1800u32..2030, 1u32..13, 1u32..29).prop_map(|(y, m, d)| format!("{y:04}-{m:02}-{d:02}")),
        (1800u32..2030, 1u32..13, 1u32..29).prop_map(|(y, m, d)| format!("{y:04}{m:02}{d:02}")),
        (1800u32..2030).prop_map(|y| y.to_string()),
        Just("1964-06-19/1964-06-21".to_string()),
        Just("2013-02-30".to_string()),
        Just(String::new()),
    ];
    check(("[A-Za-z .,]{0,8}", "[A-Za-z0-9 .-]{0,6}", date), |(by, number, date)| {
        let r = SpecimenRecord::new("x", by.as_str(), number.as_str(), date.as_str(), "K");
        prop_assert_eq!(is_eligible(&r), is_eligible(&r.clone()));
        let year: String = date.chars().take(4).collect();
        let no_digits: String = number.chars().filter(|c| !c.is_ascii_digit()).collect();
        let variants = [
            SpecimenRecord::new("x", "", number.as_str(), date.as_str(), "K"),
            SpecimenRecord::new("x", by.as_str(), no_digits.as_str(), date.as_str(), "K"),
            SpecimenRecord::new("x", by.as_str(), number.as_str(), year.as_str(), "K"),
        ];
        for v in &variants {
            prop_assert!(!is_eligible(v) || is_eligible(&r), "coarsening made {:?} eligible", v);
        }
        Ok(())
    })
}

// ---- collector ----

fn arb_name() -> impl Strategy<Value = ParsedName> {
    ("[abkz]{2,7}", "[pq]{0,2}").prop_map(|(s, i)| ParsedName::new(&s, &i))
}

fn arb_eps() -> impl Strategy<Value = f64> {
    prop::sample::select(vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.5, 1.0])
}

fn with_raws(mut names: Vec<ParsedName>) -> Vec<ParsedName> {
    for (i, n) in names.iter_mut().enumerate() {
        n.raw = format!("n{i}");
    }
    names
}

fn member_sets(entities: &[dupset::CollectorEntity]) -> BTreeSet<BTreeSet<String>> {
    entities.iter().map(|e| e.members.clone()).collect()
}

pub fn name_distance_metric() -> Result<(), String> {
    let name = ("[a-z]{1,10}", "[a-z]{0,3}").prop_map(|(s, i)| ParsedName::new(&s, &i));
    check((name.clone(), name), |(a, b)| {
        let d = name_distance(&a, &b);
        prop_assert_eq!(d, name_distance(&b, &a));
        prop_assert_eq!(name_distance(&a, &a), 0.0);
        prop_assert!((0.0..=1.0).contains(&d));
        Ok(())
    })
}

pub fn dbscan_matches_components() -> Result<(), String> {
    check((prop::collection::vec(arb_name(), 1..=200), arb_eps()), |(names, eps)| {
        let names = with_raws(names);
        let entities = cluster_collectors(&names, ClusterParams::new(eps, 1).map_err(fail)?).map_err(fail)?;
        let expected: BTreeSet<BTreeSet<String>> =
            oracle::components(names.len(), |i, j| name_distance(&names[i], &names[j]) <= eps)
                .into_iter()
                .map(|c| c.into_iter().map(|i| names[i].raw.clone()).collect())
                .collect();
        prop_assert_eq!(member_sets(&entities), expected);
        Ok(())
    })
}

pub fn dbscan_permutation_invariant() -> Result<(), String> {
    let input = prop::collection::vec(arb_name(), 0..80)
        .prop_map(with_raws)
        .prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()));
    check((input, arb_eps(), 1usize..5), |((names, shuffled), eps, min_pts)| {
        let params = ClusterParams::new(eps, min_pts).map_err(fail)?;
        let a = cluster_collectors(&names, params).map_err(fail)?;
        let b = cluster_collectors(&shuffled, params).map_err(fail)?;
        prop_assert_eq!(member_sets(&a), member_sets(&b));
        Ok(())
    })
}

pub fn blocking_soundness() -> Result<(), String> {
    let eps = prop::sample::select(vec![0.05, 0.1, 0.15, 0.2, 0.25]);
    check((prop::collection::vec("[abkz]{4,9}", 2..60), eps), |(surnames, eps)| {
        let blocks = surname_blocks(&surnames, eps);
        for i in 0..surnames.len() {
            for j in i + 1..surnames.len() {
                let longest = surnames[i].len().max(surnames[j].len()) as f64;
                let close = oracle::levenshtein(&surnames[i], &surnames[j]) as f64 / longest <= eps;
                prop_assert_eq!(close, normalized_surname_distance(&surnames[i], &surnames[j]) <= eps);
                if close {
                    prop_assert_eq!(blocks[i], blocks[j], "{} and {} split", &surnames[i], &surnames[j]);
                }
            }
        }
        Ok(())
    })
}

// ---- dedup ----

fn arb_labelled(max: usize) -> impl Strategy<Value = Vec<LabelledRecord>> {
    let number = prop::sample::select(vec!["12", "Smith 12", "12a", "12A", "SN-12", "13", " 13 ", "s.n. 13"]);
    let date = prop::sample::select(vec!["2001-05-01", "20010501", "2001-05-02", "1964-06-19"]);
    prop::collection::vec((1u32..4, number, date), 0..max).prop_map(|rows| {
        rows.into_iter()
            .enumerate()
            .map(|(i, (c, n, d))| LabelledRecord {
                record: SpecimenRecord::new(format!("r{i}"), "x", n, d, "K"),
                collector_id: CollectorId(c),
            })
            .collect()
    })
}

fn id_sets(g: &dupset::Grouping) -> BTreeSet<BTreeSet<String>> {
    g.groups.iter().map(|g| g.member_record_ids.iter().cloned().collect()).collect()
}

pub fn dedup_partition() -> Result<(), String> {
    check((arb_labelled(80), 1usize..8), |(labelled, parts)| {
        let g = detect_duplicate_groups(&labelled, parts).map_err(fail)?;
        prop_assert_eq!(g.groups.iter().map(|g| g.size()).sum::<usize>(), labelled.len());
        let mut seen = BTreeSet::new();
        for group in &g.groups {
            for (&m, id) in group.members.iter().zip(&group.member_record_ids) {
                prop_assert!(seen.insert(id.clone()), "{} in two groups", id);
                prop_assert_eq!(g.assignment[m], group.duplicate_group_id);
                let (a, b) = (&labelled[group.members[0]], &labelled[m]);
                prop_assert_eq!(a.collector_id, b.collector_id);
                prop_assert_eq!(a.record.event_date, b.record.event_date);
                prop_assert_eq!(
                    normalize_record_number(&a.record.record_number_raw).to_lowercase(),
                    normalize_record_number(&b.record.record_number_raw).to_lowercase()
                );
                prop_assert_eq!(GroupKey::of(b), Some(group.key.clone()));
            }
        }
        let hist = g.size_histogram();
        prop_assert_eq!(hist.iter().map(|(s, c)| s * c).sum::<usize>(), labelled.len());
        prop_assert_eq!(hist.values().sum::<usize>(), g.groups.len());
        Ok(())
    })
}

pub fn dedup_order_independent() -> Result<(), String> {
    let input = arb_labelled(60).prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()));
    check((input, 1usize..6), |((labelled, shuffled), parts)| {
        let a = detect_duplicate_groups(&labelled, parts).map_err(fail)?;
        let b = detect_duplicate_groups(&shuffled, 1).map_err(fail)?;
        prop_assert_eq!(id_sets(&a), id_sets(&b));
        let scratch = tempfile::tempdir().map_err(fail)?;
        let spilled = detect_duplicate_groups_spilling(&labelled, parts, scratch.path()).map_err(fail)?;
        prop_assert_eq!(spilled, a);
        Ok(())
    })
}

// ---- assess ----

fn arb_taxon_fields() -> impl Strategy<Value = (Option<String>, Option<String>, Option<String>)> {
    let v = |pool: Vec<&'static str>| prop::option::of(prop::sample::select(pool).prop_map(str::to_string));
    (
        v(vec!["US", "us", "PE"]),
        v(vec!["Solanales", "Saxifragales"]),
        v(vec!["Solanaceae", "SOLANACEAE", "Crassulaceae"]),
    )
}

fn with_taxa(mut r: SpecimenRecord, (c, o, f): (Option<String>, Option<String>, Option<String>)) -> SpecimenRecord {
    r.country_code = c;
    r.taxon_order = o;
    r.family = f;
    r
}

pub fn assess_cells_sum() -> Result<(), String> {
    let input = (arb_labelled(60), prop::collection::vec(arb_taxon_fields(), 60), any::<bool>());
    check(input, |(labelled, taxa, strict)| {
        let labelled: Vec<LabelledRecord> = labelled
            .into_iter()
            .zip(taxa)
            .map(|(mut l, t)| {
                l.record = with_taxa(l.record, t);
                l
            })
            .collect();
        let g = detect_duplicate_groups(&labelled, 2).map_err(fail)?;
        let a = assess_groups(&g, &labelled, AssessOptions { strict_missing: strict });
        let sel = conservative_filter(&g.groups, &a).map_err(fail)?;
        prop_assert_eq!(sel.counts.total_groups(), g.groups.len() as u64);
        prop_assert_eq!(sel.counts.total_records(), labelled.len() as u64);
        prop_assert_eq!(sel.groups.len(), a.iter().filter(|a| a.conservative).count());
        Ok(())
    })
}

pub fn assess_field_independence() -> Result<(), String> {
    let input = prop::collection::vec(arb_taxon_fields(), 2..8).prop_flat_map(|m| {
        let n = m.len();
        (Just(m), 0..n, 0..n)
    });
    check((input, any::<bool>()), |((members, a, b), strict)| {
        let opts = AssessOptions { strict_missing: strict };
        let mut records: Vec<SpecimenRecord> =
            members.into_iter().map(|t| with_taxa(SpecimenRecord::default(), t)).collect();
        let before = assess_group(GroupId(1), &records, opts);
        records[a].family = records[b].family.clone();
        let after = assess_group(GroupId(1), &records, opts);
        prop_assert!(!before.countrycode_conservative || after.countrycode_conservative);
        prop_assert!(!before.order_conservative || after.order_conservative);
        if !strict {
            prop_assert!(!before.family_conservative || after.family_conservative);
        }
        Ok(())
    })
}

pub fn assess_singletons() -> Result<(), String> {
    check((arb_taxon_fields(), any::<bool>()), |(t, strict)| {
        let r = with_taxa(SpecimenRecord::default(), t);
        let a = assess_group(GroupId(1), [&r], AssessOptions { strict_missing: strict });
        prop_assert!(a.conservative);
        Ok(())
    })
}

// ---- propagate ----

type Member = ((bool, bool, bool), Option<&'static str>);

fn arb_member() -> impl Strategy<Value = Member> {
    let name =
        prop::option::of(prop::sample::select(vec!["Sedum citrinum", "sedum  CITRINUM", "Solanum aligerum", ""]));
    ((any::<bool>(), any::<bool>(), any::<bool>()), name)
}

fn propagation_of(id: u32, members: &[Member]) -> dupset::GroupPropagation {
    find_propagable(
        GroupId(id),
        members
            .iter()
            .map(|&((georef, typestatus, image), name)| (AnnotationFlags { georef, typestatus, image }, name)),
    )
}

pub fn propagation_bounds() -> Result<(), String> {
    check(prop::collection::vec(prop::collection::vec(arb_member(), 1..8), 0..30), |groups| {
        let props: Vec<_> = groups.iter().enumerate().map(|(i, g)| propagation_of(i as u32 + 1, g)).collect();
        let s = summarize(&props);
        prop_assert_eq!(s.groups, groups.len() as u64);
        prop_assert_eq!(s.specimens, groups.iter().map(|g| g.len() as u64).sum::<u64>());
        for class in AnnotationClass::ALL {
            let c = s.class(class);
            prop_assert!(c.groups_propagable <= s.groups);
            prop_assert!(c.specimens_receivable <= s.specimens - c.groups_propagable);
        }
        Ok(())
    })
}

pub fn propagation_idempotent() -> Result<(), String> {
    check(prop::collection::vec(arb_member(), 1..10), |members| {
        let before = propagation_of(1, &members);
        for (k, class) in AnnotationClass::ALL.into_iter().enumerate() {
            if !before.class(class).propagable {
                continue;
            }
            let filled: Vec<Member> = members
                .iter()
                .map(|&((g, t, i), n)| {
                    let mut f = [g, t, i];
                    f[k] = true;
                    ((f[0], f[1], f[2]), n)
                })
                .collect();
            let after = propagation_of(1, &filled);
            prop_assert!(!after.class(class).propagable);
            prop_assert!(after.class(class).all_set);
        }
        Ok(())
    })
}

pub fn propagation_singletons() -> Result<(), String> {
    check(arb_member(), |m| {
        prop_assert!(!propagation_of(1, &[m]).name_divergent);
        Ok(())
    })
}

// ---- graph ----

fn arb_code_groups() -> impl Strategy<Value = Vec<Vec<&'static str>>> {
    let code = prop::sample::select(vec!["A", "B", "C", "D", "E", "F", " "]);
    prop::collection::vec(prop::collection::vec(code, 1..7), 0..25)
}

pub fn graph_counting_identity() -> Result<(), String> {
    check(arb_code_groups(), |groups| {
        let g = build_graph(&groups);
        let expected: u64 = groups
            .iter()
            .map(|m| {
                let k = m.iter().filter(|c| !c.trim().is_empty()).collect::<BTreeSet<_>>().len() as u64;
                k * k.saturating_sub(1) / 2
            })
            .sum();
        prop_assert_eq!(g.total_weight(), expected);
        let brute = oracle::brute_pairs(&groups);
        let found: std::collections::BTreeMap<(String, String), u64> =
            g.edges().map(|(a, b, w)| ((a.to_string(), b.to_string()), w)).collect();
        prop_assert_eq!(&found, &brute);
        for node in g.nodes() {
            let partners = brute.keys().filter(|(a, b)| a == node || b == node).count();
            prop_assert_eq!(g.degree(node).map_err(fail)?, partners);
        }
        Ok(())
    })
}

pub fn graph_order_independent() -> Result<(), String> {
    let input = arb_code_groups().prop_flat_map(|groups| {
        let shuffled: Vec<_> = groups.iter().map(|g| Just(g.clone()).prop_shuffle()).collect();
        (Just(groups), shuffled.prop_shuffle())
    });
    check(input, |(groups, shuffled)| {
        prop_assert_eq!(build_graph(&groups), build_graph(&shuffled));
        Ok(())
    })
}

/// Node names sort in index order, so oracle indices match graph indices.
fn arb_graph(max_nodes: usize) -> impl Strategy<Value = (usize, Vec<(usize, usize, u64)>)> {
    (1..=max_nodes).prop_flat_map(|n| {
        if n < 2 {
            return (Just(n), Just(Vec::new()).boxed());
        }
        // the offset keeps endpoints distinct
        let edge = (0..n, 1..n, 1u64..4).prop_map(move |(a, off, w)| (a, (a + off) % n, w));
        (Just(n), prop::collection::vec(edge, 0..(2 * n)).boxed())
    })
}

type Dense = Vec<(usize, usize, f64)>;

fn materialize(n: usize, edges: &[(usize, usize, u64)]) -> Result<(InstitutionGraph, Dense), TestCaseError> {
    let names: Vec<String> = (0..n).map(|i| format!("n{i:02}")).collect();
    let g = InstitutionGraph::from_edges(
        names.iter().map(String::as_str),
        edges.iter().map(|&(a, b, w)| (names[a].as_str(), names[b].as_str(), w)),
    )
    .map_err(fail)?;
    Ok((g, edges.iter().map(|&(a, b, w)| (a, b, w as f64)).collect()))
}

pub fn louvain_bounds() -> Result<(), String> {
    check((arb_graph(12), any::<u64>()), |((n, edges), seed)| {
        let (g, dense) = materialize(n, &edges)?;
        let p = louvain_communities(&g, LouvainOptions { seed, resolution: 1.0 }).map_err(fail)?;
        let singletons: Vec<usize> = (0..n).collect();
        let one = vec![0; n];
        let q = oracle::modularity(n, &dense, &p.community, 1.0);
        prop_assert!((q - p.modularity).abs() <= 1e-9, "reported {} vs oracle {}", p.modularity, q);
        prop_assert!((q - modularity(&g, &p.community, 1.0)).abs() <= 1e-9);
        prop_assert!(q >= oracle::modularity(n, &dense, &singletons, 1.0) - 1e-12);
        prop_assert!(q >= oracle::modularity(n, &dense, &one, 1.0) - 1e-12);
        prop_assert!(p.trace.windows(2).all(|w| w[1] >= w[0] - 1e-12), "trace {:?}", p.trace);
        Ok(())
    })
}

pub fn louvain_local_optimum() -> Result<(), String> {
    check((arb_graph(8), any::<u64>()), |((n, edges), seed)| {
        let (g, dense) = materialize(n, &edges)?;
        let p = louvain_communities(&g, LouvainOptions { seed, resolution: 1.0 }).map_err(fail)?;
        prop_assert!(oracle::is_local_optimum(n, &dense, &p.community, 1.0, 1e-9), "{:?}", p.community);
        Ok(())
    })
}

// ---- pipeline ----

fn run_corpus(seed: u64, n: usize, out: Option<&std::path::Path>) -> Result<dupset::PipelineRun, TestCaseError> {
    let dir = tempfile::tempdir().map_err(fail)?;
    let input = super::write_file(dir.path(), "occ.tsv", &super::random_corpus(seed, n));
    let config = PipelineConfig {
        inputs: vec![input],
        out_dir: out.map(|p| p.to_path_buf()),
        seed,
        ..PipelineConfig::default()
    };
    run_pipeline(&config).map_err(fail)
}

pub fn pipeline_conservation() -> Result<(), String> {
    check((any::<u64>(), 0usize..300), |(seed, n)| {
        let run = run_corpus(seed, n, None)?;
        let r = &run.report;
        r.check_conservation().map_err(fail)?;
        prop_assert_eq!(r.rows_read, n as u64);
        prop_assert_eq!(r.labelled as usize, run.labelled.len());
        prop_assert_eq!(run.grouping.groups.iter().map(|g| g.size()).sum::<usize>(), run.labelled.len());
        let conservative: usize = run
            .grouping
            .groups
            .iter()
            .zip(&run.assessments)
            .filter(|(_, a)| a.conservative)
            .map(|(g, _)| g.size())
            .sum();
        prop_assert_eq!(r.conservative_records as usize, conservative);
        Ok(())
    })
}

fn artifacts(dir: &std::path::Path) -> Result<HashMap<String, Vec<u8>>, TestCaseError> {
    let mut out = HashMap::new();
    for entry in std::fs::read_dir(dir).map_err(fail)? {
        let entry = entry.map_err(fail)?;
        let name = entry.file_name().to_string_lossy().into_owned();
        // the two report files carry wall-clock timings
        if name != "report.json" && name != "report.txt" {
            out.insert(name, std::fs::read(entry.path()).map_err(fail)?);
        }
    }
    Ok(out)
}

pub fn pipeline_deterministic() -> Result<(), String> {
    check((any::<u64>(), 0usize..150), |(seed, n)| {
        let (a, b) = (tempfile::tempdir().map_err(fail)?, tempfile::tempdir().map_err(fail)?);
        let ra = run_corpus(seed, n, Some(a.path()))?;
        let rb = run_corpus(seed, n, Some(b.path()))?;
        prop_assert_eq!(ra.report.without_timings(), rb.report.without_timings());
        let (fa, fb) = (artifacts(a.path())?, artifacts(b.path())?);
        prop_assert!(fa.len() >= 10, "only {} artifacts", fa.len());
        prop_assert_eq!(fa, fb);
        Ok(())
    })
}
