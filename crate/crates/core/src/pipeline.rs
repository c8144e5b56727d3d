//! End-to-end run: ingest, collector resolution, grouping, assessment,
//! propagation and the institution graph, with per-stage checkpoints and a
//! cross-checked report.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assess::{assess_groups, conservative_filter, AssessOptions, CombinationCounts, GroupAssessment};
use crate::checkpoint::{write_assessments, write_labelled};
use crate::collector::{
    assign_collector_ids, resolve_collectors, ClusterParams, CollectorTable, LabelledRecord, Resolution,
};
use crate::dedup::{detect_duplicate_groups, detect_duplicate_groups_spilling, Grouping};
use crate::error::{Error, Result};
use crate::graph::{
    build_graph, export_graph, louvain_communities, GraphFormat, InstitutionGraph, LouvainOptions, Partition,
};
use crate::ingest::{is_eligible, parse_source, write_records, ColumnMapping, ParseStats};
use crate::propagate::{
    compute_annotation_flags, find_propagable, summarize, write_group_report, GroupPropagation, PropagationSummary,
    TypeVocabulary,
};
use crate::record::SpecimenRecord;

/// Version of the [`RunReport`] JSON layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub inputs: Vec<PathBuf>,
    pub mapping: ColumnMapping,
    pub cluster: ClusterParams,
    pub assess: AssessOptions,
    /// Type-status vocabulary file; the built-in list when absent.
    pub vocabulary: Option<PathBuf>,
    /// Hash partitions for grouping.
    pub partitions: usize,
    /// Group through partition files under this directory.
    pub spill_dir: Option<PathBuf>,
    pub seed: u64,
    pub resolution: f64,
    /// Where artifacts go; nothing is written when absent.
    pub out_dir: Option<PathBuf>,
    /// Write the intermediate stage tables as well as the final reports.
    pub checkpoints: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            inputs: Vec::new(),
            mapping: ColumnMapping::darwin_core(),
            cluster: ClusterParams::default(),
            assess: AssessOptions::default(),
            vocabulary: None,
            partitions: 16,
            spill_dir: None,
            seed: 0,
            resolution: 1.0,
            out_dir: None,
            checkpoints: true,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.cluster.validate()?;
        if self.partitions == 0 {
            return Err(Error::InvalidParameter("partition count must be at least 1".into()));
        }
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::InvalidParameter(format!("resolution must be positive, got {}", self.resolution)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphReport {
    pub nodes: u64,
    pub edges: u64,
    pub total_weight: u64,
    pub communities: u64,
    /// Nodes without any edge.
    pub isolated: u64,
    pub modularity: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub rows_read: u64,
    pub rows_skipped: u64,
    pub records: u64,
    pub record_ids_rewritten: u64,
    pub eligible: u64,
    pub ineligible: u64,
    pub collector_entities: u64,
    pub unresolved_entities: u64,
    pub unparsed_entities: u64,
    pub labelled: u64,
    pub unlabelled: u64,
    pub groups: u64,
    pub duplicate_groups: u64,
    pub duplicate_relationship_records: u64,
    pub conservative_groups: u64,
    pub conservative_records: u64,
    pub assessment: CombinationCounts,
    pub propagation: PropagationSummary,
    pub graph: GraphReport,
    pub timings: Vec<StageTiming>,
}

impl RunReport {
    /// Same report without wall-clock times, for reproducibility checks.
    pub fn without_timings(&self) -> RunReport {
        RunReport { timings: Vec::new(), ..self.clone() }
    }

    /// Every stage's output plus its exclusions equals its input.
    pub fn check_conservation(&self) -> Result<()> {
        let checks = [
            ("rows", self.records + self.rows_skipped, self.rows_read),
            ("eligibility", self.eligible + self.ineligible, self.records),
            ("labelling", self.labelled + self.unlabelled, self.eligible),
            ("assessment groups", self.assessment.total_groups(), self.groups),
            ("assessment records", self.assessment.total_records(), self.labelled),
            ("propagation groups", self.propagation.groups, self.conservative_groups),
            ("propagation records", self.propagation.specimens, self.conservative_records),
        ];
        for (what, got, want) in checks {
            if got != want {
                return Err(Error::InvalidParameter(format!("{what}: accounted {got} of {want}")));
            }
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| {
            let _ = writeln!(s, "{k:<34}{v}");
        };
        line("rows read", self.rows_read.to_string());
        line("rows skipped (malformed)", self.rows_skipped.to_string());
        line("records", self.records.to_string());
        line("record ids rewritten", self.record_ids_rewritten.to_string());
        line("eligible records", self.eligible.to_string());
        line("collector entities", self.collector_entities.to_string());
        line("  unresolved / unparsed", format!("{} / {}", self.unresolved_entities, self.unparsed_entities));
        line("labelled records", self.labelled.to_string());
        line("groups", self.groups.to_string());
        line("duplicate groups (size >= 2)", self.duplicate_groups.to_string());
        line("records in duplicate relationship", self.duplicate_relationship_records.to_string());
        line("conservative groups", self.conservative_groups.to_string());
        line("conservative records", self.conservative_records.to_string());
        for c in &self.assessment.cells {
            let tf = |b: bool| if b { 'T' } else { 'F' };
            line(
                &format!(
                    "  country/order/family {}{}{}",
                    tf(c.flags.countrycode),
                    tf(c.flags.order),
                    tf(c.flags.family)
                ),
                format!("{} groups, {} records", c.group_count, c.record_count),
            );
        }
        let p = &self.propagation;
        for (name, c) in [("typestatus", p.typestatus), ("georef", p.georef), ("image", p.image)] {
            line(
                &format!("propagable {name}"),
                format!("{} groups, {} specimens receivable", c.groups_propagable, c.specimens_receivable),
            );
        }
        line(
            "divergent scientific names",
            format!(
                "{} groups, {} specimens",
                p.name_divergence.groups_divergent, p.name_divergence.specimens_in_divergent_groups
            ),
        );
        let g = &self.graph;
        line("graph nodes / edges", format!("{} / {}", g.nodes, g.edges));
        line("graph isolated nodes", g.isolated.to_string());
        line("graph communities", g.communities.to_string());
        if let Some(q) = g.modularity {
            line("graph modularity", format!("{q:.6}"));
        }
        for t in &self.timings {
            line(&format!("time {}", t.stage), format!("{:.3} s", t.seconds));
        }
        s
    }
}

/// Everything a run produces, for callers that inspect results directly.
#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub report: RunReport,
    pub collectors: CollectorTable,
    pub labelled: Vec<LabelledRecord>,
    pub grouping: Grouping,
    pub assessments: Vec<GroupAssessment>,
    /// Indexed like `grouping.groups`.
    pub propagation: Vec<GroupPropagation>,
    pub graph: InstitutionGraph,
    pub partition: Option<Partition>,
}

impl PipelineRun {
    pub fn group_propagation(&self, id: crate::GroupId) -> &GroupPropagation {
        &self.propagation[id.0 as usize - 1]
    }
}

/// Reads every input, making record ids unique across the run. A repeated
/// id is replaced by `<file>:<row>`.
pub fn ingest_all(inputs: &[PathBuf], mapping: &ColumnMapping) -> Result<(Vec<SpecimenRecord>, ParseStats, u64)> {
    let mut records = Vec::new();
    let mut stats = ParseStats::default();
    let mut seen: HashSet<String> = HashSet::new();
    let mut rewritten = 0;
    for path in inputs {
        let mut stream = parse_source(path, mapping)?;
        while let Some(rec) = stream.next() {
            let mut rec = rec.map_err(|e| match e {
                Error::RawIo(io) => Error::io(path, io),
                e => e,
            })?;
            if seen.contains(&rec.record_id) {
                let base = format!("{}:{}", stream.label(), stream.row());
                let mut id = base.clone();
                let mut n = 1;
                while seen.contains(&id) {
                    n += 1;
                    id = format!("{base}:{n}");
                }
                rec.record_id = id;
                rewritten += 1;
            }
            seen.insert(rec.record_id.clone());
            records.push(rec);
        }
        stats += stream.stats();
    }
    Ok((records, stats, rewritten))
}

struct Artifacts<'a> {
    dir: Option<&'a Path>,
    checkpoints: bool,
}

impl Artifacts<'_> {
    fn write(&self, name: &str, checkpoint: bool, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
        let Some(dir) = self.dir else { return Ok(()) };
        if checkpoint && !self.checkpoints {
            return Ok(());
        }
        let path = dir.join(name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))
    }
}

struct Clock {
    start: Instant,
    timings: Vec<StageTiming>,
}

impl Clock {
    fn lap(&mut self, stage: &str) {
        let now = Instant::now();
        self.timings.push(StageTiming { stage: stage.into(), seconds: (now - self.start).as_secs_f64() });
        self.start = now;
    }
}

/// Runs every stage over `config.inputs`.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineRun> {
    config.validate().map_err(|e| e.in_stage("config"))?;
    let vocab = match &config.vocabulary {
        Some(p) => TypeVocabulary::from_file(p).map_err(|e| e.in_stage("config"))?,
        None => TypeVocabulary::default(),
    };
    if let Some(dir) = &config.out_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).in_stage("config"))?;
    }
    let out = Artifacts { dir: config.out_dir.as_deref(), checkpoints: config.checkpoints };
    let mut clock = Clock { start: Instant::now(), timings: Vec::new() };

    let (records, stats, rewritten) = ingest_all(&config.inputs, &config.mapping).map_err(|e| e.in_stage("ingest"))?;
    out.write("records.tsv", true, |w| write_records(w, &records)).map_err(|e| e.in_stage("ingest"))?;
    clock.lap("ingest");

    let eligible_names = records.iter().filter(|r| is_eligible(r)).map(|r| r.recorded_by.as_str());
    let collectors = resolve_collectors(eligible_names, config.cluster).map_err(|e| e.in_stage("collector"))?;
    let records_total = records.len() as u64;
    let labelling = assign_collector_ids(records, &collectors);
    out.write("collectors.tsv", true, |w| collectors.write_entities(w))
        .and_then(|_| out.write("collector_names.tsv", true, |w| collectors.write_name_index(w)))
        .map_err(|e| e.in_stage("collector"))?;
    clock.lap("collector");

    let labelled = labelling.labelled;
    let grouping = match &config.spill_dir {
        Some(dir) => detect_duplicate_groups_spilling(&labelled, config.partitions, dir),
        None => detect_duplicate_groups(&labelled, config.partitions),
    }
    .map_err(|e| e.in_stage("dedup"))?;
    out.write("labelled.tsv", true, |w| write_labelled(w, &labelled, Some(&grouping.assignment)))
        .map_err(|e| e.in_stage("dedup"))?;
    clock.lap("dedup");

    let assessments = assess_groups(&grouping, &labelled, config.assess);
    let selection = conservative_filter(&grouping.groups, &assessments).map_err(|e| e.in_stage("assess"))?;
    let conservative_records: u64 = selection.groups.iter().map(|g| g.size() as u64).sum();
    out.write("assessments.tsv", true, |w| write_assessments(w, &assessments))
        .and_then(|_| out.write("assessment_combinations.tsv", false, |w| selection.counts.write_tsv(w)))
        .and_then(|_| {
            out.write("assessment_combinations.json", false, |w| {
                serde_json::to_writer_pretty(&mut *w, &selection.counts)?;
                Ok(writeln!(w)?)
            })
        })
        .map_err(|e| e.in_stage("assess"))?;
    clock.lap("assess");

    let propagation: Vec<GroupPropagation> = grouping
        .groups
        .par_iter()
        .map(|g| {
            find_propagable(
                g.duplicate_group_id,
                g.members.iter().map(|&m| {
                    let r = &labelled[m].record;
                    (compute_annotation_flags(r, &vocab), r.scientific_name.as_deref())
                }),
            )
        })
        .collect();
    let conservative_propagation: Vec<&GroupPropagation> =
        selection.groups.iter().map(|g| &propagation[g.duplicate_group_id.0 as usize - 1]).collect();
    let summary = summarize(conservative_propagation.par_iter().copied());
    out.write("group_propagation.tsv", false, |w| write_group_report(w, conservative_propagation.iter().copied()))
        .and_then(|_| {
            out.write("summary.json", false, |w| {
                serde_json::to_writer_pretty(&mut *w, &summary)?;
                Ok(writeln!(w)?)
            })
        })
        .map_err(|e| e.in_stage("propagate"))?;
    clock.lap("propagate");

    let institution_sets: Vec<Vec<&str>> = selection
        .groups
        .iter()
        .map(|g| g.members.iter().map(|&m| labelled[m].record.institution_code.as_str()).collect())
        .collect();
    let mut graph = build_graph(&institution_sets);
    let partition = if graph.is_empty() {
        None
    } else {
        let opts = LouvainOptions { seed: config.seed, resolution: config.resolution };
        let p = louvain_communities(&graph, opts).map_err(|e| e.in_stage("graph"))?;
        graph.set_communities(p.community.clone()).map_err(|e| e.in_stage("graph"))?;
        Some(p)
    };
    if let Some(dir) = &config.out_dir {
        for (format, name) in [
            (GraphFormat::GraphMl, "graph.graphml"),
            (GraphFormat::Dot, "graph.dot"),
            (GraphFormat::EdgeListCsv, "graph_edges.csv"),
        ] {
            export_graph(&graph, format, &dir.join(name)).map_err(|e| e.in_stage("graph"))?;
        }
    }
    clock.lap("graph");

    let report = RunReport {
        schema_version: REPORT_SCHEMA_VERSION,
        rows_read: stats.rows_read(),
        rows_skipped: stats.rows_skipped,
        records: records_total,
        record_ids_rewritten: rewritten,
        eligible: records_total - labelling.ineligible,
        ineligible: labelling.ineligible,
        collector_entities: collectors.len() as u64,
        unresolved_entities: count_resolution(&collectors, Resolution::Unresolved),
        unparsed_entities: count_resolution(&collectors, Resolution::Unparsed),
        labelled: labelled.len() as u64,
        unlabelled: labelling.unresolved,
        groups: grouping.groups.len() as u64,
        duplicate_groups: grouping.duplicate_group_count() as u64,
        duplicate_relationship_records: grouping.duplicate_record_count() as u64,
        conservative_groups: selection.groups.len() as u64,
        conservative_records,
        assessment: selection.counts.clone(),
        propagation: summary,
        graph: GraphReport {
            nodes: graph.node_count() as u64,
            edges: graph.edge_count() as u64,
            total_weight: graph.total_weight(),
            communities: graph.community_count() as u64,
            isolated: graph.isolated_count() as u64,
            modularity: partition.as_ref().map(|p| p.modularity),
        },
        timings: clock.timings,
    };
    report.check_conservation().map_err(|e| e.in_stage("report"))?;
    if records_total != stats.rows_emitted {
        return Err(Error::InvalidParameter(format!(
            "{records_total} records kept but {} emitted",
            stats.rows_emitted
        ))
        .in_stage("report"));
    }
    write_report(config.out_dir.as_deref(), &report).map_err(|e| e.in_stage("report"))?;

    Ok(PipelineRun { report, collectors, labelled, assessments, propagation, graph, partition, grouping })
}

fn count_resolution(table: &CollectorTable, r: Resolution) -> u64 {
    table.entities().iter().filter(|e| e.resolution == r).count() as u64
}

/// Writes `report.json` and `report.txt` into `dir`.
pub fn write_report(dir: Option<&Path>, report: &RunReport) -> Result<()> {
    let Some(dir) = dir else { return Ok(()) };
    let json = dir.join("report.json");
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
    let txt = dir.join("report.txt");
    fs::write(&txt, report.to_text()).map_err(|e| Error::io(&txt, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_input(dir: &Path, rows: &[&str]) -> PathBuf {
        let path = dir.join("in.tsv");
        let header = "occurrenceID\trecordedBy\trecordNumber\teventDate\tinstitutionCode\tfamily";
        fs::write(&path, format!("{header}\n{}\n", rows.join("\n"))).unwrap();
        path
    }

    fn config(input: PathBuf) -> PipelineConfig {
        let mut c = PipelineConfig { inputs: vec![input], ..Default::default() };
        c.mapping = ColumnMapping::empty();
        for (f, col) in [
            (crate::ingest::Field::RecordId, "occurrenceID"),
            (crate::ingest::Field::RecordedBy, "recordedBy"),
            (crate::ingest::Field::RecordNumber, "recordNumber"),
            (crate::ingest::Field::EventDate, "eventDate"),
            (crate::ingest::Field::InstitutionCode, "institutionCode"),
            (crate::ingest::Field::Family, "family"),
        ] {
            c.mapping.set(f, col);
        }
        c
    }

    #[test]
    fn small_run_accounts_for_every_row() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_input(
            dir.path(),
            &[
                "a\tZika, P.F.\t26185\t2013-06-09\tK\tCrassulaceae",
                "b\tP. F. Zika\tPFZ 26185\t2013-06-09\tNY\tCrassulaceae",
                "c\tP. F. Zika\ts.n.\t2013-06-09\tUS\tCrassulaceae",
                "a\tS. Knapp\t1\t2001-01-01\tBM\tSolanaceae",
                "short\trow",
            ],
        );
        let mut cfg = config(input);
        cfg.out_dir = Some(dir.path().join("out"));
        let run = run_pipeline(&cfg).unwrap();
        let r = &run.report;
        assert_eq!((r.rows_read, r.rows_skipped, r.records), (5, 1, 4));
        assert_eq!((r.eligible, r.ineligible, r.labelled), (3, 1, 3));
        assert_eq!(r.record_ids_rewritten, 1);
        assert_eq!((r.groups, r.duplicate_groups, r.duplicate_relationship_records), (2, 1, 2));
        assert_eq!((r.graph.nodes, r.graph.edges, r.graph.isolated), (3, 1, 1));
        assert!(run.labelled.iter().any(|l| l.record.record_id == "in.tsv:4"));
        for f in [
            "records.tsv",
            "collectors.tsv",
            "collector_names.tsv",
            "labelled.tsv",
            "assessments.tsv",
            "assessment_combinations.tsv",
            "assessment_combinations.json",
            "group_propagation.tsv",
            "summary.json",
            "graph.graphml",
            "graph.dot",
            "graph_edges.csv",
            "graph_edges.nodes.csv",
            "report.json",
            "report.txt",
        ] {
            assert!(dir.path().join("out").join(f).exists(), "{f}");
        }
        let back: RunReport =
            serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
        assert_eq!(&back, r);
    }

    #[test]
    fn no_checkpoint_flag_keeps_only_reports() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_input(dir.path(), &["a\tZika, P.F.\t1\t2013-06-09\tK\tX"]);
        let mut cfg = config(input);
        cfg.out_dir = Some(dir.path().join("out"));
        cfg.checkpoints = false;
        run_pipeline(&cfg).unwrap();
        assert!(!dir.path().join("out/labelled.tsv").exists());
        assert!(dir.path().join("out/report.json").exists());
    }

    #[test]
    fn empty_input_gives_zero_report() {
        let dir = tempfile::tempdir().unwrap();
        let input = write_input(dir.path(), &[]);
        let run = run_pipeline(&config(input)).unwrap();
        let r = run.report.without_timings();
        assert_eq!(r.rows_read, 0);
        assert_eq!(r.groups, 0);
        assert_eq!(r.graph, GraphReport::default());
        assert_eq!(r.propagation, PropagationSummary::default());
    }

    #[test]
    fn zero_eps_is_a_config_error() {
        let mut cfg = PipelineConfig::default();
        cfg.cluster.eps = 0.0;
        match run_pipeline(&cfg) {
            Err(Error::Stage { stage, .. }) => assert_eq!(stage, "config"),
            other => panic!("expected config error, got {other:?}"),
        }
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let cfg = PipelineConfig { inputs: vec!["/nonexistent/input.tsv".into()], ..Default::default() };
        let err = run_pipeline(&cfg).unwrap_err();
        assert!(err.to_string().starts_with("stage `ingest` failed"), "{err}");
    }
}
