//! `dupset`: find duplicate specimens across herbarium occurrence data.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use dupset::assess::{assess_groups, conservative_filter, AssessOptions};
use dupset::checkpoint::{read_assessments, read_labelled, write_assessments, write_labelled, LabelledTable};
use dupset::collector::{assign_collector_ids, resolve_collectors, ClusterParams, CollectorTable};
use dupset::corpus::{generate_corpus, score_grouping, CorpusParams, GroundTruth, SizeDistribution};
use dupset::graph::{build_graph, export_graph, louvain_communities, GraphFormat, LouvainOptions};
use dupset::ingest::{is_eligible, write_records, ColumnMapping};
use dupset::pipeline::{ingest_all, run_pipeline, PipelineConfig};
use dupset::propagate::{compute_annotation_flags, find_propagable, summarize, write_group_report, TypeVocabulary};
use dupset::{GroupAssessment, Grouping, SpecimenRecord};

#[derive(Parser)]
#[command(name = "dupset", version, about = "Duplicate specimen detection for Darwin Core occurrence data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse inputs into the canonical record table.
    Ingest {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        mapping: MappingArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Cluster the collector names of a canonical record table.
    ClusterCollectors {
        records: PathBuf,
        #[command(flatten)]
        cluster: ClusterArgs,
        /// Entity table: collector_id, canonical_surname, member_count, members.
        #[arg(long)]
        entities: PathBuf,
        /// Lookup from verbatim recordedBy to collector_id.
        #[arg(long)]
        names: PathBuf,
    },
    /// Label records with collectors and assign duplicate groups.
    Dedup {
        records: PathBuf,
        #[arg(long)]
        names: PathBuf,
        #[command(flatten)]
        grouping: GroupingArgs,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Assess country, order and family agreement within each group.
    Assess {
        labelled: PathBuf,
        #[arg(long)]
        strict_missing: bool,
        #[command(flatten)]
        grouping: GroupingArgs,
        #[arg(long, short)]
        out: PathBuf,
        /// Flag-combination counts as TSV; a `.json` sibling is written too.
        #[arg(long)]
        combinations: Option<PathBuf>,
    },
    /// Find propagable annotations in conservative groups.
    Propagate {
        labelled: PathBuf,
        #[arg(long)]
        assessments: PathBuf,
        #[arg(long)]
        vocabulary: Option<PathBuf>,
        #[command(flatten)]
        grouping: GroupingArgs,
        #[arg(long)]
        groups_out: PathBuf,
        #[arg(long)]
        summary_out: PathBuf,
    },
    /// Build and export the institution graph of conservative groups.
    Graph {
        labelled: PathBuf,
        #[arg(long)]
        assessments: PathBuf,
        #[command(flatten)]
        grouping: GroupingArgs,
        #[command(flatten)]
        louvain: LouvainArgs,
        #[arg(long, value_enum, default_value = "graphml")]
        format: FormatArg,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Run every stage and write reports and checkpoints.
    Run {
        inputs: Vec<PathBuf>,
        #[command(flatten)]
        mapping: MappingArgs,
        #[command(flatten)]
        cluster: ClusterArgs,
        #[command(flatten)]
        grouping: GroupingArgs,
        #[command(flatten)]
        louvain: LouvainArgs,
        #[arg(long)]
        strict_missing: bool,
        #[arg(long)]
        vocabulary: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Skip intermediate stage tables; reports and graphs are still written.
        #[arg(long)]
        no_checkpoint: bool,
        /// Print the report as JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic corpus and its ground truth.
    GenCorpus {
        #[arg(long, default_value_t = 100)]
        collectors: usize,
        #[arg(long, default_value_t = 20)]
        events: usize,
        /// `5`, `1-6` or `1:0.5,2:0.3,3:0.2`.
        #[arg(long, default_value = "1-6")]
        sizes: SizeDistribution,
        /// Ineligible rows per generated row.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Share of groups with one sheet disagreeing on family.
        #[arg(long, default_value_t = 0.0)]
        discord: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, short)]
        out: PathBuf,
        #[arg(long)]
        truth: PathBuf,
    },
    /// Compare the groups of a labelled table with a ground-truth file.
    Score {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        labelled: PathBuf,
    },
}

#[derive(Args)]
struct MappingArgs {
    /// Starting column layout.
    #[arg(long, value_enum, default_value = "dwc")]
    layout: Layout,
    /// File of `field=column` lines (plus `delimiter`, `quote`, `header`).
    #[arg(long)]
    mapping: Option<PathBuf>,
    /// A single mapping line, e.g. `--map recorded_by=collector`.
    #[arg(long = "map", value_name = "KEY=VALUE")]
    maps: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Layout {
    /// Darwin Core term names, tab-delimited, unquoted.
    Dwc,
    /// The canonical record table written by `ingest`.
    Canonical,
}

impl MappingArgs {
    fn build(&self) -> Result<ColumnMapping> {
        let mut m = match self.layout {
            Layout::Dwc => ColumnMapping::darwin_core(),
            Layout::Canonical => ColumnMapping::canonical(),
        };
        if let Some(path) = &self.mapping {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            m.apply_config(&text)?;
        }
        for line in &self.maps {
            m.apply_config(line)?;
        }
        Ok(m)
    }
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long, default_value_t = dupset::collector::DEFAULT_EPS)]
    eps: f64,
    #[arg(long, default_value_t = dupset::collector::DEFAULT_MIN_PTS)]
    min_pts: usize,
}

impl ClusterArgs {
    fn params(&self) -> Result<ClusterParams> {
        Ok(ClusterParams::new(self.eps, self.min_pts)?)
    }
}

#[derive(Args)]
struct GroupingArgs {
    #[arg(long, default_value_t = 16)]
    partitions: usize,
    /// Group through partition files in this directory.
    #[arg(long)]
    spill_dir: Option<PathBuf>,
}

#[derive(Args)]
struct LouvainArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1.0)]
    resolution: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Graphml,
    Dot,
    EdgelistCsv,
}

impl From<FormatArg> for GraphFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Graphml => GraphFormat::GraphMl,
            FormatArg::Dot => GraphFormat::Dot,
            FormatArg::EdgelistCsv => GraphFormat::EdgeListCsv,
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn read_canonical(path: &Path) -> Result<Vec<SpecimenRecord>> {
    let (records, _, _) = ingest_all(&[path.to_path_buf()], &ColumnMapping::canonical())?;
    Ok(records)
}

fn load_grouped(labelled: &Path, grouping: &GroupingArgs) -> Result<(LabelledTable, Grouping)> {
    let table = read_labelled(open(labelled)?).with_context(|| format!("reading {}", labelled.display()))?;
    let groups = table.grouping(grouping.partitions)?;
    Ok((table, groups))
}

fn load_assessments(path: &Path, grouping: &Grouping) -> Result<Vec<GroupAssessment>> {
    let a = read_assessments(open(path)?).with_context(|| format!("reading {}", path.display()))?;
    if a.len() != grouping.groups.len() {
        bail!("{} assessments for {} groups", a.len(), grouping.groups.len());
    }
    Ok(a)
}

fn json_sibling(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Ingest { inputs, mapping, out } => {
            let (records, stats, rewritten) = ingest_all(&inputs, &mapping.build()?)?;
            let mut w = create(&out)?;
            write_records(&mut w, &records)?;
            w.flush()?;
            let eligible = records.iter().filter(|r| is_eligible(r)).count();
            println!(
                "rows read {}, skipped {}, records {}, eligible {}, ids rewritten {}",
                stats.rows_read(),
                stats.rows_skipped,
                records.len(),
                eligible,
                rewritten
            );
        }
        Command::ClusterCollectors { records, cluster, entities, names } => {
            let records = read_canonical(&records)?;
            let eligible = records.iter().filter(|r| is_eligible(r)).map(|r| r.recorded_by.as_str());
            let table = resolve_collectors(eligible, cluster.params()?)?;
            let mut w = create(&entities)?;
            table.write_entities(&mut w)?;
            w.flush()?;
            let mut w = create(&names)?;
            table.write_name_index(&mut w)?;
            w.flush()?;
            println!("{} collector entities", table.len());
        }
        Command::Dedup { records, names, grouping, out } => {
            let records = read_canonical(&records)?;
            let table = CollectorTable::read_name_index(open(&names)?)?;
            let labelling = assign_collector_ids(records, &table);
            let groups = match &grouping.spill_dir {
                Some(dir) => {
                    dupset::dedup::detect_duplicate_groups_spilling(&labelling.labelled, grouping.partitions, dir)?
                }
                None => dupset::dedup::detect_duplicate_groups(&labelling.labelled, grouping.partitions)?,
            };
            let mut w = create(&out)?;
            write_labelled(&mut w, &labelling.labelled, Some(&groups.assignment))?;
            w.flush()?;
            println!(
                "labelled {}, excluded {} (ineligible {}, unresolved {}), groups {}, duplicate groups {}",
                labelling.labelled.len(),
                labelling.excluded(),
                labelling.ineligible,
                labelling.unresolved,
                groups.groups.len(),
                groups.duplicate_group_count()
            );
        }
        Command::Assess { labelled, strict_missing, grouping, out, combinations } => {
            let (table, groups) = load_grouped(&labelled, &grouping)?;
            let assessments = assess_groups(&groups, &table.labelled, AssessOptions { strict_missing });
            let selection = conservative_filter(&groups.groups, &assessments)?;
            let mut w = create(&out)?;
            write_assessments(&mut w, &assessments)?;
            w.flush()?;
            if let Some(path) = combinations {
                let mut w = create(&path)?;
                selection.counts.write_tsv(&mut w)?;
                w.flush()?;
                let mut w = create(&json_sibling(&path))?;
                serde_json::to_writer_pretty(&mut w, &selection.counts)?;
                writeln!(w)?;
            }
            println!("{} of {} groups conservative", selection.groups.len(), groups.groups.len());
        }
        Command::Propagate { labelled, assessments, vocabulary, grouping, groups_out, summary_out } => {
            let (table, groups) = load_grouped(&labelled, &grouping)?;
            let assessments = load_assessments(&assessments, &groups)?;
            let vocab = match vocabulary {
                Some(p) => TypeVocabulary::from_file(&p)?,
                None => TypeVocabulary::default(),
            };
            let selection = conservative_filter(&groups.groups, &assessments)?;
            let propagation: Vec<_> = selection
                .groups
                .iter()
                .map(|g| {
                    find_propagable(
                        g.duplicate_group_id,
                        g.members.iter().map(|&m| {
                            let r = &table.labelled[m].record;
                            (compute_annotation_flags(r, &vocab), r.scientific_name.as_deref())
                        }),
                    )
                })
                .collect();
            let summary = summarize(&propagation);
            let mut w = create(&groups_out)?;
            write_group_report(&mut w, &propagation)?;
            w.flush()?;
            let mut w = create(&summary_out)?;
            serde_json::to_writer_pretty(&mut w, &summary)?;
            writeln!(w)?;
            println!("{}", serde_json::to_string_pretty(&summary)?);
        }
        Command::Graph { labelled, assessments, grouping, louvain, format, out } => {
            let (table, groups) = load_grouped(&labelled, &grouping)?;
            let assessments = load_assessments(&assessments, &groups)?;
            let selection = conservative_filter(&groups.groups, &assessments)?;
            let sets: Vec<Vec<&str>> = selection
                .groups
                .iter()
                .map(|g| g.members.iter().map(|&m| table.labelled[m].record.institution_code.as_str()).collect())
                .collect();
            let mut graph = build_graph(&sets);
            if !graph.is_empty() {
                let p =
                    louvain_communities(&graph, LouvainOptions { seed: louvain.seed, resolution: louvain.resolution })?;
                graph.set_communities(p.community)?;
                println!("modularity {:.6}", p.modularity);
            }
            export_graph(&graph, format.into(), &out)?;
            println!(
                "{} nodes, {} edges, {} communities, {} isolated",
                graph.node_count(),
                graph.edge_count(),
                graph.community_count(),
                graph.isolated_count()
            );
        }
        Command::Run {
            inputs,
            mapping,
            cluster,
            grouping,
            louvain,
            strict_missing,
            vocabulary,
            out_dir,
            no_checkpoint,
            json,
        } => {
            let config = PipelineConfig {
                inputs,
                mapping: mapping.build()?,
                cluster: ClusterParams { eps: cluster.eps, min_pts: cluster.min_pts },
                assess: AssessOptions { strict_missing },
                vocabulary,
                partitions: grouping.partitions,
                spill_dir: grouping.spill_dir,
                seed: louvain.seed,
                resolution: louvain.resolution,
                out_dir: Some(out_dir),
                checkpoints: !no_checkpoint,
            };
            let run = run_pipeline(&config)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&run.report)?);
            } else {
                print!("{}", run.report.to_text());
            }
        }
        Command::GenCorpus { collectors, events, sizes, noise, discord, seed, out, truth } => {
            let params = CorpusParams {
                collectors,
                events_per_collector: events,
                sizes,
                noise_rate: noise,
                discord_rate: discord,
                seed,
            };
            let corpus = generate_corpus(&params)?;
            let mut w = create(&out)?;
            corpus.write(&mut w)?;
            w.flush()?;
            let mut w = create(&truth)?;
            corpus.truth.write(&mut w)?;
            w.flush()?;
            println!("{} rows, {} true groups", corpus.len(), corpus.truth.groups().len());
        }
        Command::Score { truth, labelled } => {
            let truth = GroundTruth::read(open(&truth)?)?;
            let table = read_labelled(open(&labelled)?)?;
            let Some(assignment) = &table.assignment else {
                bail!("{} has no duplicate_group_id column values", labelled.display());
            };
            let score = score_grouping(
                &truth,
                table.labelled.iter().zip(assignment).map(|(l, g)| (l.record.record_id.as_str(), g.0 as u64)),
            );
            println!("{}", serde_json::to_string_pretty(&score)?);
        }
    }
    Ok(())
}
