//! Detection of duplicate herbarium specimens in Darwin Core occurrence
//! data, with assessment of identification agreement, annotation
//! propagation and an institution co-occurrence graph.
//!
//! Stages, in pipeline order: [`ingest`], [`collector`], [`dedup`],
//! [`assess`], [`propagate`], [`graph`]. [`pipeline::run_pipeline`] chains
//! them; [`corpus`] generates synthetic input with known groups.

pub mod assess;
pub mod checkpoint;
pub mod collector;
pub mod corpus;
pub mod dedup;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod pipeline;
pub mod propagate;
pub mod record;

pub use assess::{AssessOptions, CombinationCounts, FlagCombination, GroupAssessment};
pub use collector::{ClusterParams, CollectorEntity, CollectorTable, LabelledRecord, ParsedName};
pub use dedup::{DuplicateGroup, GroupKey, Grouping};
pub use error::{Error, Result};
pub use graph::{GraphFormat, InstitutionGraph, LouvainOptions, Partition};
pub use ingest::{ColumnMapping, Field, RecordStream};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineRun, RunReport};
pub use propagate::{AnnotationClass, AnnotationFlags, GroupPropagation, PropagationSummary, TypeVocabulary};
pub use record::{CollectorId, GroupId, SpecimenRecord};
