//! Inputs for the criterion benchmarks in `benches/`.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dupset::corpus::{generate_corpus, CorpusParams};
use dupset::{run_pipeline, InstitutionGraph, PipelineConfig, PipelineRun};

/// Writes a synthetic corpus of `collectors` x 20 events under `dir`.
pub fn corpus_file(dir: &Path, collectors: usize, seed: u64) -> PathBuf {
    let params = CorpusParams { collectors, noise_rate: 0.05, discord_rate: 0.03, seed, ..CorpusParams::default() };
    let corpus = generate_corpus(&params).expect("corpus parameters are valid");
    let path = dir.join(format!("corpus-{collectors}-{seed}.tsv"));
    let file = std::fs::File::create(&path).expect("create corpus file");
    corpus.write(std::io::BufWriter::new(file)).expect("write corpus");
    path
}

/// Full in-memory run over a fresh corpus, for stage inputs.
pub fn pipeline_run(collectors: usize, seed: u64) -> PipelineRun {
    let dir = tempfile::tempdir().expect("tempdir");
    let input = corpus_file(dir.path(), collectors, seed);
    run_pipeline(&PipelineConfig { inputs: vec![input], ..PipelineConfig::default() }).expect("pipeline")
}

/// Random weighted graph of planted communities: dense inside blocks of
/// `block` nodes, sparse between them.
pub fn planted_graph(nodes: usize, block: usize, seed: u64) -> InstitutionGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..nodes).map(|i| format!("i{i:05}")).collect();
    let mut edges = Vec::new();
    for a in 0..nodes {
        for b in a + 1..nodes {
            let p = if a / block == b / block { 0.3 } else { 2.0 / nodes as f64 };
            if rng.random_bool(p) {
                edges.push((a, b, rng.random_range(1..=5u64)));
            }
        }
    }
    InstitutionGraph::from_edges(
        names.iter().map(String::as_str),
        edges.iter().map(|&(a, b, w)| (names[a].as_str(), names[b].as_str(), w)),
    )
    .expect("edges are valid")
}
