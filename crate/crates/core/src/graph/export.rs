//! GraphML, Graphviz DOT and CSV edge-list serialisation of
//! [`InstitutionGraph`]. Every format reads back into an identical graph;
//! the CSV edge list carries nodes and communities in a companion
//! `<stem>.nodes.csv` file.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use quick_xml::escape::escape;
use quick_xml::events::Event;
use quick_xml::Reader;

use super::InstitutionGraph;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GraphFormat {
    GraphMl,
    Dot,
    EdgeListCsv,
}

impl GraphFormat {
    pub const ALL: [GraphFormat; 3] = [GraphFormat::GraphMl, GraphFormat::Dot, GraphFormat::EdgeListCsv];

    pub fn extension(self) -> &'static str {
        match self {
            GraphFormat::GraphMl => "graphml",
            GraphFormat::Dot => "dot",
            GraphFormat::EdgeListCsv => "csv",
        }
    }
}

impl FromStr for GraphFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "graphml" => Ok(GraphFormat::GraphMl),
            "dot" => Ok(GraphFormat::Dot),
            "edgelist-csv" | "csv" => Ok(GraphFormat::EdgeListCsv),
            other => Err(Error::InvalidParameter(format!("unknown graph format `{other}`"))),
        }
    }
}

fn node_rows(g: &InstitutionGraph) -> impl Iterator<Item = (&str, usize, u64, Option<usize>)> + '_ {
    g.nodes().iter().enumerate().map(move |(i, n)| {
        let degree = g.adjacency(i).len();
        let strength = g.adjacency(i).iter().map(|&(_, w)| w).sum();
        (n.as_str(), degree, strength, g.communities().map(|c| c[i]))
    })
}

pub fn write_graphml<W: Write>(g: &InstitutionGraph, mut out: W) -> Result<()> {
    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    s.push_str("<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n");
    s.push_str("  <key id=\"degree\" for=\"node\" attr.name=\"degree\" attr.type=\"int\"/>\n");
    s.push_str("  <key id=\"strength\" for=\"node\" attr.name=\"strength\" attr.type=\"long\"/>\n");
    s.push_str("  <key id=\"community\" for=\"node\" attr.name=\"community\" attr.type=\"int\"/>\n");
    s.push_str("  <key id=\"weight\" for=\"edge\" attr.name=\"weight\" attr.type=\"long\"/>\n");
    s.push_str("  <graph id=\"institutions\" edgedefault=\"undirected\">\n");
    for (name, degree, strength, community) in node_rows(g) {
        let _ = write!(
            s,
            "    <node id=\"{}\"><data key=\"degree\">{degree}</data><data key=\"strength\">{strength}</data>",
            escape(name)
        );
        if let Some(c) = community {
            let _ = write!(s, "<data key=\"community\">{c}</data>");
        }
        s.push_str("</node>\n");
    }
    for (a, b, w) in g.edges() {
        let _ = writeln!(
            s,
            "    <edge source=\"{}\" target=\"{}\"><data key=\"weight\">{w}</data></edge>",
            escape(a),
            escape(b)
        );
    }
    s.push_str("  </graph>\n</graphml>\n");
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Partially read element content.
#[derive(Default)]
struct PendingData {
    key: String,
    text: String,
}

pub fn read_graphml<R: Read>(mut input: R) -> Result<InstitutionGraph> {
    let mut xml = String::new();
    input.read_to_string(&mut xml)?;
    let bad = |m: String| Error::format("graphml", m);
    let mut reader = Reader::from_str(&xml);
    reader.config_mut().trim_text(true);

    let mut nodes: Vec<(String, Option<usize>)> = Vec::new();
    let mut edges: Vec<(String, String, u64)> = Vec::new();
    let mut in_node = false;
    let mut in_edge = false;
    let mut data: Option<PendingData> = None;
    let attr = |e: &quick_xml::events::BytesStart<'_>, name: &str| -> Option<String> {
        e.attributes()
            .flatten()
            .find(|a| a.key.local_name().as_ref() == name)
            .and_then(|a| a.normalized_value(quick_xml::XmlVersion::Implicit1_0).ok().map(|v| v.into_owned()))
    };
    loop {
        match reader.read_event().map_err(|e| bad(e.to_string()))? {
            Event::Start(e) | Event::Empty(e) => match e.local_name().as_ref() {
                "node" => {
                    let id = attr(&e, "id").ok_or_else(|| bad("node without id".into()))?;
                    nodes.push((id, None));
                    in_node = true;
                }
                "edge" => {
                    let s = attr(&e, "source").ok_or_else(|| bad("edge without source".into()))?;
                    let t = attr(&e, "target").ok_or_else(|| bad("edge without target".into()))?;
                    edges.push((s, t, 1));
                    in_edge = true;
                }
                "data" => {
                    data = Some(PendingData { key: attr(&e, "key").unwrap_or_default(), text: String::new() });
                }
                _ => {}
            },
            Event::Text(t) => {
                if let Some(d) = data.as_mut() {
                    d.text.push_str(&t.xml10_content());
                }
            }
            Event::End(e) => match e.local_name().as_ref() {
                "node" => in_node = false,
                "edge" => in_edge = false,
                "data" => {
                    let Some(d) = data.take() else { continue };
                    let value = d.text.trim();
                    if in_node && d.key == "community" {
                        let c = value.parse().map_err(|_| bad(format!("bad community `{value}`")))?;
                        if let Some(last) = nodes.last_mut() {
                            last.1 = Some(c);
                        }
                    } else if in_edge && d.key == "weight" {
                        let w = value.parse().map_err(|_| bad(format!("bad weight `{value}`")))?;
                        if let Some(last) = edges.last_mut() {
                            last.2 = w;
                        }
                    }
                }
                _ => {}
            },
            Event::Eof => break,
            _ => {}
        }
    }
    assemble(nodes, edges)
}

fn assemble(nodes: Vec<(String, Option<usize>)>, edges: Vec<(String, String, u64)>) -> Result<InstitutionGraph> {
    let mut g = InstitutionGraph::from_edges(
        nodes.iter().map(|(n, _)| n.as_str()),
        edges.iter().map(|(a, b, w)| (a.as_str(), b.as_str(), *w)),
    )?;
    if !nodes.is_empty() && nodes.len() == g.node_count() && nodes.iter().all(|(_, c)| c.is_some()) {
        let mut labels = vec![0; g.node_count()];
        for (n, c) in &nodes {
            labels[g.node_index(n).expect("node inserted above")] = c.expect("checked above");
        }
        g.set_communities(labels)?;
    }
    Ok(g)
}

fn dot_quote(s: &str) -> String {
    let mut q = String::with_capacity(s.len() + 2);
    q.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            q.push('\\');
        }
        q.push(c);
    }
    q.push('"');
    q
}

pub fn write_dot<W: Write>(g: &InstitutionGraph, mut out: W) -> Result<()> {
    let mut s = String::from("graph institutions {\n");
    for (name, degree, strength, community) in node_rows(g) {
        let _ = write!(s, "  {} [degree={degree}, strength={strength}", dot_quote(name));
        if let Some(c) = community {
            let _ = write!(s, ", community={c}");
        }
        s.push_str("];\n");
    }
    for (a, b, w) in g.edges() {
        let _ = writeln!(s, "  {} -- {} [weight={w}];", dot_quote(a), dot_quote(b));
    }
    s.push_str("}\n");
    out.write_all(s.as_bytes())?;
    Ok(())
}

/// Reads a quoted DOT identifier at the start of `s`; returns it and the rest.
fn take_quoted(s: &str) -> Option<(String, &str)> {
    let s = s.trim_start();
    let mut chars = s.char_indices();
    if chars.next()?.1 != '"' {
        return None;
    }
    let mut out = String::new();
    let mut escaped = false;
    for (i, c) in chars {
        match (escaped, c) {
            (false, '\\') => escaped = true,
            (false, '"') => return Some((out, &s[i + 1..])),
            _ => {
                out.push(c);
                escaped = false;
            }
        }
    }
    None
}

fn dot_attrs(s: &str) -> Vec<(String, String)> {
    let s = s.trim().trim_end_matches(';').trim();
    let Some(inner) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) else {
        return Vec::new();
    };
    inner
        .split(',')
        .filter_map(|kv| kv.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().trim_matches('"').to_string()))
        .collect()
}

/// Reads the subset of DOT produced by [`write_dot`].
pub fn read_dot<R: Read>(input: R) -> Result<InstitutionGraph> {
    let bad = |m: String| Error::format("dot", m);
    let mut nodes = Vec::new();
    let mut edges = Vec::new();
    for line in BufReader::new(input).lines() {
        let line = line?;
        let t = line.trim();
        if !t.starts_with('"') {
            continue;
        }
        let (a, rest) = take_quoted(t).ok_or_else(|| bad(format!("unterminated id in `{t}`")))?;
        let rest = rest.trim_start();
        if let Some(rest) = rest.strip_prefix("--") {
            let (b, rest) = take_quoted(rest).ok_or_else(|| bad(format!("bad edge `{t}`")))?;
            let mut w = 1;
            for (k, v) in dot_attrs(rest) {
                if k == "weight" {
                    w = v.parse().map_err(|_| bad(format!("bad weight `{v}`")))?;
                }
            }
            edges.push((a, b, w));
        } else {
            let mut community = None;
            for (k, v) in dot_attrs(rest) {
                if k == "community" {
                    community = Some(v.parse().map_err(|_| bad(format!("bad community `{v}`")))?);
                }
            }
            nodes.push((a, community));
        }
    }
    assemble(nodes, edges)
}

pub fn write_edgelist_csv<W: Write>(g: &InstitutionGraph, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["source", "target", "weight"])?;
    for (a, b, weight) in g.edges() {
        w.write_record([a, b, &weight.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_node_csv<W: Write>(g: &InstitutionGraph, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["id", "degree", "strength", "community"])?;
    for (name, degree, strength, community) in node_rows(g) {
        w.write_record([
            name.to_string(),
            degree.to_string(),
            strength.to_string(),
            community.map(|c| c.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads an edge list, plus the optional node table for isolated nodes and
/// community labels.
pub fn read_edgelist_csv<R: Read, N: Read>(edges: R, nodes: Option<N>) -> Result<InstitutionGraph> {
    let bad = |m: String| Error::format("edgelist-csv", m);
    let mut r = csv::Reader::from_reader(edges);
    if r.headers()?.iter().collect::<Vec<_>>() != ["source", "target", "weight"] {
        return Err(bad("expected header source,target,weight".into()));
    }
    let mut edge_rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let w = rec[2].parse().map_err(|_| bad(format!("bad weight `{}`", &rec[2])))?;
        edge_rows.push((rec[0].to_string(), rec[1].to_string(), w));
    }
    let mut node_rows = Vec::new();
    if let Some(n) = nodes {
        let mut r = csv::Reader::from_reader(n);
        for rec in r.records() {
            let rec = rec?;
            let community = match rec.get(3).unwrap_or("") {
                "" => None,
                c => Some(c.parse().map_err(|_| bad(format!("bad community `{c}`")))?),
            };
            node_rows.push((rec[0].to_string(), community));
        }
    }
    assemble(node_rows, edge_rows)
}

/// `graph.csv` -> `graph.nodes.csv`
pub fn companion_nodes_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}.nodes.csv"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Writes `g` to `path`. The CSV format also writes the companion node table.
pub fn export_graph(g: &InstitutionGraph, format: GraphFormat, path: &Path) -> Result<()> {
    let flush = |mut w: BufWriter<File>, p: &Path| w.flush().map_err(|e| Error::io(p, e));
    match format {
        GraphFormat::GraphMl => {
            let mut w = create(path)?;
            write_graphml(g, &mut w)?;
            flush(w, path)
        }
        GraphFormat::Dot => {
            let mut w = create(path)?;
            write_dot(g, &mut w)?;
            flush(w, path)
        }
        GraphFormat::EdgeListCsv => {
            let mut w = create(path)?;
            write_edgelist_csv(g, &mut w)?;
            flush(w, path)?;
            let nodes = companion_nodes_path(path);
            let mut w = create(&nodes)?;
            write_node_csv(g, &mut w)?;
            flush(w, &nodes)
        }
    }
}

pub fn import_graph(format: GraphFormat, path: &Path) -> Result<InstitutionGraph> {
    match format {
        GraphFormat::GraphMl => read_graphml(BufReader::new(open(path)?)),
        GraphFormat::Dot => read_dot(open(path)?),
        GraphFormat::EdgeListCsv => {
            let nodes = companion_nodes_path(path);
            let nodes = nodes.exists().then(|| open(&nodes)).transpose()?;
            read_edgelist_csv(BufReader::new(open(path)?), nodes.map(BufReader::new))
        }
    }
}
