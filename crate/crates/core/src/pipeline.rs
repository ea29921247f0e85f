// SPDX-License-Identifier: Apache-2.0
//! End-to-end stages and the JSON documents exchanged between them.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::classify::{classify, RegisterLabel, DEFAULT_T1, DEFAULT_T2};
use crate::gate::{train, Corpus, GateModel, Subgraph, TrainConfig, TrainOutcome};
use crate::graph::{build_graph, extract_all, CircuitGraph, PathStructure, DEFAULT_WALK_LENGTH};
use crate::netlist::{CellKind, Netlist};
use crate::{Error, Result, Scalar};

pub const MAPPED_SCHEMA: &str = "fsmreg.mapped-netlist/1";
pub const PATHS_SCHEMA: &str = "fsmreg.paths/1";
pub const LABELS_SCHEMA: &str = "fsmreg.labels/1";
pub const METRICS_SCHEMA: &str = "fsmreg.metrics/1";

/// Every versioned document schema, as printed by `--version`.
pub const SCHEMAS: [&str; 4] = [MAPPED_SCHEMA, PATHS_SCHEMA, LABELS_SCHEMA, METRICS_SCHEMA];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub tech_library: Option<PathBuf>,
    pub walk_length: usize,
    pub t1: f64,
    pub t2: usize,
    /// Seeds both parameter initialization and SRN selection.
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub train: TrainConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            tech_library: None,
            walk_length: DEFAULT_WALK_LENGTH,
            t1: DEFAULT_T1,
            t2: DEFAULT_T2,
            seed: 0,
            out: None,
            train: TrainConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walk_length == 0 {
            return Err(Error::InvalidArgument("walk_length must be at least 1".into()));
        }
        if !(self.t1 > 0.0 && self.t1.is_finite()) {
            return Err(Error::InvalidArgument(format!("t1 must be positive, got {}", self.t1)));
        }
        self.train_config().validate()
    }

    /// Training settings with the pipeline seed applied.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }
}

fn check_schema(expected: &str, found: &str) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Schema {
            expected: expected.to_string(),
            found: found.to_string(),
        })
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str, context: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::json(context, e))
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

/// Reads only the `schema` field so version errors win over shape errors.
fn peek_schema(text: &str, context: &str) -> Result<String> {
    #[derive(Deserialize)]
    struct Head {
        schema: Option<String>,
    }
    let head: Head = parse_json(text, context)?;
    Ok(head.schema.unwrap_or_default())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappedDoc {
    pub schema: String,
    pub netlist: Netlist,
}

impl MappedDoc {
    pub fn new(netlist: Netlist) -> Self {
        MappedDoc {
            schema: MAPPED_SCHEMA.to_string(),
            netlist,
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        check_schema(MAPPED_SCHEMA, &peek_schema(text, "mapped netlist")?)?;
        let doc: MappedDoc = parse_json(text, "mapped netlist")?;
        doc.netlist.validate()?;
        Ok(doc)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: usize,
    pub name: String,
    pub kind: CellKind,
    pub feature: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterPathDoc {
    pub name: String,
    pub root: usize,
    pub levels: Vec<Vec<usize>>,
    pub terminated_early: bool,
}

/// Graph dump plus one path structure per register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsDoc {
    pub schema: String,
    pub design: String,
    pub walk_length: usize,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<[usize; 2]>,
    pub registers: Vec<RegisterPathDoc>,
}

impl PathsDoc {
    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        check_schema(PATHS_SCHEMA, &peek_schema(text, "path structures")?)?;
        parse_json(text, "path structures")
    }
}

/// A design reduced to its graph and register path structures.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedDesign {
    pub name: String,
    pub graph: CircuitGraph,
    pub walk_length: usize,
    pub structures: BTreeMap<usize, PathStructure>,
}

impl PreparedDesign {
    pub fn from_netlist(netlist: &Netlist, walk_length: usize) -> Result<Self> {
        let graph = build_graph(netlist);
        let structures = extract_all(&graph, walk_length)?;
        Ok(PreparedDesign {
            name: netlist.name.clone(),
            graph,
            walk_length,
            structures,
        })
    }

    pub fn register_name(&self, id: usize) -> &str {
        self.graph.name(id)
    }

    pub fn to_doc(&self) -> PathsDoc {
        let nodes = (0..self.graph.node_count())
            .map(|id| NodeDoc {
                id,
                name: self.graph.name(id).to_string(),
                kind: self.graph.kind(id),
                feature: self.graph.node_feature::<f64>(id).expect("node exists").to_vec(),
            })
            .collect();
        let registers = self
            .structures
            .values()
            .map(|ps| RegisterPathDoc {
                name: self.graph.name(ps.root).to_string(),
                root: ps.root,
                levels: ps.levels.clone(),
                terminated_early: ps.terminated_early,
            })
            .collect();
        PathsDoc {
            schema: PATHS_SCHEMA.to_string(),
            design: self.name.clone(),
            walk_length: self.walk_length,
            nodes,
            edges: self.graph.edges().map(|(s, d)| [s, d]).collect(),
            registers,
        }
    }

    /// Rebuilds the design and checks the document against itself.
    pub fn from_doc(doc: &PathsDoc) -> Result<Self> {
        check_schema(PATHS_SCHEMA, &doc.schema)?;
        for (i, n) in doc.nodes.iter().enumerate() {
            if n.id != i {
                return Err(Error::InvalidArgument(format!("node {i} is listed with id {}", n.id)));
            }
        }
        let kinds = doc.nodes.iter().map(|n| n.kind).collect();
        let edges: Vec<(usize, usize)> = doc.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = CircuitGraph::from_edges(kinds, &edges)?
            .with_names(doc.nodes.iter().map(|n| n.name.clone()).collect())?;
        for n in &doc.nodes {
            let want = graph.node_feature::<f64>(n.id)?.to_vec();
            if n.feature != want {
                return Err(Error::InvalidArgument(format!(
                    "feature of node {} does not match the graph",
                    n.id
                )));
            }
        }
        let mut structures = BTreeMap::new();
        for r in &doc.registers {
            if !graph.contains(r.root) {
                return Err(Error::UnknownNode(r.root));
            }
            if !graph.is_register(r.root) {
                return Err(Error::NotARegister(r.root));
            }
            if r.levels.first().map(|l| l.as_slice()) != Some(&[r.root][..]) {
                return Err(Error::InvalidArgument(format!("structure of {} must start at its root", r.name)));
            }
            let mut seen = HashSet::new();
            for &id in r.levels.iter().flatten() {
                if !graph.contains(id) {
                    return Err(Error::UnknownNode(id));
                }
                if !seen.insert(id) {
                    return Err(Error::InvalidArgument(format!("node {id} repeated in structure of {}", r.name)));
                }
            }
            let ps = PathStructure {
                root: r.root,
                levels: r.levels.clone(),
                terminated_early: r.terminated_early,
            };
            if structures.insert(r.root, ps).is_some() {
                return Err(Error::InvalidArgument(format!("register {} listed twice", r.name)));
            }
        }
        Ok(PreparedDesign {
            name: doc.design.clone(),
            graph,
            walk_length: doc.walk_length,
            structures,
        })
    }

    /// Model inputs keyed by register id.
    pub fn subgraphs<T: Scalar>(&self) -> Result<Vec<(usize, Subgraph<T>)>> {
        self.structures
            .iter()
            .map(|(&id, ps)| Subgraph::from_path_structure(&self.graph, ps).map(|sg| (id, sg)))
            .collect()
    }
}

/// Corpus built from several designs, with sample provenance.
#[derive(Debug, Clone)]
pub struct TrainingCorpus<T> {
    pub corpus: Corpus<T>,
    /// `(design index, register id)` of the first structure behind each sample.
    pub origins: Vec<(usize, usize)>,
    /// Every `(design index, register id)` that contributed.
    pub members: Vec<(usize, usize)>,
}

pub fn build_corpus<T: Scalar>(designs: &[(usize, &PreparedDesign)], dedup: bool) -> Result<TrainingCorpus<T>> {
    let mut subgraphs = Vec::new();
    let mut members = Vec::new();
    let mut subgraphs_keys = Vec::new();
    for &(di, d) in designs {
        for (id, sg) in d.subgraphs::<T>()? {
            members.push((di, id));
            subgraphs_keys.push(crate::gate::structure_key(&sg));
            subgraphs.push(sg);
        }
    }
    let corpus = Corpus::new(subgraphs, dedup);
    let mut first: HashMap<u64, usize> = HashMap::new();
    let mut origins = Vec::with_capacity(corpus.len());
    let mut next = 0;
    for (m, sg) in members.iter().zip(subgraphs_keys) {
        if !dedup || !first.contains_key(&sg) {
            first.insert(sg, next);
            next += 1;
            origins.push(*m);
        }
    }
    Ok(TrainingCorpus {
        corpus,
        origins,
        members,
    })
}

pub fn train_designs<T: Scalar>(designs: &[&PreparedDesign], config: &TrainConfig) -> Result<TrainOutcome<T>> {
    let indexed: Vec<(usize, &PreparedDesign)> = designs.iter().copied().enumerate().collect();
    let tc = build_corpus::<T>(&indexed, config.dedup)?;
    train(&tc.corpus.samples, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelEntry {
    pub name: String,
    pub label: RegisterLabel,
    pub group: usize,
    pub group_size: usize,
    pub embedding: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LabelsDoc {
    pub schema: String,
    pub design: String,
    pub seed: u64,
    pub t1: f64,
    pub t2: usize,
    pub registers: Vec<LabelEntry>,
}

impl LabelsDoc {
    pub fn to_json(&self) -> String {
        to_json(self)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        check_schema(LABELS_SCHEMA, &peek_schema(text, "labels")?)?;
        parse_json(text, "labels")
    }

    pub fn by_name(&self) -> BTreeMap<&str, RegisterLabel> {
        self.registers.iter().map(|r| (r.name.as_str(), r.label)).collect()
    }
}

/// Embeds every register of `design` and labels it.
pub fn label_design<T: Scalar>(
    model: &GateModel<T>,
    design: &PreparedDesign,
    t1: f64,
    t2: usize,
    seed: u64,
) -> Result<LabelsDoc> {
    let mut embeddings = Vec::with_capacity(design.structures.len());
    for (id, sg) in design.subgraphs::<T>()? {
        let e = model.embed_register(&sg)?;
        if !e.value.is_finite() {
            return Err(Error::NonFiniteGradient(format!(
                "embedding of {} is not finite",
                design.register_name(id)
            )));
        }
        embeddings.push((id, e));
    }
    let classes = classify(&embeddings, t1, t2, seed)?;
    let value: BTreeMap<usize, f64> = embeddings.iter().map(|(id, e)| (*id, e.value.to_f64_lossy())).collect();
    let mut registers: Vec<LabelEntry> = classes
        .labels
        .iter()
        .map(|(&id, a)| LabelEntry {
            name: design.register_name(id).to_string(),
            label: a.label,
            group: a.group,
            group_size: a.group_size,
            embedding: value[&id],
        })
        .collect();
    registers.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(LabelsDoc {
        schema: LABELS_SCHEMA.to_string(),
        design: design.name.clone(),
        seed,
        t1,
        t2,
        registers,
    })
}
