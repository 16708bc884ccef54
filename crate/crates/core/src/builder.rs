//! Heterogeneous hypergraph construction from a labeled training table.
//!
//! Every training instance contributes its label combination
//! `{user} ∪ {positive placement} ∪ {positive activities}` as a hyperedge.
//! Identical combinations merge into one hyperedge whose weight is the number
//! of contributing instances and whose attribute vector is their mean
//! feature vector. Node embeddings start at the mean feature vector of all
//! instances touching the node.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{InstanceTable, LabeledInstance, Schema};
use crate::error::{Error, Result};
use crate::hypergraph::{Hypergraph, NodeType};

/// Row ranges of each node type in the `[users | placements | activities]` order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeSlices {
    pub user: Range<usize>,
    pub pp: Range<usize>,
    pub act: Range<usize>,
}

impl NodeSlices {
    pub fn total(&self) -> usize {
        self.act.end
    }

    pub fn ranges(&self) -> [Range<usize>; 3] {
        [self.user.clone(), self.pp.clone(), self.act.clone()]
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeInfo {
    pub kind: NodeType,
    pub name: String,
    /// Class index in schema order for label nodes.
    pub class: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildOptions {
    /// Combinations seen fewer times than this are not turned into hyperedges.
    pub min_combo_count: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions { min_combo_count: 1 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub instances_used: usize,
    pub instances_skipped: usize,
    /// Schema labels without a node; the model can never predict them.
    pub absent_labels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GraphBundle {
    pub graph: Hypergraph,
    pub nodes: Vec<NodeInfo>,
    pub slices: NodeSlices,
    /// `|V| × d_x` initial node features.
    pub node_init: Vec<Vec<f64>>,
    /// Sorted node-id set → hyperedge id.
    pub combo_index: BTreeMap<Vec<usize>, usize>,
    /// Schema class names in class order (placements, then activities).
    pub classes: Vec<String>,
    pub num_pp_classes: usize,
}

impl GraphBundle {
    pub fn feature_dim(&self) -> usize {
        self.node_init.first().map_or(0, Vec::len)
    }

    /// Schema class of each placement node, in node order.
    pub fn pp_classes(&self) -> Vec<usize> {
        self.slices.pp.clone().filter_map(|v| self.nodes[v].class).collect()
    }

    pub fn act_classes(&self) -> Vec<usize> {
        self.slices.act.clone().filter_map(|v| self.nodes[v].class).collect()
    }

    pub fn node_id(&self, kind: NodeType, name: &str) -> Option<usize> {
        let range = match kind {
            NodeType::User => &self.slices.user,
            NodeType::PhonePlacement => &self.slices.pp,
            NodeType::Activity => &self.slices.act,
        };
        range.clone().find(|&v| self.nodes[v].name == name)
    }
}

/// The node-id set an instance would connect to in `bundle`. Labels or users
/// without a node are left out; an instance with no positive label yields the
/// empty set.
pub fn combo_key(inst: &LabeledInstance, bundle: &GraphBundle) -> BTreeSet<usize> {
    let positives = positive_classes(inst);
    if positives.is_empty() {
        return BTreeSet::new();
    }
    let mut key = BTreeSet::new();
    key.extend(bundle.node_id(NodeType::User, &inst.user_id));
    for c in positives {
        key.extend(
            bundle
                .slices
                .pp
                .clone()
                .chain(bundle.slices.act.clone())
                .find(|&v| bundle.nodes[v].class == Some(c)),
        );
    }
    key
}

fn positive_classes(inst: &LabeledInstance) -> Vec<usize> {
    inst.labels()
        .enumerate()
        .filter(|(_, l)| l.is_positive())
        .map(|(c, _)| c)
        .collect()
}

fn cmp_features(a: &[f64], b: &[f64]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Mean of the given rows, summed in a canonical order so the result does
/// not depend on the order rows were encountered.
fn canonical_mean(mut rows: Vec<&[f64]>, dim: usize) -> Vec<f64> {
    rows.sort_by(|a, b| cmp_features(a, b));
    let mut acc = vec![0.0; dim];
    for r in &rows {
        acc.iter_mut().zip(r.iter()).for_each(|(a, x)| *a += x);
    }
    let n = rows.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    acc
}

pub fn build_graph(train: &InstanceTable, opts: BuildOptions) -> Result<(GraphBundle, BuildReport)> {
    let schema = &train.schema;
    let dim = schema.features.len();
    let num_pp = schema.pp.len();

    // (user, positive classes) → contributing rows, in sorted key order.
    let mut groups: BTreeMap<(String, Vec<usize>), Vec<usize>> = BTreeMap::new();
    let mut report = BuildReport::default();
    for (i, row) in train.rows.iter().enumerate() {
        let pos = positive_classes(row);
        if pos.is_empty() {
            report.instances_skipped += 1;
            continue;
        }
        groups.entry((row.user_id.clone(), pos)).or_default().push(i);
    }
    groups.retain(|_, rows| rows.len() >= opts.min_combo_count.max(1));
    if groups.is_empty() {
        return Err(Error::EmptyGraph);
    }

    let users: BTreeSet<&str> = groups.keys().map(|(u, _)| u.as_str()).collect();
    let used: BTreeSet<usize> = groups.keys().flat_map(|(_, c)| c.iter().copied()).collect();
    let by_name = |names: &[String], offset: usize| {
        let mut v: Vec<(String, usize)> = used
            .iter()
            .filter(|&&c| c >= offset && c < offset + names.len())
            .map(|&c| (names[c - offset].clone(), c))
            .collect();
        v.sort();
        v
    };
    let pp_nodes = by_name(&schema.pp, 0);
    let act_nodes = by_name(&schema.act, num_pp);

    let mut nodes: Vec<NodeInfo> = users
        .iter()
        .map(|u| NodeInfo {
            kind: NodeType::User,
            name: u.to_string(),
            class: None,
        })
        .collect();
    nodes.extend(pp_nodes.iter().map(|(n, c)| NodeInfo {
        kind: NodeType::PhonePlacement,
        name: n.clone(),
        class: Some(*c),
    }));
    nodes.extend(act_nodes.iter().map(|(n, c)| NodeInfo {
        kind: NodeType::Activity,
        name: n.clone(),
        class: Some(*c),
    }));
    let slices = NodeSlices {
        user: 0..users.len(),
        pp: users.len()..users.len() + pp_nodes.len(),
        act: users.len() + pp_nodes.len()..nodes.len(),
    };
    let user_id: BTreeMap<&str, usize> = users.iter().enumerate().map(|(i, u)| (*u, i)).collect();
    let mut class_node = vec![None; schema.num_classes()];
    for v in slices.pp.start..slices.act.end {
        class_node[nodes[v].class.unwrap()] = Some(v);
    }

    let mut edges: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for ((user, classes), rows) in &groups {
        let mut ids = vec![user_id[user.as_str()]];
        ids.extend(classes.iter().map(|&c| class_node[c].unwrap()));
        ids.sort_unstable();
        edges.insert(ids, rows.clone());
    }

    let mut node_rows: Vec<Vec<&[f64]>> = vec![Vec::new(); nodes.len()];
    let mut edge_list = Vec::with_capacity(edges.len());
    let mut weights = Vec::with_capacity(edges.len());
    let mut attrs = Vec::with_capacity(edges.len());
    let mut combo_index = BTreeMap::new();
    for (e, (ids, rows)) in edges.into_iter().enumerate() {
        let feats: Vec<&[f64]> = rows.iter().map(|&i| train.rows[i].features.as_slice()).collect();
        for &v in &ids {
            node_rows[v].extend(feats.iter().copied());
        }
        weights.push(rows.len() as f64);
        attrs.push(canonical_mean(feats, dim));
        report.instances_used += rows.len();
        combo_index.insert(ids.clone(), e);
        edge_list.push(ids);
    }
    report.instances_skipped = train.len() - report.instances_used;
    let node_init = node_rows.into_iter().map(|r| canonical_mean(r, dim)).collect();

    let classes = schema.class_names();
    report.absent_labels = class_node
        .iter()
        .zip(&classes)
        .filter(|(n, _)| n.is_none())
        .map(|(_, c)| c.clone())
        .collect();
    if !report.absent_labels.is_empty() {
        log::warn!(
            "labels never positive in training data get no node and cannot be predicted: {}",
            report.absent_labels.join(", ")
        );
    }

    let graph = Hypergraph::with_names(
        nodes.iter().map(|n| n.kind).collect(),
        nodes.iter().map(|n| Some(n.name.clone())).collect(),
        edge_list,
        weights,
        Some(attrs),
    )?;
    Ok((
        GraphBundle {
            graph,
            nodes,
            slices,
            node_init,
            combo_index,
            classes,
            num_pp_classes: num_pp,
        },
        report,
    ))
}

#[derive(Serialize, Deserialize)]
struct BundleMeta {
    version: u32,
    classes: Vec<String>,
    num_pp_classes: usize,
    slices: NodeSlices,
    feature_dim: usize,
}

pub const HYPERGRAPH_FILE: &str = "hypergraph.txt";
pub const NODES_FILE: &str = "nodes.tsv";
pub const NODE_INIT_FILE: &str = "node_init.txt";
pub const BUNDLE_META_FILE: &str = "bundle.json";

impl GraphBundle {
    /// Node manifest: `id, type, name, class` per line, tab-separated.
    pub fn manifest_text(&self) -> String {
        let mut s = String::from("id\ttype\tname\tclass\n");
        for (i, n) in self.nodes.iter().enumerate() {
            let class = n.class.map(|c| self.classes[c].as_str()).unwrap_or("");
            writeln!(s, "{i}\t{}\t{}\t{class}", n.kind.tag(), n.name).unwrap();
        }
        s
    }

    fn node_init_text(&self) -> String {
        let mut s = format!("{} {}\n", self.node_init.len(), self.feature_dim());
        for row in &self.node_init {
            let vals: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            s.push_str(&vals.join(" "));
            s.push('\n');
        }
        s
    }

    /// Write the bundle as four files inside `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.graph.save(&dir.join(HYPERGRAPH_FILE))?;
        let write = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(p, e))
        };
        write(NODES_FILE, self.manifest_text())?;
        write(NODE_INIT_FILE, self.node_init_text())?;
        let meta = BundleMeta {
            version: 1,
            classes: self.classes.clone(),
            num_pp_classes: self.num_pp_classes,
            slices: self.slices.clone(),
            feature_dim: self.feature_dim(),
        };
        write(BUNDLE_META_FILE, serde_json::to_string_pretty(&meta).unwrap() + "\n")
    }

    pub fn load(dir: &Path) -> Result<GraphBundle> {
        let read = |name: &str| {
            let p = dir.join(name);
            std::fs::read_to_string(&p).map_err(|e| Error::io(p, e))
        };
        let graph = Hypergraph::load(&dir.join(HYPERGRAPH_FILE))?;
        let meta: BundleMeta = serde_json::from_str(&read(BUNDLE_META_FILE)?)
            .map_err(|e| Error::InvalidConfig(format!("{BUNDLE_META_FILE}: {e}")))?;
        let mut nodes = Vec::with_capacity(graph.num_nodes());
        for (ln, line) in read(NODES_FILE)?.lines().enumerate().skip(1) {
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(Error::Parse {
                    line: ln + 1,
                    column: 1,
                    reason: "expected 4 tab-separated fields".into(),
                });
            }
            let class = if f[3].is_empty() {
                None
            } else {
                Some(meta.classes.iter().position(|c| c == f[3]).ok_or_else(|| {
                    Error::SchemaMismatch(format!("unknown class '{}' in {NODES_FILE}", f[3]))
                })?)
            };
            nodes.push(NodeInfo {
                kind: f[1].parse()?,
                name: f[2].to_string(),
                class,
            });
        }
        let init_text = read(NODE_INIT_FILE)?;
        let mut lines = init_text.lines();
        let _dims = lines.next();
        let node_init = lines
            .enumerate()
            .map(|(ln, l)| {
                l.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| Error::Parse {
                            line: ln + 2,
                            column: 1,
                            reason: format!("cannot parse '{t}'"),
                        })
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        if nodes.len() != graph.num_nodes() || node_init.len() != graph.num_nodes() {
            return Err(Error::SchemaMismatch("bundle files disagree on node count".into()));
        }
        let combo_index = graph
            .edges()
            .iter()
            .enumerate()
            .map(|(e, ids)| (ids.clone(), e))
            .collect();
        Ok(GraphBundle {
            graph,
            nodes,
            slices: meta.slices,
            node_init,
            combo_index,
            classes: meta.classes,
            num_pp_classes: meta.num_pp_classes,
        })
    }
}

/// Schema check used when pairing a bundle with instance tables.
pub fn check_schema(bundle: &GraphBundle, schema: &Schema) -> Result<()> {
    if bundle.classes != schema.class_names() || bundle.feature_dim() != schema.features.len() {
        return Err(Error::SchemaMismatch(
            "graph bundle was built for a different table schema".into(),
        ));
    }
    Ok(())
}
