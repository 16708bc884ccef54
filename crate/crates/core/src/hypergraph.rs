//! Typed, weighted hypergraphs and the operators derived from them.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeType {
    User,
    PhonePlacement,
    Activity,
}

impl NodeType {
    pub fn tag(self) -> &'static str {
        match self {
            NodeType::User => "user",
            NodeType::PhonePlacement => "pp",
            NodeType::Activity => "act",
        }
    }
}

impl FromStr for NodeType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "user" => Ok(NodeType::User),
            "pp" => Ok(NodeType::PhonePlacement),
            "act" => Ok(NodeType::Activity),
            other => Err(Error::InvalidHypergraph(format!("unknown node type '{other}'"))),
        }
    }
}

/// An undirected hypergraph with typed nodes and weighted hyperedges.
///
/// Each hyperedge is stored as a sorted, duplicate-free list of at least two
/// node ids. Weights are strictly positive. Optional per-edge attribute
/// vectors all share one dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypergraph {
    node_types: Vec<NodeType>,
    node_names: Vec<Option<String>>,
    edges: Vec<Vec<usize>>,
    weights: Vec<f64>,
    attrs: Option<Vec<Vec<f64>>>,
}

impl Hypergraph {
    pub fn new(
        node_types: Vec<NodeType>,
        edges: Vec<Vec<usize>>,
        weights: Vec<f64>,
        attrs: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n = node_types.len();
        Self::with_names(node_types, vec![None; n], edges, weights, attrs)
    }

    pub fn with_names(
        node_types: Vec<NodeType>,
        node_names: Vec<Option<String>>,
        edges: Vec<Vec<usize>>,
        weights: Vec<f64>,
        attrs: Option<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        let n = node_types.len();
        if node_names.len() != n {
            return Err(Error::InvalidHypergraph(format!(
                "{} names for {n} nodes",
                node_names.len()
            )));
        }
        if weights.len() != edges.len() {
            return Err(Error::InvalidHypergraph(format!(
                "{} weights for {} hyperedges",
                weights.len(),
                edges.len()
            )));
        }
        let mut canonical = Vec::with_capacity(edges.len());
        for (e, mut nodes) in edges.into_iter().enumerate() {
            nodes.sort_unstable();
            if nodes.windows(2).any(|w| w[0] == w[1]) {
                return Err(Error::InvalidHypergraph(format!("hyperedge {e} repeats a node")));
            }
            if nodes.len() < 2 {
                return Err(Error::InvalidHypergraph(format!(
                    "hyperedge {e} has {} node(s); at least 2 required",
                    nodes.len()
                )));
            }
            if let Some(&v) = nodes.last().filter(|&&v| v >= n) {
                return Err(Error::InvalidHypergraph(format!(
                    "hyperedge {e} references node {v} but graph has {n} nodes"
                )));
            }
            canonical.push(nodes);
        }
        if let Some((e, w)) = weights
            .iter()
            .enumerate()
            .find(|(_, w)| !(w.is_finite() && **w > 0.0))
        {
            return Err(Error::InvalidHypergraph(format!("hyperedge {e} has weight {w}")));
        }
        if let Some(a) = &attrs {
            if a.len() != canonical.len() {
                return Err(Error::InvalidHypergraph(format!(
                    "{} attribute vectors for {} hyperedges",
                    a.len(),
                    canonical.len()
                )));
            }
            if let Some(first) = a.first() {
                if a.iter().any(|v| v.len() != first.len()) {
                    return Err(Error::InvalidHypergraph(
                        "attribute vectors differ in dimension".into(),
                    ));
                }
            }
        }
        Ok(Hypergraph {
            node_types,
            node_names,
            edges: canonical,
            weights,
            attrs,
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.node_types.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn node_types(&self) -> &[NodeType] {
        &self.node_types
    }

    pub fn node_names(&self) -> &[Option<String>] {
        &self.node_names
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn attrs(&self) -> Option<&[Vec<f64>]> {
        self.attrs.as_deref()
    }

    /// Same structure with every hyperedge weight multiplied by `factor`.
    pub fn scaled_weights(&self, factor: f64) -> Result<Hypergraph> {
        let mut g = self.clone();
        g.weights.iter_mut().for_each(|w| *w *= factor);
        Hypergraph::with_names(g.node_types, g.node_names, g.edges, g.weights, g.attrs)
    }

    /// `|V| × |E|` incidence matrix: entry `(v, e)` is 1 iff `v ∈ e`.
    pub fn incidence_matrix(&self) -> SparseMatrix {
        let triplets = self
            .edges
            .iter()
            .enumerate()
            .flat_map(|(e, nodes)| nodes.iter().map(move |&v| (v, e, 1.0)))
            .collect();
        SparseMatrix::from_triplets(self.num_nodes(), self.num_edges(), triplets)
            .expect("hyperedge node ids validated at construction")
    }

    /// Weighted node degrees: `d(v) = Σ_e w(e)·[v ∈ e]`.
    pub fn node_degrees(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.num_nodes()];
        for (nodes, &w) in self.edges.iter().zip(&self.weights) {
            for &v in nodes {
                d[v] += w;
            }
        }
        d
    }

    /// Hyperedge degrees: the cardinality of each hyperedge.
    pub fn edge_degrees(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.len() as f64).collect()
    }

    /// The `|V| × |V|` propagation operator `D_V⁻¹ H W D_E⁻¹ Hᵀ`.
    ///
    /// Entry `(u, v)` is `Σ_{e ∋ u, v} w(e) / (|e| · d(u))`, so every row sums to 1.
    pub fn conv_operator(&self) -> Result<SparseMatrix> {
        let dv = self.node_degrees();
        if let Some(v) = dv.iter().position(|&d| d <= 0.0) {
            return Err(Error::IsolatedNode(v));
        }
        let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (nodes, &w) in self.edges.iter().zip(&self.weights) {
            let scale = w / nodes.len() as f64;
            for &u in nodes {
                for &v in nodes {
                    *acc.entry((u, v)).or_insert(0.0) += scale / dv[u];
                }
            }
        }
        let triplets = acc.into_iter().map(|((u, v), x)| (u, v, x)).collect();
        SparseMatrix::from_triplets(self.num_nodes(), self.num_nodes(), triplets)
    }

    /// Replace every hyperedge by the pairwise edges among its nodes.
    ///
    /// Pairs inherit the source hyperedge weight; a pair produced by several
    /// hyperedges carries the sum of their weights. Attributes are dropped.
    /// Output edges are ordered by their node pair.
    pub fn clique_expand(&self) -> Hypergraph {
        let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for (nodes, &w) in self.edges.iter().zip(&self.weights) {
            for (i, &a) in nodes.iter().enumerate() {
                for &b in &nodes[i + 1..] {
                    *pairs.entry((a, b)).or_insert(0.0) += w;
                }
            }
        }
        let (edges, weights) = pairs.into_iter().map(|((a, b), w)| (vec![a, b], w)).unzip();
        Hypergraph::with_names(
            self.node_types.clone(),
            self.node_names.clone(),
            edges,
            weights,
            None,
        )
        .expect("pairs of valid nodes with positive weight")
    }

    /// Serialize to the line-oriented text format.
    ///
    /// ```text
    /// hhgnn-hypergraph v1
    /// [nodes] <count>
    /// <id>\t<user|pp|act>\t<name or empty>
    /// [hyperedges] <count>
    /// <weight>\t<sorted space-separated node ids>
    /// [attributes] <count> <dim>
    /// <edge index>\t<space-separated floats>
    /// ```
    ///
    /// The attribute section header is `[attributes] 0 0` when no attributes
    /// are stored. Floats use Rust's shortest round-trip formatting.
    pub fn to_text(&self) -> Result<String> {
        let mut s = String::new();
        writeln!(s, "hhgnn-hypergraph v1").unwrap();
        writeln!(s, "[nodes] {}", self.num_nodes()).unwrap();
        for (i, (t, name)) in self.node_types.iter().zip(&self.node_names).enumerate() {
            let name = name.as_deref().unwrap_or("");
            if name.contains(['\t', '\n', '\r']) {
                return Err(Error::InvalidHypergraph(format!(
                    "node name {name:?} contains a tab or newline"
                )));
            }
            writeln!(s, "{i}\t{}\t{name}", t.tag()).unwrap();
        }
        writeln!(s, "[hyperedges] {}", self.num_edges()).unwrap();
        for (nodes, w) in self.edges.iter().zip(&self.weights) {
            let ids: Vec<String> = nodes.iter().map(|v| v.to_string()).collect();
            writeln!(s, "{w}\t{}", ids.join(" ")).unwrap();
        }
        match &self.attrs {
            Some(a) => {
                let dim = a.first().map_or(0, Vec::len);
                writeln!(s, "[attributes] {} {dim}", a.len()).unwrap();
                for (e, v) in a.iter().enumerate() {
                    let vals: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                    writeln!(s, "{e}\t{}", vals.join(" ")).unwrap();
                }
            }
            None => writeln!(s, "[attributes] 0 0").unwrap(),
        }
        Ok(s)
    }

    pub fn from_text(text: &str) -> Result<Hypergraph> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
        let mut next = |what: &str| {
            lines.next().ok_or_else(|| Error::Parse {
                line: 0,
                column: 0,
                reason: format!("unexpected end of file, expected {what}"),
            })
        };
        let (ln, magic) = next("header")?;
        if magic.trim() != "hhgnn-hypergraph v1" {
            return Err(parse_err(ln, 1, "missing 'hhgnn-hypergraph v1' header"));
        }

        let (ln, head) = next("[nodes]")?;
        let n = section_counts(ln, head, "[nodes]", 1)?[0];
        let mut node_types = Vec::with_capacity(n);
        let mut node_names = Vec::with_capacity(n);
        for i in 0..n {
            let (ln, line) = next("node line")?;
            let mut f = line.splitn(3, '\t');
            let id: usize = parse_field(ln, 1, f.next())?;
            if id != i {
                return Err(parse_err(ln, 1, format!("expected node id {i}, found {id}")));
            }
            let tag = f.next().ok_or_else(|| parse_err(ln, 2, "missing type tag"))?;
            node_types.push(tag.parse().map_err(|e: Error| parse_err(ln, 2, e.to_string()))?);
            let name = f.next().unwrap_or("");
            node_names.push((!name.is_empty()).then(|| name.to_string()));
        }

        let (ln, head) = next("[hyperedges]")?;
        let m = section_counts(ln, head, "[hyperedges]", 1)?[0];
        let mut edges = Vec::with_capacity(m);
        let mut weights = Vec::with_capacity(m);
        for _ in 0..m {
            let (ln, line) = next("hyperedge line")?;
            let (w, ids) = line
                .split_once('\t')
                .ok_or_else(|| parse_err(ln, 1, "expected '<weight>\\t<ids>'"))?;
            weights.push(parse_field(ln, 1, Some(w))?);
            let nodes = ids
                .split_whitespace()
                .map(|t| parse_field(ln, 2, Some(t)))
                .collect::<Result<Vec<usize>>>()?;
            edges.push(nodes);
        }

        let (ln, head) = next("[attributes]")?;
        let counts = section_counts(ln, head, "[attributes]", 2)?;
        let attrs = if counts[0] == 0 {
            None
        } else {
            let mut a = Vec::with_capacity(counts[0]);
            for e in 0..counts[0] {
                let (ln, line) = next("attribute line")?;
                let (idx, vals) = line
                    .split_once('\t')
                    .ok_or_else(|| parse_err(ln, 1, "expected '<edge>\\t<values>'"))?;
                let idx: usize = parse_field(ln, 1, Some(idx))?;
                if idx != e {
                    return Err(parse_err(ln, 1, format!("expected edge {e}, found {idx}")));
                }
                let v = vals
                    .split_whitespace()
                    .map(|t| parse_field(ln, 2, Some(t)))
                    .collect::<Result<Vec<f64>>>()?;
                if v.len() != counts[1] {
                    return Err(parse_err(
                        ln,
                        2,
                        format!("expected {} values, found {}", counts[1], v.len()),
                    ));
                }
                a.push(v);
            }
            Some(a)
        };
        Hypergraph::with_names(node_types, node_names, edges, weights, attrs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Hypergraph> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Hypergraph::from_text(&text)
    }
}

fn parse_err(line: usize, column: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        reason: reason.into(),
    }
}

fn parse_field<T: FromStr>(line: usize, column: usize, field: Option<&str>) -> Result<T> {
    let raw = field.ok_or_else(|| parse_err(line, column, "missing field"))?;
    raw.trim()
        .parse()
        .map_err(|_| parse_err(line, column, format!("cannot parse '{raw}'")))
}

fn section_counts(line: usize, head: &str, name: &str, n: usize) -> Result<Vec<usize>> {
    let rest = head
        .strip_prefix(name)
        .ok_or_else(|| parse_err(line, 1, format!("expected section {name}")))?;
    let counts = rest
        .split_whitespace()
        .map(|t| parse_field(line, 2, Some(t)))
        .collect::<Result<Vec<usize>>>()?;
    if counts.len() != n {
        return Err(parse_err(line, 2, format!("{name} expects {n} count(s)")));
    }
    Ok(counts)
}
