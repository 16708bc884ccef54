//! Instance tables: ingestion, label cleaning, splitting, normalization and
//! loss-weight computation.
//!
//! The CSV contract: the header lists feature names, then phone-placement
//! labels prefixed `pp:`, then activity labels prefixed `act:`, then a final
//! `user_id` column. Feature cells are finite dot-decimal numbers; label cells
//! are `1` (positive), `0` (negative) or empty (missing).

mod clean;
mod normalize;
mod split;
mod weights;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clean::{clean_labels, CleaningReport, CleaningRules, ExclusiveGroup, ForbiddenPair, RuleCount};
pub use normalize::{apply_normalizer, fit_normalizer, NormStats};
pub use split::{split, DEFAULT_RATIOS};
pub use weights::{compute_loss_weights, LossWeights};

pub const PP_PREFIX: &str = "pp:";
pub const ACT_PREFIX: &str = "act:";
pub const USER_COLUMN: &str = "user_id";

/// Tri-state target.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Positive,
    Negative,
    Missing,
}

impl Label {
    pub fn parse(cell: &str) -> Option<Label> {
        match cell {
            "1" => Some(Label::Positive),
            "0" => Some(Label::Negative),
            "" => Some(Label::Missing),
            _ => None,
        }
    }

    pub fn as_cell(self) -> &'static str {
        match self {
            Label::Positive => "1",
            Label::Negative => "0",
            Label::Missing => "",
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

/// Column layout of an instance table. Label names are stored without their
/// `pp:` / `act:` prefixes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub features: Vec<String>,
    pub pp: Vec<String>,
    pub act: Vec<String>,
}

impl Schema {
    pub fn num_classes(&self) -> usize {
        self.pp.len() + self.act.len()
    }

    /// Prefixed class names, phone placements first.
    pub fn class_names(&self) -> Vec<String> {
        self.pp
            .iter()
            .map(|n| format!("{PP_PREFIX}{n}"))
            .chain(self.act.iter().map(|n| format!("{ACT_PREFIX}{n}")))
            .collect()
    }

    /// Class index of a prefixed label name.
    pub fn class_index(&self, name: &str) -> Option<usize> {
        if let Some(n) = name.strip_prefix(PP_PREFIX) {
            self.pp.iter().position(|p| p == n)
        } else if let Some(n) = name.strip_prefix(ACT_PREFIX) {
            self.act.iter().position(|a| a == n).map(|i| i + self.pp.len())
        } else {
            None
        }
    }

    pub fn header(&self) -> Vec<String> {
        let mut h = self.features.clone();
        h.extend(self.class_names());
        h.push(USER_COLUMN.to_string());
        h
    }

    fn from_header(header: &[&str]) -> Result<Schema> {
        let mismatch = |m: String| Error::SchemaMismatch(m);
        let (last, cols) = header
            .split_last()
            .ok_or_else(|| mismatch("empty header".into()))?;
        if *last != USER_COLUMN {
            return Err(mismatch(format!("last column must be '{USER_COLUMN}', found '{last}'")));
        }
        let mut schema = Schema {
            features: Vec::new(),
            pp: Vec::new(),
            act: Vec::new(),
        };
        // 0 = features, 1 = pp, 2 = act; sections may only advance.
        let mut section = 0;
        for (i, &c) in cols.iter().enumerate() {
            let (s, name) = if let Some(n) = c.strip_prefix(PP_PREFIX) {
                (1, n)
            } else if let Some(n) = c.strip_prefix(ACT_PREFIX) {
                (2, n)
            } else {
                (0, c)
            };
            if s < section {
                return Err(mismatch(format!(
                    "column {} '{c}' out of order (features, then pp:, then act:)",
                    i + 1
                )));
            }
            if name.is_empty() || c == USER_COLUMN {
                return Err(mismatch(format!("column {} has an invalid name '{c}'", i + 1)));
            }
            section = s;
            match s {
                0 => schema.features.push(name.to_string()),
                1 => schema.pp.push(name.to_string()),
                _ => schema.act.push(name.to_string()),
            }
        }
        let mut names = schema.header();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(mismatch("duplicate column names".into()));
        }
        Ok(schema)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabeledInstance {
    pub user_id: String,
    pub features: Vec<f64>,
    pub pp: Vec<Label>,
    pub act: Vec<Label>,
}

impl LabeledInstance {
    /// Labels in class order (phone placements, then activities).
    pub fn labels(&self) -> impl Iterator<Item = Label> + '_ {
        self.pp.iter().chain(&self.act).copied()
    }

    pub fn label(&self, class: usize) -> Label {
        if class < self.pp.len() {
            self.pp[class]
        } else {
            self.act[class - self.pp.len()]
        }
    }

    pub fn label_mut(&mut self, class: usize) -> &mut Label {
        if class < self.pp.len() {
            &mut self.pp[class]
        } else {
            let n = self.pp.len();
            &mut self.act[class - n]
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceTable {
    pub schema: Schema,
    pub rows: Vec<LabeledInstance>,
}

impl InstanceTable {
    pub fn new(schema: Schema, rows: Vec<LabeledInstance>) -> Result<Self> {
        for (i, r) in rows.iter().enumerate() {
            if r.features.len() != schema.features.len()
                || r.pp.len() != schema.pp.len()
                || r.act.len() != schema.act.len()
            {
                return Err(Error::SchemaMismatch(format!("row {i} does not match schema")));
            }
            if r.features.iter().any(|x| !x.is_finite()) {
                return Err(Error::SchemaMismatch(format!("row {i} has a non-finite feature")));
            }
        }
        Ok(InstanceTable { schema, rows })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn subset(&self, indices: &[usize]) -> InstanceTable {
        InstanceTable {
            schema: self.schema.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// Feature matrix as rows.
    pub fn feature_rows(&self) -> Vec<Vec<f64>> {
        self.rows.iter().map(|r| r.features.clone()).collect()
    }

    /// Serialize under the CSV contract.
    pub fn to_csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::SchemaMismatch(e.to_string());
        w.write_record(self.schema.header()).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec: Vec<String> = r.features.iter().map(|x| x.to_string()).collect();
            rec.extend(r.labels().map(|l| l.as_cell().to_string()));
            rec.push(r.user_id.clone());
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.into_inner()
            .map_err(|e| Error::SchemaMismatch(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_bytes()?).map_err(|e| Error::io(path, e))
    }
}

/// Parse an instance table. When `expected` is given the header must match it.
pub fn load_instances(path: &Path, expected: Option<&Schema>) -> Result<InstanceTable> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_instances(&bytes, expected)
}

pub fn parse_instances(bytes: &[u8], expected: Option<&Schema>) -> Result<InstanceTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(bytes);
    let mut records = rdr.records();
    let header = match records.next() {
        Some(Ok(h)) => h,
        Some(Err(e)) => {
            return Err(Error::Parse {
                line: 1,
                column: 0,
                reason: e.to_string(),
            })
        }
        None => return Err(Error::SchemaMismatch("empty file".into())),
    };
    let schema = Schema::from_header(&header.iter().collect::<Vec<_>>())?;
    if let Some(exp) = expected {
        if *exp != schema {
            return Err(Error::SchemaMismatch("header differs from expected schema".into()));
        }
    }
    let width = header.len();
    let (nf, np) = (schema.features.len(), schema.pp.len());
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| Error::Parse {
            line: e.position().map_or(0, |p| p.line() as usize),
            column: 0,
            reason: e.to_string(),
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        if rec.len() == 1 && rec.get(0) == Some("") {
            continue;
        }
        if rec.len() != width {
            return Err(Error::Parse {
                line,
                column: rec.len().min(width) + 1,
                reason: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        let mut features = Vec::with_capacity(nf);
        for (c, cell) in rec.iter().take(nf).enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                line,
                column: c + 1,
                reason: format!("feature '{cell}' is not a decimal number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    column: c + 1,
                    reason: format!("feature '{cell}' is not finite"),
                });
            }
            features.push(v);
        }
        let mut labels = Vec::with_capacity(schema.num_classes());
        for (c, cell) in rec.iter().enumerate().skip(nf).take(schema.num_classes()) {
            labels.push(Label::parse(cell.trim()).ok_or_else(|| Error::Parse {
                line,
                column: c + 1,
                reason: format!("label '{cell}' must be '', '0' or '1'"),
            })?);
        }
        let act = labels.split_off(np);
        rows.push(LabeledInstance {
            user_id: rec.get(width - 1).unwrap_or("").to_string(),
            features,
            pp: labels,
            act,
        });
    }
    InstanceTable::new(schema, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    const CSV: &str = "f1,f2,pp:OnTable,pp:InPocket,act:Sitting,act:Walking,user_id\n\
                       0.5,-1.25,1,0,1,,u1\n";

    #[test]
    fn parses_single_row() {
        let t = parse_instances(CSV.as_bytes(), None).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.schema.pp, vec!["OnTable", "InPocket"]);
        let r = &t.rows[0];
        assert_eq!(r.features, vec![0.5, -1.25]);
        assert_eq!(r.pp, vec![Label::Positive, Label::Negative]);
        // Empty cell means missing, never negative.
        assert_eq!(r.act, vec![Label::Positive, Label::Missing]);
        assert_eq!(r.user_id, "u1");
    }

    #[test]
    fn malformed_feature_reports_position() {
        let bad = "f1,f2,pp:A,user_id\n1,2,1,u\n3,abc,0,u\n";
        match parse_instances(bad.as_bytes(), None) {
            Err(Error::Parse { line, column, .. }) => assert_eq!((line, column), (3, 2)),
            other => panic!("{other:?}"),
        }
        let bad = "f1,pp:A,user_id\n1,2,u\n";
        assert!(matches!(
            parse_instances(bad.as_bytes(), None),
            Err(Error::Parse { line: 2, column: 2, .. })
        ));
        let bad = "f1,pp:A,user_id\ninf,1,u\n";
        assert!(matches!(parse_instances(bad.as_bytes(), None), Err(Error::Parse { .. })));
    }

    #[test]
    fn header_contract() {
        for bad in [
            "f1,pp:A\n",
            "pp:A,f1,user_id\n",
            "f1,act:A,pp:B,user_id\n",
            "f1,f1,user_id\n",
        ] {
            assert!(
                matches!(parse_instances(bad.as_bytes(), None), Err(Error::SchemaMismatch(_))),
                "{bad}"
            );
        }
        let t = parse_instances(CSV.as_bytes(), None).unwrap();
        let mut other = t.schema.clone();
        other.act.pop();
        assert!(matches!(
            parse_instances(CSV.as_bytes(), Some(&other)),
            Err(Error::SchemaMismatch(_))
        ));
    }

    #[test]
    fn csv_round_trip() {
        let t = parse_instances(CSV.as_bytes(), None).unwrap();
        let bytes = t.to_csv_bytes().unwrap();
        assert_eq!(String::from_utf8(bytes.clone()).unwrap(), CSV);
        assert_eq!(parse_instances(&bytes, None).unwrap(), t);
    }

    #[test]
    fn class_indexing() {
        let t = parse_instances(CSV.as_bytes(), None).unwrap();
        assert_eq!(t.schema.class_index("pp:InPocket"), Some(1));
        assert_eq!(t.schema.class_index("act:Walking"), Some(3));
        assert_eq!(t.schema.class_index("Walking"), None);
        assert_eq!(t.rows[0].label(2), Label::Positive);
    }
}
