use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{InstanceTable, Label, Schema};
use crate::error::{Error, Result};

/// Labels that cannot be positive together. A row with two or more positives
/// in the group has every label of the group erased to missing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExclusiveGroup {
    #[serde(default)]
    pub name: Option<String>,
    pub labels: Vec<String>,
}

/// Two labels that cannot co-occur. A row positive on both has both erased.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForbiddenPair {
    pub labels: [String; 2],
}

/// Label-cleaning rules, read from TOML:
///
/// ```toml
/// [[exclusive]]
/// name = "phone placement"
/// labels = ["pp:OnTable", "pp:InPocket"]
///
/// [[forbidden]]
/// labels = ["act:Sleeping", "act:Running"]
/// ```
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CleaningRules {
    #[serde(default)]
    pub exclusive: Vec<ExclusiveGroup>,
    #[serde(default)]
    pub forbidden: Vec<ForbiddenPair>,
}

impl CleaningRules {
    /// All phone placements mutually exclusive.
    pub fn phone_placement_exclusive(schema: &Schema) -> Self {
        CleaningRules {
            exclusive: vec![ExclusiveGroup {
                name: Some("phone placement".into()),
                labels: schema.pp.iter().map(|p| format!("pp:{p}")).collect(),
            }],
            forbidden: Vec::new(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(format!("cleaning rules: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    fn resolve(&self, schema: &Schema) -> Result<(Vec<Vec<usize>>, Vec<[usize; 2]>)> {
        let idx = |name: &String| {
            schema.class_index(name).ok_or_else(|| {
                Error::InvalidConfig(format!("cleaning rule references unknown label '{name}'"))
            })
        };
        let groups = self
            .exclusive
            .iter()
            .map(|g| g.labels.iter().map(idx).collect::<Result<Vec<_>>>())
            .collect::<Result<_>>()?;
        let pairs = self
            .forbidden
            .iter()
            .map(|p| Ok([idx(&p.labels[0])?, idx(&p.labels[1])?]))
            .collect::<Result<_>>()?;
        Ok((groups, pairs))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleCount {
    pub rule: String,
    pub corrections: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub exclusive: Vec<RuleCount>,
    pub forbidden: Vec<RuleCount>,
    pub rows_modified: usize,
}

impl CleaningReport {
    pub fn total_corrections(&self) -> usize {
        self.exclusive
            .iter()
            .chain(&self.forbidden)
            .map(|r| r.corrections)
            .sum()
    }
}

/// Apply the rules row by row. Conflicts are erased to missing; no label is
/// ever turned positive and no row is dropped.
pub fn clean_labels(
    table: &InstanceTable,
    rules: &CleaningRules,
) -> Result<(InstanceTable, CleaningReport)> {
    let (groups, pairs) = rules.resolve(&table.schema)?;
    let mut report = CleaningReport {
        exclusive: rules
            .exclusive
            .iter()
            .enumerate()
            .map(|(i, g)| RuleCount {
                rule: g.name.clone().unwrap_or_else(|| format!("exclusive[{i}]")),
                corrections: 0,
            })
            .collect(),
        forbidden: rules
            .forbidden
            .iter()
            .map(|p| RuleCount {
                rule: format!("{} + {}", p.labels[0], p.labels[1]),
                corrections: 0,
            })
            .collect(),
        rows_modified: 0,
    };
    let mut out = table.clone();
    for row in &mut out.rows {
        let mut touched = false;
        for (g, members) in groups.iter().enumerate() {
            let positives = members.iter().filter(|&&c| row.label(c).is_positive()).count();
            if positives >= 2 {
                for &c in members {
                    *row.label_mut(c) = Label::Missing;
                }
                report.exclusive[g].corrections += 1;
                touched = true;
            }
        }
        for (p, &[a, b]) in pairs.iter().enumerate() {
            if row.label(a).is_positive() && row.label(b).is_positive() {
                *row.label_mut(a) = Label::Missing;
                *row.label_mut(b) = Label::Missing;
                report.forbidden[p].corrections += 1;
                touched = true;
            }
        }
        report.rows_modified += usize::from(touched);
    }
    Ok((out, report))
}
