use serde::{Deserialize, Serialize};

use super::{InstanceTable, Label};

/// Per-class weights for the weighted binary cross-entropy.
///
/// For class `c` with `N` non-missing training entries, `N⁺` positives and
/// `N⁻` negatives, `pos_weight = N / (2N⁺)` and `neg_weight = N / (2N⁻)`, so
/// positives and negatives carry equal total mass. Classes lacking either
/// positives or negatives are inactive: both weights are 0 and the class is
/// left out of metric averages. Missing entries always weigh 0.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub classes: Vec<String>,
    pub pos_weight: Vec<f64>,
    pub neg_weight: Vec<f64>,
    pub active: Vec<bool>,
}

impl LossWeights {
    pub fn weight(&self, class: usize, label: Label) -> f64 {
        match label {
            Label::Positive => self.pos_weight[class],
            Label::Negative => self.neg_weight[class],
            Label::Missing => 0.0,
        }
    }

    pub fn inactive_classes(&self) -> Vec<&str> {
        self.classes
            .iter()
            .zip(&self.active)
            .filter(|(_, a)| !**a)
            .map(|(c, _)| c.as_str())
            .collect()
    }
}

pub fn compute_loss_weights(train: &InstanceTable) -> LossWeights {
    let c = train.schema.num_classes();
    let mut pos = vec![0usize; c];
    let mut neg = vec![0usize; c];
    for r in &train.rows {
        for (k, l) in r.labels().enumerate() {
            match l {
                Label::Positive => pos[k] += 1,
                Label::Negative => neg[k] += 1,
                Label::Missing => {}
            }
        }
    }
    let mut w = LossWeights {
        classes: train.schema.class_names(),
        pos_weight: vec![0.0; c],
        neg_weight: vec![0.0; c],
        active: vec![false; c],
    };
    for k in 0..c {
        if pos[k] > 0 && neg[k] > 0 {
            let n = (pos[k] + neg[k]) as f64;
            w.pos_weight[k] = n / (2.0 * pos[k] as f64);
            w.neg_weight[k] = n / (2.0 * neg[k] as f64);
            w.active[k] = true;
        }
    }
    w
}
