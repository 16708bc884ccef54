use super::{Logits, LossWeights};
use crate::builder::GraphBundle;
use crate::data::Label;
use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor2, SIGMOID_CLAMP};

/// Predicted probabilities are clamped to `[PROB_CLAMP, 1 - PROB_CLAMP]`
/// inside the logarithms.
pub const PROB_CLAMP: f64 = 1e-7;

/// Loss weights laid out in the model's output columns (placement nodes,
/// activity nodes).
#[derive(Clone, Debug, PartialEq)]
pub struct ColumnWeights {
    pub pp_pos: Vec<f64>,
    pub pp_neg: Vec<f64>,
    pub act_pos: Vec<f64>,
    pub act_neg: Vec<f64>,
}

impl ColumnWeights {
    pub fn new(weights: &LossWeights, bundle: &GraphBundle) -> Self {
        let gather = |classes: Vec<usize>, w: &[f64]| classes.iter().map(|&c| w[c]).collect();
        ColumnWeights {
            pp_pos: gather(bundle.pp_classes(), &weights.pos_weight),
            pp_neg: gather(bundle.pp_classes(), &weights.neg_weight),
            act_pos: gather(bundle.act_classes(), &weights.pos_weight),
            act_neg: gather(bundle.act_classes(), &weights.neg_weight),
        }
    }
}

/// Tri-state targets in output-column layout, row-major `n × columns`.
#[derive(Clone, Debug, PartialEq)]
pub struct Targets {
    pub n: usize,
    pub pp: Vec<Label>,
    pub act: Vec<Label>,
}

impl Targets {
    /// Gather per-instance schema-ordered labels into output columns.
    pub fn gather(labels: &[&[Label]], pp_classes: &[usize], act_classes: &[usize]) -> Self {
        Targets {
            n: labels.len(),
            pp: labels
                .iter()
                .flat_map(|l| pp_classes.iter().map(move |&c| l[c]))
                .collect(),
            act: labels
                .iter()
                .flat_map(|l| act_classes.iter().map(move |&c| l[c]))
                .collect(),
        }
    }
}

fn part<T: Scalar>(
    logits: &Tensor2<T>,
    labels: &[Label],
    pos: &[f64],
    neg: &[f64],
    n: f64,
) -> Result<(f64, Tensor2<T>)> {
    if labels.len() != logits.len() || pos.len() != logits.cols() || neg.len() != logits.cols() {
        return Err(Error::shape(
            "weighted_bce_loss",
            format!(
                "logits {:?}, {} targets, {} weights",
                logits.shape(),
                labels.len(),
                pos.len()
            ),
        ));
    }
    let k = logits.cols();
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(logits.len());
    for (i, (&z, &y)) in logits.data().iter().zip(labels).enumerate() {
        let z = z.to_f64().unwrap();
        let (w, positive) = match y {
            Label::Positive => (pos[i % k], true),
            Label::Negative => (neg[i % k], false),
            Label::Missing => (0.0, false),
        };
        if w == 0.0 {
            grad.push(T::zero());
            continue;
        }
        let zc = z.clamp(-SIGMOID_CLAMP, SIGMOID_CLAMP);
        let p = 1.0 / (1.0 + (-zc).exp());
        let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        let live = z.abs() <= SIGMOID_CLAMP && p == pc;
        let g = if positive {
            loss -= w * pc.ln();
            if live { -w * (1.0 - p) } else { 0.0 }
        } else {
            loss -= w * (1.0 - pc).ln();
            if live { w * p } else { 0.0 }
        };
        grad.push(T::of(g / n));
    }
    Ok((loss / n, Tensor2::from_vec(logits.rows(), k, grad)?))
}

/// Weighted binary cross-entropy averaged over instances and summed over
/// classes, with its gradient with respect to the logits.
pub fn weighted_bce_loss<T: Scalar>(
    logits: &Logits<T>,
    targets: &Targets,
    weights: &ColumnWeights,
) -> Result<(f64, Logits<T>)> {
    if targets.n == 0 {
        return Err(Error::InvalidConfig("loss over an empty batch".into()));
    }
    let n = targets.n as f64;
    let (lp, gp) = part(&logits.pp, &targets.pp, &weights.pp_pos, &weights.pp_neg, n)?;
    let (la, ga) = part(&logits.act, &targets.act, &weights.act_pos, &weights.act_neg, n)?;
    let loss = lp + la;
    if !loss.is_finite() {
        return Err(Error::NonFinite("weighted_bce_loss".into()));
    }
    Ok((loss, Logits { pp: gp, act: ga }))
}
