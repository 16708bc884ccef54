use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{weighted_bce_loss, ColumnWeights, Targets};
use super::optim::{Adam, AdamConfig};
use super::{LossWeights, Model};
use crate::builder::{check_schema, GraphBundle};
use crate::data::{InstanceTable, Label};
use crate::error::{Error, Result};
use crate::metrics::{self, LabelColumns, MetricsReport};
use crate::nn::{Param, Scalar, Tensor2};
use crate::par::Exec;

/// Instance features and labels laid out for the model.
#[derive(Clone, Debug)]
pub struct Dataset<T> {
    pub x: Tensor2<T>,
    /// Per-instance labels in schema class order.
    pub labels: Vec<Vec<Label>>,
    pub class_names: Vec<String>,
    pub num_pp: usize,
    pp_columns: Vec<usize>,
    act_columns: Vec<usize>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(table: &InstanceTable, bundle: &GraphBundle) -> Result<Self> {
        check_schema(bundle, &table.schema)?;
        let x = if table.is_empty() {
            Tensor2::zeros(0, bundle.feature_dim())
        } else {
            Tensor2::from_rows(&table.feature_rows())?
        };
        Ok(Dataset {
            x,
            labels: table.rows.iter().map(|r| r.labels().collect()).collect(),
            class_names: table.schema.class_names(),
            num_pp: table.schema.pp.len(),
            pp_columns: bundle.pp_classes(),
            act_columns: bundle.act_classes(),
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn targets(&self, rows: &[usize]) -> Targets {
        let labels: Vec<&[Label]> = rows.iter().map(|&r| self.labels[r].as_slice()).collect();
        Targets::gather(&labels, &self.pp_columns, &self.act_columns)
    }

    pub fn batch(&self, rows: &[usize]) -> (Tensor2<T>, Targets) {
        let x = Tensor2::from_fn(rows.len(), self.x.cols(), |r, c| self.x.get(rows[r], c));
        (x, self.targets(rows))
    }
}

fn params_mut<T: Scalar>(model: &mut Model<T>) -> Vec<&mut Param<T>> {
    model.params.named_mut().into_iter().map(|(_, p)| p).collect()
}

/// One optimizer update on a batch. Returns the batch loss.
pub fn train_step<T: Scalar>(
    model: &mut Model<T>,
    x: &Tensor2<T>,
    targets: &Targets,
    weights: &ColumnWeights,
    adam: &mut Adam<T>,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    model.zero_grad();
    let (logits, cache) = model.forward(x, true, rng)?;
    let (loss, dlogits) = weighted_bce_loss(&logits, targets, weights)?;
    model.backward(&cache, &dlogits)?;
    adam.step(&mut params_mut(model));
    for (name, p) in model.params.named() {
        p.value.ensure_finite(&format!("parameter {name} after update"))?;
    }
    Ok(loss)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub max_epochs: usize,
    /// Instances per update; 0 means full batch.
    pub batch_size: usize,
    /// Stop after this many epochs without a validation improvement; 0 disables.
    pub patience: usize,
    pub adam: AdamConfig,
    /// Predict exactly one placement per instance (the highest logit).
    pub argmax_pp: bool,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            max_epochs: 100,
            batch_size: 64,
            patience: 0,
            adam: AdamConfig::default(),
            argmax_pp: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_mcc: f64,
}

#[derive(Clone, Debug)]
pub struct FitResult<T> {
    /// 1-based epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_val_mcc: f64,
    pub log: Vec<EpochLog>,
    pub model: Model<T>,
}

/// Train with mini-batch Adam and keep the parameters with the highest
/// validation overall MCC (the earliest epoch wins ties).
pub fn fit<T: Scalar>(
    mut model: Model<T>,
    train: &Dataset<T>,
    val: &Dataset<T>,
    weights: &LossWeights,
    bundle: &GraphBundle,
    opts: &TrainOptions,
) -> Result<FitResult<T>> {
    if train.is_empty() {
        return Err(Error::TooFewRows(0));
    }
    let cw = ColumnWeights::new(weights, bundle);
    let mut adam = Adam::new(opts.adam.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed.wrapping_add(0x5eed));
    let batch = if opts.batch_size == 0 {
        train.len()
    } else {
        opts.batch_size
    };
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut best: Option<(usize, f64, Model<T>)> = None;
    let mut log = Vec::with_capacity(opts.max_epochs);
    for epoch in 1..=opts.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let (x, t) = train.batch(chunk);
            total += train_step(&mut model, &x, &t, &cw, &mut adam, &mut rng)? * chunk.len() as f64;
        }
        let train_loss = total / train.len() as f64;
        let val_mcc = evaluate_split(&model, val, weights, opts.argmax_pp, Exec::Auto)?
            .overall
            .mcc;
        log::debug!("epoch {epoch}: loss {train_loss:.5} val mcc {val_mcc:.4}");
        log.push(EpochLog {
            epoch,
            train_loss,
            val_mcc,
        });
        if best.as_ref().is_none_or(|b| val_mcc > b.1) {
            best = Some((epoch, val_mcc, model.clone()));
        } else if opts.patience > 0 && epoch - best.as_ref().unwrap().0 >= opts.patience {
            break;
        }
    }
    let (best_epoch, best_val_mcc, model) = match best {
        Some(b) => b,
        None => (0, 0.0, model),
    };
    Ok(FitResult {
        best_epoch,
        best_val_mcc,
        log,
        model,
    })
}

/// Thresholded predictions per schema class (`out[c][i]`). Classes without
/// a node in the graph are never predicted.
pub fn predict<T: Scalar>(model: &Model<T>, data: &Dataset<T>, argmax_pp: bool) -> Result<Vec<Vec<bool>>> {
    let n = data.len();
    let mut out = vec![vec![false; n]; data.class_names.len()];
    if n == 0 {
        return Ok(out);
    }
    let logits = model.logits(&data.x)?;
    if logits.pp.cols() != data.pp_columns.len() || logits.act.cols() != data.act_columns.len() {
        return Err(Error::shape(
            "predict",
            "model and dataset were built from different graphs",
        ));
    }
    for i in 0..n {
        let pp = logits.pp.row(i);
        if argmax_pp {
            let best = (0..pp.len()).fold(None, |b: Option<usize>, j| match b {
                Some(k) if pp[k] >= pp[j] => Some(k),
                _ => Some(j),
            });
            if let Some(j) = best {
                out[data.pp_columns[j]][i] = true;
            }
        } else {
            for (j, &z) in pp.iter().enumerate() {
                out[data.pp_columns[j]][i] = z > T::zero();
            }
        }
        for (j, &z) in logits.act.row(i).iter().enumerate() {
            out[data.act_columns[j]][i] = z > T::zero();
        }
    }
    Ok(out)
}

pub fn evaluate_split<T: Scalar>(
    model: &Model<T>,
    data: &Dataset<T>,
    weights: &LossWeights,
    argmax_pp: bool,
    exec: Exec,
) -> Result<MetricsReport> {
    let predicted = predict(model, data, argmax_pp)?;
    let truth: Vec<Vec<Label>> = (0..data.class_names.len())
        .map(|c| data.labels.iter().map(|l| l[c]).collect())
        .collect();
    metrics::evaluate(
        &LabelColumns {
            names: &data.class_names,
            num_pp: data.num_pp,
            active: &weights.active,
            truth: &truth,
            predicted: &predicted,
        },
        exec,
    )
}
