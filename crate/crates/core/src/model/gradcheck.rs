use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::loss::ColumnWeights;
use super::{make_variant, weighted_bce_loss, Dataset, HhgnnConfig, Model, Variant};
use crate::builder::{build_graph, BuildOptions, GraphBundle};
use crate::data::{compute_loss_weights, InstanceTable, Label, LabeledInstance, Schema};
use crate::error::Result;
use crate::nn::{gradcheck, GradcheckReport, Tensor2, DEFAULT_EPS};

/// Six instances from two users with two placements and three activities.
/// The resulting graph has 7 nodes and 5 hyperedges, one of weight 2.
pub fn toy_table() -> InstanceTable {
    use Label::*;
    let schema = Schema {
        features: (0..4).map(|i| format!("f{i}")).collect(),
        pp: vec!["bag".into(), "hand".into()],
        act: vec!["sit".into(), "talk".into(), "walk".into()],
    };
    let rows = [
        ("u1", [Positive, Negative], [Negative, Positive, Positive]),
        ("u1", [Negative, Positive], [Positive, Negative, Negative]),
        ("u2", [Positive, Negative], [Negative, Negative, Positive]),
        ("u2", [Negative, Positive], [Positive, Positive, Negative]),
        ("u1", [Positive, Negative], [Negative, Positive, Positive]),
        ("u2", [Negative, Positive], [Positive, Missing, Negative]),
    ];
    let rows = rows
        .iter()
        .enumerate()
        .map(|(i, (u, pp, act))| LabeledInstance {
            user_id: u.to_string(),
            features: (0..4)
                .map(|j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0)
                .collect(),
            pp: pp.to_vec(),
            act: act.to_vec(),
        })
        .collect();
    InstanceTable::new(schema, rows).expect("toy table is valid")
}

pub fn toy_bundle() -> GraphBundle {
    build_graph(&toy_table(), BuildOptions::default())
        .expect("toy graph builds")
        .0
}

#[derive(Clone, Debug)]
pub struct ModelGradcheck {
    pub variant: Variant,
    pub report: GradcheckReport,
    /// Parameter names aligned with `report.per_param`.
    pub names: Vec<String>,
}

impl ModelGradcheck {
    pub fn worst(&self) -> (&str, f64) {
        self.names
            .iter()
            .zip(&self.report.per_param)
            .fold(("", 0.0), |acc, (n, &e)| if e > acc.1 { (n, e) } else { acc })
    }
}

/// Finite-difference check of every model parameter, node table included,
/// for the weighted loss on the toy data in double precision.
pub fn check_model_gradients(variant: Variant) -> Result<ModelGradcheck> {
    let bundle = toy_bundle();
    let table = toy_table();
    let config = HhgnnConfig {
        hidden_dim: 3,
        num_blocks: 2,
        dropout_rate: 0.0,
        leaky_slope: 0.01,
        feature_dim: 4,
    };
    let mut model: Model<f64> = make_variant(variant, &bundle, &config, 11)?;
    // Move the node table off the starting means so the check is generic.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    {
        use rand::Rng;
        let nt = &mut model.params.node_table.value;
        nt.data_mut().iter_mut().for_each(|x| *x += rng.random_range(-0.5..0.5));
    }
    let data: Dataset<f64> = Dataset::new(&table, &bundle)?;
    let rows: Vec<usize> = (0..data.len()).collect();
    let (x, targets) = data.batch(&rows);
    let weights = ColumnWeights::new(&compute_loss_weights(&table), &bundle);
    let names: Vec<String> = model.params.named().into_iter().map(|(n, _)| n).collect();
    let point: Vec<Tensor2<f64>> = model.params.named().into_iter().map(|(_, p)| p.value.clone()).collect();

    let report = gradcheck(
        point,
        |values| {
            for ((_, p), v) in model.params.named_mut().into_iter().zip(values) {
                p.value = v.clone();
            }
            model.zero_grad();
            let (logits, cache) = model.forward(&x, false, &mut rng)?;
            let (loss, d) = weighted_bce_loss(&logits, &targets, &weights)?;
            model.backward(&cache, &d)?;
            let grads = model.params.named().into_iter().map(|(_, p)| p.grad.clone()).collect();
            Ok((loss, grads))
        },
        DEFAULT_EPS,
    )?;
    Ok(ModelGradcheck {
        variant,
        report,
        names,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_graph_shape() {
        let b = toy_bundle();
        assert_eq!(b.graph.num_nodes(), 7);
        assert_eq!(b.graph.num_edges(), 5);
        assert!(b.graph.weights().contains(&2.0));
    }

    #[test]
    fn all_variants_pass() {
        for v in Variant::ALL {
            let g = check_model_gradients(v).unwrap();
            assert!(g.report.max_rel_error < 1e-4, "{:?}: {:?}", v, g.worst());
            assert_eq!(g.names.len(), g.report.per_param.len());
        }
    }
}
