//! The heterogeneous hypergraph network.
//!
//! A stack of blocks transforms the node table. Each block applies a
//! type-specific linear map and LeakyReLU to every node, then the normalized
//! hypergraph propagation `L·H·Θ` followed by LeakyReLU and dropout. The
//! decision layer projects instance features into the embedding space once
//! for placements and once for activities, and scores them by inner product
//! against the corresponding node embeddings.
//!
//! Gradients are written out by hand per block; `gradcheck` verifies them.

mod checkpoint;
mod gradcheck;
mod loss;
mod optim;
mod params;
mod train;

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::builder::{GraphBundle, NodeSlices};
use crate::error::{Error, Result};
use crate::nn::{
    dropout, dropout_backward, leaky_relu, leaky_relu_backward, linear, linear_backward, matmul,
    matmul_backward, sparse_dense_matmul, DropoutMask, Scalar, Tensor2,
};
use crate::sparse::SparseMatrix;

pub use checkpoint::{
    checkpoint_bytes, checkpoint_from_bytes, load_checkpoint, save_checkpoint, CheckpointHeader,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use gradcheck::{check_model_gradients, toy_bundle, toy_table, ModelGradcheck};
pub use loss::{weighted_bce_loss, ColumnWeights, Targets, PROB_CLAMP};
pub use optim::{Adam, AdamConfig};
pub use params::{BlockParams, HeteroMaps, LinearParams, ModelParams};
pub use train::{fit, predict, evaluate_split, train_step, Dataset, EpochLog, FitResult, TrainOptions};

pub use crate::data::LossWeights;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HhgnnConfig {
    pub hidden_dim: usize,
    pub num_blocks: usize,
    pub dropout_rate: f64,
    pub leaky_slope: f64,
    pub feature_dim: usize,
}

impl HhgnnConfig {
    pub fn new(feature_dim: usize) -> Self {
        HhgnnConfig {
            hidden_dim: 32,
            num_blocks: 2,
            dropout_rate: 0.5,
            leaky_slope: 0.01,
            feature_dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_blocks == 0 || self.hidden_dim == 0 || self.feature_dim == 0 {
            return Err(Error::InvalidConfig(
                "num_blocks, hidden_dim and feature_dim must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::InvalidConfig(format!(
                "dropout_rate {} not in [0, 1)",
                self.dropout_rate
            )));
        }
        if !(self.leaky_slope > 0.0 && self.leaky_slope < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "leaky_slope {} not in (0, 1)",
                self.leaky_slope
            )));
        }
        Ok(())
    }
}

/// The full model and its ablations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Full,
    /// Hyperedges broken into pairwise edges before building the operator.
    HeteroGcn,
    /// One linear map shared by all node types.
    HyperGcn,
    /// A single block.
    OneLayer,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Full,
        Variant::HeteroGcn,
        Variant::HyperGcn,
        Variant::OneLayer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::HeteroGcn => "hetero-gcn",
            Variant::HyperGcn => "hyper-gcn",
            Variant::OneLayer => "one-layer",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Variant::Full => "HHGNN",
            Variant::HeteroGcn => "Hetero GCN",
            Variant::HyperGcn => "Hyper GCN",
            Variant::OneLayer => "1-layer HHGNN",
        }
    }

    pub fn parse(s: &str) -> Option<Variant> {
        Variant::ALL.into_iter().find(|v| v.name() == s)
    }
}

/// Logits for placement and activity nodes, one row per instance.
#[derive(Clone, Debug, PartialEq)]
pub struct Logits<T> {
    pub pp: Tensor2<T>,
    pub act: Tensor2<T>,
}

struct BlockCache<T> {
    /// `(rows, input slice, pre-activation)` per heterogeneity map.
    slices: Vec<(Range<usize>, Tensor2<T>, Tensor2<T>)>,
    propagated: Tensor2<T>,
    conv: Tensor2<T>,
    mask: DropoutMask<T>,
}

/// Intermediate values kept from the forward pass for `backward`.
pub struct ForwardCache<T> {
    x: Tensor2<T>,
    blocks: Vec<BlockCache<T>>,
    v_pp: Tensor2<T>,
    v_act: Tensor2<T>,
    z_pp: Tensor2<T>,
    x_pp: Tensor2<T>,
    z_act: Tensor2<T>,
    x_act: Tensor2<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub variant: Variant,
    pub config: HhgnnConfig,
    pub seed: u64,
    pub params: ModelParams<T>,
    operator: SparseMatrix,
    operator_t: SparseMatrix,
    slices: NodeSlices,
}

/// Build the model for `variant` on `bundle`. Parameters are drawn from a
/// generator seeded with `seed`; the node table starts at the bundle's
/// initial node features.
pub fn make_variant<T: Scalar>(
    variant: Variant,
    bundle: &GraphBundle,
    config: &HhgnnConfig,
    seed: u64,
) -> Result<Model<T>> {
    let mut config = config.clone();
    if variant == Variant::OneLayer {
        config.num_blocks = 1;
    }
    config.validate()?;
    if bundle.feature_dim() != config.feature_dim {
        return Err(Error::shape(
            "make_variant",
            format!(
                "bundle features {} vs config feature_dim {}",
                bundle.feature_dim(),
                config.feature_dim
            ),
        ));
    }
    let operator = match variant {
        Variant::HeteroGcn => bundle.graph.clique_expand().conv_operator()?,
        _ => bundle.graph.conv_operator()?,
    };
    let node_table = Tensor2::from_rows(&bundle.node_init)?;
    let params = ModelParams::init(
        node_table,
        &config,
        variant != Variant::HyperGcn,
        &mut ChaCha8Rng::seed_from_u64(seed),
    );
    Ok(Model {
        variant,
        config,
        seed,
        params,
        operator_t: operator.transpose(),
        operator,
        slices: bundle.slices.clone(),
    })
}

impl<T: Scalar> Model<T> {
    pub fn operator(&self) -> &SparseMatrix {
        &self.operator
    }

    pub fn slices(&self) -> &NodeSlices {
        &self.slices
    }

    pub fn num_parameters(&self) -> usize {
        self.params.named().iter().map(|(_, p)| p.len()).sum()
    }

    #[cfg(test)]
    fn from_parts(
        variant: Variant,
        config: HhgnnConfig,
        seed: u64,
        params: ModelParams<T>,
        operator: SparseMatrix,
        slices: NodeSlices,
    ) -> Self {
        Model {
            variant,
            config,
            seed,
            params,
            operator_t: operator.transpose(),
            operator,
            slices,
        }
    }

    fn map_ranges(&self, block: usize) -> Vec<(Range<usize>, &LinearParams<T>)> {
        match &self.params.blocks[block].hetero {
            HeteroMaps::Typed { user, pp, act } => vec![
                (self.slices.user.clone(), user),
                (self.slices.pp.clone(), pp),
                (self.slices.act.clone(), act),
            ],
            HeteroMaps::Shared(map) => vec![(0..self.slices.total(), map)],
        }
    }

    /// Type-specific linear map and LeakyReLU on each node slice, re-stacked
    /// in node order.
    pub fn heterogeneity_forward(&self, block: usize, v_in: &Tensor2<T>) -> Result<Tensor2<T>> {
        Ok(self.heterogeneity_cached(block, v_in)?.0)
    }

    #[allow(clippy::type_complexity)]
    fn heterogeneity_cached(
        &self,
        block: usize,
        v_in: &Tensor2<T>,
    ) -> Result<(Tensor2<T>, Vec<(Range<usize>, Tensor2<T>, Tensor2<T>)>)> {
        if v_in.rows() != self.slices.total() {
            return Err(Error::shape(
                "heterogeneity_forward",
                format!("{} rows for {} nodes", v_in.rows(), self.slices.total()),
            ));
        }
        let mut out = Tensor2::zeros(v_in.rows(), self.config.hidden_dim);
        let mut cache = Vec::new();
        for (range, map) in self.map_ranges(block) {
            let h = v_in.slice_rows(range.clone());
            let z = linear(&h, &map.weight.value, &map.bias.value)?;
            out.set_rows(range.start, &leaky_relu(&z, self.config.leaky_slope))?;
            cache.push((range, h, z));
        }
        Ok((out, cache))
    }

    /// `dropout(LeakyReLU(L · V · Θ))`; dropout only in training mode.
    pub fn hypergraph_forward<R: Rng + ?Sized>(
        &self,
        block: usize,
        v_in: &Tensor2<T>,
        training: bool,
        rng: &mut R,
    ) -> Result<Tensor2<T>> {
        Ok(self.hypergraph_cached(block, v_in, training, rng)?.0)
    }

    #[allow(clippy::type_complexity)]
    fn hypergraph_cached<R: Rng + ?Sized>(
        &self,
        block: usize,
        v_in: &Tensor2<T>,
        training: bool,
        rng: &mut R,
    ) -> Result<(Tensor2<T>, Tensor2<T>, Tensor2<T>, DropoutMask<T>)> {
        let propagated = sparse_dense_matmul(&self.operator, v_in)?;
        let conv = matmul(&propagated, &self.params.blocks[block].theta.value)?;
        let activated = leaky_relu(&conv, self.config.leaky_slope);
        let (out, mask) = dropout(&activated, self.config.dropout_rate, training, rng)?;
        Ok((out, propagated, conv, mask))
    }

    /// Node representations after all blocks.
    pub fn node_representations<R: Rng + ?Sized>(
        &self,
        training: bool,
        rng: &mut R,
    ) -> Result<Tensor2<T>> {
        let mut v = self.params.node_table.value.clone();
        for b in 0..self.params.blocks.len() {
            let h = self.heterogeneity_forward(b, &v)?;
            v = self.hypergraph_forward(b, &h, training, rng)?;
        }
        Ok(v)
    }

    /// Score instances against placement and activity embeddings in `v_rep`.
    pub fn char_forward(&self, x: &Tensor2<T>, v_rep: &Tensor2<T>) -> Result<Logits<T>> {
        let slope = self.config.leaky_slope;
        let p = &self.params;
        let x_pp = leaky_relu(&linear(x, &p.char_pp.weight.value, &p.char_pp.bias.value)?, slope);
        let x_act = leaky_relu(
            &linear(x, &p.char_act.weight.value, &p.char_act.bias.value)?,
            slope,
        );
        Ok(Logits {
            pp: matmul(&x_pp, &v_rep.slice_rows(self.slices.pp.clone()).transpose())?,
            act: matmul(&x_act, &v_rep.slice_rows(self.slices.act.clone()).transpose())?,
        })
    }

    pub fn forward<R: Rng + ?Sized>(
        &self,
        x: &Tensor2<T>,
        training: bool,
        rng: &mut R,
    ) -> Result<(Logits<T>, ForwardCache<T>)> {
        if x.cols() != self.config.feature_dim {
            return Err(Error::shape(
                "forward",
                format!("{} input features, expected {}", x.cols(), self.config.feature_dim),
            ));
        }
        let mut v = self.params.node_table.value.clone();
        let mut blocks = Vec::with_capacity(self.params.blocks.len());
        for b in 0..self.params.blocks.len() {
            let (h, slices) = self.heterogeneity_cached(b, &v)?;
            let (out, propagated, conv, mask) = self.hypergraph_cached(b, &h, training, rng)?;
            blocks.push(BlockCache {
                slices,
                propagated,
                conv,
                mask,
            });
            v = out;
        }
        let slope = self.config.leaky_slope;
        let p = &self.params;
        let z_pp = linear(x, &p.char_pp.weight.value, &p.char_pp.bias.value)?;
        let x_pp = leaky_relu(&z_pp, slope);
        let z_act = linear(x, &p.char_act.weight.value, &p.char_act.bias.value)?;
        let x_act = leaky_relu(&z_act, slope);
        let v_pp = v.slice_rows(self.slices.pp.clone());
        let v_act = v.slice_rows(self.slices.act.clone());
        let logits = Logits {
            pp: matmul(&x_pp, &v_pp.transpose())?,
            act: matmul(&x_act, &v_act.transpose())?,
        };
        let cache = ForwardCache {
            x: x.clone(),
            blocks,
            v_pp,
            v_act,
            z_pp,
            x_pp,
            z_act,
            x_act,
        };
        Ok((logits, cache))
    }

    /// Inference-mode logits.
    pub fn logits(&self, x: &Tensor2<T>) -> Result<Logits<T>> {
        // Dropout is the identity outside training, so the generator is never drawn from.
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        Ok(self.forward(x, false, &mut rng)?.0)
    }

    /// Accumulate parameter gradients for upstream logit gradients `d`.
    pub fn backward(&mut self, cache: &ForwardCache<T>, d: &Logits<T>) -> Result<()> {
        let slope = self.config.leaky_slope;
        let n_nodes = self.slices.total();
        let hidden = self.config.hidden_dim;

        // Decision layer: logits = X_type · V_typeᵀ.
        let mut dv = Tensor2::zeros(n_nodes, hidden);
        for (dl, xt, zt, vt, range, which) in [
            (&d.pp, &cache.x_pp, &cache.z_pp, &cache.v_pp, self.slices.pp.clone(), 0),
            (&d.act, &cache.x_act, &cache.z_act, &cache.v_act, self.slices.act.clone(), 1),
        ] {
            let (dx_t, dv_t_t) = matmul_backward(xt, &vt.transpose(), dl)?;
            dv.set_rows(range.start, &dv_t_t.transpose())?;
            let dz = leaky_relu_backward(zt, slope, &dx_t)?;
            let (_, dw, db) = linear_backward(&cache.x, &self.map_weight(which), &dz)?;
            let map = if which == 0 {
                &mut self.params.char_pp
            } else {
                &mut self.params.char_act
            };
            map.weight.accumulate(&dw)?;
            map.bias.accumulate(&db)?;
        }

        // Blocks in reverse.
        for b in (0..self.params.blocks.len()).rev() {
            let bc = &cache.blocks[b];
            let dact = dropout_backward(&bc.mask, &dv)?;
            let dconv = leaky_relu_backward(&bc.conv, slope, &dact)?;
            let (dprop, dtheta) =
                matmul_backward(&bc.propagated, &self.params.blocks[b].theta.value, &dconv)?;
            self.params.blocks[b].theta.accumulate(&dtheta)?;
            let dh = sparse_dense_matmul(&self.operator_t, &dprop)?;

            let in_dim = bc.slices.first().map_or(0, |s| s.1.cols());
            let mut din = Tensor2::zeros(n_nodes, in_dim);
            for (k, (range, h, z)) in bc.slices.iter().enumerate() {
                let dz = leaky_relu_backward(z, slope, &dh.slice_rows(range.clone()))?;
                let map = self.params.blocks[b].hetero.map_mut(k);
                let (dx, dw, db) = linear_backward(h, &map.weight.value, &dz)?;
                map.weight.accumulate(&dw)?;
                map.bias.accumulate(&db)?;
                din.set_rows(range.start, &dx)?;
            }
            dv = din;
        }
        self.params.node_table.accumulate(&dv)?;
        for (name, p) in self.params.named() {
            p.grad.ensure_finite(&format!("gradient of {name}"))?;
        }
        Ok(())
    }

    fn map_weight(&self, which: usize) -> Tensor2<T> {
        if which == 0 {
            self.params.char_pp.weight.value.clone()
        } else {
            self.params.char_act.weight.value.clone()
        }
    }

    pub fn zero_grad(&mut self) {
        self.params.named_mut().into_iter().for_each(|(_, p)| p.zero_grad());
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builder::{build_graph, BuildOptions};

    fn bundle() -> GraphBundle {
        build_graph(&toy_table(), BuildOptions::default()).unwrap().0
    }

    fn cfg() -> HhgnnConfig {
        HhgnnConfig {
            hidden_dim: 3,
            num_blocks: 2,
            dropout_rate: 0.0,
            leaky_slope: 0.01,
            feature_dim: 4,
        }
    }

    fn random_x(n: usize, d: usize, seed: u64) -> Tensor2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Tensor2::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
    }

    fn set_identity(map: &mut LinearParams<f64>) {
        map.weight.value = Tensor2::identity(map.weight.value.rows());
        map.bias.value = Tensor2::zeros(1, map.bias.value.cols());
    }

    #[test]
    fn heterogeneity_identity_maps() {
        let b = bundle();
        let mut c = cfg();
        c.hidden_dim = 4;
        let mut m: Model<f64> = make_variant(Variant::Full, &b, &c, 1).unwrap();
        if let HeteroMaps::Typed { user, pp, act } = &mut m.params.blocks[0].hetero {
            for map in [user, pp, act] {
                set_identity(map);
            }
        }
        let v = random_x(b.graph.num_nodes(), 4, 2).map(f64::abs);
        assert_eq!(m.heterogeneity_forward(0, &v).unwrap(), v);
    }

    #[test]
    fn heterogeneity_zero_input_gives_activated_bias() {
        let b = bundle();
        let mut m: Model<f64> = make_variant(Variant::Full, &b, &cfg(), 3).unwrap();
        let n = b.graph.num_nodes();
        if let HeteroMaps::Typed { user, pp, act } = &mut m.params.blocks[0].hetero {
            user.bias.value = Tensor2::from_vec(1, 3, vec![1.0, -1.0, 0.5]).unwrap();
            pp.bias.value = Tensor2::from_vec(1, 3, vec![2.0, 0.0, -3.0]).unwrap();
            act.bias.value = Tensor2::from_vec(1, 3, vec![-0.5, 4.0, 1.0]).unwrap();
        }
        let out = m.heterogeneity_forward(0, &Tensor2::zeros(n, 4)).unwrap();
        let s = b.slices.clone();
        assert_eq!(out.row(s.user.start), &[1.0, -0.01, 0.5]);
        assert_eq!(out.row(s.pp.start), &[2.0, 0.0, -0.03]);
        assert_eq!(out.row(s.act.end - 1), &[-0.005, 4.0, 1.0]);
    }

    #[test]
    fn heterogeneity_equals_per_slice_oracle() {
        let b = bundle();
        let m: Model<f64> = make_variant(Variant::Full, &b, &cfg(), 4).unwrap();
        let v = random_x(b.graph.num_nodes(), 4, 5);
        let out = m.heterogeneity_forward(0, &v).unwrap();
        let HeteroMaps::Typed { user, pp, act } = &m.params.blocks[0].hetero else {
            panic!("typed maps expected");
        };
        for (range, map) in [(b.slices.user.clone(), user), (b.slices.pp.clone(), pp), (b.slices.act.clone(), act)] {
            for r in range {
                for j in 0..3 {
                    let mut z = map.bias.value.get(0, j);
                    for k in 0..4 {
                        z += v.get(r, k) * map.weight.value.get(k, j);
                    }
                    let y = if z >= 0.0 { z } else { 0.01 * z };
                    assert!((out.get(r, j) - y).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn heterogeneity_is_a_partition() {
        // Permuting rows inside a type block and permuting back leaves the output unchanged.
        let b = bundle();
        let m: Model<f64> = make_variant(Variant::Full, &b, &cfg(), 6).unwrap();
        let v = random_x(b.graph.num_nodes(), 4, 7);
        let act = b.slices.act.clone();
        let mut perm: Vec<usize> = (0..v.rows()).collect();
        perm[act.clone()].reverse();
        let permuted = Tensor2::from_fn(v.rows(), 4, |r, c| v.get(perm[r], c));
        let out = m.heterogeneity_forward(0, &permuted).unwrap();
        let back = Tensor2::from_fn(v.rows(), 3, |r, c| out.get(perm[r], c));
        assert_eq!(back, m.heterogeneity_forward(0, &v).unwrap());
    }

    #[test]
    fn hypergraph_layer_constant_rows_fixed_point() {
        let b = bundle();
        let mut m: Model<f64> = make_variant(Variant::Full, &b, &cfg(), 8).unwrap();
        m.params.blocks[0].theta.value = Tensor2::identity(3);
        let v = Tensor2::from_fn(b.graph.num_nodes(), 3, |_, c| [0.3, 1.2, 2.0][c]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = m.hypergraph_forward(0, &v, false, &mut rng).unwrap();
        assert!(out.max_abs_diff(&v) < 1e-12);
    }

    #[test]
    fn hypergraph_layer_two_node_average() {
        use crate::hypergraph::{Hypergraph, NodeType};
        let graph = Hypergraph::new(
            vec![NodeType::User, NodeType::PhonePlacement],
            vec![vec![0, 1]],
            vec![1.0],
            None,
        )
        .unwrap();
        let l = graph.conv_operator().unwrap();
        let slices = NodeSlices { user: 0..1, pp: 1..2, act: 2..2 };
        let mut c = cfg();
        c.hidden_dim = 2;
        let params = ModelParams::init(
            Tensor2::zeros(2, 4),
            &c,
            true,
            &mut ChaCha8Rng::seed_from_u64(0),
        );
        let mut m: Model<f64> = Model::from_parts(Variant::Full, c, 0, params, l, slices);
        m.params.blocks[0].theta.value = Tensor2::identity(2);
        let v = Tensor2::from_vec(2, 2, vec![1.0, 3.0, 5.0, -7.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = m.hypergraph_forward(0, &v, false, &mut rng).unwrap();
        // Averages are (3, -2); LeakyReLU scales the negative column.
        assert_eq!(out.data(), &[3.0, -0.02, 3.0, -0.02]);
    }

    #[test]
    fn hypergraph_layer_matches_dense_composition() {
        let b = bundle();
        let m: Model<f64> = make_variant(Variant::Full, &b, &cfg(), 9).unwrap();
        let v = random_x(b.graph.num_nodes(), 3, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = m.hypergraph_forward(1, &v, false, &mut rng).unwrap();
        let dense = Tensor2::<f64>::from_rows(&m.operator().to_dense()).unwrap();
        let naive = |a: &Tensor2<f64>, b: &Tensor2<f64>| {
            Tensor2::from_fn(a.rows(), b.cols(), |i, j| {
                (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
            })
        };
        let expect = leaky_relu(&naive(&naive(&dense, &v), &m.params.blocks[1].theta.value), 0.01);
        assert!(out.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn char_layer_scores_are_dot_products() {
        let b = bundle();
        let m: Model<f64> = make_variant(Variant::Full, &b, &cfg(), 11).unwrap();
        let x = random_x(5, 4, 12);
        let v = random_x(b.graph.num_nodes(), 3, 13);
        let logits = m.char_forward(&x, &v).unwrap();
        let xp = leaky_relu(
            &linear(&x, &m.params.char_pp.weight.value, &m.params.char_pp.bias.value).unwrap(),
            0.01,
        );
        for i in 0..5 {
            for (j, node) in b.slices.pp.clone().enumerate() {
                let dot: f64 = (0..3).map(|k| xp.get(i, k) * v.get(node, k)).sum();
                assert!((logits.pp.get(i, j) - dot).abs() < 1e-14);
            }
        }
        assert_eq!(logits.act.shape(), (5, b.slices.act.len()));
    }

    #[test]
    fn char_layer_zero_input_zero_logits() {
        let b = bundle();
        let mut m: Model<f64> = make_variant(Variant::Full, &b, &cfg(), 14).unwrap();
        m.params.char_pp.bias.value = Tensor2::zeros(1, 3);
        m.params.char_act.bias.value = Tensor2::zeros(1, 3);
        let v = random_x(b.graph.num_nodes(), 3, 15);
        let logits = m.char_forward(&Tensor2::zeros(2, 4), &v).unwrap();
        assert!(logits.pp.data().iter().chain(logits.act.data()).all(|&x| x == 0.0));
    }

    #[test]
    fn char_layer_argmax_recovers_matching_embedding() {
        let b = bundle();
        let mut c = cfg();
        c.hidden_dim = 4;
        let mut m: Model<f64> = make_variant(Variant::Full, &b, &c, 16).unwrap();
        set_identity(&mut m.params.char_pp);
        // Orthonormal placement embeddings.
        let mut v = Tensor2::zeros(b.graph.num_nodes(), 4);
        for (j, node) in b.slices.pp.clone().enumerate() {
            v.set(node, j, 1.0);
        }
        let x = Tensor2::from_vec(1, 4, vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        let logits = m.char_forward(&x, &v).unwrap();
        assert!(logits.pp.get(0, 1) > logits.pp.get(0, 0));
    }

    #[test]
    fn full_forward_equals_manual_chain_and_is_deterministic() {
        let b = bundle();
        let m: Model<f64> = make_variant(Variant::Full, &b, &cfg(), 17).unwrap();
        let x = random_x(3, 4, 18);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut v = m.params.node_table.value.clone();
        for blk in 0..2 {
            let h = m.heterogeneity_forward(blk, &v).unwrap();
            v = m.hypergraph_forward(blk, &h, false, &mut rng).unwrap();
        }
        let manual = m.char_forward(&x, &v).unwrap();
        let a = m.logits(&x).unwrap();
        assert_eq!(a, manual);
        assert_eq!(a, m.logits(&x).unwrap());
    }

    #[test]
    fn one_layer_matches_full_with_one_block() {
        let b = bundle();
        let mut c = cfg();
        c.num_blocks = 1;
        let one: Model<f64> = make_variant(Variant::OneLayer, &b, &cfg(), 19).unwrap();
        let full: Model<f64> = make_variant(Variant::Full, &b, &c, 19).unwrap();
        assert_eq!(one.params, full.params);
        assert_eq!(one.config, full.config);
        let x = random_x(4, 4, 20);
        assert_eq!(one.logits(&x).unwrap(), full.logits(&x).unwrap());
    }

    #[test]
    fn hyper_gcn_has_fewer_parameters() {
        let b = bundle();
        let full: Model<f64> = make_variant(Variant::Full, &b, &cfg(), 21).unwrap();
        let hyper: Model<f64> = make_variant(Variant::HyperGcn, &b, &cfg(), 21).unwrap();
        assert!(hyper.num_parameters() < full.num_parameters());
    }

    #[test]
    fn hetero_gcn_on_pairwise_graph_equals_full() {
        let mut b = bundle();
        b.graph = b.graph.clique_expand();
        assert!(b.graph.edges().iter().all(|e| e.len() == 2));
        let full: Model<f64> = make_variant(Variant::Full, &b, &cfg(), 22).unwrap();
        let hetero: Model<f64> = make_variant(Variant::HeteroGcn, &b, &cfg(), 22).unwrap();
        let x = random_x(3, 4, 23);
        assert_eq!(full.operator(), hetero.operator());
        assert_eq!(full.logits(&x).unwrap(), hetero.logits(&x).unwrap());
    }

    #[test]
    fn config_validation() {
        let b = bundle();
        let mut c = cfg();
        c.dropout_rate = 1.0;
        assert!(make_variant::<f64>(Variant::Full, &b, &c, 0).is_err());
        let mut c = cfg();
        c.feature_dim = 5;
        assert!(make_variant::<f64>(Variant::Full, &b, &c, 0).is_err());
        assert_eq!(Variant::parse("hyper-gcn"), Some(Variant::HyperGcn));
        assert_eq!(Variant::parse("nope"), None);
    }
}
