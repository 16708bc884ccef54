use rand::Rng;

use super::HhgnnConfig;
use crate::nn::{Param, Scalar, Tensor2};

#[derive(Clone, Debug, PartialEq)]
pub struct LinearParams<T> {
    pub weight: Param<T>,
    pub bias: Param<T>,
}

impl<T: Scalar> LinearParams<T> {
    /// Glorot-uniform weight, zero bias.
    pub fn init<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        LinearParams {
            weight: Param::new(glorot(d_in, d_out, rng)),
            bias: Param::new(Tensor2::zeros(1, d_out)),
        }
    }
}

pub(crate) fn glorot<T: Scalar, R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Tensor2<T> {
    let a = (6.0 / (d_in + d_out) as f64).sqrt();
    Tensor2::from_fn(d_in, d_out, |_, _| T::of(rng.random_range(-a..a)))
}

#[derive(Clone, Debug, PartialEq)]
pub enum HeteroMaps<T> {
    Typed {
        user: LinearParams<T>,
        pp: LinearParams<T>,
        act: LinearParams<T>,
    },
    Shared(LinearParams<T>),
}

impl<T> HeteroMaps<T> {
    pub(crate) fn map_mut(&mut self, k: usize) -> &mut LinearParams<T> {
        match self {
            HeteroMaps::Typed { user, pp, act } => match k {
                0 => user,
                1 => pp,
                _ => act,
            },
            HeteroMaps::Shared(m) => m,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams<T> {
    pub hetero: HeteroMaps<T>,
    /// Convolution weight, `hidden × hidden`.
    pub theta: Param<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<T> {
    /// Node embedding table, fine-tuned during training.
    pub node_table: Param<T>,
    pub blocks: Vec<BlockParams<T>>,
    pub char_pp: LinearParams<T>,
    pub char_act: LinearParams<T>,
}

impl<T: Scalar> ModelParams<T> {
    pub fn init<R: Rng + ?Sized>(
        node_table: Tensor2<T>,
        cfg: &HhgnnConfig,
        typed: bool,
        rng: &mut R,
    ) -> Self {
        let h = cfg.hidden_dim;
        let blocks = (0..cfg.num_blocks)
            .map(|b| {
                let d_in = if b == 0 { cfg.feature_dim } else { h };
                let hetero = if typed {
                    HeteroMaps::Typed {
                        user: LinearParams::init(d_in, h, rng),
                        pp: LinearParams::init(d_in, h, rng),
                        act: LinearParams::init(d_in, h, rng),
                    }
                } else {
                    HeteroMaps::Shared(LinearParams::init(d_in, h, rng))
                };
                BlockParams {
                    hetero,
                    theta: Param::new(glorot(h, h, rng)),
                }
            })
            .collect();
        ModelParams {
            node_table: Param::new(node_table),
            blocks,
            char_pp: LinearParams::init(cfg.feature_dim, h, rng),
            char_act: LinearParams::init(cfg.feature_dim, h, rng),
        }
    }

    /// Every parameter with a stable name, in a fixed order.
    pub fn named(&self) -> Vec<(String, &Param<T>)> {
        let mut out = vec![("node_table".to_string(), &self.node_table)];
        for (b, block) in self.blocks.iter().enumerate() {
            match &block.hetero {
                HeteroMaps::Typed { user, pp, act } => {
                    for (t, m) in [("user", user), ("pp", pp), ("act", act)] {
                        out.push((format!("block{b}.hetero.{t}.weight"), &m.weight));
                        out.push((format!("block{b}.hetero.{t}.bias"), &m.bias));
                    }
                }
                HeteroMaps::Shared(m) => {
                    out.push((format!("block{b}.hetero.shared.weight"), &m.weight));
                    out.push((format!("block{b}.hetero.shared.bias"), &m.bias));
                }
            }
            out.push((format!("block{b}.theta"), &block.theta));
        }
        for (t, m) in [("pp", &self.char_pp), ("act", &self.char_act)] {
            out.push((format!("char.{t}.weight"), &m.weight));
            out.push((format!("char.{t}.bias"), &m.bias));
        }
        out
    }

    /// Same order as [`ModelParams::named`].
    pub fn named_mut(&mut self) -> Vec<(String, &mut Param<T>)> {
        let mut out = vec![("node_table".to_string(), &mut self.node_table)];
        for (b, block) in self.blocks.iter_mut().enumerate() {
            match &mut block.hetero {
                HeteroMaps::Typed { user, pp, act } => {
                    for (t, m) in [("user", user), ("pp", pp), ("act", act)] {
                        out.push((format!("block{b}.hetero.{t}.weight"), &mut m.weight));
                        out.push((format!("block{b}.hetero.{t}.bias"), &mut m.bias));
                    }
                }
                HeteroMaps::Shared(m) => {
                    out.push((format!("block{b}.hetero.shared.weight"), &mut m.weight));
                    out.push((format!("block{b}.hetero.shared.bias"), &mut m.bias));
                }
            }
            out.push((format!("block{b}.theta"), &mut block.theta));
        }
        for (t, m) in [("pp", &mut self.char_pp), ("act", &mut self.char_act)] {
            out.push((format!("char.{t}.weight"), &mut m.weight));
            out.push((format!("char.{t}.bias"), &mut m.bias));
        }
        out
    }
}
