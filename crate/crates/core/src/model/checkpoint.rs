//! Binary checkpoint: magic, format version, a JSON header, then every
//! parameter tensor as `name, rows, cols, values` in little-endian order.
//! The propagation operator is rebuilt from the graph bundle at load time.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{make_variant, HhgnnConfig, Model, Variant};
use crate::builder::{GraphBundle, NodeSlices};
use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor2};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"HHGNNCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub version: u32,
    pub variant: Variant,
    pub config: HhgnnConfig,
    pub seed: u64,
    pub num_nodes: usize,
    pub slices: NodeSlices,
    /// Bytes per stored value: 4 or 8.
    pub value_bytes: usize,
    pub params: Vec<(String, usize, usize)>,
}

fn value_bytes<T>() -> usize {
    std::mem::size_of::<T>()
}

pub fn checkpoint_bytes<T: Scalar>(model: &Model<T>) -> Vec<u8> {
    let named = model.params.named();
    let header = CheckpointHeader {
        version: CHECKPOINT_VERSION,
        variant: model.variant,
        config: model.config.clone(),
        seed: model.seed,
        num_nodes: model.slices().total(),
        slices: model.slices().clone(),
        value_bytes: value_bytes::<T>(),
        params: named
            .iter()
            .map(|(n, p)| (n.clone(), p.value.rows(), p.value.cols()))
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, p) in &named {
        for &x in p.value.data() {
            let x = x.to_f64().unwrap();
            if header.value_bytes == 4 {
                out.extend_from_slice(&(x as f32).to_le_bytes());
            } else {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    fs::write(path, checkpoint_bytes(model)).map_err(|e| Error::io(path, e))
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Checkpoint("file is truncated".into()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }
}

/// Parse a checkpoint and attach it to `bundle`, which must be the graph the
/// model was trained on.
pub fn checkpoint_from_bytes<T: Scalar>(bytes: &[u8], bundle: &GraphBundle) -> Result<Model<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().unwrap());
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let len = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
    let header: CheckpointHeader = serde_json::from_slice(r.take(len)?)
        .map_err(|e| Error::Checkpoint(format!("bad header: {e}")))?;
    if header.num_nodes != bundle.graph.num_nodes() || header.slices != bundle.slices {
        return Err(Error::Checkpoint(
            "checkpoint node layout does not match the graph bundle".into(),
        ));
    }
    if header.value_bytes != 4 && header.value_bytes != 8 {
        return Err(Error::Checkpoint(format!("bad value width {}", header.value_bytes)));
    }
    let mut model: Model<T> = make_variant(header.variant, bundle, &header.config, header.seed)?;
    model.config = header.config.clone();
    let mut named = model.params.named_mut();
    if named.len() != header.params.len() {
        return Err(Error::Checkpoint("parameter list does not match the variant".into()));
    }
    for ((name, p), (hname, rows, cols)) in named.iter_mut().zip(&header.params) {
        if name != hname || p.value.shape() != (*rows, *cols) {
            return Err(Error::Checkpoint(format!(
                "parameter {hname} ({rows}×{cols}) does not match {name} {:?}",
                p.value.shape()
            )));
        }
        let raw = r.take(rows * cols * header.value_bytes)?;
        let values = raw
            .chunks_exact(header.value_bytes)
            .map(|c| {
                T::of(if header.value_bytes == 4 {
                    f32::from_le_bytes(c.try_into().unwrap()) as f64
                } else {
                    f64::from_le_bytes(c.try_into().unwrap())
                })
            })
            .collect();
        p.value = Tensor2::from_vec(*rows, *cols, values)?;
        p.zero_grad();
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint("trailing bytes after parameters".into()));
    }
    Ok(model)
}

pub fn load_checkpoint<T: Scalar>(path: &Path, bundle: &GraphBundle) -> Result<Model<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes, bundle)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{toy_bundle, toy_table, Dataset};

    fn model() -> (GraphBundle, Model<f32>) {
        let b = toy_bundle();
        let mut cfg = HhgnnConfig::new(4);
        cfg.hidden_dim = 5;
        let m = make_variant(Variant::HyperGcn, &b, &cfg, 17).unwrap();
        (b, m)
    }

    #[test]
    fn round_trip_is_exact() {
        let (b, m) = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&m, &path).unwrap();
        let back: Model<f32> = load_checkpoint(&path, &b).unwrap();
        assert_eq!(back, m);
        let data: Dataset<f32> = Dataset::new(&toy_table(), &b).unwrap();
        assert_eq!(back.logits(&data.x).unwrap(), m.logits(&data.x).unwrap());
        assert_eq!(checkpoint_bytes(&back), checkpoint_bytes(&m));
    }

    #[test]
    fn corrupt_files_rejected() {
        let (b, m) = model();
        let bytes = checkpoint_bytes(&m);
        assert!(checkpoint_from_bytes::<f32>(&bytes[..bytes.len() - 1], &b).is_err());
        assert!(checkpoint_from_bytes::<f32>(b"NOTACKPT", &b).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(checkpoint_from_bytes::<f32>(&extra, &b).is_err());
    }
}
