//! Model checkpoints.
//!
//! Layout after the shared binary header: the [`GatConfig`] as a JSON string,
//! the layer count, then per layer `(n_heads, in_dim, out_dim)` followed by
//! every head's `W`, `a_src` and `a_dst` as little-endian `f64` arrays.

use std::path::Path;

use super::{GatConfig, GatParams, HeadParams, LayerParams};
use crate::binio::{BinReader, BinWriter};
use crate::error::{Error, Result};
use crate::ndcompute::Matrix;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"GATCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn save_checkpoint(path: &Path, cfg: &GatConfig, params: &GatParams) -> Result<()> {
    let json = serde_json::to_string(cfg).map_err(|e| Error::Invalid(e.to_string()))?;
    let mut w = BinWriter::create(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    w.str(&json)?;
    w.usize(params.layers.len())?;
    for layer in &params.layers {
        w.usize(layer.heads.len())?;
        w.usize(layer.in_dim())?;
        w.usize(layer.out_dim())?;
        for h in &layer.heads {
            w.f64s(h.w.data())?;
            w.f64s(&h.a_src)?;
            w.f64s(&h.a_dst)?;
        }
    }
    w.finish()
}

/// Reads a checkpoint and checks that the stored shapes agree with the
/// stored configuration. Pair with [`GatParams::check_input`] to reject a
/// model trained on a different feature space.
pub fn load_checkpoint(path: &Path) -> Result<(GatConfig, GatParams)> {
    let mut r = BinReader::open(path, CHECKPOINT_MAGIC, CHECKPOINT_VERSION)?;
    let json = r.str()?;
    let cfg: GatConfig =
        serde_json::from_str(&json).map_err(|e| r.bad(format!("config echo: {e}")))?;
    let n_layers = r.usize()?;
    if n_layers != 2 {
        return Err(r.bad(format!("{n_layers} layers, expected 2")));
    }
    let mut layers = Vec::with_capacity(2);
    for l in 0..n_layers {
        let n_heads = r.usize()?;
        let in_dim = r.usize()?;
        let out_dim = r.usize()?;
        let (want_heads, want_out) = if l == 0 {
            (cfg.heads_l1, Some(cfg.hidden_dim))
        } else {
            (cfg.heads_l2, None)
        };
        if n_heads != want_heads || want_out.is_some_and(|o| o != out_dim) {
            return Err(r.bad(format!("layer {} shape disagrees with its config", l + 1)));
        }
        if l == 1 && in_dim != cfg.heads_l1 * cfg.hidden_dim {
            return Err(r.bad("output layer input width disagrees with config"));
        }
        let mut heads = Vec::with_capacity(n_heads);
        for _ in 0..n_heads {
            let w = r.f64s()?;
            let a_src = r.f64s()?;
            let a_dst = r.f64s()?;
            if w.len() != in_dim * out_dim || a_src.len() != out_dim || a_dst.len() != out_dim {
                return Err(r.bad(format!("layer {} head array length mismatch", l + 1)));
            }
            heads.push(HeadParams {
                w: Matrix::from_vec(in_dim, out_dim, w)?,
                a_src,
                a_dst,
            });
        }
        layers.push(LayerParams { heads });
    }
    r.expect_eof()?;
    Ok((cfg, GatParams { layers }))
}

impl GatParams {
    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim()
    }

    /// Errors unless the model accepts `in_dim` input features.
    pub fn check_input(&self, in_dim: usize) -> Result<()> {
        if self.in_dim() != in_dim {
            return Err(Error::Shape(format!(
                "model expects {} input features, graph has {in_dim}",
                self.in_dim()
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gat_model::init_params;
    use crate::robust_reg::{RegKind, RegSpec};

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let cfg = GatConfig {
            heads_l1: 3,
            hidden_dim: 4,
            regularizer: RegSpec::new(RegKind::SelfAnchor, 0.25, vec![2]),
            ..GatConfig::default()
        };
        let p = init_params(&cfg, 6, 3, 11);
        save_checkpoint(&path, &cfg, &p).unwrap();
        let (c2, p2) = load_checkpoint(&path).unwrap();
        assert_eq!(c2, cfg);
        assert_eq!(p2, p);
        assert!(p2.check_input(6).is_ok());
        assert!(matches!(p2.check_input(7), Err(Error::Shape(_))));
    }

    #[test]
    fn rejects_shapes_that_contradict_config() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        let cfg = GatConfig {
            heads_l1: 2,
            hidden_dim: 3,
            ..GatConfig::default()
        };
        let p = init_params(&cfg, 5, 2, 0);
        let lying = GatConfig {
            hidden_dim: 4,
            ..cfg.clone()
        };
        save_checkpoint(&path, &lying, &p).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Format { .. })));

        save_checkpoint(&path, &cfg, &p).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[8] = 2;
        std::fs::write(&path, &bytes).unwrap();
        let err = load_checkpoint(&path).unwrap_err().to_string();
        assert!(err.contains("version"), "{err}");
    }
}
