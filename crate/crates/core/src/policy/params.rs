use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape hyper-parameters of the causal transformer policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub n_blocks: usize,
    pub d_ff: usize,
    /// Maximum number of positions (prompt + response).
    pub context: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::desk(crate::policy::Vocabulary::builtin().len())
    }
}

impl ModelConfig {
    pub fn desk(vocab_size: usize) -> Self {
        ModelConfig { vocab_size, d_model: 32, n_heads: 4, n_blocks: 2, d_ff: 128, context: 384 }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0
            || self.d_model == 0
            || self.n_heads == 0
            || self.n_blocks == 0
            || self.d_ff == 0
            || self.context == 0
        {
            return Err(Error::InvalidInput("model dimensions must be positive".into()));
        }
        if !self.d_model.is_multiple_of(self.n_heads) {
            return Err(Error::InvalidInput(format!(
                "d_model {} is not divisible by n_heads {}",
                self.d_model, self.n_heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayerSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl LayerSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Offsets of the tensors of one transformer block.
#[derive(Debug, Clone, Copy)]
pub(crate) struct BlockOffsets {
    pub attn_norm: usize,
    pub wq: usize,
    pub wk: usize,
    pub wv: usize,
    pub wo: usize,
    pub mlp_norm: usize,
    pub w_in: usize,
    pub b_in: usize,
    pub w_out: usize,
    pub b_out: usize,
}

#[derive(Debug, Clone)]
pub(crate) struct Offsets {
    pub tok_embedding: usize,
    pub pos_embedding: usize,
    pub blocks: Vec<BlockOffsets>,
    pub final_norm: usize,
    pub lm_head: usize,
}

/// Builds the fixed layer order. Flattening concatenates layers in this order.
pub fn layout(cfg: &ModelConfig) -> Vec<LayerSpec> {
    let (v, d, f) = (cfg.vocab_size, cfg.d_model, cfg.d_ff);
    let mut named: Vec<(String, Vec<usize>)> =
        vec![("tok_embedding".into(), vec![v, d]), ("pos_embedding".into(), vec![cfg.context, d])];
    for b in 0..cfg.n_blocks {
        let p = format!("blocks.{b}");
        named.push((format!("{p}.attn_norm.gain"), vec![d]));
        named.push((format!("{p}.attn.wq"), vec![d, d]));
        named.push((format!("{p}.attn.wk"), vec![d, d]));
        named.push((format!("{p}.attn.wv"), vec![d, d]));
        named.push((format!("{p}.attn.wo"), vec![d, d]));
        named.push((format!("{p}.mlp_norm.gain"), vec![d]));
        named.push((format!("{p}.mlp.w_in"), vec![d, f]));
        named.push((format!("{p}.mlp.b_in"), vec![f]));
        named.push((format!("{p}.mlp.w_out"), vec![f, d]));
        named.push((format!("{p}.mlp.b_out"), vec![d]));
    }
    named.push(("final_norm.gain".into(), vec![d]));
    named.push(("lm_head".into(), vec![d, v]));

    let mut offset = 0;
    named
        .into_iter()
        .map(|(name, shape)| {
            let spec = LayerSpec { name, shape, offset };
            offset += spec.len();
            spec
        })
        .collect()
}

/// Named, layered parameter tensors stored as one contiguous vector.
///
/// Layer order is: token embedding, position embedding, then per block
/// (attention norm gain, wq, wk, wv, wo, MLP norm gain, w_in, b_in, w_out,
/// b_out), final norm gain, output head. All matrices are row-major with
/// shape `[in, out]`.
#[derive(Debug, Clone)]
pub struct PolicyParams {
    config: ModelConfig,
    layers: Vec<LayerSpec>,
    offsets: Offsets,
    data: Vec<f64>,
}

impl PartialEq for PolicyParams {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.layers == other.layers && self.data == other.data
    }
}

impl PolicyParams {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let layers = layout(&config);
        let n = layers.last().map(|l| l.offset + l.len()).unwrap_or(0);
        let offsets = Offsets::from_layers(&config, &layers);
        Ok(PolicyParams { config, layers, offsets, data: vec![0.0; n] })
    }

    /// Random initialization: N(0, 0.02) weights, unit norm gains, zero biases.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, 0.02).expect("valid std");
        let scaled = Normal::new(0.0, 0.02 / (2.0 * config.n_blocks as f64).sqrt()).expect("valid std");
        for layer in p.layers.clone() {
            let slice = &mut p.data[layer.range()];
            if layer.name.ends_with(".gain") {
                slice.fill(1.0);
            } else if layer.name.ends_with("b_in") || layer.name.ends_with("b_out") {
                slice.fill(0.0);
            } else if layer.name.ends_with("wo") || layer.name.ends_with("w_out") {
                slice.iter_mut().for_each(|x| *x = scaled.sample(&mut rng));
            } else {
                slice.iter_mut().for_each(|x| *x = normal.sample(&mut rng));
            }
        }
        Ok(p)
    }

    pub fn from_parts(config: ModelConfig, data: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(config)?;
        if data.len() != p.data.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} parameters, got {}",
                p.data.len(),
                data.len()
            )));
        }
        p.data = data;
        Ok(p)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Full parameter vector in layer order.
    pub fn flatten(&self) -> Vec<f64> {
        self.data.clone()
    }

    pub fn layer(&self, name: &str) -> Option<&[f64]> {
        self.layers.iter().find(|l| l.name == name).map(|l| &self.data[l.range()])
    }

    /// Per-layer flattened views, in layer order.
    pub fn layer_views(&self) -> Vec<(&str, &[f64])> {
        self.layers.iter().map(|l| (l.name.as_str(), &self.data[l.range()])).collect()
    }

    pub fn same_structure(&self, other: &PolicyParams) -> bool {
        self.config == other.config && self.layers == other.layers
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub(crate) fn offsets(&self) -> &Offsets {
        &self.offsets
    }
}

impl Offsets {
    fn from_layers(config: &ModelConfig, layers: &[LayerSpec]) -> Self {
        let find = |name: &str| {
            layers
                .iter()
                .find(|l| l.name == name)
                .map(|l| l.offset)
                .expect("layout contains every named tensor")
        };
        let blocks = (0..config.n_blocks)
            .map(|b| {
                let p = format!("blocks.{b}");
                BlockOffsets {
                    attn_norm: find(&format!("{p}.attn_norm.gain")),
                    wq: find(&format!("{p}.attn.wq")),
                    wk: find(&format!("{p}.attn.wk")),
                    wv: find(&format!("{p}.attn.wv")),
                    wo: find(&format!("{p}.attn.wo")),
                    mlp_norm: find(&format!("{p}.mlp_norm.gain")),
                    w_in: find(&format!("{p}.mlp.w_in")),
                    b_in: find(&format!("{p}.mlp.b_in")),
                    w_out: find(&format!("{p}.mlp.w_out")),
                    b_out: find(&format!("{p}.mlp.b_out")),
                }
            })
            .collect();
        Offsets {
            tok_embedding: find("tok_embedding"),
            pos_embedding: find("pos_embedding"),
            blocks,
            final_norm: find("final_norm.gain"),
            lm_head: find("lm_head"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flatten_length_matches_layers() {
        let cfg = ModelConfig::desk(40);
        let p = PolicyParams::init(cfg, 1).unwrap();
        let total: usize = p.layers().iter().map(|l| l.len()).sum();
        assert_eq!(p.flatten().len(), total);
        let concat: Vec<f64> = p.layer_views().into_iter().flat_map(|(_, v)| v.to_vec()).collect();
        assert_eq!(concat, p.flatten());
        assert!(p.all_finite());
    }

    #[test]
    fn layer_names_stable() {
        let cfg = ModelConfig::desk(10);
        let names: Vec<String> = layout(&cfg).into_iter().map(|l| l.name).collect();
        assert_eq!(names.first().unwrap(), "tok_embedding");
        assert_eq!(names.last().unwrap(), "lm_head");
        assert_eq!(names.len(), 2 + 10 * cfg.n_blocks + 2);
    }

    #[test]
    fn bad_heads_rejected() {
        let mut cfg = ModelConfig::desk(10);
        cfg.n_heads = 5;
        assert!(PolicyParams::zeros(cfg).is_err());
    }
}
