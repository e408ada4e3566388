//! Temperature / top-k / top-p sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{log_softmax, Decoder};
use super::params::PolicyParams;
use super::vocab::TokenId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub temperature: f64,
    pub top_p: f64,
    /// `-1` disables top-k truncation.
    pub top_k: i64,
    pub max_new_tokens: usize,
    pub stop_tokens: Vec<TokenId>,
}

impl SamplerConfig {
    /// Rollout settings used for training: T = 1, top-p = 1, top-k off.
    pub fn train(max_new_tokens: usize, eos: TokenId) -> Self {
        SamplerConfig { temperature: 1.0, top_p: 1.0, top_k: -1, max_new_tokens, stop_tokens: vec![eos] }
    }

    /// Thinking-mode evaluation: T = 0.6, top-p = 0.95, top-k off.
    pub fn thinking_eval(max_new_tokens: usize, eos: TokenId) -> Self {
        SamplerConfig { temperature: 0.6, top_p: 0.95, top_k: -1, max_new_tokens, stop_tokens: vec![eos] }
    }

    /// Thinking-free evaluation: T = 0.7, top-p = 0.8, top-k = 20.
    pub fn thinking_free_eval(max_new_tokens: usize, eos: TokenId) -> Self {
        SamplerConfig { temperature: 0.7, top_p: 0.8, top_k: 20, max_new_tokens, stop_tokens: vec![eos] }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::InvalidInput("temperature must be positive".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::InvalidInput("top_p must lie in (0, 1]".into()));
        }
        if self.top_k == 0 || self.top_k < -1 {
            return Err(Error::InvalidInput("top_k must be >= 1 or -1".into()));
        }
        if self.max_new_tokens == 0 {
            return Err(Error::InvalidInput("max_new_tokens must be at least 1".into()));
        }
        Ok(())
    }
}

/// Named sampler settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplerPreset {
    #[serde(rename = "train")]
    Train,
    #[serde(rename = "thinking_eval")]
    ThinkingEval,
    #[serde(rename = "thinkingfree_eval")]
    ThinkingFreeEval,
}

impl SamplerPreset {
    pub fn build(self, max_new_tokens: usize, eos: TokenId) -> SamplerConfig {
        match self {
            SamplerPreset::Train => SamplerConfig::train(max_new_tokens, eos),
            SamplerPreset::ThinkingEval => SamplerConfig::thinking_eval(max_new_tokens, eos),
            SamplerPreset::ThinkingFreeEval => SamplerConfig::thinking_free_eval(max_new_tokens, eos),
        }
    }
}

/// Sampling distribution after temperature, top-k and top-p truncation.
pub fn truncated_distribution(logits: &[f64], cfg: &SamplerConfig) -> Vec<f64> {
    let scaled: Vec<f64> = logits.iter().map(|l| l / cfg.temperature).collect();
    let mut order: Vec<usize> = (0..logits.len()).collect();
    // Descending by logit, ties broken by token id.
    order.sort_by(|&a, &b| scaled[b].total_cmp(&scaled[a]).then(a.cmp(&b)));
    let keep_k = if cfg.top_k > 0 { (cfg.top_k as usize).min(order.len()) } else { order.len() };
    order.truncate(keep_k);

    let max = scaled[order[0]];
    let mut weights: Vec<f64> = order.iter().map(|&i| (scaled[i] - max).exp()).collect();
    let sum: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= sum);

    if cfg.top_p < 1.0 {
        let mut cum = 0.0;
        let mut keep = weights.len();
        for (i, w) in weights.iter().enumerate() {
            cum += w;
            if cum >= cfg.top_p - 1e-12 {
                keep = i + 1;
                break;
            }
        }
        weights.truncate(keep);
        order.truncate(keep);
        let sum: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= sum);
    }

    let mut dist = vec![0.0; logits.len()];
    for (&i, &w) in order.iter().zip(&weights) {
        dist[i] = w;
    }
    dist
}

pub fn draw<R: Rng>(dist: &[f64], rng: &mut R) -> TokenId {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last_nonzero = 0;
    for (i, &p) in dist.iter().enumerate() {
        if p > 0.0 {
            last_nonzero = i;
            cum += p;
            if u < cum {
                return TokenId(i as u32);
            }
        }
    }
    TokenId(last_nonzero as u32)
}

/// One sampled continuation.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub tokens: Vec<TokenId>,
    /// Full-softmax log-probability of each drawn token under the sampling
    /// parameters (temperature and truncation are *not* applied here).
    pub logprobs: Vec<f64>,
    /// True when generation stopped without emitting a stop token.
    pub truncated: bool,
}

/// Samples one continuation per seed, sharing the prompt computation.
pub fn sample_group(
    params: &PolicyParams,
    context: &[TokenId],
    cfg: &SamplerConfig,
    seeds: &[u64],
) -> Result<Vec<Sample>> {
    cfg.validate()?;
    let context_limit = params.config().context;
    let root = Decoder::prefill(params, context)?;
    let mut out = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dec = root.clone();
        let mut tokens = Vec::new();
        let mut logprobs = Vec::new();
        let mut stopped = false;
        loop {
            let dist = truncated_distribution(dec.logits(), cfg);
            let tok = draw(&dist, &mut rng);
            logprobs.push(log_softmax(dec.logits())[tok.index()]);
            tokens.push(tok);
            if cfg.stop_tokens.contains(&tok) {
                stopped = true;
                break;
            }
            if tokens.len() >= cfg.max_new_tokens || dec.position() + 1 >= context_limit {
                break;
            }
            dec.push(params, tok)?;
        }
        out.push(Sample { tokens, logprobs, truncated: !stopped });
    }
    Ok(out)
}

/// Samples a single continuation.
pub fn sample(
    params: &PolicyParams,
    context: &[TokenId],
    cfg: &SamplerConfig,
    seed: u64,
) -> Result<Vec<TokenId>> {
    Ok(sample_group(params, context, cfg, &[seed])?.pop().map(|s| s.tokens).unwrap_or_default())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t: f64, p: f64, k: i64) -> SamplerConfig {
        SamplerConfig { temperature: t, top_p: p, top_k: k, max_new_tokens: 4, stop_tokens: vec![] }
    }

    #[test]
    fn untruncated_distribution_is_softmax() {
        let logits = [0.3, -1.0, 2.0, 0.0];
        let dist = truncated_distribution(&logits, &cfg(1.0, 1.0, -1));
        let lsm = log_softmax(&logits);
        for (a, b) in dist.iter().zip(&lsm) {
            assert!((a - b.exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn top_k_one_is_argmax() {
        let logits = [0.3, -1.0, 2.0, 0.0];
        let dist = truncated_distribution(&logits, &cfg(1.0, 1.0, 1));
        assert_eq!(dist, vec![0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn top_p_keeps_smallest_nucleus() {
        // probabilities 0.5, 0.3, 0.2 (log-space)
        let logits = [0.5f64.ln(), 0.3f64.ln(), 0.2f64.ln()];
        let dist = truncated_distribution(&logits, &cfg(1.0, 0.8, -1));
        assert!((dist[0] - 0.625).abs() < 1e-12);
        assert!((dist[1] - 0.375).abs() < 1e-12);
        assert_eq!(dist[2], 0.0);
    }

    #[test]
    fn temperature_sharpens() {
        let logits = [1.0, 0.0];
        let hot = truncated_distribution(&logits, &cfg(1.0, 1.0, -1));
        let cold = truncated_distribution(&logits, &cfg(0.5, 1.0, -1));
        assert!(cold[0] > hot[0]);
        assert!((cold[0] - 1.0 / (1.0 + (-2.0f64).exp())).abs() < 1e-12);
    }

    #[test]
    fn invalid_configs() {
        assert!(cfg(0.0, 1.0, -1).validate().is_err());
        assert!(cfg(1.0, 0.0, -1).validate().is_err());
        assert!(cfg(1.0, 1.0, 0).validate().is_err());
        let mut c = cfg(1.0, 1.0, -1);
        c.max_new_tokens = 0;
        assert!(c.validate().is_err());
    }
}
