//! The tiny autoregressive policy: vocabulary, parameters, exact
//! log-probabilities with gradients, sampling and checkpoints.

pub mod checkpoint;
pub mod model;
pub mod optim;
pub mod params;
pub mod sampler;
pub mod vocab;

pub use checkpoint::Checkpoint;
pub use model::{log_softmax, Decoder, GroupForward};
pub use optim::{Adam, AdamConfig};
pub use params::{LayerSpec, ModelConfig, PolicyParams};
pub use sampler::{sample, sample_group, Sample, SamplerConfig, SamplerPreset};
pub use vocab::{TokenId, Vocabulary};

use crate::error::Result;

/// Anything that can sample continuations of a prompt.
pub trait Policy {
    /// One sample per seed, in seed order.
    fn sample_group(&self, context: &[TokenId], cfg: &SamplerConfig, seeds: &[u64]) -> Result<Vec<Sample>>;
}

impl Policy for PolicyParams {
    fn sample_group(&self, context: &[TokenId], cfg: &SamplerConfig, seeds: &[u64]) -> Result<Vec<Sample>> {
        sampler::sample_group(self, context, cfg, seeds)
    }
}

/// Full-softmax log-likelihood of `continuation` after `context`.
///
/// Returns the total and the per-token terms. An empty continuation gives
/// `(0.0, [])`.
pub fn sequence_logprob(
    params: &PolicyParams,
    context: &[TokenId],
    continuation: &[TokenId],
) -> Result<(f64, Vec<f64>)> {
    let fwd = GroupForward::new(params, context, &[continuation.to_vec()])?;
    let per_token = fwd.logprobs()[0].clone();
    Ok((per_token.iter().sum(), per_token))
}

/// Gradient of the total from [`sequence_logprob`] with respect to every
/// parameter, in flattened layer order.
pub fn grad_sequence_logprob(
    params: &PolicyParams,
    context: &[TokenId],
    continuation: &[TokenId],
) -> Result<PolicyParams> {
    let fwd = GroupForward::new(params, context, &[continuation.to_vec()])?;
    let mut grad = PolicyParams::zeros(*params.config())?;
    fwd.backward(&[vec![1.0; continuation.len()]], grad.as_mut_slice())?;
    Ok(grad)
}
