//! Group-relative advantages, importance ratios and clipped surrogate
//! objectives (PPO kernel, GRPO, DAPO), plus the thinking-free conditioning
//! used by TFPI.
//!
//! Objectives return their value together with the derivative of that value
//! with respect to every new per-token log-probability. The trainer chains
//! those coefficients through [`crate::policy::GroupForward::backward`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::TokenId;
use crate::template::{thinking_free, RenderedQuery};

/// One prompt with its `G` sampled responses.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupRollout {
    pub prompt: RenderedQuery,
    pub responses: Vec<Vec<TokenId>>,
    pub rewards: Vec<f64>,
    pub old_logprobs: Vec<Vec<f64>>,
    pub truncated: Vec<bool>,
}

impl GroupRollout {
    pub fn size(&self) -> usize {
        self.responses.len()
    }

    pub fn validate(&self) -> Result<()> {
        let g = self.responses.len();
        if g < 2 {
            return Err(Error::InvalidInput(format!("group size {g} is below 2")));
        }
        if self.rewards.len() != g || self.old_logprobs.len() != g || self.truncated.len() != g {
            return Err(Error::InvalidInput("group fields have different lengths".into()));
        }
        for (y, lp) in self.responses.iter().zip(&self.old_logprobs) {
            if y.len() != lp.len() {
                return Err(Error::InvalidInput(format!(
                    "response of {} tokens has {} old log-probs",
                    y.len(),
                    lp.len()
                )));
            }
        }
        Ok(())
    }

    pub fn correct_count(&self) -> usize {
        self.rewards.iter().filter(|&&r| r > 0.0).count()
    }

    pub fn token_count(&self) -> usize {
        self.responses.iter().map(Vec::len).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClipConfig {
    pub eps_low: f64,
    pub eps_high: f64,
    /// Used by the symmetric PPO and GRPO variants.
    pub symmetric_eps: f64,
}

impl Default for ClipConfig {
    fn default() -> Self {
        ClipConfig { eps_low: 0.2, eps_high: 0.28, symmetric_eps: 0.2 }
    }
}

impl ClipConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in
            [("eps_low", self.eps_low), ("eps_high", self.eps_high), ("symmetric_eps", self.symmetric_eps)]
        {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::InvalidInput(format!("{name} must lie in (0, 1), got {v}")));
            }
        }
        Ok(())
    }

    fn bounds(&self, variant: Variant) -> (f64, f64) {
        match variant {
            Variant::Dapo => (1.0 - self.eps_low, 1.0 + self.eps_high),
            Variant::PpoRef | Variant::Grpo => (1.0 - self.symmetric_eps, 1.0 + self.symmetric_eps),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// Clipped-surrogate kernel only; advantages must be supplied by the caller.
    PpoRef,
    Grpo,
    Dapo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObjectiveKind {
    pub variant: Variant,
    /// Condition rollouts and ratios on the thinking-free prompt.
    pub tfpi_mode: bool,
}

impl Default for ObjectiveKind {
    fn default() -> Self {
        ObjectiveKind { variant: Variant::Dapo, tfpi_mode: false }
    }
}

/// Objective value plus ∂value/∂(new log-prob) for every response token.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveOutput {
    pub value: f64,
    pub coeffs: Vec<Vec<f64>>,
}

/// Standardized rewards `(r - mean) / std` with the population std.
pub fn group_advantages(rewards: &[f64]) -> Result<Vec<f64>> {
    let g = rewards.len();
    if g < 2 {
        return Err(Error::InvalidInput(format!("group size {g} is below 2")));
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / g as f64;
    let std = var.sqrt();
    if std == 0.0 || !std.is_finite() {
        return Err(Error::DegenerateGroup(g));
    }
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

pub fn token_ratio(new_logprob: f64, old_logprob: f64) -> Result<f64> {
    let r = (new_logprob - old_logprob).exp();
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::Numeric(format!("ratio exp({new_logprob} - {old_logprob}) is not finite")))
    }
}

/// `min(r·A, clip(r, 1-ε_low, 1+ε_high)·A)`.
pub fn clipped_token_term(ratio: f64, advantage: f64, clip: &ClipConfig, variant: Variant) -> f64 {
    let (lo, hi) = clip.bounds(variant);
    (ratio * advantage).min(ratio.clamp(lo, hi) * advantage)
}

/// Value and derivative with respect to the new log-prob (`∂r/∂logp = r`).
/// The derivative is zero where the clipped branch is strictly smaller.
fn token_term_with_grad(ratio: f64, advantage: f64, clip: &ClipConfig, variant: Variant) -> (f64, f64) {
    let (lo, hi) = clip.bounds(variant);
    let raw = ratio * advantage;
    let clipped = ratio.clamp(lo, hi) * advantage;
    if raw <= clipped {
        (raw, raw)
    } else {
        (clipped, 0.0)
    }
}

/// Keeps groups with at least one correct and one incorrect response.
pub fn dapo_dynamic_filter(groups: Vec<GroupRollout>) -> (Vec<GroupRollout>, usize) {
    let before = groups.len();
    let kept: Vec<GroupRollout> = groups
        .into_iter()
        .filter(|g| {
            let c = g.correct_count();
            c > 0 && c < g.size()
        })
        .collect();
    let dropped = before - kept.len();
    (kept, dropped)
}

fn check_new(group: &GroupRollout, new_logprobs: &[Vec<f64>]) -> Result<()> {
    group.validate()?;
    if new_logprobs.len() != group.size()
        || new_logprobs.iter().zip(&group.responses).any(|(n, y)| n.len() != y.len())
    {
        return Err(Error::InvalidInput("new log-probs do not match the group's responses".into()));
    }
    Ok(())
}

/// Sum over responses of `weight_i · Σ_t term` using advantages `adv`.
fn weighted_surrogate(
    group: &GroupRollout,
    new_logprobs: &[Vec<f64>],
    adv: &[f64],
    weights: &[f64],
    clip: &ClipConfig,
    variant: Variant,
) -> Result<ObjectiveOutput> {
    let mut value = 0.0;
    let mut coeffs = Vec::with_capacity(group.size());
    for i in 0..group.size() {
        let mut row = Vec::with_capacity(new_logprobs[i].len());
        for (&new, &old) in new_logprobs[i].iter().zip(&group.old_logprobs[i]) {
            let r = token_ratio(new, old)?;
            let (v, d) = token_term_with_grad(r, adv[i], clip, variant);
            value += weights[i] * v;
            row.push(weights[i] * d);
        }
        coeffs.push(row);
    }
    Ok(ObjectiveOutput { value, coeffs })
}

fn zero_output(new_logprobs: &[Vec<f64>]) -> ObjectiveOutput {
    ObjectiveOutput { value: 0.0, coeffs: new_logprobs.iter().map(|r| vec![0.0; r.len()]).collect() }
}

/// Per-token surrogate with externally supplied per-token advantages.
pub fn ppo_ref_objective(
    group: &GroupRollout,
    new_logprobs: &[Vec<f64>],
    advantages: &[Vec<f64>],
    clip: &ClipConfig,
) -> Result<ObjectiveOutput> {
    check_new(group, new_logprobs)?;
    if advantages.len() != group.size()
        || advantages.iter().zip(new_logprobs).any(|(a, n)| a.len() != n.len())
    {
        return Err(Error::InvalidInput("advantages do not match the responses".into()));
    }
    let n_tokens = group.token_count().max(1) as f64;
    let mut value = 0.0;
    let mut coeffs = Vec::with_capacity(group.size());
    for i in 0..group.size() {
        let mut row = Vec::new();
        for t in 0..new_logprobs[i].len() {
            let r = token_ratio(new_logprobs[i][t], group.old_logprobs[i][t])?;
            let (v, d) = token_term_with_grad(r, advantages[i][t], clip, Variant::PpoRef);
            value += v / n_tokens;
            row.push(d / n_tokens);
        }
        coeffs.push(row);
    }
    Ok(ObjectiveOutput { value, coeffs })
}

/// `(1/G) Σ_i (1/|y_i|) Σ_t term`. Degenerate groups contribute zero.
pub fn grpo_objective(
    group: &GroupRollout,
    new_logprobs: &[Vec<f64>],
    clip: &ClipConfig,
) -> Result<ObjectiveOutput> {
    check_new(group, new_logprobs)?;
    let adv = match group_advantages(&group.rewards) {
        Ok(a) => a,
        Err(Error::DegenerateGroup(_)) => return Ok(zero_output(new_logprobs)),
        Err(e) => return Err(e),
    };
    let g = group.size() as f64;
    let weights: Vec<f64> =
        group.responses.iter().map(|y| if y.is_empty() { 0.0 } else { 1.0 / (g * y.len() as f64) }).collect();
    weighted_surrogate(group, new_logprobs, &adv, &weights, clip, Variant::Grpo)
}

/// Token-level objective of one group: `(1/Σ|y_i|) Σ_i Σ_t term`.
pub fn dapo_group_objective(
    group: &GroupRollout,
    new_logprobs: &[Vec<f64>],
    clip: &ClipConfig,
) -> Result<ObjectiveOutput> {
    check_new(group, new_logprobs)?;
    let adv = group_advantages(&group.rewards)?;
    let total = group.token_count();
    if total == 0 {
        return Ok(zero_output(new_logprobs));
    }
    let weights = vec![1.0 / total as f64; group.size()];
    weighted_surrogate(group, new_logprobs, &adv, &weights, clip, Variant::Dapo)
}

/// Mean over the (already filtered) batch of [`dapo_group_objective`].
pub fn dapo_objective(
    batch: &[GroupRollout],
    new_logprobs: &[Vec<Vec<f64>>],
    clip: &ClipConfig,
) -> Result<ObjectiveOutput> {
    batch_mean(batch, new_logprobs, |g, n| dapo_group_objective(g, n, clip))
}

/// Mean over the batch of [`grpo_objective`].
pub fn grpo_batch_objective(
    batch: &[GroupRollout],
    new_logprobs: &[Vec<Vec<f64>>],
    clip: &ClipConfig,
) -> Result<ObjectiveOutput> {
    batch_mean(batch, new_logprobs, |g, n| grpo_objective(g, n, clip))
}

/// Averages per-group outputs. `coeffs` holds one row per response, groups
/// concatenated in batch order.
fn batch_mean<F>(batch: &[GroupRollout], new_logprobs: &[Vec<Vec<f64>>], f: F) -> Result<ObjectiveOutput>
where
    F: Fn(&GroupRollout, &[Vec<f64>]) -> Result<ObjectiveOutput>,
{
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if new_logprobs.len() != batch.len() {
        return Err(Error::InvalidInput("one log-prob set per group is required".into()));
    }
    let n = batch.len() as f64;
    let mut value = 0.0;
    let mut coeffs = Vec::new();
    for (g, lp) in batch.iter().zip(new_logprobs) {
        let out = f(g, lp)?;
        value += out.value / n;
        coeffs.extend(out.coeffs.into_iter().map(|row| row.into_iter().map(|c| c / n).collect()));
    }
    Ok(ObjectiveOutput { value, coeffs })
}

/// The thinking-free rendering of a thinking prompt.
pub fn tfpi_condition(prompt: &RenderedQuery) -> Result<RenderedQuery> {
    thinking_free(prompt)
}
