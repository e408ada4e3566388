//! Rollout, filtering, objective and update, plus the multi-stage
//! max-length schedule.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{
    dapo_dynamic_filter, dapo_objective, grpo_batch_objective, tfpi_condition, token_ratio, ClipConfig,
    GroupRollout, ObjectiveKind, ObjectiveOutput, Variant,
};
use crate::policy::{sample_group, Adam, AdamConfig, GroupForward, PolicyParams, SamplerPreset, Vocabulary};
use crate::seed;
use crate::tasks::{verify, Task};
use crate::template::{render_thinking, PromptMode, TemplateFamily};
use crate::warmstart::encode_prompt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage {
    pub max_new_tokens: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StagePlan {
    pub mode: PromptMode,
    pub stages: Vec<Stage>,
}

impl Default for StagePlan {
    /// The desk-scale three-stage thinking-free schedule.
    fn default() -> Self {
        StagePlan {
            mode: PromptMode::ThinkingFree,
            stages: vec![
                Stage { max_new_tokens: 64, steps: 200 },
                Stage { max_new_tokens: 128, steps: 100 },
                Stage { max_new_tokens: 256, steps: 100 },
            ],
        }
    }
}

impl StagePlan {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidInput("a plan needs at least one stage".into()));
        }
        if self.stages.iter().any(|s| s.max_new_tokens == 0 || s.steps == 0) {
            return Err(Error::InvalidInput("stage lengths and step counts must be positive".into()));
        }
        if self.stages.windows(2).any(|w| w[1].max_new_tokens < w[0].max_new_tokens) {
            return Err(Error::InvalidInput("stage lengths must be non-decreasing".into()));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> usize {
        self.stages.iter().map(|s| s.steps).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub objective: ObjectiveKind,
    pub group_size: usize,
    pub batch_groups: usize,
    pub learning_rate: f64,
    pub sampler: SamplerPreset,
    pub seed: u64,
    /// Extra groups that may be drawn per step to replace filtered ones.
    pub resample_cap: usize,
    pub clip: ClipConfig,
    pub adam: AdamConfig,
    pub family: TemplateFamily,
    /// Write elapsed time into metrics; off keeps metrics byte-reproducible.
    pub record_wall_clock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            objective: ObjectiveKind::default(),
            group_size: 8,
            batch_groups: 16,
            learning_rate: 1e-3,
            sampler: SamplerPreset::Train,
            seed: 0,
            resample_cap: 64,
            clip: ClipConfig::default(),
            adam: AdamConfig::default(),
            family: TemplateFamily::QwenStyle,
            record_wall_clock: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.group_size < 2 {
            return Err(Error::InvalidInput("group_size must be at least 2".into()));
        }
        if self.batch_groups == 0 {
            return Err(Error::InvalidInput("batch_groups must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidInput("learning_rate must be positive".into()));
        }
        if self.resample_cap == 0 {
            return Err(Error::InvalidInput("resample_cap must be positive".into()));
        }
        self.clip.validate()
    }

    /// Prompt mode used for rollouts under `plan_mode`.
    pub fn rollout_mode(&self, plan_mode: PromptMode) -> PromptMode {
        if self.objective.tfpi_mode {
            PromptMode::ThinkingFree
        } else {
            plan_mode
        }
    }
}

/// One line of metrics.jsonl. `objective_value` is `None` for a skipped step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsRecord {
    pub step: u64,
    pub stage_index: usize,
    pub mean_reward: f64,
    pub objective_value: Option<f64>,
    pub mean_rollout_tokens: f64,
    pub dropped_group_count: usize,
    pub truncation_rate: f64,
    pub wall_clock_ms: u64,
}

impl MetricsRecord {
    pub fn skipped(&self) -> bool {
        self.objective_value.is_none()
    }
}

/// Samples `group_size` responses per task and scores them.
///
/// Seeds derive from `(cfg.seed, step, draw + i, j)`, so results are
/// deterministic in the step and the draw position.
pub fn rollout_batch(
    params: &PolicyParams,
    vocab: &Vocabulary,
    tasks: &[&Task],
    cfg: &TrainConfig,
    mode: PromptMode,
    max_new_tokens: usize,
    step: u64,
    draw: u64,
) -> Result<Vec<GroupRollout>> {
    let sampler = cfg.sampler.build(max_new_tokens, vocab.eos());
    let mut out = Vec::with_capacity(tasks.len());
    for (i, task) in tasks.iter().enumerate() {
        let mut prompt = render_thinking(&task.question, cfg.family)?;
        if mode == PromptMode::ThinkingFree {
            prompt = tfpi_condition(&prompt)?;
        }
        let context = encode_prompt(vocab, prompt.rendered())?;
        let seeds: Vec<u64> =
            (0..cfg.group_size as u64).map(|j| seed::derive(cfg.seed, &[step, draw + i as u64, j])).collect();
        let samples = sample_group(params, &context, &sampler, &seeds)?;
        let mut group = GroupRollout {
            prompt,
            responses: Vec::with_capacity(samples.len()),
            rewards: Vec::with_capacity(samples.len()),
            old_logprobs: Vec::with_capacity(samples.len()),
            truncated: Vec::with_capacity(samples.len()),
        };
        for s in samples {
            let reward = if s.truncated { 0.0 } else { verify(task, &vocab.decode(&s.tokens)?) };
            group.rewards.push(reward);
            group.truncated.push(s.truncated);
            group.responses.push(s.tokens);
            group.old_logprobs.push(s.logprobs);
        }
        out.push(group);
    }
    Ok(out)
}

/// Optimizer state carried between steps.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub params: PolicyParams,
    pub optimizer: Adam,
    pub step: u64,
}

impl TrainState {
    pub fn new(params: PolicyParams, adam: AdamConfig) -> Self {
        let optimizer = Adam::new(params.len(), adam);
        TrainState { params, optimizer, step: 0 }
    }
}

/// Everything a step produced.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub record: MetricsRecord,
    /// Largest |ratio − 1| over the groups used for the update, evaluated
    /// before the update.
    pub max_ratio_deviation: f64,
    pub kept_groups: Vec<GroupRollout>,
    /// Ascent direction that was handed to the optimizer (empty if skipped).
    pub gradient: Vec<f64>,
}

/// Rolls out, filters, tops up and applies one optimizer step.
pub fn train_step(
    state: &mut TrainState,
    vocab: &Vocabulary,
    pool: &[Task],
    cfg: &TrainConfig,
    mode: PromptMode,
    stage_index: usize,
    max_new_tokens: usize,
    clock: Option<Instant>,
) -> Result<StepOutcome> {
    if pool.is_empty() {
        return Err(Error::InvalidInput("task pool is empty".into()));
    }
    let step = state.step + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive(cfg.seed, &[step, u64::MAX]));
    let mut pick =
        |n: usize| -> Vec<&Task> { (0..n).map(|_| &pool[rng.random_range(0..pool.len())]).collect() };

    let mut sampled: Vec<GroupRollout> =
        rollout_batch(&state.params, vocab, &pick(cfg.batch_groups), cfg, mode, max_new_tokens, step, 0)?;
    let mut drawn = cfg.batch_groups as u64;
    let filtered = cfg.objective.variant == Variant::Dapo;
    let mut kept: Vec<GroupRollout>;
    let mut dropped;
    if filtered {
        (kept, dropped) = dapo_dynamic_filter(sampled.clone());
        let mut extra = 0usize;
        while kept.len() < cfg.batch_groups && extra < cfg.resample_cap {
            let n = (cfg.batch_groups - kept.len()).min(cfg.resample_cap - extra);
            let more = rollout_batch(&state.params, vocab, &pick(n), cfg, mode, max_new_tokens, step, drawn)?;
            drawn += n as u64;
            extra += n;
            let (k, d) = dapo_dynamic_filter(more.clone());
            kept.extend(k);
            dropped += d;
            sampled.extend(more);
        }
    } else {
        kept = sampled.clone();
        dropped = 0;
    }

    let n_resp: usize = sampled.iter().map(GroupRollout::size).sum();
    let mean_reward = sampled.iter().flat_map(|g| g.rewards.iter()).sum::<f64>() / n_resp as f64;
    let mean_tokens = sampled.iter().map(|g| g.token_count()).sum::<usize>() as f64 / n_resp as f64;
    let truncation =
        sampled.iter().flat_map(|g| g.truncated.iter()).filter(|&&t| t).count() as f64 / n_resp as f64;

    let update = apply_update(state, vocab, &kept, cfg)?;
    state.step = step;
    let wall_clock_ms = match clock {
        Some(t) if cfg.record_wall_clock => t.elapsed().as_millis() as u64,
        _ => 0,
    };
    Ok(StepOutcome {
        record: MetricsRecord {
            step,
            stage_index,
            mean_reward,
            objective_value: update.objective_value,
            mean_rollout_tokens: mean_tokens,
            dropped_group_count: dropped,
            truncation_rate: truncation,
            wall_clock_ms,
        },
        max_ratio_deviation: update.max_ratio_deviation,
        kept_groups: kept,
        gradient: update.gradient,
    })
}

/// Result of [`apply_update`].
#[derive(Debug, Clone, PartialEq)]
pub struct UpdateOutcome {
    /// `None` when no group carried signal and the step was skipped.
    pub objective_value: Option<f64>,
    pub max_ratio_deviation: f64,
    /// Objective gradient (ascent direction); empty if skipped.
    pub gradient: Vec<f64>,
}

/// Evaluates the objective on `kept` under the current parameters and takes
/// one optimizer step along its gradient. Groups whose rewards are all equal
/// carry no signal; if every group is like that nothing changes.
pub fn apply_update(
    state: &mut TrainState,
    vocab: &Vocabulary,
    kept: &[GroupRollout],
    cfg: &TrainConfig,
) -> Result<UpdateOutcome> {
    let informative = kept.iter().any(|g| {
        let c = g.correct_count();
        c > 0 && c < g.size()
    });
    if !informative {
        return Ok(UpdateOutcome { objective_value: None, max_ratio_deviation: 0.0, gradient: Vec::new() });
    }
    let contexts: Vec<Vec<_>> =
        kept.iter().map(|g| encode_prompt(vocab, g.prompt.rendered())).collect::<Result<_>>()?;
    let forwards: Vec<GroupForward> = kept
        .iter()
        .zip(&contexts)
        .map(|(g, ctx)| GroupForward::new(&state.params, ctx, &g.responses))
        .collect::<Result<_>>()?;
    let new: Vec<Vec<Vec<f64>>> = forwards.iter().map(|f| f.logprobs().to_vec()).collect();
    let mut max_dev = 0.0f64;
    for (g, lp) in kept.iter().zip(&new) {
        for (rows_new, rows_old) in lp.iter().zip(&g.old_logprobs) {
            for (&n, &o) in rows_new.iter().zip(rows_old) {
                max_dev = max_dev.max((token_ratio(n, o)? - 1.0).abs());
            }
        }
    }
    let ObjectiveOutput { value, coeffs } = match cfg.objective.variant {
        Variant::Dapo => dapo_objective(kept, &new, &cfg.clip)?,
        Variant::Grpo | Variant::PpoRef => grpo_batch_objective(kept, &new, &cfg.clip)?,
    };
    let mut grad = vec![0.0; state.params.len()];
    let mut row = 0;
    for (g, f) in kept.iter().zip(&forwards) {
        f.backward(&coeffs[row..row + g.size()], &mut grad)?;
        row += g.size();
    }
    drop(forwards);
    let descent: Vec<f64> = grad.iter().map(|g| -g).collect();
    state.optimizer.step(state.params.as_mut_slice(), &descent, cfg.learning_rate);
    if !state.params.all_finite() {
        return Err(Error::Numeric(format!("non-finite parameters after step {}", state.step + 1)));
    }
    Ok(UpdateOutcome { objective_value: Some(value), max_ratio_deviation: max_dev, gradient: grad })
}

/// Hooks invoked while a schedule runs.
pub trait StepObserver {
    fn on_step(&mut self, _record: &MetricsRecord, _params: &PolicyParams) -> Result<()> {
        Ok(())
    }

    /// Called with the parameters at the end of every stage.
    fn on_stage_end(&mut self, _stage_index: usize, _params: &PolicyParams) -> Result<()> {
        Ok(())
    }
}

impl StepObserver for () {}

#[derive(Debug, Clone)]
pub struct ScheduleOutput {
    pub params: PolicyParams,
    pub metrics: Vec<MetricsRecord>,
    /// Parameters at the end of each stage, in order.
    pub checkpoints: Vec<PolicyParams>,
}

/// Runs `plan` from `state`. Stage indices start at `first_stage_index`.
pub fn run_plan(
    state: &mut TrainState,
    vocab: &Vocabulary,
    pool: &[Task],
    plan: &StagePlan,
    cfg: &TrainConfig,
    first_stage_index: usize,
    observer: &mut dyn StepObserver,
) -> Result<(Vec<MetricsRecord>, Vec<PolicyParams>)> {
    plan.validate()?;
    cfg.validate()?;
    let mode = cfg.rollout_mode(plan.mode);
    let clock = Instant::now();
    let mut metrics = Vec::with_capacity(plan.total_steps());
    let mut checkpoints = Vec::with_capacity(plan.stages.len());
    for (i, stage) in plan.stages.iter().enumerate() {
        let stage_index = first_stage_index + i;
        for _ in 0..stage.steps {
            let out =
                train_step(state, vocab, pool, cfg, mode, stage_index, stage.max_new_tokens, Some(clock))?;
            log::debug!(
                "step {} stage {} reward {:.3} tokens {:.1}",
                out.record.step,
                stage_index,
                out.record.mean_reward,
                out.record.mean_rollout_tokens
            );
            observer.on_step(&out.record, &state.params)?;
            metrics.push(out.record);
        }
        observer.on_stage_end(stage_index, &state.params)?;
        checkpoints.push(state.params.clone());
    }
    Ok((metrics, checkpoints))
}

/// Runs a whole plan from `initial` with a fresh optimizer.
pub fn run_schedule(
    initial: PolicyParams,
    vocab: &Vocabulary,
    pool: &[Task],
    plan: &StagePlan,
    cfg: &TrainConfig,
    observer: &mut dyn StepObserver,
) -> Result<ScheduleOutput> {
    let mut state = TrainState::new(initial, cfg.adam);
    let (metrics, checkpoints) = run_plan(&mut state, vocab, pool, plan, cfg, 1, observer)?;
    Ok(ScheduleOutput { params: state.params, metrics, checkpoints })
}
