//! Supervised warm start that stands in for a pretrained reasoning model.
//!
//! A scripted teacher writes responses in both prompt modes. Thinking-mode
//! responses open a `<think>` block with a plan, a first attempt and a few
//! verification steps that can repair a wrong attempt; thinking-free
//! responses commit to a single attempt. The teacher's first attempt is
//! right only with probability `correct_prob`, so imitating it yields a
//! policy that benefits from thinking yet leaves room for reward-driven
//! improvement in both modes.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Adam, AdamConfig, GroupForward, ModelConfig, PolicyParams, TokenId, Vocabulary};
use crate::tasks::{mod_add_operands, Task, TaskKind};
use crate::template::{render, PromptMode, TemplateFamily, THINK_CLOSE, THINK_OPEN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WarmStartConfig {
    pub steps: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Probability that the teacher's first attempt is correct.
    pub correct_prob: f64,
    /// Probability that a verification step repairs a wrong attempt.
    pub fix_prob: f64,
    /// Inclusive range for the number of verification steps per trace.
    pub min_verify_steps: usize,
    pub max_verify_steps: usize,
}

impl Default for WarmStartConfig {
    fn default() -> Self {
        WarmStartConfig {
            steps: 2000,
            batch: 16,
            learning_rate: 3e-3,
            seed: 11,
            correct_prob: 0.3,
            fix_prob: 0.35,
            min_verify_steps: 1,
            max_verify_steps: 3,
        }
    }
}

impl WarmStartConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch == 0 {
            return Err(Error::InvalidInput("warm start needs steps and batch ≥ 1".into()));
        }
        if !(0.0..=1.0).contains(&self.correct_prob) || !(0.0..=1.0).contains(&self.fix_prob) {
            return Err(Error::InvalidInput("teacher probabilities must lie in [0, 1]".into()));
        }
        if self.min_verify_steps > self.max_verify_steps {
            return Err(Error::InvalidInput("invalid verification step range".into()));
        }
        Ok(())
    }
}

/// Last digits of the two `ModAdd` operands.
fn last_digits(task: &Task) -> Option<(u64, u64)> {
    match task.kind {
        TaskKind::ModAdd => mod_add_operands(&task.question).map(|(a, b)| (a % 10, b % 10)),
        _ => None,
    }
}

/// The value a teacher states before committing: the sum of the last
/// digits for `ModAdd`, the answer itself otherwise.
fn intermediate(task: &Task) -> String {
    match last_digits(task) {
        Some((a, b)) => (a + b).to_string(),
        None => task.ground_truth.clone(),
    }
}

/// A plausible wrong intermediate close to the right one.
fn near_miss<R: Rng>(task: &Task, rng: &mut R) -> String {
    let right = intermediate(task);
    match task.kind {
        TaskKind::ModAdd => match right.parse::<u64>() {
            Ok(0) => "1".to_owned(),
            Ok(s) if rng.random_bool(0.5) => (s - 1).to_string(),
            Ok(s) => (s + 1).to_string(),
            Err(_) => right,
        },
        TaskKind::SortDigits => {
            let mut chars: Vec<char> = right.chars().collect();
            let swappable: Vec<usize> =
                (0..chars.len().saturating_sub(1)).filter(|&i| chars[i] != chars[i + 1]).collect();
            match swappable.choose(rng) {
                Some(&i) => {
                    chars.swap(i, i + 1);
                    chars.into_iter().collect()
                }
                None if chars.len() > 1 => chars[..chars.len() - 1].iter().collect(),
                None => "0".to_owned(),
            }
        }
        TaskKind::ParenBalance => if right == "yes" { "no" } else { "yes" }.to_owned(),
    }
}

fn final_answer(task: &Task, stated: &str) -> String {
    match (task.kind, stated.parse::<u64>()) {
        (TaskKind::ModAdd, Ok(s)) => (s % 10).to_string(),
        _ => stated.to_owned(),
    }
}

fn attempt_step(task: &Task, stated: &str) -> String {
    match task.kind {
        TaskKind::ModAdd => format!("The sum is {stated}."),
        _ => format!("The answer is {stated}."),
    }
}

const VERIFY_LEADS: &[&str] = &["Wait, let me check", "Let me verify", "Double-check"];

fn verify_step(lead: &str, stated: &str) -> String {
    format!("{lead}: {stated}.")
}

fn plan_step(kind: TaskKind, pick: usize) -> &'static str {
    let plans: [&str; 2] = match kind {
        TaskKind::ModAdd => ["We need the last digit.", "We add the numbers and keep the last digit."],
        TaskKind::SortDigits => ["We need the digits in ascending order.", "We sort each digit."],
        TaskKind::ParenBalance => ["We count each bracket.", "We need to check the string."],
    };
    plans[pick % 2]
}

/// Text after the (possibly empty) think block, committing to `stated`.
pub fn answer_segment(task: &Task, stated: &str) -> String {
    let answer = final_answer(task, stated);
    match task.kind {
        TaskKind::ModAdd => format!("\n\nThe sum is {stated}, so the answer is \\boxed{{{answer}}}."),
        _ => format!("\n\nThe answer is \\boxed{{{answer}}}."),
    }
}

/// One teacher response for `task` in `mode`, without the stop token.
///
/// Thinking-free responses commit to a single attempt. Thinking responses
/// state a plan, any digits the attempt relies on and the attempt itself, then verify it one or more times; each
/// verification of a wrong attempt repairs it with probability `fix_prob`.
pub fn teacher_response<R: Rng>(task: &Task, mode: PromptMode, cfg: &WarmStartConfig, rng: &mut R) -> String {
    let right = intermediate(task);
    let mut stated = if rng.random_bool(cfg.correct_prob) { right.clone() } else { near_miss(task, rng) };
    match mode {
        PromptMode::ThinkingFree => answer_segment(task, &stated),
        PromptMode::Thinking => {
            let mut steps = vec![plan_step(task.kind, rng.random_range(0..2)).to_owned()];
            if let Some((a, b)) = last_digits(task) {
                steps.push(format!("The last digits are {a} and {b}."));
            }
            steps.push(attempt_step(task, &stated));
            let n = rng.random_range(cfg.min_verify_steps..=cfg.max_verify_steps);
            for _ in 0..n {
                if stated != right && rng.random_bool(cfg.fix_prob) {
                    stated = right.clone();
                }
                let lead = VERIFY_LEADS.choose(rng).expect("non-empty");
                steps.push(verify_step(lead, &stated));
            }
            format!("{THINK_OPEN}\n{}\n{THINK_CLOSE}{}", steps.join("\n\n"), answer_segment(task, &stated))
        }
    }
}

/// BOS followed by the encoded prompt text.
pub fn encode_prompt(vocab: &Vocabulary, text: &str) -> Result<Vec<TokenId>> {
    let mut ids = vec![vocab.bos()];
    ids.extend(vocab.encode(text)?);
    Ok(ids)
}

/// Loss trace of a warm start.
#[derive(Debug, Clone, PartialEq)]
pub struct WarmStartReport {
    pub losses: Vec<f64>,
}

/// Trains `params` to imitate the teacher on `tasks` in both prompt modes.
pub fn warm_start(
    params: &mut PolicyParams,
    vocab: &Vocabulary,
    tasks: &[Task],
    family: TemplateFamily,
    cfg: &WarmStartConfig,
) -> Result<WarmStartReport> {
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::InvalidInput("warm start needs at least one task".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut opt = Adam::new(params.len(), AdamConfig::default());
    let mut grad = vec![0.0; params.len()];
    let mut losses = Vec::with_capacity(cfg.steps);
    for _ in 0..cfg.steps {
        let mut examples = Vec::with_capacity(cfg.batch);
        for _ in 0..cfg.batch {
            let task = tasks.choose(&mut rng).expect("non-empty");
            let mode = if rng.random_bool(0.5) { PromptMode::Thinking } else { PromptMode::ThinkingFree };
            let prompt = render(&task.question, family, mode)?;
            let context = encode_prompt(vocab, prompt.rendered())?;
            let mut target = vocab.encode(&teacher_response(task, mode, cfg, &mut rng))?;
            target.push(vocab.eos());
            examples.push((context, target));
        }
        let n_tokens: usize = examples.iter().map(|(_, t)| t.len()).sum();
        let scale = 1.0 / n_tokens as f64;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut nll = 0.0;
        for (context, target) in &examples {
            let fwd = GroupForward::new(params, context, std::slice::from_ref(target))?;
            nll -= fwd.logprobs()[0].iter().sum::<f64>();
            // Descent direction for the mean token NLL.
            fwd.backward(&[vec![-scale; target.len()]], &mut grad)?;
        }
        opt.step(params.as_mut_slice(), &grad, cfg.learning_rate);
        losses.push(nll * scale);
    }
    if !params.all_finite() {
        return Err(Error::Numeric("warm start produced non-finite parameters".into()));
    }
    Ok(WarmStartReport { losses })
}

/// Fresh parameters for `model`, warm-started on `tasks`.
pub fn initial_policy(
    model: ModelConfig,
    init_seed: u64,
    vocab: &Vocabulary,
    tasks: &[Task],
    family: TemplateFamily,
    cfg: &WarmStartConfig,
) -> Result<(PolicyParams, WarmStartReport)> {
    let mut params = PolicyParams::init(model, init_seed)?;
    let report = warm_start(&mut params, vocab, tasks, family, cfg)?;
    Ok((params, report))
}
