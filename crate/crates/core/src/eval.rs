//! avg@k evaluation in thinking and thinking-free mode.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Policy, SamplerPreset, Vocabulary};
use crate::seed;
use crate::tasks::{verify, Task};
use crate::template::{render, PromptMode, TemplateFamily};
use crate::warmstart::encode_prompt;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    pub k: usize,
    pub mode: PromptMode,
    pub sampler: SamplerPreset,
    pub max_new_tokens: usize,
    pub seed: u64,
    pub family: TemplateFamily,
}

impl EvalConfig {
    /// Thinking mode with the thinking evaluation preset.
    pub fn thinking(k: usize, max_new_tokens: usize, seed: u64) -> Self {
        EvalConfig {
            k,
            mode: PromptMode::Thinking,
            sampler: SamplerPreset::ThinkingEval,
            max_new_tokens,
            seed,
            family: TemplateFamily::QwenStyle,
        }
    }

    /// Thinking-free mode with the thinking-free evaluation preset.
    pub fn thinking_free(k: usize, max_new_tokens: usize, seed: u64) -> Self {
        EvalConfig {
            k,
            mode: PromptMode::ThinkingFree,
            sampler: SamplerPreset::ThinkingFreeEval,
            max_new_tokens,
            seed,
            family: TemplateFamily::QwenStyle,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEval {
    pub task_id: String,
    pub correct: usize,
    pub mean_tokens: f64,
    /// Completion length of each of the k samples.
    pub token_counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: PromptMode,
    pub k: usize,
    pub avg_at_k: f64,
    pub mean_tokens: f64,
    pub truncation_rate: f64,
    pub per_task: Vec<TaskEval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenStats {
    pub mean: f64,
    pub median: f64,
    /// `(bucket start, count)` for non-empty buckets, ascending.
    pub histogram: Vec<(usize, usize)>,
}

/// Completion-length summary. Empty input gives zeros and no buckets.
pub fn token_stats(lengths: &[usize], bucket_width: usize) -> TokenStats {
    if lengths.is_empty() {
        return TokenStats { mean: 0.0, median: 0.0, histogram: Vec::new() };
    }
    let width = bucket_width.max(1);
    let mean = lengths.iter().sum::<usize>() as f64 / lengths.len() as f64;
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let n = sorted.len();
    let median =
        if n % 2 == 1 { sorted[n / 2] as f64 } else { (sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0 };
    let mut histogram: Vec<(usize, usize)> = Vec::new();
    for &l in &sorted {
        let start = l / width * width;
        match histogram.last_mut() {
            Some((s, c)) if *s == start => *c += 1,
            _ => histogram.push((start, 1)),
        }
    }
    TokenStats { mean, median, histogram }
}

/// Samples `k` completions per task and averages per-task accuracy.
///
/// Seeds depend on the task id, not its position, so the report is
/// independent of task order up to the order of `per_task`.
pub fn avg_at_k<P: Policy + ?Sized>(
    policy: &P,
    vocab: &Vocabulary,
    tasks: &[Task],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if tasks.is_empty() {
        return Err(Error::InvalidInput("evaluation needs at least one task".into()));
    }
    if cfg.k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let sampler = cfg.sampler.build(cfg.max_new_tokens, vocab.eos());
    let mut per_task = Vec::with_capacity(tasks.len());
    let mut truncated = 0usize;
    for task in tasks {
        let prompt = render(&task.question, cfg.family, cfg.mode)?;
        let context = encode_prompt(vocab, prompt.rendered())?;
        let base = seed::derive(cfg.seed, &[seed::of_str(&task.id)]);
        let seeds: Vec<u64> = (0..cfg.k as u64).map(|j| seed::derive(base, &[j])).collect();
        let samples = policy.sample_group(&context, &sampler, &seeds)?;
        let mut correct = 0;
        let mut token_counts = Vec::with_capacity(cfg.k);
        for s in &samples {
            token_counts.push(s.tokens.len());
            if s.truncated {
                truncated += 1;
                continue;
            }
            let text = vocab.decode(&s.tokens)?;
            if verify(task, &text) > 0.0 {
                correct += 1;
            }
        }
        let mean_tokens = token_counts.iter().sum::<usize>() as f64 / cfg.k as f64;
        per_task.push(TaskEval { task_id: task.id.clone(), correct, mean_tokens, token_counts });
    }
    let n = per_task.len() as f64;
    let avg = per_task.iter().map(|t| t.correct as f64 / cfg.k as f64).sum::<f64>() / n;
    let mean_tokens = per_task.iter().map(|t| t.mean_tokens).sum::<f64>() / n;
    Ok(EvalReport {
        mode: cfg.mode,
        k: cfg.k,
        avg_at_k: avg,
        mean_tokens,
        truncation_rate: truncated as f64 / (n * cfg.k as f64),
        per_task,
    })
}

/// Evaluates in both modes with their respective presets.
pub fn dual_mode_eval<P: Policy + ?Sized>(
    policy: &P,
    vocab: &Vocabulary,
    tasks: &[Task],
    k: usize,
    max_new_tokens: usize,
    seed: u64,
    family: TemplateFamily,
) -> Result<(EvalReport, EvalReport)> {
    let thinking = EvalConfig { family, ..EvalConfig::thinking(k, max_new_tokens, seed) };
    let free = EvalConfig { family, ..EvalConfig::thinking_free(k, max_new_tokens, seed) };
    Ok((avg_at_k(policy, vocab, tasks, &thinking)?, avg_at_k(policy, vocab, tasks, &free)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{Sample, SamplerConfig, TokenId};
    use crate::tasks::{generate, TaskKind, TaskSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Answers with a uniformly random digit.
    struct UniformDigit<'a>(&'a Vocabulary);

    impl Policy for UniformDigit<'_> {
        fn sample_group(&self, _: &[TokenId], _: &SamplerConfig, seeds: &[u64]) -> Result<Vec<Sample>> {
            Ok(seeds
                .iter()
                .map(|&s| {
                    let d = ChaCha8Rng::seed_from_u64(s).random_range(0..10);
                    let mut tokens = self.0.encode(&format!("\\boxed{{{d}}}")).unwrap();
                    tokens.push(self.0.eos());
                    Sample { logprobs: vec![0.0; tokens.len()], tokens, truncated: false }
                })
                .collect())
        }
    }

    /// Reads the operands back out of the prompt and answers correctly.
    struct Oracle<'a>(&'a Vocabulary);

    impl Policy for Oracle<'_> {
        fn sample_group(&self, ctx: &[TokenId], _: &SamplerConfig, seeds: &[u64]) -> Result<Vec<Sample>> {
            let text = self.0.decode(ctx)?;
            let start = text.find("Compute (").unwrap() + "Compute (".len();
            let expr = &text[start..start + text[start..].find(')').unwrap()];
            let (a, b) = expr.split_once('+').unwrap();
            let ans = (a.parse::<u64>().unwrap() + b.parse::<u64>().unwrap()) % 10;
            let mut tokens = self.0.encode(&format!("</think>\\boxed{{{ans}}}")).unwrap();
            tokens.push(self.0.eos());
            Ok(seeds
                .iter()
                .map(|_| Sample {
                    logprobs: vec![0.0; tokens.len()],
                    tokens: tokens.clone(),
                    truncated: false,
                })
                .collect())
        }
    }

    fn mod_tasks(n: usize) -> Vec<Task> {
        generate(&TaskSpec { kind: TaskKind::ModAdd, count: n, difficulty: 1, seed: 5 }).unwrap()
    }

    #[test]
    fn token_stats_cases() {
        let s = token_stats(&[7, 7, 7], 4);
        assert_eq!((s.mean, s.median), (7.0, 7.0));
        assert_eq!(s.histogram, vec![(4, 3)]);
        let s = token_stats(&[2, 4, 6], 4);
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.histogram, vec![(0, 1), (4, 2)]);
        assert_eq!(token_stats(&[1, 2, 3, 10], 100).median, 2.5);
        assert_eq!(token_stats(&[], 4).histogram, vec![]);
    }

    #[test]
    fn uniform_policy_is_near_chance() {
        let vocab = Vocabulary::builtin();
        let cfg = EvalConfig::thinking_free(32, 8, 0);
        let r = avg_at_k(&UniformDigit(&vocab), &vocab, &mod_tasks(50), &cfg).unwrap();
        let sigma = (0.1f64 * 0.9 / 1600.0).sqrt();
        assert!((r.avg_at_k - 0.1).abs() <= 3.0 * sigma, "{}", r.avg_at_k);
    }

    #[test]
    fn oracle_policy_is_perfect() {
        let vocab = Vocabulary::builtin();
        let (t, f) =
            dual_mode_eval(&Oracle(&vocab), &vocab, &mod_tasks(20), 4, 8, 1, TemplateFamily::DeepSeekStyle)
                .unwrap();
        assert_eq!(t.avg_at_k, 1.0);
        assert_eq!(f.avg_at_k, 1.0);
        assert_eq!(t.mode, PromptMode::Thinking);
        assert_eq!(f.mode, PromptMode::ThinkingFree);
    }

    #[test]
    fn permutation_invariant() {
        let vocab = Vocabulary::builtin();
        let cfg = EvalConfig::thinking(8, 8, 3);
        let mut tasks = mod_tasks(30);
        let a = avg_at_k(&UniformDigit(&vocab), &vocab, &tasks, &cfg).unwrap();
        tasks.reverse();
        let b = avg_at_k(&UniformDigit(&vocab), &vocab, &tasks, &cfg).unwrap();
        assert_eq!(a.avg_at_k, b.avg_at_k);
    }

    #[test]
    fn k_one_is_a_single_sample_run() {
        let vocab = Vocabulary::builtin();
        let policy = UniformDigit(&vocab);
        let tasks = mod_tasks(40);
        let cfg = EvalConfig::thinking_free(1, 8, 11);
        let report = avg_at_k(&policy, &vocab, &tasks, &cfg).unwrap();
        let sampler = cfg.sampler.build(cfg.max_new_tokens, vocab.eos());
        let mut correct = 0.0;
        for task in &tasks {
            let ctx = encode_prompt(&vocab, render(&task.question, cfg.family, cfg.mode).unwrap().rendered())
                .unwrap();
            let s = seed::derive(seed::derive(cfg.seed, &[seed::of_str(&task.id)]), &[0]);
            let sample = policy.sample_group(&ctx, &sampler, &[s]).unwrap().remove(0);
            correct += verify(task, &vocab.decode(&sample.tokens).unwrap());
        }
        assert_eq!(report.avg_at_k.to_bits(), (correct / tasks.len() as f64).to_bits());
    }

    #[test]
    fn spread_shrinks_with_k() {
        let vocab = Vocabulary::builtin();
        let tasks = mod_tasks(10);
        let spread = |k: usize| {
            let xs: Vec<f64> = (0..40)
                .map(|s| {
                    avg_at_k(&UniformDigit(&vocab), &vocab, &tasks, &EvalConfig::thinking_free(k, 8, s))
                        .unwrap()
                        .avg_at_k
                })
                .collect();
            let m = xs.iter().sum::<f64>() / xs.len() as f64;
            xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64
        };
        let v: Vec<f64> = [1, 4, 16].map(spread).to_vec();
        assert!(v[0] > v[1] && v[1] > v[2], "{v:?}");
    }

    #[test]
    fn persisted_stats_match() {
        let vocab = Vocabulary::builtin();
        let cfg = EvalConfig::thinking(4, 8, 3);
        let r = avg_at_k(&UniformDigit(&vocab), &vocab, &mod_tasks(10), &cfg).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: EvalReport = serde_json::from_str(&json).unwrap();
        let lens = |r: &EvalReport| -> Vec<usize> {
            r.per_task.iter().flat_map(|t| t.token_counts.clone()).collect()
        };
        assert_eq!(token_stats(&lens(&r), 4), token_stats(&lens(&back), 4));
        assert_eq!(back, r);
    }

    #[test]
    fn untrained_policy_is_evaluable_in_both_modes() {
        let vocab = Vocabulary::builtin();
        let params = crate::policy::PolicyParams::init(
            crate::policy::ModelConfig {
                vocab_size: vocab.len(),
                d_model: 8,
                n_heads: 2,
                n_blocks: 1,
                d_ff: 8,
                context: 96,
            },
            0,
        )
        .unwrap();
        let (t, f) =
            dual_mode_eval(&params, &vocab, &mod_tasks(3), 2, 6, 0, TemplateFamily::QwenStyle).unwrap();
        assert_eq!(t.avg_at_k, 0.0);
        assert_eq!(f.avg_at_k, 0.0);
    }
}
