//! Behavioural and parameter-space analyses of trained checkpoints:
//! verification-step ratios, answer-length decomposition, per-layer update
//! alignment and PCA of checkpoint trajectories.

use std::collections::HashSet;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::{Policy, PolicyParams, SamplerPreset, Vocabulary};
use crate::seed;
use crate::tasks::Task;
use crate::template::{render, split_answer, PromptMode, TemplateFamily};
use crate::warmstart::encode_prompt;

/// Phrases that mark a reasoning step as verification. `"wait"` is matched
/// as a whole word, the rest as substrings; all case-insensitive.
pub const VERIFICATION_PHRASES: &[&str] =
    &["wait", "let me verify", "let me check", "checking", "verifying", "double-check"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepClassification {
    pub steps: Vec<String>,
    pub flags: Vec<bool>,
    pub ratio: f64,
}

fn contains_word(haystack: &str, word: &str) -> bool {
    let boundary = |c: Option<char>| c.is_none_or(|c| !c.is_alphanumeric());
    haystack.match_indices(word).any(|(i, _)| {
        boundary(haystack[..i].chars().next_back()) && boundary(haystack[i + word.len()..].chars().next())
    })
}

fn is_verification(step: &str) -> bool {
    let lower = step.to_lowercase();
    VERIFICATION_PHRASES.iter().any(
        |&p| {
            if p == "wait" {
                contains_word(&lower, p)
            } else {
                lower.contains(p)
            }
        },
    )
}

/// Splits `text` on blank-line delimiters and flags verification steps.
/// Empty text has no steps and ratio 0.
pub fn verification_ratio(text: &str) -> StepClassification {
    if text.is_empty() {
        return StepClassification { steps: Vec::new(), flags: Vec::new(), ratio: 0.0 };
    }
    let steps: Vec<String> = text.split("\n\n").map(str::to_owned).collect();
    let flags: Vec<bool> = steps.iter().map(|s| is_verification(s)).collect();
    let ratio = flags.iter().filter(|&&f| f).count() as f64 / steps.len() as f64;
    StepClassification { steps, flags, ratio }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnswerRatio {
    pub answer_tokens: usize,
    pub total_tokens: usize,
    /// `answer_tokens / total_tokens`, 0 for an empty response.
    pub ratio: f64,
}

/// Token counts of the answer span and of the whole response.
pub fn answer_ratio(vocab: &Vocabulary, text: &str) -> Result<AnswerRatio> {
    let (thinking, answer) = split_answer(text);
    let answer_tokens = vocab.encode(answer)?.len();
    let total_tokens = vocab.encode(thinking)?.len() + answer_tokens;
    let ratio = if total_tokens == 0 { 0.0 } else { answer_tokens as f64 / total_tokens as f64 };
    Ok(AnswerRatio { answer_tokens, total_tokens, ratio })
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

fn delta(x: &[f64], base: &[f64]) -> Vec<f64> {
    x.iter().zip(base).map(|(a, b)| a - b).collect()
}

/// Per layer, the cosine between `checkpoint − initial` and
/// `reference − initial`. A zero-norm delta gives 0.
pub fn layer_cosine(
    checkpoint: &PolicyParams,
    initial: &PolicyParams,
    reference: &PolicyParams,
) -> Result<Vec<(String, f64)>> {
    if !checkpoint.same_structure(initial) || !reference.same_structure(initial) {
        return Err(Error::InvalidInput("checkpoints have different layer structure".into()));
    }
    Ok(initial
        .layer_views()
        .into_iter()
        .map(|(name, a)| {
            let x = checkpoint.layer(name).expect("same structure");
            let c = reference.layer(name).expect("same structure");
            (name.to_owned(), cosine(&delta(x, a), &delta(c, a)))
        })
        .collect())
}

/// Cosine of the full flattened deltas, for cross-checking [`layer_cosine`].
pub fn global_cosine(
    checkpoint: &PolicyParams,
    initial: &PolicyParams,
    reference: &PolicyParams,
) -> Result<f64> {
    if !checkpoint.same_structure(initial) || !reference.same_structure(initial) {
        return Err(Error::InvalidInput("checkpoints have different layer structure".into()));
    }
    let a = initial.as_slice();
    Ok(cosine(&delta(checkpoint.as_slice(), a), &delta(reference.as_slice(), a)))
}

/// Labelled flattened parameter vectors of equal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointSet {
    labels: Vec<String>,
    vectors: Vec<Vec<f64>>,
}

impl CheckpointSet {
    pub fn new(entries: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut seen = HashSet::new();
        for (label, _) in &entries {
            if !seen.insert(label.as_str()) {
                return Err(Error::InvalidInput(format!("duplicate checkpoint label {label:?}")));
            }
        }
        if let Some((_, first)) = entries.first() {
            if entries.iter().any(|(_, v)| v.len() != first.len()) {
                return Err(Error::InvalidInput("checkpoint vectors differ in dimension".into()));
            }
        }
        let (labels, vectors) = entries.into_iter().unzip();
        Ok(CheckpointSet { labels, vectors })
    }

    pub fn from_params(entries: Vec<(String, &PolicyParams)>) -> Result<Self> {
        Self::new(entries.into_iter().map(|(l, p)| (l, p.flatten())).collect())
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaProjection {
    /// `(label, coordinates)` in input order.
    pub points: Vec<(String, Vec<f64>)>,
    /// Fraction of total variance per axis, non-increasing.
    pub explained_variance: Vec<f64>,
}

/// Projects the checkpoints onto their top `dims` principal axes.
///
/// Uses the eigendecomposition of the centred Gram matrix, which is tiny
/// compared with the parameter dimension. Each axis is oriented so the last
/// checkpoint has a non-negative coordinate.
pub fn pca_project(set: &CheckpointSet, dims: usize) -> Result<PcaProjection> {
    let n = set.len();
    if dims == 0 || n < dims + 1 {
        return Err(Error::InvalidInput(format!(
            "PCA to {dims} dimensions needs at least {} checkpoints",
            dims + 1
        )));
    }
    let p = set.vectors[0].len();
    let mean: Vec<f64> = (0..p).map(|j| set.vectors.iter().map(|v| v[j]).sum::<f64>() / n as f64).collect();
    let centred: Vec<Vec<f64>> = set.vectors.iter().map(|v| delta(v, &mean)).collect();
    let gram =
        DMatrix::<f64>::from_fn(n, n, |i, j| centred[i].iter().zip(&centred[j]).map(|(a, b)| a * b).sum());
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    // Stable sort keeps the solver's order among equal eigenvalues.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let total: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0)).sum();
    let mut coords = vec![vec![0.0; dims]; n];
    let mut explained = Vec::with_capacity(dims);
    for (axis, &k) in order.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[k].max(0.0);
        explained.push(if total > 0.0 { lambda / total } else { 0.0 });
        let u = eig.eigenvectors.column(k);
        let sign = if u[n - 1] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..n {
            coords[i][axis] = sign * u[i] * lambda.sqrt();
        }
    }
    Ok(PcaProjection {
        points: set.labels.iter().cloned().zip(coords).collect(),
        explained_variance: explained,
    })
}

/// Average behaviour of thinking-mode samples from one checkpoint.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseProfile {
    pub samples: usize,
    pub mean_verification_ratio: f64,
    pub mean_answer_tokens: f64,
    pub mean_total_tokens: f64,
    pub mean_answer_ratio: f64,
}

/// Samples `k` thinking-mode responses per task with the thinking
/// evaluation preset and averages their step and length statistics.
pub fn response_profile<P: Policy + ?Sized>(
    policy: &P,
    vocab: &Vocabulary,
    tasks: &[Task],
    k: usize,
    max_new_tokens: usize,
    seed: u64,
    family: TemplateFamily,
) -> Result<ResponseProfile> {
    if tasks.is_empty() || k == 0 {
        return Err(Error::InvalidInput("profiling needs tasks and k ≥ 1".into()));
    }
    let sampler = SamplerPreset::ThinkingEval.build(max_new_tokens, vocab.eos());
    let (mut ver, mut ans, mut tot, mut rat) = (0.0, 0.0, 0.0, 0.0);
    let mut n = 0usize;
    for task in tasks {
        let prompt = render(&task.question, family, PromptMode::Thinking)?;
        let context = encode_prompt(vocab, prompt.rendered())?;
        let base = seed::derive(seed, &[seed::of_str(&task.id)]);
        let seeds: Vec<u64> = (0..k as u64).map(|j| seed::derive(base, &[j])).collect();
        for s in policy.sample_group(&context, &sampler, &seeds)? {
            let body: Vec<_> = s.tokens.into_iter().filter(|&t| t != vocab.eos()).collect();
            let text = vocab.decode(&body)?;
            let (thinking, _) = split_answer(&text);
            ver += verification_ratio(thinking).ratio;
            let a = answer_ratio(vocab, &text)?;
            ans += a.answer_tokens as f64;
            tot += a.total_tokens as f64;
            rat += a.ratio;
            n += 1;
        }
    }
    let n_f = n as f64;
    Ok(ResponseProfile {
        samples: n,
        mean_verification_ratio: ver / n_f,
        mean_answer_tokens: ans / n_f,
        mean_total_tokens: tot / n_f,
        mean_answer_ratio: rat / n_f,
    })
}

/// One line of analysis.jsonl.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisRecord {
    pub kind: String,
    pub label: String,
    pub values: serde_json::Value,
}
