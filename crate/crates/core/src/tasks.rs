//! Synthetic verifiable tasks and the rule-based binary reward.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::template::split_answer;

const BOXED_OPEN: &str = "\\boxed{";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    ModAdd,
    SortDigits,
    ParenBalance,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::ModAdd => "mod_add",
            TaskKind::SortDigits => "sort_digits",
            TaskKind::ParenBalance => "paren_balance",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mod_add" => Ok(TaskKind::ModAdd),
            "sort_digits" => Ok(TaskKind::SortDigits),
            "paren_balance" => Ok(TaskKind::ParenBalance),
            other => Err(Error::InvalidInput(format!("unknown task kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Task {
    pub id: String,
    pub kind: TaskKind,
    pub question: String,
    pub ground_truth: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TaskSpec {
    pub kind: TaskKind,
    pub count: usize,
    /// Operand digit count for `ModAdd`, list length for `SortDigits`,
    /// number of bracket pairs for `ParenBalance`.
    pub difficulty: usize,
    pub seed: u64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        TaskSpec { kind: TaskKind::ModAdd, count: 256, difficulty: 1, seed: 7 }
    }
}

/// Generates `spec.count` tasks, deterministically in `spec.seed`.
pub fn generate(spec: &TaskSpec) -> Result<Vec<Task>> {
    if spec.count == 0 {
        return Err(Error::InvalidInput("task count must be at least 1".into()));
    }
    if spec.difficulty == 0 || spec.difficulty > 9 {
        return Err(Error::InvalidInput(format!("difficulty must be in 1..=9, got {}", spec.difficulty)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let tasks = (0..spec.count)
        .map(|i| {
            let (question, ground_truth) = match spec.kind {
                TaskKind::ModAdd => mod_add(&mut rng, spec.difficulty),
                TaskKind::SortDigits => sort_digits(&mut rng, spec.difficulty),
                TaskKind::ParenBalance => paren_balance(&mut rng, spec.difficulty),
            };
            Task { id: format!("{}-{}-{i}", spec.kind, spec.seed), kind: spec.kind, question, ground_truth }
        })
        .collect();
    Ok(tasks)
}

fn operand(rng: &mut ChaCha8Rng, digits: usize) -> u64 {
    if digits == 1 {
        rng.random_range(0..10)
    } else {
        let lo = 10u64.pow(digits as u32 - 1);
        rng.random_range(lo..lo * 10)
    }
}

fn mod_add(rng: &mut ChaCha8Rng, digits: usize) -> (String, String) {
    let a = operand(rng, digits);
    let b = operand(rng, digits);
    (format!("Compute ({a}+{b}) mod 10."), ((a + b) % 10).to_string())
}

fn sort_digits(rng: &mut ChaCha8Rng, len: usize) -> (String, String) {
    // Digits 1..=9 only, so the sorted answer is a numeral without leading zeros.
    let digits: Vec<u8> = (0..len).map(|_| rng.random_range(1..10u8)).collect();
    let shown: String = digits.iter().map(|d| char::from(b'0' + d)).collect();
    let mut sorted = digits;
    sorted.sort_unstable();
    let answer: String = sorted.iter().map(|d| char::from(b'0' + d)).collect();
    (format!("Sort the digits {shown} in ascending order."), answer)
}

fn paren_balance(rng: &mut ChaCha8Rng, pairs: usize) -> (String, String) {
    let s: String = if rng.random_bool(0.5) {
        // Balanced by construction: random Dyck word.
        let mut out = String::with_capacity(2 * pairs);
        let (mut open, mut close) = (pairs, pairs);
        while open + close > 0 {
            let can_open = open > 0;
            let can_close = close > open;
            if can_open && (!can_close || rng.random_bool(0.5)) {
                out.push('(');
                open -= 1;
            } else {
                out.push(')');
                close -= 1;
            }
        }
        out
    } else {
        (0..2 * pairs).map(|_| if rng.random_bool(0.5) { '(' } else { ')' }).collect()
    };
    let answer = if is_balanced(&s) { "yes" } else { "no" };
    (format!("Is the string {s} balanced?"), answer.to_owned())
}

pub fn is_balanced(s: &str) -> bool {
    let mut depth = 0i64;
    for c in s.chars() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return false;
                }
            }
            _ => {}
        }
    }
    depth == 0
}

/// Content of the last `\boxed{...}` whose braces balance, canonicalized.
pub fn extract_boxed(text: &str) -> Option<String> {
    let mut found = None;
    let mut search_from = 0;
    while let Some(rel) = text[search_from..].find(BOXED_OPEN) {
        let start = search_from + rel + BOXED_OPEN.len();
        if let Some(end) = matching_brace(&text[start..]) {
            found = Some(&text[start..start + end]);
        }
        search_from = start;
    }
    found.map(canonicalize)
}

/// Byte offset of the brace closing an already-open `{`, if any.
fn matching_brace(s: &str) -> Option<usize> {
    let mut depth = 1usize;
    for (i, c) in s.char_indices() {
        match c {
            '{' => depth += 1,
            '}' => {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

/// Trims whitespace, strips leading zeros from pure numerals and lowercases yes/no.
pub fn canonicalize(answer: &str) -> String {
    let t = answer.trim();
    if !t.is_empty() && t.bytes().all(|b| b.is_ascii_digit()) {
        let stripped = t.trim_start_matches('0');
        return if stripped.is_empty() { "0".into() } else { stripped.into() };
    }
    let lower = t.to_ascii_lowercase();
    if lower == "yes" || lower == "no" {
        return lower;
    }
    t.to_owned()
}

/// Operands of a `ModAdd` question, `"Compute (a+b) mod 10."`.
pub fn mod_add_operands(question: &str) -> Option<(u64, u64)> {
    let inner = question.strip_prefix("Compute (")?.split_once(')')?.0;
    let (a, b) = inner.split_once('+')?;
    Some((a.parse().ok()?, b.parse().ok()?))
}

/// Rule-based outcome reward: 1 iff the boxed answer in the answer span matches.
///
/// Depends only on the ground truth and the response text, never on how the
/// prompt was rendered.
pub fn verify(task: &Task, response: &str) -> f64 {
    let (_, answer) = split_answer(response);
    match extract_boxed(answer) {
        Some(got) if got == canonicalize(&task.ground_truth) => 1.0,
        _ => 0.0,
    }
}

pub fn write_tasks<W: Write>(mut w: W, tasks: &[Task]) -> Result<()> {
    for t in tasks {
        serde_json::to_writer(&mut w, t)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_tasks<R: BufRead>(r: R) -> Result<Vec<Task>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn task(gt: &str) -> Task {
        Task { id: "t".into(), kind: TaskKind::ModAdd, question: "q".into(), ground_truth: gt.into() }
    }

    #[test]
    fn operands_round_trip_through_generated_questions() {
        for t in generate(&TaskSpec { count: 20, difficulty: 2, ..Default::default() }).unwrap() {
            let (a, b) = mod_add_operands(&t.question).unwrap();
            assert!((10..100).contains(&a) && (10..100).contains(&b));
            assert_eq!(((a + b) % 10).to_string(), t.ground_truth);
        }
        assert_eq!(mod_add_operands("Sort the digits 312 in ascending order."), None);
        assert_eq!(mod_add_operands("Compute (x+1) mod 10."), None);
    }

    #[test]
    fn mod_add_seed7_fixture() {
        let spec = TaskSpec { kind: TaskKind::ModAdd, count: 1, difficulty: 1, seed: 7 };
        let tasks = generate(&spec).unwrap();
        assert_eq!(tasks.len(), 1);
        let fixture = include_str!("../tests/fixtures/mod_add_seed7.jsonl");
        let stored = read_tasks(fixture.as_bytes()).unwrap();
        assert_eq!(tasks, stored);
        // Independent recomputation of the answer from the question text.
        let q = &tasks[0].question;
        let inner = &q[q.find('(').unwrap() + 1..q.find(')').unwrap()];
        let (a, b) = inner.split_once('+').unwrap();
        let expect = (a.parse::<u64>().unwrap() + b.parse::<u64>().unwrap()) % 10;
        assert_eq!(tasks[0].ground_truth, expect.to_string());
    }

    #[test]
    fn zero_count_rejected() {
        for kind in [TaskKind::ModAdd, TaskKind::SortDigits, TaskKind::ParenBalance] {
            let spec = TaskSpec { kind, count: 0, difficulty: 1, seed: 1 };
            assert!(matches!(generate(&spec), Err(Error::InvalidInput(_))));
        }
    }

    #[test]
    fn unknown_kind_rejected() {
        assert!(matches!("mod_mul".parse::<TaskKind>(), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn generation_is_deterministic() {
        for kind in [TaskKind::ModAdd, TaskKind::SortDigits, TaskKind::ParenBalance] {
            let spec = TaskSpec { kind, count: 50, difficulty: 3, seed: 99 };
            assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        }
    }

    #[test]
    fn ground_truths_are_canonical() {
        for kind in [TaskKind::ModAdd, TaskKind::SortDigits, TaskKind::ParenBalance] {
            let spec = TaskSpec { kind, count: 200, difficulty: 4, seed: 3 };
            for t in generate(&spec).unwrap() {
                assert_eq!(canonicalize(&t.ground_truth), t.ground_truth);
                if kind == TaskKind::SortDigits {
                    let b = t.ground_truth.as_bytes();
                    assert!(b.windows(2).all(|w| w[0] <= w[1]));
                }
            }
        }
    }

    #[test]
    fn boxed_extraction() {
        assert_eq!(extract_boxed("so \\boxed{42}").as_deref(), Some("42"));
        assert_eq!(extract_boxed("no box here"), None);
        assert_eq!(extract_boxed("\\boxed{1"), None);
        assert_eq!(extract_boxed("\\boxed{ {a} }").as_deref(), Some("{a}"));
    }

    #[test]
    fn boxed_last_occurrence() {
        let text = "\\boxed{1} then \\boxed{2}";
        // Oracle: enumerate every balanced match by scanning, keep the last.
        let mut all = Vec::new();
        for (i, _) in text.match_indices(BOXED_OPEN) {
            let rest = &text[i + BOXED_OPEN.len()..];
            if let Some(end) = rest.find('}') {
                all.push(rest[..end].to_string());
            }
        }
        assert_eq!(all, ["1", "2"]);
        assert_eq!(extract_boxed(text), all.last().cloned());
    }

    #[test]
    fn verify_cases() {
        assert_eq!(verify(&task("7"), "so the sum is \\boxed{7}"), 1.0);
        assert_eq!(verify(&task("7"), "\\boxed{07}"), 1.0);
        assert_eq!(verify(&task("7"), "<think>the answer is 7, let me"), 0.0);
        assert_eq!(verify(&task("7"), "<think>\\boxed{7}</think>nothing"), 0.0);
        assert_eq!(verify(&task("yes"), "\\boxed{ YES }"), 1.0);
    }

    #[test]
    fn canonicalizer_two_digit_forms() {
        // Every two-character numeral form agrees with integer parsing.
        for a in 0..10 {
            for b in 0..10 {
                let s = format!("{a}{b}");
                let value = s.parse::<u32>().unwrap();
                assert_eq!(canonicalize(&s), value.to_string());
                let gt = value.to_string();
                assert_eq!(verify(&task(&gt), &format!("\\boxed{{{s}}}")), 1.0);
            }
        }
    }

    #[test]
    fn dataset_round_trip() {
        let tasks = generate(&TaskSpec::default()).unwrap();
        let mut buf = Vec::new();
        write_tasks(&mut buf, &tasks).unwrap();
        assert_eq!(read_tasks(buf.as_slice()).unwrap(), tasks);
    }

    proptest! {
        #[test]
        fn verify_is_binary_and_total(bytes in proptest::collection::vec(any::<u8>(), 0..64)) {
            let text = String::from_utf8_lossy(&bytes);
            let r = verify(&task("3"), &text);
            prop_assert!(r == 0.0 || r == 1.0);
        }
    }
}
