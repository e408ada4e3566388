//! The four run-directory commands behind the `tfpi` binary.

use std::path::Path;

use serde_json::json;

use crate::analysis::{layer_cosine, pca_project, response_profile, AnalysisRecord, CheckpointSet};
use crate::error::{Error, Result};
use crate::eval::dual_mode_eval;
use crate::policy::{Adam, Checkpoint, PolicyParams, Vocabulary};
use crate::store::{load_tasks, save_tasks, EvalRecord, JsonlWriter, RunConfig, RunDir};
use crate::tasks::{generate, Task};
use crate::trainer::{run_plan, MetricsRecord, StepObserver, TrainState};
use crate::warmstart::initial_policy;

/// Writes the configuration snapshot and both task files.
pub fn gen_data(cfg: &RunConfig, dir: &RunDir) -> Result<(Vec<Task>, Vec<Task>)> {
    cfg.validate()?;
    dir.write_config(cfg)?;
    let tasks = generate(&cfg.tasks)?;
    let eval_tasks = generate(&cfg.eval_tasks)?;
    save_tasks(&dir.tasks(), &tasks)?;
    save_tasks(&dir.eval_tasks(), &eval_tasks)?;
    dir.write_manifest(cfg)?;
    Ok((tasks, eval_tasks))
}

fn tasks_or_generate(path: &Path, spec: &crate::tasks::TaskSpec) -> Result<Vec<Task>> {
    if path.exists() {
        load_tasks(path)
    } else {
        let tasks = generate(spec)?;
        save_tasks(path, &tasks)?;
        Ok(tasks)
    }
}

fn load_params(path: &Path, vocab: &Vocabulary) -> Result<PolicyParams> {
    Checkpoint::load(path)?.restore(vocab)
}

/// The warm-started policy, loaded from `stage-0` or trained and saved.
pub fn initial(cfg: &RunConfig, dir: &RunDir, vocab: &Vocabulary, tasks: &[Task]) -> Result<PolicyParams> {
    let path = dir.checkpoint(0);
    if path.exists() {
        return load_params(&path, vocab);
    }
    log::info!("warm-starting the initial policy for {} steps", cfg.warm_start.steps);
    let (params, report) =
        initial_policy(cfg.model, cfg.warm_start.seed, vocab, tasks, cfg.train.family, &cfg.warm_start)?;
    log::info!("warm-start loss {:.3}", report.losses.last().copied().unwrap_or(f64::NAN));
    Checkpoint::snapshot(&params, vocab).save(&path)?;
    Ok(params)
}

struct Recorder<'a> {
    dir: &'a RunDir,
    vocab: &'a Vocabulary,
    metrics: JsonlWriter,
}

impl StepObserver for Recorder<'_> {
    fn on_step(&mut self, record: &MetricsRecord, _: &PolicyParams) -> Result<()> {
        self.metrics.write(record)
    }

    fn on_stage_end(&mut self, stage_index: usize, params: &PolicyParams) -> Result<()> {
        Checkpoint::snapshot(params, self.vocab).save(&self.dir.checkpoint(stage_index))
    }
}

/// Outcome of [`train`].
#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub initial: PolicyParams,
    pub params: PolicyParams,
    pub metrics: Vec<MetricsRecord>,
}

/// Runs the configured plan (and follow-up) from the stage-0 policy,
/// writing metrics.jsonl and one checkpoint per stage.
pub fn train(cfg: &RunConfig, dir: &RunDir) -> Result<TrainSummary> {
    cfg.validate()?;
    dir.write_config(cfg)?;
    let vocab = Vocabulary::builtin();
    let tasks = tasks_or_generate(&dir.tasks(), &cfg.tasks)?;
    tasks_or_generate(&dir.eval_tasks(), &cfg.eval_tasks)?;
    let initial = initial(cfg, dir, &vocab, &tasks)?;
    let mut recorder = Recorder { dir, vocab: &vocab, metrics: JsonlWriter::create(&dir.metrics())? };
    let mut state = TrainState::new(initial.clone(), cfg.train.adam);
    let (mut metrics, _) = run_plan(&mut state, &vocab, &tasks, &cfg.plan, &cfg.train, 1, &mut recorder)?;
    if let Some(followup) = &cfg.followup {
        let mut rl = cfg.train.clone();
        rl.objective.tfpi_mode = false;
        state.optimizer = Adam::new(state.params.len(), rl.adam);
        let first = cfg.plan.stages.len() + 1;
        metrics.extend(run_plan(&mut state, &vocab, &tasks, followup, &rl, first, &mut recorder)?.0);
    }
    dir.write_manifest(cfg)?;
    Ok(TrainSummary { initial, params: state.params, metrics })
}

/// Evaluates every checkpoint in both modes into eval_report.jsonl.
pub fn eval(cfg: &RunConfig, dir: &RunDir) -> Result<Vec<EvalRecord>> {
    cfg.validate()?;
    let vocab = Vocabulary::builtin();
    let tasks = tasks_or_generate(&dir.eval_tasks(), &cfg.eval_tasks)?;
    let checkpoints = dir.checkpoints()?;
    if checkpoints.is_empty() {
        return Err(Error::MissingFile(dir.checkpoint(0)));
    }
    let mut out = JsonlWriter::create(&dir.eval_report())?;
    let mut records = Vec::new();
    for (stage, path) in checkpoints {
        let params = load_params(&path, &vocab)?;
        let e = cfg.eval;
        let (thinking, free) =
            dual_mode_eval(&params, &vocab, &tasks, e.k, e.max_new_tokens, e.seed, cfg.train.family)?;
        log::info!(
            "stage-{stage}: thinking {:.3} ({:.1} tokens), thinking-free {:.3} ({:.1} tokens)",
            thinking.avg_at_k,
            thinking.mean_tokens,
            free.avg_at_k,
            free.mean_tokens
        );
        for report in [thinking, free] {
            let record = EvalRecord { checkpoint: format!("stage-{stage}"), report };
            out.write(&record)?;
            records.push(record);
        }
    }
    dir.write_manifest(cfg)?;
    Ok(records)
}

/// Parameter-space and behavioural analyses of the run's checkpoints.
///
/// `reference` is the direction the updates are compared against (typically
/// a Direct RL final checkpoint); it defaults to this run's last stage.
/// Responses are profiled on the evaluation tasks with at most 8 samples
/// each.
pub fn analyze(cfg: &RunConfig, dir: &RunDir, reference: Option<&Path>) -> Result<Vec<AnalysisRecord>> {
    cfg.validate()?;
    let vocab = Vocabulary::builtin();
    let tasks = tasks_or_generate(&dir.eval_tasks(), &cfg.eval_tasks)?;
    let mut checkpoints = Vec::new();
    for (stage, path) in dir.checkpoints()? {
        checkpoints.push((format!("stage-{stage}"), load_params(&path, &vocab)?));
    }
    let Some((_, initial)) = checkpoints.first().filter(|(l, _)| l == "stage-0") else {
        return Err(Error::MissingFile(dir.checkpoint(0)));
    };
    let external = reference.map(|p| load_params(p, &vocab)).transpose()?;
    let reference = match &external {
        Some(c) => c.clone(),
        None => checkpoints.last().expect("non-empty").1.clone(),
    };
    let mut records = Vec::new();
    for (label, params) in checkpoints.iter().skip(1) {
        let layers = layer_cosine(params, initial, &reference)?;
        let values: serde_json::Map<String, serde_json::Value> =
            layers.into_iter().map(|(name, c)| (name, json!(c))).collect();
        records.push(AnalysisRecord {
            kind: "layer_cosine".into(),
            label: label.clone(),
            values: values.into(),
        });
    }
    let mut entries: Vec<(String, &PolicyParams)> = checkpoints.iter().map(|(l, p)| (l.clone(), p)).collect();
    if let Some(c) = &external {
        entries.push(("C".into(), c));
    }
    if entries.len() >= 3 {
        let pca = pca_project(&CheckpointSet::from_params(entries)?, 2)?;
        for (label, xy) in pca.points {
            records.push(AnalysisRecord {
                kind: "pca".into(),
                label,
                values: json!({ "x": xy[0], "y": xy[1] }),
            });
        }
        records.push(AnalysisRecord {
            kind: "pca_explained_variance".into(),
            label: "all".into(),
            values: json!(pca.explained_variance),
        });
    } else {
        log::warn!("PCA needs at least 3 checkpoints; skipping");
    }
    let k = cfg.eval.k.min(8);
    for (label, params) in &checkpoints {
        let profile = response_profile(
            params,
            &vocab,
            &tasks,
            k,
            cfg.eval.max_new_tokens,
            cfg.eval.seed,
            cfg.train.family,
        )?;
        records.push(AnalysisRecord {
            kind: "response_profile".into(),
            label: label.clone(),
            values: json!(profile),
        });
    }
    let mut out = JsonlWriter::create(&dir.analysis())?;
    for r in &records {
        out.write(r)?;
    }
    dir.write_manifest(cfg)?;
    Ok(records)
}
