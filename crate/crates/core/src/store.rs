//! Run configuration, run-directory layout and line-delimited record files.
//!
//! A run directory looks like this:
//!
//! ```text
//! run/
//!   config.toml          resolved configuration (replay input)
//!   manifest.json        run id, seeds, version, artifact list
//!   tasks.jsonl          training tasks
//!   eval_tasks.jsonl     held-out evaluation tasks
//!   metrics.jsonl        one MetricsRecord per optimizer step
//!   eval_report.jsonl    one EvalRecord per (checkpoint, mode)
//!   analysis.jsonl       one AnalysisRecord per result
//!   checkpoints/stage-N.ckpt
//! ```
//!
//! `stage-0` is the warm-started initial policy; later stages are numbered
//! in schedule order.

use std::fs::{self, File, OpenOptions};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::eval::{EvalConfig, EvalReport};
use crate::objectives::Variant;
use crate::policy::ModelConfig;
use crate::tasks::{read_tasks, write_tasks, Task, TaskSpec};
use crate::template::PromptMode;
use crate::trainer::{MetricsRecord, Stage, StagePlan, TrainConfig};
use crate::warmstart::WarmStartConfig;

/// Named training recipes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// RL in thinking mode at the full length.
    #[value(name = "direct_rl")]
    DirectRl,
    /// RL with thinking-free rollouts at a single short length.
    #[value(name = "thinkingfree_rl")]
    ThinkingfreeRl,
    /// Three thinking-free stages with rising lengths.
    #[value(name = "tfpi_3stage")]
    #[serde(rename = "tfpi_3stage")]
    Tfpi3Stage,
    /// The three-stage schedule followed by thinking-mode RL.
    #[value(name = "tfpi_plus_rl")]
    TfpiPlusRl,
}

impl Preset {
    pub const ALL: [Preset; 4] =
        [Preset::DirectRl, Preset::ThinkingfreeRl, Preset::Tfpi3Stage, Preset::TfpiPlusRl];

    pub fn as_str(self) -> &'static str {
        match self {
            Preset::DirectRl => "direct_rl",
            Preset::ThinkingfreeRl => "thinkingfree_rl",
            Preset::Tfpi3Stage => "tfpi_3stage",
            Preset::TfpiPlusRl => "tfpi_plus_rl",
        }
    }
}

/// `Desk` fits a laptop CPU; `Full` keeps the full-size lengths, step
/// counts and optimizer settings for reference and is not expected to
/// train usefully with the toy policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    pub k: usize,
    pub max_new_tokens: usize,
    pub seed: u64,
}

impl Default for EvalSettings {
    fn default() -> Self {
        EvalSettings { k: 32, max_new_tokens: 256, seed: 1 }
    }
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub preset: Preset,
    pub scale: Scale,
    pub tasks: TaskSpec,
    pub eval_tasks: TaskSpec,
    pub model: ModelConfig,
    pub warm_start: WarmStartConfig,
    pub train: TrainConfig,
    pub plan: StagePlan,
    /// Thinking-mode RL that continues after `plan` (TFPI + RL).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub followup: Option<StagePlan>,
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig::preset(Preset::Tfpi3Stage, Scale::Desk)
    }
}

fn stages(spec: &[(usize, usize)]) -> Vec<Stage> {
    spec.iter().map(|&(max_new_tokens, steps)| Stage { max_new_tokens, steps }).collect()
}

impl RunConfig {
    pub fn preset(preset: Preset, scale: Scale) -> Self {
        let tfpi = matches!(preset, Preset::ThinkingfreeRl | Preset::Tfpi3Stage | Preset::TfpiPlusRl);
        let mut train = TrainConfig::default();
        train.objective.variant = Variant::Dapo;
        train.objective.tfpi_mode = tfpi;
        let mode = if tfpi { PromptMode::ThinkingFree } else { PromptMode::Thinking };
        let mut model = ModelConfig::default();
        let (plan, followup) = match scale {
            Scale::Desk => {
                let three = stages(&[(64, 200), (128, 100), (256, 100)]);
                match preset {
                    Preset::DirectRl => (stages(&[(256, 400)]), None),
                    Preset::ThinkingfreeRl => (stages(&[(24, 60)]), None),
                    Preset::Tfpi3Stage => (three, None),
                    Preset::TfpiPlusRl => (three, Some(stages(&[(256, 100)]))),
                }
            }
            Scale::Full => {
                train.group_size = 8;
                train.batch_groups = 256;
                train.learning_rate = 1e-6;
                train.resample_cap = 4 * 256;
                let three = stages(&[(2048, 1000), (4096, 440), (8192, 440)]);
                let plans = match preset {
                    Preset::DirectRl => (stages(&[(16384, 456)]), None),
                    Preset::ThinkingfreeRl => (stages(&[(4096, 440)]), None),
                    Preset::Tfpi3Stage => (three, None),
                    Preset::TfpiPlusRl => (three, Some(stages(&[(16384, 472)]))),
                };
                let longest = plans.0.iter().chain(plans.1.iter().flatten()).map(|s| s.max_new_tokens).max();
                model.context = longest.unwrap_or(0) + 256;
                plans
            }
        };
        RunConfig {
            preset,
            scale,
            tasks: TaskSpec { difficulty: 2, ..TaskSpec::default() },
            eval_tasks: TaskSpec { count: 50, difficulty: 2, seed: 99, ..TaskSpec::default() },
            model,
            warm_start: WarmStartConfig::default(),
            train,
            plan: StagePlan { mode, stages: plan },
            followup: followup.map(|stages| StagePlan { mode: PromptMode::Thinking, stages }),
            eval: EvalSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.warm_start.validate()?;
        self.train.validate()?;
        self.plan.validate()?;
        if let Some(f) = &self.followup {
            f.validate()?;
        }
        if self.eval.k == 0 || self.eval.max_new_tokens == 0 {
            return Err(Error::Config("eval.k and eval.max_new_tokens must be positive".into()));
        }
        if self.tasks.count == 0 || self.eval_tasks.count == 0 {
            return Err(Error::Config("task counts must be positive".into()));
        }
        Ok(())
    }

    /// Evaluation settings for `mode` with its matching sampler preset.
    pub fn eval_config(&self, mode: PromptMode) -> EvalConfig {
        let e = self.eval;
        let base = match mode {
            PromptMode::Thinking => EvalConfig::thinking(e.k, e.max_new_tokens, e.seed),
            PromptMode::ThinkingFree => EvalConfig::thinking_free(e.k, e.max_new_tokens, e.seed),
        };
        EvalConfig { family: self.train.family, ..base }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Short stable identifier derived from the resolved configuration.
    pub fn run_id(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(format!("{}-{}", self.preset.as_str(), &hex(&digest)[..12]))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn config_error(text: &str, err: toml::de::Error) -> Error {
    let (line, column) = err.span().map_or((0, 0), |s| line_col(text, s.start));
    let message = err.message().trim().to_owned();
    if let Some(rest) = message.strip_prefix("unknown field `") {
        let key = rest.split('`').next().unwrap_or_default().to_owned();
        return Error::UnknownKey { key, line, column };
    }
    Error::ConfigType { message, line, column }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// Parses a configuration file's text.
///
/// Keys that are absent fall back to the named preset (`preset` and `scale`
/// in the file, overridden by `preset_override` when given). Unknown keys
/// and type mismatches are reported with their line and column.
pub fn parse_config_str(text: &str, preset_override: Option<Preset>) -> Result<RunConfig> {
    // Strict pass for precise diagnostics; the values themselves are
    // discarded in favour of the preset-merged document below.
    let checked: RunConfig = toml::from_str(text).map_err(|e| config_error(text, e))?;
    let user: toml::Table = toml::from_str(text).map_err(|e| config_error(text, e))?;
    let preset = preset_override.unwrap_or(if user.contains_key("preset") {
        checked.preset
    } else {
        Preset::Tfpi3Stage
    });
    let scale = if user.contains_key("scale") { checked.scale } else { Scale::Desk };
    let mut merged =
        toml::Table::try_from(RunConfig::preset(preset, scale)).map_err(|e| Error::Config(e.to_string()))?;
    merge(&mut merged, user);
    merged.insert("preset".into(), toml::Value::String(preset.as_str().into()));
    let cfg: RunConfig =
        toml::Value::Table(merged).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path, preset_override: Option<Preset>) -> Result<RunConfig> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_owned()));
    }
    parse_config_str(&fs::read_to_string(path)?, preset_override)
}

/// Appends one JSON object per line, flushing after every record.
#[derive(Debug)]
pub struct JsonlWriter {
    out: BufWriter<File>,
}

impl JsonlWriter {
    /// Truncates any existing file.
    pub fn create(path: &Path) -> Result<Self> {
        Ok(JsonlWriter { out: BufWriter::new(File::create(path)?) })
    }

    pub fn append(path: &Path) -> Result<Self> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(JsonlWriter { out: BufWriter::new(file) })
    }

    pub fn write<T: Serialize>(&mut self, record: &T) -> Result<()> {
        serde_json::to_writer(&mut self.out, record)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

/// Records read from a line-delimited file.
#[derive(Debug, Clone, PartialEq)]
pub struct JsonlRead<T> {
    pub records: Vec<T>,
    /// True if an unterminated, unparsable last line was dropped.
    pub dropped_partial: bool,
}

/// Reads every record. A malformed complete line is an error; an
/// unterminated last line that does not parse is dropped with a warning.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<JsonlRead<T>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_owned()));
    }
    let text = fs::read_to_string(path)?;
    let terminated = text.is_empty() || text.ends_with('\n');
    let lines: Vec<&str> = text.lines().collect();
    let mut records = Vec::with_capacity(lines.len());
    let mut dropped_partial = false;
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => records.push(r),
            Err(_) if !terminated && i + 1 == lines.len() => {
                log::warn!("{}: dropping partial last line {}", path.display(), i + 1);
                dropped_partial = true;
            }
            Err(e) => {
                return Err(Error::Parse { path: path.to_owned(), line: i + 1, message: e.to_string() });
            }
        }
    }
    Ok(JsonlRead { records, dropped_partial })
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>> {
    Ok(read_jsonl(path)?.records)
}

/// One line of eval_report.jsonl.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalRecord {
    pub checkpoint: String,
    pub report: EvalReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub tasks: u64,
    pub eval_tasks: u64,
    /// Used both for parameter initialisation and the warm-start data.
    pub warm_start: u64,
    pub train: u64,
    pub eval: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub run_id: String,
    pub preset: Preset,
    pub scale: Scale,
    pub version: String,
    pub seeds: Seeds,
    pub config: RunConfig,
    /// Paths relative to the run directory, sorted.
    pub artifacts: Vec<String>,
}

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

impl RunManifest {
    pub fn new(config: &RunConfig) -> Result<Self> {
        Ok(RunManifest {
            run_id: config.run_id()?,
            preset: config.preset,
            scale: config.scale,
            version: VERSION.to_owned(),
            seeds: Seeds {
                tasks: config.tasks.seed,
                eval_tasks: config.eval_tasks.seed,
                warm_start: config.warm_start.seed,
                train: config.train.seed,
                eval: config.eval.seed,
            },
            config: config.clone(),
            artifacts: Vec::new(),
        })
    }
}

/// Paths inside one run directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    /// Creates the directory (and `checkpoints/`) if needed.
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root.join("checkpoints"))?;
        Ok(RunDir { root: root.to_owned() })
    }

    pub fn open(root: &Path) -> Result<Self> {
        if !root.is_dir() {
            return Err(Error::MissingFile(root.to_owned()));
        }
        Ok(RunDir { root: root.to_owned() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn tasks(&self) -> PathBuf {
        self.root.join("tasks.jsonl")
    }

    pub fn eval_tasks(&self) -> PathBuf {
        self.root.join("eval_tasks.jsonl")
    }

    pub fn metrics(&self) -> PathBuf {
        self.root.join("metrics.jsonl")
    }

    pub fn eval_report(&self) -> PathBuf {
        self.root.join("eval_report.jsonl")
    }

    pub fn analysis(&self) -> PathBuf {
        self.root.join("analysis.jsonl")
    }

    pub fn checkpoint(&self, stage: usize) -> PathBuf {
        self.root.join("checkpoints").join(format!("stage-{stage}.ckpt"))
    }

    /// Stage checkpoints present on disk, ascending by stage.
    pub fn checkpoints(&self) -> Result<Vec<(usize, PathBuf)>> {
        let dir = self.root.join("checkpoints");
        if !dir.is_dir() {
            return Ok(Vec::new());
        }
        let mut found = Vec::new();
        for entry in fs::read_dir(dir)? {
            let path = entry?.path();
            let stage = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_prefix("stage-")?.strip_suffix(".ckpt")?.parse().ok());
            if let Some(s) = stage {
                found.push((s, path));
            }
        }
        found.sort();
        Ok(found)
    }

    pub fn write_config(&self, cfg: &RunConfig) -> Result<()> {
        fs::write(self.config(), cfg.to_toml()?)?;
        Ok(())
    }

    /// Writes the manifest, listing the artifacts currently on disk.
    pub fn write_manifest(&self, cfg: &RunConfig) -> Result<RunManifest> {
        let mut manifest = RunManifest::new(cfg)?;
        let mut artifacts: Vec<String> = [
            self.config(),
            self.tasks(),
            self.eval_tasks(),
            self.metrics(),
            self.eval_report(),
            self.analysis(),
        ]
        .into_iter()
        .filter(|p| p.exists())
        .chain(self.checkpoints()?.into_iter().map(|(_, p)| p))
        .filter_map(|p| p.strip_prefix(&self.root).ok().map(|r| r.to_string_lossy().replace('\\', "/")))
        .collect();
        artifacts.push("manifest.json".into());
        artifacts.sort();
        manifest.artifacts = artifacts;
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.manifest(), text)?;
        Ok(manifest)
    }

    pub fn read_manifest(&self) -> Result<RunManifest> {
        let path = self.manifest();
        if !path.exists() {
            return Err(Error::MissingFile(path));
        }
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

pub fn save_tasks(path: &Path, tasks: &[Task]) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    write_tasks(&mut out, tasks)?;
    out.flush()?;
    Ok(())
}

pub fn load_tasks(path: &Path) -> Result<Vec<Task>> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_owned()));
    }
    read_tasks(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn preset_expansion() {
        let cfg = parse_config_str("preset = \"tfpi_3stage\"\n", None).unwrap();
        assert_eq!(cfg.plan.mode, PromptMode::ThinkingFree);
        assert!(cfg.train.objective.tfpi_mode);
        let lens: Vec<usize> = cfg.plan.stages.iter().map(|s| s.max_new_tokens).collect();
        assert_eq!(lens, vec![64, 128, 256]);
        assert_eq!(cfg.plan.total_steps(), 400);

        let direct = parse_config_str("", Some(Preset::DirectRl)).unwrap();
        assert_eq!(direct.plan.mode, PromptMode::Thinking);
        assert!(!direct.train.objective.tfpi_mode);
        assert_eq!(direct.plan.stages.len(), 1);

        let plus = RunConfig::preset(Preset::TfpiPlusRl, Scale::Desk);
        assert_eq!(plus.followup.unwrap().mode, PromptMode::Thinking);
    }

    #[test]
    fn full_scale_preset() {
        let cfg = parse_config_str("preset = \"tfpi_plus_rl\"\nscale = \"full\"\n", None).unwrap();
        assert_eq!(cfg.train.batch_groups, 256);
        assert_eq!(cfg.train.learning_rate, 1e-6);
        assert_eq!(cfg.train.group_size, 8);
        let s: Vec<(usize, usize)> = cfg.plan.stages.iter().map(|s| (s.max_new_tokens, s.steps)).collect();
        assert_eq!(s, vec![(2048, 1000), (4096, 440), (8192, 440)]);
        assert_eq!(cfg.followup.unwrap().stages, vec![Stage { max_new_tokens: 16384, steps: 472 }]);
    }

    #[test]
    fn file_values_override_the_preset() {
        let text = "preset = \"direct_rl\"\n\n[train]\nseed = 42\n\n[plan]\nstages = [{ max_new_tokens = 24, steps = 3 }]\n";
        let cfg = parse_config_str(text, None).unwrap();
        assert_eq!(cfg.train.seed, 42);
        assert_eq!(cfg.train.group_size, 8);
        assert_eq!(cfg.plan.mode, PromptMode::Thinking);
        assert_eq!(cfg.plan.stages, vec![Stage { max_new_tokens: 24, steps: 3 }]);
    }

    #[test]
    fn unknown_key_names_the_key() {
        let text = "preset = \"direct_rl\"\n[train]\nlearning_rat = 0.1\n";
        match parse_config_str(text, None) {
            Err(Error::UnknownKey { key, line, column }) => {
                assert_eq!(key, "learning_rat");
                assert_eq!((line, column), (3, 1));
            }
            other => panic!("{other:?}"),
        }
        match parse_config_str("[eval]\nk = \"many\"\n", None) {
            Err(Error::ConfigType { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let missing = parse_config(Path::new("/nonexistent/run.toml"), None);
        assert!(matches!(missing, Err(Error::MissingFile(_))));
    }

    #[test]
    fn config_round_trips() {
        for preset in Preset::ALL {
            for scale in [Scale::Desk, Scale::Full] {
                let cfg = RunConfig::preset(preset, scale);
                let back = parse_config_str(&cfg.to_toml().unwrap(), None).unwrap();
                assert_eq!(back, cfg, "{preset:?} {scale:?}");
            }
        }
    }

    fn record(step: u64) -> MetricsRecord {
        MetricsRecord {
            step,
            stage_index: 1,
            mean_reward: 0.25,
            objective_value: if step % 2 == 0 { None } else { Some(-0.5) },
            mean_rollout_tokens: 17.5,
            dropped_group_count: 3,
            truncation_rate: 0.0,
            wall_clock_ms: 0,
        }
    }

    #[test]
    fn metrics_round_trip_and_partial_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.jsonl");
        let mut w = JsonlWriter::create(&path).unwrap();
        for s in 1..=5 {
            w.write(&record(s)).unwrap();
        }
        drop(w);
        let back = read_metrics(&path).unwrap();
        assert_eq!(back, (1..=5).map(record).collect::<Vec<_>>());

        let text = fs::read_to_string(&path).unwrap();
        let cut = text.len() - 20;
        fs::write(&path, &text[..cut]).unwrap();
        let read: JsonlRead<MetricsRecord> = read_jsonl(&path).unwrap();
        assert_eq!(read.records.len(), 4);
        assert!(read.dropped_partial);

        fs::write(&path, format!("{{\"step\": oops}}\n{text}")).unwrap();
        match read_jsonl::<MetricsRecord>(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn metrics_schema_golden() {
        let line = serde_json::to_string(&record(1)).unwrap();
        assert_eq!(
            line,
            "{\"step\":1,\"stage_index\":1,\"mean_reward\":0.25,\"objective_value\":-0.5,\
             \"mean_rollout_tokens\":17.5,\"dropped_group_count\":3,\"truncation_rate\":0.0,\"wall_clock_ms\":0}"
        );
        assert!(serde_json::to_string(&record(2)).unwrap().contains("\"objective_value\":null"));
    }

    #[test]
    fn run_dir_layout() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = RunDir::create(&tmp.path().join("run")).unwrap();
        fs::write(dir.checkpoint(2), b"x").unwrap();
        fs::write(dir.checkpoint(0), b"x").unwrap();
        fs::write(dir.checkpoint(10), b"x").unwrap();
        let stages: Vec<usize> = dir.checkpoints().unwrap().into_iter().map(|c| c.0).collect();
        assert_eq!(stages, vec![0, 2, 10]);
        let cfg = RunConfig::default();
        dir.write_config(&cfg).unwrap();
        let m = dir.write_manifest(&cfg).unwrap();
        assert_eq!(dir.read_manifest().unwrap(), m);
        assert!(m.artifacts.contains(&"checkpoints/stage-10.ckpt".to_string()));
        assert!(m.artifacts.contains(&"config.toml".to_string()));
        assert_eq!(m.run_id, cfg.run_id().unwrap());
        assert!(m.version.starts_with('v'));
        assert_eq!(parse_config(&dir.config(), None).unwrap(), cfg);
    }
}
