//! Verification-step ratios, per-layer update alignment and a PCA of a
//! short checkpoint trajectory.

use tfpi::analysis::{global_cosine, layer_cosine, pca_project, verification_ratio, CheckpointSet};
use tfpi::policy::{ModelConfig, PolicyParams, Vocabulary};
use tfpi::store::{Preset, RunConfig, Scale};
use tfpi::tasks::generate;
use tfpi::trainer::{run_schedule, Stage};
use tfpi::warmstart::initial_policy;

fn main() -> tfpi::Result<()> {
    let c = verification_ratio("We add 4 and 7.\n\nThe sum is 11.\n\nWait, let me check: 11.");
    println!("steps {:?}\nflags {:?}, ratio {:.3}", c.steps, c.flags, c.ratio);

    let vocab = Vocabulary::builtin();
    let mut cfg = RunConfig::preset(Preset::Tfpi3Stage, Scale::Desk);
    cfg.model = ModelConfig { d_model: 16, n_heads: 2, n_blocks: 1, d_ff: 32, ..cfg.model };
    cfg.warm_start.steps = 300;
    cfg.train.batch_groups = 4;
    cfg.plan.stages = (1..=3).map(|i| Stage { max_new_tokens: 16 + 8 * i, steps: 3 }).collect();
    let tasks = generate(&cfg.tasks)?;
    let (a, _) =
        initial_policy(cfg.model, cfg.warm_start.seed, &vocab, &tasks, cfg.train.family, &cfg.warm_start)?;
    let out = run_schedule(a.clone(), &vocab, &tasks, &cfg.plan, &cfg.train, &mut ())?;
    let reference = &out.params;
    for (i, ckpt) in out.checkpoints.iter().enumerate() {
        let layers = layer_cosine(ckpt, &a, reference)?;
        let head = layers.iter().find(|(name, _)| name == "lm_head").map_or(0.0, |l| l.1);
        println!("B{}: global cosine {:.3}, lm_head {head:.3}", i + 1, global_cosine(ckpt, &a, reference)?);
    }
    let mut entries: Vec<(String, &PolicyParams)> = vec![("A".into(), &a)];
    entries.extend(out.checkpoints.iter().enumerate().map(|(i, p)| (format!("B{}", i + 1), p)));
    let pca = pca_project(&CheckpointSet::from_params(entries)?, 2)?;
    for (label, xy) in &pca.points {
        println!("{label:>3} ({:+.4}, {:+.4})", xy[0], xy[1]);
    }
    println!("explained variance {:?}", pca.explained_variance);
    Ok(())
}
