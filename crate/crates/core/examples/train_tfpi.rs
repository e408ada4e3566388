//! Warm-starts a small policy and runs a short TFPI schedule, printing one
//! line per training step.

use tfpi::policy::{ModelConfig, Vocabulary};
use tfpi::store::{Preset, RunConfig, Scale};
use tfpi::tasks::generate;
use tfpi::trainer::{run_schedule, Stage};
use tfpi::warmstart::initial_policy;

fn main() -> tfpi::Result<()> {
    let vocab = Vocabulary::builtin();
    let mut cfg = RunConfig::preset(Preset::Tfpi3Stage, Scale::Desk);
    cfg.model = ModelConfig { d_model: 16, n_heads: 2, n_blocks: 1, d_ff: 32, ..cfg.model };
    cfg.warm_start.steps = 300;
    cfg.train.batch_groups = 4;
    cfg.plan.stages = vec![Stage { max_new_tokens: 24, steps: 4 }, Stage { max_new_tokens: 32, steps: 4 }];
    let tasks = generate(&cfg.tasks)?;
    let (initial, report) =
        initial_policy(cfg.model, cfg.warm_start.seed, &vocab, &tasks, cfg.train.family, &cfg.warm_start)?;
    println!("warm-start loss {:.3} -> {:.3}", report.losses[0], report.losses[report.losses.len() - 1]);
    let out = run_schedule(initial, &vocab, &tasks, &cfg.plan, &cfg.train, &mut ())?;
    for m in &out.metrics {
        let objective = m.objective_value.map_or("skipped".to_string(), |v| format!("{v:+.4}"));
        println!(
            "step {:>2} stage {} reward {:.3} objective {objective} tokens {:.1} dropped {}",
            m.step, m.stage_index, m.mean_reward, m.mean_rollout_tokens, m.dropped_group_count
        );
    }
    println!("{} stage checkpoints", out.checkpoints.len());
    Ok(())
}
