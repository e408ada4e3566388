//! Evaluates a freshly warm-started policy with avg@k in both prompt modes.

use tfpi::eval::dual_mode_eval;
use tfpi::policy::{ModelConfig, Vocabulary};
use tfpi::store::RunConfig;
use tfpi::tasks::generate;
use tfpi::warmstart::initial_policy;

fn main() -> tfpi::Result<()> {
    let vocab = Vocabulary::builtin();
    let mut cfg = RunConfig::default();
    cfg.model = ModelConfig { d_model: 16, n_heads: 2, n_blocks: 1, d_ff: 32, ..cfg.model };
    cfg.warm_start.steps = 200;
    cfg.eval_tasks.count = 10;
    let tasks = generate(&cfg.tasks)?;
    let (params, _) =
        initial_policy(cfg.model, cfg.warm_start.seed, &vocab, &tasks, cfg.train.family, &cfg.warm_start)?;
    let (thinking, free) =
        dual_mode_eval(&params, &vocab, &generate(&cfg.eval_tasks)?, 8, 128, 1, cfg.train.family)?;
    for r in [thinking, free] {
        println!(
            "{:<13} avg@{} {:.3}, {:.1} tokens per response, truncation {:.2}",
            r.mode.as_str(),
            r.k,
            r.avg_at_k,
            r.mean_tokens,
            r.truncation_rate
        );
    }
    Ok(())
}
