//! Runs gen-data, train, eval and analyze on a tiny configuration inside a
//! temporary run directory and lists what was written.

use tfpi::commands;
use tfpi::store::{parse_config_str, read_metrics, RunDir};

const CONFIG: &str = r#"
preset = "tfpi_plus_rl"

[tasks]
count = 32

[eval_tasks]
count = 4

[model]
d_model = 16
n_heads = 2
n_blocks = 1
d_ff = 32

[warm_start]
steps = 50

[train]
batch_groups = 2

[plan]
stages = [{ max_new_tokens = 16, steps = 2 }, { max_new_tokens = 24, steps = 2 }]

[followup]
mode = "thinking"
stages = [{ max_new_tokens = 32, steps = 2 }]

[eval]
k = 4
max_new_tokens = 48
"#;

fn main() -> tfpi::Result<()> {
    let cfg = parse_config_str(CONFIG, None)?;
    let root = std::env::temp_dir().join(format!("tfpi-example-{}", cfg.run_id()?));
    let dir = RunDir::create(&root)?;
    commands::gen_data(&cfg, &dir)?;
    commands::train(&cfg, &dir)?;
    commands::eval(&cfg, &dir)?;
    commands::analyze(&cfg, &dir, None)?;
    println!("run {} in {}", cfg.run_id()?, root.display());
    for artifact in dir.read_manifest()?.artifacts {
        println!("  {artifact}");
    }
    println!("{} metrics lines", read_metrics(&dir.metrics())?.len());
    std::fs::remove_dir_all(&root)?;
    Ok(())
}
