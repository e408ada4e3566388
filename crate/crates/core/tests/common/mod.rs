//! A configuration small enough to run the whole pipeline in seconds.

pub const TINY: &str = r#"
preset = "tfpi_plus_rl"

[tasks]
count = 16

[eval_tasks]
count = 3

[model]
d_model = 8
n_heads = 2
n_blocks = 1
d_ff = 16

[warm_start]
steps = 5
batch = 2

[train]
group_size = 4
batch_groups = 2

[plan]
stages = [{ max_new_tokens = 12, steps = 2 }, { max_new_tokens = 16, steps = 1 }]

[followup]
mode = "thinking"
stages = [{ max_new_tokens = 16, steps = 1 }]

[eval]
k = 2
max_new_tokens = 24
"#;
