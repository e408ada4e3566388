//! Group advantages, the dynamic-sampling filter and the GRPO and DAPO
//! objectives on a hand-built batch.

use tfpi::objectives::{
    dapo_dynamic_filter, dapo_objective, group_advantages, grpo_batch_objective, ClipConfig, GroupRollout,
};
use tfpi::policy::TokenId;
use tfpi::template::{render_thinking, TemplateFamily};

fn group(rewards: [f64; 4], lens: [usize; 4], shift: f64) -> tfpi::Result<GroupRollout> {
    Ok(GroupRollout {
        prompt: render_thinking("q", TemplateFamily::QwenStyle)?,
        responses: lens.iter().map(|&n| vec![TokenId(0); n]).collect(),
        rewards: rewards.to_vec(),
        old_logprobs: lens.iter().map(|&n| vec![-1.0 - shift; n]).collect(),
        truncated: vec![false; 4],
    })
}

fn main() -> tfpi::Result<()> {
    println!("advantages of [1,1,0,0]: {:?}", group_advantages(&[1.0, 1.0, 0.0, 0.0])?);
    let batch = vec![
        group([1.0, 0.0, 0.0, 1.0], [3, 5, 2, 4], 0.1)?,
        group([1.0, 1.0, 1.0, 1.0], [2, 2, 2, 2], 0.0)?,
        group([0.0, 1.0, 0.0, 0.0], [6, 1, 3, 2], -0.4)?,
    ];
    let (kept, dropped) = dapo_dynamic_filter(batch.clone());
    println!("dynamic sampling keeps {} groups and drops {dropped}", kept.len());
    let clip = ClipConfig::default();
    let new = |groups: &[GroupRollout]| -> Vec<Vec<Vec<f64>>> {
        groups.iter().map(|g| g.responses.iter().map(|y| vec![-1.0; y.len()]).collect()).collect()
    };
    let grpo = grpo_batch_objective(&batch, &new(&batch), &clip)?;
    let dapo = dapo_objective(&kept, &new(&kept), &clip)?;
    println!("GRPO objective {:.5}, DAPO objective {:.5}", grpo.value, dapo.value);
    println!("DAPO per-token coefficients of the first kept group: {:?}", dapo.coeffs[0]);
    Ok(())
}
