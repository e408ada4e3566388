//! Generates a few tasks of every kind and scores candidate responses.

use tfpi::tasks::{generate, verify, TaskKind, TaskSpec};

fn main() -> tfpi::Result<()> {
    for kind in [TaskKind::ModAdd, TaskKind::SortDigits, TaskKind::ParenBalance] {
        let tasks = generate(&TaskSpec { kind, count: 3, difficulty: 2, seed: 7 })?;
        for task in &tasks {
            let right = format!("<think>\n</think>\n\n\\boxed{{{}}}", task.ground_truth);
            let unboxed = task.ground_truth.clone();
            println!(
                "{:<18} {:<40} truth {:<8} boxed {} unboxed {}",
                task.id,
                task.question,
                task.ground_truth,
                verify(task, &right),
                verify(task, &unboxed)
            );
        }
    }
    Ok(())
}
