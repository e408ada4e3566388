//! Renders one question in both prompt modes for both template families.

use tfpi::template::{render_thinking, split_answer, thinking_free, TemplateFamily};

fn main() -> tfpi::Result<()> {
    for family in TemplateFamily::ALL {
        let x = render_thinking("Compute (3+4) mod 10.", family)?;
        let x_free = thinking_free(&x)?;
        println!("{family:?} thinking:\n{}\n", x.rendered());
        println!("{family:?} thinking-free:\n{}\n", x_free.rendered());
        assert!(thinking_free(&x_free).is_err());
    }
    let (thinking, answer) = split_answer("<think>\nThe sum is 7.\n</think>\n\n\\boxed{7}");
    println!("thinking part {thinking:?}, answer part {answer:?}");
    Ok(())
}
