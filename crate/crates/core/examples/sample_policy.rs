//! Initialises a desk-size policy, samples from it and scores the samples
//! with exact log-probabilities.

use tfpi::policy::{sequence_logprob, ModelConfig, Policy, PolicyParams, SamplerPreset, Vocabulary};
use tfpi::template::{render, PromptMode, TemplateFamily};
use tfpi::warmstart::encode_prompt;

fn main() -> tfpi::Result<()> {
    let vocab = Vocabulary::builtin();
    let params = PolicyParams::init(ModelConfig::desk(vocab.len()), 0)?;
    println!("{} parameters in {} layers", params.len(), params.layers().len());
    let prompt = render("Compute (12+35) mod 10.", TemplateFamily::QwenStyle, PromptMode::ThinkingFree)?;
    let context = encode_prompt(&vocab, prompt.rendered())?;
    let sampler = SamplerPreset::Train.build(16, vocab.eos());
    for s in params.sample_group(&context, &sampler, &[1, 2, 3])? {
        let (total, _) = sequence_logprob(&params, &context, &s.tokens)?;
        let recorded: f64 = s.logprobs.iter().sum();
        println!(
            "{:?} truncated={} log p = {total:.4} (recorded {recorded:.4})",
            vocab.decode(&s.tokens)?,
            s.truncated
        );
    }
    Ok(())
}
