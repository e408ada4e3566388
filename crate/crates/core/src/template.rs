//! Chat templates for thinking and thinking-free prompting.
//!
//! A question is rendered once in thinking mode; the thinking-free variant is
//! obtained by appending an empty think block after the assistant opener, so
//! generation starts directly in the answer section.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// System instruction shared by both template families.
pub const SYSTEM_PROMPT: &str = "Please reason step by step, and put your final answer within \\boxed{}.";

/// Empty thinking block appended by the thinking-free operator.
pub const THINKING_FREE_SUFFIX: &str = "<think>\n\n</think>";

pub const THINK_OPEN: &str = "<think>";
pub const THINK_CLOSE: &str = "</think>";

pub const QWEN_IM_START: &str = "<|im_start|>";
pub const QWEN_IM_END: &str = "<|im_end|>";
pub const DEEPSEEK_USER: &str = "<|User|>";
pub const DEEPSEEK_ASSISTANT: &str = "<|Assistant|>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateFamily {
    QwenStyle,
    DeepSeekStyle,
}

impl TemplateFamily {
    pub const ALL: [TemplateFamily; 2] = [TemplateFamily::QwenStyle, TemplateFamily::DeepSeekStyle];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptMode {
    Thinking,
    ThinkingFree,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::Thinking => "thinking",
            PromptMode::ThinkingFree => "thinking_free",
        }
    }
}

/// A question rendered through a chat template.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedQuery {
    question: String,
    family: TemplateFamily,
    mode: PromptMode,
    rendered: String,
}

impl RenderedQuery {
    pub fn question(&self) -> &str {
        &self.question
    }

    pub fn family(&self) -> TemplateFamily {
        self.family
    }

    pub fn mode(&self) -> PromptMode {
        self.mode
    }

    pub fn rendered(&self) -> &str {
        &self.rendered
    }
}

/// Renders `question` with the thinking-mode template of `family`.
pub fn render_thinking(question: &str, family: TemplateFamily) -> Result<RenderedQuery> {
    if question.is_empty() {
        return Err(Error::InvalidInput("question must be non-empty".into()));
    }
    let rendered = match family {
        TemplateFamily::QwenStyle => format!(
            "{QWEN_IM_START}system\n{SYSTEM_PROMPT}{QWEN_IM_END}\n\
             {QWEN_IM_START}user\n{question}{QWEN_IM_END}\n\
             {QWEN_IM_START}assistant\n"
        ),
        TemplateFamily::DeepSeekStyle => {
            format!("{SYSTEM_PROMPT}{DEEPSEEK_USER}{question}{DEEPSEEK_ASSISTANT}\n")
        }
    };
    Ok(RenderedQuery { question: question.to_owned(), family, mode: PromptMode::Thinking, rendered })
}

/// The thinking-free operator: x' = x + empty think block.
///
/// Mode is taken from the stored field, never sniffed from the text.
pub fn thinking_free(query: &RenderedQuery) -> Result<RenderedQuery> {
    if query.mode == PromptMode::ThinkingFree {
        return Err(Error::Mode("query is already thinking-free".into()));
    }
    Ok(RenderedQuery {
        question: query.question.clone(),
        family: query.family,
        mode: PromptMode::ThinkingFree,
        rendered: format!("{}{THINKING_FREE_SUFFIX}", query.rendered),
    })
}

/// Renders directly in the requested mode.
pub fn render(question: &str, family: TemplateFamily, mode: PromptMode) -> Result<RenderedQuery> {
    let q = render_thinking(question, family)?;
    match mode {
        PromptMode::Thinking => Ok(q),
        PromptMode::ThinkingFree => thinking_free(&q),
    }
}

/// Splits a response at the first `</think>`.
///
/// The thinking part keeps the closing tag. Without a closing tag the whole
/// text is the answer.
pub fn split_answer(response: &str) -> (&str, &str) {
    match response.find(THINK_CLOSE) {
        Some(idx) => response.split_at(idx + THINK_CLOSE.len()),
        None => ("", response),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn qwen_thinking_golden() {
        let q = render_thinking("1+1?", TemplateFamily::QwenStyle).unwrap();
        assert_eq!(
            q.rendered(),
            "<|im_start|>system\nPlease reason step by step, and put your final answer within \\boxed{}.<|im_end|>\n<|im_start|>user\n1+1?<|im_end|>\n<|im_start|>assistant\n"
        );
        assert_eq!(q.mode(), PromptMode::Thinking);
    }

    #[test]
    fn deepseek_thinking_golden() {
        let q = render_thinking("1+1?", TemplateFamily::DeepSeekStyle).unwrap();
        assert_eq!(
            q.rendered(),
            "Please reason step by step, and put your final answer within \\boxed{}.<|User|>1+1?<|Assistant|>\n"
        );
    }

    #[test]
    fn empty_question_rejected() {
        assert!(matches!(render_thinking("", TemplateFamily::QwenStyle), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn thinking_free_appends_suffix() {
        for family in TemplateFamily::ALL {
            let x = render_thinking("1+1?", family).unwrap();
            let xp = thinking_free(&x).unwrap();
            assert_eq!(xp.rendered(), format!("{}<think>\n\n</think>", x.rendered()));
            assert_eq!(xp.question(), x.question());
            assert_eq!(xp.family(), family);
            assert_eq!(xp.mode(), PromptMode::ThinkingFree);
        }
    }

    #[test]
    fn thinking_free_twice_is_mode_error() {
        let x = render_thinking("q", TemplateFamily::QwenStyle).unwrap();
        let xp = thinking_free(&x).unwrap();
        assert!(matches!(thinking_free(&xp), Err(Error::Mode(_))));
    }

    #[test]
    fn tag_like_question_does_not_confuse_mode() {
        let x = render_thinking("what is <think>\n\n</think>", TemplateFamily::QwenStyle).unwrap();
        assert_eq!(x.mode(), PromptMode::Thinking);
        assert!(thinking_free(&x).is_ok());
    }

    #[test]
    fn split_cases() {
        assert_eq!(split_answer("<think>abc</think>xyz"), ("<think>abc</think>", "xyz"));
        assert_eq!(split_answer("xyz"), ("", "xyz"));
        assert_eq!(split_answer(""), ("", ""));
    }

    #[test]
    fn split_uses_first_close_tag() {
        let text = "<think>a</think>b</think>c";
        // Brute force: the split point is the smallest index whose prefix ends with the tag.
        let expected = (0..=text.len())
            .filter(|&i| text.is_char_boundary(i) && text[..i].ends_with(THINK_CLOSE))
            .min()
            .unwrap();
        let (think, ans) = split_answer(text);
        assert_eq!(think.len(), expected);
        assert_eq!((think, ans), ("<think>a</think>", "b</think>c"));
    }

    proptest! {
        #[test]
        fn prefix_property(question in "[ -~]{1,40}", qwen in any::<bool>()) {
            let family = if qwen { TemplateFamily::QwenStyle } else { TemplateFamily::DeepSeekStyle };
            let x = render_thinking(&question, family).unwrap();
            let xp = thinking_free(&x).unwrap();
            prop_assert!(xp.rendered().starts_with(x.rendered()));
            prop_assert_eq!(&xp.rendered()[x.rendered().len()..], THINKING_FREE_SUFFIX);
        }

        #[test]
        fn split_reconcatenates(text in "(<think>|</think>|[a-z \n]){0,12}") {
            let (a, b) = split_answer(&text);
            prop_assert_eq!(format!("{a}{b}"), text);
        }
    }
}
