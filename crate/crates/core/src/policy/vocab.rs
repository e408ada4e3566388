//! Fixed vocabulary with greedy longest-match encoding.
//!
//! Control tokens and a handful of frequent word pieces are single items;
//! every printable ASCII character and newline is also an item, so any text
//! the tasks and templates produce is encodable and `decode(encode(s)) == s`.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenId(pub u32);

impl TokenId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

pub const BOS: &str = "<|bos|>";
pub const EOS: &str = "<|eos|>";
pub const PAD: &str = "<|pad|>";

const CONTROL: &[&str] =
    &[PAD, BOS, EOS, "<think>", "</think>", "<|im_start|>", "<|im_end|>", "<|User|>", "<|Assistant|>"];

const WORDS: &[&str] = &[
    "\n\n",
    "\\boxed{",
    "system",
    "user",
    "assistant",
    "Please",
    " reason",
    " step",
    " by",
    " and",
    " put",
    " your",
    " final",
    " answer",
    " within",
    "Compute",
    " mod",
    " 10",
    "Sort",
    " the",
    " digits",
    " in",
    " ascending",
    " order",
    "Is",
    " string",
    " balanced",
    "We",
    " add",
    " need",
    " to",
    " is",
    " of",
    " sum",
    " last",
    " digit",
    " count",
    " each",
    " bracket",
    "Wait",
    " wait",
    ",",
    " let",
    " me",
    " check",
    " verify",
    "Let",
    "Double-check",
    "Checking",
    "Verifying",
    "The",
    " numbers",
    " are",
    " so",
    " keep",
];

/// Ordered token list plus lookup tables.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    lookup: HashMap<String, TokenId>,
    max_token_len: usize,
    bos: TokenId,
    eos: TokenId,
    pad: TokenId,
}

impl Vocabulary {
    /// The built-in vocabulary used by every policy in this crate.
    pub fn builtin() -> Self {
        let mut tokens: Vec<String> = CONTROL.iter().map(|s| s.to_string()).collect();
        tokens.push("\n".to_string());
        tokens.extend((0x20u8..0x7f).map(|b| char::from(b).to_string()));
        for w in WORDS {
            if !tokens.iter().any(|t| t == w) {
                tokens.push(w.to_string());
            }
        }
        Self::from_tokens(tokens)
    }

    pub fn from_tokens(tokens: Vec<String>) -> Self {
        let lookup: HashMap<String, TokenId> =
            tokens.iter().enumerate().map(|(i, t)| (t.clone(), TokenId(i as u32))).collect();
        let max_token_len = tokens.iter().map(|t| t.len()).max().unwrap_or(1);
        let find = |s: &str| lookup.get(s).copied().unwrap_or(TokenId(0));
        Vocabulary { bos: find(BOS), eos: find(EOS), pad: find(PAD), tokens, lookup, max_token_len }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn bos(&self) -> TokenId {
        self.bos
    }

    pub fn eos(&self) -> TokenId {
        self.eos
    }

    pub fn pad(&self) -> TokenId {
        self.pad
    }

    pub fn token(&self, id: TokenId) -> Option<&str> {
        self.tokens.get(id.index()).map(String::as_str)
    }

    pub fn id(&self, token: &str) -> Option<TokenId> {
        self.lookup.get(token).copied()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Greedy longest-match tokenization.
    pub fn encode(&self, text: &str) -> Result<Vec<TokenId>> {
        let mut out = Vec::with_capacity(text.len());
        let mut pos = 0;
        while pos < text.len() {
            let rest = &text[pos..];
            let mut matched = None;
            let mut len = self.max_token_len.min(rest.len());
            while len > 0 {
                if rest.is_char_boundary(len) {
                    if let Some(&id) = self.lookup.get(&rest[..len]) {
                        matched = Some((id, len));
                        break;
                    }
                }
                len -= 1;
            }
            match matched {
                Some((id, len)) => {
                    out.push(id);
                    pos += len;
                }
                None => {
                    let c = rest.chars().next().unwrap_or('?');
                    return Err(Error::InvalidInput(format!("character {c:?} is not in the vocabulary")));
                }
            }
        }
        Ok(out)
    }

    /// Concatenates token strings, dropping BOS/EOS/PAD.
    pub fn decode(&self, ids: &[TokenId]) -> Result<String> {
        let mut s = String::new();
        for &id in ids {
            if id == self.bos || id == self.eos || id == self.pad {
                continue;
            }
            let tok = self
                .token(id)
                .ok_or_else(|| Error::InvalidInput(format!("token id {} out of range", id.0)))?;
            s.push_str(tok);
        }
        Ok(s)
    }

    pub fn check(&self, ids: &[TokenId]) -> Result<()> {
        match ids.iter().find(|id| id.index() >= self.tokens.len()) {
            Some(id) => Err(Error::InvalidInput(format!(
                "token id {} outside vocabulary of {}",
                id.0,
                self.tokens.len()
            ))),
            None => Ok(()),
        }
    }

    /// Hex digest identifying this exact token list.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        let digest = h.finalize();
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::template::{render, PromptMode, TemplateFamily};
    use proptest::prelude::*;

    #[test]
    fn control_tokens_are_atomic() {
        let v = Vocabulary::builtin();
        for c in CONTROL {
            let ids = v.encode(c).unwrap();
            assert_eq!(ids.len(), 1, "{c}");
        }
    }

    #[test]
    fn templates_encode() {
        let v = Vocabulary::builtin();
        for family in TemplateFamily::ALL {
            for mode in [PromptMode::Thinking, PromptMode::ThinkingFree] {
                let q = render("Compute (3+5) mod 10.", family, mode).unwrap();
                let ids = v.encode(q.rendered()).unwrap();
                assert_eq!(v.decode(&ids).unwrap(), q.rendered());
            }
        }
    }

    #[test]
    fn out_of_vocabulary() {
        let v = Vocabulary::builtin();
        assert!(v.encode("é").is_err());
        assert!(v.check(&[TokenId(100_000)]).is_err());
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let v = Vocabulary::builtin();
        assert_eq!(v.hash(), Vocabulary::builtin().hash());
        let mut toks = v.tokens().to_vec();
        toks.push("extra".into());
        assert_ne!(v.hash(), Vocabulary::from_tokens(toks).hash());
    }

    proptest! {
        #[test]
        fn decode_encode_identity(s in "[ -~\n]{0,80}") {
            let v = Vocabulary::builtin();
            let ids = v.encode(&s).unwrap();
            prop_assert_eq!(v.decode(&ids).unwrap(), s);
        }
    }
}
