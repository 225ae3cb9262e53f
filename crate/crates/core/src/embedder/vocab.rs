use std::collections::HashMap;

pub const UNK: &str = "<unk>";
pub const EOS: &str = "<eos>";
pub const UNK_ID: u32 = 0;
pub const EOS_ID: u32 = 1;

/// Case-folded, whitespace-split pieces of `text` with leading and trailing
/// punctuation removed. Empty pieces are dropped.
pub fn pieces(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|p| p.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|p| !p.is_empty())
        .map(str::to_string)
        .collect()
}

/// Dense token ids; 0 is `<unk>` and 1 is `<eos>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Vocabulary {
    /// Build from tokens in id order. The first two must be the reserved
    /// tokens; duplicates are rejected.
    pub fn from_tokens(tokens: Vec<String>) -> Result<Self, String> {
        if tokens.len() < 2 || tokens[0] != UNK || tokens[1] != EOS {
            return Err("vocabulary must start with <unk>, <eos>".into());
        }
        let mut ids = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if ids.insert(t.clone(), i as u32).is_some() {
                return Err(format!("duplicate token '{t}'"));
            }
        }
        Ok(Vocabulary { tokens, ids })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn id(&self, token: &str) -> Option<u32> {
        self.ids.get(token).copied()
    }

    /// Token ids of `text`, unknown pieces mapped to `<unk>`, with `<eos>`
    /// appended.
    pub fn tokenize(&self, text: &str) -> Vec<u32> {
        let mut out: Vec<u32> = pieces(text)
            .iter()
            .map(|p| self.id(p).unwrap_or(UNK_ID))
            .collect();
        out.push(EOS_ID);
        out
    }
}

/// Tokens with frequency `>= min_count`, ordered by descending frequency
/// then lexicographically, after the reserved ids.
pub fn build_vocabulary<I, S>(texts: I, min_count: usize) -> Vocabulary
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let min_count = min_count.max(1);
    let mut counts: HashMap<String, usize> = HashMap::new();
    for text in texts {
        for p in pieces(text.as_ref()) {
            *counts.entry(p).or_default() += 1;
        }
    }
    let mut ranked: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_count && t != UNK && t != EOS)
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let tokens = [UNK.to_string(), EOS.to_string()]
        .into_iter()
        .chain(ranked.into_iter().map(|(t, _)| t))
        .collect();
    Vocabulary::from_tokens(tokens).expect("reserved tokens are unique")
}
