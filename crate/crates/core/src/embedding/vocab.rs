use std::collections::HashMap;
use std::path::Path;

use super::tokenize::{tokenize, PAD, UNK, URL};
use crate::error::{Error, Result};

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;
pub const URL_ID: usize = 2;

/// Token table shared by both languages. Ids are dense; 0..3 are reserved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 3 || tokens[0] != PAD || tokens[1] != UNK || tokens[2] != URL {
            return Err(Error::data("vocabulary must start with <pad>, <unk>, <url>"));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::data(format!("duplicate vocabulary token `{t}`")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t)).collect()
    }

    /// Tokenizes and maps to ids.
    pub fn encode_text(&self, text: &str) -> Vec<usize> {
        self.ids(&tokenize(text))
    }

    pub fn to_text(&self) -> String {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Config(format!("cannot read vocabulary {}: {e}", path.display()))
        })?;
        Self::from_tokens(text.lines().map(str::to_string).collect())
    }
}

/// Builds the shared vocabulary. Tokens seen at least `min_count` times are
/// kept, ordered by descending frequency then lexicographically.
pub fn build_vocabulary<I, S>(corpus: I, min_count: usize) -> Vocabulary
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut counts: HashMap<String, usize> = HashMap::new();
    for sentence in corpus {
        for tok in tokenize(sentence.as_ref()) {
            *counts.entry(tok).or_default() += 1;
        }
    }
    let mut kept: Vec<(String, usize)> = counts
        .into_iter()
        .filter(|(t, c)| *c >= min_count && t != PAD && t != UNK && t != URL)
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let tokens = [PAD, UNK, URL]
        .into_iter()
        .map(str::to_string)
        .chain(kept.into_iter().map(|(t, _)| t))
        .collect();
    Vocabulary::from_tokens(tokens).expect("reserved tokens are excluded from counts")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_count_filters() {
        let v = build_vocabulary(["a a b"], 2);
        assert!(v.contains("a") && !v.contains("b"));
        assert_eq!(v.id("b"), UNK_ID);
        let v = build_vocabulary(["a a b"], 1);
        assert!(v.contains("a") && v.contains("b"));
    }

    #[test]
    fn ties_break_lexicographically() {
        let v = build_vocabulary(["zeta alpha mid", "mid"], 1);
        assert_eq!(v.id("mid"), 3);
        assert_eq!(v.id("alpha"), 4);
        assert_eq!(v.id("zeta"), 5);
    }

    #[test]
    fn reserved_ids_and_url_mapping() {
        let v = build_vocabulary(["see http://x.y now"], 1);
        assert_eq!(v.token(PAD_ID), Some(PAD));
        assert_eq!(v.encode_text("http://q.r"), vec![URL_ID]);
        assert_eq!(v.len(), 5);
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vocab.txt");
        let v = build_vocabulary(["马 航 mh370 !", "马"], 1);
        v.save(&p).unwrap();
        assert_eq!(Vocabulary::load(&p).unwrap(), v);
    }
}
