//! Synthetic second language: each word of a pseudo-English lexicon maps to
//! one CJK glyph. Stands in for a real parallel corpus at desk scale.

use std::collections::HashMap;

use crate::rng::RngState;

const ONSETS: [&str; 16] = [
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "ch", "sh",
];
const NUCLEI: [&str; 6] = ["a", "e", "i", "o", "u", "ai"];
const GLYPH_BASE: u32 = 0x4E00;
const GLYPH_SPAN: u32 = 0x9FFF - 0x4E00;

#[derive(Debug, Clone)]
pub struct CipherLexicon {
    words: Vec<String>,
    glyphs: Vec<char>,
    to_glyph: HashMap<String, char>,
}

impl CipherLexicon {
    /// `n` distinct pseudo-words of two or three syllables, each paired with a
    /// distinct glyph.
    pub fn generate(n: usize, rng: &mut RngState) -> Self {
        let mut seen = std::collections::HashSet::new();
        let mut words = Vec::with_capacity(n);
        while words.len() < n {
            let syllables = 2 + rng.below(2);
            let w: String = (0..syllables)
                .map(|_| format!("{}{}", rng.choose(&ONSETS), rng.choose(&NUCLEI)))
                .collect();
            if seen.insert(w.clone()) {
                words.push(w);
            }
        }
        let mut offsets: Vec<u32> = (0..GLYPH_SPAN).collect();
        rng.shuffle(&mut offsets);
        let glyphs: Vec<char> = offsets[..n]
            .iter()
            .map(|o| char::from_u32(GLYPH_BASE + o).expect("CJK block is valid"))
            .collect();
        let to_glyph = words.iter().cloned().zip(glyphs.iter().copied()).collect();
        Self {
            words,
            glyphs,
            to_glyph,
        }
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn glyph(&self, i: usize) -> char {
        self.glyphs[i]
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    /// Word-by-word substitution; words outside the lexicon pass through.
    pub fn encipher(&self, sentence: &str) -> String {
        let mut out = String::new();
        for w in sentence.split_whitespace() {
            match self.to_glyph.get(w) {
                Some(&g) => out.push(g),
                None => {
                    if !out.is_empty() {
                        out.push(' ');
                    }
                    out.push_str(w);
                    out.push(' ');
                }
            }
        }
        out.trim_end().to_string()
    }

    /// Random sentence of `min_len..=max_len` lexicon words.
    pub fn sentence(&self, min_len: usize, max_len: usize, rng: &mut RngState) -> String {
        let len = min_len + rng.below(max_len - min_len + 1);
        (0..len)
            .map(|_| self.words[rng.below(self.words.len())].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}
