use std::sync::OnceLock;

use regex::Regex;

pub const PAD: &str = "<pad>";
pub const UNK: &str = "<unk>";
pub const URL: &str = "<url>";

fn url_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)(?:https?://|www\.)\S+").expect("valid url regex"))
}

pub(crate) fn is_cjk(c: char) -> bool {
    matches!(c as u32,
        0x3040..=0x30FF      // kana
        | 0x3400..=0x4DBF    // ext A
        | 0x4E00..=0x9FFF    // unified ideographs
        | 0xAC00..=0xD7AF    // hangul syllables
        | 0xF900..=0xFAFF    // compatibility ideographs
        | 0x20000..=0x2FA1F)
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(c as u32,
            0x2000..=0x206F      // general punctuation
            | 0x3000..=0x303F    // CJK symbols and punctuation
            | 0xFE30..=0xFE4F
            | 0xFF01..=0xFF0F
            | 0xFF1A..=0xFF20
            | 0xFF3B..=0xFF40
            | 0xFF5B..=0xFF65)
}

/// Splits text into tokens shared by both languages.
///
/// URLs collapse to [`URL`], punctuation becomes standalone tokens,
/// Latin/digit runs are lowercased words, and CJK text splits per character.
/// Text with no tokens yields a single [`UNK`].
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut last = 0;
    for m in url_pattern().find_iter(text) {
        split_plain(&text[last..m.start()], &mut tokens);
        tokens.push(URL.to_string());
        last = m.end();
    }
    split_plain(&text[last..], &mut tokens);
    if tokens.is_empty() {
        tokens.push(UNK.to_string());
    }
    tokens
}

fn split_plain(text: &str, out: &mut Vec<String>) {
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<String>| {
        if !word.is_empty() {
            out.push(std::mem::take(word));
        }
    };
    for c in text.chars() {
        if c.is_whitespace() {
            flush(&mut word, out);
        } else if is_cjk(c) || is_punct(c) {
            flush(&mut word, out);
            out.push(c.to_string());
        } else if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
        } else {
            // symbols, emoji
            flush(&mut word, out);
            out.push(c.to_string());
        }
    }
    flush(&mut word, out);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_urls_and_splits_punctuation() {
        assert_eq!(tokenize("Look http://a.b/c !"), vec!["look", URL, "!"]);
        assert_eq!(tokenize("see www.x.org/p, ok"), vec!["see", URL, "ok"]);
    }

    #[test]
    fn cjk_splits_per_character() {
        assert_eq!(tokenize("马航 MH370"), vec!["马", "航", "mh370"]);
        assert_eq!(tokenize("你好，世界"), vec!["你", "好", "，", "世", "界"]);
    }

    #[test]
    fn empty_input_is_unknown() {
        assert_eq!(tokenize(""), vec![UNK]);
        assert_eq!(tokenize("   "), vec![UNK]);
    }

    #[test]
    fn latin_words_lowercased_with_attached_punctuation_split() {
        assert_eq!(tokenize("Fake!! Photo."), vec!["fake", "!", "!", "photo", "."]);
    }
}
