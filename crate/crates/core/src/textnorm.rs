//! Text normalization and word-level tokenization shared by every metric
//! and filter.
//!
//! Tokenization is whitespace based with punctuation detached into
//! single-character tokens. There is no subword splitting and no stemming.

use std::ops::Deref;

use unicode_normalization::UnicodeNormalization;

/// Bangla full stop.
pub const DANDA: char = '\u{0964}';
/// Bangla double danda.
pub const DOUBLE_DANDA: char = '\u{0965}';

/// Characters that end a sentence.
pub const TERMINAL_PUNCTUATION: [char; 4] = [DANDA, '?', '!', '.'];

const ZERO_WIDTH: [char; 5] = ['\u{200B}', '\u{200C}', '\u{200D}', '\u{2060}', '\u{FEFF}'];

const CLOSING_QUOTES: [char; 6] = ['"', '\'', '\u{201D}', '\u{2019}', '\u{00BB}', '\u{203A}'];

/// Returns true for characters split off as their own token.
pub fn is_punctuation(c: char) -> bool {
    matches!(
        c,
        DANDA
            | DOUBLE_DANDA
            | '?'
            | '!'
            | '.'
            | ','
            | ';'
            | ':'
            | '"'
            | '\''
            | '\u{201C}'
            | '\u{201D}'
            | '\u{2018}'
            | '\u{2019}'
            | '\u{00AB}'
            | '\u{00BB}'
            | '('
            | ')'
    )
}

fn is_zero_width(c: char) -> bool {
    ZERO_WIDTH.contains(&c)
}

/// NFC composition, zero-width removal, whitespace collapse and trim.
pub fn normalize(text: &str) -> String {
    let stripped: String = text.chars().filter(|c| !is_zero_width(*c)).collect();
    let composed: String = stripped.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for word in composed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// An ordered list of word tokens.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct TokenSeq {
    tokens: Vec<String>,
}

impl TokenSeq {
    /// Wraps tokens that are already split. Empty strings are dropped.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            tokens: tokens
                .into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }

    /// Tokens joined with single spaces.
    pub fn joined(&self) -> String {
        self.tokens.join(" ")
    }
}

impl AsRef<[String]> for TokenSeq {
    fn as_ref(&self) -> &[String] {
        &self.tokens
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.tokens
    }
}

/// Normalizes, splits on whitespace and detaches punctuation characters.
pub fn tokenize(text: &str) -> TokenSeq {
    let normalized = normalize(text);
    let mut tokens = Vec::new();
    for word in normalized.split(' ') {
        let mut current = String::new();
        for c in word.chars() {
            if is_punctuation(c) {
                if !current.is_empty() {
                    tokens.push(std::mem::take(&mut current));
                }
                tokens.push(c.to_string());
            } else {
                current.push(c);
            }
        }
        if !current.is_empty() {
            tokens.push(current);
        }
    }
    TokenSeq { tokens }
}

/// True iff the last character, ignoring trailing whitespace, zero-width
/// characters and closing quotes, is a sentence terminator.
pub fn has_terminal_punctuation(text: &str) -> bool {
    text.chars()
        .rev()
        .find(|c| !c.is_whitespace() && !is_zero_width(*c) && !CLOSING_QUOTES.contains(c))
        .is_some_and(|c| TERMINAL_PUNCTUATION.contains(&c))
}

/// Rebuilds text from tokens: closing punctuation attaches to the previous
/// token, opening brackets to the next one, and straight quotes alternate
/// between opening and closing.
pub fn detokenize(tokens: &[String]) -> String {
    let mut out = String::new();
    let mut glue_next = false;
    let mut double_open = false;
    let mut single_open = false;
    for token in tokens {
        let mut chars = token.chars();
        let single = match (chars.next(), chars.next()) {
            (Some(c), None) => Some(c),
            _ => None,
        };
        let (attach_left, attach_right) = match single {
            Some(DANDA | DOUBLE_DANDA | '?' | '!' | '.' | ',' | ';' | ':' | ')') => (true, false),
            Some('\u{201D}' | '\u{2019}' | '\u{00BB}') => (true, false),
            Some('(' | '\u{201C}' | '\u{2018}' | '\u{00AB}') => (false, true),
            Some('"') => {
                double_open = !double_open;
                if double_open {
                    (false, true)
                } else {
                    (true, false)
                }
            }
            Some('\'') => {
                single_open = !single_open;
                if single_open {
                    (false, true)
                } else {
                    (true, false)
                }
            }
            _ => (false, false),
        };
        if !out.is_empty() && !attach_left && !glue_next {
            out.push(' ');
        }
        out.push_str(token);
        glue_next = attach_right;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_whitespace() {
        assert_eq!(normalize("  ক   খ "), "ক খ");
        assert_eq!(normalize("ক খ"), "ক খ");
        assert_eq!(normalize("\t\n "), "");
    }

    #[test]
    fn removes_zero_width() {
        assert_eq!(normalize("ক\u{200B}খ\u{FEFF}"), "কখ");
    }

    #[test]
    fn composes_bangla_vowel_signs() {
        // ো (U+09CB) decomposes to ে (U+09C7) + া (U+09BE)
        let decomposed = "ক\u{09C7}\u{09BE}";
        let precomposed = "ক\u{09CB}";
        assert_eq!(normalize(decomposed), normalize(precomposed));
        assert_eq!(normalize(decomposed), precomposed);
        // ৌ (U+09CC) = ে + ৗ (U+09D7)
        assert_eq!(normalize("ক\u{09C7}\u{09D7}"), "ক\u{09CC}");
    }

    #[test]
    fn detaches_danda() {
        assert_eq!(tokenize("আমি যাই।").tokens(), ["আমি", "যাই", "।"]);
        assert!(tokenize("").is_empty());
        assert!(tokenize("   ").is_empty());
    }

    #[test]
    fn detaches_quotes_and_brackets() {
        let toks = tokenize("সে বলল, \"যাও!\" (আজ)");
        assert_eq!(
            toks.tokens(),
            ["সে", "বলল", ",", "\"", "যাও", "!", "\"", "(", "আজ", ")"]
        );
    }

    #[test]
    fn terminal_punctuation() {
        assert!(has_terminal_punctuation("সে এল।"));
        assert!(!has_terminal_punctuation("সে এল"));
        assert!(has_terminal_punctuation("সে বলল, \"যাও!\""));
        assert!(has_terminal_punctuation("কি?  \n"));
        assert!(has_terminal_punctuation("He left."));
        assert!(!has_terminal_punctuation(""));
        assert!(!has_terminal_punctuation("\"\""));
        assert!(!has_terminal_punctuation("তারপর,"));
    }

    #[test]
    fn terminal_punctuation_enumerated_positions() {
        // every terminator, followed by every suffix of closing quotes and
        // whitespace, must be detected; moving it before a word must not
        let suffixes = ["", " ", "\"", "”", "’", "\" ", "”’", " \t"];
        for term in TERMINAL_PUNCTUATION {
            for suffix in suffixes {
                let text = format!("সে এল{term}{suffix}");
                assert!(has_terminal_punctuation(&text), "{text:?}");
                let moved = format!("সে{term} এল{suffix}");
                assert!(!has_terminal_punctuation(&moved), "{moved:?}");
            }
        }
    }

    #[test]
    fn detokenize_inverts_simple_sentences() {
        for text in ["আমি যাই।", "সে বলল, \"যাও!\"", "তুমি (আজ) আসবে?", "a b c."]
        {
            assert_eq!(detokenize(tokenize(text).tokens()), text);
        }
    }
}
