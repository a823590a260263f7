//! Tokens, variable names, language tags and utterance tokenization.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

/// Characters stripped from the edges of utterance tokens.
const EDGE_PUNCTUATION: &[char] = &['?', '!', '.', ','];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TokenError {
    #[error("empty token")]
    Empty,
    #[error("token {0:?} contains whitespace")]
    Whitespace(String),
    #[error("bad variable name {0:?}")]
    BadVariableName(String),
    #[error("bad language tag {0:?}")]
    BadLanguageTag(String),
}

/// A word as written plus the form used for matching.
///
/// The matching form is the NFC-normalized, lowercased display form, so two
/// tokens compare equal for matching purposes iff their `norm`s are equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Token {
    display: String,
    norm: String,
}

impl Token {
    pub fn new(display: &str) -> Result<Self, TokenError> {
        if display.is_empty() {
            return Err(TokenError::Empty);
        }
        if display.chars().any(char::is_whitespace) {
            return Err(TokenError::Whitespace(display.to_string()));
        }
        let display: String = display.nfc().collect();
        let norm = display.to_lowercase();
        Ok(Token { display, norm })
    }

    pub fn display(&self) -> &str {
        &self.display
    }

    pub fn norm(&self) -> &str {
        &self.norm
    }

    /// True when the token carries punctuation that utterance tokenization
    /// would strip, so the token could never match spoken input.
    pub fn has_edge_punctuation(&self) -> bool {
        self.norm.trim_matches(EDGE_PUNCTUATION) != self.norm
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.display)
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_' || c == '-'
}

/// Name of a grammar category, written `$$name` in rule files.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct VariableName(String);

impl VariableName {
    pub fn new(name: &str) -> Result<Self, TokenError> {
        if name.is_empty() || !name.chars().all(is_name_char) {
            return Err(TokenError::BadVariableName(name.to_string()));
        }
        Ok(VariableName(name.to_string()))
    }

    /// The category every project starts from.
    pub fn top() -> Self {
        VariableName("top".to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_top(&self) -> bool {
        self.0 == "top"
    }
}

impl fmt::Display for VariableName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "$${}", self.0)
    }
}

impl TryFrom<String> for VariableName {
    type Error = TokenError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        VariableName::new(value.strip_prefix("$$").unwrap_or(&value))
    }
}

impl From<VariableName> for String {
    fn from(value: VariableName) -> Self {
        value.0
    }
}

/// A language (`french`) or sign stream (`gloss`) tag as used in `Target/<tag>`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LanguageTag(String);

impl LanguageTag {
    pub fn new(tag: &str) -> Result<Self, TokenError> {
        if tag.is_empty() || !tag.chars().all(is_name_char) {
            return Err(TokenError::BadLanguageTag(tag.to_string()));
        }
        Ok(LanguageTag(tag.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for LanguageTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for LanguageTag {
    type Error = TokenError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        LanguageTag::new(&value)
    }
}

impl From<LanguageTag> for String {
    fn from(value: LanguageTag) -> Self {
        value.0
    }
}

impl PartialEq<str> for LanguageTag {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

impl PartialEq<&str> for LanguageTag {
    fn eq(&self, other: &&str) -> bool {
        self.0 == *other
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("utterance contains no tokens")]
pub struct EmptyUtterance;

/// A tokenized input sentence (text standing in for recognition output).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Utterance {
    pub raw: String,
    pub tokens: Vec<Token>,
}

/// Split on Unicode whitespace and strip `? ! . ,` from token edges.
pub fn tokenize(raw: &str) -> Result<Utterance, EmptyUtterance> {
    let tokens: Vec<Token> = raw
        .split_whitespace()
        .map(|w| w.trim_matches(EDGE_PUNCTUATION))
        .filter(|w| !w.is_empty())
        .map(|w| Token::new(w).expect("whitespace-free non-empty word"))
        .collect();
    if tokens.is_empty() {
        return Err(EmptyUtterance);
    }
    Ok(Utterance { raw: raw.to_string(), tokens })
}

/// Join display forms with single spaces.
pub fn join_display<'a>(tokens: impl IntoIterator<Item = &'a Token>) -> String {
    let mut out = String::new();
    for t in tokens {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(t.display());
    }
    out
}
