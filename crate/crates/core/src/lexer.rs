//! Longest-match phrase tokenizer.
//!
//! Input is split into whitespace-separated words. At each word the lexer tries
//! the longest run of words (up to the lexicon's longest phrase) that spells a
//! listed phrase. Digit runs become NUMBER; anything else becomes a free
//! identifier of the lexicon's free class (C by default).

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{Lexicon, TokenClass};

/// Byte range `[start, end)` into the source text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn to(self, other: Span) -> Span {
        Span::new(self.start.min(other.start), self.end.max(other.end))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub class: TokenClass,
    /// Lowercased phrase with single spaces between words.
    pub lexeme: String,
    /// Original text, including any internal whitespace.
    pub surface: String,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream {
    pub source: String,
    pub tokens: Vec<Token>,
    /// Trailing punctuation removed before matching.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<Span>,
}

impl TokenStream {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn classes(&self) -> Vec<TokenClass> {
        self.tokens.iter().map(|t| t.class).collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexError {
    #[error("input is not valid UTF-8 (first bad byte at offset {offset})")]
    Encoding { offset: usize },
    #[error("`{word}` at offset {offset} matches no phrase and the lexicon admits no free identifiers")]
    UnknownWord { word: String, offset: usize },
}

/// Whitespace hidden from the token stream: space, tab, CR, LF and form feed.
pub fn is_hidden_whitespace(c: char) -> bool {
    matches!(c, ' ' | '\t' | '\r' | '\n' | '\x0c')
}

fn is_stripped_punct(c: char) -> bool {
    matches!(c, '.' | '?' | ',')
}

struct Word<'a> {
    text: &'a str,
    span: Span,
    /// Punctuation followed this word, so no phrase may continue past it.
    closes: bool,
}

fn split_words<'a>(text: &'a str, skipped: &mut Vec<Span>) -> Vec<Word<'a>> {
    let mut ranges = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if is_hidden_whitespace(c) {
            if let Some(s) = start.take() {
                ranges.push((s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        ranges.push((s, text.len()));
    }
    let mut words: Vec<Word<'a>> = Vec::new();
    for (start, end) in ranges {
        let core = text[start..end].trim_end_matches(is_stripped_punct);
        let core_end = start + core.len();
        if core_end < end {
            skipped.push(Span::new(core_end, end));
        }
        if !core.is_empty() {
            words.push(Word {
                text: core,
                span: Span::new(start, core_end),
                closes: core_end < end,
            });
        } else if let Some(prev) = words.last_mut() {
            prev.closes = true;
        }
    }
    words
}

/// Tokenizes raw bytes, rejecting invalid UTF-8.
pub fn tokenize_bytes(bytes: &[u8], lexicon: &Lexicon) -> Result<TokenStream, LexError> {
    let text = std::str::from_utf8(bytes).map_err(|e| LexError::Encoding {
        offset: e.valid_up_to(),
    })?;
    tokenize(text, lexicon)
}

pub fn tokenize(text: &str, lexicon: &Lexicon) -> Result<TokenStream, LexError> {
    let mut skipped = Vec::new();
    let words = split_words(text, &mut skipped);
    let lowered: Vec<String> = words.iter().map(|w| w.text.to_lowercase()).collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < words.len() {
        // Longest window not crossing punctuation.
        let mut limit = 1;
        while limit < lexicon.max_phrase_words()
            && i + limit < words.len()
            && !words[i + limit - 1].closes
        {
            limit += 1;
        }
        let mut matched = None;
        for n in (1..=limit.min(lexicon.max_phrase_words().max(1))).rev() {
            let key = lowered[i..i + n].join(" ");
            if let Some(class) = lexicon.lookup(&key) {
                matched = Some((class, key, n));
                break;
            }
        }
        let (class, lexeme, n) = match matched {
            Some(m) => m,
            None => {
                let word = &words[i];
                let class = if word.text.bytes().all(|b| b.is_ascii_digit()) {
                    TokenClass::Number
                } else {
                    lexicon
                        .free_identifier_class()
                        .ok_or_else(|| LexError::UnknownWord {
                            word: word.text.to_string(),
                            offset: word.span.start,
                        })?
                };
                (class, lowered[i].clone(), 1)
            }
        };
        let span = words[i].span.to(words[i + n - 1].span);
        tokens.push(Token {
            class,
            lexeme,
            surface: text[span.start..span.end].to_string(),
            span,
        });
        i += n;
    }
    Ok(TokenStream {
        source: text.to_string(),
        tokens,
        skipped,
    })
}

/// Rebuilds the source text from token surfaces, skipped spans and the
/// whitespace between them.
pub fn untokenize(stream: &TokenStream) -> String {
    let mut pieces: Vec<(Span, &str)> = stream
        .tokens
        .iter()
        .map(|t| (t.span, t.surface.as_str()))
        .chain(
            stream
                .skipped
                .iter()
                .map(|s| (*s, &stream.source[s.start..s.end])),
        )
        .collect();
    pieces.sort_by_key(|(span, _)| span.start);
    let mut out = String::with_capacity(stream.source.len());
    let mut cursor = 0;
    for (span, text) in pieces {
        out.push_str(&stream.source[cursor..span.start]);
        out.push_str(text);
        cursor = span.end;
    }
    out.push_str(&stream.source[cursor..]);
    out
}
