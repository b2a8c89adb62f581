use std::collections::HashMap;

use isoas_core::lexer::untokenize;
use isoas_core::lexicon::normalize_phrase;
use isoas_core::{tokenize, Lexicon, TokenClass};
use proptest::prelude::*;

fn phrases() -> Vec<String> {
    Lexicon::default().iter().map(|(_, p)| p.to_string()).collect()
}

/// Lexicon phrases, digit runs, and unknown words, in random case.
fn word_piece() -> impl Strategy<Value = String> {
    let known = proptest::sample::select(phrases());
    prop_oneof![
        4 => known,
        1 => "[0-9]{1,4}",
        1 => "[a-z]{1,8}",
    ]
    .prop_flat_map(|w| {
        let n = w.chars().count();
        (Just(w), proptest::collection::vec(any::<bool>(), n))
    })
    .prop_map(|(w, upper)| {
        w.chars()
            .zip(upper)
            .map(|(c, u)| if u { c.to_ascii_uppercase() } else { c })
            .collect()
    })
}

fn gap() -> impl Strategy<Value = String> {
    proptest::collection::vec(proptest::sample::select(vec![' ', ' ', ' ', '\t', '\n', '\r', '\x0c']), 1..3)
        .prop_map(|v| v.into_iter().collect())
}

fn sentence(punctuation: bool) -> impl Strategy<Value = String> {
    let piece = (word_piece(), if punctuation { "[.?,]{0,1}" } else { "" }).prop_map(|(w, p)| w + &p);
    (gap(), proptest::collection::vec((piece, gap()), 0..12), gap()).prop_map(|(lead, body, tail)| {
        let mut s = String::new();
        if lead.len() > 1 {
            s.push_str(&lead);
        }
        for (w, g) in body {
            s.push_str(&w);
            s.push_str(&g);
        }
        if tail.len() > 1 {
            s.push_str(&tail);
        }
        s
    })
}

/// Longest match over whitespace-separated words, up to five words, looked up
/// in a plain map built from the lexicon listing.
fn oracle(text: &str, lexicon: &Lexicon) -> Vec<(TokenClass, String)> {
    let table: HashMap<String, TokenClass> =
        lexicon.iter().map(|(c, p)| (p.to_string(), c)).collect();
    let words: Vec<String> = text.split_whitespace().map(|w| w.to_lowercase()).collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < words.len() {
        let mut found = None;
        for n in (1..=5.min(words.len() - i)).rev() {
            let key = words[i..i + n].join(" ");
            if let Some(c) = table.get(&key) {
                found = Some((*c, key, n));
                break;
            }
        }
        let (class, lexeme, n) = found.unwrap_or_else(|| {
            let w = words[i].clone();
            let class = if w.chars().all(|c| c.is_ascii_digit()) {
                TokenClass::Number
            } else {
                TokenClass::C
            };
            (class, w, 1)
        });
        out.push((class, lexeme));
        i += n;
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn untokenize_restores_source(text in sentence(true)) {
        let lexicon = Lexicon::default();
        let ts = tokenize(&text, &lexicon).unwrap();
        prop_assert_eq!(untokenize(&ts), text.clone());
        let mut last_end = 0;
        for t in &ts.tokens {
            prop_assert!(t.span.start >= last_end);
            prop_assert_eq!(&text[t.span.start..t.span.end], t.surface.as_str());
            prop_assert_eq!(normalize_phrase(&t.surface), t.lexeme.clone());
            last_end = t.span.end;
        }
    }

    #[test]
    fn longest_match_agrees_with_oracle(text in sentence(false)) {
        let lexicon = Lexicon::default();
        let ts = tokenize(&text, &lexicon).unwrap();
        let got: Vec<_> = ts.tokens.iter().map(|t| (t.class, t.lexeme.clone())).collect();
        prop_assert_eq!(got, oracle(&text, &lexicon));
    }

    #[test]
    fn no_token_could_be_extended(text in sentence(false)) {
        let lexicon = Lexicon::default();
        let ts = tokenize(&text, &lexicon).unwrap();
        for (i, t) in ts.tokens.iter().enumerate() {
            let mut longer = t.lexeme.clone();
            for next in &ts.tokens[i + 1..] {
                longer.push(' ');
                longer.push_str(&next.lexeme);
                prop_assert!(
                    lexicon.lookup(&longer).is_none(),
                    "`{}` could have been matched at token {}", longer, i
                );
            }
        }
    }

    #[test]
    fn punctuation_splits_phrases(a in proptest::sample::select(phrases())) {
        let words: Vec<&str> = a.split(' ').collect();
        prop_assume!(words.len() > 1);
        let broken = format!("{}, {}", words[0], words[1..].join(" "));
        let ts = tokenize(&broken, &Lexicon::default()).unwrap();
        prop_assert!(ts.tokens[0].span.end <= broken.find(',').unwrap());
    }
}

#[test]
fn invalid_utf8_is_reported() {
    let err = isoas_core::lexer::tokenize_bytes(b"I need \xff", &Lexicon::default()).unwrap_err();
    assert_eq!(err, isoas_core::LexError::Encoding { offset: 7 });
}

#[test]
fn closed_lexicon_rejects_unknown_words() {
    let mut lexicon = Lexicon::default();
    lexicon.set_free_identifier_classes([]);
    let err = tokenize("I need gizmo", &lexicon).unwrap_err();
    assert_eq!(
        err,
        isoas_core::LexError::UnknownWord {
            word: "gizmo".into(),
            offset: 7
        }
    );
    assert!(tokenize("I need 42", &lexicon).is_ok());
}

#[test]
fn lexicon_serialization_round_trips() {
    let lexicon = Lexicon::default();
    let again = Lexicon::parse(&lexicon.serialize()).unwrap();
    assert_eq!(again, lexicon);
}

proptest! {
    #[test]
    fn random_lexicons_round_trip(entries in proptest::collection::btree_map("[a-z]{1,6}( [a-z]{1,6}){0,2}", 0usize..7, 0..30)) {
        let classes = [
            TokenClass::A, TokenClass::B, TokenClass::C, TokenClass::W,
            TokenClass::Bt, TokenClass::Eq, TokenClass::And,
        ];
        let mut lexicon = Lexicon::empty();
        for (phrase, class) in &entries {
            lexicon.insert(classes[*class], phrase).unwrap();
        }
        let again = Lexicon::parse(&lexicon.serialize()).unwrap();
        prop_assert_eq!(&again, &lexicon);
        for (phrase, class) in &entries {
            prop_assert_eq!(again.lookup(phrase), Some(classes[*class]));
        }
    }
}
