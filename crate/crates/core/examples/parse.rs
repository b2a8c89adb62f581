//! Grammar rules, multi-statement input and parse hints.

use isoas_core::{parse, parse_many, tokenize, Lexicon};

fn main() {
    let lexicon = Lexicon::default();
    for text in [
        "I",
        "seek for",
        "document",
        "I need document",
        "need document",
        "I need document where between 1 and 5",
        "I need document less than 3",
        "I need document where greater than",
        "I need document where greater than between 1 and 5",
    ] {
        let stream = tokenize(text, &lexicon).unwrap();
        let stmt = parse(&stream).unwrap();
        println!("{:<10} {text}", stmt.rule.to_string());
    }

    let stream = tokenize("I need document you want cad", &lexicon).unwrap();
    for stmt in parse_many(&stream).unwrap() {
        println!("statement {} at {}..{}", stmt.rule, stmt.span.start, stmt.span.end);
    }

    let stream = tokenize("I need document where", &lexicon).unwrap();
    println!("{}", parse(&stream).unwrap_err());
}
