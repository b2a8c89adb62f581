//! Longest-match tokenization with the bundled lexicon.

use isoas_core::{tokenize, Lexicon};

fn main() {
    let lexicon = Lexicon::default();
    for text in [
        "I am looking for document",
        "They are\tlooking  for\nCAD where between 2 and 8.",
        "We want gizmo",
    ] {
        let stream = tokenize(text, &lexicon).expect("valid text");
        println!("{text:?}");
        for t in &stream.tokens {
            println!("  {:<6} {:<24} {}..{}", t.class.to_string(), t.lexeme, t.span.start, t.span.end);
        }
    }

    let mut closed = Lexicon::default();
    closed.set_free_identifier_classes([]);
    match tokenize("I need gizmo", &closed) {
        Ok(_) => unreachable!(),
        Err(e) => println!("closed lexicon: {e}"),
    }
}
