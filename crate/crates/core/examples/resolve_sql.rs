//! From a sentence to a structured query and its SQL.

use isoas_core::{build_model, parse, parse_sql, render_sql, resolve, tokenize, KnowledgeBase};

fn main() {
    let kb = KnowledgeBase::default();
    for text in [
        "I need cad",
        "They are looking for document less than 4",
        "I am seeking document where between 2 and 9",
        "We want video where greater than",
    ] {
        let stream = tokenize(text, &kb.lexicon).unwrap();
        let model = build_model(&parse(&stream).unwrap(), &kb).unwrap();
        let query = resolve(&model, "default").unwrap();
        println!("{text}");
        match render_sql(&query) {
            Ok(sql) => {
                println!("  {sql}");
                assert_eq!(parse_sql(&sql, "default").unwrap(), query);
            }
            Err(e) => println!("  {e}"),
        }
    }
}
