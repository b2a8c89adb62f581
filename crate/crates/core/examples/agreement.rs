//! Subject and copula agreement from the ontology.

use isoas_core::{check_agreement, KnowledgeBase, TokenClass};

fn main() {
    let kb = KnowledgeBase::default();
    let subjects = kb.lexicon.phrases(TokenClass::A).to_vec();
    let copulas = ["is", "am", "are"];
    print!("{:<8}", "");
    for c in copulas {
        print!("{c:<6}");
    }
    println!();
    for s in &subjects {
        print!("{s:<8}");
        for c in copulas {
            let ok = check_agreement(s, &format!("{c} searching"), &kb).unwrap().ok;
            print!("{:<6}", if ok { "ok" } else { "-" });
        }
        println!();
    }

    let r = check_agreement("they", "is looking for", &kb).unwrap();
    let v = r.violation.unwrap();
    println!("they / is looking for: expected {}", v.expected.join(" or "));
    println!("they / need: {}", check_agreement("they", "need", &kb).unwrap().ok);
}
