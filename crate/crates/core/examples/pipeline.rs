//! The full pipeline and its ledger.

use isoas_core::Engine;

fn main() {
    let engine = Engine::in_memory();
    engine.repository().create_store("default").unwrap();
    engine
        .repository()
        .ingest("default", include_str!("data/records.csv"))
        .unwrap();
    let session = engine.session("tour", None).unwrap();
    for text in [
        "I am looking for document where between 2 and 6",
        "They is searching music",
        "I need bracket",
        "I need document where",
    ] {
        let resp = engine.process(text, &session);
        println!("> {text}");
        if let Some(sql) = &resp.sql {
            println!("  {sql}");
        }
        if let Some(rs) = &resp.results {
            for row in &rs.rows {
                println!("  {:>3} {:<16} {:<9} {}", row.id, row.name, row.kind, row.value);
            }
        }
        for d in &resp.diagnostics {
            println!("  note: {}", d.message);
        }
        if let Some(e) = &resp.error {
            println!("  error at {:?}: {}", e.stage, e.message);
        }
    }
    println!("ledger:");
    for e in engine.repository().history("tour") {
        println!("  #{} {:?}", e.input_id, e.stage);
    }
}
