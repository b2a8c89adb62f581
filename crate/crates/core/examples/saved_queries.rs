//! Saving a parameterized request and running it with bindings.

use isoas_core::{Engine, EngineConfig, Literal, SavedBody, SavedQuery};

fn main() {
    let home = tempfile::tempdir().unwrap();
    let config = EngineConfig {
        home: Some(home.path().to_path_buf()),
        ..Default::default()
    };
    {
        let engine = Engine::open(&config).unwrap();
        engine.repository().create_store("default").unwrap();
        engine
            .repository()
            .ingest("default", include_str!("data/records.csv"))
            .unwrap();
        let q = engine.compile("I need cad where less than", "default").unwrap();
        engine
            .repository()
            .save_query(SavedQuery::new("small-cad", SavedBody::Ir(q)), false)
            .unwrap();
    }

    let engine = Engine::open(&config).unwrap();
    let session = engine.session("s", None).unwrap();
    for bound in ["3", "8", "20"] {
        let resp = engine.run_saved("small-cad", &[Literal::numeric(bound)], &session);
        println!("< {bound}: {:?}", resp.results.unwrap().ids());
    }
    let resp = engine.run_saved("small-cad", &[], &session);
    println!("{}", resp.error.unwrap().message);
}
