//! Running SQL directly against a store.

use isoas_core::Engine;

fn main() {
    let engine = Engine::in_memory();
    engine.repository().create_store("default").unwrap();
    engine
        .repository()
        .ingest("default", include_str!("data/records.csv"))
        .unwrap();
    let session = engine.session("sql", None).unwrap();
    for sql in [
        "SELECT id, name, kind, value FROM records WHERE (kind = 'cad' OR kind = 'document') AND value BETWEEN 3 AND 8",
        "SELECT id, name, kind, value FROM records WHERE (kind = 'video') AND value >= 10",
        "SELECT * FROM records",
    ] {
        let resp = engine.run_sql(sql, &session);
        match (&resp.results, &resp.error) {
            (Some(rs), _) => println!("{:?}", rs.ids()),
            (_, Some(e)) => println!("{:?}: {}", e.stage, e.message),
            _ => unreachable!(),
        }
    }
}
