//! Creating, loading, detaching and reattaching stores on disk.

use isoas_core::Repository;

const CSV: &str = include_str!("data/records.csv");

fn main() {
    let home = tempfile::tempdir().unwrap();
    {
        let repo = Repository::open(home.path()).unwrap();
        repo.create_store("pdm").unwrap();
        println!("ingested {}", repo.ingest("pdm", CSV).unwrap());
        let bad = "id,name,kind,description,value\n1,dup,cad,again,1\n";
        println!("rejected: {}", repo.ingest("pdm", bad).unwrap_err());
        repo.detach_store("pdm").unwrap();
    }

    let repo = Repository::open(home.path()).unwrap();
    for s in repo.list_stores() {
        println!("{} {:?} {:?}", s.name, s.state, s.records);
    }
    repo.attach_store("pdm").unwrap();
    println!("records after reattach: {}", repo.records("pdm").unwrap().len());
    for entry in std::fs::read_dir(home.path()).unwrap() {
        println!("  {}", entry.unwrap().file_name().to_string_lossy());
    }
}
