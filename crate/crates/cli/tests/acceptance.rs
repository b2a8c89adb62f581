//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any fails.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::path::Path;
use std::process::{Command, Output};

use isoas_core::{
    check_agreement, parse, render_sql, tokenize, Engine, EngineConfig, KnowledgeBase, Lexicon,
    Repository, RuleKind, TokenClass,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

const A: [&str; 9] = ["I", "We", "They", "He", "She", "You", "It", "This", "That"];
const B: [&str; 37] = [
    "need", "want", "look for", "look about", "search", "ask for", "seek for", "needs", "wants",
    "looks for", "looks about", "seraches", "asks for", "seeks for", "am looking for",
    "am searching", "am asking for", "am seeking", "am in search of", "are looking for",
    "are searching", "are asking for", "are seeking", "are in search of", "is looking for",
    "is searching", "is asking for", "is seeking", "is in search of", "define", "quest",
    "questing", "identify", "scratch around", "root about", "find", "after",
];
const C: [&str; 51] = [
    "PDM", "CAD", "document", "printer", "presentation", "application", "contract", "office",
    "section", "quarter", "airport", "boulevard", "street", "country", "sity", "town", "shop",
    "busstop", "hotel", "hostel", "theater", "cinema", "movies", "picture", "film", "song",
    "singer", "music", "lyrics", "radio", "group", "game", "news", "job", "train station",
    "torrents", "subtitles", "gifts", "clothes", "shoes", "dress", "clothing", "banks", "weather",
    "books", "magazines", "newspaper", "publications", "articles", "events", "concerts",
];
const EQ: [&str; 10] = [
    "equal to", "with", "less than", "greater than", "less than and equal to",
    "greater than and equal to", ">", "<", "<=", ">=",
];

struct Report {
    failures: usize,
}

impl Report {
    fn check(&mut self, name: &str, result: Result<String, String>) {
        match result {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                self.failures += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
}

fn grammar_conformance() -> Result<String, String> {
    let lexicon = Lexicon::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0x15_0a5);
    let fill = |rng: &mut ChaCha8Rng, slot: &str| -> String {
        match slot {
            "A" => A.choose(rng).unwrap().to_string(),
            "B" => B.choose(rng).unwrap().to_string(),
            "C" => C.choose(rng).unwrap().to_string(),
            "V" if rng.gen_bool(0.5) => rng.gen_range(0..100_000).to_string(),
            "V" => C.choose(rng).unwrap().to_string(),
            "W" => "where".into(),
            "Bt" => "between".into(),
            "Eq" => EQ.choose(rng).unwrap().to_string(),
            "And" => "and".into(),
            other => panic!("unknown slot {other}"),
        }
    };
    let productions = [
        (RuleKind::Astmt, "A"),
        (RuleKind::Bstmt, "B"),
        (RuleKind::Cstmt, "C"),
        (RuleKind::Stmt1, "A B C"),
        (RuleKind::Stmt2, "B C"),
        (RuleKind::Condbt, "A B C W Bt V And V"),
        (RuleKind::Condeq, "A B C Eq V"),
        (RuleKind::Condweq, "A B C W Eq"),
        (RuleKind::Condeqbt, "A B C W Eq Bt V And V"),
    ];
    let cases = 540;
    let mut wrong = Vec::new();
    for i in 0..cases {
        let (rule, body) = productions[i % productions.len()];
        let text: Vec<String> = body.split(' ').map(|s| fill(&mut rng, s)).collect();
        let text = text.join(" ");
        let got = tokenize(&text, &lexicon)
            .map_err(|e| e.to_string())
            .and_then(|ts| parse(&ts).map_err(|e| e.to_string()));
        match got {
            Ok(st) if st.rule == rule => {}
            Ok(st) => wrong.push(format!("{text:?} -> {}", st.rule)),
            Err(e) => wrong.push(format!("{text:?} -> {e}")),
        }
    }
    if wrong.is_empty() {
        Ok(format!("{cases} generated sentences, 0 misclassified"))
    } else {
        Err(format!("{} of {cases} misclassified, e.g. {}", wrong.len(), wrong[0]))
    }
}

fn lexeme_coverage() -> Result<String, String> {
    let lexicon = Lexicon::default();
    let mut listed: Vec<(TokenClass, &str)> = Vec::new();
    listed.extend(A.iter().map(|p| (TokenClass::A, *p)));
    listed.extend(B.iter().map(|p| (TokenClass::B, *p)));
    listed.extend(C.iter().map(|p| (TokenClass::C, *p)));
    listed.push((TokenClass::W, "where"));
    listed.push((TokenClass::Bt, "between"));
    listed.extend(EQ.iter().map(|p| (TokenClass::Eq, *p)));
    listed.push((TokenClass::And, "and"));
    if listed.len() != 110 || C.len() != 51 {
        return Err(format!("phrase list has {} entries", listed.len()));
    }
    let mut bad = Vec::new();
    for (class, phrase) in &listed {
        match tokenize(phrase, &lexicon) {
            Ok(ts) if ts.len() == 1 && ts.tokens[0].class == *class => {}
            Ok(ts) => bad.push(format!("{phrase:?} -> {:?}", ts.classes())),
            Err(e) => bad.push(format!("{phrase:?} -> {e}")),
        }
    }
    let stress = [
        ("I need document where less than and equal to", vec!["less than and equal to"]),
        ("He is in search of music", vec!["is in search of"]),
        ("I am looking for PDM", vec!["am looking for"]),
        ("We need train station", vec!["train station"]),
        ("look about hotel", vec!["look about"]),
    ];
    for (text, expect) in &stress {
        let ts = tokenize(text, &lexicon).map_err(|e| e.to_string())?;
        for phrase in expect {
            if !ts.tokens.iter().any(|t| t.lexeme == *phrase) {
                bad.push(format!("{text:?} lacks a single `{phrase}` token"));
            }
        }
    }
    if bad.is_empty() {
        Ok(format!(
            "{} reference phrases (9 A, 37 B, 51 C, 1 W, 1 Bt, 10 Eq, 1 And) and {} multi-word stress cases",
            listed.len(),
            stress.len()
        ))
    } else {
        Err(format!("{} failures, e.g. {}", bad.len(), bad[0]))
    }
}

fn agreement_matrix() -> Result<String, String> {
    let kb = KnowledgeBase::default();
    let allowed = |s: &str, c: &str| {
        matches!(
            (s, c),
            ("i", "am")
                | ("he", "is")
                | ("she", "is")
                | ("it", "is")
                | ("this", "is")
                | ("that", "is")
                | ("they", "are")
                | ("we", "are")
                | ("you", "are")
        )
    };
    let copular: Vec<&str> = B
        .iter()
        .copied()
        .filter(|p| matches!(p.split(' ').next(), Some("is" | "am" | "are")))
        .collect();
    let mut cells = 0;
    let mut deviations = Vec::new();
    for subject in A {
        let s = subject.to_lowercase();
        for predicate in &copular {
            let copula = predicate.split(' ').next().unwrap();
            let got = check_agreement(&s, predicate, &kb).map_err(|e| e.to_string())?.ok;
            if got != allowed(&s, copula) {
                deviations.push(format!("{s} {predicate}"));
            }
            cells += 1;
        }
    }
    if cells != 135 {
        return Err(format!("grid has {cells} cells"));
    }
    if deviations.is_empty() {
        Ok("9 subjects x 15 copular phrases = 135 assertions, 0 deviations".into())
    } else {
        Err(format!("{} deviations: {}", deviations.len(), deviations.join(", ")))
    }
}

fn oracle_equivalence() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0_7ac1e);
    let mut queries = 0;
    for round in 0..5 {
        let (records, csv) = common::fixture(&mut rng, 100);
        let repo = Repository::in_memory();
        repo.create_store("s").map_err(|e| e.to_string())?;
        repo.ingest("s", &csv).map_err(|e| e.to_string())?;
        for _ in 0..50 {
            let q = common::random_query(&mut rng, "s");
            let got = repo.execute(&q).map_err(|e| e.to_string())?;
            let (rows, _) = common::scan(&records, &q);
            if got.rows != rows {
                return Err(format!("fixture {round}: execute differs from scan for {q:?}"));
            }
            let sql = render_sql(&q).map_err(|e| e.to_string())?;
            let via_sql = repo.execute_sql("s", &sql).map_err(|e| e.to_string())?;
            let a = serde_json::to_string(&via_sql).unwrap();
            let b = serde_json::to_string(&got).unwrap();
            if a != b {
                return Err(format!("fixture {round}: SQL path differs for {sql}"));
            }
            queries += 1;
        }
    }
    Ok(format!("{queries} random queries over 100-record fixtures; scan and SQL paths identical"))
}

struct Cli<'a> {
    home: &'a Path,
    transcript: Vec<String>,
}

impl Cli<'_> {
    fn run(&mut self, args: &[&str]) -> Output {
        let out = Command::new(env!("CARGO_BIN_EXE_isoas"))
            .args(args)
            .env("ISOAS_HOME", self.home)
            .output()
            .expect("run isoas");
        self.transcript.push(format!("$ isoas {}", args.join(" ")));
        self.transcript.push(String::from_utf8_lossy(&out.stdout).trim_end().to_string());
        out
    }

    fn ok(&mut self, args: &[&str]) -> Result<String, String> {
        let out = self.run(args);
        let stdout = String::from_utf8_lossy(&out.stdout).to_string();
        if out.status.code() == Some(0) {
            Ok(stdout)
        } else {
            Err(format!("`isoas {}` exited {:?}: {stdout}", args.join(" "), out.status.code()))
        }
    }

    fn json(&mut self, args: &[&str]) -> Result<Value, String> {
        let out = self.run(args);
        serde_json::from_slice(&out.stdout).map_err(|e| format!("`isoas {}`: {e}", args.join(" ")))
    }
}

fn ids(v: &Value) -> Vec<u64> {
    v["results"]["rows"]
        .as_array()
        .map(|rows| rows.iter().filter_map(|r| r["id"].as_u64()).collect())
        .unwrap_or_default()
}

const PARTS: &str = "id,name,kind,description,value\n\
    1,spec,document,design specification,3\n\
    2,drawing,cad,bracket drawing,7\n\
    3,manual,document,operator manual,9\n";
const MEDIA: &str = "id,name,kind,description,value\n\
    10,symphony,music,orchestral recording,4\n\
    11,ballad,song,folk ballad,2\n\
    12,overture,music,opera overture,8\n";

fn worked_examples(dir: &Path) -> Result<String, String> {
    let home = dir.join("home");
    std::fs::write(dir.join("parts.csv"), PARTS).unwrap();
    std::fs::write(dir.join("media.csv"), MEDIA).unwrap();
    let parts = dir.join("parts.csv").display().to_string();
    let media = dir.join("media.csv").display().to_string();
    let mut cli = Cli { home: &home, transcript: Vec::new() };
    let mut rows: Vec<(&str, Result<(), String>)> = Vec::new();

    // Row 4: stores are created at run time.
    let row4 = (|| {
        cli.ok(&["store", "create", "parts"])?;
        cli.ok(&["store", "create", "media"])?;
        cli.ok(&["ingest", &parts, "--store", "parts"])?;
        cli.ok(&["ingest", &media, "--store", "media"])?;
        let list = cli.ok(&["store", "list"])?;
        (list.contains("parts") && list.contains("media"))
            .then_some(())
            .ok_or_else(|| format!("store list: {list}"))
    })();
    rows.push(("4 dynamic store creation", row4));

    // Row 3: natural-language search.
    let row3 = (|| {
        let v = cli.json(&["query", "I am looking for document", "--store", "parts", "--json"])?;
        (v["rule"] == "stmt1" && ids(&v) == [1, 3])
            .then_some(())
            .ok_or_else(|| format!("unexpected response {v}"))
    })();
    rows.push(("3 natural-language search", row3));

    // Row 5: attach and detach.
    let row5 = (|| {
        cli.ok(&["store", "detach", "media"])?;
        let v = cli.json(&["query", "I need music", "--store", "media", "--json"])?;
        if v["error"]["kind"] != "StoreDetached" {
            return Err(format!("detached store answered: {v}"));
        }
        cli.ok(&["store", "attach", "media"])?;
        let v = cli.json(&["query", "I need music", "--store", "media", "--json"])?;
        (ids(&v) == [10, 12]).then_some(()).ok_or_else(|| format!("after attach: {v}"))
    })();
    rows.push(("5 attach/detach", row5));

    // Row 6: several stores handled in one session.
    let row6 = (|| {
        let a = cli.json(&["query", "I need song", "--store", "media", "--json"])?;
        let b = cli.json(&["query", "I need CAD", "--store", "parts", "--json"])?;
        (ids(&a) == [11] && ids(&b) == [2])
            .then_some(())
            .ok_or_else(|| format!("{a} / {b}"))
    })();
    rows.push(("6 multi-store manipulation", row6));

    // Row 7: a saved query is edited by hand as SQL.
    let row7 = (|| {
        cli.ok(&["saved", "save", "docs", "--text", "I need document", "--store", "parts"])?;
        let sql = "SELECT id, name, kind, value FROM records WHERE (kind = 'document') AND value < 5";
        cli.ok(&["saved", "edit", "docs", "--sql", sql])?;
        let shown = cli.ok(&["saved", "show", "docs"])?;
        let v = cli.json(&["saved", "run", "docs", "--store", "parts", "--json"])?;
        (shown.contains("value < 5") && ids(&v) == [1])
            .then_some(())
            .ok_or_else(|| format!("{shown} / {v}"))
    })();
    rows.push(("7 manual query editor", row7));

    // Row 8: unknown words are still searched, as free text.
    let row8 = (|| {
        let v = cli.json(&["query", "I need bracket", "--store", "parts", "--json"])?;
        let text = v["results"]["matched_by"] == "text";
        let structured = cli.json(&["query", "I need document less than 5", "--store", "parts", "--json"])?;
        (text && ids(&v) == [2] && ids(&structured) == [1])
            .then_some(())
            .ok_or_else(|| format!("{v} / {structured}"))
    })();
    rows.push(("8 structured and unstructured processing", row8));

    // Row 9: create, edit, save and run.
    let row9 = (|| {
        cli.ok(&["saved", "save", "heavy", "--text", "I need document where greater than", "--store", "parts"])?;
        let v = cli.json(&["saved", "run", "heavy", "--bind", "5", "--store", "parts", "--json"])?;
        if ids(&v) != [3] {
            return Err(format!("bound run: {v}"));
        }
        let missing = cli.run(&["saved", "run", "heavy", "--store", "parts"]);
        if missing.status.code() != Some(1) {
            return Err("running without a binding should fail".into());
        }
        cli.ok(&["saved", "edit", "heavy", "--text", "I need document greater than 2", "--store", "parts"])?;
        let v = cli.json(&["saved", "run", "heavy", "--store", "parts", "--json"])?;
        let list = cli.ok(&["saved", "list"])?;
        (ids(&v) == [1, 3] && list.contains("heavy") && list.contains("docs"))
            .then_some(())
            .ok_or_else(|| format!("{v} / {list}"))
    })();
    rows.push(("9 create/edit/save/run", row9));

    // Row 10: several statements integrate into one query.
    let row10 = (|| {
        let v = cli.json(&["query", "I need music I want song", "--store", "media", "--json"])?;
        (v["statements"].as_array().map(Vec::len) == Some(2) && ids(&v) == [10, 11, 12])
            .then_some(())
            .ok_or_else(|| format!("{v}"))
    })();
    rows.push(("10 integrate", row10));

    // Row 11: SQL mode.
    let row11 = (|| {
        let v = cli.json(&[
            "sql",
            "SELECT id, name, kind, value FROM records WHERE (kind = 'music' OR kind = 'song') AND value BETWEEN 2 AND 4",
            "--store",
            "media",
            "--json",
        ])?;
        let bad = cli.run(&["sql", "SELECT * FROM records", "--store", "media"]);
        (ids(&v) == [10, 11] && bad.status.code() == Some(1))
            .then_some(())
            .ok_or_else(|| format!("{v}"))
    })();
    rows.push(("11 SQL mode", row11));

    // Row 12: results are returned to the user.
    let row12 = (|| {
        let text = cli.ok(&["query", "I need CAD", "--store", "parts"])?;
        (text.contains("drawing") && text.contains("(1 row)"))
            .then_some(())
            .ok_or_else(|| text.clone())
    })();
    rows.push(("12 results returned", row12));

    rows.sort_by_key(|(name, _)| name.split(' ').next().unwrap().parse::<u32>().unwrap());
    let passed = rows.iter().filter(|(_, r)| r.is_ok()).count();
    for (name, r) in &rows {
        match r {
            Ok(()) => println!("        [x] row {name}"),
            Err(e) => println!("        [ ] row {name}: {e}"),
        }
    }
    if std::env::var_os("ACCEPTANCE_TRANSCRIPT").is_some() {
        println!("{}", cli.transcript.join("\n"));
    }
    if passed == rows.len() {
        Ok(format!("{passed}/{} rows", rows.len()))
    } else {
        Err(format!("{passed}/{} rows", rows.len()))
    }
}

fn persistence_ledger(dir: &Path) -> Result<String, String> {
    let home = dir.join("ledger-home");
    std::fs::create_dir_all(&home).unwrap();
    std::fs::write(dir.join("parts.csv"), PARTS).unwrap();
    let parts = dir.join("parts.csv").display().to_string();
    let mut cli = Cli { home: &home, transcript: Vec::new() };
    cli.ok(&["store", "create", "default"])?;
    cli.ok(&["ingest", &parts, "--store", "default"])?;
    cli.ok(&["store", "create", "spare"])?;
    cli.ok(&["saved", "save", "cad", "--sql", "SELECT id, name, kind, value FROM records WHERE (kind = 'cad')"])?;
    let queries = [
        "I am looking for document",
        "I need CAD",
        "They is searching music",
        "We want document where between 1 and 5",
        "I need document I want cad",
    ];
    for q in queries {
        cli.run(&["--session", "accept", "query", q]);
    }

    let ledger = std::fs::read_to_string(home.join("ledger.jsonl")).map_err(|e| e.to_string())?;
    let entries: Vec<Value> = ledger
        .lines()
        .map(serde_json::from_str)
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())?;
    let stage_count = |s: &str| entries.iter().filter(|e| e["stage"] == s && e["session"] == "accept").count();
    let (inputs, executed) = (stage_count("input"), stage_count("executed"));
    if (inputs, executed) != (5, 4) {
        return Err(format!("{inputs} input / {executed} executed entries"));
    }
    let failed_id = entries
        .iter()
        .find(|e| e["stage"] == "input" && e["payload"]["text"] == "They is searching music")
        .and_then(|e| e["input_id"].as_u64())
        .ok_or("failed query not logged")?;
    let failed: Vec<&str> = entries
        .iter()
        .filter(|e| e["input_id"] == failed_id)
        .filter_map(|e| e["stage"].as_str())
        .collect();
    if failed != ["input", "lexed", "parsed"] {
        return Err(format!("failed query stages {failed:?}"));
    }

    // Detach/attach round trip plus a restart.
    let open = || {
        Engine::open(&EngineConfig {
            home: Some(home.clone()),
            ..Default::default()
        })
        .map_err(|e| e.to_string())
    };
    let before = {
        let engine = open()?;
        let repo = engine.repository();
        let records = repo.records("default").map_err(|e| e.to_string())?;
        repo.detach_store("default").map_err(|e| e.to_string())?;
        repo.detach_store("spare").map_err(|e| e.to_string())?;
        (records, repo.list_queries())
    };
    let engine = open()?;
    let repo = engine.repository();
    repo.attach_store("default").map_err(|e| e.to_string())?;
    repo.attach_store("spare").map_err(|e| e.to_string())?;
    let stores: Vec<String> = repo.list_stores().into_iter().map(|s| s.name).collect();
    let records = repo.records("default").map_err(|e| e.to_string())?;
    if stores != ["default", "spare"] || records != before.0 || repo.list_queries() != before.1 {
        return Err("stores or saved queries changed across detach/attach and reopen".into());
    }
    Ok(format!(
        "5 input / 4 executed entries, failed query stops at parsed, {} stores and {} saved query preserved",
        stores.len(),
        before.1.len()
    ))
}

fn main() {
    // Tolerate libtest-style flags such as `--nocapture` or a filter.
    let dir = tempfile::tempdir().expect("temp dir");
    let mut report = Report { failures: 0 };
    report.check("grammar conformance", grammar_conformance());
    report.check("lexeme coverage", lexeme_coverage());
    report.check("agreement matrix", agreement_matrix());
    report.check("oracle equivalence", oracle_equivalence());
    report.check("worked examples", worked_examples(dir.path()));
    report.check("persistence ledger", persistence_ledger(dir.path()));
    println!(
        "acceptance: {} of 6 criteria passed",
        6 - report.failures
    );
    if report.failures > 0 {
        std::process::exit(1);
    }
}
