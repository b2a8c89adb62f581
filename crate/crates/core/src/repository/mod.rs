//! Embedded record stores, the pipeline ledger and saved queries.
//!
//! A repository either lives in memory or under a home directory:
//!
//! ```text
//! <home>/catalog.json          store names and attach state
//! <home>/stores/<name>.jsonl   one record per line
//! <home>/ledger.jsonl          append-only pipeline stages
//! <home>/saved.jsonl           saved queries
//! ```
//!
//! Each store sits behind its own lock: reads share it, ingest and
//! attach/detach take it exclusively.

mod ledger;
mod saved;
pub mod sql;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modeler::Literal;
use crate::resolver::{Filter, Param, StructuredQuery};

pub use ledger::{LedgerEntry, Stage};
pub use saved::{SavedBody, SavedQuery};
pub use sql::{parse_sql, SqlError};

use ledger::Ledger;
use saved::SavedQueries;

/// Header every ingested CSV must carry.
pub const CSV_HEADER: [&str; 5] = ["id", "name", "kind", "description", "value"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub id: u64,
    pub name: String,
    pub kind: String,
    pub description: String,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StoreState {
    Attached,
    Detached,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StoreInfo {
    pub name: String,
    pub state: StoreState,
    /// Record count; unknown while detached.
    pub records: Option<usize>,
}

/// One row of a result: the projected columns of a record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub id: u64,
    pub name: String,
    pub kind: String,
    pub value: f64,
}

impl From<&Record> for ResultRow {
    fn from(r: &Record) -> Self {
        ResultRow {
            id: r.id,
            name: r.name.clone(),
            kind: r.kind.clone(),
            value: r.value,
        }
    }
}

/// How concepts were matched against records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    /// `kind` equals a concept.
    Kind,
    /// No kind matched; concepts were found inside name or description.
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultSet {
    pub matched_by: MatchMode,
    pub rows: Vec<ResultRow>,
}

impl ResultSet {
    pub fn ids(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.id).collect()
    }
}

#[derive(Debug, Error)]
pub enum RepoError {
    #[error("store name `{0}` is already in use")]
    NameInUse(String),
    #[error("invalid store name `{0}` (use letters, digits, `-` and `_`)")]
    InvalidName(String),
    #[error("unknown store `{0}`")]
    UnknownStore(String),
    #[error("store `{name}` is {actual:?}")]
    WrongState { name: String, actual: StoreState },
    #[error("store `{0}` is detached")]
    StoreDetached(String),
    #[error("duplicate record id {0}")]
    DuplicateId(u64),
    #[error("malformed CSV row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("condition value `{0}` is not numeric")]
    NonNumericLiteral(String),
    #[error("query has unbound parameters")]
    UnboundParameter(Vec<Param>),
    #[error(transparent)]
    Sql(#[from] SqlError),
    #[error("stage `{stage:?}` cannot follow {previous:?} for input {input_id}")]
    StageOrderViolation {
        input_id: u64,
        stage: Stage,
        previous: Option<Stage>,
    },
    #[error("unknown saved query `{0}`")]
    UnknownQuery(String),
    #[error("saved query `{0}` already exists")]
    QueryNameInUse(String),
    #[error("invalid saved query: {0}")]
    InvalidQuery(String),
    #[error("corrupt file {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },
    #[error("i/o failure: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T, E = RepoError> = std::result::Result<T, E>;

#[derive(Debug)]
struct Store {
    state: StoreState,
    records: BTreeMap<u64, Record>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogEntry {
    name: String,
    state: StoreState,
}

pub struct Repository {
    home: Option<PathBuf>,
    stores: RwLock<BTreeMap<String, Arc<RwLock<Store>>>>,
    ledger: Mutex<Ledger>,
    saved: Mutex<SavedQueries>,
}

fn valid_store_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name
            .bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

/// Writes `contents` to `path` via a temporary sibling and rename.
pub(crate) fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)
}

pub(crate) fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = match fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(e.into()),
    };
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| RepoError::Corrupt {
                path: path.to_path_buf(),
                reason: format!("line {}: {e}", i + 1),
            })
        })
        .collect()
}

pub(crate) fn to_jsonl<'a, T: Serialize + 'a>(items: impl IntoIterator<Item = &'a T>) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("domain types serialize"));
        out.push('\n');
    }
    out
}

impl Repository {
    /// A repository with no backing files.
    pub fn in_memory() -> Self {
        Repository {
            home: None,
            stores: RwLock::new(BTreeMap::new()),
            ledger: Mutex::new(Ledger::new(None).expect("no file to read")),
            saved: Mutex::new(SavedQueries::new(None).expect("no file to read")),
        }
    }

    /// Opens (creating if needed) a repository under `home`.
    pub fn open(home: impl Into<PathBuf>) -> Result<Self> {
        let home = home.into();
        fs::create_dir_all(home.join("stores"))?;
        let catalog: Vec<CatalogEntry> = match fs::read_to_string(home.join("catalog.json")) {
            Ok(text) => serde_json::from_str(&text).map_err(|e| RepoError::Corrupt {
                path: home.join("catalog.json"),
                reason: e.to_string(),
            })?,
            Err(e) if e.kind() == io::ErrorKind::NotFound => Vec::new(),
            Err(e) => return Err(e.into()),
        };
        let mut stores = BTreeMap::new();
        for entry in catalog {
            let records = match entry.state {
                StoreState::Attached => load_records(&home.join("stores").join(format!("{}.jsonl", entry.name)))?,
                StoreState::Detached => BTreeMap::new(),
            };
            stores.insert(
                entry.name,
                Arc::new(RwLock::new(Store {
                    state: entry.state,
                    records,
                })),
            );
        }
        Ok(Repository {
            ledger: Mutex::new(Ledger::new(Some(home.join("ledger.jsonl")))?),
            saved: Mutex::new(SavedQueries::new(Some(home.join("saved.jsonl")))?),
            stores: RwLock::new(stores),
            home: Some(home),
        })
    }

    pub fn home(&self) -> Option<&Path> {
        self.home.as_deref()
    }

    fn store_file(&self, name: &str) -> Option<PathBuf> {
        self.home
            .as_ref()
            .map(|h| h.join("stores").join(format!("{name}.jsonl")))
    }

    fn write_catalog(&self, stores: &BTreeMap<String, Arc<RwLock<Store>>>) -> Result<()> {
        let Some(home) = &self.home else {
            return Ok(());
        };
        let entries: Vec<CatalogEntry> = stores
            .iter()
            .map(|(name, s)| CatalogEntry {
                name: name.clone(),
                state: s.read().expect("store lock").state,
            })
            .collect();
        let text = serde_json::to_string_pretty(&entries).expect("catalog serializes");
        write_atomic(&home.join("catalog.json"), text.as_bytes())?;
        Ok(())
    }

    fn flush_store(&self, name: &str, store: &Store) -> Result<()> {
        if let Some(path) = self.store_file(name) {
            write_atomic(&path, to_jsonl(store.records.values()).as_bytes())?;
        }
        Ok(())
    }

    fn store(&self, name: &str) -> Result<Arc<RwLock<Store>>> {
        self.stores
            .read()
            .expect("catalog lock")
            .get(name)
            .cloned()
            .ok_or_else(|| RepoError::UnknownStore(name.to_string()))
    }

    pub fn create_store(&self, name: &str) -> Result<StoreInfo> {
        if !valid_store_name(name) {
            return Err(RepoError::InvalidName(name.to_string()));
        }
        let mut stores = self.stores.write().expect("catalog lock");
        if stores.contains_key(name) {
            return Err(RepoError::NameInUse(name.to_string()));
        }
        let store = Store {
            state: StoreState::Attached,
            records: BTreeMap::new(),
        };
        self.flush_store(name, &store)?;
        stores.insert(name.to_string(), Arc::new(RwLock::new(store)));
        self.write_catalog(&stores)?;
        Ok(StoreInfo {
            name: name.to_string(),
            state: StoreState::Attached,
            records: Some(0),
        })
    }

    /// Reloads a detached store from its file.
    pub fn attach_store(&self, name: &str) -> Result<StoreInfo> {
        let stores = self.stores.read().expect("catalog lock");
        let slot = stores
            .get(name)
            .ok_or_else(|| RepoError::UnknownStore(name.to_string()))?;
        let mut store = slot.write().expect("store lock");
        if store.state != StoreState::Detached {
            return Err(RepoError::WrongState {
                name: name.to_string(),
                actual: store.state,
            });
        }
        if let Some(path) = self.store_file(name) {
            store.records = load_records(&path)?;
        }
        store.state = StoreState::Attached;
        let count = store.records.len();
        drop(store);
        self.write_catalog(&stores)?;
        Ok(StoreInfo {
            name: name.to_string(),
            state: StoreState::Attached,
            records: Some(count),
        })
    }

    /// Flushes a store to its file and releases it.
    pub fn detach_store(&self, name: &str) -> Result<StoreInfo> {
        let stores = self.stores.read().expect("catalog lock");
        let slot = stores
            .get(name)
            .ok_or_else(|| RepoError::UnknownStore(name.to_string()))?;
        let mut store = slot.write().expect("store lock");
        if store.state != StoreState::Attached {
            return Err(RepoError::WrongState {
                name: name.to_string(),
                actual: store.state,
            });
        }
        self.flush_store(name, &store)?;
        // In-memory repositories keep the records; there is no file to reload from.
        if self.home.is_some() {
            store.records.clear();
        }
        store.state = StoreState::Detached;
        drop(store);
        self.write_catalog(&stores)?;
        Ok(StoreInfo {
            name: name.to_string(),
            state: StoreState::Detached,
            records: None,
        })
    }

    pub fn list_stores(&self) -> Vec<StoreInfo> {
        self.stores
            .read()
            .expect("catalog lock")
            .iter()
            .map(|(name, s)| {
                let s = s.read().expect("store lock");
                StoreInfo {
                    name: name.clone(),
                    state: s.state,
                    records: (s.state == StoreState::Attached).then_some(s.records.len()),
                }
            })
            .collect()
    }

    pub fn store_info(&self, name: &str) -> Result<StoreInfo> {
        self.list_stores()
            .into_iter()
            .find(|s| s.name == name)
            .ok_or_else(|| RepoError::UnknownStore(name.to_string()))
    }

    /// All records of an attached store, by id.
    pub fn records(&self, name: &str) -> Result<Vec<Record>> {
        let slot = self.store(name)?;
        let store = slot.read().expect("store lock");
        if store.state != StoreState::Attached {
            return Err(RepoError::StoreDetached(name.to_string()));
        }
        Ok(store.records.values().cloned().collect())
    }

    /// Inserts CSV rows; nothing is inserted if any row is rejected.
    pub fn ingest(&self, name: &str, csv_text: &str) -> Result<usize> {
        let slot = self.store(name)?;
        let mut store = slot.write().expect("store lock");
        if store.state != StoreState::Attached {
            return Err(RepoError::StoreDetached(name.to_string()));
        }
        let rows = parse_csv(csv_text)?;
        let mut seen = BTreeSet::new();
        for r in &rows {
            if store.records.contains_key(&r.id) || !seen.insert(r.id) {
                return Err(RepoError::DuplicateId(r.id));
            }
        }
        let count = rows.len();
        let mut updated = store.records.clone();
        updated.extend(rows.into_iter().map(|r| (r.id, r)));
        let candidate = Store {
            state: store.state,
            records: updated,
        };
        self.flush_store(name, &candidate)?;
        store.records = candidate.records;
        Ok(count)
    }

    /// Runs a bound query against its store.
    pub fn execute(&self, query: &StructuredQuery) -> Result<ResultSet> {
        if !query.params.is_empty() {
            return Err(RepoError::UnboundParameter(query.params.clone()));
        }
        let predicates = compile_filter(query)?;
        let slot = self.store(&query.store)?;
        let store = slot.read().expect("store lock");
        if store.state != StoreState::Attached {
            return Err(RepoError::StoreDetached(query.store.clone()));
        }
        let concepts: Vec<String> = query.concepts.iter().map(|c| c.to_lowercase()).collect();
        let mut matched_by = MatchMode::Kind;
        let mut candidates: Vec<&Record> = store
            .records
            .values()
            .filter(|r| concepts.contains(&r.kind))
            .collect();
        if candidates.is_empty() {
            matched_by = MatchMode::Text;
            candidates = store
                .records
                .values()
                .filter(|r| {
                    let name = r.name.to_lowercase();
                    let description = r.description.to_lowercase();
                    concepts
                        .iter()
                        .any(|c| name.contains(c.as_str()) || description.contains(c.as_str()))
                })
                .collect();
        }
        let rows = candidates
            .into_iter()
            .filter(|r| predicates.iter().all(|p| p.holds(r.value)))
            .map(ResultRow::from)
            .collect();
        Ok(ResultSet { matched_by, rows })
    }

    /// Parses restricted SQL and runs it against `store`.
    pub fn execute_sql(&self, store: &str, sql: &str) -> Result<ResultSet> {
        let query = parse_sql(sql, store)?;
        self.execute(&query)
    }

    /// Starts a ledger record for a new input; returns its id.
    pub fn log_input(&self, session: &str, payload: serde_json::Value) -> Result<u64> {
        self.ledger.lock().expect("ledger lock").begin(session, payload)
    }

    pub fn log_stage(&self, entry: LedgerEntry) -> Result<()> {
        self.ledger.lock().expect("ledger lock").append(entry)
    }

    /// Ledger entries for a session, in insertion order.
    pub fn history(&self, session: &str) -> Vec<LedgerEntry> {
        self.ledger.lock().expect("ledger lock").history(session)
    }

    pub fn ledger_len(&self) -> usize {
        self.ledger.lock().expect("ledger lock").len()
    }

    pub fn save_query(&self, query: SavedQuery, overwrite: bool) -> Result<SavedQuery> {
        self.saved.lock().expect("saved lock").save(query, overwrite)
    }

    pub fn load_query(&self, name: &str) -> Result<SavedQuery> {
        self.saved.lock().expect("saved lock").load(name)
    }

    pub fn list_queries(&self) -> Vec<SavedQuery> {
        self.saved.lock().expect("saved lock").list()
    }

    pub fn delete_query(&self, name: &str) -> Result<()> {
        self.saved.lock().expect("saved lock").delete(name)
    }
}

fn load_records(path: &Path) -> Result<BTreeMap<u64, Record>> {
    let records: Vec<Record> = read_jsonl(path)?;
    Ok(records.into_iter().map(|r| (r.id, r)).collect())
}

fn parse_csv(text: &str) -> Result<Vec<Record>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| RepoError::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    let header: Vec<String> = header.iter().map(str::to_lowercase).collect();
    if header != CSV_HEADER {
        return Err(RepoError::MalformedRow {
            line: 1,
            reason: format!("header must be `{}`", CSV_HEADER.join(",")),
        });
    }
    let mut rows = Vec::new();
    for result in reader.records() {
        let row = result.map_err(|e| RepoError::MalformedRow {
            line: e.position().map_or(0, |p| p.line()),
            reason: e.to_string(),
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let bad = |reason: String| RepoError::MalformedRow { line, reason };
        if row.len() != CSV_HEADER.len() {
            return Err(bad(format!("expected 5 fields, found {}", row.len())));
        }
        let id: u64 = row[0]
            .parse()
            .ok()
            .filter(|id| *id > 0)
            .ok_or_else(|| bad(format!("id `{}` is not a positive integer", &row[0])))?;
        let kind = row[2].to_lowercase();
        if kind.is_empty() {
            return Err(bad("kind is empty".into()));
        }
        let value: f64 = row[4]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| bad(format!("value `{}` is not a number", &row[4])))?;
        rows.push(Record {
            id,
            name: row[1].to_string(),
            kind,
            description: row[3].to_string(),
            value,
        });
    }
    Ok(rows)
}

enum Predicate {
    Compare(crate::resolver::CompareOp, f64),
    Between(f64, f64),
}

impl Predicate {
    fn holds(&self, value: f64) -> bool {
        match self {
            Predicate::Compare(op, rhs) => op.holds(value, *rhs),
            Predicate::Between(lo, hi) => *lo <= value && value <= *hi,
        }
    }
}

fn number(lit: &Literal) -> Result<f64> {
    lit.as_f64()
        .ok_or_else(|| RepoError::NonNumericLiteral(lit.text.clone()))
}

fn compile_filter(query: &StructuredQuery) -> Result<Vec<Predicate>> {
    query
        .leaves()
        .into_iter()
        .map(|leaf| match leaf {
            Filter::Compare { op, value } => Ok(Predicate::Compare(*op, number(value)?)),
            Filter::Between { lo, hi } => Ok(Predicate::Between(number(lo)?, number(hi)?)),
            Filter::Hole { .. } => Err(RepoError::UnboundParameter(query.params.clone())),
            Filter::And { .. } => unreachable!("leaves are never conjunctions"),
        })
        .collect()
}
