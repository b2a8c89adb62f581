use std::collections::HashMap;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::{read_jsonl, RepoError, Result};

/// Pipeline stages in the order they are recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Input,
    Lexed,
    Parsed,
    Modeled,
    Resolved,
    Executed,
}

impl Stage {
    pub const ORDER: [Stage; 6] = [
        Stage::Input,
        Stage::Lexed,
        Stage::Parsed,
        Stage::Modeled,
        Stage::Resolved,
        Stage::Executed,
    ];

    pub fn next(self) -> Option<Stage> {
        let i = Stage::ORDER.iter().position(|s| *s == self)?;
        Stage::ORDER.get(i + 1).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub input_id: u64,
    pub session: String,
    pub stage: Stage,
    pub payload: serde_json::Value,
    /// Milliseconds since the Unix epoch.
    pub timestamp: u64,
}

impl LedgerEntry {
    pub fn new(input_id: u64, session: &str, stage: Stage, payload: serde_json::Value) -> Self {
        LedgerEntry {
            input_id,
            session: session.to_string(),
            stage,
            payload,
            timestamp: now_millis(),
        }
    }
}

pub(crate) fn now_millis() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or_default()
}

pub(super) struct Ledger {
    path: Option<PathBuf>,
    entries: Vec<LedgerEntry>,
    last_stage: HashMap<u64, Stage>,
    next_id: u64,
}

impl Ledger {
    pub(super) fn new(path: Option<PathBuf>) -> Result<Self> {
        let entries: Vec<LedgerEntry> = match &path {
            Some(p) => read_jsonl(p)?,
            None => Vec::new(),
        };
        let mut last_stage = HashMap::new();
        for e in &entries {
            last_stage.insert(e.input_id, e.stage);
        }
        let next_id = entries.iter().map(|e| e.input_id).max().map_or(1, |m| m + 1);
        Ok(Ledger {
            path,
            entries,
            last_stage,
            next_id,
        })
    }

    pub(super) fn begin(&mut self, session: &str, payload: serde_json::Value) -> Result<u64> {
        let id = self.next_id;
        self.append(LedgerEntry::new(id, session, Stage::Input, payload))?;
        Ok(id)
    }

    pub(super) fn append(&mut self, entry: LedgerEntry) -> Result<()> {
        let previous = self.last_stage.get(&entry.input_id).copied();
        let expected = match previous {
            None => Some(Stage::Input),
            Some(p) => p.next(),
        };
        if expected != Some(entry.stage) {
            return Err(RepoError::StageOrderViolation {
                input_id: entry.input_id,
                stage: entry.stage,
                previous,
            });
        }
        if let Some(path) = &self.path {
            let mut line = serde_json::to_string(&entry).expect("ledger entries serialize");
            line.push('\n');
            let mut f = OpenOptions::new().create(true).append(true).open(path)?;
            f.write_all(line.as_bytes())?;
        }
        self.last_stage.insert(entry.input_id, entry.stage);
        self.next_id = self.next_id.max(entry.input_id + 1);
        self.entries.push(entry);
        Ok(())
    }

    pub(super) fn history(&self, session: &str) -> Vec<LedgerEntry> {
        self.entries
            .iter()
            .filter(|e| e.session == session)
            .cloned()
            .collect()
    }

    pub(super) fn len(&self) -> usize {
        self.entries.len()
    }
}
