use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use super::ledger::now_millis;
use super::{parse_sql, read_jsonl, to_jsonl, write_atomic, RepoError, Result};
use crate::resolver::StructuredQuery;

/// Body of a saved query: structured IR or restricted SQL text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "body", rename_all = "lowercase")]
pub enum SavedBody {
    Ir(StructuredQuery),
    Sql(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SavedQuery {
    pub name: String,
    #[serde(flatten)]
    pub body: SavedBody,
    #[serde(default)]
    pub created: u64,
    #[serde(default)]
    pub modified: u64,
}

impl SavedQuery {
    pub fn new(name: impl Into<String>, body: SavedBody) -> Self {
        SavedQuery {
            name: name.into(),
            body,
            created: 0,
            modified: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.name.trim().is_empty() || self.name.chars().any(char::is_whitespace) {
            return Err(RepoError::InvalidQuery(format!(
                "name `{}` must be a single word",
                self.name
            )));
        }
        match &self.body {
            SavedBody::Ir(q) if q.concepts.is_empty() => {
                Err(RepoError::InvalidQuery("query has no concept".into()))
            }
            SavedBody::Ir(_) => Ok(()),
            SavedBody::Sql(sql) => parse_sql(sql, "").map(|_| ()).map_err(RepoError::from),
        }
    }
}

pub(super) struct SavedQueries {
    path: Option<PathBuf>,
    queries: BTreeMap<String, SavedQuery>,
}

impl SavedQueries {
    pub(super) fn new(path: Option<PathBuf>) -> Result<Self> {
        let list: Vec<SavedQuery> = match &path {
            Some(p) => read_jsonl(p)?,
            None => Vec::new(),
        };
        Ok(SavedQueries {
            path,
            queries: list.into_iter().map(|q| (q.name.clone(), q)).collect(),
        })
    }

    fn flush(&self) -> Result<()> {
        if let Some(path) = &self.path {
            write_atomic(path, to_jsonl(self.queries.values()).as_bytes())?;
        }
        Ok(())
    }

    pub(super) fn save(&mut self, mut query: SavedQuery, overwrite: bool) -> Result<SavedQuery> {
        query.validate()?;
        let now = now_millis();
        match self.queries.get(&query.name) {
            Some(_) if !overwrite => return Err(RepoError::QueryNameInUse(query.name)),
            Some(existing) => query.created = existing.created,
            None => query.created = now,
        }
        query.modified = now;
        self.queries.insert(query.name.clone(), query.clone());
        self.flush()?;
        Ok(query)
    }

    pub(super) fn load(&self, name: &str) -> Result<SavedQuery> {
        self.queries
            .get(name)
            .cloned()
            .ok_or_else(|| RepoError::UnknownQuery(name.to_string()))
    }

    pub(super) fn list(&self) -> Vec<SavedQuery> {
        self.queries.values().cloned().collect()
    }

    pub(super) fn delete(&mut self, name: &str) -> Result<()> {
        self.queries
            .remove(name)
            .ok_or_else(|| RepoError::UnknownQuery(name.to_string()))?;
        self.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sql(name: &str) -> SavedQuery {
        SavedQuery::new(
            name,
            SavedBody::Sql("SELECT id, name, kind, value FROM records WHERE (kind = 'cad')".into()),
        )
    }

    #[test]
    fn crud() {
        let mut saved = SavedQueries::new(None).unwrap();
        saved.save(sql("q1"), false).unwrap();
        saved
            .save(
                SavedQuery::new("q2", SavedBody::Ir(StructuredQuery::new("pdm", "document"))),
                false,
            )
            .unwrap();
        assert_eq!(saved.load("q1").unwrap().body, sql("q1").body);
        let names: Vec<_> = saved.list().into_iter().map(|q| q.name).collect();
        assert_eq!(names, ["q1", "q2"]);
        assert!(matches!(saved.save(sql("q1"), false), Err(RepoError::QueryNameInUse(_))));
        saved.save(sql("q1"), true).unwrap();
        saved.delete("q1").unwrap();
        assert!(matches!(saved.load("q1"), Err(RepoError::UnknownQuery(_))));
        assert!(matches!(saved.delete("q1"), Err(RepoError::UnknownQuery(_))));
    }

    #[test]
    fn bodies_are_validated() {
        let mut saved = SavedQueries::new(None).unwrap();
        assert!(matches!(
            saved.save(SavedQuery::new("bad", SavedBody::Sql("SELECT *".into())), false),
            Err(RepoError::Sql(_))
        ));
        let mut empty = StructuredQuery::new("s", "x");
        empty.concepts.clear();
        assert!(matches!(
            saved.save(SavedQuery::new("bad", SavedBody::Ir(empty)), false),
            Err(RepoError::InvalidQuery(_))
        ));
        assert!(matches!(
            saved.save(sql("two words"), false),
            Err(RepoError::InvalidQuery(_))
        ));
    }

    #[test]
    fn json_shape() {
        let json = serde_json::to_value(sql("q")).unwrap();
        assert_eq!(json["kind"], "sql");
        assert!(json["body"].as_str().unwrap().starts_with("SELECT"));
        let back: SavedQuery = serde_json::from_value(json).unwrap();
        assert_eq!(back, sql("q"));
    }

    #[test]
    fn persists() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("saved.jsonl");
        let mut saved = SavedQueries::new(Some(path.clone())).unwrap();
        let stored = saved.save(sql("q"), false).unwrap();
        let reopened = SavedQueries::new(Some(path)).unwrap();
        assert_eq!(reopened.load("q").unwrap(), stored);
    }
}
