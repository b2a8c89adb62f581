//! Structured query IR: resolution from semantic models, integration of
//! several queries, parameter binding and SQL rendering.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modeler::{ConditionKind, Intent, Literal, SemanticModel};

/// Record attribute every condition applies to.
pub const CONDITION_ATTRIBUTE: &str = "value";

/// Fixed projection of rendered SQL.
pub const SELECT_PREFIX: &str = "SELECT id, name, kind, value FROM records WHERE ";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
}

impl CompareOp {
    pub const ALL: [CompareOp; 5] = [
        CompareOp::Eq,
        CompareOp::Lt,
        CompareOp::Gt,
        CompareOp::Le,
        CompareOp::Ge,
    ];

    pub fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Lt => "<",
            CompareOp::Gt => ">",
            CompareOp::Le => "<=",
            CompareOp::Ge => ">=",
        }
    }

    pub fn from_symbol(symbol: &str) -> Option<CompareOp> {
        CompareOp::ALL.into_iter().find(|op| op.symbol() == symbol)
    }

    /// Maps a comparison phrase from the lexicon to its operator.
    pub fn from_phrase(phrase: &str) -> Option<CompareOp> {
        match phrase {
            "equal to" | "with" => Some(CompareOp::Eq),
            "less than" => Some(CompareOp::Lt),
            "greater than" => Some(CompareOp::Gt),
            "less than and equal to" => Some(CompareOp::Le),
            "greater than and equal to" => Some(CompareOp::Ge),
            other => CompareOp::from_symbol(other),
        }
    }

    pub fn holds(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CompareOp::Eq => lhs == rhs,
            CompareOp::Lt => lhs < rhs,
            CompareOp::Gt => lhs > rhs,
            CompareOp::Le => lhs <= rhs,
            CompareOp::Ge => lhs >= rhs,
        }
    }
}

impl fmt::Display for CompareOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Filter {
    Compare { op: CompareOp, value: Literal },
    Between { lo: Literal, hi: Literal },
    Hole { op: CompareOp },
    And { children: Vec<Filter> },
}

impl Filter {
    /// Leaves in left-to-right order.
    pub fn leaves(&self) -> Vec<&Filter> {
        match self {
            Filter::And { children } => children.iter().flat_map(Filter::leaves).collect(),
            leaf => vec![leaf],
        }
    }

    fn conjoin(filters: Vec<Filter>) -> Option<Filter> {
        let mut children = Vec::new();
        for f in filters {
            match f {
                Filter::And { children: inner } => children.extend(inner),
                leaf => children.push(leaf),
            }
        }
        match children.len() {
            0 => None,
            1 => children.pop(),
            _ => Some(Filter::And { children }),
        }
    }

    fn bind_holes(self, values: &mut impl Iterator<Item = Literal>) -> Filter {
        match self {
            Filter::Hole { op } => match values.next() {
                Some(value) => Filter::Compare { op, value },
                None => Filter::Hole { op },
            },
            Filter::And { children } => Filter::And {
                children: children.into_iter().map(|c| c.bind_holes(values)).collect(),
            },
            leaf => leaf,
        }
    }
}

/// An unfilled comparison value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub op: CompareOp,
}

/// Metadata carried from the model that does not affect execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Annotation {
    /// A range request also named a comparison operator; the range was used.
    RangeOperator { phrase: String, op: CompareOp },
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Annotation::RangeOperator { phrase, op } => write!(
                f,
                "comparison `{phrase}` ({op}) combined with a between-range; resolved as the range"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructuredQuery {
    pub store: String,
    /// Matched as alternatives; sorted.
    pub concepts: BTreeSet<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub filter: Option<Filter>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub params: Vec<Param>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<Annotation>,
}

impl StructuredQuery {
    pub fn new(store: impl Into<String>, concept: impl Into<String>) -> Self {
        StructuredQuery {
            store: store.into(),
            concepts: [concept.into()].into_iter().collect(),
            filter: None,
            params: Vec::new(),
            annotations: Vec::new(),
        }
    }

    pub fn with_filter(mut self, filter: Filter) -> Self {
        self.params = holes(&filter);
        self.filter = Some(filter);
        self
    }

    pub fn is_bound(&self) -> bool {
        self.params.is_empty()
    }

    pub fn leaves(&self) -> Vec<&Filter> {
        self.filter.as_ref().map(Filter::leaves).unwrap_or_default()
    }
}

fn holes(filter: &Filter) -> Vec<Param> {
    filter
        .leaves()
        .into_iter()
        .filter_map(|leaf| match leaf {
            Filter::Hole { op } => Some(Param {
                name: CONDITION_ATTRIBUTE.to_string(),
                op: *op,
            }),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ResolveError {
    #[error("a {intent:?} fragment is not a complete search request")]
    Unresolvable { intent: Intent },
    #[error("query has no concept to search for")]
    MissingConcept,
    #[error("unknown comparison `{0}`")]
    UnknownOperator(String),
    #[error("range lower bound {lo} exceeds upper bound {hi}")]
    InvertedRange { lo: String, hi: String },
    #[error("cannot integrate queries over different stores: {0:?}")]
    MixedStores(Vec<String>),
    #[error("no queries to integrate")]
    EmptyList,
    #[error("query has {} unbound parameter(s): {}", .0.len(), .0.iter().map(|p| format!("{} {}", p.name, p.op)).collect::<Vec<_>>().join(", "))]
    UnboundParameter(Vec<Param>),
    #[error("expected {expected} binding(s), got {got}")]
    ArityMismatch { expected: usize, got: usize },
}

fn range(lo: &Literal, hi: &Literal) -> Result<Filter, ResolveError> {
    if let (Some(l), Some(h)) = (lo.as_f64(), hi.as_f64()) {
        if l > h {
            return Err(ResolveError::InvertedRange {
                lo: lo.text.clone(),
                hi: hi.text.clone(),
            });
        }
    }
    Ok(Filter::Between {
        lo: lo.clone(),
        hi: hi.clone(),
    })
}

fn operator(phrase: Option<&String>) -> Result<CompareOp, ResolveError> {
    let phrase = phrase.map(String::as_str).unwrap_or_default();
    CompareOp::from_phrase(phrase).ok_or_else(|| ResolveError::UnknownOperator(phrase.to_string()))
}

/// Resolves a search model into a query against `store`.
pub fn resolve(model: &SemanticModel, store: &str) -> Result<StructuredQuery, ResolveError> {
    if !model.intent.is_query() {
        return Err(ResolveError::Unresolvable {
            intent: model.intent,
        });
    }
    let concept = model
        .concept
        .clone()
        .filter(|c| !c.is_empty())
        .ok_or(ResolveError::MissingConcept)?;
    let mut query = StructuredQuery::new(store, concept);
    let Some(cond) = &model.condition else {
        return Ok(query);
    };
    let missing = || ResolveError::MissingConcept;
    let filter = match cond.kind {
        ConditionKind::Between => {
            if let Some(phrase) = &cond.op {
                query.annotations.push(Annotation::RangeOperator {
                    phrase: phrase.clone(),
                    op: operator(Some(phrase))?,
                });
            }
            range(cond.lo.as_ref().ok_or_else(missing)?, cond.hi.as_ref().ok_or_else(missing)?)?
        }
        ConditionKind::Compare => Filter::Compare {
            op: operator(cond.op.as_ref())?,
            value: cond.value.clone().ok_or_else(missing)?,
        },
        ConditionKind::CompareHole => Filter::Hole {
            op: operator(cond.op.as_ref())?,
        },
    };
    Ok(query.with_filter(filter))
}

/// Combines queries over one store: concepts are alternatives, filters all
/// apply.
pub fn integrate(queries: &[StructuredQuery]) -> Result<StructuredQuery, ResolveError> {
    let first = queries.first().ok_or(ResolveError::EmptyList)?;
    let stores: BTreeSet<&str> = queries.iter().map(|q| q.store.as_str()).collect();
    if stores.len() > 1 {
        return Err(ResolveError::MixedStores(
            stores.into_iter().map(String::from).collect(),
        ));
    }
    if queries.len() == 1 {
        return Ok(first.clone());
    }
    Ok(StructuredQuery {
        store: first.store.clone(),
        concepts: queries.iter().flat_map(|q| q.concepts.iter().cloned()).collect(),
        filter: Filter::conjoin(queries.iter().filter_map(|q| q.filter.clone()).collect()),
        params: queries.iter().flat_map(|q| q.params.iter().cloned()).collect(),
        annotations: queries
            .iter()
            .flat_map(|q| q.annotations.iter().cloned())
            .collect(),
    })
}

/// Fills the query's holes, in order.
pub fn bind(query: &StructuredQuery, values: &[Literal]) -> Result<StructuredQuery, ResolveError> {
    if values.len() != query.params.len() {
        return Err(ResolveError::ArityMismatch {
            expected: query.params.len(),
            got: values.len(),
        });
    }
    let mut bound = query.clone();
    let mut iter = values.iter().cloned();
    bound.filter = bound.filter.map(|f| f.bind_holes(&mut iter));
    bound.params.clear();
    Ok(bound)
}

fn quote(text: &str) -> String {
    format!("'{}'", text.replace('\'', "''"))
}

/// Renders a bound query in the fixed SQL form executed by SQL mode.
pub fn render_sql(query: &StructuredQuery) -> Result<String, ResolveError> {
    if !query.params.is_empty() {
        return Err(ResolveError::UnboundParameter(query.params.clone()));
    }
    if query.concepts.is_empty() {
        return Err(ResolveError::MissingConcept);
    }
    let kinds: Vec<String> = query
        .concepts
        .iter()
        .map(|c| format!("kind = {}", quote(c)))
        .collect();
    let mut sql = format!("{SELECT_PREFIX}({})", kinds.join(" OR "));
    for leaf in query.leaves() {
        match leaf {
            Filter::Compare { op, value } => {
                sql.push_str(&format!(" AND {CONDITION_ATTRIBUTE} {op} {value}"));
            }
            Filter::Between { lo, hi } => {
                sql.push_str(&format!(" AND {CONDITION_ATTRIBUTE} BETWEEN {lo} AND {hi}"));
            }
            Filter::Hole { .. } => {
                return Err(ResolveError::UnboundParameter(holes(leaf)));
            }
            Filter::And { .. } => unreachable!("leaves are never conjunctions"),
        }
    }
    Ok(sql)
}
