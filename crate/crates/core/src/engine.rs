//! End-to-end request processing.
//!
//! [`Engine::process`] runs one request through every stage, recording each
//! completed stage in the ledger. Failures are returned inside the
//! [`PipelineResponse`] together with everything computed before the failing
//! stage, so front ends can show partial results and hints.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::json;
use thiserror::Error;

use crate::lexer::{tokenize, LexError, TokenStream};
use crate::lexicon::{
    KnowledgeBase, Lexicon, LexiconError, Ontology, OntologyError, TokenClass,
};
use crate::modeler::{build_model, Intent, Literal, ModelError, SemanticModel};
use crate::parser::{parse_many, ParseError, RuleKind, Statement};
use crate::repository::{
    LedgerEntry, RepoError, Repository, ResultSet, SavedBody, SqlError, Stage, StoreState,
};
use crate::resolver::{bind, integrate, render_sql, resolve, Param, ResolveError, StructuredQuery};

/// Store used when a session names none and a store with this name exists.
pub const DEFAULT_STORE: &str = "default";

/// Session used when a caller names none.
pub const DEFAULT_SESSION: &str = "default";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: String,
    pub active_store: String,
    pub created: u64,
}

/// Stage at which a request failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FailedStage {
    Input,
    Lex,
    Parse,
    Model,
    Resolve,
    Execute,
}

/// Machine-readable failure detail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum ErrorDetail {
    EmptyInput,
    EncodingError {
        offset: usize,
    },
    UnknownWord {
        word: String,
        offset: usize,
    },
    NoRuleMatches {
        position: usize,
        expected: Vec<TokenClass>,
        end_allowed: bool,
        found: Option<TokenClass>,
    },
    UnknownPhrase {
        phrase: String,
        class: TokenClass,
    },
    AgreementViolation {
        subject: String,
        copula: String,
        expected: Vec<String>,
    },
    CompositionViolation {
        from: String,
        to: String,
    },
    Unresolvable {
        intent: Intent,
    },
    MissingConcept,
    UnknownOperator {
        phrase: String,
    },
    InvertedRange {
        lo: String,
        hi: String,
    },
    MixedStores {
        stores: Vec<String>,
    },
    UnboundParameter {
        params: Vec<Param>,
    },
    ArityMismatch {
        expected: usize,
        got: usize,
    },
    SqlSyntaxError {
        position: usize,
        expected: String,
        found: String,
    },
    UnknownStore {
        store: String,
    },
    StoreDetached {
        store: String,
    },
    NonNumericLiteral {
        value: String,
    },
    UnknownQuery {
        name: String,
    },
    NoActiveStore,
    Storage {
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineError {
    pub stage: FailedStage,
    pub message: String,
    #[serde(flatten)]
    pub detail: ErrorDetail,
}

impl PipelineError {
    pub fn new(stage: FailedStage, message: impl Into<String>, detail: ErrorDetail) -> Self {
        PipelineError {
            stage,
            message: message.into(),
            detail,
        }
    }
}

impl std::fmt::Display for PipelineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{:?} stage: {}", self.stage, self.message)
    }
}

impl std::error::Error for PipelineError {}

impl From<&LexError> for ErrorDetail {
    fn from(e: &LexError) -> Self {
        match e {
            LexError::Encoding { offset } => ErrorDetail::EncodingError { offset: *offset },
            LexError::UnknownWord { word, offset } => ErrorDetail::UnknownWord {
                word: word.clone(),
                offset: *offset,
            },
        }
    }
}

impl From<&ParseError> for ErrorDetail {
    fn from(e: &ParseError) -> Self {
        match e {
            ParseError::EmptyInput => ErrorDetail::EmptyInput,
            ParseError::NoRuleMatches {
                position,
                expected,
                end_allowed,
                found,
            } => ErrorDetail::NoRuleMatches {
                position: *position,
                expected: expected.clone(),
                end_allowed: *end_allowed,
                found: *found,
            },
        }
    }
}

impl From<&ModelError> for ErrorDetail {
    fn from(e: &ModelError) -> Self {
        match e {
            ModelError::UnknownPhrase { phrase, class } => ErrorDetail::UnknownPhrase {
                phrase: phrase.clone(),
                class: *class,
            },
            ModelError::AgreementViolation(result) => {
                let v = result.violation.clone().unwrap_or_else(|| {
                    crate::modeler::AgreementViolation {
                        subject: String::new(),
                        copula: String::new(),
                        expected: Vec::new(),
                    }
                });
                ErrorDetail::AgreementViolation {
                    subject: v.subject,
                    copula: v.copula,
                    expected: v.expected,
                }
            }
            ModelError::CompositionViolation { from, to } => ErrorDetail::CompositionViolation {
                from: from.clone(),
                to: to.clone(),
            },
        }
    }
}

impl From<&ResolveError> for ErrorDetail {
    fn from(e: &ResolveError) -> Self {
        match e {
            ResolveError::Unresolvable { intent } => ErrorDetail::Unresolvable { intent: *intent },
            ResolveError::MissingConcept => ErrorDetail::MissingConcept,
            ResolveError::UnknownOperator(p) => ErrorDetail::UnknownOperator { phrase: p.clone() },
            ResolveError::InvertedRange { lo, hi } => ErrorDetail::InvertedRange {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            ResolveError::MixedStores(stores) => ErrorDetail::MixedStores {
                stores: stores.clone(),
            },
            ResolveError::EmptyList => ErrorDetail::MissingConcept,
            ResolveError::UnboundParameter(params) => ErrorDetail::UnboundParameter {
                params: params.clone(),
            },
            ResolveError::ArityMismatch { expected, got } => ErrorDetail::ArityMismatch {
                expected: *expected,
                got: *got,
            },
        }
    }
}

impl From<&RepoError> for ErrorDetail {
    fn from(e: &RepoError) -> Self {
        match e {
            RepoError::UnknownStore(s) => ErrorDetail::UnknownStore { store: s.clone() },
            RepoError::StoreDetached(s) => ErrorDetail::StoreDetached { store: s.clone() },
            RepoError::NonNumericLiteral(v) => ErrorDetail::NonNumericLiteral { value: v.clone() },
            RepoError::UnboundParameter(params) => ErrorDetail::UnboundParameter {
                params: params.clone(),
            },
            RepoError::Sql(SqlError::Syntax {
                position,
                expected,
                found,
            }) => ErrorDetail::SqlSyntaxError {
                position: *position,
                expected: expected.clone(),
                found: found.clone(),
            },
            RepoError::Sql(SqlError::InvertedRange { lo, hi }) => ErrorDetail::InvertedRange {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            RepoError::UnknownQuery(name) => ErrorDetail::UnknownQuery { name: name.clone() },
            other => ErrorDetail::Storage {
                message: other.to_string(),
            },
        }
    }
}

fn failure<E>(stage: FailedStage, e: &E) -> PipelineError
where
    E: std::fmt::Display,
    for<'a> ErrorDetail: From<&'a E>,
{
    PipelineError::new(stage, e.to_string(), ErrorDetail::from(e))
}

/// Non-fatal note attached to a response.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub code: String,
    pub message: String,
}

impl Diagnostic {
    fn new(code: &str, message: impl Into<String>) -> Self {
        Diagnostic {
            code: code.to_string(),
            message: message.into(),
        }
    }
}

/// Everything a request produced, up to the first failing stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResponse {
    pub input_id: Option<u64>,
    pub session: String,
    pub store: String,
    pub tokens: Option<TokenStream>,
    /// Rule of the first statement.
    pub rule: Option<RuleKind>,
    pub statements: Option<Vec<Statement>>,
    /// Model of the first statement.
    pub model: Option<SemanticModel>,
    pub models: Option<Vec<SemanticModel>>,
    pub query: Option<StructuredQuery>,
    pub sql: Option<String>,
    pub results: Option<ResultSet>,
    pub diagnostics: Vec<Diagnostic>,
    pub error: Option<PipelineError>,
}

impl PipelineResponse {
    fn new(session: &str, store: &str) -> Self {
        PipelineResponse {
            input_id: None,
            session: session.to_string(),
            store: store.to_string(),
            tokens: None,
            rule: None,
            statements: None,
            model: None,
            models: None,
            query: None,
            sql: None,
            results: None,
            diagnostics: Vec::new(),
            error: None,
        }
    }

    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }

    fn fail(mut self, error: PipelineError) -> Self {
        self.error = Some(error);
        self
    }
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Repository(#[from] RepoError),
    #[error(transparent)]
    Resolve(#[from] ResolveError),
    #[error("lexicon: {0}")]
    Lexicon(#[from] LexiconError),
    #[error("ontology: {0}")]
    Ontology(#[from] OntologyError),
    #[error("{0}")]
    Pipeline(#[from] PipelineError),
    #[error("no store selected; create a store named `default`, keep exactly one attached store, or pass a store name")]
    NoActiveStore,
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl EngineError {
    pub fn detail(&self) -> ErrorDetail {
        match self {
            EngineError::Repository(e) => ErrorDetail::from(e),
            EngineError::Resolve(e) => ErrorDetail::from(e),
            EngineError::Pipeline(e) => e.detail.clone(),
            EngineError::NoActiveStore => ErrorDetail::NoActiveStore,
            other => ErrorDetail::Storage {
                message: other.to_string(),
            },
        }
    }
}

/// Where an engine keeps its files and which knowledge base it loads.
#[derive(Debug, Clone, Default)]
pub struct EngineConfig {
    /// Repository home; `None` keeps everything in memory.
    pub home: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub ontology: Option<PathBuf>,
}

fn read(path: &Path) -> Result<String, EngineError> {
    fs::read_to_string(path).map_err(|source| EngineError::Read {
        path: path.to_path_buf(),
        source,
    })
}

pub struct Engine {
    kb: KnowledgeBase,
    repo: Repository,
    sessions: Mutex<HashMap<String, Session>>,
}

impl Engine {
    pub fn new(kb: KnowledgeBase, repo: Repository) -> Self {
        Engine {
            kb,
            repo,
            sessions: Mutex::new(HashMap::new()),
        }
    }

    /// In-memory engine with the bundled knowledge base.
    pub fn in_memory() -> Self {
        Engine::new(KnowledgeBase::default(), Repository::in_memory())
    }

    pub fn open(config: &EngineConfig) -> Result<Self, EngineError> {
        let lexicon = match &config.lexicon {
            Some(p) => Lexicon::parse(&read(p)?)?,
            None => Lexicon::default(),
        };
        let ontology = match &config.ontology {
            Some(p) => Ontology::parse(&read(p)?)?,
            None => Ontology::bundled(),
        };
        let repo = match &config.home {
            Some(home) => Repository::open(home)?,
            None => Repository::in_memory(),
        };
        Ok(Engine::new(KnowledgeBase::new(lexicon, ontology), repo))
    }

    pub fn knowledge(&self) -> &KnowledgeBase {
        &self.kb
    }

    pub fn repository(&self) -> &Repository {
        &self.repo
    }

    /// The store used when none is named: `default` if it exists, otherwise
    /// the only attached store.
    pub fn default_store(&self) -> Result<String, EngineError> {
        let stores = self.repo.list_stores();
        if stores.iter().any(|s| s.name == DEFAULT_STORE) {
            return Ok(DEFAULT_STORE.to_string());
        }
        let attached: Vec<_> = stores
            .iter()
            .filter(|s| s.state == StoreState::Attached)
            .collect();
        match attached.as_slice() {
            [only] => Ok(only.name.clone()),
            _ => Err(EngineError::NoActiveStore),
        }
    }

    /// Returns the session, creating it if needed. A given store becomes the
    /// session's active store.
    pub fn session(&self, id: &str, store: Option<&str>) -> Result<Session, EngineError> {
        if let Some(store) = store {
            self.repo.store_info(store)?;
        }
        let mut sessions = self.sessions.lock().expect("session lock");
        if let Some(existing) = sessions.get_mut(id) {
            if let Some(store) = store {
                existing.active_store = store.to_string();
            }
            return Ok(existing.clone());
        }
        let active_store = match store {
            Some(s) => s.to_string(),
            None => self.default_store()?,
        };
        let session = Session {
            id: id.to_string(),
            active_store,
            created: crate::repository::LedgerEntry::new(0, id, Stage::Input, json!(null)).timestamp,
        };
        sessions.insert(id.to_string(), session.clone());
        Ok(session)
    }

    /// Resolves the session, then runs `f`; session errors become a failed
    /// response.
    fn in_session(
        &self,
        session: &str,
        store: Option<&str>,
        f: impl FnOnce(&Session) -> PipelineResponse,
    ) -> PipelineResponse {
        match self.session(session, store) {
            Ok(s) => f(&s),
            Err(e) => PipelineResponse::new(session, store.unwrap_or_default())
                .fail(PipelineError::new(FailedStage::Input, e.to_string(), e.detail())),
        }
    }

    /// [`Engine::process`] for a session named by id, optionally switching
    /// its active store first.
    pub fn query(&self, text: &str, session: &str, store: Option<&str>) -> PipelineResponse {
        self.in_session(session, store, |s| self.process(text, s))
    }

    /// [`Engine::run_sql`] for a session named by id.
    pub fn sql(&self, sql: &str, session: &str, store: Option<&str>) -> PipelineResponse {
        self.in_session(session, store, |s| self.run_sql(sql, s))
    }

    /// [`Engine::run_saved`] for a session named by id.
    pub fn saved(
        &self,
        name: &str,
        bindings: &[Literal],
        session: &str,
        store: Option<&str>,
    ) -> PipelineResponse {
        self.in_session(session, store, |s| self.run_saved(name, bindings, s))
    }

    fn log(&self, input_id: u64, session: &Session, stage: Stage, payload: serde_json::Value) -> Result<(), PipelineError> {
        self.repo
            .log_stage(LedgerEntry::new(input_id, &session.id, stage, payload))
            .map_err(|e| failure(FailedStage::Input, &e))
    }

    /// Runs a natural-language request through every stage.
    pub fn process(&self, text: &str, session: &Session) -> PipelineResponse {
        let mut resp = PipelineResponse::new(&session.id, &session.active_store);
        let input_id = match self.repo.log_input(
            &session.id,
            json!({"text": text, "store": session.active_store}),
        ) {
            Ok(id) => id,
            Err(e) => return resp.fail(failure(FailedStage::Input, &e)),
        };
        resp.input_id = Some(input_id);
        match self.run_stages(text, session, input_id, &mut resp) {
            Ok(()) => resp,
            Err(e) => resp.fail(e),
        }
    }

    fn run_stages(
        &self,
        text: &str,
        session: &Session,
        input_id: u64,
        resp: &mut PipelineResponse,
    ) -> Result<(), PipelineError> {
        let tokens = tokenize(text, &self.kb.lexicon).map_err(|e| failure(FailedStage::Lex, &e))?;
        if tokens.is_empty() {
            resp.tokens = Some(tokens);
            return Err(PipelineError::new(
                FailedStage::Input,
                "the request is empty",
                ErrorDetail::EmptyInput,
            ));
        }
        self.log(input_id, session, Stage::Lexed, json!(tokens))?;
        resp.tokens = Some(tokens.clone());

        let query = self.understand(&tokens, &session.active_store, resp, |stage, payload| {
            self.log(input_id, session, stage, payload)
        })?;

        if !query.is_bound() {
            resp.diagnostics.push(Diagnostic::new(
                "unbound-parameter",
                "the request leaves a comparison value open; save it and run it with a binding",
            ));
            return Err(failure(FailedStage::Execute, &ResolveError::UnboundParameter(query.params.clone())));
        }
        let results = self
            .repo
            .execute(&query)
            .map_err(|e| failure(FailedStage::Execute, &e))?;
        self.log(input_id, session, Stage::Executed, json!(results))?;
        note_matching(&results, resp);
        resp.results = Some(results);
        Ok(())
    }

    /// Parse, model and resolve; fills the response as stages complete and
    /// reports each completed stage through `record`.
    fn understand(
        &self,
        tokens: &TokenStream,
        store: &str,
        resp: &mut PipelineResponse,
        mut record: impl FnMut(Stage, serde_json::Value) -> Result<(), PipelineError>,
    ) -> Result<StructuredQuery, PipelineError> {
        let statements = parse_many(tokens).map_err(|e| {
            let mut err = failure(FailedStage::Parse, &e);
            if matches!(e, ParseError::EmptyInput) {
                err.stage = FailedStage::Input;
            }
            err
        })?;
        record(Stage::Parsed, json!(statements))?;
        resp.rule = statements.first().map(|s| s.rule);
        resp.statements = Some(statements.clone());

        let models = statements
            .iter()
            .map(|s| build_model(s, &self.kb))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| failure(FailedStage::Model, &e))?;
        record(Stage::Modeled, json!(models))?;
        resp.model = models.first().cloned();
        resp.models = Some(models.clone());

        let queries = models
            .iter()
            .map(|m| resolve(m, store))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| failure(FailedStage::Resolve, &e))?;
        let query = integrate(&queries).map_err(|e| failure(FailedStage::Resolve, &e))?;
        let sql = render_sql(&query).ok();
        record(Stage::Resolved, json!({"query": query, "sql": sql}))?;
        for note in &query.annotations {
            resp.diagnostics.push(Diagnostic::new("range-operator", note.to_string()));
        }
        resp.query = Some(query.clone());
        resp.sql = sql;
        Ok(query)
    }

    /// Resolves a request into a query without executing or logging it.
    pub fn compile(&self, text: &str, store: &str) -> Result<StructuredQuery, PipelineError> {
        let tokens = tokenize(text, &self.kb.lexicon).map_err(|e| failure(FailedStage::Lex, &e))?;
        let mut scratch = PipelineResponse::new("", store);
        self.understand(&tokens, store, &mut scratch, |_, _| Ok(()))
    }

    /// Runs restricted SQL against the session's store.
    pub fn run_sql(&self, sql: &str, session: &Session) -> PipelineResponse {
        let mut resp = PipelineResponse::new(&session.id, &session.active_store);
        resp.sql = Some(sql.to_string());
        match self.repo.execute_sql(&session.active_store, sql) {
            Ok(results) => {
                note_matching(&results, &mut resp);
                resp.results = Some(results);
                resp
            }
            Err(e) => {
                let stage = match e {
                    RepoError::Sql(_) => FailedStage::Parse,
                    _ => FailedStage::Execute,
                };
                resp.fail(failure(stage, &e))
            }
        }
    }

    /// Runs a saved query against the session's store. IR queries take
    /// `bindings` for their open parameters; SQL queries take none.
    pub fn run_saved(&self, name: &str, bindings: &[Literal], session: &Session) -> PipelineResponse {
        let mut resp = PipelineResponse::new(&session.id, &session.active_store);
        let saved = match self.repo.load_query(name) {
            Ok(s) => s,
            Err(e) => return resp.fail(failure(FailedStage::Input, &e)),
        };
        match saved.body {
            SavedBody::Sql(sql) => {
                if !bindings.is_empty() {
                    let err = ResolveError::ArityMismatch {
                        expected: 0,
                        got: bindings.len(),
                    };
                    return resp.fail(failure(FailedStage::Resolve, &err));
                }
                self.run_sql(&sql, session)
            }
            SavedBody::Ir(mut query) => {
                query.store = session.active_store.clone();
                let query = match bind(&query, bindings) {
                    Ok(q) => q,
                    Err(e) => {
                        resp.query = Some(query);
                        return resp.fail(failure(FailedStage::Resolve, &e));
                    }
                };
                resp.sql = render_sql(&query).ok();
                for note in &query.annotations {
                    resp.diagnostics.push(Diagnostic::new("range-operator", note.to_string()));
                }
                resp.query = Some(query.clone());
                match self.repo.execute(&query) {
                    Ok(results) => {
                        note_matching(&results, &mut resp);
                        resp.results = Some(results);
                        resp
                    }
                    Err(e) => resp.fail(failure(FailedStage::Execute, &e)),
                }
            }
        }
    }
}

fn note_matching(results: &ResultSet, resp: &mut PipelineResponse) {
    if results.matched_by == crate::repository::MatchMode::Text {
        resp.diagnostics.push(Diagnostic::new(
            "text-match",
            "no record kind matched; results match the search term in name or description",
        ));
    }
}
