//! Natural-language search over record stores.
//!
//! A request such as `I am looking for document where between 1 and 5`
//! flows through the pipeline
//!
//! ```text
//! text -> lexer -> parser -> modeler -> resolver -> repository
//! ```
//!
//! [`Engine`] wires the stages together and records each completed stage in
//! an append-only ledger. The stages are usable on their own as well.
//!
//! ```
//! use isoas_core::{Engine, RuleKind};
//!
//! let engine = Engine::in_memory();
//! engine.repository().create_store("pdm").unwrap();
//! engine
//!     .repository()
//!     .ingest("pdm", "id,name,kind,description,value\n1,spec,document,design spec,3\n")
//!     .unwrap();
//! let session = engine.session("demo", None).unwrap();
//! let response = engine.process("I need document", &session);
//! assert_eq!(response.rule, Some(RuleKind::Stmt1));
//! assert_eq!(response.results.unwrap().ids(), [1]);
//! ```

pub mod engine;
pub mod lexer;
pub mod lexicon;
pub mod modeler;
pub mod parser;
pub mod repository;
pub mod resolver;

pub use engine::{DEFAULT_SESSION, 
    Diagnostic, Engine, EngineConfig, EngineError, ErrorDetail, FailedStage, PipelineError,
    PipelineResponse, Session, DEFAULT_STORE,
};
pub use lexer::{tokenize, LexError, Span, Token, TokenStream};
pub use lexicon::{AgreementTable, KnowledgeBase, Lexicon, Ontology, TokenClass};
pub use modeler::{build_model, check_agreement, Intent, Literal, ModelError, SemanticModel};
pub use parser::{parse, parse_many, ParseError, RuleKind, Statement};
pub use repository::{
    parse_sql, LedgerEntry, MatchMode, Record, RepoError, Repository, ResultRow, ResultSet,
    SavedBody, SavedQuery, Stage, StoreInfo, StoreState,
};
pub use resolver::{
    bind, integrate, render_sql, resolve, CompareOp, Filter, ResolveError, StructuredQuery,
};
