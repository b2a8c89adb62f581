//! Semantic models: validated intent structures built from parsed statements.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::{Span, Token};
use crate::lexicon::{KnowledgeBase, TokenClass, COPULAS};
use crate::parser::{RuleKind, Statement};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Intent {
    DirectSearch,
    ConditionalSearch,
    SubjectOnly,
    VerbOnly,
    ConceptOnly,
}

impl Intent {
    pub fn of(rule: RuleKind) -> Intent {
        match rule {
            RuleKind::Stmt1 | RuleKind::Stmt2 => Intent::DirectSearch,
            RuleKind::Condbt | RuleKind::Condeq | RuleKind::Condweq | RuleKind::Condeqbt => {
                Intent::ConditionalSearch
            }
            RuleKind::Astmt => Intent::SubjectOnly,
            RuleKind::Bstmt => Intent::VerbOnly,
            RuleKind::Cstmt => Intent::ConceptOnly,
        }
    }

    pub fn is_query(self) -> bool {
        matches!(self, Intent::DirectSearch | Intent::ConditionalSearch)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralKind {
    Numeric,
    Text,
}

/// A condition operand. Kept as text; the repository coerces at execution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Literal {
    pub kind: LiteralKind,
    pub text: String,
}

impl Literal {
    pub fn numeric(text: impl Into<String>) -> Self {
        Literal {
            kind: LiteralKind::Numeric,
            text: text.into(),
        }
    }

    pub fn text(text: impl Into<String>) -> Self {
        Literal {
            kind: LiteralKind::Text,
            text: text.into(),
        }
    }

    /// Classifies user-supplied text: anything that reads as a decimal number
    /// is numeric.
    pub fn infer(text: &str) -> Self {
        let t = text.trim();
        if is_decimal(t) {
            Literal::numeric(t)
        } else {
            Literal::text(t)
        }
    }

    pub fn from_token(token: &Token) -> Self {
        match token.class {
            TokenClass::Number => Literal::numeric(token.lexeme.clone()),
            _ => Literal::text(token.lexeme.clone()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        if is_decimal(&self.text) {
            self.text.parse().ok()
        } else {
            None
        }
    }

    pub fn is_numeric(&self) -> bool {
        self.kind == LiteralKind::Numeric
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            LiteralKind::Numeric => f.write_str(&self.text),
            LiteralKind::Text => write!(f, "'{}'", self.text.replace('\'', "''")),
        }
    }
}

/// `-?digits(.digits)?`
pub fn is_decimal(text: &str) -> bool {
    let body = text.strip_prefix('-').unwrap_or(text);
    let (int, frac) = match body.split_once('.') {
        Some((i, f)) => (i, Some(f)),
        None => (body, None),
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    digits(int) && frac.is_none_or(digits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConditionKind {
    Between,
    Compare,
    CompareHole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub kind: ConditionKind,
    /// Comparison phrase as written.
    pub op: Option<String>,
    pub lo: Option<Literal>,
    pub hi: Option<Literal>,
    pub value: Option<Literal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub rule: RuleKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SemanticModel {
    pub intent: Intent,
    pub subject: Option<String>,
    pub predicate: Option<String>,
    pub concept: Option<String>,
    pub condition: Option<ConditionSpec>,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementViolation {
    pub subject: String,
    pub copula: String,
    pub expected: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgreementResult {
    pub ok: bool,
    pub violation: Option<AgreementViolation>,
}

impl AgreementResult {
    fn pass() -> Self {
        AgreementResult {
            ok: true,
            violation: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ModelError {
    #[error("`{phrase}` is not a {class} phrase in the lexicon")]
    UnknownPhrase { phrase: String, class: TokenClass },
    #[error("`{}` does not agree with `{}` (expected {})",
        .0.violation.as_ref().map_or("", |v| v.subject.as_str()),
        .0.violation.as_ref().map_or("", |v| v.copula.as_str()),
        .0.violation.as_ref().map_or(String::new(), |v| v.expected.join(" or ")))]
    AgreementViolation(AgreementResult),
    #[error("the knowledge base has no `{from}` -> `{to}` relation")]
    CompositionViolation { from: String, to: String },
}

/// Checks subject/copula agreement. Only predicates starting with is/am/are
/// are constrained.
pub fn check_agreement(
    subject: &str,
    predicate: &str,
    kb: &KnowledgeBase,
) -> Result<AgreementResult, ModelError> {
    if kb.lexicon.class_of(subject) != Some(TokenClass::A) {
        return Err(ModelError::UnknownPhrase {
            phrase: subject.to_string(),
            class: TokenClass::A,
        });
    }
    if kb.lexicon.class_of(predicate) != Some(TokenClass::B) {
        return Err(ModelError::UnknownPhrase {
            phrase: predicate.to_string(),
            class: TokenClass::B,
        });
    }
    let subject = crate::lexicon::normalize_phrase(subject);
    let predicate = crate::lexicon::normalize_phrase(predicate);
    let first = predicate.split(' ').next().unwrap_or_default();
    if !COPULAS.contains(&first) || kb.agreement.allows(&subject, first) {
        return Ok(AgreementResult::pass());
    }
    Ok(AgreementResult {
        ok: false,
        violation: Some(AgreementViolation {
            expected: kb.agreement.copulas_for(&subject),
            subject,
            copula: first.to_string(),
        }),
    })
}

fn require_relation(kb: &KnowledgeBase, from: &str, to: &str) -> Result<(), ModelError> {
    match kb.ontology.related(from, to) {
        Ok(true) => Ok(()),
        _ => Err(ModelError::CompositionViolation {
            from: from.to_string(),
            to: to.to_string(),
        }),
    }
}

fn condition(statement: &Statement) -> Option<ConditionSpec> {
    let cond = &statement.cond_tokens;
    let lit = |i: usize| cond.get(i).map(Literal::from_token);
    let op = |i: usize| cond.get(i).map(|t| t.lexeme.clone());
    match statement.rule {
        // W Bt v And v
        RuleKind::Condbt => Some(ConditionSpec {
            kind: ConditionKind::Between,
            op: None,
            lo: lit(2),
            hi: lit(4),
            value: None,
        }),
        // Eq v
        RuleKind::Condeq => Some(ConditionSpec {
            kind: ConditionKind::Compare,
            op: op(0),
            lo: None,
            hi: None,
            value: lit(1),
        }),
        // W Eq
        RuleKind::Condweq => Some(ConditionSpec {
            kind: ConditionKind::CompareHole,
            op: op(1),
            lo: None,
            hi: None,
            value: None,
        }),
        // W Eq Bt v And v
        RuleKind::Condeqbt => Some(ConditionSpec {
            kind: ConditionKind::Between,
            op: op(1),
            lo: lit(3),
            hi: lit(5),
            value: None,
        }),
        _ => None,
    }
}

/// Builds and validates the semantic model of one statement.
pub fn build_model(statement: &Statement, kb: &KnowledgeBase) -> Result<SemanticModel, ModelError> {
    let subject = statement.subject.as_ref().map(|t| t.lexeme.clone());
    let predicate = statement.verb.as_ref().map(|t| t.lexeme.clone());
    if let (Some(s), Some(p)) = (&subject, &predicate) {
        let result = check_agreement(s, p, kb)?;
        if !result.ok {
            return Err(ModelError::AgreementViolation(result));
        }
    }

    // A `where` clause must be licensed by the knowledge base for each
    // operator family that follows it.
    if statement.cond_tokens.first().is_some_and(|t| t.class == TokenClass::W) {
        for token in &statement.cond_tokens[1..] {
            match token.class {
                TokenClass::Bt => require_relation(kb, "where", "between")?,
                TokenClass::Eq => require_relation(kb, "where", "equal")?,
                _ => {}
            }
        }
    }

    Ok(SemanticModel {
        intent: Intent::of(statement.rule),
        subject,
        predicate,
        concept: statement.concept.as_ref().map(|t| t.lexeme.clone()),
        condition: condition(statement),
        provenance: Provenance {
            rule: statement.rule,
            span: statement.span,
        },
    })
}
