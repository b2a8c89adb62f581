//! Recognizer for the nine request productions.
//!
//! Every production is a fixed sequence of token classes, so matching is a
//! left-to-right walk that keeps the set of productions still viable. The walk
//! also yields the classes that would have extended a viable prefix, which the
//! front ends show as hints when a request does not parse.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexer::{Span, Token, TokenStream};
use crate::lexicon::TokenClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Astmt,
    Bstmt,
    Cstmt,
    Stmt1,
    Stmt2,
    Condbt,
    Condeq,
    Condweq,
    Condeqbt,
}

/// A position in a production.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Slot {
    Class(TokenClass),
    /// A condition operand: C or NUMBER.
    Value,
}

impl Slot {
    fn accepts(self, class: TokenClass) -> bool {
        match self {
            Slot::Class(c) => c == class,
            Slot::Value => matches!(class, TokenClass::C | TokenClass::Number),
        }
    }

    fn classes(self) -> &'static [TokenClass] {
        use TokenClass::*;
        match self {
            Slot::Class(A) => &[A],
            Slot::Class(B) => &[B],
            Slot::Class(C) => &[C],
            Slot::Class(W) => &[W],
            Slot::Class(Bt) => &[Bt],
            Slot::Class(Eq) => &[Eq],
            Slot::Class(And) => &[And],
            Slot::Class(Number) => &[Number],
            Slot::Value => &[C, Number],
        }
    }
}

const A: Slot = Slot::Class(TokenClass::A);
const B: Slot = Slot::Class(TokenClass::B);
const C: Slot = Slot::Class(TokenClass::C);
const W: Slot = Slot::Class(TokenClass::W);
const BT: Slot = Slot::Class(TokenClass::Bt);
const EQ: Slot = Slot::Class(TokenClass::Eq);
const AND: Slot = Slot::Class(TokenClass::And);
const V: Slot = Slot::Value;

impl RuleKind {
    pub const ALL: [RuleKind; 9] = [
        RuleKind::Astmt,
        RuleKind::Bstmt,
        RuleKind::Cstmt,
        RuleKind::Stmt1,
        RuleKind::Stmt2,
        RuleKind::Condbt,
        RuleKind::Condeq,
        RuleKind::Condweq,
        RuleKind::Condeqbt,
    ];

    fn body(self) -> &'static [Slot] {
        match self {
            RuleKind::Astmt => &[A],
            RuleKind::Bstmt => &[B],
            RuleKind::Cstmt => &[C],
            RuleKind::Stmt1 => &[A, B, C],
            RuleKind::Stmt2 => &[B, C],
            RuleKind::Condbt => &[A, B, C, W, BT, V, AND, V],
            RuleKind::Condeq => &[A, B, C, EQ, V],
            RuleKind::Condweq => &[A, B, C, W, EQ],
            RuleKind::Condeqbt => &[A, B, C, W, EQ, BT, V, AND, V],
        }
    }

    pub fn arity(self) -> usize {
        self.body().len()
    }

    /// Whether `class` may appear at `index` of this production.
    pub fn accepts_at(self, index: usize, class: TokenClass) -> bool {
        self.body().get(index).is_some_and(|slot| slot.accepts(class))
    }

    /// Classes allowed at `index`; value slots allow C and NUMBER.
    pub fn classes_at(self, index: usize) -> &'static [TokenClass] {
        self.body().get(index).map(|s| s.classes()).unwrap_or(&[])
    }

    pub fn is_conditional(self) -> bool {
        matches!(
            self,
            RuleKind::Condbt | RuleKind::Condeq | RuleKind::Condweq | RuleKind::Condeqbt
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            RuleKind::Astmt => "astmt",
            RuleKind::Bstmt => "bstmt",
            RuleKind::Cstmt => "cstmt",
            RuleKind::Stmt1 => "stmt1",
            RuleKind::Stmt2 => "stmt2",
            RuleKind::Condbt => "condbt",
            RuleKind::Condeq => "condeq",
            RuleKind::Condweq => "condweq",
            RuleKind::Condeqbt => "condeqbt",
        }
    }
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Statement {
    pub rule: RuleKind,
    pub subject: Option<Token>,
    pub verb: Option<Token>,
    pub concept: Option<Token>,
    /// Everything after the concept, as matched.
    pub cond_tokens: Vec<Token>,
    pub span: Span,
}

impl Statement {
    fn build(rule: RuleKind, tokens: &[Token]) -> Statement {
        debug_assert_eq!(tokens.len(), rule.arity());
        let span = tokens[0].span.to(tokens[tokens.len() - 1].span);
        let take = |class: TokenClass| tokens.iter().find(|t| t.class == class).cloned();
        let (subject, verb, concept, cond_tokens) = match rule {
            RuleKind::Astmt => (take(TokenClass::A), None, None, Vec::new()),
            RuleKind::Bstmt => (None, take(TokenClass::B), None, Vec::new()),
            RuleKind::Cstmt => (None, None, take(TokenClass::C), Vec::new()),
            RuleKind::Stmt2 => (None, Some(tokens[0].clone()), Some(tokens[1].clone()), Vec::new()),
            _ => (
                Some(tokens[0].clone()),
                Some(tokens[1].clone()),
                Some(tokens[2].clone()),
                tokens[3..].to_vec(),
            ),
        };
        Statement {
            rule,
            subject,
            verb,
            concept,
            cond_tokens,
            span,
        }
    }

    /// Token classes in source order.
    pub fn classes(&self) -> Vec<TokenClass> {
        self.subject
            .iter()
            .chain(self.verb.iter())
            .chain(self.concept.iter())
            .chain(self.cond_tokens.iter())
            .map(|t| t.class)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum ParseError {
    #[error("nothing to parse")]
    EmptyInput,
    #[error("no rule matches at token {position}; expected {}", describe_expected(.expected, *.end_allowed))]
    NoRuleMatches {
        /// Token index where matching stopped.
        position: usize,
        /// Classes that would have extended a viable prefix.
        expected: Vec<TokenClass>,
        /// A production would have been complete had the input ended here.
        end_allowed: bool,
        found: Option<TokenClass>,
    },
}

fn describe_expected(expected: &[TokenClass], end_allowed: bool) -> String {
    let mut parts: Vec<String> = expected.iter().map(|c| c.to_string()).collect();
    if end_allowed {
        parts.push("end of input".into());
    }
    if parts.is_empty() {
        "nothing".into()
    } else {
        parts.join(" | ")
    }
}

struct Walk {
    /// Longest production that matched a prefix.
    best: Option<RuleKind>,
    stop: usize,
    expected: BTreeSet<TokenClass>,
    end_allowed: bool,
}

/// Walks productions from `start`, collecting the longest complete match and
/// where the viable set ran out.
fn walk(tokens: &[Token], start: usize) -> Walk {
    let mut viable: Vec<RuleKind> = RuleKind::ALL.to_vec();
    let mut best = None;
    let mut k = 0;
    loop {
        let complete: Vec<RuleKind> = viable.iter().copied().filter(|r| r.arity() == k).collect();
        if let Some(rule) = complete.first() {
            best = Some(*rule);
        }
        let extending: Vec<RuleKind> = viable.iter().copied().filter(|r| r.arity() > k).collect();
        let next = tokens.get(start + k);
        let advanced: Vec<RuleKind> = match next {
            Some(tok) => extending
                .iter()
                .copied()
                .filter(|r| r.accepts_at(k, tok.class))
                .collect(),
            None => Vec::new(),
        };
        if advanced.is_empty() {
            let expected = extending
                .iter()
                .flat_map(|r| r.classes_at(k).iter().copied())
                .collect();
            return Walk {
                best,
                stop: start + k,
                expected,
                end_allowed: !complete.is_empty(),
            };
        }
        viable = advanced;
        k += 1;
    }
}

impl Walk {
    fn error(&self, tokens: &[Token]) -> ParseError {
        ParseError::NoRuleMatches {
            position: self.stop,
            expected: self.expected.iter().copied().collect(),
            end_allowed: self.end_allowed,
            found: tokens.get(self.stop).map(|t| t.class),
        }
    }
}

/// Parses the whole stream as exactly one production.
pub fn parse(stream: &TokenStream) -> Result<Statement, ParseError> {
    parse_tokens(&stream.tokens)
}

pub fn parse_tokens(tokens: &[Token]) -> Result<Statement, ParseError> {
    if tokens.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let w = walk(tokens, 0);
    match w.best {
        Some(rule) if rule.arity() == tokens.len() => Ok(Statement::build(rule, tokens)),
        _ => Err(w.error(tokens)),
    }
}

/// Splits the stream into consecutive statements, taking the longest
/// production at each step.
pub fn parse_many(stream: &TokenStream) -> Result<Vec<Statement>, ParseError> {
    let tokens = &stream.tokens;
    if tokens.is_empty() {
        return Err(ParseError::EmptyInput);
    }
    let mut statements = Vec::new();
    let mut furthest: Option<Walk> = None;
    let mut start = 0;
    while start < tokens.len() {
        let w = walk(tokens, start);
        match w.best {
            Some(rule) => {
                statements.push(Statement::build(rule, &tokens[start..start + rule.arity()]));
                start += rule.arity();
                if furthest.as_ref().is_none_or(|f| w.stop > f.stop) {
                    furthest = Some(w);
                }
            }
            None => {
                let report = match furthest {
                    Some(f) if f.stop > w.stop => f,
                    _ => w,
                };
                return Err(report.error(tokens));
            }
        }
    }
    Ok(statements)
}
