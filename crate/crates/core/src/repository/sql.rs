//! Parser for the restricted SQL accepted by SQL mode.
//!
//! ```text
//! SELECT id, name, kind, value FROM records
//!   WHERE (kind = '<str>' [OR kind = '<str>']*)
//!   [AND value <op> <num> | AND value BETWEEN <num> AND <num>]*
//! ```
//!
//! Keywords and column names are case-insensitive. Anything else is a syntax
//! error reported at a byte offset.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::modeler::{is_decimal, Literal};
use crate::resolver::{CompareOp, Filter, StructuredQuery};

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
pub enum SqlError {
    #[error("syntax error at offset {position}: expected {expected}, found {found}")]
    Syntax {
        position: usize,
        expected: String,
        found: String,
    },
    #[error("BETWEEN bounds out of order: {lo} > {hi}")]
    InvertedRange { lo: String, hi: String },
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Number(String),
    Str(String),
    Sym(&'static str),
    End,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Word(w) => format!("`{w}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::Str(s) => format!("string '{s}'"),
            Tok::Sym(s) => format!("`{s}`"),
            Tok::End => "end of input".into(),
        }
    }
}

fn lex(sql: &str) -> Result<Vec<(usize, Tok)>, SqlError> {
    let bytes = sql.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == b'_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Word(sql[start..i].to_string())));
        } else if c.is_ascii_digit() || (c == b'-' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            let text = &sql[start..i];
            if !is_decimal(text) {
                return Err(SqlError::Syntax {
                    position: start,
                    expected: "a number".into(),
                    found: format!("`{text}`"),
                });
            }
            out.push((start, Tok::Number(text.to_string())));
        } else if c == b'\'' {
            let mut value = String::new();
            i += 1;
            loop {
                match sql[i..].find('\'') {
                    None => {
                        return Err(SqlError::Syntax {
                            position: start,
                            expected: "closing quote".into(),
                            found: "end of input".into(),
                        })
                    }
                    Some(off) => {
                        value.push_str(&sql[i..i + off]);
                        i += off + 1;
                        if bytes.get(i) == Some(&b'\'') {
                            value.push('\'');
                            i += 1;
                        } else {
                            break;
                        }
                    }
                }
            }
            out.push((start, Tok::Str(value)));
        } else {
            let two = sql.get(i..i + 2);
            let sym = match (two, c) {
                (Some("<="), _) => "<=",
                (Some(">="), _) => ">=",
                (_, b'<') => "<",
                (_, b'>') => ">",
                (_, b'=') => "=",
                (_, b'(') => "(",
                (_, b')') => ")",
                (_, b',') => ",",
                _ => {
                    let ch = sql[i..].chars().next().unwrap_or_default();
                    return Err(SqlError::Syntax {
                        position: start,
                        expected: "a keyword, literal or operator".into(),
                        found: format!("`{ch}`"),
                    });
                }
            };
            i += sym.len();
            out.push((start, Tok::Sym(sym)));
        }
    }
    out.push((sql.len(), Tok::End));
    Ok(out)
}

struct Cursor {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

impl Cursor {
    fn peek(&self) -> &(usize, Tok) {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    fn error(&self, expected: &str) -> SqlError {
        let (position, tok) = self.peek();
        SqlError::Syntax {
            position: *position,
            expected: expected.to_string(),
            found: tok.describe(),
        }
    }

    fn is_word(&self, word: &str) -> bool {
        matches!(&self.peek().1, Tok::Word(w) if w.eq_ignore_ascii_case(word))
    }

    fn word(&mut self, word: &str) -> Result<(), SqlError> {
        if self.is_word(word) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("`{word}`")))
        }
    }

    fn sym(&mut self, sym: &str) -> Result<(), SqlError> {
        if matches!(&self.peek().1, Tok::Sym(s) if *s == sym) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("`{sym}`")))
        }
    }

    fn string(&mut self) -> Result<String, SqlError> {
        match &self.peek().1 {
            Tok::Str(s) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error("a quoted string")),
        }
    }

    fn number(&mut self) -> Result<Literal, SqlError> {
        match &self.peek().1 {
            Tok::Number(n) => {
                let lit = Literal::numeric(n.clone());
                self.pos += 1;
                Ok(lit)
            }
            _ => Err(self.error("a number")),
        }
    }

    fn comparison(&mut self) -> Option<CompareOp> {
        let op = match &self.peek().1 {
            Tok::Sym(s) => CompareOp::from_symbol(s),
            _ => None,
        };
        if op.is_some() {
            self.pos += 1;
        }
        op
    }
}

/// Parses restricted SQL into a query against `store`.
pub fn parse_sql(sql: &str, store: &str) -> Result<StructuredQuery, SqlError> {
    let mut c = Cursor {
        toks: lex(sql)?,
        pos: 0,
    };
    c.word("SELECT")?;
    for (i, column) in ["id", "name", "kind", "value"].iter().enumerate() {
        if i > 0 {
            c.sym(",")?;
        }
        c.word(column)?;
    }
    c.word("FROM")?;
    c.word("records")?;
    c.word("WHERE")?;
    c.sym("(")?;
    let mut concepts = Vec::new();
    loop {
        c.word("kind")?;
        c.sym("=")?;
        concepts.push(c.string()?);
        if c.is_word("OR") {
            c.pos += 1;
        } else {
            break;
        }
    }
    c.sym(")")?;

    let mut leaves = Vec::new();
    while c.is_word("AND") {
        c.pos += 1;
        c.word("value")?;
        if c.is_word("BETWEEN") {
            c.pos += 1;
            let lo = c.number()?;
            c.word("AND")?;
            let hi = c.number()?;
            if lo.as_f64() > hi.as_f64() {
                return Err(SqlError::InvertedRange {
                    lo: lo.text,
                    hi: hi.text,
                });
            }
            leaves.push(Filter::Between { lo, hi });
        } else {
            let op = c
                .comparison()
                .ok_or_else(|| c.error("a comparison operator or `BETWEEN`"))?;
            let value = c.number()?;
            leaves.push(Filter::Compare { op, value });
        }
    }
    if c.peek().1 != Tok::End {
        return Err(c.error("`AND` or end of input"));
    }

    let mut query = StructuredQuery {
        store: store.to_string(),
        concepts: concepts.into_iter().collect(),
        filter: None,
        params: Vec::new(),
        annotations: Vec::new(),
    };
    query.filter = match leaves.len() {
        0 => None,
        1 => leaves.pop(),
        _ => Some(Filter::And { children: leaves }),
    };
    Ok(query)
}
