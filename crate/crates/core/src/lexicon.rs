//! Token lexicon and ontology: the knowledge base consulted by the lexer and modeler.
//!
//! Both are loaded from plain-text files so the vocabulary can change without a
//! rebuild. The defaults shipped with the crate live under `data/`.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_LEXICON: &str = include_str!("../data/lexicon.txt");
const DEFAULT_ONTOLOGY: &str = include_str!("../data/ontology.txt");

/// Longest phrase, in words, the lexicon accepts.
pub const MAX_PHRASE_WORDS: usize = 5;

/// The copular verb forms constrained by subject agreement.
pub const COPULAS: [&str; 3] = ["is", "am", "are"];

/// Terminal categories of the request grammar.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TokenClass {
    A,
    B,
    C,
    W,
    Bt,
    Eq,
    And,
    #[serde(rename = "NUMBER")]
    Number,
}

impl TokenClass {
    pub const ALL: [TokenClass; 8] = [
        TokenClass::A,
        TokenClass::B,
        TokenClass::C,
        TokenClass::W,
        TokenClass::Bt,
        TokenClass::Eq,
        TokenClass::And,
        TokenClass::Number,
    ];

    /// Classes that can be listed in a lexicon file. NUMBER is produced by the
    /// lexer from digit runs and never listed.
    pub const LISTED: [TokenClass; 7] = [
        TokenClass::A,
        TokenClass::B,
        TokenClass::C,
        TokenClass::W,
        TokenClass::Bt,
        TokenClass::Eq,
        TokenClass::And,
    ];

    /// Name used in lexicon files.
    pub fn file_tag(self) -> &'static str {
        match self {
            TokenClass::A => "A",
            TokenClass::B => "B",
            TokenClass::C => "C",
            TokenClass::W => "W",
            TokenClass::Bt => "BT",
            TokenClass::Eq => "EQ",
            TokenClass::And => "AND",
            TokenClass::Number => "NUMBER",
        }
    }
}

impl fmt::Display for TokenClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            TokenClass::A => "A",
            TokenClass::B => "B",
            TokenClass::C => "C",
            TokenClass::W => "W",
            TokenClass::Bt => "Bt",
            TokenClass::Eq => "Eq",
            TokenClass::And => "And",
            TokenClass::Number => "NUMBER",
        };
        f.write_str(name)
    }
}

impl FromStr for TokenClass {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "A" => Ok(TokenClass::A),
            "B" => Ok(TokenClass::B),
            "C" => Ok(TokenClass::C),
            "W" => Ok(TokenClass::W),
            "BT" => Ok(TokenClass::Bt),
            "EQ" => Ok(TokenClass::Eq),
            "AND" => Ok(TokenClass::And),
            "NUMBER" => Ok(TokenClass::Number),
            _ => Err(format!("unknown token class `{s}`")),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LexiconError {
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("phrase `{phrase}` listed under both {first} and {second}")]
    DuplicatePhrase {
        phrase: String,
        first: TokenClass,
        second: TokenClass,
    },
}

/// Lowercases a phrase and collapses whitespace runs to single spaces.
pub fn normalize_phrase(text: &str) -> String {
    text.split_whitespace()
        .map(str::to_lowercase)
        .collect::<Vec<_>>()
        .join(" ")
}

/// Phrase lists per token class plus a reverse index for lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<TokenClass, Vec<String>>,
    index: HashMap<String, TokenClass>,
    free_identifier_classes: BTreeSet<TokenClass>,
    max_words: usize,
}

impl Default for Lexicon {
    fn default() -> Self {
        Lexicon::parse(DEFAULT_LEXICON).expect("bundled lexicon is valid")
    }
}

impl Lexicon {
    pub fn empty() -> Self {
        Lexicon {
            entries: TokenClass::LISTED.iter().map(|c| (*c, Vec::new())).collect(),
            index: HashMap::new(),
            free_identifier_classes: [TokenClass::C].into_iter().collect(),
            max_words: 0,
        }
    }

    /// Parses lexicon-file content. Phrases are normalized to lowercase.
    pub fn parse(text: &str) -> Result<Self, LexiconError> {
        let mut lexicon = Lexicon::empty();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let (tag, phrase) = line.split_once(':').ok_or_else(|| LexiconError::Format {
                line: line_no,
                reason: "expected `CLASS: phrase`".into(),
            })?;
            let class: TokenClass = tag.trim().parse().map_err(|reason| LexiconError::Format {
                line: line_no,
                reason,
            })?;
            if class == TokenClass::Number {
                return Err(LexiconError::Format {
                    line: line_no,
                    reason: "NUMBER tokens come from digit runs and cannot be listed".into(),
                });
            }
            lexicon.insert(class, phrase).map_err(|e| match e {
                LexiconError::Format { reason, .. } => LexiconError::Format {
                    line: line_no,
                    reason,
                },
                other => other,
            })?;
        }
        Ok(lexicon)
    }

    /// Adds a phrase to a class. Re-adding a phrase to its own class is a no-op.
    pub fn insert(&mut self, class: TokenClass, phrase: &str) -> Result<(), LexiconError> {
        let phrase = normalize_phrase(phrase);
        let words = phrase.split(' ').filter(|w| !w.is_empty()).count();
        if words == 0 {
            return Err(LexiconError::Format {
                line: 0,
                reason: "empty phrase".into(),
            });
        }
        if words > MAX_PHRASE_WORDS {
            return Err(LexiconError::Format {
                line: 0,
                reason: format!("phrase has {words} words, at most {MAX_PHRASE_WORDS} allowed"),
            });
        }
        match self.index.get(&phrase) {
            Some(existing) if *existing == class => return Ok(()),
            Some(existing) => {
                return Err(LexiconError::DuplicatePhrase {
                    phrase,
                    first: *existing,
                    second: class,
                })
            }
            None => {}
        }
        self.max_words = self.max_words.max(words);
        self.index.insert(phrase.clone(), class);
        self.entries.entry(class).or_default().push(phrase);
        Ok(())
    }

    /// Writes the lexicon back out in file form.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        for (class, phrases) in &self.entries {
            for phrase in phrases {
                out.push_str(class.file_tag());
                out.push_str(": ");
                out.push_str(phrase);
                out.push('\n');
            }
        }
        out
    }

    pub fn phrases(&self, class: TokenClass) -> &[String] {
        self.entries.get(&class).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Every listed phrase with its class.
    pub fn iter(&self) -> impl Iterator<Item = (TokenClass, &str)> {
        self.entries
            .iter()
            .flat_map(|(class, phrases)| phrases.iter().map(move |p| (*class, p.as_str())))
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    /// Class of an already-normalized phrase.
    pub fn lookup(&self, phrase: &str) -> Option<TokenClass> {
        self.index.get(phrase).copied()
    }

    pub fn class_of(&self, phrase: &str) -> Option<TokenClass> {
        self.lookup(&normalize_phrase(phrase))
    }

    pub fn max_phrase_words(&self) -> usize {
        self.max_words
    }

    pub fn free_identifier_classes(&self) -> &BTreeSet<TokenClass> {
        &self.free_identifier_classes
    }

    pub fn set_free_identifier_classes(&mut self, classes: impl IntoIterator<Item = TokenClass>) {
        self.free_identifier_classes = classes.into_iter().collect();
    }

    /// The class given to words that match no phrase, if any.
    pub fn free_identifier_class(&self) -> Option<TokenClass> {
        self.free_identifier_classes.iter().next().copied()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OntologyError {
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("isa hierarchy has a cycle through `{0}`")]
    CyclicHierarchy(String),
    #[error("node `{child}` has two parents: `{first}` and `{second}`")]
    MultipleParents {
        child: String,
        first: String,
        second: String,
    },
}

/// A relation edge between two concepts.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Relation {
    pub a: String,
    pub b: String,
    pub label: String,
}

/// Class tree plus undirected relation edges. Node names are case-insensitive
/// and stored lowercase.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Ontology {
    nodes: BTreeSet<String>,
    parent: BTreeMap<String, String>,
    relations: Vec<Relation>,
    related: BTreeMap<(String, String), Vec<String>>,
}

/// Root of the shipped class tree.
pub const ROOT: &str = "isoas";

fn node_key(name: &str) -> String {
    name.trim().to_lowercase()
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

impl Ontology {
    pub fn bundled() -> Self {
        Ontology::parse(DEFAULT_ONTOLOGY).expect("bundled ontology is valid")
    }

    pub fn parse(text: &str) -> Result<Self, OntologyError> {
        let mut nodes = BTreeSet::new();
        let mut parent: BTreeMap<String, String> = BTreeMap::new();
        let mut rels: Vec<(usize, Relation)> = Vec::new();

        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            };
            let fields: Vec<String> = line.split_whitespace().map(node_key).collect();
            let Some((keyword, args)) = fields.split_first() else {
                continue;
            };
            let bad = |reason: &str| OntologyError::Format {
                line: line_no,
                reason: reason.to_string(),
            };
            match keyword.as_str() {
                "node" => {
                    if args.is_empty() {
                        return Err(bad("`node` needs at least one name"));
                    }
                    nodes.extend(args.iter().cloned());
                }
                "isa" => {
                    let [child, par] = args else {
                        return Err(bad("expected `isa <child> <parent>`"));
                    };
                    if child == par {
                        return Err(OntologyError::CyclicHierarchy(child.clone()));
                    }
                    if let Some(existing) = parent.get(child) {
                        if existing != par {
                            return Err(OntologyError::MultipleParents {
                                child: child.clone(),
                                first: existing.clone(),
                                second: par.clone(),
                            });
                        }
                    }
                    nodes.insert(child.clone());
                    nodes.insert(par.clone());
                    parent.insert(child.clone(), par.clone());
                }
                "rel" => {
                    let [a, b, label] = args else {
                        return Err(bad("expected `rel <a> <b> <label>`"));
                    };
                    rels.push((
                        line_no,
                        Relation {
                            a: a.clone(),
                            b: b.clone(),
                            label: label.clone(),
                        },
                    ));
                }
                other => return Err(bad(&format!("unknown directive `{other}`"))),
            }
        }

        // Cycle check: walk each node's ancestor chain.
        for start in parent.keys() {
            let mut seen = BTreeSet::new();
            let mut current = start.as_str();
            while let Some(next) = parent.get(current) {
                if !seen.insert(current) {
                    return Err(OntologyError::CyclicHierarchy(start.clone()));
                }
                current = next;
            }
        }

        let mut ontology = Ontology {
            nodes,
            parent,
            relations: Vec::new(),
            related: BTreeMap::new(),
        };
        for (_, rel) in rels {
            for end in [&rel.a, &rel.b] {
                if !ontology.nodes.contains(end) {
                    return Err(OntologyError::UnknownNode(end.clone()));
                }
            }
            let labels = ontology.related.entry(pair_key(&rel.a, &rel.b)).or_default();
            if !labels.contains(&rel.label) {
                labels.push(rel.label.clone());
                ontology.relations.push(rel);
            }
        }
        Ok(ontology)
    }

    fn require(&self, name: &str) -> Result<String, OntologyError> {
        let key = node_key(name);
        if self.nodes.contains(&key) {
            Ok(key)
        } else {
            Err(OntologyError::UnknownNode(name.to_string()))
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.nodes.contains(&node_key(name))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(String::as_str)
    }

    pub fn parent(&self, name: &str) -> Option<&str> {
        self.parent.get(&node_key(name)).map(String::as_str)
    }

    /// Child/parent pairs.
    pub fn isa_edges(&self) -> impl Iterator<Item = (&str, &str)> {
        self.parent.iter().map(|(c, p)| (c.as_str(), p.as_str()))
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    /// Reflexive-transitive subclass test.
    pub fn isa(&self, child: &str, ancestor: &str) -> Result<bool, OntologyError> {
        let child = self.require(child)?;
        let ancestor = self.require(ancestor)?;
        let mut current = child.as_str();
        loop {
            if current == ancestor {
                return Ok(true);
            }
            match self.parent.get(current) {
                Some(next) => current = next,
                None => return Ok(false),
            }
        }
    }

    /// True iff a relation edge joins `a` and `b` in either direction.
    pub fn related(&self, a: &str, b: &str) -> Result<bool, OntologyError> {
        let a = self.require(a)?;
        let b = self.require(b)?;
        Ok(self.related.contains_key(&pair_key(&a, &b)))
    }

    pub fn relation_labels(&self, a: &str, b: &str) -> &[String] {
        self.related
            .get(&pair_key(&node_key(a), &node_key(b)))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Direct children, sorted.
    pub fn children(&self, name: &str) -> Vec<&str> {
        let key = node_key(name);
        self.parent
            .iter()
            .filter(|(_, p)| **p == key)
            .map(|(c, _)| c.as_str())
            .collect()
    }
}

/// Subject/copula pairs permitted by the agreement edges of the ontology.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AgreementTable {
    pairs: BTreeSet<(String, String)>,
}

/// Relation label marking a subject/copula agreement edge.
pub const AGREEMENT_LABEL: &str = "agree";

impl AgreementTable {
    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        AgreementTable {
            pairs: pairs
                .into_iter()
                .map(|(s, c)| (normalize_phrase(s), normalize_phrase(c)))
                .collect(),
        }
    }

    /// Collects every `agree` edge that joins a node with a copula.
    pub fn from_ontology(ontology: &Ontology) -> Self {
        let mut pairs = BTreeSet::new();
        for rel in ontology.relations() {
            if rel.label != AGREEMENT_LABEL {
                continue;
            }
            let (subject, copula) = if COPULAS.contains(&rel.b.as_str()) {
                (&rel.a, &rel.b)
            } else if COPULAS.contains(&rel.a.as_str()) {
                (&rel.b, &rel.a)
            } else {
                continue;
            };
            pairs.insert((subject.clone(), copula.clone()));
        }
        AgreementTable { pairs }
    }

    pub fn allows(&self, subject: &str, copula: &str) -> bool {
        self.pairs.contains(&(subject.to_string(), copula.to_string()))
    }

    /// Copulas the subject agrees with.
    pub fn copulas_for(&self, subject: &str) -> Vec<String> {
        self.pairs
            .iter()
            .filter(|(s, _)| s == subject)
            .map(|(_, c)| c.clone())
            .collect()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&str, &str)> {
        self.pairs.iter().map(|(s, c)| (s.as_str(), c.as_str()))
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Lexicon, ontology and the agreement table derived from it.
#[derive(Debug, Clone)]
pub struct KnowledgeBase {
    pub lexicon: Lexicon,
    pub ontology: Ontology,
    pub agreement: AgreementTable,
}

impl Default for KnowledgeBase {
    fn default() -> Self {
        KnowledgeBase::new(Lexicon::default(), Ontology::bundled())
    }
}

impl KnowledgeBase {
    pub fn new(lexicon: Lexicon, ontology: Ontology) -> Self {
        let agreement = AgreementTable::from_ontology(&ontology);
        KnowledgeBase {
            lexicon,
            ontology,
            agreement,
        }
    }
}

pub fn load_lexicon(text: &str) -> Result<Lexicon, LexiconError> {
    Lexicon::parse(text)
}

pub fn load_ontology(text: &str) -> Result<Ontology, OntologyError> {
    Ontology::parse(text)
}
