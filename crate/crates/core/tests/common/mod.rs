#![allow(dead_code)]

use std::collections::BTreeSet;

use isoas_core::{CompareOp, Filter, Literal, Record, ResultRow, StructuredQuery};
use rand::seq::SliceRandom;
use rand::Rng;

pub const KINDS: [&str; 6] = ["document", "cad", "drawing", "part", "manual", "report"];
const NAME_WORDS: [&str; 8] = ["bolt", "bracket", "gear", "housing", "shaft", "valve", "spec", "plan"];

pub const HEADER: &str = "id,name,kind,description,value";

/// Random records with unique ids, and the same records as CSV.
pub fn fixture<R: Rng>(rng: &mut R, n: usize) -> (Vec<Record>, String) {
    let mut ids: Vec<u64> = (1..=(n as u64 * 3)).collect();
    ids.shuffle(rng);
    let mut records: Vec<Record> = ids[..n]
        .iter()
        .map(|&id| {
            let name = format!("{} {}", NAME_WORDS.choose(rng).unwrap(), id);
            let description = format!("{} for {}", NAME_WORDS.choose(rng).unwrap(), KINDS.choose(rng).unwrap());
            let tenths: i64 = rng.gen_range(-50..=250);
            Record {
                id,
                name,
                kind: KINDS.choose(rng).unwrap().to_string(),
                description,
                value: tenths as f64 / 10.0,
            }
        })
        .collect();
    records.sort_by_key(|r| r.id);
    let mut csv = String::from(HEADER);
    csv.push('\n');
    for r in &records {
        csv.push_str(&format!("{},{},{},{},{}\n", r.id, r.name, r.kind, r.description, r.value));
    }
    (records, csv)
}

fn number<R: Rng>(rng: &mut R) -> Literal {
    let tenths: i64 = rng.gen_range(-60..=260);
    if tenths % 10 == 0 {
        Literal::numeric((tenths / 10).to_string())
    } else {
        Literal::numeric(format!("{:.1}", tenths as f64 / 10.0))
    }
}

pub fn random_leaf<R: Rng>(rng: &mut R) -> Filter {
    if rng.gen_bool(0.3) {
        let (a, b) = (number(rng), number(rng));
        let (lo, hi) = if a.as_f64() <= b.as_f64() { (a, b) } else { (b, a) };
        Filter::Between { lo, hi }
    } else {
        let op = *[CompareOp::Eq, CompareOp::Lt, CompareOp::Gt, CompareOp::Le, CompareOp::Ge]
            .choose(rng)
            .unwrap();
        Filter::Compare { op, value: number(rng) }
    }
}

/// A bound query; concepts are mostly kinds, sometimes words only found in
/// names and descriptions.
pub fn random_query<R: Rng>(rng: &mut R, store: &str) -> StructuredQuery {
    let n = rng.gen_range(1..=3);
    let mut concepts = BTreeSet::new();
    for _ in 0..n {
        let c = if rng.gen_bool(0.8) {
            KINDS.choose(rng).unwrap()
        } else {
            NAME_WORDS.choose(rng).unwrap()
        };
        concepts.insert(c.to_string());
    }
    let leaves: Vec<Filter> = (0..rng.gen_range(0..=3)).map(|_| random_leaf(rng)).collect();
    StructuredQuery {
        store: store.to_string(),
        concepts,
        filter: match leaves.len() {
            0 => None,
            1 => leaves.into_iter().next(),
            _ => Some(Filter::And { children: leaves }),
        },
        params: Vec::new(),
        annotations: Vec::new(),
    }
}

fn holds(leaf: &Filter, v: f64) -> bool {
    match leaf {
        Filter::Compare { op, value } => {
            let x = value.text.parse::<f64>().unwrap();
            match op {
                CompareOp::Eq => v == x,
                CompareOp::Lt => v < x,
                CompareOp::Gt => v > x,
                CompareOp::Le => v <= x,
                CompareOp::Ge => v >= x,
            }
        }
        Filter::Between { lo, hi } => {
            let (l, h) = (lo.text.parse::<f64>().unwrap(), hi.text.parse::<f64>().unwrap());
            l <= v && v <= h
        }
        Filter::And { children } => children.iter().all(|c| holds(c, v)),
        Filter::Hole { .. } => panic!("oracle needs a bound query"),
    }
}

/// Brute-force scan: kind match, else substring match, then the filter,
/// ordered by id. Returns the rows and whether the text fallback was used.
pub fn scan(records: &[Record], q: &StructuredQuery) -> (Vec<ResultRow>, bool) {
    let mut sorted: Vec<&Record> = records.iter().collect();
    sorted.sort_by_key(|r| r.id);
    let lowered: Vec<String> = q.concepts.iter().map(|c| c.to_lowercase()).collect();
    let mut hits: Vec<&Record> = sorted
        .iter()
        .copied()
        .filter(|r| lowered.contains(&r.kind))
        .collect();
    let text = hits.is_empty();
    if text {
        hits = sorted
            .iter()
            .copied()
            .filter(|r| {
                lowered.iter().any(|c| {
                    r.name.to_lowercase().contains(c.as_str())
                        || r.description.to_lowercase().contains(c.as_str())
                })
            })
            .collect();
    }
    let rows = hits
        .into_iter()
        .filter(|r| q.filter.as_ref().is_none_or(|f| holds(f, r.value)))
        .map(|r| ResultRow {
            id: r.id,
            name: r.name.clone(),
            kind: r.kind.clone(),
            value: r.value,
        })
        .collect();
    (rows, text)
}
