//! Merging the queries of several statements into one.

use isoas_core::{bind, integrate, render_sql, CompareOp, Filter, Literal, StructuredQuery};

fn main() {
    let docs = StructuredQuery::new("default", "document").with_filter(Filter::Compare {
        op: CompareOp::Gt,
        value: Literal::numeric("2"),
    });
    let cad = StructuredQuery::new("default", "cad").with_filter(Filter::Hole { op: CompareOp::Lt });
    let merged = integrate(&[docs, cad]).unwrap();
    println!("merged: {}", serde_json::to_string(&merged).unwrap());
    println!("holes: {}", merged.params.len());

    let bound = bind(&merged, &[Literal::numeric("10")]).unwrap();
    println!("{}", render_sql(&bound).unwrap());

    let other = StructuredQuery::new("archive", "music");
    println!("{}", integrate(&[bound, other]).unwrap_err());
}
