//! Save an entity cache as a binary snapshot and load it back; loading is
//! what every later run pays instead of re-ingesting.
//!
//! ```bash
//! cargo run --release --example snapshot_roundtrip [entities]
//! ```

use std::time::Instant;

use scriptorium::date::DateExpr;
use scriptorium::facts::{ingest_triples, load_snapshot, save_snapshot, EntityKind, ScopeFilter, TripleMapping};

fn synthetic_triples(n: usize) -> String {
    const SURNAMES: &[&str] = &["Gleim", "Sulzer", "Bodmer", "Ramler", "Lessing", "Klopstock", "Wieland", "Breitinger"];
    let gnd = "https://d-nb.info/standards/elementset/gnd#";
    let mut out = String::new();
    for i in 0..n {
        let s = format!("<https://d-nb.info/gnd/{i}>");
        let name = format!("{}{}, Johann", SURNAMES[i % SURNAMES.len()], i / SURNAMES.len());
        out += &format!("{s} <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <{gnd}DifferentiatedPerson> .\n");
        out += &format!("{s} <{gnd}preferredNameForThePerson> \"{name}\" .\n");
        out += &format!("{s} <{gnd}dateOfBirth> \"{}\" .\n", DateExpr::year(1650 + (i % 150) as i32).iso());
    }
    out
}

fn main() {
    let n: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50_000);
    let text = synthetic_triples(n);

    let t = Instant::now();
    let (cache, _) = ingest_triples(text.as_bytes(), &TripleMapping::standard(), &ScopeFilter::all(), "synthetic").unwrap();
    let ingest = t.elapsed();

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("persons.kbsc");
    save_snapshot(&cache, &path).unwrap();
    let t = Instant::now();
    let loaded = load_snapshot(&path).unwrap();
    let load = t.elapsed();

    let size = std::fs::metadata(&path).unwrap().len();
    println!("{n} entities: ingest {ingest:.2?}, snapshot load {load:.2?} ({size} bytes)");
    println!("speedup {:.1}x", ingest.as_secs_f64() / load.as_secs_f64());

    for q in ["Gleim7", "Lessing123", "Bodmer0"] {
        let a: Vec<_> = cache.lookup_name(q, EntityKind::Person, 3).iter().map(|(e, c)| (e.id.clone(), *c)).collect();
        let b: Vec<_> = loaded.lookup_name(q, EntityKind::Person, 3).iter().map(|(e, c)| (e.id.clone(), *c)).collect();
        assert_eq!(a, b);
        println!("{q}: {a:?}");
    }
}
