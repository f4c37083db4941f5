//! Stream an N-Triples fact base into an indexed entity cache and query it
//! by name.
//!
//! ```bash
//! cargo run --example ingest_ntriples [path/to/file.nt[.gz]]
//! ```

use std::path::PathBuf;

use scriptorium::facts::{ingest_triples_file, EntityKind, ScopeFilter, TripleMapping};

fn main() {
    let path = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo/facts/persons.nt")
    });

    // Only people who could have written or been mentioned in 18th century letters.
    let filter = ScopeFilter::born_by(1760).with_kinds([EntityKind::Person]);
    let (cache, report) = ingest_triples_file(&path, &TripleMapping::standard(), &filter).unwrap_or_else(|e| {
        eprintln!("{e}");
        std::process::exit(1)
    });

    println!(
        "{}: {} lines, {} triples, {} entities kept, {} out of scope, {} malformed",
        path.display(),
        report.lines,
        report.triples,
        cache.len(),
        report.filtered,
        report.malformed
    );
    for w in report.warnings.iter().take(5) {
        println!("  warning: {w:?}");
    }

    for surface in ["Gleim", "Lessing", "lessing", "Klopstock, Friedrich Gottlieb", "Goethe"] {
        let hits = cache.lookup_name(surface, EntityKind::Person, 5);
        println!("\n{surface:?}: {} hit(s)", hits.len());
        for (e, class) in hits {
            let life = match (e.birth, e.death) {
                (Some(b), Some(d)) => format!("{}–{}", b.year, d.year),
                _ => "?".into(),
            };
            println!("  {:<16} {:<32} {life:<10} {class:?}", e.id, e.preferred_name);
        }
    }
    println!("\n{} store queries", cache.query_count());
}
