//! Identify persons, places and dates in the demo letters and explain each
//! decision.
//!
//! ```bash
//! cargo run --example identify_entities
//! ```

use std::path::Path;

use scriptorium::project::{self, ProjectConfig, Workspace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo/scriptorium.kb");
    let mut cfg = ProjectConfig::load(&cfg_path)?;
    let scratch = tempfile::tempdir()?;
    cfg.snapshot_dir = scratch.path().to_path_buf();

    project::ingest(&cfg)?;
    let cache = project::load_cache(&cfg)?;
    let ws = Workspace::load(&cfg)?;
    let run = project::run_nei(&ws, &cache)?;
    let stats = &run.result.stats;
    println!(
        "{} words, {} occurrences, {} identified, {} anchors, {} store queries in {:.2?}",
        stats.words, stats.occurrences, stats.identified, stats.anchors, stats.store_queries, run.elapsed
    );

    for doc in &run.result.documents {
        println!("\n== {} ({:?})", doc.doc_id, doc.creation_date.map(|d| d.iso()));
        for d in &doc.dates {
            println!("  word {:>2}  {:<14} -> {}", d.token_index, d.surface, d.entity_id);
        }
        for o in &doc.occurrences {
            let ex = run.result.explain(&doc.doc_id, o.occurrence.token_index)?;
            let chosen = ex.chosen.as_ref().map_or("-".to_string(), |c| format!("{} {}", c.entity_id, c.name));
            println!("  word {:>2}  {:<14} -> {chosen}", o.occurrence.token_index, o.occurrence.surface);
            println!("            {}", ex.cause);
            for alt in &ex.alternates {
                println!("            also: {} {} key {:?}", alt.entity_id, alt.name, alt.rank_key);
            }
        }
    }

    // The Gleim in the 1751 letter: Betty Gleim was born thirty years later.
    let ex = run.result.explain("sulzer-bodmer", 15)?;
    let betty = &ex.alternates[0];
    println!("\nwhy not {}: {}", betty.name, betty.outcomes[3].detail);
    Ok(())
}
