//! Steer identification with assistance directives and see exactly which
//! occurrences change between runs.
//!
//! ```bash
//! cargo run --example assistance_loop
//! ```

use std::path::Path;

use scriptorium::nei::{identify, parse_directives, NeiResult};
use scriptorium::project::{self, ProjectConfig, Workspace};

fn decisions(r: &NeiResult) -> Vec<(String, usize, String, Option<String>, bool)> {
    r.documents
        .iter()
        .flat_map(|d| {
            d.occurrences.iter().map(|o| {
                (d.doc_id.clone(), o.occurrence.token_index, o.occurrence.surface.clone(), o.chosen.clone(), o.suppressed)
            })
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ProjectConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo/scriptorium.kb"))?;
    let scratch = tempfile::tempdir()?;
    cfg.snapshot_dir = scratch.path().to_path_buf();
    project::ingest(&cfg)?;
    let cache = project::load_cache(&cfg)?;
    let ws = Workspace::load(&cfg)?;
    let docs = ws.documents();

    let before = identify(&docs, &cache, &ws.directives(), &ws.settings)?;

    // What an editor would add after reviewing the first run: the last word
    // of Gleim's letter is his signature, not a mention; "Lessing" in the
    // 1750 letter is the younger brother.
    let mut text = std::fs::read_to_string(cfg.assistance.as_ref().unwrap())?;
    text.push_str("fix(\"gleim-sulzer\", 18, none).\n");
    text.push_str("fix(\"bodmer-sulzer\", 22, \"gnd:116943637\").\n");
    let assistance = parse_directives(&text)?;
    let after = identify(&docs, &cache, &assistance.into_directives(), &ws.settings)?;

    for (a, b) in decisions(&before).iter().zip(decisions(&after)) {
        if *a != b {
            println!("{}:{} {:<8} {:?} -> {:?}{}", b.0, b.1, b.2, a.3, b.3, if b.4 { " (suppressed)" } else { "" });
        }
    }
    let ex = after.explain("bodmer-sulzer", 22)?;
    println!("\n{}", ex.cause);
    println!("directive decisions: {}", after.stats.directive_decisions);
    Ok(())
}
