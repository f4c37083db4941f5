//! Generate the demo edition: merged LaTeX in chronological order, plain
//! text, HTML pages with linked entities, and person, place and date
//! registers.
//!
//! ```bash
//! cargo run --example registers_and_html [output-dir]
//! ```

use std::path::{Path, PathBuf};

use scriptorium::project::{self, ProjectConfig, Workspace};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = ProjectConfig::load(&Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo/scriptorium.kb"))?;
    let scratch = tempfile::tempdir()?;
    cfg.snapshot_dir = scratch.path().join("snapshots");
    let out = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| scratch.path().join("edition"));

    project::ingest(&cfg)?;
    let cache = project::load_cache(&cfg)?;
    let ws = Workspace::load(&cfg)?;
    let generated = project::generate(&ws, &cache)?;

    for r in generated.registers.all() {
        println!("== {}", r.kind.title());
        for e in &r.entries {
            let locs: Vec<String> = e.locators.iter().map(|l| format!("{}:{}", l.fragment, l.token)).collect();
            println!("  {:<32} {}", e.label, locs.join(", "));
        }
    }

    println!("\nedition.tex:\n{}", generated.outputs.get("edition.tex").unwrap());
    println!("{}", generated.outputs.get("bodmer-sulzer.tex").unwrap());

    generated.outputs.write_to(&out)?;
    println!("\n{} files written to {}", generated.outputs.files.len(), out.display());
    if std::env::args_os().nth(1).is_none() {
        println!("(temporary; pass a directory to keep them)");
    }
    Ok(())
}
