//! Serve the review API over the demo project.
//!
//! ```bash
//! cargo run --example review_server
//! curl localhost:8080/documents
//! curl 'localhost:8080/documents/sulzer-bodmer/occurrences?limit=3'
//! curl localhost:8080/occurrences/sulzer-bodmer/15
//! curl -X POST localhost:8080/decisions -H 'content-type: application/json' \
//!      -d '{"doc_id": "gleim-sulzer", "token_index": 18, "action": "suppress", "note": "signature"}'
//! curl -X POST localhost:8080/rerun
//! ```
//!
//! Decisions are appended to a scratch copy of the assistance document,
//! printed at startup.

use std::path::Path;
use std::sync::Arc;

use scriptorium::project::{self, ProjectConfig, Workspace};
use scriptorium::review::{serve, ReviewService};

#[tokio::main]
async fn main() -> Result<(), Box<dyn std::error::Error>> {
    let demo = Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/demo");
    let mut cfg = ProjectConfig::load(&demo.join("scriptorium.kb"))?;
    let scratch = tempfile::tempdir()?;
    cfg.snapshot_dir = scratch.path().to_path_buf();
    let assistance = scratch.path().join("assist.kb");
    std::fs::copy(demo.join("assist.kb"), &assistance)?;
    cfg.assistance = Some(assistance.clone());

    project::ingest(&cfg)?;
    let ws = Workspace::load(&cfg)?;
    let service = ReviewService::new(ws.documents(), project::load_cache(&cfg)?, ws.settings, assistance.clone())?;

    let addr = "127.0.0.1:8080".parse()?;
    println!("decisions go to {}", assistance.display());
    println!("listening on http://{addr}");
    serve(Arc::new(service), addr).await?;
    Ok(())
}
