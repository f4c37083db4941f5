//! External fact bases: ingestion, scope-filtered caches, snapshots and
//! top-k name lookup.

mod cache;
mod entity;
mod index;
mod ingest;
mod normalize;
pub mod ntriples;
mod snapshot;
mod table;

use std::path::PathBuf;

use thiserror::Error;

pub use cache::{CacheSet, Conflict, MatchClass, SourceDescriptor};
pub use entity::{derive_last_name, id_namespace, Entity, EntityKind, ScopeFilter};
pub use ingest::{ingest_triples, ingest_triples_file, CacheBuilder, Field, IngestReport, IngestWarning, TripleMapping};
pub use normalize::normalize_name;
pub use ntriples::{read_ntriples, MalformedTriple, Object, Triple};
pub use snapshot::{
    encode_snapshot, load_snapshot, load_snapshot_expecting, save_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION,
};
pub use table::{ingest_table, ingest_table_file, TableReport, TableSchema};

#[derive(Debug, Error)]
pub enum FactError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: not a snapshot file (bad magic bytes)", path.display())]
    BadMagic { path: PathBuf },
    #[error("{}: snapshot version {found}, reader expects {expected}; re-run ingest", path.display())]
    VersionMismatch { path: PathBuf, found: u32, expected: u32 },
    #[error("{}: snapshot is truncated", path.display())]
    TruncatedSnapshot { path: PathBuf },
    #[error("{}: corrupt snapshot: {message}", path.display())]
    CorruptSnapshot { path: PathBuf, message: String },
    #[error("{0}")]
    Schema(String),
}
