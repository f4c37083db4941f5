//! Edition operations: fragment ordering, annotation merging, consistency
//! checks, registers and output presentations.

mod annotation;
mod check;
mod fragment;
mod register;
mod render;

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::latex::LatexError;

pub use annotation::{
    escape_latex, generated_annotations, merge_annotations, parse_annotations, resolve, Annotation, Merged, Origin,
    Payload, PositionSpec, RefKind, Target,
};
pub use check::{check, CheckOptions, CheckReport, DirectiveSource, Finding, FindingCode, Location, Severity};
pub use fragment::{order_fragments, Fragment, FragmentMeta};
pub use register::{generate_registers, Locator, Register, RegisterBundle, RegisterEntry, RegisterKind};
pub use render::{anchor_id, html_escape, render_outputs, OutputBundle};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EditionError {
    #[error("fragment `{fragment}`: {error}")]
    Latex { fragment: String, error: LatexError },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error("cannot place `{annotation}`: {reason}")]
    UnresolvablePosition { annotation: String, reason: String },
    #[error("{file}:{line}: {message}")]
    AnnotationSyntax { file: String, line: usize, message: String },
}

impl EditionError {
    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        EditionError::Io { path: path.to_path_buf(), message: e.to_string() }
    }
}

/// 1-based line number of a byte offset.
pub(crate) fn line_of(src: &str, offset: usize) -> usize {
    1 + src.as_bytes()[..offset.min(src.len())].iter().filter(|b| **b == b'\n').count()
}
