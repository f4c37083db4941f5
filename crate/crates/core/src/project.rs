//! Project configuration and the ingest, identify, check and generate
//! workflow built on it.
//!
//! A project file uses the same clause syntax as assistance documents:
//!
//! ```text
//! texts("letters").                      % a .tex file or a directory of them
//! annotations("notes.ann").
//! assistance("assist.kb").
//! factbase("facts/gnd.nt", ntriples).
//! factbase("facts/places.tsv", table, place).
//! snapshots("build/snapshots").
//! output("build/out").
//! lexicon("nouns.txt").                  % extra common nouns, one per line
//! scope(max_birth_year, 1800).
//! param(k, 5).
//! param(lifespan_slack, 0).
//! command("kbwork", 1).                  % parser registry entries
//! predicate("http://...", birth).        % triple mapping entries
//! column(name, "asciiname").             % table schema entries
//! ```
//!
//! Relative paths are resolved against the project file's directory.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::edition::{
    check, generate_registers, generated_annotations, merge_annotations, order_fragments, parse_annotations,
    render_outputs, Annotation, CheckOptions, CheckReport, DirectiveSource, EditionError, Fragment, OutputBundle,
    RegisterBundle,
};
use crate::facts::{
    ingest_table_file, ingest_triples_file, load_snapshot, save_snapshot, CacheSet, EntityKind, FactError,
    ScopeFilter, TableSchema, TripleMapping,
};
use crate::latex::{CommandRegistry, RegistryError};
use crate::nei::{
    identify, load_directives, AssistanceDocument, Directive, DirectiveError, Document, Lexicon, NeiError, NeiParams,
    NeiResult, Settings, PARAM_NAMES,
};
use crate::terms::{parse_clauses, Clause, Term};

pub const DEFAULT_CONFIG: &str = "scriptorium.kb";
pub const MERGED_SNAPSHOT: &str = "merged.kbsc";

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("{}:{line}: {message}", path.display())]
    Config { path: PathBuf, line: usize, message: String },
    #[error("{}: {what} does not exist", path.display())]
    MissingPath { path: PathBuf, what: &'static str },
    #[error("{}: no snapshot; run `scriptorium ingest` first", path.display())]
    MissingSnapshot { path: PathBuf },
    #[error("{}: {message}", path.display())]
    Io { path: PathBuf, message: String },
    #[error(transparent)]
    Fact(#[from] FactError),
    #[error("{}: {error}", path.display())]
    Directive { path: PathBuf, error: DirectiveError },
    #[error(transparent)]
    Edition(#[from] EditionError),
    #[error(transparent)]
    Nei(#[from] NeiError),
    #[error("duplicate fragment id `{0}`")]
    DuplicateFragment(String),
}

impl ProjectError {
    fn io(path: &Path, e: std::io::Error) -> Self {
        ProjectError::Io { path: path.to_path_buf(), message: e.to_string() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseFormat {
    NTriples,
    Table,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FactBaseDecl {
    pub path: PathBuf,
    pub format: BaseFormat,
    pub kind: Option<EntityKind>,
}

impl FactBaseDecl {
    /// Snapshot file name for this base.
    pub fn snapshot_name(&self) -> String {
        let name = self.path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let safe: String = name.chars().map(|c| if c.is_alphanumeric() || c == '-' { c } else { '_' }).collect();
        format!("{safe}.kbsc")
    }
}

#[derive(Debug, Clone)]
pub struct ProjectConfig {
    /// The project file, or `None` for a project assembled in code.
    pub config_path: Option<PathBuf>,
    pub root: PathBuf,
    /// Object text files in load order.
    pub texts: Vec<PathBuf>,
    pub annotations: Vec<PathBuf>,
    pub assistance: Option<PathBuf>,
    pub factbases: Vec<FactBaseDecl>,
    pub snapshot_dir: PathBuf,
    pub output_dir: PathBuf,
    pub lexicon: Vec<PathBuf>,
    pub scope: ScopeFilter,
    pub params: BTreeMap<String, i64>,
    /// Registry, mapping and schema clauses.
    pub clauses: Vec<Clause>,
}

impl ProjectConfig {
    /// An empty project rooted at `root`.
    pub fn new(root: impl Into<PathBuf>) -> Self {
        let root = root.into();
        ProjectConfig {
            config_path: None,
            texts: Vec::new(),
            annotations: Vec::new(),
            assistance: None,
            factbases: Vec::new(),
            snapshot_dir: root.join("build/snapshots"),
            output_dir: root.join("build/out"),
            lexicon: Vec::new(),
            scope: ScopeFilter::all(),
            params: BTreeMap::new(),
            clauses: Vec::new(),
            root,
        }
    }

    pub fn load(path: &Path) -> Result<Self, ProjectError> {
        if !path.is_file() {
            return Err(ProjectError::MissingPath { path: path.to_path_buf(), what: "project file" });
        }
        let src = std::fs::read_to_string(path).map_err(|e| ProjectError::io(path, e))?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let mut cfg = Self::parse(&src, &root).map_err(|e| match e {
            ProjectError::Config { line, message, .. } => ProjectError::Config { path: path.to_path_buf(), line, message },
            other => other,
        })?;
        cfg.config_path = Some(path.to_path_buf());
        Ok(cfg)
    }

    /// Parses project clauses; paths are resolved against `root` and must
    /// exist, except the snapshot and output directories.
    pub fn parse(src: &str, root: &Path) -> Result<Self, ProjectError> {
        let config_err = |line: usize, message: String| ProjectError::Config { path: PathBuf::from("<project>"), line, message };
        let clauses = parse_clauses(src).map_err(|e| config_err(e.line, e.message))?;
        let mut cfg = ProjectConfig::new(root);
        for c in clauses {
            let err = |m: &str| config_err(c.line, format!("{}: {m}", c.functor));
            let text = |i: usize| c.args.get(i).and_then(Term::as_text).ok_or_else(|| err("expected a string argument"));
            let path = |i: usize| text(i).map(|p| root.join(p));
            match c.functor.as_str() {
                "texts" => {
                    let p = existing(path(0)?, "text path")?;
                    cfg.texts.extend(tex_files(&p)?);
                }
                "annotations" => cfg.annotations.push(existing(path(0)?, "annotation file")?),
                "assistance" => cfg.assistance = Some(existing(path(0)?, "assistance file")?),
                "lexicon" => cfg.lexicon.push(existing(path(0)?, "lexicon file")?),
                "snapshots" => cfg.snapshot_dir = path(0)?,
                "output" => cfg.output_dir = path(0)?,
                "factbase" => {
                    let format = match text(1)? {
                        "ntriples" | "nt" => BaseFormat::NTriples,
                        "table" | "tsv" | "csv" => BaseFormat::Table,
                        f => return Err(err(&format!("unknown format `{f}`"))),
                    };
                    let kind = c.args.get(2).map(|_| text(2)?.parse().map_err(|e: String| err(&e))).transpose()?;
                    cfg.factbases.push(FactBaseDecl { path: existing(path(0)?, "fact base")?, format, kind });
                }
                "scope" => match (text(0)?, c.args.get(1)) {
                    ("max_birth_year", Some(Term::Int(y))) => cfg.scope.max_birth_year = Some(*y as i32),
                    ("kind", Some(_)) => {
                        cfg.scope.kinds.insert(text(1)?.parse().map_err(|e: String| err(&e))?);
                    }
                    _ => return Err(err("expected scope(max_birth_year, Year) or scope(kind, person|place)")),
                },
                "param" => {
                    let name = text(0)?.to_string();
                    let Some(value) = c.args.get(1).and_then(Term::as_int) else {
                        return Err(err("value must be an integer"));
                    };
                    cfg.set_param(&name, value).map_err(|m| err(&m))?;
                }
                _ => cfg.clauses.push(c),
            }
        }
        cfg.registry().map_err(|e| config_err(e.line, e.message))?;
        cfg.mapping().map_err(|m| config_err(0, m))?;
        cfg.table_schema().map_err(|m| config_err(0, m))?;
        Ok(cfg)
    }

    /// Sets a parameter, as from `--param name=value`.
    pub fn set_param(&mut self, name: &str, value: i64) -> Result<(), String> {
        if name == "lifespan_slack" {
            if value < 0 {
                return Err("lifespan_slack must be ≥ 0".into());
            }
        } else {
            NeiParams::default().set(name, value)?;
        }
        self.params.insert(name.to_string(), value);
        Ok(())
    }

    pub fn known_params() -> impl Iterator<Item = &'static str> {
        PARAM_NAMES.iter().copied().chain(["lifespan_slack"])
    }

    pub fn registry(&self) -> Result<CommandRegistry, RegistryError> {
        let mut r = CommandRegistry::default();
        r.apply_clauses(&self.clauses)?;
        Ok(r)
    }

    pub fn mapping(&self) -> Result<TripleMapping, String> {
        let mut m = TripleMapping::standard();
        m.apply_clauses(&self.clauses)?;
        Ok(m)
    }

    pub fn table_schema(&self) -> Result<TableSchema, String> {
        let mut s = TableSchema::default();
        s.apply_clauses(&self.clauses)?;
        Ok(s)
    }

    pub fn check_options(&self) -> CheckOptions {
        CheckOptions { lifespan_slack: self.params.get("lifespan_slack").copied().unwrap_or(0) as i32 }
    }

    pub fn merged_snapshot(&self) -> PathBuf {
        self.snapshot_dir.join(MERGED_SNAPSHOT)
    }

    pub fn nei_dir(&self) -> PathBuf {
        self.output_dir.join("nei")
    }

    pub fn edition_dir(&self) -> PathBuf {
        self.output_dir.join("edition")
    }
}

fn existing(p: PathBuf, what: &'static str) -> Result<PathBuf, ProjectError> {
    if p.exists() {
        Ok(p)
    } else {
        Err(ProjectError::MissingPath { path: p, what })
    }
}

fn tex_files(p: &Path) -> Result<Vec<PathBuf>, ProjectError> {
    if p.is_file() {
        return Ok(vec![p.to_path_buf()]);
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(p).map_err(|e| ProjectError::io(p, e))? {
        let path = entry.map_err(|e| ProjectError::io(p, e))?.path();
        if path.extension().is_some_and(|e| e == "tex") {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Everything loaded from a project except the caches.
#[derive(Debug, Clone)]
pub struct Workspace {
    pub registry: CommandRegistry,
    pub fragments: Vec<Fragment>,
    pub annotations: Vec<Annotation>,
    pub assistance: AssistanceDocument,
    pub directive_sources: Vec<DirectiveSource>,
    pub settings: Settings,
}

impl Workspace {
    pub fn load(cfg: &ProjectConfig) -> Result<Self, ProjectError> {
        let assistance = load_assistance(cfg)?;
        let mut registry = cfg.registry().map_err(|e| config_error(cfg, e.line, e.message))?;
        registry.apply_clauses(&assistance.passthrough).map_err(|e| ProjectError::Directive {
            path: cfg.assistance.clone().unwrap_or_default(),
            error: DirectiveError::DirectiveSyntax { line: e.line, message: e.message },
        })?;
        let fragments = load_fragments(&cfg.texts, &registry)?;
        let mut annotations = Vec::new();
        for p in &cfg.annotations {
            let src = std::fs::read_to_string(p).map_err(|e| ProjectError::io(p, e))?;
            annotations.extend(parse_annotations(&src, &p.display().to_string())?);
        }
        let file = cfg.assistance.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let directive_sources = assistance
            .directives
            .iter()
            .map(|(line, d)| DirectiveSource { file: file.clone(), line: *line, directive: d.clone() })
            .collect();
        let settings = settings(cfg)?;
        Ok(Workspace { registry, fragments, annotations, assistance, directive_sources, settings })
    }

    pub fn documents(&self) -> Vec<Document> {
        self.fragments.par_iter().map(|f| f.document(&self.registry)).collect()
    }

    pub fn directives(&self) -> Vec<Directive> {
        self.assistance.iter().cloned().collect()
    }
}

fn config_error(cfg: &ProjectConfig, line: usize, message: String) -> ProjectError {
    ProjectError::Config { path: cfg.config_path.clone().unwrap_or_default(), line, message }
}

pub fn load_assistance(cfg: &ProjectConfig) -> Result<AssistanceDocument, ProjectError> {
    match &cfg.assistance {
        None => Ok(AssistanceDocument::default()),
        Some(p) => load_directives(p).map_err(|error| ProjectError::Directive { path: p.clone(), error }),
    }
}

/// Parses fragments in parallel; ids are file stems and must be unique.
pub fn load_fragments(paths: &[PathBuf], registry: &CommandRegistry) -> Result<Vec<Fragment>, ProjectError> {
    let frags: Vec<Fragment> =
        paths.par_iter().map(|p| Fragment::load(p, registry)).collect::<Result<_, EditionError>>()?;
    let mut seen = BTreeSet::new();
    for f in &frags {
        if !seen.insert(f.id.as_str()) {
            return Err(ProjectError::DuplicateFragment(f.id.clone()));
        }
    }
    Ok(frags)
}

/// Identification settings from project params and lexicon files.
pub fn settings(cfg: &ProjectConfig) -> Result<Settings, ProjectError> {
    let mut params = NeiParams::default();
    for (name, value) in &cfg.params {
        if name != "lifespan_slack" {
            params.set(name, *value).map_err(NeiError::InvalidParam)?;
        }
    }
    let mut lexicon = Lexicon::default();
    for p in &cfg.lexicon {
        lexicon.load_common_nouns(p).map_err(|e| ProjectError::io(p, e))?;
    }
    Ok(Settings { params, lexicon })
}

#[derive(Debug, Clone, Serialize)]
pub struct BaseSummary {
    pub path: PathBuf,
    pub snapshot: PathBuf,
    pub entities: usize,
    pub malformed: usize,
    pub filtered: usize,
    pub rejected: usize,
    pub warnings: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct IngestSummary {
    pub bases: Vec<BaseSummary>,
    pub merged: PathBuf,
    pub entities: usize,
    pub conflicts: usize,
}

/// Ingests every declared fact base into its own snapshot, then writes
/// the merge of all of them.
pub fn ingest(cfg: &ProjectConfig) -> Result<IngestSummary, ProjectError> {
    std::fs::create_dir_all(&cfg.snapshot_dir).map_err(|e| ProjectError::io(&cfg.snapshot_dir, e))?;
    let mapping = cfg.mapping().map_err(|m| config_error(cfg, 0, m))?;
    let schema = cfg.table_schema().map_err(|m| config_error(cfg, 0, m))?;
    let mut names = BTreeSet::new();
    for b in &cfg.factbases {
        if !names.insert(b.snapshot_name()) {
            return Err(config_error(cfg, 0, format!("two fact bases share the snapshot name {}", b.snapshot_name())));
        }
    }
    let built: Vec<(CacheSet, BaseSummary)> = cfg
        .factbases
        .par_iter()
        .map(|b| {
            let mut filter = cfg.scope.clone();
            if let Some(k) = b.kind {
                filter.kinds = [k].into();
            }
            let (cache, malformed, filtered, rejected, warnings) = match b.format {
                BaseFormat::NTriples => {
                    let (c, r) = ingest_triples_file(&b.path, &mapping, &filter)?;
                    (c, r.malformed, r.filtered, r.rejected, r.warnings.len())
                }
                BaseFormat::Table => {
                    let (c, r) = ingest_table_file(&b.path, &schema, &filter)?;
                    let bad = r.bad_rows.len();
                    (c, bad, r.filtered, 0, bad)
                }
            };
            let snapshot = cfg.snapshot_dir.join(b.snapshot_name());
            save_snapshot(&cache, &snapshot)?;
            let s = BaseSummary { path: b.path.clone(), snapshot, entities: cache.len(), malformed, filtered, rejected, warnings };
            Ok((cache, s))
        })
        .collect::<Result<_, FactError>>()?;
    let mut merged = CacheSet::default();
    let mut conflicts = 0;
    let mut bases = Vec::new();
    for (cache, s) in built {
        let (m, c) = merged.merge(&cache);
        merged = m;
        conflicts += c.len();
        bases.push(s);
    }
    let path = cfg.merged_snapshot();
    save_snapshot(&merged, &path)?;
    Ok(IngestSummary { bases, merged: path, entities: merged.len(), conflicts })
}

pub fn load_cache(cfg: &ProjectConfig) -> Result<CacheSet, ProjectError> {
    let path = cfg.merged_snapshot();
    if !path.is_file() {
        return Err(ProjectError::MissingSnapshot { path });
    }
    Ok(load_snapshot(&path)?)
}

#[derive(Debug, Clone)]
pub struct NeiRun {
    pub result: NeiResult,
    pub elapsed: Duration,
}

pub fn run_nei(ws: &Workspace, cache: &CacheSet) -> Result<NeiRun, ProjectError> {
    let docs = ws.documents();
    let start = Instant::now();
    let result = identify(&docs, cache, &ws.directives(), &ws.settings)?;
    Ok(NeiRun { result, elapsed: start.elapsed() })
}

/// Writes `<doc>.jsonl` per document and `summary.json` under `dir`.
pub fn write_nei(result: &NeiResult, dir: &Path) -> Result<(), ProjectError> {
    std::fs::create_dir_all(dir).map_err(|e| ProjectError::io(dir, e))?;
    for d in &result.documents {
        let p = dir.join(format!("{}.jsonl", d.doc_id));
        std::fs::write(&p, d.to_jsonl()).map_err(|e| ProjectError::io(&p, e))?;
    }
    let p = dir.join("summary.json");
    let json = serde_json::to_string_pretty(&result.stats).expect("stats serialize") + "\n";
    std::fs::write(&p, json).map_err(|e| ProjectError::io(&p, e))
}

pub fn run_check(cfg: &ProjectConfig, ws: &Workspace, cache: &CacheSet) -> CheckReport {
    check(&ws.fragments, &ws.annotations, &ws.directive_sources, cache, &cfg.check_options())
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub outputs: OutputBundle,
    pub registers: RegisterBundle,
    pub result: NeiResult,
    /// Fragments left unmerged because an annotation could not be placed.
    pub failures: Vec<EditionError>,
    /// Generated annotations that yielded to existing markup.
    pub skipped: usize,
}

/// Identifies entities, merges manual and generated annotations into each
/// fragment, orders the fragments and renders text, registers and HTML.
pub fn generate(ws: &Workspace, cache: &CacheSet) -> Result<Generated, ProjectError> {
    let result = run_nei(ws, cache)?.result;
    let merged: Vec<(Fragment, Result<usize, EditionError>)> = ws
        .fragments
        .par_iter()
        .map(|f| {
            let mut anns: Vec<Annotation> =
                ws.annotations.iter().filter(|a| a.doc_id == f.id).cloned().collect();
            if let Some(r) = result.document(&f.id) {
                anns.extend(generated_annotations(r));
            }
            match merge_annotations(f, &anns, &ws.registry) {
                Ok(m) => (m.fragment, Ok(m.skipped.len())),
                Err(e) => (f.clone(), Err(e)),
            }
        })
        .collect();
    let mut failures = Vec::new();
    let mut skipped = 0;
    let mut frags = Vec::with_capacity(merged.len());
    for (f, r) in merged {
        match r {
            Ok(n) => skipped += n,
            Err(e) => failures.push(e),
        }
        frags.push(f);
    }
    let ordered = order_fragments(frags);
    let registers = generate_registers(&ordered, &result, cache);
    let outputs = render_outputs(&ordered, &result, &registers, &ws.registry);
    Ok(Generated { outputs, registers, result, failures, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_resolves_paths_and_params() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("letters")).unwrap();
        std::fs::write(dir.path().join("letters/b.tex"), "B").unwrap();
        std::fs::write(dir.path().join("letters/a.tex"), "A").unwrap();
        std::fs::write(dir.path().join("letters/notes.txt"), "").unwrap();
        std::fs::write(dir.path().join("gnd.nt"), "").unwrap();
        let src = "texts(\"letters\").\nfactbase(\"gnd.nt\", ntriples, person).\nparam(k, 3).\n\
                   scope(max_birth_year, 1800).\ncommand(\"kbwork\", 1).\noutput(\"out\").";
        let cfg = ProjectConfig::parse(src, dir.path()).unwrap();
        assert_eq!(cfg.texts, vec![dir.path().join("letters/a.tex"), dir.path().join("letters/b.tex")]);
        assert_eq!(cfg.factbases[0].kind, Some(EntityKind::Person));
        assert_eq!(cfg.params["k"], 3);
        assert_eq!(cfg.scope.max_birth_year, Some(1800));
        assert!(cfg.registry().unwrap().command("kbwork").is_some());
        assert_eq!(cfg.output_dir, dir.path().join("out"));
    }

    #[test]
    fn missing_paths_and_bad_params_are_errors() {
        let dir = tempfile::tempdir().unwrap();
        let err = ProjectConfig::parse("texts(\"nope\").", dir.path()).unwrap_err();
        assert!(matches!(err, ProjectError::MissingPath { .. }));
        assert!(err.to_string().contains("nope"));
        let err = ProjectConfig::parse("\nparam(speed, 1).", dir.path()).unwrap_err();
        assert!(matches!(err, ProjectError::Config { line: 2, .. }), "{err}");
    }

    #[test]
    fn nei_requires_snapshot() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ProjectConfig::new(dir.path());
        let err = load_cache(&cfg).unwrap_err();
        assert!(err.to_string().contains("scriptorium ingest"));
    }
}
