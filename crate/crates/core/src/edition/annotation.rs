use std::fmt;
use std::ops::Range;

use serde::Serialize;

use super::fragment::Fragment;
use super::EditionError;
use crate::facts::EntityKind;
use crate::latex::{find_commands, project, CommandRegistry, Projection, Span};
use crate::nei::DocumentResult;
use crate::terms::{parse_clauses, Clause, Term};

/// Where an annotation attaches.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionSpec {
    /// Word index in the plain-text projection: `token(17)`.
    Token(usize),
    /// Source byte interval aligned to token boundaries: `span(120, 125)`.
    Span(Span),
    /// The n-th (1-based) occurrence of a phrase in the plain text:
    /// `quote("Berlin", 2)`.
    Quote { text: String, ordinal: usize },
}

impl fmt::Display for PositionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PositionSpec::Token(n) => write!(f, "token({n})"),
            PositionSpec::Span(s) => write!(f, "span({}, {})", s.start, s.end),
            PositionSpec::Quote { text, ordinal } => write!(f, "quote({}, {ordinal})", Term::str(text.clone())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RefKind {
    Person,
    Place,
    Date,
}

impl RefKind {
    pub fn command(&self) -> &'static str {
        match self {
            RefKind::Person => "kbperson",
            RefKind::Place => "kbplace",
            RefKind::Date => "kbdate",
        }
    }

    fn atom(&self) -> &'static str {
        match self {
            RefKind::Person => "person",
            RefKind::Place => "place",
            RefKind::Date => "date",
        }
    }
}

impl From<EntityKind> for RefKind {
    fn from(k: EntityKind) -> Self {
        match k {
            EntityKind::Person => RefKind::Person,
            EntityKind::Place => RefKind::Place,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    EntityRef { kind: RefKind, id: String },
    Comment(String),
    IndexTerm(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Manual,
    External,
    Generated,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Annotation {
    pub doc_id: String,
    pub position: PositionSpec,
    pub payload: Payload,
    pub origin: Origin,
    /// File and line the annotation was read from.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<(String, usize)>,
}

impl Annotation {
    pub fn new(doc_id: impl Into<String>, position: PositionSpec, payload: Payload) -> Self {
        Annotation { doc_id: doc_id.into(), position, payload, origin: Origin::Manual, source: None }
    }

    pub fn entity_id(&self) -> Option<&str> {
        match &self.payload {
            Payload::EntityRef { kind: RefKind::Person | RefKind::Place, id } => Some(id),
            _ => None,
        }
    }

    pub fn to_clause(&self) -> Clause {
        let pos = match &self.position {
            PositionSpec::Token(n) => Term::Compound("token".into(), vec![Term::Int(*n as i64)]),
            PositionSpec::Span(s) => {
                Term::Compound("span".into(), vec![Term::Int(s.start as i64), Term::Int(s.end as i64)])
            }
            PositionSpec::Quote { text, ordinal } => {
                Term::Compound("quote".into(), vec![Term::str(text.clone()), Term::Int(*ordinal as i64)])
            }
        };
        let (kind, value) = match &self.payload {
            Payload::EntityRef { kind, id } => (kind.atom(), id.clone()),
            Payload::Comment(t) => ("comment", t.clone()),
            Payload::IndexTerm(t) => ("index", t.clone()),
        };
        let mut args = vec![Term::str(self.doc_id.clone()), pos, Term::atom(kind), Term::str(value)];
        if self.origin != Origin::Manual {
            args.push(Term::atom(match self.origin {
                Origin::External => "external",
                _ => "generated",
            }));
        }
        Clause::new("annotate", args)
    }
}

impl fmt::Display for Annotation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_clause().fmt(f)
    }
}

/// Reads an annotation document: one `annotate(doc, position, kind, value).`
/// per line, with an optional fifth `manual|external|generated` argument.
pub fn parse_annotations(src: &str, file: &str) -> Result<Vec<Annotation>, EditionError> {
    let syntax = |line: usize, message: String| EditionError::AnnotationSyntax { file: file.to_string(), line, message };
    let clauses = parse_clauses(src).map_err(|e| syntax(e.line, e.message))?;
    clauses
        .iter()
        .map(|c| annotation_from_clause(c, file).map_err(|m| syntax(c.line, m)))
        .collect()
}

fn annotation_from_clause(c: &Clause, file: &str) -> Result<Annotation, String> {
    if c.functor != "annotate" || !(4..=5).contains(&c.args.len()) {
        return Err(format!("expected annotate(doc, position, kind, value), found {}/{}", c.functor, c.args.len()));
    }
    let doc = c.args[0].as_text().ok_or("document id must be a string")?.to_string();
    let int = |t: &Term| t.as_int().filter(|n| *n >= 0).map(|n| n as usize).ok_or(format!("`{t}` is not a non-negative integer"));
    let position = match &c.args[1] {
        Term::Compound(name, a) if name == "token" && a.len() == 1 => PositionSpec::Token(int(&a[0])?),
        Term::Compound(name, a) if name == "span" && a.len() == 2 => {
            let (s, e) = (int(&a[0])?, int(&a[1])?);
            if s >= e {
                return Err(format!("empty span({s}, {e})"));
            }
            PositionSpec::Span(Span::new(s, e))
        }
        Term::Compound(name, a) if name == "quote" && (1..=2).contains(&a.len()) => {
            let text = a[0].as_str().ok_or("quote text must be a string")?.to_string();
            let ordinal = a.get(1).map(int).transpose()?.unwrap_or(1);
            if ordinal == 0 || text.trim().is_empty() {
                return Err("quote needs non-empty text and an ordinal ≥ 1".into());
            }
            PositionSpec::Quote { text, ordinal }
        }
        other => return Err(format!("unknown position `{other}`; use token(n), span(a, b) or quote(\"text\", n)")),
    };
    let value = c.args[3].as_text().ok_or("value must be a string")?.to_string();
    let payload = match c.args[2].as_text() {
        Some("person") => Payload::EntityRef { kind: RefKind::Person, id: checked_id(value)? },
        Some("place") => Payload::EntityRef { kind: RefKind::Place, id: checked_id(value)? },
        Some("date") => Payload::EntityRef { kind: RefKind::Date, id: checked_id(value)? },
        Some("comment") => Payload::Comment(value),
        Some("index") => Payload::IndexTerm(value),
        other => return Err(format!("unknown annotation kind {other:?}")),
    };
    let origin = match c.args.get(4).map(|t| t.as_text()) {
        None | Some(Some("manual")) => Origin::Manual,
        Some(Some("external")) => Origin::External,
        Some(Some("generated")) => Origin::Generated,
        Some(_) => return Err("origin must be manual, external or generated".into()),
    };
    Ok(Annotation { doc_id: doc, position, payload, origin, source: Some((file.to_string(), c.line)) })
}

fn checked_id(id: String) -> Result<String, String> {
    if id.is_empty() || id.contains(['[', ']', '{', '}', '%', '\\']) || id.contains(char::is_whitespace) {
        Err(format!("`{id}` is not usable as an id"))
    } else {
        Ok(id)
    }
}

/// A resolved position: source bytes and the projection tokens they cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub span: Span,
    pub tokens: Range<usize>,
}

pub fn resolve(position: &PositionSpec, p: &Projection) -> Result<Target, String> {
    let tokens = match position {
        PositionSpec::Token(n) => {
            let i = p
                .tokens
                .iter()
                .position(|t| t.word_index == Some(*n))
                .ok_or_else(|| format!("document has {} words", p.word_count()))?;
            i..i + 1
        }
        PositionSpec::Span(s) => {
            let i = p.tokens.iter().position(|t| t.span.start == s.start);
            let j = p.tokens.iter().position(|t| t.span.end == s.end);
            match (i, j) {
                (Some(i), Some(j)) if i <= j => i..j + 1,
                _ => return Err("span does not start and end on token boundaries".into()),
            }
        }
        PositionSpec::Quote { text, ordinal } => {
            let Some((at, _)) = p.text.match_indices(text.as_str()).nth(ordinal - 1) else {
                let found = p.text.matches(text.as_str()).count();
                return Err(format!("phrase occurs {found} time(s), not {ordinal}"));
            };
            let end = at + text.len();
            let i = p.tokens.iter().position(|t| t.plain_start == at);
            let j = p.tokens.iter().position(|t| t.plain_start + t.text.len() == end);
            match (i, j) {
                (Some(i), Some(j)) if i <= j => i..j + 1,
                _ => return Err("phrase does not start and end on token boundaries".into()),
            }
        }
    };
    let span = Span::new(p.tokens[tokens.start].span.start, p.tokens[tokens.end - 1].span.end);
    Ok(Target { span, tokens })
}

/// Escapes text for use inside a command argument.
pub fn escape_latex(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\textbackslash{}"),
            '{' | '}' | '%' | '$' | '#' | '&' | '_' => {
                out.push('\\');
                out.push(c);
            }
            '~' => out.push_str("\\textasciitilde{}"),
            '^' => out.push_str("\\textasciicircum{}"),
            '\n' | '\r' => out.push(' '),
            c => out.push(c),
        }
    }
    out
}

struct Insert {
    offset: usize,
    /// At one offset: closing braces, then notes, then openings.
    rank: u8,
    /// Among closings, inner wraps (later start) close first.
    tie: std::cmp::Reverse<usize>,
    text: String,
}

/// Outcome of merging annotations into one fragment.
#[derive(Debug, Clone)]
pub struct Merged {
    pub fragment: Fragment,
    pub applied: usize,
    /// Generated annotations dropped because they collide with existing
    /// markup or other annotations.
    pub skipped: Vec<(Annotation, String)>,
}

/// Inserts annotations for `frag` as markup commands: entity references
/// wrap their target (`\kbperson[id]{Gleim}`), comments and index terms
/// follow it (`\kbcomment{...}`, `\kbindex{...}`).
///
/// A manual or external annotation that cannot be placed aborts the
/// fragment with [`EditionError::UnresolvablePosition`]. Generated ones
/// that cannot be placed are skipped and reported.
pub fn merge_annotations(frag: &Fragment, anns: &[Annotation], registry: &CommandRegistry) -> Result<Merged, EditionError> {
    let mine: Vec<&Annotation> = anns.iter().filter(|a| a.doc_id == frag.id).collect();
    if mine.is_empty() {
        return Ok(Merged { fragment: frag.clone(), applied: 0, skipped: Vec::new() });
    }
    let p = project(&frag.items, registry);
    let marked: Vec<Span> = [RefKind::Person, RefKind::Place, RefKind::Date]
        .iter()
        .flat_map(|k| find_commands(&frag.items, k.command()))
        .map(|c| c.span)
        .collect();

    // Manual and external annotations first so generated ones yield to them.
    let mut ordered = mine;
    ordered.sort_by_key(|a| a.origin == Origin::Generated);
    let mut wraps: Vec<Range<usize>> = Vec::new();
    let mut inserts = Vec::new();
    let mut skipped = Vec::new();
    let mut applied = 0;
    for a in ordered {
        match place(a, &p, &marked, &wraps) {
            Ok((target, new)) => {
                if let Payload::EntityRef { .. } = a.payload {
                    wraps.push(target.tokens.clone());
                }
                inserts.extend(new);
                applied += 1;
            }
            Err(reason) if a.origin == Origin::Generated => skipped.push((a.clone(), reason)),
            Err(reason) => {
                return Err(EditionError::UnresolvablePosition { annotation: a.to_string(), reason });
            }
        }
    }
    inserts.sort_by_key(|a| (a.offset, a.rank, a.tie));
    let src = &frag.source;
    let mut out = String::with_capacity(src.len() + inserts.iter().map(|i| i.text.len()).sum::<usize>());
    let mut at = 0;
    for ins in inserts {
        out.push_str(&src[at..ins.offset]);
        out.push_str(&ins.text);
        at = ins.offset;
    }
    out.push_str(&src[at..]);

    let mut merged = Fragment::parse(frag.id.clone(), out, registry)?;
    merged.meta.source_file = frag.meta.source_file.clone();
    if project(&merged.items, registry).text != p.text {
        return Err(EditionError::UnresolvablePosition {
            annotation: format!("annotations for {}", frag.id),
            reason: "merged markup changed the text".into(),
        });
    }
    Ok(Merged { fragment: merged, applied, skipped })
}

fn place(a: &Annotation, p: &Projection, marked: &[Span], wraps: &[Range<usize>]) -> Result<(Target, Vec<Insert>), String> {
    let target = resolve(&a.position, p)?;
    match &a.payload {
        Payload::EntityRef { kind, id } => {
            let group = p.tokens[target.tokens.start].group;
            if p.tokens[target.tokens.clone()].iter().any(|t| t.group != group) {
                return Err("target crosses markup boundaries".into());
            }
            if marked.iter().any(|m| m.start <= target.span.start && target.span.end <= m.end) {
                return Err("target is already marked up".into());
            }
            if wraps.iter().any(|w| w.start < target.tokens.end && target.tokens.start < w.end) {
                return Err("target overlaps another entity annotation".into());
            }
            Ok((
                target.clone(),
                vec![
                    Insert {
                        offset: target.span.start,
                        rank: 2,
                        tie: std::cmp::Reverse(0),
                        text: format!("\\{}[{id}]{{", kind.command()),
                    },
                    Insert { offset: target.span.end, rank: 0, tie: std::cmp::Reverse(target.span.start), text: "}".into() },
                ],
            ))
        }
        Payload::Comment(text) | Payload::IndexTerm(text) => {
            let cmd = if matches!(a.payload, Payload::Comment(_)) { "kbcomment" } else { "kbindex" };
            let ins = Insert {
                offset: target.span.end,
                rank: 1,
                tie: std::cmp::Reverse(0),
                text: format!("\\{cmd}{{{}}}", escape_latex(text)),
            };
            Ok((target, vec![ins]))
        }
    }
}

/// Entity and date annotations for every chosen, unsuppressed result.
pub fn generated_annotations(result: &DocumentResult) -> Vec<Annotation> {
    let mut out = Vec::new();
    for o in &result.occurrences {
        if o.suppressed {
            continue;
        }
        let (Some(id), Some(c)) = (&o.chosen, o.chosen_candidate()) else { continue };
        out.push(Annotation {
            doc_id: result.doc_id.clone(),
            position: PositionSpec::Token(o.occurrence.token_index),
            payload: Payload::EntityRef { kind: c.kind.into(), id: id.clone() },
            origin: Origin::Generated,
            source: None,
        });
    }
    for d in &result.dates {
        out.push(Annotation {
            doc_id: result.doc_id.clone(),
            position: PositionSpec::Span(d.source_span),
            payload: Payload::EntityRef { kind: RefKind::Date, id: d.date.iso() },
            origin: Origin::Generated,
            source: None,
        });
    }
    out
}
