use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::facts::EntityKind;
use crate::terms::{parse_clauses, Clause, Term};

/// Parameter names accepted by `param(name, value).`
pub const PARAM_NAMES: &[&str] = &["k", "window", "anchor_rank", "candidate_limit", "min_word_length"];

/// Functors that belong to other readers of the same file syntax (registry
/// entries, fact-base mappings, project settings) and are passed through.
const FOREIGN: &[&str] = &[
    "command",
    "environment",
    "punctuation",
    "predicate",
    "class",
    "prefix",
    "column",
    "delimiter",
    "sub_delimiter",
    "id_prefix",
    "texts",
    "annotations",
    "assistance",
    "snapshots",
    "output",
    "lexicon",
    "scope",
    "mapping",
    "schema",
];

/// One instruction that biases or overrides identification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "directive", rename_all = "snake_case")]
pub enum Directive {
    /// `factbase("gnd.nt.gz", ntriples, person).`
    FactBase { path: String, format: String, kind: Option<EntityKind> },
    /// `alias("Gleimius", person, "gnd:118540238").`
    Alias { surface: String, kind: Option<EntityKind>, entity_id: String },
    /// `forbid("Gleim").` or `forbid("Gleim", "letter-017").`
    Forbid { surface: String, doc: Option<String> },
    /// `fix("letter-017", 42, "gnd:118540238").` or `fix("letter-017", 42, none).`
    Fix { doc: String, token: usize, entity_id: Option<String> },
    /// `stopword("Herr").`
    AddStopword { word: String },
    /// `common_noun("Freund").`
    AddCommonNoun { word: String },
    /// `param(k, 5).`
    SetParam { name: String, value: i64 },
}

impl Directive {
    pub fn to_clause(&self) -> Clause {
        let opt_kind = |k: &Option<EntityKind>| k.map(|k| Term::atom(k.as_str()));
        match self {
            Directive::FactBase { path, format, kind } => {
                let mut args = vec![Term::str(path), Term::atom(format)];
                args.extend(opt_kind(kind));
                Clause::new("factbase", args)
            }
            Directive::Alias { surface, kind, entity_id } => {
                let mut args = vec![Term::str(surface)];
                args.extend(opt_kind(kind));
                args.push(Term::str(entity_id));
                Clause::new("alias", args)
            }
            Directive::Forbid { surface, doc } => {
                let mut args = vec![Term::str(surface)];
                args.extend(doc.as_ref().map(Term::str));
                Clause::new("forbid", args)
            }
            Directive::Fix { doc, token, entity_id } => Clause::new(
                "fix",
                vec![
                    Term::str(doc),
                    Term::Int(*token as i64),
                    entity_id.as_ref().map_or_else(|| Term::atom("none"), Term::str),
                ],
            ),
            Directive::AddStopword { word } => Clause::new("stopword", vec![Term::str(word)]),
            Directive::AddCommonNoun { word } => Clause::new("common_noun", vec![Term::str(word)]),
            Directive::SetParam { name, value } => Clause::new("param", vec![Term::atom(name), Term::Int(*value)]),
        }
    }

    /// Entity id the directive asserts, if any.
    pub fn entity_id(&self) -> Option<&str> {
        match self {
            Directive::Alias { entity_id, .. } => Some(entity_id),
            Directive::Fix { entity_id, .. } => entity_id.as_deref(),
            _ => None,
        }
    }
}

impl fmt::Display for Directive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.to_clause().fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DirectiveError {
    #[error("line {line}: {message}")]
    DirectiveSyntax { line: usize, message: String },
    #[error("{}: {message}", path.display())]
    Io { path: std::path::PathBuf, message: String },
}

/// A parsed assistance document.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AssistanceDocument {
    /// Directives paired with their source line.
    pub directives: Vec<(usize, Directive)>,
    /// Clauses meant for other readers, such as `command(...)`.
    pub passthrough: Vec<Clause>,
}

impl AssistanceDocument {
    pub fn iter(&self) -> impl Iterator<Item = &Directive> {
        self.directives.iter().map(|(_, d)| d)
    }

    pub fn into_directives(self) -> Vec<Directive> {
        self.directives.into_iter().map(|(_, d)| d).collect()
    }
}

/// Parses directive text. Each call produces a complete set; reloading a
/// file replaces whatever was loaded before.
pub fn parse_directives(src: &str) -> Result<AssistanceDocument, DirectiveError> {
    let clauses = parse_clauses(src).map_err(|e| DirectiveError::DirectiveSyntax { line: e.line, message: e.message })?;
    let mut doc = AssistanceDocument::default();
    for c in clauses {
        if FOREIGN.contains(&c.functor.as_str()) {
            doc.passthrough.push(c);
            continue;
        }
        let line = c.line;
        let d = directive_from_clause(&c).map_err(|message| DirectiveError::DirectiveSyntax { line, message })?;
        doc.directives.push((line, d));
    }
    Ok(doc)
}

pub fn load_directives(path: &Path) -> Result<AssistanceDocument, DirectiveError> {
    let src = std::fs::read_to_string(path).map_err(|e| DirectiveError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_directives(&src)
}

fn directive_from_clause(c: &Clause) -> Result<Directive, String> {
    let args = &c.args;
    let text = |i: usize, what: &str| -> Result<String, String> {
        args.get(i)
            .and_then(Term::as_text)
            .map(str::to_string)
            .ok_or_else(|| format!("{}: argument {} ({what}) must be a string or identifier", c.functor, i + 1))
    };
    let kind = |i: usize| -> Result<EntityKind, String> { text(i, "kind")?.parse() };
    let arity = |allowed: &[usize]| -> Result<(), String> {
        if allowed.contains(&args.len()) {
            Ok(())
        } else {
            Err(format!("{}: wrong number of arguments ({})", c.functor, args.len()))
        }
    };
    match c.functor.as_str() {
        "factbase" => {
            arity(&[2, 3])?;
            Ok(Directive::FactBase {
                path: text(0, "path")?,
                format: text(1, "format")?,
                kind: if args.len() == 3 { Some(kind(2)?) } else { None },
            })
        }
        "alias" => {
            arity(&[2, 3])?;
            let (kind, id_at) = if args.len() == 3 { (Some(kind(1)?), 2) } else { (None, 1) };
            Ok(Directive::Alias { surface: text(0, "surface")?, kind, entity_id: text(id_at, "entity id")? })
        }
        "forbid" => {
            arity(&[1, 2])?;
            Ok(Directive::Forbid {
                surface: text(0, "surface")?,
                doc: if args.len() == 2 { Some(text(1, "document")?) } else { None },
            })
        }
        "fix" => {
            arity(&[3])?;
            let token = args[1]
                .as_int()
                .filter(|n| *n >= 0)
                .ok_or("fix: token index must be a non-negative integer")? as usize;
            let entity_id = match &args[2] {
                Term::Atom(a) if a == "none" => None,
                t => Some(t.as_text().ok_or("fix: entity must be an id string or none")?.to_string()),
            };
            Ok(Directive::Fix { doc: text(0, "document")?, token, entity_id })
        }
        "stopword" => {
            arity(&[1])?;
            Ok(Directive::AddStopword { word: text(0, "word")? })
        }
        "common_noun" => {
            arity(&[1])?;
            Ok(Directive::AddCommonNoun { word: text(0, "word")? })
        }
        "param" => {
            arity(&[2])?;
            let name = text(0, "name")?;
            if !PARAM_NAMES.contains(&name.as_str()) {
                return Err(format!("param: unknown parameter `{name}` (known: {})", PARAM_NAMES.join(", ")));
            }
            let value = match &args[1] {
                Term::Int(n) => *n,
                Term::Str(s) => s.trim().parse().map_err(|_| format!("param: `{s}` is not an integer"))?,
                other => return Err(format!("param: `{other}` is not an integer")),
            };
            Ok(Directive::SetParam { name, value })
        }
        other => Err(format!("unknown directive `{other}`")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alias_line() {
        let doc = parse_directives("alias(\"Gleimius\", person, \"gnd:X\").").unwrap();
        assert_eq!(
            doc.into_directives(),
            vec![Directive::Alias {
                surface: "Gleimius".into(),
                kind: Some(EntityKind::Person),
                entity_id: "gnd:X".into()
            }]
        );
    }

    #[test]
    fn all_forms_round_trip_through_display() {
        let src = "factbase(\"gnd.nt\", ntriples, person).\n\
                   alias(\"Gleimius\", \"gnd:1\").\n\
                   forbid(\"Gleim\", \"letter-1\").\n\
                   fix(\"letter-1\", 12, none).\n\
                   fix(\"letter-1\", 13, \"gnd:1\").\n\
                   stopword(\"Herr\").\n\
                   common_noun(\"Freund\").\n\
                   param(k, 3).\n\
                   command(\"kbwork\", 1).\n";
        let doc = parse_directives(src).unwrap();
        assert_eq!(doc.directives.len(), 8);
        assert_eq!(doc.passthrough.len(), 1);
        let again: String = doc.iter().map(|d| format!("{d}\n")).collect();
        assert_eq!(parse_directives(&again).unwrap().into_directives(), doc.into_directives());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let err = parse_directives("% header\nforbid(\"a\").\nforbid(\"a\"\n").unwrap_err();
        assert!(matches!(err, DirectiveError::DirectiveSyntax { line: 3, .. }), "{err}");
        let err = parse_directives("param(speed, 3).").unwrap_err();
        assert!(matches!(err, DirectiveError::DirectiveSyntax { line: 1, .. }));
        let err = parse_directives("fix(\"d\", -1, none).").unwrap_err();
        assert!(matches!(err, DirectiveError::DirectiveSyntax { line: 1, .. }));
        let err = parse_directives("frobnicate(1).").unwrap_err();
        assert!(err.to_string().contains("frobnicate"));
    }
}
