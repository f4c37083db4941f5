use std::collections::{BTreeMap, BTreeSet};

use crate::terms::{Clause, Term};

/// Default punctuation characters. Each becomes its own item.
pub const DEFAULT_PUNCTUATION: &[char] = &[
    '.', ',', ';', ':', '!', '?', '(', ')', '"', '\'', '–', '—', '«', '»', '‹', '›', '…',
];

/// How the parser treats a known command or environment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Signature {
    pub required_arity: u8,
    pub optional_args: u8,
    /// Parse argument contents into items. When false each argument is kept
    /// as a single opaque item.
    pub parse_args: bool,
    /// Environments only: keep the body unparsed.
    pub opaque_body: bool,
    /// Whether the first required argument contributes to the plain-text
    /// projection. Editorial commands like `\kbcomment` set this to false.
    pub hoist: bool,
}

impl Signature {
    pub const fn command(required_arity: u8) -> Self {
        Signature {
            required_arity,
            optional_args: 0,
            parse_args: true,
            opaque_body: false,
            hoist: true,
        }
    }

    pub const fn with_optional(mut self, n: u8) -> Self {
        self.optional_args = n;
        self
    }

    pub const fn hidden(mut self) -> Self {
        self.hoist = false;
        self
    }

    pub const fn raw(mut self) -> Self {
        self.parse_args = false;
        self
    }

    pub const fn environment(opaque_body: bool) -> Self {
        Signature {
            required_arity: 0,
            optional_args: 0,
            parse_args: true,
            opaque_body,
            hoist: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct RegistryError {
    pub line: usize,
    pub message: String,
}

/// Commands and environments known to the parser, plus the punctuation set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandRegistry {
    commands: BTreeMap<String, Signature>,
    environments: BTreeMap<String, Signature>,
    punctuation: BTreeSet<char>,
}

impl Default for CommandRegistry {
    /// Standard text-markup commands plus the edition markup commands.
    fn default() -> Self {
        let mut reg = CommandRegistry::empty();
        for name in [
            "emph", "textit", "textbf", "textsc", "textsf", "texttt", "textup", "underline",
            "mbox", "chapter", "section", "subsection", "subsubsection", "paragraph",
        ] {
            let sig = if name.contains("section") || name == "chapter" || name == "paragraph" {
                Signature::command(1).with_optional(1)
            } else {
                Signature::command(1)
            };
            reg.register_command(name, sig);
        }
        for name in ["footnote", "marginpar"] {
            reg.register_command(name, Signature::command(1).with_optional(1).hidden());
        }
        for name in ["label", "ref", "pageref", "url", "includegraphics"] {
            reg.register_command(name, Signature::command(1).with_optional(1).raw().hidden());
        }
        reg.register_command("cite", Signature::command(1).with_optional(2).raw().hidden());
        for name in ["newpage", "clearpage", "noindent", "par", "maketitle", "medskip", "bigskip", "smallskip"] {
            reg.register_command(name, Signature::command(0));
        }
        reg.register_command("item", Signature::command(0).with_optional(1));
        for name in ["kbperson", "kbplace", "kbdate"] {
            reg.register_command(name, Signature::command(1).with_optional(1));
        }
        for name in ["kbcomment", "kbindex"] {
            reg.register_command(name, Signature::command(1).hidden());
        }
        for name in ["kbsender", "kbrecipient", "kbdated"] {
            reg.register_command(name, Signature::command(1).raw().hidden());
        }
        for name in [
            "verbatim", "verbatim*", "lstlisting", "comment", "equation", "equation*", "align",
            "align*", "displaymath", "math", "tabular",
        ] {
            reg.register_environment(name, Signature::environment(true));
        }
        reg
    }
}

impl CommandRegistry {
    /// A registry with no commands and the default punctuation set.
    pub fn empty() -> Self {
        CommandRegistry {
            commands: BTreeMap::new(),
            environments: BTreeMap::new(),
            punctuation: DEFAULT_PUNCTUATION.iter().copied().collect(),
        }
    }

    pub fn register_command(&mut self, name: &str, sig: Signature) -> &mut Self {
        self.commands.insert(name.to_string(), sig);
        self
    }

    pub fn register_environment(&mut self, name: &str, sig: Signature) -> &mut Self {
        self.environments.insert(name.to_string(), sig);
        self
    }

    pub fn add_punctuation(&mut self, c: char) -> &mut Self {
        self.punctuation.insert(c);
        self
    }

    pub fn command(&self, name: &str) -> Option<&Signature> {
        self.commands.get(name)
    }

    pub fn environment(&self, name: &str) -> Option<&Signature> {
        self.environments.get(name)
    }

    pub fn is_punctuation(&self, c: char) -> bool {
        self.punctuation.contains(&c)
    }

    /// Applies the registry clauses of a directive document on top of
    /// `self`. Other clauses are ignored.
    ///
    /// ```text
    /// command("emph", 1).
    /// command("kbperson", 1, 1).
    /// command("footnote", 1, 0, hidden).
    /// command("url", 1, 0, raw, hidden).
    /// environment("verbatim", opaque).
    /// punctuation("„").
    /// ```
    pub fn apply_clauses(&mut self, clauses: &[Clause]) -> Result<(), RegistryError> {
        for clause in clauses {
            let err = |message: &str| RegistryError {
                line: clause.line,
                message: format!("{}: {message}", clause.functor),
            };
            match clause.functor.as_str() {
                "command" => {
                    let name = clause.args.first().and_then(Term::as_text).ok_or_else(|| err("missing name"))?;
                    let arity = clause.args.get(1).map(|t| t.as_int().ok_or_else(|| err("arity must be an integer")))
                        .transpose()?.unwrap_or(0);
                    let optional = clause.args.get(2).map(|t| t.as_int().ok_or_else(|| err("optional count must be an integer")))
                        .transpose()?.unwrap_or(0);
                    if !(0..=9).contains(&arity) || !(0..=9).contains(&optional) {
                        return Err(err("argument counts must be between 0 and 9"));
                    }
                    let mut sig = Signature::command(arity as u8).with_optional(optional as u8);
                    for flag in clause.args.iter().skip(3) {
                        match flag.as_atom() {
                            Some("hidden") => sig = sig.hidden(),
                            Some("raw") => sig = sig.raw(),
                            _ => return Err(err(&format!("unknown flag {flag}"))),
                        }
                    }
                    self.register_command(name, sig);
                }
                "environment" => {
                    let name = clause.args.first().and_then(Term::as_text).ok_or_else(|| err("missing name"))?;
                    let opaque = match clause.args.get(1) {
                        None => false,
                        Some(t) if t.as_atom() == Some("opaque") => true,
                        Some(t) => return Err(err(&format!("unknown flag {t}"))),
                    };
                    self.register_environment(name, Signature::environment(opaque));
                }
                "punctuation" => {
                    let text = clause.args.first().and_then(Term::as_str).ok_or_else(|| err("expected a string"))?;
                    let mut chars = text.chars();
                    match (chars.next(), chars.next()) {
                        (Some(c), None) if !c.is_alphanumeric() && !c.is_whitespace() && !"\\{}%$~".contains(c) => {
                            self.add_punctuation(c);
                        }
                        _ => return Err(err("expected a single non-alphanumeric character")),
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terms::parse_clauses;

    #[test]
    fn loads_from_directive_syntax() {
        let clauses = parse_clauses(
            "command(\"kbwork\", 1).\ncommand(\"note\", 1, 1, hidden).\nenvironment(\"letter\").\nenvironment(\"code\", opaque).\npunctuation(\"„\").\nparam(k, 4).",
        )
        .unwrap();
        let mut reg = CommandRegistry::empty();
        reg.apply_clauses(&clauses).unwrap();
        assert_eq!(reg.command("kbwork"), Some(&Signature::command(1)));
        let note = reg.command("note").unwrap();
        assert!(!note.hoist);
        assert_eq!(note.optional_args, 1);
        assert!(!reg.environment("letter").unwrap().opaque_body);
        assert!(reg.environment("code").unwrap().opaque_body);
        assert!(reg.is_punctuation('„'));
    }

    #[test]
    fn rejects_bad_flags() {
        let clauses = parse_clauses("command(\"x\", 1, 0, loud).").unwrap();
        let err = CommandRegistry::empty().apply_clauses(&clauses).unwrap_err();
        assert_eq!(err.line, 1);
    }
}
