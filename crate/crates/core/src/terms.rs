//! Reader and writer for the line-oriented term syntax shared by assistance
//! documents, annotation documents, and project configuration files.
//!
//! One clause per line: `name(arg, arg, ...).` where an argument is a
//! double-quoted string, a bare identifier, an integer, or a nested
//! `name(...)` term. `%` starts a comment that runs to the end of the line.

use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Term {
    Str(String),
    Atom(String),
    Int(i64),
    Compound(String, Vec<Term>),
}

impl Term {
    pub fn as_str(&self) -> Option<&str> {
        match self {
            Term::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Term::Atom(s) => Some(s),
            _ => None,
        }
    }

    /// String or atom text.
    pub fn as_text(&self) -> Option<&str> {
        match self {
            Term::Str(s) | Term::Atom(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Term::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn str(s: impl Into<String>) -> Term {
        Term::Str(s.into())
    }

    pub fn atom(s: impl Into<String>) -> Term {
        Term::Atom(s.into())
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Str(s) => {
                f.write_str("\"")?;
                for c in s.chars() {
                    match c {
                        '"' => f.write_str("\\\"")?,
                        '\\' => f.write_str("\\\\")?,
                        '\n' => f.write_str("\\n")?,
                        '\t' => f.write_str("\\t")?,
                        c => write!(f, "{c}")?,
                    }
                }
                f.write_str("\"")
            }
            Term::Atom(a) => f.write_str(a),
            Term::Int(n) => write!(f, "{n}"),
            Term::Compound(name, args) => {
                write!(f, "{name}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// A top-level clause together with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clause {
    pub line: usize,
    pub functor: String,
    pub args: Vec<Term>,
}

impl Clause {
    pub fn new(functor: impl Into<String>, args: Vec<Term>) -> Self {
        Clause {
            line: 0,
            functor: functor.into(),
            args,
        }
    }

    pub fn arity(&self) -> usize {
        self.args.len()
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.args.is_empty() {
            write!(f, "{}.", self.functor)
        } else {
            write!(f, "{}.", Term::Compound(self.functor.clone(), self.args.clone()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub message: String,
}

pub fn parse_clauses(src: &str) -> Result<Vec<Clause>, SyntaxError> {
    let mut out = Vec::new();
    for (idx, raw) in src.lines().enumerate() {
        let line = idx + 1;
        let mut cur = Cursor {
            chars: raw.char_indices().peekable(),
            src: raw,
            line,
        };
        cur.skip_ws();
        if cur.at_end() {
            continue;
        }
        let term = cur.term()?;
        cur.skip_ws();
        if !cur.eat('.') {
            return Err(cur.error("expected `.` at end of clause"));
        }
        cur.skip_ws();
        if !cur.at_end() {
            return Err(cur.error("unexpected text after clause; one clause per line"));
        }
        let (functor, args) = match term {
            Term::Compound(name, args) => (name, args),
            Term::Atom(name) => (name, Vec::new()),
            other => return Err(cur.error(&format!("clause must start with a name, found {other}"))),
        };
        out.push(Clause { line, functor, args });
    }
    Ok(out)
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    src: &'a str,
    line: usize,
}

impl Cursor<'_> {
    fn error(&self, message: &str) -> SyntaxError {
        SyntaxError {
            line: self.line,
            message: message.to_string(),
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn at_end(&mut self) -> bool {
        self.peek().is_none()
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.chars.next();
            true
        } else {
            false
        }
    }

    // Whitespace and trailing `%` comments.
    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c == '%' {
                while self.chars.next().is_some() {}
                return;
            }
            if !c.is_whitespace() {
                return;
            }
            self.chars.next();
        }
    }

    fn term(&mut self) -> Result<Term, SyntaxError> {
        self.skip_ws();
        match self.peek() {
            Some('"') => self.string().map(Term::Str),
            Some(c) if c == '-' || c.is_ascii_digit() => self.integer(),
            Some(c) if c.is_alphabetic() || c == '_' => {
                let name = self.ident();
                self.skip_ws();
                if self.eat('(') {
                    let mut args = Vec::new();
                    self.skip_ws();
                    if self.eat(')') {
                        return Ok(Term::Compound(name, args));
                    }
                    loop {
                        args.push(self.term()?);
                        self.skip_ws();
                        if self.eat(',') {
                            continue;
                        }
                        if self.eat(')') {
                            break;
                        }
                        return Err(self.error("expected `,` or `)`"));
                    }
                    Ok(Term::Compound(name, args))
                } else {
                    Ok(Term::Atom(name))
                }
            }
            Some(c) => Err(self.error(&format!("unexpected character `{c}`"))),
            None => Err(self.error("unexpected end of line")),
        }
    }

    fn ident(&mut self) -> String {
        let start = self.chars.peek().map(|&(i, _)| i).unwrap_or(self.src.len());
        let mut end = start;
        while let Some(&(i, c)) = self.chars.peek() {
            if c.is_alphanumeric() || c == '_' {
                end = i + c.len_utf8();
                self.chars.next();
            } else {
                break;
            }
        }
        self.src[start..end].to_string()
    }

    fn integer(&mut self) -> Result<Term, SyntaxError> {
        let mut text = String::new();
        if self.eat('-') {
            text.push('-');
        }
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                text.push(c);
                self.chars.next();
            } else {
                break;
            }
        }
        text.parse::<i64>()
            .map(Term::Int)
            .map_err(|_| self.error(&format!("invalid integer `{text}`")))
    }

    fn string(&mut self) -> Result<String, SyntaxError> {
        self.chars.next();
        let mut out = String::new();
        loop {
            match self.chars.next().map(|(_, c)| c) {
                None => return Err(self.error("unterminated string")),
                Some('"') => return Ok(out),
                Some('\\') => match self.chars.next().map(|(_, c)| c) {
                    Some('n') => out.push('\n'),
                    Some('t') => out.push('\t'),
                    Some(c) => out.push(c),
                    None => return Err(self.error("unterminated escape")),
                },
                Some(c) => out.push(c),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_mixed_arguments() {
        let src = "% header\nalias(\"Gleimius\", person, \"gnd:X\").\n\nparam(k, 3). % trailing\n";
        let clauses = parse_clauses(src).unwrap();
        assert_eq!(clauses.len(), 2);
        assert_eq!(clauses[0].line, 2);
        assert_eq!(clauses[0].functor, "alias");
        assert_eq!(
            clauses[0].args,
            vec![Term::str("Gleimius"), Term::atom("person"), Term::str("gnd:X")]
        );
        assert_eq!(clauses[1].args[1], Term::Int(3));
    }

    #[test]
    fn nested_terms_and_percent_inside_strings() {
        let c = parse_clauses("annotate(\"l1\", quote(\"50% Berlin\", 2), comment, \"a\\\"b\").")
            .unwrap();
        assert_eq!(
            c[0].args[1],
            Term::Compound("quote".into(), vec![Term::str("50% Berlin"), Term::Int(2)])
        );
        assert_eq!(c[0].args[3], Term::str("a\"b"));
    }

    #[test]
    fn reports_line_numbers() {
        let err = parse_clauses("param(k, 1).\nforbid(\"x\"\n").unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_clauses("a(1). b(2).").unwrap_err();
        assert_eq!(err.line, 1);
    }

    #[test]
    fn display_reparses() {
        let clause = Clause::new(
            "fix",
            vec![Term::str("doc \"1\""), Term::Int(-17), Term::atom("none")],
        );
        let text = clause.to_string();
        assert_eq!(text, "fix(\"doc \\\"1\\\"\", -17, none).");
        let back = parse_clauses(&text).unwrap();
        assert_eq!(back[0].args, clause.args);
    }
}
