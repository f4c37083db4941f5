//! Streaming N-Triples reader.
//!
//! Lines are handed to a callback one triple at a time, so the whole document
//! never has to be held in memory. Each line is `<s> <p> <o> .` where the
//! subject is an IRI or blank node and the object an IRI, blank node, or
//! literal with optional `@lang` or `^^<datatype>`.

use std::borrow::Cow;
use std::fs::File;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use flate2::read::GzDecoder;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Object<'a> {
    Iri(Cow<'a, str>),
    Literal {
        lexical: Cow<'a, str>,
        datatype: Option<Cow<'a, str>>,
        language: Option<Cow<'a, str>>,
    },
}

impl Object<'_> {
    /// IRI or lexical form.
    pub fn text(&self) -> &str {
        match self {
            Object::Iri(s) => s,
            Object::Literal { lexical, .. } => lexical,
        }
    }

    pub fn into_owned(self) -> Object<'static> {
        match self {
            Object::Iri(s) => Object::Iri(Cow::Owned(s.into_owned())),
            Object::Literal { lexical, datatype, language } => Object::Literal {
                lexical: Cow::Owned(lexical.into_owned()),
                datatype: datatype.map(|d| Cow::Owned(d.into_owned())),
                language: language.map(|l| Cow::Owned(l.into_owned())),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple<'a> {
    pub subject: Cow<'a, str>,
    pub predicate: Cow<'a, str>,
    pub object: Object<'a>,
}

impl<'a> Triple<'a> {
    pub fn iri(subject: &'a str, predicate: &'a str, object: &'a str) -> Self {
        Triple {
            subject: Cow::Borrowed(subject),
            predicate: Cow::Borrowed(predicate),
            object: Object::Iri(Cow::Borrowed(object)),
        }
    }

    pub fn literal(subject: &'a str, predicate: &'a str, lexical: &'a str) -> Self {
        Triple {
            subject: Cow::Borrowed(subject),
            predicate: Cow::Borrowed(predicate),
            object: Object::Literal {
                lexical: Cow::Borrowed(lexical),
                datatype: None,
                language: None,
            },
        }
    }

    pub fn into_owned(self) -> Triple<'static> {
        Triple {
            subject: Cow::Owned(self.subject.into_owned()),
            predicate: Cow::Owned(self.predicate.into_owned()),
            object: self.object.into_owned(),
        }
    }

    /// N-Triples line for this triple, without a trailing newline.
    pub fn to_line(&self) -> String {
        let node = |s: &str| if s.starts_with("_:") { s.to_string() } else { format!("<{s}>") };
        let object = match &self.object {
            Object::Iri(s) => node(s),
            Object::Literal { lexical, datatype, language } => {
                let mut out = String::from("\"");
                for c in lexical.chars() {
                    match c {
                        '"' => out.push_str("\\\""),
                        '\\' => out.push_str("\\\\"),
                        '\n' => out.push_str("\\n"),
                        '\r' => out.push_str("\\r"),
                        c => out.push(c),
                    }
                }
                out.push('"');
                if let Some(l) = language {
                    out.push('@');
                    out.push_str(l);
                } else if let Some(d) = datatype {
                    out.push_str("^^<");
                    out.push_str(d);
                    out.push('>');
                }
                out
            }
        };
        format!("{} <{}> {} .", node(&self.subject), self.predicate, object)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct MalformedTriple {
    pub line: usize,
    pub message: String,
}

/// Parses one line. `Ok(None)` for blank and comment lines.
pub fn parse_line(line: &str, line_no: usize) -> Result<Option<Triple<'_>>, MalformedTriple> {
    let mut p = LineParser { s: line, pos: 0, line: line_no };
    p.skip_ws();
    if p.at_end() || p.peek() == Some(b'#') {
        return Ok(None);
    }
    let subject = p.node()?;
    p.skip_ws();
    if p.peek() != Some(b'<') {
        return Err(p.err("predicate must be an IRI"));
    }
    let predicate = p.iri()?;
    p.skip_ws();
    let object = match p.peek() {
        Some(b'"') => p.literal()?,
        Some(b'<') | Some(b'_') => Object::Iri(p.node()?),
        _ => return Err(p.err("expected object")),
    };
    p.skip_ws();
    if p.peek() != Some(b'.') {
        return Err(p.err("expected `.`"));
    }
    p.pos += 1;
    p.skip_ws();
    if !p.at_end() && p.peek() != Some(b'#') {
        return Err(p.err("trailing characters after `.`"));
    }
    if subject.is_empty() || predicate.is_empty() {
        return Err(p.err("empty subject or predicate"));
    }
    Ok(Some(Triple { subject, predicate, object }))
}

struct LineParser<'a> {
    s: &'a str,
    pos: usize,
    line: usize,
}

impl<'a> LineParser<'a> {
    fn err(&self, msg: &str) -> MalformedTriple {
        MalformedTriple {
            line: self.line,
            message: format!("{msg} at column {}", self.pos + 1),
        }
    }

    fn peek(&self) -> Option<u8> {
        self.s.as_bytes().get(self.pos).copied()
    }

    fn at_end(&self) -> bool {
        self.pos >= self.s.len()
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(b' ' | b'\t' | b'\r' | b'\n')) {
            self.pos += 1;
        }
    }

    fn node(&mut self) -> Result<Cow<'a, str>, MalformedTriple> {
        match self.peek() {
            Some(b'<') => self.iri(),
            Some(b'_') if self.s[self.pos..].starts_with("_:") => {
                let start = self.pos;
                let len = self.s[start..].find([' ', '\t', '.']).unwrap_or(self.s.len() - start);
                // A label may contain dots but not end with one.
                let mut end = start + len;
                while end < self.s.len() && self.s.as_bytes()[end] == b'.' && self.s[end + 1..].starts_with(|c: char| c.is_alphanumeric() || c == '_' || c == '-') {
                    end += 1 + self.s[end + 1..].find([' ', '\t', '.']).unwrap_or(self.s.len() - end - 1);
                }
                if end - start <= 2 {
                    return Err(self.err("empty blank node label"));
                }
                self.pos = end;
                Ok(Cow::Borrowed(&self.s[start..end]))
            }
            _ => Err(self.err("expected IRI or blank node")),
        }
    }

    fn iri(&mut self) -> Result<Cow<'a, str>, MalformedTriple> {
        let start = self.pos + 1;
        let Some(len) = self.s[start..].find('>') else {
            return Err(self.err("unterminated IRI"));
        };
        let raw = &self.s[start..start + len];
        if raw.contains([' ', '<', '"']) {
            return Err(self.err("invalid character in IRI"));
        }
        self.pos = start + len + 1;
        if raw.contains('\\') {
            unescape(raw).map(Cow::Owned).ok_or_else(|| self.err("bad escape in IRI"))
        } else {
            Ok(Cow::Borrowed(raw))
        }
    }

    fn literal(&mut self) -> Result<Object<'a>, MalformedTriple> {
        let start = self.pos + 1;
        let bytes = self.s.as_bytes();
        let mut i = start;
        let mut escaped = false;
        loop {
            match bytes.get(i) {
                None => return Err(self.err("unterminated literal")),
                Some(b'\\') => {
                    escaped = true;
                    i += 2;
                }
                Some(b'"') => break,
                Some(_) => i += 1,
            }
        }
        let raw = &self.s[start..i];
        let lexical = if escaped {
            Cow::Owned(unescape(raw).ok_or_else(|| self.err("bad escape in literal"))?)
        } else {
            Cow::Borrowed(raw)
        };
        self.pos = i + 1;
        let mut datatype = None;
        let mut language = None;
        if self.peek() == Some(b'@') {
            let ls = self.pos + 1;
            let len = self.s[ls..]
                .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-'))
                .unwrap_or(self.s.len() - ls);
            if len == 0 {
                return Err(self.err("empty language tag"));
            }
            language = Some(Cow::Borrowed(&self.s[ls..ls + len]));
            self.pos = ls + len;
        } else if self.s[self.pos..].starts_with("^^") {
            self.pos += 2;
            if self.peek() != Some(b'<') {
                return Err(self.err("datatype must be an IRI"));
            }
            datatype = Some(self.iri()?);
        }
        Ok(Object::Literal { lexical, datatype, language })
    }
}

fn unescape(raw: &str) -> Option<String> {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next()? {
            't' => out.push('\t'),
            'b' => out.push('\u{8}'),
            'n' => out.push('\n'),
            'r' => out.push('\r'),
            'f' => out.push('\u{c}'),
            '"' => out.push('"'),
            '\'' => out.push('\''),
            '\\' => out.push('\\'),
            'u' => out.push(hex_char(&mut chars, 4)?),
            'U' => out.push(hex_char(&mut chars, 8)?),
            _ => return None,
        }
    }
    Some(out)
}

fn hex_char(chars: &mut std::str::Chars<'_>, n: usize) -> Option<char> {
    let hex: String = chars.by_ref().take(n).collect();
    if hex.len() != n {
        return None;
    }
    char::from_u32(u32::from_str_radix(&hex, 16).ok()?)
}

/// Counts from one pass over a triple stream.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StreamStats {
    pub lines: usize,
    pub triples: usize,
    pub malformed: usize,
}

/// Reads `reader` line by line and hands each parsed triple, or the parse
/// error for a malformed line, to `on_triple`. Malformed lines do not stop
/// the stream.
pub fn read_ntriples<R, F>(mut reader: R, mut on_triple: F) -> io::Result<StreamStats>
where
    R: BufRead,
    F: FnMut(Result<Triple<'_>, MalformedTriple>),
{
    let mut stats = StreamStats::default();
    let mut buf = String::new();
    loop {
        buf.clear();
        if reader.read_line(&mut buf)? == 0 {
            break;
        }
        stats.lines += 1;
        match parse_line(&buf, stats.lines) {
            Ok(None) => {}
            Ok(Some(t)) => {
                stats.triples += 1;
                on_triple(Ok(t));
            }
            Err(e) => {
                stats.malformed += 1;
                on_triple(Err(e));
            }
        }
    }
    Ok(stats)
}

/// Opens a triple file, transparently decompressing `.gz`.
pub fn open_source(path: &Path) -> io::Result<Box<dyn BufRead>> {
    let file = File::open(path)?;
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(BufReader::with_capacity(1 << 16, GzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::with_capacity(1 << 16, file)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_iris_literals_and_blank_nodes() {
        let t = parse_line("<http://a/s> <http://a/p> <http://a/o> .", 1).unwrap().unwrap();
        assert_eq!(t, Triple::iri("http://a/s", "http://a/p", "http://a/o"));

        let t = parse_line("_:b1 <http://a/p> \"Gleim, J. W. L.\"@de . # note", 2).unwrap().unwrap();
        assert_eq!(t.subject, "_:b1");
        assert_eq!(
            t.object,
            Object::Literal { lexical: "Gleim, J. W. L.".into(), datatype: None, language: Some("de".into()) }
        );

        let t = parse_line(
            "<s:x> <p:y> \"1719-04-02\"^^<http://www.w3.org/2001/XMLSchema#date> .",
            3,
        )
        .unwrap()
        .unwrap();
        assert_eq!(t.object.text(), "1719-04-02");

        let t = parse_line("<s> <p> \"Z\\u00FCrich \\\"alt\\\"\" .", 4).unwrap().unwrap();
        assert_eq!(t.object.text(), "Zürich \"alt\"");
    }

    #[test]
    fn blank_and_comment_lines() {
        assert_eq!(parse_line("   ", 1), Ok(None));
        assert_eq!(parse_line("# header", 1), Ok(None));
    }

    #[test]
    fn malformed_lines_carry_line_numbers() {
        for bad in ["<s> <p> <o>", "<s> \"p\" <o> .", "<s> <p> \"open .", "<s <p> <o> .", "<s> <p> <o> . x"] {
            let err = parse_line(bad, 7).unwrap_err();
            assert_eq!(err.line, 7, "{bad}");
        }
    }

    #[test]
    fn stream_skips_and_counts_malformed() {
        let src = "<a> <p> \"1\" .\nbroken\n\n<b> <p> \"2\" .\n";
        let mut seen = Vec::new();
        let mut errors = Vec::new();
        let stats = read_ntriples(src.as_bytes(), |r| match r {
            Ok(t) => seen.push(t.subject.into_owned()),
            Err(e) => errors.push(e.line),
        })
        .unwrap();
        assert_eq!(seen, vec!["a", "b"]);
        assert_eq!(errors, vec![2]);
        assert_eq!(stats, StreamStats { lines: 4, triples: 2, malformed: 1 });
    }

    #[test]
    fn to_line_reparses() {
        let t = Triple {
            subject: "_:x".into(),
            predicate: "http://p".into(),
            object: Object::Literal { lexical: "a \"b\"\n".into(), datatype: None, language: Some("de".into()) },
        };
        let line = t.to_line();
        assert_eq!(parse_line(&line, 1).unwrap().unwrap(), t);
    }
}
