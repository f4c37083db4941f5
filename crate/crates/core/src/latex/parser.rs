use thiserror::Error;

use super::item::{Item, ItemKind, Span};
use super::registry::{CommandRegistry, Signature};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LatexError {
    #[error("unbalanced braces at byte {0}")]
    UnbalancedBraces(usize),
    #[error("environment `{0}` opened at byte {1} is never closed")]
    UnterminatedEnvironment(String, usize),
    #[error("`\\end{{{0}}}` at byte {1} has no matching `\\begin`")]
    UnmatchedEnd(String, usize),
}

impl LatexError {
    pub fn position(&self) -> usize {
        match self {
            LatexError::UnbalancedBraces(p) => *p,
            LatexError::UnterminatedEnvironment(_, p) | LatexError::UnmatchedEnd(_, p) => *p,
        }
    }
}

/// Tokenizes `source` into a flat list of items.
///
/// Everything before `\begin{document}` becomes one opaque item, as do the
/// bodies of opaque environments, math, and `\verb`. Registered commands
/// consume their arguments; unregistered commands are name-only and any
/// following brace group is parsed as ordinary items.
pub fn parse(source: &str, registry: &CommandRegistry) -> Result<Vec<Item>, LatexError> {
    let mut items = Vec::new();
    let start = match find_document_begin(source) {
        Some(b) if b > 0 => {
            items.push(Item::leaf(ItemKind::Opaque, source, 0, b));
            b
        }
        _ => 0,
    };
    let mut parser = Parser {
        src: source,
        pos: start,
        reg: registry,
    };
    items.extend(parser.sequence(None)?);
    Ok(items)
}

/// Byte offset of the first `\begin{document}` outside a comment.
fn find_document_begin(src: &str) -> Option<usize> {
    const TAG: &str = "\\begin{document}";
    let bytes = src.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'%' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'\\' => {
                if src[i..].starts_with(TAG) {
                    return Some(i);
                }
                i += if bytes.get(i + 1).is_some_and(u8::is_ascii) { 2 } else { 1 };
            }
            _ => i += 1,
        }
    }
    None
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    reg: &'a CommandRegistry,
}

fn is_space(c: char) -> bool {
    c.is_whitespace() || c == '~'
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn rest(&self) -> &'a str {
        &self.src[self.pos..]
    }

    fn is_word_char(&self, c: char) -> bool {
        !(is_space(c) || matches!(c, '\\' | '{' | '}' | '%' | '[' | ']' | '$') || self.reg.is_punctuation(c))
    }

    /// Parses items until end of input, or, when `arg_open` is set, until the
    /// `}` that closes the argument opened at that offset. The closing brace
    /// is left for the caller.
    fn sequence(&mut self, arg_open: Option<usize>) -> Result<Vec<Item>, LatexError> {
        let mut items = Vec::new();
        let mut envs: Vec<(String, usize)> = Vec::new();
        let mut depth = 0usize;
        loop {
            let Some(c) = self.peek() else {
                if let Some(open) = arg_open {
                    return Err(LatexError::UnbalancedBraces(open));
                }
                break;
            };
            let start = self.pos;
            match c {
                '}' if arg_open.is_some() && depth == 0 => break,
                '{' | '}' => {
                    if c == '{' {
                        depth += 1;
                    } else {
                        depth = depth.saturating_sub(1);
                    }
                    self.pos += 1;
                    items.push(Item::leaf(ItemKind::Brace, self.src, start, self.pos));
                }
                '%' => {
                    self.pos += self.rest().find('\n').unwrap_or(self.rest().len());
                    items.push(Item::leaf(ItemKind::Comment, self.src, start, self.pos));
                }
                '\\' => self.control(&mut items, &mut envs)?,
                '$' => {
                    self.pos = self.math_end();
                    items.push(Item::leaf(ItemKind::Opaque, self.src, start, self.pos));
                }
                '[' | ']' => {
                    self.pos += 1;
                    items.push(Item::leaf(ItemKind::Punctuation, self.src, start, self.pos));
                }
                c if is_space(c) => {
                    let len = self.rest().find(|c: char| !is_space(c)).unwrap_or(self.rest().len());
                    self.pos += len;
                    items.push(Item::leaf(ItemKind::Whitespace, self.src, start, self.pos));
                }
                c if self.reg.is_punctuation(c) => {
                    self.pos += c.len_utf8();
                    items.push(Item::leaf(ItemKind::Punctuation, self.src, start, self.pos));
                }
                _ => {
                    let len = self
                        .rest()
                        .find(|c: char| !self.is_word_char(c))
                        .unwrap_or(self.rest().len());
                    self.pos += len;
                    items.push(Item::leaf(ItemKind::Word, self.src, start, self.pos));
                }
            }
        }
        if let Some((name, pos)) = envs.pop() {
            return Err(LatexError::UnterminatedEnvironment(name, pos));
        }
        Ok(items)
    }

    /// End offset of the math starting at `self.pos` (`$...$` or `$$...$$`).
    /// An unmatched `$` stands alone.
    fn math_end(&self) -> usize {
        let display = self.rest().starts_with("$$");
        let open_len = if display { 2 } else { 1 };
        let body_start = self.pos + open_len;
        let bytes = self.src.as_bytes();
        let mut i = body_start;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 2,
                b'$' if !display => return i + 1,
                b'$' if bytes.get(i + 1) == Some(&b'$') => return i + 2,
                _ => i += 1,
            }
        }
        self.pos + 1
    }

    /// Offset just past the `\<close>` that ends a `\[`/`\(` math region.
    fn find_control_close(&self, from: usize, close: u8) -> Option<usize> {
        let bytes = self.src.as_bytes();
        let mut i = from;
        while i + 1 < bytes.len() {
            if bytes[i] == b'\\' {
                if bytes[i + 1] == close {
                    return Some(i + 2);
                }
                i += 2;
            } else {
                i += 1;
            }
        }
        None
    }

    fn control(&mut self, items: &mut Vec<Item>, envs: &mut Vec<(String, usize)>) -> Result<(), LatexError> {
        let start = self.pos;
        self.pos += 1;
        let Some(c) = self.peek() else {
            items.push(Item::named(ItemKind::Command, self.src, start, self.pos, ""));
            return Ok(());
        };
        if !c.is_ascii_alphabetic() {
            if c == '[' || c == '(' {
                let close = if c == '[' { b']' } else { b')' };
                if let Some(end) = self.find_control_close(self.pos + 1, close) {
                    self.pos = end;
                    items.push(Item::leaf(ItemKind::Opaque, self.src, start, end));
                    return Ok(());
                }
            }
            self.pos += c.len_utf8();
            let name = c.to_string();
            items.push(Item::named(ItemKind::Command, self.src, start, self.pos, &name));
            return Ok(());
        }
        let name_len = self
            .rest()
            .find(|c: char| !c.is_ascii_alphabetic())
            .unwrap_or(self.rest().len());
        let mut name = &self.src[self.pos..self.pos + name_len];
        self.pos += name_len;
        if self.peek() == Some('*') {
            // A starred variant registered on its own keeps its name; otherwise
            // it takes the plain command's signature.
            let starred = &self.src[self.pos - name_len..self.pos + 1];
            if self.reg.command(starred).is_some() {
                name = starred;
                self.pos += 1;
            } else if self.reg.command(name).is_some() || name == "verb" {
                self.pos += 1;
            }
        }
        match name {
            "begin" => return self.begin_env(start, items, envs),
            "end" => return self.end_env(start, items, envs),
            "verb" => {
                if let Some(end) = self.verb_end() {
                    self.pos = end;
                    items.push(Item::leaf(ItemKind::Opaque, self.src, start, end));
                    return Ok(());
                }
            }
            _ => {}
        }
        match self.reg.command(name).copied() {
            Some(sig) => {
                let item = self.command_args(start, name, sig)?;
                items.push(item);
            }
            None => items.push(Item::named(ItemKind::Command, self.src, start, self.pos, name)),
        }
        Ok(())
    }

    fn verb_end(&self) -> Option<usize> {
        let mut chars = self.rest().char_indices();
        let (_, delim) = chars.next()?;
        if delim.is_alphabetic() || delim.is_whitespace() {
            return None;
        }
        for (i, c) in chars {
            if c == '\n' {
                return None;
            }
            if c == delim {
                return Some(self.pos + i + c.len_utf8());
            }
        }
        None
    }

    fn command_args(&mut self, start: usize, name: &str, sig: Signature) -> Result<Item, LatexError> {
        let mut item = Item::named(ItemKind::Command, self.src, start, self.pos, name);
        for _ in 0..sig.optional_args {
            if self.peek() != Some('[') {
                break;
            }
            match self.bracket_end(self.pos) {
                Some(end) => {
                    item.opts.push(self.src[self.pos + 1..end - 1].to_string());
                    self.pos = end;
                }
                None => break,
            }
        }
        for _ in 0..sig.required_arity {
            self.skip_arg_space();
            if self.peek() != Some('{') {
                return Err(LatexError::UnbalancedBraces(self.pos));
            }
            let open = self.pos;
            self.pos += 1;
            let arg = if sig.parse_args {
                self.sequence(Some(open))?
            } else {
                let close = self.raw_group_close(open).ok_or(LatexError::UnbalancedBraces(open))?;
                let body_start = self.pos;
                self.pos = close;
                if close > body_start {
                    vec![Item::leaf(ItemKind::Opaque, self.src, body_start, close)]
                } else {
                    Vec::new()
                }
            };
            debug_assert_eq!(self.peek(), Some('}'));
            self.pos += 1;
            item.args.push(arg);
        }
        item.text = self.src[start..self.pos].to_string();
        item.span = Span::new(start, self.pos);
        Ok(item)
    }

    // Spaces, tabs and at most one newline may separate a command from its argument.
    fn skip_arg_space(&mut self) {
        let mut newlines = 0;
        while let Some(c) = self.peek() {
            match c {
                ' ' | '\t' => self.pos += 1,
                '\n' if newlines == 0 => {
                    newlines += 1;
                    self.pos += 1;
                }
                _ => break,
            }
        }
    }

    /// End (exclusive) of a `[...]` group starting at `open`, honoring nested braces.
    fn bracket_end(&self, open: usize) -> Option<usize> {
        let bytes = self.src.as_bytes();
        let mut depth = 0usize;
        let mut i = open + 1;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 1,
                b'{' => depth += 1,
                b'}' if depth == 0 => return None,
                b'}' => depth -= 1,
                b']' if depth == 0 => return Some(i + 1),
                b'\n' if bytes.get(i + 1) == Some(&b'\n') => return None,
                _ => {}
            }
            i += 1;
        }
        None
    }

    /// Offset of the `}` matching the `{` at `open`, without interpreting contents.
    fn raw_group_close(&self, open: usize) -> Option<usize> {
        let bytes = self.src.as_bytes();
        let mut depth = 0usize;
        let mut i = open + 1;
        while i < bytes.len() {
            match bytes[i] {
                b'\\' => i += 1,
                b'{' => depth += 1,
                b'}' if depth == 0 => return Some(i),
                b'}' => depth -= 1,
                _ => {}
            }
            i += 1;
        }
        None
    }

    /// Reads `{name}` directly after `\begin`/`\end`. Returns the name and the
    /// offset just past the closing brace.
    fn env_name(&self) -> Option<(&'a str, usize)> {
        let rest = self.rest();
        let inner = rest.strip_prefix('{')?;
        let close = inner.find(['}', '{', '\\', '%', '\n'])?;
        if !inner[close..].starts_with('}') || close == 0 {
            return None;
        }
        Some((&inner[..close], self.pos + 1 + close + 1))
    }

    fn begin_env(&mut self, start: usize, items: &mut Vec<Item>, envs: &mut Vec<(String, usize)>) -> Result<(), LatexError> {
        let Some((name, end)) = self.env_name() else {
            items.push(Item::named(ItemKind::Command, self.src, start, self.pos, "begin"));
            return Ok(());
        };
        self.pos = end;
        items.push(Item::named(ItemKind::BeginEnv, self.src, start, end, name));
        if self.reg.environment(name).is_some_and(|s| s.opaque_body) {
            let tag = format!("\\end{{{name}}}");
            let Some(off) = self.rest().find(&tag) else {
                return Err(LatexError::UnterminatedEnvironment(name.to_string(), start));
            };
            let body_end = self.pos + off;
            if body_end > self.pos {
                items.push(Item::leaf(ItemKind::Opaque, self.src, self.pos, body_end));
            }
            self.pos = body_end + tag.len();
            items.push(Item::named(ItemKind::EndEnv, self.src, body_end, self.pos, name));
        } else {
            envs.push((name.to_string(), start));
        }
        Ok(())
    }

    fn end_env(&mut self, start: usize, items: &mut Vec<Item>, envs: &mut Vec<(String, usize)>) -> Result<(), LatexError> {
        let Some((name, end)) = self.env_name() else {
            items.push(Item::named(ItemKind::Command, self.src, start, self.pos, "end"));
            return Ok(());
        };
        match envs.last() {
            Some((open, _)) if open == name => {
                envs.pop();
            }
            Some((open, pos)) => return Err(LatexError::UnterminatedEnvironment(open.clone(), *pos)),
            None => return Err(LatexError::UnmatchedEnd(name.to_string(), start)),
        }
        self.pos = end;
        items.push(Item::named(ItemKind::EndEnv, self.src, start, end, name));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latex::render;

    fn kinds(items: &[Item]) -> Vec<(ItemKind, &str)> {
        items.iter().map(|i| (i.kind, i.text.as_str())).collect()
    }

    #[test]
    fn words_whitespace_punctuation() {
        let items = parse("Hello world.", &CommandRegistry::empty()).unwrap();
        assert_eq!(
            kinds(&items),
            vec![
                (ItemKind::Word, "Hello"),
                (ItemKind::Whitespace, " "),
                (ItemKind::Word, "world"),
                (ItemKind::Punctuation, "."),
            ]
        );
    }

    #[test]
    fn registered_command_takes_argument() {
        let mut reg = CommandRegistry::empty();
        reg.register_command("emph", Signature::command(1));
        let items = parse("\\emph{Berlin}", &reg).unwrap();
        assert_eq!(items.len(), 1);
        assert_eq!(items[0].kind, ItemKind::Command);
        assert_eq!(items[0].name(), Some("emph"));
        assert_eq!(kinds(&items[0].args[0]), vec![(ItemKind::Word, "Berlin")]);
        assert_eq!(items[0].args[0][0].span, Span::new(6, 12));
    }

    #[test]
    fn environments_are_markers() {
        let items = parse("\\begin{quote}x\\end{quote}", &CommandRegistry::empty()).unwrap();
        assert_eq!(
            kinds(&items),
            vec![
                (ItemKind::BeginEnv, "\\begin{quote}"),
                (ItemKind::Word, "x"),
                (ItemKind::EndEnv, "\\end{quote}"),
            ]
        );
        assert_eq!(items[0].name(), Some("quote"));
    }

    #[test]
    fn single_letter_argument_without_braces_is_rejected() {
        let mut reg = CommandRegistry::empty();
        reg.register_command("x", Signature::command(1));
        assert_eq!(parse("\\x y", &reg), Err(LatexError::UnbalancedBraces(3)));
    }

    #[test]
    fn unclosed_argument_reports_opening_brace() {
        let mut reg = CommandRegistry::empty();
        reg.register_command("emph", Signature::command(1));
        assert_eq!(parse("ab \\emph{Berlin", &reg), Err(LatexError::UnbalancedBraces(8)));
    }

    #[test]
    fn unterminated_and_mismatched_environments() {
        let reg = CommandRegistry::default();
        assert_eq!(
            parse("a \\begin{quote} b", &reg),
            Err(LatexError::UnterminatedEnvironment("quote".into(), 2))
        );
        assert_eq!(
            parse("\\begin{a}\\begin{b}\\end{a}", &reg),
            Err(LatexError::UnterminatedEnvironment("b".into(), 9))
        );
        assert_eq!(parse("x\\end{a}", &reg), Err(LatexError::UnmatchedEnd("a".into(), 1)));
        assert_eq!(
            parse("\\begin{verbatim} }{ ", &reg),
            Err(LatexError::UnterminatedEnvironment("verbatim".into(), 0))
        );
    }

    #[test]
    fn preamble_and_verbatim_are_opaque() {
        let src = "\\documentclass{article}\n% \\begin{document} in comment\n\\begin{document}\n\\begin{verbatim}\n{ \\x %\n\\end{verbatim}\n\\end{document}\n";
        let items = parse(src, &CommandRegistry::default()).unwrap();
        assert_eq!(items[0].kind, ItemKind::Opaque);
        assert!(items[0].text.ends_with("in comment\n"));
        assert_eq!(items[1].kind, ItemKind::BeginEnv);
        let verb = items.iter().position(|i| i.name() == Some("verbatim")).unwrap();
        assert_eq!(items[verb + 1].kind, ItemKind::Opaque);
        assert_eq!(items[verb + 1].text, "\n{ \\x %\n");
        assert_eq!(render(&items), src);
    }

    #[test]
    fn math_and_control_symbols() {
        let src = "Preis $a\\$b$ und \\[x]\\] sowie 50\\% \\\\ $$y$$ \\(z\\) $ allein";
        let items = parse(src, &CommandRegistry::empty()).unwrap();
        let opaque: Vec<_> = items.iter().filter(|i| i.kind == ItemKind::Opaque).map(|i| i.text.as_str()).collect();
        assert_eq!(opaque, vec!["$a\\$b$", "\\[x]\\]", "$$y$$", "\\(z\\)", "$"]);
        let cmds: Vec<_> = items.iter().filter_map(|i| i.name()).collect();
        assert_eq!(cmds, vec!["%", "\\"]);
        assert_eq!(render(&items), src);
    }

    #[test]
    fn comments_hide_braces_in_arguments() {
        let reg = CommandRegistry::default();
        let src = "\\emph{a % }\n b}";
        let items = parse(src, &reg).unwrap();
        assert_eq!(items.len(), 1);
        assert!(items[0].args[0].iter().any(|i| i.kind == ItemKind::Comment));
    }

    #[test]
    fn optional_and_raw_arguments() {
        let reg = CommandRegistry::default();
        let items = parse("\\kbperson[gnd:118540238]{Gleim} \\url{a%b}", &reg).unwrap();
        assert_eq!(items[0].opts, vec!["gnd:118540238".to_string()]);
        assert_eq!(items[0].args[0][0].text, "Gleim");
        assert_eq!(items[2].args[0][0].kind, ItemKind::Opaque);
        assert_eq!(items[2].args[0][0].text, "a%b");
    }

    #[test]
    fn unregistered_command_leaves_group_as_items() {
        let items = parse("\\foo{bar}", &CommandRegistry::empty()).unwrap();
        assert_eq!(
            kinds(&items),
            vec![
                (ItemKind::Command, "\\foo"),
                (ItemKind::Brace, "{"),
                (ItemKind::Word, "bar"),
                (ItemKind::Brace, "}"),
            ]
        );
    }

    #[test]
    fn nested_groups_inside_arguments() {
        let reg = CommandRegistry::default();
        let src = "\\emph{a {b} c} d";
        let items = parse(src, &reg).unwrap();
        assert_eq!(items[0].text, "\\emph{a {b} c}");
        assert_eq!(render(&items), src);
    }

    #[test]
    fn verb_is_opaque() {
        let items = parse("\\verb|}{| x", &CommandRegistry::empty()).unwrap();
        assert_eq!(items[0].kind, ItemKind::Opaque);
        assert_eq!(items[0].text, "\\verb|}{|");
    }

    #[test]
    fn tilde_is_whitespace_and_unicode_punctuation() {
        let items = parse("S.~Gleim…«Ja»", &CommandRegistry::empty()).unwrap();
        assert_eq!(
            kinds(&items),
            vec![
                (ItemKind::Word, "S"),
                (ItemKind::Punctuation, "."),
                (ItemKind::Whitespace, "~"),
                (ItemKind::Word, "Gleim"),
                (ItemKind::Punctuation, "…"),
                (ItemKind::Punctuation, "«"),
                (ItemKind::Word, "Ja"),
                (ItemKind::Punctuation, "»"),
            ]
        );
    }

    #[test]
    fn empty_input() {
        assert!(parse("", &CommandRegistry::default()).unwrap().is_empty());
        assert_eq!(render(&[]), "");
    }
}
