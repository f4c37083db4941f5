use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Range;

/// Half-open byte interval into a source document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemKind {
    Word,
    Punctuation,
    Whitespace,
    Comment,
    Command,
    BeginEnv,
    EndEnv,
    Opaque,
    /// A bare `{` or `}` that is not part of a registered command's argument.
    Brace,
}

impl ItemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ItemKind::Word => "word",
            ItemKind::Punctuation => "punctuation",
            ItemKind::Whitespace => "whitespace",
            ItemKind::Comment => "comment",
            ItemKind::Command => "command",
            ItemKind::BeginEnv => "begin_env",
            ItemKind::EndEnv => "end_env",
            ItemKind::Opaque => "opaque",
            ItemKind::Brace => "brace",
        }
    }
}

/// One parsed token of LaTeX source.
///
/// `text` is always the exact source slice covered by `span`. For a command
/// with parsed arguments this includes the optional and required arguments,
/// so rendering never needs to reassemble a command from its parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub kind: ItemKind,
    pub text: String,
    pub span: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub args: Vec<Vec<Item>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub opts: Vec<String>,
}

impl Item {
    pub(crate) fn leaf(kind: ItemKind, src: &str, start: usize, end: usize) -> Self {
        Item {
            kind,
            text: src[start..end].to_string(),
            span: Span::new(start, end),
            name: None,
            args: Vec::new(),
            opts: Vec::new(),
        }
    }

    pub(crate) fn named(kind: ItemKind, src: &str, start: usize, end: usize, name: &str) -> Self {
        Item {
            name: Some(name.to_string()),
            ..Item::leaf(kind, src, start, end)
        }
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn is_word(&self) -> bool {
        self.kind == ItemKind::Word
    }

    /// Source text of required argument `i`, without its braces.
    pub fn arg_text(&self, i: usize) -> Option<String> {
        self.args.get(i).map(|a| render(a))
    }
}

/// Depth-first search for commands named `name`, including inside
/// arguments.
pub fn find_commands<'a>(items: &'a [Item], name: &str) -> Vec<&'a Item> {
    fn walk<'a>(items: &'a [Item], name: &str, out: &mut Vec<&'a Item>) {
        for item in items {
            if item.kind == ItemKind::Command && item.name() == Some(name) {
                out.push(item);
            }
            for arg in &item.args {
                walk(arg, name, out);
            }
        }
    }
    let mut out = Vec::new();
    walk(items, name, &mut out);
    out
}

/// Concatenates the source slices of `items`.
///
/// `render(&parse(s)?) == s` for every `s` the parser accepts.
pub fn render(items: &[Item]) -> String {
    let mut out = String::with_capacity(items.iter().map(|i| i.text.len()).sum());
    for item in items {
        out.push_str(&item.text);
    }
    out
}
