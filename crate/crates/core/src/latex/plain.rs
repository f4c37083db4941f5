use serde::{Deserialize, Serialize};

use super::item::{Item, ItemKind, Span};
use super::registry::CommandRegistry;

/// Maps plain-text offsets back to source byte offsets.
///
/// Holds one pair per emitted word or punctuation token. Both coordinates
/// strictly increase.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OffsetMap {
    pairs: Vec<(usize, usize)>,
}

impl OffsetMap {
    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Source offset for a plain-text offset that lies inside a copied token.
    pub fn to_source(&self, plain: usize) -> Option<usize> {
        let idx = self.pairs.partition_point(|&(p, _)| p <= plain).checked_sub(1)?;
        let (p, s) = self.pairs[idx];
        Some(s + (plain - p))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenKind {
    Word,
    Punctuation,
}

/// A word or punctuation item as it appears in the plain-text projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlainToken {
    pub kind: TokenKind,
    pub text: String,
    pub plain_start: usize,
    pub span: Span,
    /// Index among word tokens only.
    pub word_index: Option<usize>,
    /// Identifies the item sequence the token came from; tokens with the same
    /// group are siblings in the item tree.
    pub group: usize,
}

#[derive(Debug, Clone, Default)]
pub struct Projection {
    pub text: String,
    pub offsets: OffsetMap,
    pub tokens: Vec<PlainToken>,
}

impl Projection {
    pub fn words(&self) -> impl Iterator<Item = &PlainToken> {
        self.tokens.iter().filter(|t| t.kind == TokenKind::Word)
    }

    pub fn word_count(&self) -> usize {
        self.words().count()
    }
}

/// Plain text of `items` plus the offset map.
///
/// Words and punctuation are copied, comments and opaque items dropped,
/// registered commands replaced by their first argument (or dropped when
/// they take none), and whitespace runs collapsed to one space.
pub fn to_plain_text(items: &[Item], registry: &CommandRegistry) -> (String, OffsetMap) {
    let p = project(items, registry);
    (p.text, p.offsets)
}

pub fn project(items: &[Item], registry: &CommandRegistry) -> Projection {
    let mut w = Walker {
        reg: registry,
        out: Projection::default(),
        pending_space: false,
        after_comment: false,
        groups: 0,
        words: 0,
    };
    w.walk(items, 0);
    w.out
}

struct Walker<'r> {
    reg: &'r CommandRegistry,
    out: Projection,
    pending_space: bool,
    after_comment: bool,
    groups: usize,
    words: usize,
}

impl Walker<'_> {
    fn walk(&mut self, items: &[Item], group: usize) {
        for item in items {
            let after_comment = std::mem::take(&mut self.after_comment);
            match item.kind {
                ItemKind::Word | ItemKind::Punctuation => self.emit(item, group),
                ItemKind::Whitespace => {
                    // A comment swallows its line end; only a blank line still separates.
                    if !after_comment || item.text.matches('\n').count() >= 2 {
                        self.pending_space = true;
                    }
                }
                ItemKind::Comment => self.after_comment = true,
                ItemKind::BeginEnv | ItemKind::EndEnv => self.pending_space = true,
                ItemKind::Command => {
                    let hoisted = item.name().and_then(|n| self.reg.command(n)).filter(|s| s.hoist && s.required_arity >= 1);
                    if hoisted.is_some() {
                        if let Some(arg) = item.args.first() {
                            self.groups += 1;
                            let g = self.groups;
                            self.walk(arg, g);
                        }
                    }
                }
                ItemKind::Opaque | ItemKind::Brace => {}
            }
        }
    }

    fn emit(&mut self, item: &Item, group: usize) {
        if std::mem::take(&mut self.pending_space) && !self.out.text.is_empty() {
            self.out.text.push(' ');
        }
        let plain_start = self.out.text.len();
        self.out.text.push_str(&item.text);
        self.out.offsets.pairs.push((plain_start, item.span.start));
        let (kind, word_index) = if item.kind == ItemKind::Word {
            self.words += 1;
            (TokenKind::Word, Some(self.words - 1))
        } else {
            (TokenKind::Punctuation, None)
        };
        self.out.tokens.push(PlainToken {
            kind,
            text: item.text.clone(),
            plain_start,
            span: item.span,
            word_index,
            group,
        });
    }
}
