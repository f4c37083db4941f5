//! LaTeX tokenizer producing a flat, losslessly renderable item list.

mod item;
mod parser;
mod plain;
mod registry;

pub use item::{find_commands, render, Item, ItemKind, Span};
pub use parser::{parse, LatexError};
pub use plain::{project, to_plain_text, OffsetMap, PlainToken, Projection, TokenKind};
pub use registry::{CommandRegistry, RegistryError, Signature, DEFAULT_PUNCTUATION};
