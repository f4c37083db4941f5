use std::path::{Path, PathBuf};

use serde::Serialize;

use super::EditionError;
use crate::date::DateExpr;
use crate::latex::{find_commands, parse, project, CommandRegistry, Item, Projection};
use crate::nei::Document;

/// Letter metadata read from `\kbsender{id}`, `\kbrecipient{id}` and
/// `\kbdated{date}`.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct FragmentMeta {
    pub sender: Option<String>,
    pub recipient: Option<String>,
    /// Raw text of `\kbdated`, even when it does not parse.
    pub date_text: Option<String>,
    pub date: Option<DateExpr>,
    /// Byte offset of the `\kbdated` command, for reporting.
    pub date_offset: Option<usize>,
    pub source_file: Option<PathBuf>,
}

/// A reorderable unit of object text, typically one letter.
#[derive(Debug, Clone)]
pub struct Fragment {
    pub id: String,
    pub source: String,
    pub items: Vec<Item>,
    pub meta: FragmentMeta,
}

impl Fragment {
    pub fn parse(id: impl Into<String>, source: impl Into<String>, registry: &CommandRegistry) -> Result<Self, EditionError> {
        let id = id.into();
        let source = source.into();
        let items = parse(&source, registry).map_err(|e| EditionError::Latex { fragment: id.clone(), error: e })?;
        let first_arg = |name: &str| find_commands(&items, name).first().and_then(|c| c.arg_text(0)).map(|s| s.trim().to_string());
        let dated = find_commands(&items, "kbdated").first().map(|c| (c.span.start, c.arg_text(0).unwrap_or_default()));
        let meta = FragmentMeta {
            sender: first_arg("kbsender").filter(|s| !s.is_empty()),
            recipient: first_arg("kbrecipient").filter(|s| !s.is_empty()),
            date: dated.as_ref().and_then(|(_, t)| t.trim().parse().ok()),
            date_text: dated.as_ref().map(|(_, t)| t.trim().to_string()),
            date_offset: dated.map(|(o, _)| o),
            source_file: None,
        };
        Ok(Fragment { id, source, items, meta })
    }

    /// Reads a fragment; its id is the file stem.
    pub fn load(path: &Path, registry: &CommandRegistry) -> Result<Self, EditionError> {
        let source = std::fs::read_to_string(path).map_err(|e| EditionError::io(path, e))?;
        let id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let mut f = Fragment::parse(id, source, registry)?;
        f.meta.source_file = Some(path.to_path_buf());
        Ok(f)
    }

    /// Name used in reports: the source file when known, else the id.
    pub fn location_name(&self) -> String {
        self.meta.source_file.as_ref().map_or_else(|| self.id.clone(), |p| p.display().to_string())
    }

    pub fn projection(&self, registry: &CommandRegistry) -> Projection {
        project(&self.items, registry)
    }

    pub fn document(&self, registry: &CommandRegistry) -> Document {
        Document {
            id: self.id.clone(),
            creation_date: self.meta.date,
            projection: self.projection(registry),
        }
    }
}

/// Chronological order: dated fragments by date (a less precise date sorts
/// before a more precise one in the same period), undated ones last. Ties
/// keep their input order.
pub fn order_fragments(mut frags: Vec<Fragment>) -> Vec<Fragment> {
    frags.sort_by_key(|f| match f.meta.date {
        Some(d) => (0, d.sort_key()),
        None => (1, (0, 0, 0)),
    });
    frags
}

#[cfg(test)]
mod tests {
    use super::*;

    fn frag(id: &str, date: &str) -> Fragment {
        let src = if date.is_empty() { "Text".to_string() } else { format!("\\kbdated{{{date}}}Text") };
        Fragment::parse(id, src, &CommandRegistry::default()).unwrap()
    }

    fn ids(v: &[Fragment]) -> Vec<&str> {
        v.iter().map(|f| f.id.as_str()).collect()
    }

    #[test]
    fn metadata() {
        let f = Fragment::parse(
            "l1",
            "\\kbsender{gnd:1}\\kbrecipient{gnd:2}\\kbdated{1776-05-03}Lieber Freund",
            &CommandRegistry::default(),
        )
        .unwrap();
        assert_eq!(f.meta.sender.as_deref(), Some("gnd:1"));
        assert_eq!(f.meta.recipient.as_deref(), Some("gnd:2"));
        assert_eq!(f.meta.date, DateExpr::day(1776, 5, 3));
        assert_eq!(f.meta.date_offset, Some(35));
        assert_eq!(f.projection(&CommandRegistry::default()).text, "Lieber Freund");
    }

    #[test]
    fn chronological_with_undated_last() {
        let out = order_fragments(vec![frag("a", "1776-05-03"), frag("b", "1775"), frag("c", ""), frag("d", "1776")]);
        assert_eq!(ids(&out), vec!["b", "d", "a", "c"]);
    }

    #[test]
    fn equal_dates_keep_order() {
        let out = order_fragments(vec![frag("z", "1776"), frag("a", "1776"), frag("m", "")]);
        assert_eq!(ids(&out), vec!["z", "a", "m"]);
    }
}
