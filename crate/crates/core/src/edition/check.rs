use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use super::annotation::Annotation;
use super::fragment::Fragment;
use super::line_of;
use crate::facts::{normalize_name, CacheSet, Entity};
use crate::latex::find_commands;
use crate::nei::Directive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum FindingCode {
    /// Void entity identifier.
    C1,
    /// Missing or unparseable date.
    C2,
    /// Date outside the lifespans of the people involved, or an entity
    /// that dies before it is born.
    C3,
    /// Duplicate entities in the fact bases.
    C4,
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Warning,
    Error,
}

/// Where a finding points. Fact-base findings use `entity:<id>` as file.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Location {
    pub file: String,
    pub line: usize,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Finding {
    pub code: FindingCode,
    pub severity: Severity,
    pub location: Location,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {} {sev}: {}", self.location.file, self.location.line, self.code, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CheckReport {
    pub findings: Vec<Finding>,
}

impl CheckReport {
    pub fn has_errors(&self) -> bool {
        self.findings.iter().any(|f| f.severity == Severity::Error)
    }

    pub fn count(&self, code: FindingCode) -> usize {
        self.findings.iter().filter(|f| f.code == code).count()
    }

    pub fn to_text(&self) -> String {
        self.findings.iter().map(|f| format!("{f}\n")).collect()
    }
}

/// A directive together with the file and line it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectiveSource {
    pub file: String,
    pub line: usize,
    pub directive: Directive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[derive(Default)]
pub struct CheckOptions {
    /// Years a fragment may postdate the earliest death of its writers.
    pub lifespan_slack: i32,
}


pub fn check(
    fragments: &[Fragment],
    annotations: &[Annotation],
    directives: &[DirectiveSource],
    cache: &CacheSet,
    opts: &CheckOptions,
) -> CheckReport {
    let mut out = Vec::new();
    let mut void = |id: &str, location: Location, what: &str| {
        if !cache.contains_id(id) {
            out.push(Finding {
                code: FindingCode::C1,
                severity: Severity::Error,
                location,
                message: format!("{what} refers to unknown entity `{id}`"),
            });
        }
    };

    for a in annotations {
        if let Some(id) = a.entity_id() {
            let (file, line) = a.source.clone().unwrap_or_else(|| (a.doc_id.clone(), 0));
            void(id, Location { file, line, offset: 0 }, "annotation");
        }
    }
    for d in directives {
        if let Some(id) = d.directive.entity_id() {
            void(id, Location { file: d.file.clone(), line: d.line, offset: 0 }, "directive");
        }
    }
    for f in fragments {
        let at = |offset: usize| Location { file: f.location_name(), line: line_of(&f.source, offset), offset };
        for name in ["kbperson", "kbplace"] {
            for c in find_commands(&f.items, name) {
                if let Some(id) = c.opts.first().map(|s| s.trim()).filter(|s| !s.is_empty()) {
                    void(id, at(c.span.start), &format!("\\{name}"));
                }
            }
        }
        for name in ["kbsender", "kbrecipient"] {
            for c in find_commands(&f.items, name) {
                if let Some(id) = c.arg_text(0).map(|s| s.trim().to_string()).filter(|s| !s.is_empty()) {
                    void(&id, at(c.span.start), &format!("\\{name}"));
                }
            }
        }
    }

    for f in fragments {
        let at = |offset: usize| Location { file: f.location_name(), line: line_of(&f.source, offset), offset };
        let Some(date) = f.meta.date else {
            let (location, message) = match (&f.meta.date_text, f.meta.date_offset) {
                (Some(t), Some(o)) => (at(o), format!("date `{t}` has no recognizable year")),
                _ => (at(0), "fragment has no date".to_string()),
            };
            out.push(Finding { code: FindingCode::C2, severity: Severity::Warning, location, message });
            continue;
        };
        let people: Vec<&Entity> =
            [&f.meta.sender, &f.meta.recipient].into_iter().flatten().filter_map(|id| cache.get_by_id(id)).collect();
        let latest_birth = people.iter().filter_map(|e| e.birth.map(|d| (d.year, &e.id))).max();
        let earliest_death = people.iter().filter_map(|e| e.death.map(|d| (d.year, &e.id))).min();
        let year = date.year;
        let problem = match (latest_birth, earliest_death) {
            (Some((b, id)), _) if year < b => Some(format!("{year} is before the birth of {id} ({b})")),
            (_, Some((d, id))) if year > d + opts.lifespan_slack => {
                Some(format!("{year} is after the death of {id} ({d})"))
            }
            _ => None,
        };
        if let Some(message) = problem {
            let location = at(f.meta.date_offset.unwrap_or(0));
            out.push(Finding { code: FindingCode::C3, severity: Severity::Warning, location, message });
        }
    }

    let entity_at = |id: &str| Location { file: format!("entity:{id}"), line: 0, offset: 0 };
    for e in cache.entities() {
        if let (Some(b), Some(d)) = (e.birth, e.death) {
            if d.sort_key() < b.sort_key() {
                out.push(Finding {
                    code: FindingCode::C3,
                    severity: Severity::Warning,
                    location: entity_at(&e.id),
                    message: format!("{} dies ({}) before being born ({})", e.id, d.iso(), b.iso()),
                });
            }
        }
    }

    let mut by_name: BTreeMap<(String, String, i32), Vec<&str>> = BTreeMap::new();
    let mut by_link: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for e in cache.entities() {
        if let Some(b) = e.birth {
            by_name.entry((e.kind.as_str().to_string(), normalize_name(&e.preferred_name), b.year)).or_default().push(&e.id);
        }
        for l in &e.external_links {
            by_link.entry(l).or_default().push(&e.id);
        }
    }
    let mut reported: Vec<Vec<&str>> = Vec::new();
    for ((_, name, year), ids) in &by_name {
        if ids.len() > 1 {
            out.push(Finding {
                code: FindingCode::C4,
                severity: Severity::Warning,
                location: entity_at(ids[0]),
                message: format!("{} share the name `{name}` and birth year {year}", ids.join(", ")),
            });
            reported.push(ids.clone());
        }
    }
    for (link, ids) in &by_link {
        if ids.len() > 1 && !reported.contains(ids) {
            out.push(Finding {
                code: FindingCode::C4,
                severity: Severity::Warning,
                location: entity_at(ids[0]),
                message: format!("{} share the external id {link}", ids.join(", ")),
            });
            reported.push(ids.clone());
        }
    }

    out.sort_by(|a, b| {
        (&a.location.file, a.location.line, a.location.offset, a.code, &a.message)
            .cmp(&(&b.location.file, b.location.line, b.location.offset, b.code, &b.message))
    });
    CheckReport { findings: out }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::DateExpr;
    use crate::edition::{Payload, PositionSpec, RefKind};
    use crate::latex::CommandRegistry;

    fn cache() -> CacheSet {
        CacheSet::from_entities(
            [
                Entity::person("gnd:S", "Sulzer, Johann Georg")
                    .with_birth(DateExpr::year(1720))
                    .with_death(DateExpr::year(1779)),
                Entity::person("gnd:B", "Bodmer, Johann Jakob")
                    .with_birth(DateExpr::year(1698))
                    .with_death(DateExpr::year(1783)),
            ],
            Vec::new(),
        )
    }

    fn letter(id: &str, date: &str) -> Fragment {
        let src = format!("\\kbsender{{gnd:S}}\\kbrecipient{{gnd:B}}\n\\kbdated{{{date}}}\nLieber Freund.");
        Fragment::parse(id, src, &CommandRegistry::default()).unwrap()
    }

    #[test]
    fn void_id_in_annotation() {
        let a = Annotation::new("l1", PositionSpec::Token(0), Payload::EntityRef { kind: RefKind::Person, id: "gnd:none".into() });
        let r = check(&[letter("l1", "1770")], &[a], &[], &cache(), &CheckOptions::default());
        assert_eq!(r.findings.len(), 1, "{}", r.to_text());
        assert_eq!(r.findings[0].code, FindingCode::C1);
        assert!(r.has_errors());
    }

    #[test]
    fn letter_after_both_deaths() {
        let r = check(&[letter("l1", "1790")], &[], &[], &cache(), &CheckOptions::default());
        assert_eq!(r.findings.len(), 1);
        let f = &r.findings[0];
        assert_eq!(f.code, FindingCode::C3);
        assert_eq!(f.location.line, 2);
        assert!(f.message.contains("gnd:S (1779)"), "{}", f.message);
        let lenient = check(&[letter("l1", "1790")], &[], &[], &cache(), &CheckOptions { lifespan_slack: 11 });
        assert!(lenient.findings.is_empty());
        assert!(check(&[letter("l1", "1779")], &[], &[], &cache(), &CheckOptions::default()).findings.is_empty());
    }

    #[test]
    fn missing_and_unparseable_dates() {
        let undated = Fragment::parse("l2", "Text", &CommandRegistry::default()).unwrap();
        let r = check(&[letter("l1", "ohne Datum"), undated], &[], &[], &cache(), &CheckOptions::default());
        assert_eq!(r.count(FindingCode::C2), 2);
        assert!(!r.has_errors());
    }

    #[test]
    fn duplicates_reported_once_per_group() {
        let c = CacheSet::from_entities(
            [
                Entity::person("gnd:1", "Gleim, Johann").with_birth(DateExpr::year(1719)).with_wikipedia("https://de.wikipedia.org/wiki/G"),
                Entity::person("gnd:2", "GLEIM,  Johann").with_birth(DateExpr::day(1719, 4, 2).unwrap()).with_wikipedia("https://de.wikipedia.org/wiki/G"),
                Entity::person("gnd:3", "Gleim, Johann"),
            ],
            Vec::new(),
        );
        let r = check(&[], &[], &[], &c, &CheckOptions::default());
        assert_eq!(r.count(FindingCode::C4), 1, "{}", r.to_text());
        let again = check(&[], &[], &[], &c, &CheckOptions::default());
        assert_eq!(r, again);
    }

    #[test]
    fn directive_and_markup_ids() {
        let f = Fragment::parse("l1", "\\kbdated{1770}\n\\kbperson[gnd:Q]{Gleim}", &CommandRegistry::default()).unwrap();
        let d = DirectiveSource {
            file: "a.kb".into(),
            line: 4,
            directive: Directive::Fix { doc: "l1".into(), token: 0, entity_id: Some("gnd:W".into()) },
        };
        let r = check(&[f], &[], &[d], &cache(), &CheckOptions::default());
        let locs: Vec<_> = r.findings.iter().map(|f| (f.location.file.as_str(), f.location.line)).collect();
        assert_eq!(locs, vec![("a.kb", 4), ("l1", 2)]);
    }
}
