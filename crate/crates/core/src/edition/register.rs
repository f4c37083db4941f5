use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use super::fragment::Fragment;
use crate::facts::{normalize_name, CacheSet, EntityKind};
use crate::nei::NeiResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RegisterKind {
    Persons,
    Places,
    Dates,
}

impl RegisterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegisterKind::Persons => "persons",
            RegisterKind::Places => "places",
            RegisterKind::Dates => "dates",
        }
    }

    pub fn title(&self) -> &'static str {
        match self {
            RegisterKind::Persons => "Persons",
            RegisterKind::Places => "Places",
            RegisterKind::Dates => "Dates",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Locator {
    pub fragment: String,
    /// Word index of the (first) word of the occurrence.
    pub token: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegisterEntry {
    pub entity_id: String,
    pub label: String,
    pub sort_key: String,
    pub locators: Vec<Locator>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Register {
    pub kind: RegisterKind,
    pub entries: Vec<RegisterEntry>,
}

impl Register {
    pub fn entry(&self, entity_id: &str) -> Option<&RegisterEntry> {
        self.entries.iter().find(|e| e.entity_id == entity_id)
    }

    pub fn locator_count(&self) -> usize {
        self.entries.iter().map(|e| e.locators.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RegisterBundle {
    pub persons: Register,
    pub places: Register,
    pub dates: Register,
}

impl RegisterBundle {
    pub fn all(&self) -> [&Register; 3] {
        [&self.persons, &self.places, &self.dates]
    }
}

/// Builds the registers from identification results. Locators follow the
/// order of `fragments` and then word position; documents missing from
/// `fragments` come after, by id. Persons and places are sorted by
/// normalized sort name, dates chronologically.
pub fn generate_registers(fragments: &[Fragment], results: &NeiResult, cache: &CacheSet) -> RegisterBundle {
    let rank: HashMap<&str, usize> = fragments.iter().enumerate().map(|(i, f)| (f.id.as_str(), i)).collect();
    let mut groups: BTreeMap<(RegisterKind, String), Vec<(usize, Locator)>> = BTreeMap::new();
    for doc in &results.documents {
        let r = rank.get(doc.doc_id.as_str()).copied().unwrap_or(usize::MAX);
        let loc = |token| (r, Locator { fragment: doc.doc_id.clone(), token });
        for o in &doc.occurrences {
            if o.suppressed {
                continue;
            }
            let Some(id) = &o.chosen else { continue };
            let kind = match o.chosen_candidate().map(|c| c.kind).or_else(|| cache.get_by_id(id).map(|e| e.kind)) {
                Some(EntityKind::Place) => RegisterKind::Places,
                _ => RegisterKind::Persons,
            };
            groups.entry((kind, id.clone())).or_default().push(loc(o.occurrence.token_index));
        }
        for d in &doc.dates {
            groups.entry((RegisterKind::Dates, d.entity_id.clone())).or_default().push(loc(d.token_index));
        }
    }

    let mut regs: BTreeMap<RegisterKind, Vec<RegisterEntry>> = BTreeMap::new();
    for ((kind, id), mut locs) in groups {
        locs.sort();
        locs.dedup();
        let (label, sort_key) = match (kind, cache.get_by_id(&id)) {
            (RegisterKind::Dates, _) => {
                let iso = id.strip_prefix("date:").unwrap_or(&id).to_string();
                (iso.clone(), iso)
            }
            (_, Some(e)) => (e.preferred_name.clone(), normalize_name(e.sort_name())),
            (_, None) => (id.clone(), normalize_name(&id)),
        };
        regs.entry(kind).or_default().push(RegisterEntry {
            entity_id: id,
            label,
            sort_key,
            locators: locs.into_iter().map(|(_, l)| l).collect(),
        });
    }
    let mut take = |kind: RegisterKind| {
        let mut entries = regs.remove(&kind).unwrap_or_default();
        if kind == RegisterKind::Dates {
            entries.sort_by(|a, b| date_order(&a.sort_key).cmp(&date_order(&b.sort_key)).then(a.sort_key.cmp(&b.sort_key)));
        } else {
            entries.sort_by(|a, b| (&a.sort_key, &a.entity_id).cmp(&(&b.sort_key, &b.entity_id)));
        }
        Register { kind, entries }
    };
    RegisterBundle { persons: take(RegisterKind::Persons), places: take(RegisterKind::Places), dates: take(RegisterKind::Dates) }
}

fn date_order(iso: &str) -> (i32, u8, u8) {
    iso.parse::<crate::date::DateExpr>().map(|d| d.sort_key()).unwrap_or((i32::MAX, 0, 0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::DateExpr;
    use crate::facts::Entity;
    use crate::latex::CommandRegistry;
    use crate::nei::{identify, Directive, Document, Settings};

    fn setup() -> (Vec<Fragment>, CacheSet) {
        let reg = CommandRegistry::default();
        let frags = vec![
            Fragment::parse("b", "\\kbdated{1775}Gleim kam nach Berlin.", &reg).unwrap(),
            Fragment::parse("a", "\\kbdated{1776}Am 3. Mai 1776 schrieb Gleim.", &reg).unwrap(),
        ];
        let cache = CacheSet::from_entities(
            [
                Entity::person("gnd:G", "Gleim, Johann Wilhelm Ludwig").with_birth(DateExpr::year(1719)),
                Entity::place("geo:B", "Berlin"),
                Entity::person("gnd:X", "Anonymus"),
            ],
            Vec::new(),
        );
        (frags, cache)
    }

    fn run(frags: &[Fragment], cache: &CacheSet, directives: &[Directive]) -> NeiResult {
        let docs: Vec<Document> = frags.iter().map(|f| f.document(&CommandRegistry::default())).collect();
        identify(&docs, cache, directives, &Settings::default()).unwrap()
    }

    #[test]
    fn locators_follow_fragment_order() {
        let (frags, cache) = setup();
        let regs = generate_registers(&frags, &run(&frags, &cache, &[]), &cache);
        let g = regs.persons.entry("gnd:G").unwrap();
        assert_eq!(g.locators, vec![Locator { fragment: "b".into(), token: 0 }, Locator { fragment: "a".into(), token: 5 }]);
        assert!(regs.persons.entry("gnd:X").is_none());
        assert_eq!(regs.places.entries.len(), 1);
        assert_eq!(regs.dates.entries[0].entity_id, "date:1776-05-03");
    }

    #[test]
    fn forbid_removes_locator() {
        let (frags, cache) = setup();
        let forbid = Directive::Forbid { surface: "Gleim".into(), doc: Some("b".into()) };
        let regs = generate_registers(&frags, &run(&frags, &cache, &[forbid]), &cache);
        assert_eq!(regs.persons.entry("gnd:G").unwrap().locators, vec![Locator { fragment: "a".into(), token: 5 }]);
    }
}
