use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::date::DateExpr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Person,
    Place,
}

impl EntityKind {
    pub const ALL: [EntityKind; 2] = [EntityKind::Person, EntityKind::Place];

    pub fn as_str(&self) -> &'static str {
        match self {
            EntityKind::Person => "person",
            EntityKind::Place => "place",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "person" => Ok(EntityKind::Person),
            "place" => Ok(EntityKind::Place),
            other => Err(format!("unknown entity kind `{other}`")),
        }
    }
}

/// A person or place drawn from an external fact base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    pub kind: EntityKind,
    pub preferred_name: String,
    /// Persons only; empty for places.
    pub last_name: String,
    pub variant_names: BTreeSet<String>,
    pub birth: Option<DateExpr>,
    pub death: Option<DateExpr>,
    pub occupations: BTreeSet<String>,
    pub related_ids: BTreeSet<String>,
    pub has_wikipedia: bool,
    pub external_links: BTreeSet<String>,
    pub latitude: Option<f64>,
    pub longitude: Option<f64>,
}

impl Entity {
    pub fn new(id: impl Into<String>, kind: EntityKind, preferred_name: impl Into<String>) -> Self {
        Entity {
            id: id.into(),
            kind,
            preferred_name: preferred_name.into(),
            last_name: String::new(),
            variant_names: BTreeSet::new(),
            birth: None,
            death: None,
            occupations: BTreeSet::new(),
            related_ids: BTreeSet::new(),
            has_wikipedia: false,
            external_links: BTreeSet::new(),
            latitude: None,
            longitude: None,
        }
    }

    pub fn person(id: impl Into<String>, preferred_name: impl Into<String>) -> Self {
        let mut e = Entity::new(id, EntityKind::Person, preferred_name);
        e.last_name = derive_last_name(&e.preferred_name);
        e
    }

    pub fn place(id: impl Into<String>, preferred_name: impl Into<String>) -> Self {
        Entity::new(id, EntityKind::Place, preferred_name)
    }

    pub fn with_last_name(mut self, name: impl Into<String>) -> Self {
        self.last_name = name.into();
        self
    }

    pub fn with_variant(mut self, name: impl Into<String>) -> Self {
        self.variant_names.insert(name.into());
        self
    }

    pub fn with_birth(mut self, d: DateExpr) -> Self {
        self.birth = Some(d);
        self
    }

    pub fn with_death(mut self, d: DateExpr) -> Self {
        self.death = Some(d);
        self
    }

    pub fn with_occupation(mut self, o: &str) -> Self {
        self.occupations.insert(o.to_lowercase());
        self
    }

    pub fn with_related(mut self, id: impl Into<String>) -> Self {
        self.related_ids.insert(id.into());
        self
    }

    pub fn with_wikipedia(mut self, url: impl Into<String>) -> Self {
        self.has_wikipedia = true;
        self.external_links.insert(url.into());
        self
    }

    pub fn with_coordinates(mut self, lat: f64, lon: f64) -> Self {
        self.latitude = Some(lat);
        self.longitude = Some(lon);
        self
    }

    /// Namespace part of the id (`gnd` for `gnd:118540238`).
    pub fn namespace(&self) -> &str {
        id_namespace(&self.id)
    }

    /// Name used to sort registers: last name for persons, else preferred name.
    pub fn sort_name(&self) -> &str {
        if self.kind == EntityKind::Person && !self.last_name.is_empty() {
            &self.last_name
        } else {
            &self.preferred_name
        }
    }

    /// Birth year not after death year, when both are known.
    pub fn lifespan_consistent(&self) -> bool {
        match (self.birth, self.death) {
            (Some(b), Some(d)) => b.year <= d.year,
            _ => true,
        }
    }
}

pub fn id_namespace(id: &str) -> &str {
    match id.split_once(':') {
        Some((ns, _)) if !ns.is_empty() && !id.starts_with("http") => ns,
        _ => "",
    }
}

/// `Gleim, Johann Wilhelm Ludwig` → `Gleim`; `Johann Georg Sulzer` → `Sulzer`.
pub fn derive_last_name(preferred: &str) -> String {
    let p = preferred.trim();
    match p.split_once(',') {
        Some((last, _)) => last.trim().to_string(),
        None => p.rsplit(char::is_whitespace).next().unwrap_or("").to_string(),
    }
}

/// Restricts ingestion to the application scope.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScopeFilter {
    /// Persons born after this year are dropped. Persons with unknown
    /// birth are kept.
    pub max_birth_year: Option<i32>,
    /// Kinds to keep; empty keeps all.
    pub kinds: BTreeSet<EntityKind>,
}

impl ScopeFilter {
    pub fn all() -> Self {
        ScopeFilter::default()
    }

    pub fn born_by(year: i32) -> Self {
        ScopeFilter {
            max_birth_year: Some(year),
            kinds: BTreeSet::new(),
        }
    }

    pub fn with_kinds(mut self, kinds: impl IntoIterator<Item = EntityKind>) -> Self {
        self.kinds = kinds.into_iter().collect();
        self
    }

    pub fn admits_kind(&self, kind: EntityKind) -> bool {
        self.kinds.is_empty() || self.kinds.contains(&kind)
    }

    pub fn admits_birth(&self, kind: EntityKind, birth: Option<DateExpr>) -> bool {
        match (kind, self.max_birth_year, birth) {
            (EntityKind::Person, Some(max), Some(b)) => b.year <= max,
            _ => true,
        }
    }

    pub fn admits(&self, e: &Entity) -> bool {
        self.admits_kind(e.kind) && self.admits_birth(e.kind, e.birth)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn last_name_derivation() {
        assert_eq!(derive_last_name("Gleim, Johann Wilhelm Ludwig"), "Gleim");
        assert_eq!(derive_last_name("Johann Georg Sulzer"), "Sulzer");
        assert_eq!(derive_last_name("Bodmer"), "Bodmer");
    }

    #[test]
    fn namespaces() {
        assert_eq!(id_namespace("gnd:118540238"), "gnd");
        assert_eq!(id_namespace("https://d-nb.info/gnd/1"), "");
        assert_eq!(id_namespace("plain"), "");
    }

    #[test]
    fn filter_keeps_unknown_births_and_places() {
        let f = ScopeFilter::born_by(1700);
        assert!(f.admits(&Entity::person("p", "A")));
        assert!(f.admits(&Entity::person("p", "A").with_birth(DateExpr::year(1698))));
        assert!(!f.admits(&Entity::person("p", "A").with_birth(DateExpr::year(1720))));
        assert!(f.admits(&Entity::place("x", "Zürich")));
        assert!(!f.clone().with_kinds([EntityKind::Person]).admits(&Entity::place("x", "Zürich")));
    }
}
