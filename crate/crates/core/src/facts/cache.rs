use std::collections::{BTreeMap, HashSet};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::entity::{Entity, EntityKind};
use super::index::KeyIndex;
use super::normalize::normalize_name;
use super::snapshot::PackedEntities;

/// How a surface form matched an entity. Lower is better.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchClass {
    ExactLast = 0,
    ExactPreferred = 1,
    Variant = 2,
}

impl MatchClass {
    pub(crate) fn from_u8(b: u8) -> Option<Self> {
        match b {
            0 => Some(MatchClass::ExactLast),
            1 => Some(MatchClass::ExactPreferred),
            2 => Some(MatchClass::Variant),
            _ => None,
        }
    }
}

/// Where a set of entities came from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceDescriptor {
    pub label: String,
    pub format: String,
    pub entities: u64,
}

/// Scalar disagreement found while unifying two records for one id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub id: String,
    pub field: String,
    pub kept: String,
    pub dropped: String,
}

/// Scope-filtered entity store with redundant indexes for the access
/// patterns used by identification: by last name, by name or variant, by
/// identifier, and by identifier namespace.
///
/// Immutable once built. Entities are held in id order, so index postings
/// (entity positions) sort the same way as ids and an id is found by binary
/// search. A cache loaded from a snapshot decodes each entity on first
/// access.
#[derive(Debug, Default)]
pub struct CacheSet {
    pub(crate) store: EntityStore,
    pub(crate) by_last_name: KeyIndex,
    /// Postings are `position << 2 | match class`.
    pub(crate) by_name: KeyIndex,
    pub(crate) by_namespace: BTreeMap<String, Vec<u32>>,
    pub(crate) provenance: Vec<SourceDescriptor>,
    queries: AtomicU64,
}

#[derive(Debug, Clone)]
pub(crate) enum EntityStore {
    Owned(Vec<Entity>),
    Packed(PackedEntities),
}

impl Default for EntityStore {
    fn default() -> Self {
        EntityStore::Owned(Vec::new())
    }
}

impl EntityStore {
    pub(crate) fn len(&self) -> usize {
        match self {
            EntityStore::Owned(v) => v.len(),
            EntityStore::Packed(p) => p.len(),
        }
    }

    pub(crate) fn get(&self, i: usize) -> &Entity {
        match self {
            EntityStore::Owned(v) => &v[i],
            EntityStore::Packed(p) => p.get(i),
        }
    }

    fn id(&self, i: usize) -> &str {
        match self {
            EntityStore::Owned(v) => &v[i].id,
            EntityStore::Packed(p) => p.id(i),
        }
    }

    fn kind(&self, i: usize) -> EntityKind {
        match self {
            EntityStore::Owned(v) => v[i].kind,
            EntityStore::Packed(p) => p.kind(i),
        }
    }
}

pub(crate) fn pack_posting(i: u32, class: MatchClass) -> u32 {
    i << 2 | class as u32
}

pub(crate) fn unpack_posting(p: u32) -> (u32, Option<MatchClass>) {
    (p >> 2, MatchClass::from_u8((p & 3) as u8))
}

impl Clone for CacheSet {
    fn clone(&self) -> Self {
        CacheSet {
            store: self.store.clone(),
            by_last_name: self.by_last_name.clone(),
            by_name: self.by_name.clone(),
            by_namespace: self.by_namespace.clone(),
            provenance: self.provenance.clone(),
            queries: AtomicU64::new(0),
        }
    }
}

impl CacheSet {
    /// Builds the indexes over `entities`. Later duplicates of an id are
    /// dropped; use [`CacheSet::merge`] to unify records instead.
    pub fn from_entities(entities: impl IntoIterator<Item = Entity>, provenance: Vec<SourceDescriptor>) -> Self {
        let mut seen = HashSet::new();
        let mut list: Vec<Entity> = Vec::new();
        for e in entities {
            if seen.insert(e.id.clone()) {
                list.push(e);
            }
        }
        Self::from_sorted(list, provenance)
    }

    fn from_sorted(mut list: Vec<Entity>, provenance: Vec<SourceDescriptor>) -> Self {
        list.sort_by(|a, b| a.id.cmp(&b.id));
        let mut last = Vec::new();
        let mut names = Vec::new();
        let mut by_namespace: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        for (i, e) in list.iter().enumerate() {
            let i = i as u32;
            by_namespace.entry(e.namespace().to_string()).or_default().push(i);
            if e.kind == EntityKind::Person {
                let key = normalize_name(&e.last_name);
                if !key.is_empty() {
                    last.push((key, i));
                }
            }
            let mut keys: Vec<(String, MatchClass)> = Vec::new();
            let pref = normalize_name(&e.preferred_name);
            if !pref.is_empty() {
                keys.push((pref, MatchClass::ExactPreferred));
            }
            for v in &e.variant_names {
                let key = normalize_name(v);
                if !key.is_empty() && !keys.iter().any(|(k, _)| *k == key) {
                    keys.push((key, MatchClass::Variant));
                }
            }
            names.extend(keys.into_iter().map(|(key, class)| (key, pack_posting(i, class))));
        }
        CacheSet {
            store: EntityStore::Owned(list),
            by_last_name: KeyIndex::build(last),
            by_name: KeyIndex::build(names),
            by_namespace,
            provenance,
            queries: AtomicU64::new(0),
        }
    }

    pub(crate) fn from_parts(
        store: EntityStore,
        by_last_name: KeyIndex,
        by_name: KeyIndex,
        by_namespace: BTreeMap<String, Vec<u32>>,
        provenance: Vec<SourceDescriptor>,
    ) -> Self {
        CacheSet { store, by_last_name, by_name, by_namespace, provenance, queries: AtomicU64::new(0) }
    }

    pub fn len(&self) -> usize {
        self.store.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Entities in id order.
    pub fn entities(&self) -> impl ExactSizeIterator<Item = &Entity> + '_ {
        (0..self.len()).map(|i| self.store.get(i))
    }

    /// The entity at position `i` in id order.
    pub fn entity(&self, i: usize) -> Option<&Entity> {
        (i < self.len()).then(|| self.store.get(i))
    }

    pub fn provenance(&self) -> &[SourceDescriptor] {
        &self.provenance
    }

    fn position(&self, id: &str) -> Option<usize> {
        let (mut lo, mut hi) = (0, self.len());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.store.id(mid).cmp(id) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    pub fn get_by_id(&self, id: &str) -> Option<&Entity> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        self.position(id).map(|i| self.store.get(i))
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.position(id).is_some()
    }

    /// Entities whose id has the given namespace prefix (`gnd`, `geo`, ...).
    pub fn ids_in_namespace(&self, namespace: &str) -> impl Iterator<Item = &str> {
        self.by_namespace
            .get(namespace)
            .into_iter()
            .flatten()
            .map(|&i| self.store.id(i as usize))
    }

    /// Number of store queries answered since construction.
    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    /// Up to `k` entities of `kind` whose normalized last name, preferred
    /// name, or variant equals the normalized `surface`, ordered by match
    /// class and then id.
    pub fn lookup_name(&self, surface: &str, kind: EntityKind, k: usize) -> Vec<(&Entity, MatchClass)> {
        self.lookup_key(&normalize_name(surface), kind, k)
    }

    /// [`CacheSet::lookup_name`] for an already normalized key.
    pub fn lookup_key(&self, key: &str, kind: EntityKind, k: usize) -> Vec<(&Entity, MatchClass)> {
        self.queries.fetch_add(1, Ordering::Relaxed);
        if k == 0 || key.is_empty() {
            return Vec::new();
        }
        let mut hits: Vec<(MatchClass, u32)> = Vec::new();
        if kind == EntityKind::Person {
            hits.extend(self.by_last_name.get(key).iter().map(|&i| (MatchClass::ExactLast, i)));
        }
        for &p in self.by_name.get(key) {
            if let (i, Some(class)) = unpack_posting(p) {
                if self.store.kind(i as usize) == kind {
                    hits.push((class, i));
                }
            }
        }
        // Keep the best class per entity.
        hits.sort_unstable_by_key(|&(c, i)| (i, c));
        hits.dedup_by_key(|&mut (_, i)| i);
        hits.sort_unstable();
        hits.truncate(k);
        hits.into_iter().map(|(c, i)| (self.store.get(i as usize), c)).collect()
    }

    /// Unifies two caches. Records sharing an id are combined field by
    /// field: set fields take the union, `has_wikipedia` is or-ed, and
    /// scalars keep the value from `self`, reporting a [`Conflict`] when the
    /// other side disagrees.
    pub fn merge(&self, other: &CacheSet) -> (CacheSet, Vec<Conflict>) {
        let mut conflicts = Vec::new();
        let mut merged: BTreeMap<&str, Entity> = self.entities().map(|e| (e.id.as_str(), e.clone())).collect();
        for e in other.entities() {
            match merged.get_mut(e.id.as_str()) {
                None => {
                    merged.insert(&e.id, e.clone());
                }
                Some(base) => unify(base, e, &mut conflicts),
            }
        }
        let mut provenance = self.provenance.clone();
        provenance.extend(other.provenance.iter().cloned());
        (CacheSet::from_sorted(merged.into_values().collect(), provenance), conflicts)
    }
}

fn unify(base: &mut Entity, other: &Entity, conflicts: &mut Vec<Conflict>) {
    let id = base.id.clone();
    let mut conflict = |field: &str, kept: String, dropped: String| {
        conflicts.push(Conflict {
            id: id.clone(),
            field: field.to_string(),
            kept,
            dropped,
        })
    };
    if base.kind != other.kind {
        conflict("kind", base.kind.to_string(), other.kind.to_string());
    }
    scalar_str(&mut base.preferred_name, &other.preferred_name, "preferred_name", &mut conflict);
    scalar_str(&mut base.last_name, &other.last_name, "last_name", &mut conflict);
    scalar(&mut base.birth, other.birth, "birth", &mut conflict, |d| d.iso());
    scalar(&mut base.death, other.death, "death", &mut conflict, |d| d.iso());
    scalar(&mut base.latitude, other.latitude, "latitude", &mut conflict, |x| x.to_string());
    scalar(&mut base.longitude, other.longitude, "longitude", &mut conflict, |x| x.to_string());
    base.variant_names.extend(other.variant_names.iter().cloned());
    base.occupations.extend(other.occupations.iter().cloned());
    base.related_ids.extend(other.related_ids.iter().cloned());
    base.external_links.extend(other.external_links.iter().cloned());
    base.has_wikipedia |= other.has_wikipedia;
}

fn scalar_str(base: &mut String, other: &str, field: &str, conflict: &mut impl FnMut(&str, String, String)) {
    if base.is_empty() {
        *base = other.to_string();
    } else if !other.is_empty() && base != other {
        conflict(field, base.clone(), other.to_string());
    }
}

fn scalar<T: PartialEq + Copy>(
    base: &mut Option<T>,
    other: Option<T>,
    field: &str,
    conflict: &mut impl FnMut(&str, String, String),
    show: impl Fn(&T) -> String,
) {
    match (base.as_ref(), other) {
        (None, o) => *base = o,
        (Some(b), Some(o)) if *b != o => conflict(field, show(b), show(&o)),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::DateExpr;

    fn fixture() -> CacheSet {
        CacheSet::from_entities(
            vec![
                Entity::person("gnd:2", "Gleim, Johann Wilhelm Ludwig").with_birth(DateExpr::year(1719)),
                Entity::person("gnd:1", "Gleim, Betty").with_variant("Gleimin"),
                Entity::person("gnd:3", "Klopstock, Friedrich Gottlieb").with_variant("Gleim"),
                Entity::place("geo:1", "Halberstadt").with_variant("Halberstatt"),
                Entity::place("geo:2", "Gleim"),
            ],
            vec![],
        )
    }

    #[test]
    fn lookup_orders_by_class_then_id() {
        let c = fixture();
        let hits: Vec<_> = c.lookup_name("Gleim", EntityKind::Person, 10).into_iter().map(|(e, m)| (e.id.as_str(), m)).collect();
        assert_eq!(
            hits,
            vec![("gnd:1", MatchClass::ExactLast), ("gnd:2", MatchClass::ExactLast), ("gnd:3", MatchClass::Variant)]
        );
        assert_eq!(c.lookup_name("gleim", EntityKind::Person, 1)[0].0.id, "gnd:1");
        let places: Vec<_> = c.lookup_name("GLEIM", EntityKind::Place, 5).into_iter().map(|(e, _)| e.id.as_str()).collect();
        assert_eq!(places, vec!["geo:2"]);
        assert!(c.lookup_name("Zzz", EntityKind::Person, 5).is_empty());
        assert_eq!(c.lookup_name("halberstatt", EntityKind::Place, 5)[0].1, MatchClass::Variant);
    }

    #[test]
    fn get_by_id_and_namespaces() {
        let c = fixture();
        assert_eq!(c.get_by_id("gnd:3").unwrap().last_name, "Klopstock");
        assert!(c.get_by_id("gnd:9").is_none());
        assert_eq!(c.ids_in_namespace("geo").collect::<Vec<_>>(), vec!["geo:1", "geo:2"]);
        assert!(c.query_count() >= 2);
    }

    #[test]
    fn merge_unifies_records() {
        let a = CacheSet::from_entities(
            vec![
                Entity::person("gnd:1", "Sulzer, Johann Georg").with_birth(DateExpr::year(1720)),
                Entity::person("gnd:2", "Bodmer, Johann Jakob"),
            ],
            vec![],
        );
        let b = CacheSet::from_entities(
            vec![
                Entity::person("gnd:1", "Sulzer, Johann Georg")
                    .with_birth(DateExpr::year(1721))
                    .with_wikipedia("https://de.wikipedia.org/wiki/Johann_Georg_Sulzer"),
                Entity::person("gnd:3", "Breitinger, Johann Jakob"),
                Entity::place("geo:1", "Zürich"),
            ],
            vec![],
        );
        let (m, conflicts) = a.merge(&b);
        assert_eq!(m.len(), 4);
        let s = m.get_by_id("gnd:1").unwrap();
        assert!(s.has_wikipedia);
        assert_eq!(s.birth, Some(DateExpr::year(1720)));
        assert_eq!(conflicts.len(), 1);
        assert_eq!(conflicts[0].field, "birth");
        assert_eq!(m.lookup_name("Breitinger", EntityKind::Person, 3).len(), 1);
    }
}
