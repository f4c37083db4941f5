//! Triple-stream ingestion into a [`CacheSet`].

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use serde::Serialize;

use super::cache::{CacheSet, SourceDescriptor};
use super::entity::{derive_last_name, Entity, EntityKind, ScopeFilter};
use super::ntriples::{open_source, read_ntriples, MalformedTriple, Object, Triple};
use super::FactError;
use crate::date::DateExpr;
use crate::terms::{Clause, Term};

/// Entity field a predicate feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Field {
    Kind,
    PreferredName,
    LastName,
    VariantName,
    Birth,
    Death,
    Occupation,
    Related,
    Wikipedia,
    ExternalLink,
    Latitude,
    Longitude,
}

impl Field {
    pub fn as_str(&self) -> &'static str {
        match self {
            Field::Kind => "kind",
            Field::PreferredName => "preferred_name",
            Field::LastName => "last_name",
            Field::VariantName => "variant_name",
            Field::Birth => "birth",
            Field::Death => "death",
            Field::Occupation => "occupation",
            Field::Related => "related",
            Field::Wikipedia => "wikipedia",
            Field::ExternalLink => "external_link",
            Field::Latitude => "latitude",
            Field::Longitude => "longitude",
        }
    }

    pub fn parse(s: &str) -> Option<Field> {
        const ALL: [Field; 12] = [
            Field::Kind,
            Field::PreferredName,
            Field::LastName,
            Field::VariantName,
            Field::Birth,
            Field::Death,
            Field::Occupation,
            Field::Related,
            Field::Wikipedia,
            Field::ExternalLink,
            Field::Latitude,
            Field::Longitude,
        ];
        ALL.into_iter().find(|f| f.as_str() == s)
    }
}

const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
const GND: &str = "https://d-nb.info/standards/elementset/gnd#";
const SCHEMA: &str = "http://schema.org/";
const FOAF: &str = "http://xmlns.com/foaf/0.1/";
const GEONAMES: &str = "http://www.geonames.org/ontology#";
const WGS84: &str = "http://www.w3.org/2003/01/geo/wgs84_pos#";

/// Which predicates and classes feed which entity fields, and how subject
/// IRIs shorten to namespaced ids.
#[derive(Debug, Clone, Default)]
pub struct TripleMapping {
    predicates: HashMap<String, Field>,
    classes: HashMap<String, EntityKind>,
    /// (IRI prefix, namespace), longest prefix first.
    prefixes: Vec<(String, String)>,
}

impl TripleMapping {
    pub fn empty() -> Self {
        TripleMapping::default()
    }

    /// GND, GeoNames, schema.org, FOAF and WGS84 vocabulary.
    pub fn standard() -> Self {
        let mut m = TripleMapping::empty();
        m.map_predicate(RDF_TYPE, Field::Kind);
        for (local, field) in [
            ("preferredNameForThePerson", Field::PreferredName),
            ("variantNameForThePerson", Field::VariantName),
            ("surname", Field::LastName),
            ("dateOfBirth", Field::Birth),
            ("dateOfDeath", Field::Death),
            ("professionOrOccupation", Field::Occupation),
            ("familialRelationship", Field::Related),
            ("acquaintanceshipOrFriendship", Field::Related),
            ("correspondent", Field::Related),
            ("placeOfBirth", Field::Related),
            ("placeOfDeath", Field::Related),
            ("placeOfActivity", Field::Related),
            ("preferredNameForThePlaceOrGeographicName", Field::PreferredName),
            ("variantNameForThePlaceOrGeographicName", Field::VariantName),
        ] {
            m.map_predicate(&format!("{GND}{local}"), field);
        }
        for (local, kind) in [
            ("Person", EntityKind::Person),
            ("DifferentiatedPerson", EntityKind::Person),
            ("PlaceOrGeographicName", EntityKind::Place),
            ("TerritorialCorporateBodyOrAdministrativeUnit", EntityKind::Place),
        ] {
            m.map_class(&format!("{GND}{local}"), kind);
        }
        for (local, field) in [
            ("name", Field::PreferredName),
            ("alternateName", Field::VariantName),
            ("familyName", Field::LastName),
            ("birthDate", Field::Birth),
            ("deathDate", Field::Death),
            ("hasOccupation", Field::Occupation),
            ("jobTitle", Field::Occupation),
            ("knows", Field::Related),
            ("relatedTo", Field::Related),
            ("containedInPlace", Field::Related),
            ("sameAs", Field::ExternalLink),
            ("latitude", Field::Latitude),
            ("longitude", Field::Longitude),
        ] {
            m.map_predicate(&format!("{SCHEMA}{local}"), field);
        }
        m.map_class(&format!("{SCHEMA}Person"), EntityKind::Person);
        m.map_class(&format!("{SCHEMA}Place"), EntityKind::Place);
        for (local, field) in [
            ("name", Field::PreferredName),
            ("familyName", Field::LastName),
            ("surname", Field::LastName),
            ("isPrimaryTopicOf", Field::ExternalLink),
            ("page", Field::ExternalLink),
        ] {
            m.map_predicate(&format!("{FOAF}{local}"), field);
        }
        m.map_class(&format!("{FOAF}Person"), EntityKind::Person);
        for (local, field) in [
            ("name", Field::PreferredName),
            ("officialName", Field::VariantName),
            ("alternateName", Field::VariantName),
            ("wikipediaArticle", Field::Wikipedia),
            ("parentFeature", Field::Related),
        ] {
            m.map_predicate(&format!("{GEONAMES}{local}"), field);
        }
        m.map_class(&format!("{GEONAMES}Feature"), EntityKind::Place);
        m.map_predicate(&format!("{WGS84}lat"), Field::Latitude);
        m.map_predicate(&format!("{WGS84}long"), Field::Longitude);
        m.map_predicate("http://www.w3.org/2002/07/owl#sameAs", Field::ExternalLink);
        for (iri, ns) in [
            ("https://d-nb.info/gnd/", "gnd"),
            ("http://d-nb.info/gnd/", "gnd"),
            ("https://sws.geonames.org/", "geo"),
            ("http://sws.geonames.org/", "geo"),
            ("http://dbpedia.org/resource/", "dbr"),
            ("http://www.wikidata.org/entity/", "wd"),
        ] {
            m.add_prefix(iri, ns);
        }
        m
    }

    pub fn map_predicate(&mut self, iri: &str, field: Field) {
        self.predicates.insert(iri.to_string(), field);
    }

    pub fn map_class(&mut self, iri: &str, kind: EntityKind) {
        self.classes.insert(iri.to_string(), kind);
    }

    pub fn add_prefix(&mut self, iri: &str, namespace: &str) {
        self.prefixes.retain(|(p, _)| p != iri);
        self.prefixes.push((iri.to_string(), namespace.to_string()));
        self.prefixes.sort_by(|a, b| b.0.len().cmp(&a.0.len()).then_with(|| a.0.cmp(&b.0)));
    }

    pub fn field(&self, predicate: &str) -> Option<Field> {
        self.predicates.get(predicate).copied()
    }

    pub fn class(&self, iri: &str) -> Option<EntityKind> {
        self.classes.get(iri).copied()
    }

    /// `https://d-nb.info/gnd/118540238` → `gnd:118540238`. IRIs without a
    /// known prefix stay as they are.
    pub fn shorten(&self, iri: &str) -> String {
        for (prefix, ns) in &self.prefixes {
            if let Some(rest) = iri.strip_prefix(prefix.as_str()) {
                let local = rest.trim_end_matches('/');
                if !local.is_empty() {
                    return format!("{ns}:{local}");
                }
            }
        }
        iri.to_string()
    }

    /// Applies `predicate(Iri, field)`, `class(Iri, kind)` and
    /// `prefix(Iri, namespace)` clauses. Other clauses are ignored.
    pub fn apply_clauses(&mut self, clauses: &[Clause]) -> Result<(), String> {
        for c in clauses {
            let text = |i: usize| c.args.get(i).and_then(Term::as_text);
            match (c.functor.as_str(), c.args.len()) {
                ("predicate", 2) => {
                    let (Some(iri), Some(f)) = (text(0), text(1)) else {
                        return Err(format!("line {}: predicate(Iri, field) expects text arguments", c.line));
                    };
                    let field = Field::parse(f).ok_or_else(|| format!("line {}: unknown field `{f}`", c.line))?;
                    self.map_predicate(iri, field);
                }
                ("class", 2) => {
                    let (Some(iri), Some(k)) = (text(0), text(1)) else {
                        return Err(format!("line {}: class(Iri, kind) expects text arguments", c.line));
                    };
                    let kind = k.parse().map_err(|e| format!("line {}: {e}", c.line))?;
                    self.map_class(iri, kind);
                }
                ("prefix", 2) => {
                    let (Some(iri), Some(ns)) = (text(0), text(1)) else {
                        return Err(format!("line {}: prefix(Iri, namespace) expects text arguments", c.line));
                    };
                    self.add_prefix(iri, ns);
                }
                _ => {}
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "warning", rename_all = "snake_case")]
pub enum IngestWarning {
    MalformedTriple { line: usize, message: String },
    ConflictingFacts { id: String, field: String, kept: String, dropped: String },
    BadValue { line: usize, id: String, field: String, value: String },
    InconsistentLifespan { id: String, birth: i32, death: i32 },
}

impl From<MalformedTriple> for IngestWarning {
    fn from(e: MalformedTriple) -> Self {
        IngestWarning::MalformedTriple { line: e.line, message: e.message }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IngestReport {
    pub lines: usize,
    pub triples: usize,
    pub malformed: usize,
    /// Subjects dropped by the scope filter.
    pub filtered: usize,
    /// Subjects dropped for violating entity invariants.
    pub rejected: usize,
    pub warnings: Vec<IngestWarning>,
}

impl IngestReport {
    pub fn conflicts(&self) -> usize {
        self.warnings.iter().filter(|w| matches!(w, IngestWarning::ConflictingFacts { .. })).count()
    }
}

struct Partial {
    kind: Option<EntityKind>,
    explicit_last_name: bool,
    entity: Entity,
}

/// Accumulates triples into entity records. Feed it with [`CacheBuilder::push`]
/// from a [`read_ntriples`] callback, then call [`CacheBuilder::finish`].
///
/// Records are keyed by subject and only created for subjects that carry a
/// mapped predicate. A subject whose kind or birth year already fails the
/// filter is dropped on the spot and its later triples are ignored.
pub struct CacheBuilder<'m> {
    mapping: &'m TripleMapping,
    filter: ScopeFilter,
    partial: HashMap<String, Partial>,
    dropped: HashSet<String>,
    report: IngestReport,
    line: usize,
}

impl<'m> CacheBuilder<'m> {
    pub fn new(mapping: &'m TripleMapping, filter: ScopeFilter) -> Self {
        CacheBuilder {
            mapping,
            filter,
            partial: HashMap::new(),
            dropped: HashSet::new(),
            report: IngestReport::default(),
            line: 0,
        }
    }

    pub fn malformed(&mut self, e: MalformedTriple) {
        self.report.malformed += 1;
        self.report.warnings.push(e.into());
    }

    pub fn push(&mut self, t: &Triple<'_>) {
        self.line += 1;
        self.report.triples += 1;
        let Some(field) = self.mapping.field(&t.predicate) else {
            return;
        };
        let class = if field == Field::Kind {
            match self.mapping.class(t.object.text()) {
                Some(k) => Some(k),
                None => return,
            }
        } else {
            None
        };
        let id = self.mapping.shorten(&t.subject);
        if self.dropped.contains(&id) {
            return;
        }
        let p = self.partial.entry(id.clone()).or_insert_with(|| Partial {
            kind: None,
            explicit_last_name: false,
            entity: Entity::new(id.clone(), EntityKind::Person, ""),
        });
        let value = t.object.text();
        let e = &mut p.entity;
        let warnings = &mut self.report.warnings;
        let mut conflict = |field: Field, kept: String, dropped: String| {
            warnings.push(IngestWarning::ConflictingFacts {
                id: id.clone(),
                field: field.as_str().to_string(),
                kept,
                dropped,
            })
        };
        match field {
            Field::Kind => {
                let k = class.expect("class resolved above");
                match p.kind {
                    None => p.kind = Some(k),
                    Some(old) if old != k => conflict(field, old.to_string(), k.to_string()),
                    Some(_) => {}
                }
            }
            Field::PreferredName => first_wins_str(&mut e.preferred_name, value, field, &mut conflict),
            Field::LastName => {
                first_wins_str(&mut e.last_name, value, field, &mut conflict);
                p.explicit_last_name = true;
            }
            Field::VariantName => {
                e.variant_names.insert(value.trim().to_string());
            }
            Field::Birth | Field::Death => match value.parse::<DateExpr>() {
                Ok(d) => {
                    let slot = if field == Field::Birth { &mut e.birth } else { &mut e.death };
                    match slot {
                        None => *slot = Some(d),
                        Some(old) if *old != d => conflict(field, old.iso(), d.iso()),
                        Some(_) => {}
                    }
                }
                Err(_) => warnings.push(IngestWarning::BadValue {
                    line: self.line,
                    id: id.clone(),
                    field: field.as_str().to_string(),
                    value: value.to_string(),
                }),
            },
            Field::Occupation => {
                let occ = match &t.object {
                    Object::Iri(iri) => self.mapping.shorten(iri),
                    Object::Literal { lexical, .. } => lexical.trim().to_lowercase(),
                };
                e.occupations.insert(occ);
            }
            Field::Related => {
                e.related_ids.insert(self.mapping.shorten(value));
            }
            Field::Wikipedia => {
                e.has_wikipedia = true;
                e.external_links.insert(value.to_string());
            }
            Field::ExternalLink => {
                if value.contains("wikipedia.org/") {
                    e.has_wikipedia = true;
                }
                e.external_links.insert(value.to_string());
            }
            Field::Latitude | Field::Longitude => match value.trim().parse::<f64>() {
                Ok(v) if v.is_finite() => {
                    let slot = if field == Field::Latitude { &mut e.latitude } else { &mut e.longitude };
                    match slot {
                        None => *slot = Some(v),
                        Some(old) if *old != v => conflict(field, old.to_string(), v.to_string()),
                        Some(_) => {}
                    }
                }
                _ => warnings.push(IngestWarning::BadValue {
                    line: self.line,
                    id: id.clone(),
                    field: field.as_str().to_string(),
                    value: value.to_string(),
                }),
            },
        }
        // Early drop keeps memory proportional to retained entities.
        if let Some(kind) = p.kind {
            if !self.filter.admits_kind(kind) || !self.filter.admits_birth(kind, p.entity.birth) {
                self.partial.remove(&id);
                self.dropped.insert(id);
                self.report.filtered += 1;
            }
        }
    }

    pub fn finish(mut self, label: &str) -> (CacheSet, IngestReport) {
        let mut entities = Vec::with_capacity(self.partial.len());
        let mut ids: Vec<String> = self.partial.keys().cloned().collect();
        ids.sort();
        for id in ids {
            let p = self.partial.remove(&id).expect("key listed above");
            let Some(kind) = p.kind else {
                continue;
            };
            let mut e = p.entity;
            e.kind = kind;
            match kind {
                EntityKind::Person => {
                    if !p.explicit_last_name || e.last_name.trim().is_empty() {
                        e.last_name = derive_last_name(&e.preferred_name);
                    }
                }
                EntityKind::Place => {
                    e.last_name.clear();
                    e.birth = None;
                    e.death = None;
                }
            }
            if e.preferred_name.is_empty() {
                e.preferred_name = e.variant_names.iter().next().cloned().unwrap_or_default();
            }
            if !e.lifespan_consistent() {
                self.report.rejected += 1;
                self.report.warnings.push(IngestWarning::InconsistentLifespan {
                    id: e.id.clone(),
                    birth: e.birth.map_or(0, |d| d.year),
                    death: e.death.map_or(0, |d| d.year),
                });
                continue;
            }
            if !self.filter.admits(&e) {
                self.report.filtered += 1;
                continue;
            }
            entities.push(e);
        }
        let source = SourceDescriptor {
            label: label.to_string(),
            format: "ntriples".to_string(),
            entities: entities.len() as u64,
        };
        (CacheSet::from_entities(entities, vec![source]), self.report)
    }
}

fn first_wins_str(slot: &mut String, value: &str, field: Field, conflict: &mut impl FnMut(Field, String, String)) {
    let value = value.trim();
    if slot.is_empty() {
        *slot = value.to_string();
    } else if slot != value {
        conflict(field, slot.clone(), value.to_string());
    }
}

/// Ingests an N-Triples stream in one pass.
pub fn ingest_triples<R: BufRead>(
    reader: R,
    mapping: &TripleMapping,
    filter: &ScopeFilter,
    label: &str,
) -> std::io::Result<(CacheSet, IngestReport)> {
    let mut builder = CacheBuilder::new(mapping, filter.clone());
    let stats = read_ntriples(reader, |r| match r {
        Ok(t) => builder.push(&t),
        Err(e) => builder.malformed(e),
    })?;
    let (cache, mut report) = builder.finish(label);
    report.lines = stats.lines;
    Ok((cache, report))
}

/// Ingests an N-Triples file, gzip-compressed when it ends in `.gz`.
pub fn ingest_triples_file(
    path: &Path,
    mapping: &TripleMapping,
    filter: &ScopeFilter,
) -> Result<(CacheSet, IngestReport), FactError> {
    let io_err = |source| FactError::Io { path: path.to_path_buf(), source };
    let reader = open_source(path).map_err(io_err)?;
    ingest_triples(reader, mapping, filter, &path.display().to_string()).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = r#"
<https://d-nb.info/gnd/118540238> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <https://d-nb.info/standards/elementset/gnd#DifferentiatedPerson> .
<https://d-nb.info/gnd/118540238> <https://d-nb.info/standards/elementset/gnd#preferredNameForThePerson> "Gleim, Johann Wilhelm Ludwig" .
<https://d-nb.info/gnd/118540238> <https://d-nb.info/standards/elementset/gnd#dateOfBirth> "1719-04-02"^^<http://www.w3.org/2001/XMLSchema#date> .
<https://d-nb.info/gnd/118540238> <https://d-nb.info/standards/elementset/gnd#dateOfDeath> "1803-02-18" .
<https://d-nb.info/gnd/118540238> <http://www.w3.org/2002/07/owl#sameAs> <https://de.wikipedia.org/wiki/Johann_Wilhelm_Ludwig_Gleim> .
<https://d-nb.info/gnd/118540238> <https://d-nb.info/standards/elementset/gnd#acquaintanceshipOrFriendship> <https://d-nb.info/gnd/118620452> .
<https://d-nb.info/gnd/118620452> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <https://d-nb.info/standards/elementset/gnd#DifferentiatedPerson> .
<https://d-nb.info/gnd/118620452> <https://d-nb.info/standards/elementset/gnd#preferredNameForThePerson> "Sulzer, Johann Georg" .
<https://d-nb.info/gnd/118620452> <https://d-nb.info/standards/elementset/gnd#dateOfBirth> "1720" .
<https://sws.geonames.org/2950159/> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://www.geonames.org/ontology#Feature> .
<https://sws.geonames.org/2950159/> <http://www.geonames.org/ontology#name> "Berlin" .
<https://sws.geonames.org/2950159/> <http://www.w3.org/2003/01/geo/wgs84_pos#lat> "52.52437" .
"#;

    fn run(src: &str, filter: &ScopeFilter) -> (CacheSet, IngestReport) {
        ingest_triples(src.as_bytes(), &TripleMapping::standard(), filter, "fixture").unwrap()
    }

    #[test]
    fn fixture_yields_two_persons_and_a_place() {
        let (c, r) = run(FIXTURE, &ScopeFilter::born_by(1850));
        assert_eq!(c.len(), 3);
        assert_eq!(r.triples, 12);
        let gleim = c.get_by_id("gnd:118540238").unwrap();
        assert_eq!(gleim.last_name, "Gleim");
        assert!(gleim.has_wikipedia);
        assert!(gleim.related_ids.contains("gnd:118620452"));
        assert_eq!(gleim.birth.unwrap().iso(), "1719-04-02");
        let berlin = c.get_by_id("geo:2950159").unwrap();
        assert_eq!(berlin.kind, EntityKind::Place);
        assert_eq!(berlin.latitude, Some(52.52437));
    }

    #[test]
    fn filter_drops_late_births() {
        let (c, r) = run(FIXTURE, &ScopeFilter::born_by(1719));
        let ids: Vec<&str> = c.entities().map(|e| e.id.as_str()).collect();
        assert_eq!(ids, vec!["geo:2950159", "gnd:118540238"]);
        assert_eq!(r.filtered, 1);
        let (c, _) = run(FIXTURE, &ScopeFilter::born_by(1700));
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn empty_stream() {
        let (c, r) = run("", &ScopeFilter::all());
        assert!(c.is_empty());
        assert_eq!(r.triples, 0);
    }

    #[test]
    fn conflicts_keep_first_and_bad_lifespans_are_rejected() {
        let src = "<x:a> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://schema.org/Person> .\n\
                   <x:a> <http://schema.org/name> \"Ramler\" .\n\
                   <x:a> <http://schema.org/birthDate> \"1725\" .\n\
                   <x:a> <http://schema.org/birthDate> \"1726\" .\n\
                   <x:b> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://schema.org/Person> .\n\
                   <x:b> <http://schema.org/birthDate> \"1800\" .\n\
                   <x:b> <http://schema.org/deathDate> \"1700\" .\n\
                   not a triple\n";
        let (c, r) = run(src, &ScopeFilter::all());
        assert_eq!(c.len(), 1);
        assert_eq!(c.get_by_id("x:a").unwrap().birth, Some(DateExpr::year(1725)));
        assert_eq!(r.conflicts(), 1);
        assert_eq!(r.rejected, 1);
        assert_eq!(r.malformed, 1);
    }

    #[test]
    fn mapping_clauses() {
        let clauses = crate::terms::parse_clauses(
            "predicate(\"http://ex/nm\", preferred_name).\nclass(\"http://ex/P\", person).\nprefix(\"http://ex/id/\", ex).",
        )
        .unwrap();
        let mut m = TripleMapping::empty();
        m.map_predicate(RDF_TYPE, Field::Kind);
        m.apply_clauses(&clauses).unwrap();
        let src = "<http://ex/id/7> <http://www.w3.org/1999/02/22-rdf-syntax-ns#type> <http://ex/P> .\n<http://ex/id/7> <http://ex/nm> \"Anna Karsch\" .\n";
        let (c, _) = ingest_triples(src.as_bytes(), &m, &ScopeFilter::all(), "t").unwrap();
        assert_eq!(c.get_by_id("ex:7").unwrap().last_name, "Karsch");
    }
}
