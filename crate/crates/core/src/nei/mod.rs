//! Named entity identification: dates by parsing, persons and places by
//! store lookup plus ordered feature evaluation, steered by assistance
//! directives.

mod directives;
mod engine;
pub mod features;
mod result;

use thiserror::Error;

use crate::facts::EntityKind;

pub use directives::{load_directives, parse_directives, AssistanceDocument, Directive, DirectiveError, PARAM_NAMES};
pub use engine::{identify, Document, Settings};
pub use features::{FeatureOutcome, Lexicon, Links, NeiParams};
pub use result::{
    Candidate, DateOccurrence, DocumentResult, EvalCount, Explanation, NeiResult, NeiStats, Occurrence,
    OccurrenceResult, Provenance,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NeiError {
    #[error("directive refers to unknown entity `{0}`")]
    UnknownEntityInDirective(String),
    #[error("directive expects `{id}` to be a {expected}, but it is a {found}")]
    KindMismatch { id: String, expected: EntityKind, found: EntityKind },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("document `{0}` given twice")]
    DuplicateDocument(String),
    #[error("no occurrence at word {token} of `{doc}`")]
    UnknownOccurrence { doc: String, token: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::DateExpr;
    use crate::facts::{CacheSet, Entity};
    use crate::latex::CommandRegistry;

    fn gleim_cache() -> CacheSet {
        CacheSet::from_entities(
            [
                Entity::person("gnd:A", "Gleim, Johann Wilhelm Ludwig")
                    .with_birth(DateExpr::year(1719))
                    .with_death(DateExpr::year(1803))
                    .with_wikipedia("https://de.wikipedia.org/wiki/Johann_Wilhelm_Ludwig_Gleim")
                    .with_occupation("dichter"),
                Entity::person("gnd:B", "Gleim, Betty").with_birth(DateExpr::year(1830)),
            ],
            Vec::new(),
        )
    }

    fn doc(src: &str) -> Document {
        Document::from_source("letter", src, &CommandRegistry::default())
            .unwrap()
            .with_creation_date(Some(DateExpr::year(1775)))
    }

    fn run(src: &str, directives: &[Directive]) -> NeiResult {
        identify(&[doc(src)], &gleim_cache(), directives, &Settings::default()).unwrap()
    }

    #[test]
    fn date_filter_decides_between_namesakes() {
        let r = run("Ich habe an Gleim geschrieben.", &[]);
        let o = r.occurrence("letter", 3).unwrap();
        assert_eq!(o.chosen.as_deref(), Some("gnd:A"));
        assert_eq!(o.candidates[1].entity_id, "gnd:B");
        assert_eq!(o.candidates[1].outcomes[3].score, 2);
        assert!(o.candidates[1].outcomes[3].detail.contains("1830"));
        let ex = r.explain("letter", 3).unwrap();
        assert_eq!(ex.alternates.len(), 1);
        assert_eq!(ex.links.authority.as_deref(), Some("https://d-nb.info/gnd/A"));
        assert!(ex.links.encyclopedia.is_some());
    }

    #[test]
    fn forbid_suppresses() {
        let forbid = Directive::Forbid { surface: "Gleim".into(), doc: None };
        let r = run("Ich habe an Gleim geschrieben.", &[forbid]);
        let o = r.occurrence("letter", 3).unwrap();
        assert!(o.suppressed);
        assert_eq!(o.chosen, None);
        assert_eq!(o.provenance, Provenance::Directive);
        assert!(r.explain("letter", 3).unwrap().cause.contains("forbid"));
    }

    #[test]
    fn stopwords_get_no_candidates() {
        let r = run("Und Gleim", &[]);
        assert!(r.occurrence("letter", 0).is_none());
        assert!(r.explain("letter", 0).is_err());
    }

    #[test]
    fn unknown_directive_entity_is_an_error() {
        let fix = Directive::Fix { doc: "letter".into(), token: 0, entity_id: Some("gnd:Z".into()) };
        let err = identify(&[doc("Gleim")], &gleim_cache(), &[fix], &Settings::default()).unwrap_err();
        assert_eq!(err, NeiError::UnknownEntityInDirective("gnd:Z".into()));
    }

    #[test]
    fn alias_supplies_entity() {
        let alias = Directive::Alias { surface: "Gleimius".into(), kind: None, entity_id: "gnd:A".into() };
        let r = run("Gleimius kam.", &[alias]);
        let o = r.occurrence("letter", 0).unwrap();
        assert_eq!(o.chosen.as_deref(), Some("gnd:A"));
        assert_eq!(o.supplied.as_ref().unwrap().entity_id, "gnd:A");
    }

    #[test]
    fn anchor_breaks_tie_in_second_pass() {
        let cache = CacheSet::from_entities(
            [
                Entity::person("gnd:A", "Gleim, Johann Wilhelm Ludwig")
                    .with_birth(DateExpr::year(1719))
                    .with_death(DateExpr::year(1803))
                    .with_wikipedia("https://de.wikipedia.org/wiki/Gleim")
                    .with_occupation("dichter"),
                Entity::person("gnd:C", "Jacobi, Johann Georg").with_related("gnd:A"),
                Entity::person("gnd:D", "Jacobi, Friedrich Heinrich"),
            ],
            Vec::new(),
        );
        let src = "Der Dichter Gleim sandte mir neulich ein Paket mit seinen neuesten Versen, und Jacobi las.";
        let d = doc(src);
        let r = identify(&[d], &cache, &[], &Settings::default()).unwrap();
        let gleim = r.occurrence("letter", 2).unwrap();
        assert!(gleim.anchor);
        let jacobi = r.occurrence("letter", 13).unwrap();
        assert_eq!(jacobi.occurrence.surface, "Jacobi");
        assert_eq!(jacobi.chosen.as_deref(), Some("gnd:C"));
        assert_eq!(jacobi.candidates[0].outcomes[6].score, 0);
        assert_eq!(jacobi.candidates[1].outcomes[6].score, 1);
    }

    #[test]
    fn jsonl_round_trip() {
        let r = run("Am 3. Mai 1776 schrieb Gleim.", &[]);
        let d = &r.documents[0];
        assert_eq!(d.dates.len(), 1);
        assert_eq!(d.dates[0].entity_id, "date:1776-05-03");
        let text = d.to_jsonl();
        assert_eq!(DocumentResult::from_jsonl(&text).unwrap(), *d);
        assert!(text.lines().next().unwrap().starts_with("{\"record\":\"document\""));
    }
}
