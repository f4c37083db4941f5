use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::date::DateExpr;
use crate::facts::{normalize_name, Entity, EntityKind};

pub const IS_NO_STOPWORD: &str = "is-no-stopword";
pub const IS_NO_COMMON_SUBSTANTIVE: &str = "is-no-common-substantive";
pub const HAS_NAME_SHAPE: &str = "has-name-shape";
pub const DATE_MATCHES_CONTEXT: &str = "date-of-birth-matches-context";
pub const IS_IN_WIKIPEDIA: &str = "is-in-wikipedia";
pub const OCCUPATION_IN_CONTEXT: &str = "has-an-occupation-mentioned-in-context";
pub const LINKED_IN_CONTEXT: &str = "is-linked-to-others-identified-in-context";
pub const PARSED_DATE: &str = "parsed-date";

/// Features in evaluation order; a rank key lists their scores in this order.
pub const PIPELINE: [&str; 7] = [
    IS_NO_STOPWORD,
    IS_NO_COMMON_SUBSTANTIVE,
    HAS_NAME_SHAPE,
    DATE_MATCHES_CONTEXT,
    IS_IN_WIKIPEDIA,
    OCCUPATION_IN_CONTEXT,
    LINKED_IN_CONTEXT,
];

pub const GATES: usize = 3;

/// Scores: 0 favorable, 1 neutral or unknown, 2 unfavorable.
pub const MAX_SCORE: u8 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOutcome {
    pub feature: String,
    pub score: u8,
    pub detail: String,
}

impl FeatureOutcome {
    pub fn new(feature: &str, score: u8, detail: impl Into<String>) -> Self {
        debug_assert!(score <= MAX_SCORE);
        FeatureOutcome { feature: feature.to_string(), score, detail: detail.into() }
    }
}

/// Tunable identification parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeiParams {
    /// Candidates kept per occurrence.
    pub k: usize,
    /// Context words on each side of an occurrence.
    pub window: usize,
    /// A pass-1 head becomes an anchor when its date, wikipedia and
    /// occupation scores are all at most this value and it strictly beats
    /// the runner-up.
    pub anchor_rank: u8,
    /// Matches fetched from the store per kind before ranking.
    pub candidate_limit: usize,
    /// Shorter words never get candidates.
    pub min_word_length: usize,
}

impl Default for NeiParams {
    fn default() -> Self {
        NeiParams { k: 5, window: 50, anchor_rank: 0, candidate_limit: 1000, min_word_length: 2 }
    }
}

impl NeiParams {
    pub fn set(&mut self, name: &str, value: i64) -> Result<(), String> {
        let positive = |v: i64| usize::try_from(v).ok().filter(|&v| v >= 1).ok_or(format!("{name} must be ≥ 1, got {v}"));
        match name {
            "k" => self.k = positive(value)?,
            "window" => self.window = usize::try_from(value).map_err(|_| format!("window must be ≥ 0, got {value}"))?,
            "anchor_rank" => {
                self.anchor_rank = u8::try_from(value)
                    .ok()
                    .filter(|&v| v <= MAX_SCORE)
                    .ok_or(format!("anchor_rank must be 0..=2, got {value}"))?
            }
            "candidate_limit" => self.candidate_limit = positive(value)?,
            "min_word_length" => self.min_word_length = positive(value)?,
            other => return Err(format!("unknown parameter `{other}`")),
        }
        Ok(())
    }
}

const DEFAULT_STOPWORDS: &str = "
aber alle allem allen aller alles als also am an andere anderen auch auf aus bei beim bin bis bist da dabei damit dann
das dass daß dem den denen denn der des dessen dich die dies diese diesem diesen dieser dieses dir doch dort du durch
ein eine einem einen einer eines er es etwas euch euer eure für gegen gewesen hab habe haben hat hatte hätte hier hin
ich ihm ihn ihnen ihr ihre ihrem ihren ihrer im in indem ins ist ja jede jedem jeden jeder jedes jetzt kann kein keine
können man manche mehr mein meine meinem meinen meiner mich mir mit muss muß nach nicht nichts noch nun nur ob oder
ohne schon sehr sein seine seinem seinen seiner sich sie sind so solche soll sollte sondern sonst über um und uns
unser unsere unter viel vom von vor wann war waren warum was weil welche welchem welchen welcher welches wenn wer
werde werden wie wieder will wir wird wo wurde würde zu zum zur zwar zwischen
a an and are as at be but by for from had has have he her his i in is it its my of on or she that the their this
to was were which with you your
";

const DEFAULT_COMMON_NOUNS: &str = "
anfang antwort arbeit art augenblick brief briefe bruder buch bücher dank dichter dichtung ende frau frau freund
freunde freundin freundschaft gedicht gedichte geist gesundheit gott hand haus herr herz jahr jahre kopf kunst
leben liebe mensch menschen monat nachricht natur ode oden post sache schrift seele sohn stadt stunde tag tage
tochter vater welt werk werke woche wort worte zeit zeitung
";

/// Stopwords and common nouns that gate occurrences before lookup.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lexicon {
    stopwords: HashSet<String>,
    common_nouns: HashSet<String>,
}

impl Default for Lexicon {
    fn default() -> Self {
        let words = |s: &str| s.split_whitespace().map(normalize_name).collect();
        Lexicon { stopwords: words(DEFAULT_STOPWORDS), common_nouns: words(DEFAULT_COMMON_NOUNS) }
    }
}

impl Lexicon {
    pub fn empty() -> Self {
        Lexicon { stopwords: HashSet::new(), common_nouns: HashSet::new() }
    }

    pub fn add_stopword(&mut self, w: &str) {
        self.stopwords.insert(normalize_name(w));
    }

    pub fn add_common_noun(&mut self, w: &str) {
        self.common_nouns.insert(normalize_name(w));
    }

    /// Adds one common noun per line; `#` starts a comment.
    pub fn load_common_nouns(&mut self, path: &Path) -> std::io::Result<usize> {
        let text = std::fs::read_to_string(path)?;
        let mut n = 0;
        for line in text.lines() {
            let w = line.split('#').next().unwrap_or("").trim();
            if !w.is_empty() {
                self.add_common_noun(w);
                n += 1;
            }
        }
        Ok(n)
    }

    pub fn is_stopword(&self, key: &str) -> bool {
        self.stopwords.contains(key)
    }

    pub fn is_common_noun(&self, key: &str) -> bool {
        self.common_nouns.contains(key)
    }
}

/// Gate outcomes for a word, stopping at the first failing gate. `key` is
/// the normalized surface.
pub fn gate(surface: &str, key: &str, lexicon: &Lexicon, params: &NeiParams) -> Vec<FeatureOutcome> {
    let mut out = Vec::with_capacity(GATES);
    if lexicon.is_stopword(key) {
        out.push(FeatureOutcome::new(IS_NO_STOPWORD, 2, format!("`{surface}` is a stopword")));
        return out;
    }
    out.push(FeatureOutcome::new(IS_NO_STOPWORD, 0, "not a stopword"));
    if lexicon.is_common_noun(key) {
        out.push(FeatureOutcome::new(IS_NO_COMMON_SUBSTANTIVE, 2, format!("`{surface}` is a common noun")));
        return out;
    }
    out.push(FeatureOutcome::new(IS_NO_COMMON_SUBSTANTIVE, 0, "not a common noun"));
    let capitalized = surface.chars().next().is_some_and(char::is_uppercase);
    let long_enough = surface.chars().count() >= params.min_word_length;
    let alphabetic = surface.chars().all(|c| c.is_alphabetic() || c == '-' || c == '\'');
    if capitalized && long_enough && alphabetic {
        out.push(FeatureOutcome::new(HAS_NAME_SHAPE, 0, "capitalized word"));
    } else {
        let why = if !alphabetic {
            "contains non-letters"
        } else if !capitalized {
            "not capitalized"
        } else {
            "too short"
        };
        out.push(FeatureOutcome::new(HAS_NAME_SHAPE, 2, why));
    }
    out
}

pub fn passed(gates: &[FeatureOutcome]) -> bool {
    gates.len() == GATES && gates.iter().all(|g| g.score == 0)
}

/// Birth and death years against the creation year of the text.
pub fn date_plausibility(e: &Entity, creation: Option<DateExpr>) -> FeatureOutcome {
    let f = DATE_MATCHES_CONTEXT;
    if e.kind != EntityKind::Person {
        return FeatureOutcome::new(f, 1, "not applicable to places");
    }
    let Some(c) = creation.map(|d| d.year) else {
        return FeatureOutcome::new(f, 1, "text has no creation date");
    };
    let birth = e.birth.map(|d| d.year);
    let death = e.death.map(|d| d.year);
    if let Some(b) = birth.filter(|&b| b > c) {
        return FeatureOutcome::new(f, 2, format!("born {b}, after the text was written ({c})"));
    }
    if let Some(d) = death.filter(|&d| d + 5 < c - 120) {
        return FeatureOutcome::new(f, 2, format!("died {d}, long before the text was written ({c})"));
    }
    match (birth, death) {
        (Some(b), Some(d)) if b <= c && c <= d => {
            FeatureOutcome::new(f, 0, format!("lifespan {b}-{d} contains {c}"))
        }
        (None, None) => FeatureOutcome::new(f, 1, "no life dates"),
        (b, d) => FeatureOutcome::new(
            f,
            1,
            format!(
                "life dates {}-{} do not settle {c}",
                b.map_or("?".to_string(), |y| y.to_string()),
                d.map_or("?".to_string(), |y| y.to_string())
            ),
        ),
    }
}

pub fn in_wikipedia(e: &Entity) -> FeatureOutcome {
    if e.has_wikipedia {
        FeatureOutcome::new(IS_IN_WIKIPEDIA, 0, "has a Wikipedia article")
    } else {
        FeatureOutcome::new(IS_IN_WIKIPEDIA, 1, "no Wikipedia article")
    }
}

/// Favorable when every word of some occupation occurs among the window
/// words (already normalized).
pub fn occupation_in_context(e: &Entity, window: &[&str]) -> FeatureOutcome {
    for occ in &e.occupations {
        let key = normalize_name(occ);
        if !key.is_empty() && key.split(' ').all(|part| window.contains(&part)) {
            return FeatureOutcome::new(OCCUPATION_IN_CONTEXT, 0, format!("occupation `{occ}` mentioned nearby"));
        }
    }
    let detail = if e.occupations.is_empty() { "no known occupation" } else { "no occupation mentioned nearby" };
    FeatureOutcome::new(OCCUPATION_IN_CONTEXT, 1, detail)
}

/// Favorable when the entity is related to an anchor inside the window.
/// `anchors` holds `(word index, entity id)` pairs already restricted to the
/// window.
pub fn linked_in_context(e: &Entity, anchors: &[(usize, &str)]) -> FeatureOutcome {
    let mut hit = anchors.iter().filter(|(_, id)| e.related_ids.contains(*id));
    match hit.next() {
        Some((tok, id)) => FeatureOutcome::new(LINKED_IN_CONTEXT, 0, format!("related to {id} identified at word {tok}")),
        None if anchors.is_empty() => FeatureOutcome::new(LINKED_IN_CONTEXT, 1, "no identified entities nearby"),
        None => FeatureOutcome::new(LINKED_IN_CONTEXT, 1, "not related to identified entities nearby"),
    }
}

/// External links shown with a candidate.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Links {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub authority: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub encyclopedia: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
}

impl Links {
    pub fn for_entity(e: &Entity) -> Links {
        let authority = match e.id.split_once(':') {
            Some(("gnd", local)) => Some(format!("https://d-nb.info/gnd/{local}")),
            Some(("geo", local)) => Some(format!("https://www.geonames.org/{local}")),
            Some(("wd", local)) => Some(format!("https://www.wikidata.org/wiki/{local}")),
            _ if e.id.starts_with("http") => Some(e.id.clone()),
            _ => None,
        };
        let encyclopedia = e.external_links.iter().find(|l| l.contains("wikipedia.org/")).cloned();
        let map = match (e.latitude, e.longitude) {
            (Some(lat), Some(lon)) => Some(format!("https://geohack.toolforge.org/geohack.php?params={lat};{lon}")),
            _ => None,
        };
        Links { authority, encyclopedia, map }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn person(birth: Option<i32>, death: Option<i32>) -> Entity {
        let mut e = Entity::person("gnd:1", "Gleim");
        e.birth = birth.map(DateExpr::year);
        e.death = death.map(DateExpr::year);
        e
    }

    #[test]
    fn date_rule() {
        let c = Some(DateExpr::year(1775));
        assert_eq!(date_plausibility(&person(Some(1719), Some(1803)), c).score, 0);
        assert_eq!(date_plausibility(&person(Some(1830), None), c).score, 2);
        assert_eq!(date_plausibility(&person(None, Some(1649)), c).score, 2);
        assert_eq!(date_plausibility(&person(None, Some(1650)), c).score, 1);
        assert_eq!(date_plausibility(&person(Some(1700), None), c).score, 1);
        assert_eq!(date_plausibility(&person(None, None), c).score, 1);
        assert_eq!(date_plausibility(&person(Some(1719), Some(1803)), None).score, 1);
        assert_eq!(date_plausibility(&Entity::place("geo:1", "Halberstadt"), c).score, 1);
    }

    #[test]
    fn gates_stop_at_first_failure() {
        let lex = Lexicon::default();
        let p = NeiParams::default();
        let g = gate("und", "und", &lex, &p);
        assert_eq!(g.len(), 1);
        assert!(!passed(&g));
        let g = gate("Freund", "freund", &lex, &p);
        assert_eq!((g.len(), g[1].score), (2, 2));
        assert!(passed(&gate("Gleim", "gleim", &lex, &p)));
        assert!(!passed(&gate("gleim", "gleim", &lex, &p)));
        assert!(!passed(&gate("1776", "1776", &lex, &p)));
    }

    #[test]
    fn context_features() {
        let e = person(None, None).with_occupation("Dichter").with_related("gnd:2");
        assert_eq!(occupation_in_context(&e, &["der", "dichter"]).score, 0);
        assert_eq!(occupation_in_context(&e, &["der", "maler"]).score, 1);
        assert_eq!(linked_in_context(&e, &[(3, "gnd:2")]).score, 0);
        assert_eq!(linked_in_context(&e, &[(3, "gnd:3")]).score, 1);
    }

    #[test]
    fn params_validate() {
        let mut p = NeiParams::default();
        p.set("k", 3).unwrap();
        assert_eq!(p.k, 3);
        assert!(p.set("k", 0).is_err());
        assert!(p.set("anchor_rank", 3).is_err());
        assert!(p.set("nope", 1).is_err());
    }
}
