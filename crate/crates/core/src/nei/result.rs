use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::features::{FeatureOutcome, Links, PIPELINE};
use super::NeiError;
use crate::date::DateExpr;
use crate::facts::{EntityKind, MatchClass};
use crate::latex::Span;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Automatic,
    Directive,
}

/// A single word of a document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Occurrence {
    pub doc_id: String,
    /// Index among the document's words.
    pub token_index: usize,
    pub surface: String,
    pub source_span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    pub entity_id: String,
    pub kind: EntityKind,
    pub name: String,
    pub match_class: MatchClass,
    /// Scores of `outcomes`, in pipeline order. Empty for entities supplied
    /// by a directive.
    pub rank_key: Vec<u8>,
    pub outcomes: Vec<FeatureOutcome>,
    pub links: Links,
}

impl Candidate {
    /// Rank key recomputed from the outcomes alone.
    pub fn key_from_outcomes(&self) -> Vec<u8> {
        PIPELINE
            .iter()
            .filter_map(|f| self.outcomes.iter().find(|o| o.feature == *f).map(|o| o.score))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OccurrenceResult {
    pub occurrence: Occurrence,
    /// Candidates in rank order: by rank key, then entity id.
    pub candidates: Vec<Candidate>,
    pub chosen: Option<String>,
    pub provenance: Provenance,
    pub suppressed: bool,
    /// The directive that decided this occurrence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<String>,
    /// Entity chosen by a directive that is not among the candidates.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub supplied: Option<Candidate>,
    /// Whether the pass-1 head served as context for other occurrences.
    pub anchor: bool,
}

impl OccurrenceResult {
    pub fn chosen_candidate(&self) -> Option<&Candidate> {
        let id = self.chosen.as_deref()?;
        self.candidates
            .iter()
            .find(|c| c.entity_id == id)
            .or(self.supplied.as_ref().filter(|c| c.entity_id == id))
    }

    pub fn head(&self) -> Option<&Candidate> {
        self.candidates.first()
    }
}

/// A date recognized by parsing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateOccurrence {
    pub doc_id: String,
    /// First word covered by the date.
    pub token_index: usize,
    /// Number of words covered.
    pub word_count: usize,
    pub surface: String,
    pub source_span: Span,
    pub date: DateExpr,
    /// `date:` followed by the ISO form.
    pub entity_id: String,
    pub outcome: FeatureOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentResult {
    pub doc_id: String,
    pub creation_date: Option<DateExpr>,
    pub word_count: usize,
    /// Word occurrences with candidates or directive decisions, by token index.
    pub occurrences: Vec<OccurrenceResult>,
    pub dates: Vec<DateOccurrence>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Document { doc_id: String, creation_date: Option<DateExpr>, word_count: usize },
    Occurrence(OccurrenceResult),
    Date(DateOccurrence),
}

impl DocumentResult {
    pub fn occurrence(&self, token_index: usize) -> Option<&OccurrenceResult> {
        self.occurrences
            .binary_search_by_key(&token_index, |o| o.occurrence.token_index)
            .ok()
            .map(|i| &self.occurrences[i])
    }

    pub fn identified(&self) -> usize {
        self.occurrences.iter().filter(|o| o.chosen.is_some()).count()
    }

    pub fn suppressed(&self) -> usize {
        self.occurrences.iter().filter(|o| o.suppressed).count()
    }

    /// Line-delimited JSON: one `document` record, then one `occurrence`
    /// record per occurrence in token order, then one `date` record per
    /// date. Field order is fixed by the type definitions.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut line = |r: &Record| {
            out.push_str(&serde_json::to_string(r).expect("result records serialize"));
            out.push('\n');
        };
        line(&Record::Document {
            doc_id: self.doc_id.clone(),
            creation_date: self.creation_date,
            word_count: self.word_count,
        });
        for o in &self.occurrences {
            line(&Record::Occurrence(o.clone()));
        }
        for d in &self.dates {
            line(&Record::Date(d.clone()));
        }
        out
    }

    pub fn from_jsonl(src: &str) -> Result<DocumentResult, serde_json::Error> {
        let mut doc: Option<DocumentResult> = None;
        for line in src.lines().filter(|l| !l.trim().is_empty()) {
            match serde_json::from_str::<Record>(line)? {
                Record::Document { doc_id, creation_date, word_count } => {
                    doc = Some(DocumentResult { doc_id, creation_date, word_count, occurrences: Vec::new(), dates: Vec::new() })
                }
                Record::Occurrence(o) => doc.as_mut().ok_or_else(missing_header)?.occurrences.push(o),
                Record::Date(d) => doc.as_mut().ok_or_else(missing_header)?.dates.push(d),
            }
        }
        doc.ok_or_else(missing_header)
    }
}

fn missing_header() -> serde_json::Error {
    <serde_json::Error as serde::de::Error>::custom("result file does not start with a document record")
}

/// How often a feature ran.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCount {
    /// Occurrences at which the feature ran.
    pub occurrences: u64,
    /// Candidate evaluations (gates count one per occurrence).
    pub candidates: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeiStats {
    pub documents: usize,
    pub words: usize,
    pub occurrences: usize,
    pub identified: usize,
    pub suppressed: usize,
    pub directive_decisions: usize,
    pub anchors: usize,
    pub dates: usize,
    pub store_queries: u64,
    pub pass1: BTreeMap<String, EvalCount>,
    pub pass2: BTreeMap<String, EvalCount>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeiResult {
    /// Sorted by document id.
    pub documents: Vec<DocumentResult>,
    pub stats: NeiStats,
}

impl NeiResult {
    pub fn document(&self, doc_id: &str) -> Option<&DocumentResult> {
        self.documents
            .binary_search_by(|d| d.doc_id.as_str().cmp(doc_id))
            .ok()
            .map(|i| &self.documents[i])
    }

    pub fn occurrence(&self, doc_id: &str, token_index: usize) -> Option<&OccurrenceResult> {
        self.document(doc_id)?.occurrence(token_index)
    }

    pub fn explain(&self, doc_id: &str, token_index: usize) -> Result<Explanation, NeiError> {
        let occ = self.occurrence(doc_id, token_index).ok_or_else(|| NeiError::UnknownOccurrence {
            doc: doc_id.to_string(),
            token: token_index,
        })?;
        Ok(Explanation::of(occ))
    }
}

/// Why an occurrence was resolved the way it was.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Explanation {
    pub occurrence: Occurrence,
    pub chosen: Option<Candidate>,
    pub provenance: Provenance,
    pub suppressed: bool,
    pub cause: String,
    /// All other candidates in rank order.
    pub alternates: Vec<Candidate>,
    pub links: Links,
}

impl Explanation {
    pub fn of(o: &OccurrenceResult) -> Explanation {
        let chosen = o.chosen_candidate().cloned();
        let cause = match (&o.cause, &chosen) {
            (Some(directive), _) if o.suppressed => format!("suppressed by directive {directive}"),
            (Some(directive), _) => format!("chosen by directive {directive}"),
            (None, Some(c)) => {
                let favorable: Vec<&str> = c.outcomes.iter().skip(3).filter(|x| x.score == 0).map(|x| x.detail.as_str()).collect();
                if favorable.is_empty() {
                    "ranked first; no feature was favorable".to_string()
                } else {
                    format!("ranked first: {}", favorable.join("; "))
                }
            }
            (None, None) => "no candidate".to_string(),
        };
        let alternates = o
            .candidates
            .iter()
            .filter(|c| Some(c.entity_id.as_str()) != o.chosen.as_deref())
            .cloned()
            .collect();
        let links = chosen.as_ref().map(|c| c.links.clone()).unwrap_or_default();
        Explanation {
            occurrence: o.occurrence.clone(),
            chosen,
            provenance: o.provenance,
            suppressed: o.suppressed,
            cause,
            alternates,
            links,
        }
    }
}
