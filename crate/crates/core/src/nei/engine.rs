use std::collections::{HashMap, HashSet};

use rayon::prelude::*;

use super::directives::Directive;
use super::features::{
    self, date_plausibility, gate, in_wikipedia, linked_in_context, occupation_in_context, passed, FeatureOutcome,
    Lexicon, Links, NeiParams, GATES, PIPELINE,
};
use super::result::{
    Candidate, DateOccurrence, DocumentResult, EvalCount, NeiResult, NeiStats, Occurrence, OccurrenceResult, Provenance,
};
use super::NeiError;
use crate::date::{parse_dates, DateExpr};
use crate::facts::{normalize_name, CacheSet, Entity, EntityKind, MatchClass};
use crate::latex::{find_commands, parse, CommandRegistry, Item, LatexError, PlainToken, Projection, Span};

/// One document prepared for identification.
#[derive(Debug, Clone)]
pub struct Document {
    pub id: String,
    pub creation_date: Option<DateExpr>,
    pub projection: Projection,
}

impl Document {
    /// Projects `items`; the creation date comes from a `\kbdated{...}`
    /// command when present.
    pub fn from_items(id: impl Into<String>, items: &[Item], registry: &CommandRegistry) -> Self {
        let creation_date = find_commands(items, "kbdated")
            .first()
            .and_then(|c| c.arg_text(0))
            .and_then(|t| t.trim().parse().ok());
        Document { id: id.into(), creation_date, projection: crate::latex::project(items, registry) }
    }

    pub fn from_source(id: impl Into<String>, source: &str, registry: &CommandRegistry) -> Result<Self, LatexError> {
        Ok(Document::from_items(id, &parse(source, registry)?, registry))
    }

    pub fn with_creation_date(mut self, d: Option<DateExpr>) -> Self {
        self.creation_date = d;
        self
    }
}

/// Identification settings after applying directives.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    pub params: NeiParams,
    pub lexicon: Lexicon,
}

/// Runs identification over `docs`.
///
/// Pass 1 gates every word, looks up persons by last name and places by
/// name, and scores candidates cheap-first. Candidates whose date and
/// wikipedia scores already rank them below the k-th best are not scored
/// further. Confident pass-1 heads become anchors; pass 2 rescores the
/// context features with those anchors in view. Directives apply last.
pub fn identify(
    docs: &[Document],
    cache: &CacheSet,
    directives: &[Directive],
    settings: &Settings,
) -> Result<NeiResult, NeiError> {
    let mut params = settings.params.clone();
    let mut lexicon = settings.lexicon.clone();
    let mut overrides = Overrides::default();
    for d in directives {
        match d {
            Directive::SetParam { name, value } => params.set(name, *value).map_err(NeiError::InvalidParam)?,
            Directive::AddStopword { word } => lexicon.add_stopword(word),
            Directive::AddCommonNoun { word } => lexicon.add_common_noun(word),
            Directive::FactBase { .. } => {}
            Directive::Alias { surface, kind, entity_id } => {
                check_entity(cache, entity_id, *kind)?;
                overrides.alias.insert(normalize_name(surface), (entity_id.clone(), d.to_string()));
            }
            Directive::Forbid { surface, doc } => {
                overrides.forbid.insert((normalize_name(surface), doc.clone()), d.to_string());
            }
            Directive::Fix { doc, token, entity_id } => {
                if let Some(id) = entity_id {
                    check_entity(cache, id, None)?;
                }
                overrides.fix.insert((doc.clone(), *token), (entity_id.clone(), d.to_string()));
            }
        }
    }

    let queries_before = cache.query_count();
    let mut order: Vec<&Document> = docs.iter().collect();
    order.sort_by(|a, b| a.id.cmp(&b.id));
    let mut stats = NeiStats::default();
    let mut tally = Tally::default();
    let mut documents = Vec::with_capacity(order.len());
    for doc in order {
        if documents.last().is_some_and(|d: &DocumentResult| d.doc_id == doc.id) {
            return Err(NeiError::DuplicateDocument(doc.id.clone()));
        }
        let run = DocRun::new(doc, cache, &params, &lexicon);
        let (result, t) = run.identify(&overrides);
        tally.add(&t);
        documents.push(result);
    }
    for (fix_doc, token) in overrides.fix.keys() {
        match documents.iter().find(|d| &d.doc_id == fix_doc) {
            Some(d) if *token >= d.word_count => {
                stats.warnings.push(format!("fix for {fix_doc} word {token}: document has only {} words", d.word_count))
            }
            _ => {}
        }
    }

    stats.documents = documents.len();
    for d in &documents {
        stats.words += d.word_count;
        stats.occurrences += d.occurrences.len();
        stats.identified += d.identified();
        stats.suppressed += d.suppressed();
        stats.directive_decisions += d.occurrences.iter().filter(|o| o.provenance == Provenance::Directive).count();
        stats.anchors += d.occurrences.iter().filter(|o| o.anchor).count();
        stats.dates += d.dates.len();
    }
    stats.store_queries = cache.query_count() - queries_before;
    for (i, f) in PIPELINE.iter().enumerate() {
        stats.pass1.insert(f.to_string(), tally.pass1[i]);
        if i >= GATES + 2 {
            stats.pass2.insert(f.to_string(), tally.pass2[i]);
        }
    }
    Ok(NeiResult { documents, stats })
}

fn check_entity(cache: &CacheSet, id: &str, kind: Option<EntityKind>) -> Result<(), NeiError> {
    match cache.get_by_id(id) {
        None => Err(NeiError::UnknownEntityInDirective(id.to_string())),
        Some(e) if kind.is_some_and(|k| k != e.kind) => Err(NeiError::KindMismatch {
            id: id.to_string(),
            expected: kind.expect("checked above"),
            found: e.kind,
        }),
        Some(_) => Ok(()),
    }
}

#[derive(Default)]
struct Overrides {
    /// normalized surface → (entity id, directive text)
    alias: HashMap<String, (String, String)>,
    /// (normalized surface, document scope) → directive text
    forbid: HashMap<(String, Option<String>), String>,
    /// (document, word index) → (entity id or suppression, directive text)
    fix: HashMap<(String, usize), (Option<String>, String)>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Tally {
    pass1: [EvalCount; 7],
    pass2: [EvalCount; 7],
}

impl Tally {
    fn add(&mut self, o: &Tally) {
        for i in 0..PIPELINE.len() {
            for (a, b) in [(&mut self.pass1[i], &o.pass1[i]), (&mut self.pass2[i], &o.pass2[i])] {
                a.occurrences += b.occurrences;
                a.candidates += b.candidates;
            }
        }
    }

    fn count(slot: &mut EvalCount, candidates: usize) {
        slot.occurrences += 1;
        slot.candidates += candidates as u64;
    }
}

const DATE: usize = GATES;
const WIKI: usize = GATES + 1;
const OCCUPATION: usize = GATES + 2;
const LINKED: usize = GATES + 3;

/// A candidate while it is being scored.
struct Scored<'c> {
    entity: &'c Entity,
    class: MatchClass,
    outcomes: Vec<FeatureOutcome>,
}

impl Scored<'_> {
    fn key(&self) -> Vec<u8> {
        self.outcomes.iter().map(|o| o.score).collect()
    }
}

struct Pass1<'c> {
    token: usize,
    gates: Vec<FeatureOutcome>,
    /// Every candidate that survived pruning, sorted.
    survivors: Vec<Scored<'c>>,
}

struct DocRun<'a> {
    doc: &'a Document,
    cache: &'a CacheSet,
    params: &'a NeiParams,
    lexicon: &'a Lexicon,
    words: Vec<&'a PlainToken>,
    keys: Vec<String>,
}

impl<'a> DocRun<'a> {
    fn new(doc: &'a Document, cache: &'a CacheSet, params: &'a NeiParams, lexicon: &'a Lexicon) -> Self {
        let words: Vec<&PlainToken> = doc.projection.words().collect();
        let keys = words.iter().map(|w| normalize_name(&w.text)).collect();
        DocRun { doc, cache, params, lexicon, words, keys }
    }

    fn window(&self, t: usize) -> std::ops::Range<usize> {
        t.saturating_sub(self.params.window)..(t + self.params.window + 1).min(self.words.len())
    }

    fn window_words(&self, t: usize) -> Vec<&str> {
        self.window(t).filter(|&i| i != t).map(|i| self.keys[i].as_str()).collect()
    }

    fn identify(&self, overrides: &Overrides) -> (DocumentResult, Tally) {
        let (dates, date_words) = self.dates();

        // Pass 1.
        let pass1: Vec<(Option<Pass1<'a>>, Tally)> = (0..self.words.len())
            .into_par_iter()
            .with_min_len(256)
            .map(|t| {
                let mut tally = Tally::default();
                let r = if date_words.contains(&t) { None } else { self.pass1(t, &mut tally) };
                (r, tally)
            })
            .collect();
        let mut tally = Tally::default();
        let mut found = Vec::new();
        for (r, t) in pass1 {
            tally.add(&t);
            found.extend(r);
        }

        // Anchors: confident heads that beat their runner-up.
        let anchor_cut = self.params.anchor_rank;
        let anchors: Vec<(usize, &str)> = found
            .iter()
            .filter_map(|p| {
                let head = p.survivors.first()?;
                let confident = [DATE, WIKI, OCCUPATION].iter().all(|&i| head.outcomes[i].score <= anchor_cut);
                let unique = p.survivors.get(1).is_none_or(|second| head.key() < second.key());
                (confident && unique).then_some((p.token, head.entity.id.as_str()))
            })
            .collect();
        let anchor_tokens: HashSet<usize> = anchors.iter().map(|a| a.0).collect();

        // Pass 2.
        let pass2: Vec<(OccurrenceResult, Tally)> = found
            .into_par_iter()
            .map(|p| {
                let mut tally = Tally::default();
                let r = self.pass2(p, &anchors, &anchor_tokens, &mut tally);
                (r, tally)
            })
            .collect();
        let mut occurrences = Vec::with_capacity(pass2.len());
        for (r, t) in pass2 {
            tally.add(&t);
            occurrences.push(r);
        }

        self.apply_overrides(&mut occurrences, overrides);
        let result = DocumentResult {
            doc_id: self.doc.id.clone(),
            creation_date: self.doc.creation_date,
            word_count: self.words.len(),
            occurrences,
            dates,
        };
        (result, tally)
    }

    fn dates(&self) -> (Vec<DateOccurrence>, HashSet<usize>) {
        let tokens = &self.doc.projection.tokens;
        let mut covered = HashSet::new();
        let mut out = Vec::new();
        for m in parse_dates(tokens) {
            let range = &tokens[m.tokens.clone()];
            let word_indices: Vec<usize> = range.iter().filter_map(|t| t.word_index).collect();
            let Some(&first) = word_indices.first() else { continue };
            covered.extend(word_indices.iter().copied());
            let span = Span::new(range[0].span.start, range[range.len() - 1].span.end);
            let iso = m.date.iso();
            out.push(DateOccurrence {
                doc_id: self.doc.id.clone(),
                token_index: first,
                word_count: word_indices.len(),
                surface: {
                    let last = &range[range.len() - 1];
                    self.doc.projection.text[range[0].plain_start..last.plain_start + last.text.len()].to_string()
                },
                source_span: span,
                date: m.date,
                entity_id: format!("date:{iso}"),
                outcome: FeatureOutcome::new(features::PARSED_DATE, 0, format!("parsed as {iso}")),
            });
        }
        (out, covered)
    }

    fn pass1(&self, t: usize, tally: &mut Tally) -> Option<Pass1<'a>> {
        let surface = &self.words[t].text;
        let gates = gate(surface, &self.keys[t], self.lexicon, self.params);
        for i in 0..gates.len() {
            Tally::count(&mut tally.pass1[i], 1);
        }
        if !passed(&gates) {
            return None;
        }
        let mut cands: Vec<Scored<'a>> = Vec::new();
        for kind in EntityKind::ALL {
            for (entity, class) in self.cache.lookup_key(&self.keys[t], kind, self.params.candidate_limit) {
                cands.push(Scored { entity, class, outcomes: gates.clone() });
            }
        }
        if cands.is_empty() {
            return None;
        }
        let creation = self.doc.creation_date;
        for c in &mut cands {
            c.outcomes.push(date_plausibility(c.entity, creation));
            c.outcomes.push(in_wikipedia(c.entity));
        }
        Tally::count(&mut tally.pass1[DATE], cands.len());
        Tally::count(&mut tally.pass1[WIKI], cands.len());

        // Anything whose (date, wikipedia) prefix is worse than the k-th
        // best prefix cannot reach the top k.
        let mut prefixes: Vec<(u8, u8)> = cands.iter().map(|c| (c.outcomes[DATE].score, c.outcomes[WIKI].score)).collect();
        prefixes.sort_unstable();
        let cut = prefixes[(self.params.k - 1).min(prefixes.len() - 1)];
        cands.retain(|c| (c.outcomes[DATE].score, c.outcomes[WIKI].score) <= cut);

        let window = self.window_words(t);
        for c in &mut cands {
            c.outcomes.push(occupation_in_context(c.entity, &window));
            c.outcomes.push(linked_in_context(c.entity, &[]));
        }
        Tally::count(&mut tally.pass1[OCCUPATION], cands.len());
        Tally::count(&mut tally.pass1[LINKED], cands.len());
        sort_candidates(&mut cands);
        Some(Pass1 { token: t, gates, survivors: cands })
    }

    fn pass2(
        &self,
        mut p: Pass1<'a>,
        anchors: &[(usize, &str)],
        anchor_tokens: &HashSet<usize>,
        tally: &mut Tally,
    ) -> OccurrenceResult {
        let t = p.token;
        let range = self.window(t);
        let lo = anchors.partition_point(|a| a.0 < range.start);
        let hi = anchors.partition_point(|a| a.0 < range.end);
        let near: Vec<(usize, &str)> = anchors[lo..hi].iter().copied().filter(|a| a.0 != t).collect();
        let window = self.window_words(t);
        for c in &mut p.survivors {
            c.outcomes[OCCUPATION] = occupation_in_context(c.entity, &window);
            c.outcomes[LINKED] = linked_in_context(c.entity, &near);
        }
        Tally::count(&mut tally.pass2[OCCUPATION], p.survivors.len());
        Tally::count(&mut tally.pass2[LINKED], p.survivors.len());
        sort_candidates(&mut p.survivors);
        p.survivors.truncate(self.params.k);
        let candidates: Vec<Candidate> = p.survivors.into_iter().map(to_candidate).collect();
        debug_assert!(p.gates.len() == GATES);
        OccurrenceResult {
            occurrence: self.occurrence(t),
            chosen: candidates.first().map(|c| c.entity_id.clone()),
            candidates,
            provenance: Provenance::Automatic,
            suppressed: false,
            cause: None,
            supplied: None,
            anchor: anchor_tokens.contains(&t),
        }
    }

    fn occurrence(&self, t: usize) -> Occurrence {
        Occurrence {
            doc_id: self.doc.id.clone(),
            token_index: t,
            surface: self.words[t].text.clone(),
            source_span: self.words[t].span,
        }
    }

    /// Alias, then forbid, then fix: the most specific directive wins.
    fn apply_overrides(&self, occs: &mut Vec<OccurrenceResult>, ov: &Overrides) {
        if ov.alias.is_empty() && ov.forbid.is_empty() && ov.fix.is_empty() {
            return;
        }
        let doc_id = &self.doc.id;
        let mut by_token: HashMap<usize, usize> = occs.iter().enumerate().map(|(i, o)| (o.occurrence.token_index, i)).collect();
        for t in 0..self.words.len() {
            let key = &self.keys[t];
            let alias = ov.alias.get(key);
            let forbid = ov
                .forbid
                .get(&(key.clone(), Some(doc_id.clone())))
                .or_else(|| ov.forbid.get(&(key.clone(), None)));
            let fix = ov.fix.get(&(doc_id.clone(), t));
            if alias.is_none() && forbid.is_none() && fix.is_none() {
                continue;
            }
            let idx = *by_token.entry(t).or_insert_with(|| {
                occs.push(OccurrenceResult {
                    occurrence: self.occurrence(t),
                    candidates: Vec::new(),
                    chosen: None,
                    provenance: Provenance::Automatic,
                    suppressed: false,
                    cause: None,
                    supplied: None,
                    anchor: false,
                });
                occs.len() - 1
            });
            let o = &mut occs[idx];
            let mut decide = |id: Option<&String>, cause: &String| {
                o.provenance = Provenance::Directive;
                o.cause = Some(cause.clone());
                o.suppressed = id.is_none();
                o.chosen = id.cloned();
                o.supplied = id
                    .filter(|id| !o.candidates.iter().any(|c| &c.entity_id == *id))
                    .and_then(|id| self.cache.get_by_id(id))
                    .map(supplied_candidate);
            };
            if let Some((id, cause)) = alias {
                decide(Some(id), cause);
            }
            if let Some(cause) = forbid {
                decide(None, cause);
            }
            if let Some((id, cause)) = fix {
                decide(id.as_ref(), cause);
            }
        }
        occs.sort_by_key(|o| o.occurrence.token_index);
    }
}

fn sort_candidates(c: &mut [Scored<'_>]) {
    c.sort_by(|a, b| a.key().cmp(&b.key()).then_with(|| a.entity.id.cmp(&b.entity.id)));
}

fn to_candidate(s: Scored<'_>) -> Candidate {
    Candidate {
        entity_id: s.entity.id.clone(),
        kind: s.entity.kind,
        name: s.entity.preferred_name.clone(),
        match_class: s.class,
        rank_key: s.key(),
        outcomes: s.outcomes,
        links: Links::for_entity(s.entity),
    }
}

fn supplied_candidate(e: &Entity) -> Candidate {
    Candidate {
        entity_id: e.id.clone(),
        kind: e.kind,
        name: e.preferred_name.clone(),
        match_class: MatchClass::ExactPreferred,
        rank_key: Vec::new(),
        outcomes: Vec::new(),
        links: Links::for_entity(e),
    }
}
