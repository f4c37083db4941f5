use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use scriptorium::date::DateExpr;
use scriptorium::facts::{CacheSet, Entity};
use scriptorium::latex::CommandRegistry;
use scriptorium::nei::{parse_directives, Document, Explanation, Provenance, Settings};
use scriptorium::review::{router, DocumentSummary, OccurrencePage, ReviewService, Summary};
use serde_json::{json, Value};
use tower::ServiceExt;

fn cache() -> CacheSet {
    CacheSet::from_entities(
        [
            Entity::person("gnd:A", "Gleim, Johann Wilhelm Ludwig")
                .with_birth(DateExpr::year(1719))
                .with_death(DateExpr::year(1803))
                .with_wikipedia("https://de.wikipedia.org/wiki/Johann_Wilhelm_Ludwig_Gleim"),
            Entity::person("gnd:B", "Gleim, Betty").with_birth(DateExpr::year(1830)),
            Entity::place("geo:1", "Halberstadt"),
        ],
        Vec::new(),
    )
}

fn service(dir: &tempfile::TempDir) -> Arc<ReviewService> {
    let reg = CommandRegistry::default();
    let doc = Document::from_source("letter", "Gleim schrieb aus Halberstadt an Gleim.", &reg)
        .unwrap()
        .with_creation_date(Some(DateExpr::year(1775)));
    let assistance = dir.path().join("assist.kb");
    Arc::new(ReviewService::new(vec![doc], cache(), Settings::default(), assistance).unwrap())
}

async fn call(s: &Arc<ReviewService>, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri).header("content-type", "application/json");
    let req = req.body(body.map_or_else(Body::empty, |b| Body::from(b.to_string()))).unwrap();
    let resp = router(s.clone()).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

#[tokio::test]
async fn lists_documents_with_engine_counts() {
    let dir = tempfile::tempdir().unwrap();
    let s = service(&dir);
    let (status, body) = call(&s, "GET", "/documents", None).await;
    assert_eq!(status, StatusCode::OK);
    let docs: Vec<DocumentSummary> = serde_json::from_value(body).unwrap();
    let r = s.result();
    assert_eq!(docs.len(), 1);
    assert_eq!(docs[0].occurrences, r.documents[0].occurrences.len());
    assert_eq!(docs[0].identified, r.documents[0].identified());
}

#[tokio::test]
async fn pages_occurrences() {
    let dir = tempfile::tempdir().unwrap();
    let s = service(&dir);
    let (_, body) = call(&s, "GET", "/documents/letter/occurrences?limit=2", None).await;
    let page: OccurrencePage = serde_json::from_value(body).unwrap();
    assert_eq!(page.items.len(), 2);
    assert_eq!(page.limit, 2);
    let (_, body) = call(&s, "GET", "/documents/letter/occurrences?offset=50", None).await;
    let page: OccurrencePage = serde_json::from_value(body).unwrap();
    assert!(page.items.is_empty());
    assert_eq!(page.limit, 100);
    let (status, _) = call(&s, "GET", "/documents/nope/occurrences", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn explanation_is_the_engine_record() {
    let dir = tempfile::tempdir().unwrap();
    let s = service(&dir);
    let (status, body) = call(&s, "GET", "/occurrences/letter/0", None).await;
    assert_eq!(status, StatusCode::OK);
    let served: Explanation = serde_json::from_value(body).unwrap();
    assert_eq!(served, s.result().explain("letter", 0).unwrap());
    assert_eq!(served.alternates.len(), 1);
    assert_eq!(served.chosen.unwrap().entity_id, "gnd:A");
    let (status, _) = call(&s, "GET", "/occurrences/letter/1", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn suppress_then_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let s = service(&dir);
    let before = Summary::of(&s.result());

    let (status, body) =
        call(&s, "POST", "/decisions", Some(json!({"doc_id": "letter", "token_index": 5, "action": "suppress", "note": "not him\nhere"}))).await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    assert_eq!(body["directive"], "fix(\"letter\", 5, none).");
    let text = std::fs::read_to_string(s.assistance_path()).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.ends_with(": not him here\n"));
    assert_eq!(parse_directives(&text).unwrap().directives.len(), 1);

    // Not applied until rerun.
    assert!(!s.result().occurrence("letter", 5).unwrap().suppressed);
    let (status, body) = call(&s, "POST", "/rerun", None).await;
    assert_eq!(status, StatusCode::OK);
    let after: Summary = serde_json::from_value(body).unwrap();
    assert_eq!(after.suppressed, before.suppressed + 1);
    assert_eq!(after.identified, before.identified - 1);
    let o = s.result().occurrence("letter", 5).unwrap().clone();
    assert!(o.suppressed);
    assert_eq!(o.provenance, Provenance::Directive);
    let (_, body) = call(&s, "GET", "/occurrences/letter/5", None).await;
    assert_eq!(body["provenance"], "directive");
}

#[tokio::test]
async fn override_and_last_decision_wins() {
    let dir = tempfile::tempdir().unwrap();
    let s = service(&dir);
    let (status, body) =
        call(&s, "POST", "/decisions", Some(json!({"doc_id": "letter", "token_index": 0, "action": "override", "entity_id": "gnd:B"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    assert_eq!(body["directive"], "fix(\"letter\", 0, \"gnd:B\").");
    let (status, _) =
        call(&s, "POST", "/decisions", Some(json!({"doc_id": "letter", "token_index": 0, "action": "accept", "entity_id": "gnd:A"}))).await;
    assert_eq!(status, StatusCode::CREATED);
    call(&s, "POST", "/rerun", None).await;
    assert_eq!(s.result().occurrence("letter", 0).unwrap().chosen.as_deref(), Some("gnd:A"));
    assert_eq!(std::fs::read_to_string(s.assistance_path()).unwrap().lines().count(), 2);
}

#[tokio::test]
async fn invalid_decisions_are_422() {
    let dir = tempfile::tempdir().unwrap();
    let s = service(&dir);
    for body in [
        json!({"doc_id": "letter", "token_index": 0, "action": "override", "entity_id": "gnd:none"}),
        json!({"doc_id": "letter", "token_index": 0, "action": "override"}),
        json!({"doc_id": "nope", "token_index": 0, "action": "suppress"}),
        json!({"doc_id": "letter", "token_index": 99, "action": "suppress"}),
    ] {
        let (status, _) = call(&s, "POST", "/decisions", Some(body.clone())).await;
        assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY, "{body}");
    }
    assert!(!s.assistance_path().exists());
}

#[tokio::test]
async fn rerun_without_decisions_is_stable_and_exclusive() {
    let dir = tempfile::tempdir().unwrap();
    let s = service(&dir);
    let before = Summary::of(&s.result());
    let (_, body) = call(&s, "POST", "/rerun", None).await;
    assert_eq!(serde_json::from_value::<Summary>(body).unwrap(), before);

    let guard = s.begin_rerun().unwrap();
    let (status, _) = call(&s, "POST", "/rerun", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    drop(guard);
    let (status, _) = call(&s, "POST", "/rerun", None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn cors_preflight_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let s = service(&dir);
    let req = Request::builder()
        .method("OPTIONS")
        .uri("/documents")
        .header("origin", "http://localhost:5173")
        .header("access-control-request-method", "GET")
        .body(Body::empty())
        .unwrap();
    let resp = router(s).oneshot(req).await.unwrap();
    assert!(resp.headers().contains_key("access-control-allow-origin"));
}
