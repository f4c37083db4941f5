//! Check fragments, annotations and fact bases for void identifiers,
//! missing or implausible dates and duplicate entities.
//!
//! ```bash
//! cargo run --example consistency_check
//! ```

use scriptorium::date::DateExpr;
use scriptorium::edition::{check, parse_annotations, CheckOptions, Fragment};
use scriptorium::facts::{CacheSet, Entity};
use scriptorium::latex::CommandRegistry;

fn main() {
    let cache = CacheSet::from_entities(
        [
            Entity::person("gnd:118620452", "Sulzer, Johann Georg")
                .with_birth(DateExpr::year(1720))
                .with_death(DateExpr::year(1779)),
            Entity::person("gnd:118512862", "Bodmer, Johann Jakob")
                .with_birth(DateExpr::year(1698))
                .with_death(DateExpr::year(1783)),
            // Imported twice under different ids.
            Entity::person("gnd:118540238", "Gleim, Johann Wilhelm Ludwig").with_birth(DateExpr::year(1719)),
            Entity::person("gnd:1012345678", "Gleim, Johann Wilhelm Ludwig").with_birth(DateExpr::year(1719)),
        ],
        Vec::new(),
    );

    let registry = CommandRegistry::default();
    let letters = [
        ("l1", "\\kbsender{gnd:118620452}\\kbrecipient{gnd:118512862}\n\\kbdated{1790}\nLieber Freund."),
        ("l2", "\\kbsender{gnd:118620452}\\kbrecipient{gnd:118512862}\n\\kbdated{um 1760?}\nText."),
        ("l3", "\\kbdated{1755}\nAn \\kbperson[gnd:11854023]{Gleim}."),
    ];
    let fragments: Vec<Fragment> =
        letters.iter().map(|(id, src)| Fragment::parse(*id, *src, &registry).unwrap()).collect();
    let annotations =
        parse_annotations("annotate(\"l1\", token(1), person, \"gnd:none\").\n", "notes.ann").unwrap();

    let report = check(&fragments, &annotations, &[], &cache, &CheckOptions::default());
    print!("{}", report.to_text());
    println!("{} findings, errors: {}", report.findings.len(), report.has_errors());

    let lenient = check(&fragments, &annotations, &[], &cache, &CheckOptions { lifespan_slack: 15 });
    println!("with 15 years of slack: {} findings", lenient.findings.len());
}
