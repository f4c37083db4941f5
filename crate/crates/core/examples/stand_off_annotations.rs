//! Merge stand-off annotations into a letter: entity references wrap their
//! target, comments and index terms follow it.
//!
//! ```bash
//! cargo run --example stand_off_annotations
//! ```

use scriptorium::edition::{merge_annotations, parse_annotations, Fragment};
use scriptorium::latex::CommandRegistry;

const LETTER: &str = "\\kbdated{1751-03-12}\nDer Dichter Gleim schreibt mir aus Halberstadt,\ndass Gleim im Sommer kommt.";

const NOTES: &str = r#"
annotate("l1", token(2), person, "gnd:118540238").
annotate("l1", quote("Gleim", 2), person, "gnd:118540238", external).
annotate("l1", quote("Halberstadt", 1), place, "geo:2911271").
annotate("l1", span(56, 67), comment, "Gleim lebte dort seit 1747 als Domsekretär").
annotate("l1", token(3), index, "Gleim: Briefe").
"#;

fn main() {
    let registry = CommandRegistry::default();
    let letter = Fragment::parse("l1", LETTER, &registry).unwrap();
    let notes = parse_annotations(NOTES, "notes.ann").unwrap();

    let merged = merge_annotations(&letter, &notes, &registry).unwrap();
    println!("{}\n", merged.fragment.source);
    assert_eq!(merged.fragment.projection(&registry).text, letter.projection(&registry).text);
    println!("{} annotations applied; plain text unchanged", merged.applied);

    let bad = parse_annotations("annotate(\"l1\", quote(\"Berlin\", 1), place, \"geo:2950159\").", "bad.ann").unwrap();
    match merge_annotations(&letter, &bad, &registry) {
        Err(e) => println!("{e}"),
        Ok(_) => unreachable!(),
    }
}
