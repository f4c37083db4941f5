//! Parse LaTeX into items, project it to plain text and map word positions
//! back to the source.
//!
//! ```bash
//! cargo run --example parse_latex
//! ```

use scriptorium::latex::{parse, project, render, CommandRegistry, Signature};

const SOURCE: &str = r"\kbdated{1751-03-12}
Der Dichter \emph{Gleim} schreibt aus Halberstadt.% Randnotiz
\footnote{Seit 1747 Domsekretär.} \kbwork{Versuch in scherzhaften Liedern}";

fn main() {
    let mut registry = CommandRegistry::default();
    // Project-specific markup: one argument that belongs to the text.
    registry.register_command("kbwork", Signature::command(1));

    let items = parse(SOURCE, &registry).expect("balanced source");
    for item in &items {
        println!("{:>3}..{:<3} {:<11} {:?}", item.span.start, item.span.end, item.kind.as_str(), item.text);
    }

    assert_eq!(render(&items), SOURCE, "rendering is byte-exact");

    let plain = project(&items, &registry);
    println!("\nplain text: {}", plain.text);
    for word in plain.words().filter(|w| w.text.starts_with(char::is_uppercase)) {
        let src = &SOURCE[word.span.range()];
        println!("word {:>2} {:<14} source bytes {} ({src})", word.word_index.unwrap(), word.text, word.span);
    }

    match parse(r"\emph{unclosed", &registry) {
        Err(e) => println!("\nerror reported at byte {}: {e}", e.position()),
        Ok(_) => unreachable!(),
    }
}
