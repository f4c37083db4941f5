use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use super::annotation::escape_latex;
use super::fragment::Fragment;
use super::register::{Register, RegisterBundle};
use super::EditionError;
use crate::latex::{project, CommandRegistry, TokenKind};
use crate::nei::{DocumentResult, NeiResult};

/// Output files keyed by relative path.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OutputBundle {
    pub files: BTreeMap<String, String>,
}

impl OutputBundle {
    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&str> {
        self.files.get(name).map(String::as_str)
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), EditionError> {
        std::fs::create_dir_all(dir).map_err(|e| EditionError::io(dir, e))?;
        for (name, content) in &self.files {
            let path = dir.join(name);
            std::fs::write(&path, content).map_err(|e| EditionError::io(&path, e))?;
        }
        Ok(())
    }
}

pub fn html_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
    out
}

/// HTML id for an entity in register pages: `e-` plus the id with every
/// character outside `[A-Za-z0-9_-]` replaced by `-`.
pub fn anchor_id(entity_id: &str) -> String {
    let body: String =
        entity_id.chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' || c == '-' { c } else { '-' }).collect();
    format!("e-{body}")
}

/// Renders the edition. `fragments` must already be merged and ordered.
///
/// Files: `<id>.tex`, `<id>.txt`, `<id>.html` per fragment, `edition.tex`
/// (one `\input` per fragment), `register-{persons,places,dates}.tex` and
/// `.html`, and `index.html`. Identified words in `<id>.html` are
/// `<a id="w<word>">` elements linking to the authority record.
pub fn render_outputs(
    fragments: &[Fragment],
    results: &NeiResult,
    registers: &RegisterBundle,
    registry: &CommandRegistry,
) -> OutputBundle {
    let mut files = BTreeMap::new();
    if fragments.is_empty() {
        return OutputBundle { files };
    }
    let mut master = String::from("% generated; one \\input per fragment in edition order\n");
    for f in fragments {
        let _ = writeln!(master, "\\input{{{}}}", f.id);
        files.insert(format!("{}.tex", f.id), f.source.clone());
        let p = project(&f.items, registry);
        files.insert(format!("{}.txt", f.id), p.text.clone());
        files.insert(format!("{}.html", f.id), fragment_html(f, &p, results.document(&f.id)));
    }
    files.insert("edition.tex".into(), master);
    for r in registers.all() {
        files.insert(format!("register-{}.tex", r.kind.as_str()), register_latex(r));
        files.insert(format!("register-{}.html", r.kind.as_str()), register_html(r));
    }
    files.insert("index.html".into(), index_html(fragments, registers));
    OutputBundle { files }
}

fn page(title: &str, body: &str) -> String {
    format!(
        "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>{}</title>\n</head>\n<body>\n{body}</body>\n</html>\n",
        html_escape(title)
    )
}

fn fragment_html(f: &Fragment, p: &crate::latex::Projection, result: Option<&DocumentResult>) -> String {
    // Word index -> opening markup and number of words it spans.
    let mut marks: HashMap<usize, (String, usize, &'static str)> = HashMap::new();
    if let Some(r) = result {
        for d in &r.dates {
            let open = format!(
                "<span id=\"w{}\" class=\"kb-date\" data-date=\"{}\">",
                d.token_index,
                html_escape(&d.date.iso())
            );
            marks.insert(d.token_index, (open, d.word_count.max(1), "</span>"));
        }
        for o in &r.occurrences {
            let (Some(id), Some(c), false) = (&o.chosen, o.chosen_candidate(), o.suppressed) else { continue };
            let mut open = format!(
                "<a id=\"w{}\" class=\"kb-{}\" data-entity=\"{}\" title=\"{}\"",
                o.occurrence.token_index,
                c.kind.as_str(),
                html_escape(id),
                html_escape(&c.name)
            );
            if let Some(href) = &c.links.authority {
                let _ = write!(open, " href=\"{}\"", html_escape(href));
            }
            open.push('>');
            marks.insert(o.occurrence.token_index, (open, 1, "</a>"));
        }
    }
    let mut body = String::from("<p>");
    let mut at = 0;
    let mut close: Option<(usize, &str)> = None;
    for t in &p.tokens {
        body.push_str(&html_escape(&p.text[at..t.plain_start]));
        if close.is_none() {
            if let Some(w) = t.word_index.filter(|_| t.kind == TokenKind::Word) {
                if let Some((open, n, end)) = marks.get(&w) {
                    body.push_str(open);
                    close = Some((w + n - 1, end));
                }
            }
        }
        body.push_str(&html_escape(&t.text));
        at = t.plain_start + t.text.len();
        if let (Some((last, end)), Some(w)) = (close, t.word_index) {
            if w >= last {
                body.push_str(end);
                close = None;
            }
        }
    }
    body.push_str(&html_escape(&p.text[at..]));
    if let Some((_, end)) = close {
        body.push_str(end);
    }
    body.push_str("</p>\n");
    let mut head = format!("<h1>{}</h1>\n", html_escape(&f.id));
    if let Some(d) = &f.meta.date_text {
        let _ = writeln!(head, "<p class=\"kb-dated\">{}</p>", html_escape(d));
    }
    page(&f.id, &(head + &body))
}

fn register_latex(r: &Register) -> String {
    let mut out = format!("\\begin{{kbregister}}{{{}}}\n", r.kind.as_str());
    for e in &r.entries {
        let locs: Vec<String> =
            e.locators.iter().map(|l| format!("\\kbloc{{{}}}{{{}}}", escape_latex(&l.fragment), l.token)).collect();
        let _ = writeln!(out, "\\kbentry{{{}}}{{{}}}{{{}}}", escape_latex(&e.entity_id), escape_latex(&e.label), locs.join(", "));
    }
    out.push_str("\\end{kbregister}\n");
    out
}

fn register_html(r: &Register) -> String {
    let mut body = format!("<h1>{}</h1>\n<ul>\n", r.kind.title());
    for e in &r.entries {
        let locs: Vec<String> = e
            .locators
            .iter()
            .map(|l| {
                let f = html_escape(&l.fragment);
                format!("<a href=\"{f}.html#w{}\">{f}:{}</a>", l.token, l.token)
            })
            .collect();
        let _ = writeln!(
            body,
            "<li id=\"{}\"><span class=\"kb-label\">{}</span> {}</li>",
            anchor_id(&e.entity_id),
            html_escape(&e.label),
            locs.join(", ")
        );
    }
    body.push_str("</ul>\n");
    page(r.kind.title(), &body)
}

fn index_html(fragments: &[Fragment], registers: &RegisterBundle) -> String {
    let mut body = String::from("<h1>Edition</h1>\n<ol>\n");
    for f in fragments {
        let id = html_escape(&f.id);
        let date = f.meta.date_text.as_deref().map(|d| format!(" ({})", html_escape(d))).unwrap_or_default();
        let _ = writeln!(body, "<li><a href=\"{id}.html\">{id}</a>{date}</li>");
    }
    body.push_str("</ol>\n<ul>\n");
    for r in registers.all() {
        let _ = writeln!(
            body,
            "<li><a href=\"register-{}.html\">{}</a> ({} entries)</li>",
            r.kind.as_str(),
            r.kind.title(),
            r.entries.len()
        );
    }
    body.push_str("</ul>\n");
    page("Edition", &body)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::date::DateExpr;
    use crate::edition::generate_registers;
    use crate::facts::{CacheSet, Entity};
    use crate::latex::parse;
    use crate::nei::{identify, Settings};

    fn build(src: &str) -> (Vec<Fragment>, OutputBundle) {
        let reg = CommandRegistry::default();
        let frags = vec![Fragment::parse("l1", src, &reg).unwrap()];
        let cache = CacheSet::from_entities(
            [Entity::person("gnd:118540238", "Gleim, Johann Wilhelm Ludwig").with_birth(DateExpr::year(1719))],
            Vec::new(),
        );
        let docs: Vec<_> = frags.iter().map(|f| f.document(&reg)).collect();
        let res = identify(&docs, &cache, &[], &Settings::default()).unwrap();
        let regs = generate_registers(&frags, &res, &cache);
        let out = render_outputs(&frags, &res, &regs, &reg);
        (frags, out)
    }

    #[test]
    fn latex_is_source_and_html_links_authority() {
        let src = "\\kbdated{1776}% Kopf\nAm 3. Mai 1776 an \\emph{Gleim} & Co.";
        let (_, out) = build(src);
        assert_eq!(out.get("l1.tex"), Some(src));
        assert!(parse(out.get("l1.tex").unwrap(), &CommandRegistry::default()).is_ok());
        let html = out.get("l1.html").unwrap();
        assert!(html.contains("<a id=\"w5\" class=\"kb-person\" data-entity=\"gnd:118540238\""), "{html}");
        assert!(html.contains("href=\"https://d-nb.info/gnd/118540238\">Gleim</a>"));
        assert!(html.contains("<span id=\"w1\" class=\"kb-date\" data-date=\"1776-05-03\">3. Mai 1776</span>"), "{html}");
        assert!(html.contains("&amp; Co."));
        let reg = out.get("register-persons.html").unwrap();
        assert!(reg.contains("<li id=\"e-gnd-118540238\">"));
        assert!(reg.contains("href=\"l1.html#w5\""));
        assert!(out.get("register-persons.tex").unwrap().contains("\\kbentry{gnd:118540238}"));
        assert_eq!(out.get("edition.tex").unwrap().lines().nth(1), Some("\\input{l1}"));
    }

    #[test]
    fn empty_project_gives_empty_bundle() {
        let out = render_outputs(&[], &NeiResult::default(), &generate_registers(&[], &NeiResult::default(), &CacheSet::default()), &CommandRegistry::default());
        assert!(out.is_empty());
    }
}
