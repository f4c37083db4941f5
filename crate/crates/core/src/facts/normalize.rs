use caseless::default_case_fold_str;
use unicode_normalization::char::is_combining_mark;
use unicode_normalization::UnicodeNormalization;

/// Lookup key for a name: NFC, case-folded, diacritics stripped, inner
/// whitespace collapsed to single spaces and trimmed.
///
/// `Gleim`, `gleim` and ` GLEIM ` share a key, as do `Köln` and `Koln`.
pub fn normalize_name(s: &str) -> String {
    if s.is_ascii() {
        let mut out = String::with_capacity(s.len());
        for word in s.split_ascii_whitespace() {
            if !out.is_empty() {
                out.push(' ');
            }
            out.extend(word.chars().map(|c| c.to_ascii_lowercase()));
        }
        return out;
    }
    let nfc: String = s.nfc().collect();
    let folded = default_case_fold_str(&nfc);
    let stripped: String = folded.nfd().filter(|c| !is_combining_mark(*c)).nfc().collect();
    stripped.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_diacritics_and_spacing() {
        assert_eq!(normalize_name("Gleim"), "gleim");
        assert_eq!(normalize_name("  GLEIM\t"), "gleim");
        assert_eq!(normalize_name("Köln"), "koln");
        assert_eq!(normalize_name("Ko\u{308}ln"), "koln");
        assert_eq!(normalize_name("Straße"), "strasse");
        assert_eq!(normalize_name("Gleim,  Johann\nWilhelm"), "gleim, johann wilhelm");
        assert_eq!(normalize_name(""), "");
    }
}
