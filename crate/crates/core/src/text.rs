//! Small text helpers shared by the segmenter, the classifiers and the
//! feature extractor.

/// Honorifics and titles stripped from speaker names, longest first so that
/// "the honorable" wins over any single-word prefix.
pub const HONORIFICS: &[&str] = &[
    "the honorable",
    "ranking member",
    "vice chairman",
    "vice chair",
    "representative",
    "administrator",
    "commissioner",
    "ambassador",
    "chairwoman",
    "secretary",
    "chairman",
    "director",
    "governor",
    "admiral",
    "general",
    "senator",
    "mayor",
    "judge",
    "chair",
    "mrs",
    "mr",
    "ms",
    "dr",
];

/// Lowercased word tokens: maximal runs of alphanumerics and apostrophes,
/// with apostrophes trimmed from both ends.
pub fn word_tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for raw in text.split(|c: char| !(c.is_alphanumeric() || c == '\'')) {
        let t = raw.trim_matches('\'');
        if !t.is_empty() {
            out.push(t.to_lowercase());
        }
    }
    out
}

/// Collapse every whitespace run to a single space and trim the ends.
pub fn collapse_ws(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Normalize a person name or speaker marker for roster lookup: lowercase,
/// drop periods and commas, collapse whitespace and strip leading
/// honorifics until none remain. Idempotent.
pub fn normalize_name(name: &str) -> String {
    let cleaned: String = name
        .chars()
        .filter(|c| *c != '.' && *c != ',')
        .collect::<String>()
        .to_lowercase();
    let mut s = collapse_ws(&cleaned);
    loop {
        let before = s.len();
        for h in HONORIFICS {
            if s == *h {
                s.clear();
                break;
            }
            if let Some(rest) = s.strip_prefix(h) {
                if let Some(rest) = rest.strip_prefix(' ') {
                    s = rest.to_string();
                    break;
                }
            }
        }
        if s.len() == before {
            return s;
        }
    }
}
