//! Small text helpers shared by the loaders and the conceptualizer.

/// Lowercases and collapses runs of whitespace into single spaces.
///
/// This is the key form used by the concept graph. Node text in the CKG is
/// never passed through here; it is kept verbatim.
pub fn normalize_phrase(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        for c in word.chars() {
            out.extend(c.to_lowercase());
        }
    }
    out
}

/// Collapses whitespace without changing case.
pub fn collapse_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Whitespace tokenization used by the metrics.
pub fn words(text: &str) -> impl Iterator<Item = &str> {
    text.split_whitespace()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes_case_and_spacing() {
        assert_eq!(normalize_phrase("  Basketball\t TEAM "), "basketball team");
        assert_eq!(normalize_phrase(""), "");
        assert_eq!(collapse_whitespace(" a  b\tc "), "a b c");
    }
}
