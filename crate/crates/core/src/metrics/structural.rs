use std::collections::HashSet;
use std::path::Path;

const BUILTIN: &str = include_str!("../../data/structural_words.txt");

/// Determiners, auxiliaries, pronouns and expletives dropped by
/// [`normalize_node`]. Loaded from a versioned word list.
#[derive(Debug, Clone)]
pub struct StructuralWords {
    version: String,
    words: HashSet<String>,
}

impl StructuralWords {
    /// The list shipped in `data/structural_words.txt`.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN)
    }

    /// One word per line; `#` starts a comment and `# version: N` names
    /// the list.
    pub fn parse(src: &str) -> Self {
        let mut version = String::from("unversioned");
        let mut words = HashSet::new();
        for line in src.lines() {
            let line = line.trim();
            if let Some(comment) = line.strip_prefix('#') {
                if let Some(v) = comment.trim().strip_prefix("version:") {
                    version = v.trim().to_string();
                }
                continue;
            }
            if !line.is_empty() {
                words.insert(line.to_lowercase());
            }
        }
        Self { version, words }
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(&word.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

/// Drops structural words and re-joins the rest with single spaces.
pub fn normalize_node(text: &str, structural: &StructuralWords) -> String {
    text.split_whitespace()
        .filter(|w| !structural.contains(w))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_list_examples() {
        let s = StructuralWords::builtin();
        assert_eq!(s.version(), "1");
        assert_eq!(normalize_node("he does not get it", &s), "not get");
        assert_eq!(normalize_node("he never gets it", &s), "never gets");
        assert_eq!(normalize_node("he never gets one", &s), "never gets");
        assert_eq!(normalize_node("the a an", &s), "");
        assert_eq!(normalize_node("The  dog", &s), "dog");
    }

    #[test]
    fn custom_list() {
        let s = StructuralWords::parse("# version: test\nfoo\n\nBar\n");
        assert_eq!(s.version(), "test");
        assert_eq!(s.len(), 2);
        assert_eq!(normalize_node("foo x bar y", &s), "x y");
    }
}
