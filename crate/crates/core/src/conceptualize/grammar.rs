//! Rule-based surface repair after a span is replaced: number agreement of
//! the replacement head and the a/an choice of a preceding indefinite
//! article.

use serde::{Deserialize, Serialize};

use crate::parse::ParsedNode;

/// Whether node text is lemmatized (inserted verbatim) or surface text
/// (inflected and article-repaired).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextMode {
    #[default]
    Surface,
    Lemmatized,
}

impl std::str::FromStr for TextMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "surface" => Ok(TextMode::Surface),
            "lemmatized" => Ok(TextMode::Lemmatized),
            other => Err(format!("unknown text mode `{other}`")),
        }
    }
}

const IRREGULAR_PLURALS: &[(&str, &str)] = &[
    ("child", "children"),
    ("foot", "feet"),
    ("goose", "geese"),
    ("louse", "lice"),
    ("man", "men"),
    ("mouse", "mice"),
    ("ox", "oxen"),
    ("person", "people"),
    ("tooth", "teeth"),
    ("woman", "women"),
    ("cactus", "cacti"),
    ("criterion", "criteria"),
    ("phenomenon", "phenomena"),
    ("analysis", "analyses"),
    ("crisis", "crises"),
    ("thesis", "theses"),
];

/// Words ending in "man" that are not compounds of it.
const NOT_MAN_COMPOUNDS: &[&str] = &["human", "german", "roman", "shaman", "talisman", "caiman"];

const INVARIANT_PLURALS: &[&str] = &[
    "aircraft", "bison", "deer", "fish", "moose", "salmon", "series", "sheep", "species",
    "trout", "offspring",
];

const F_TO_VES: &[&str] = &[
    "calf", "elf", "half", "knife", "leaf", "life", "loaf", "self", "sheaf", "shelf", "thief",
    "wife", "wolf",
];

const O_TO_OES: &[&str] = &[
    "echo", "hero", "potato", "tomato", "torpedo", "veto", "mosquito", "volcano",
];

/// English plural of a singular noun by rule table.
pub fn pluralize(word: &str) -> String {
    let lower = word.to_lowercase();
    if let Some((_, plural)) = IRREGULAR_PLURALS.iter().find(|(s, _)| *s == lower) {
        return match_case(word, plural);
    }
    for (s, p) in IRREGULAR_PLURALS {
        // Compounds such as "businessman" or "chairwoman".
        if !NOT_MAN_COMPOUNDS.contains(&lower.as_str())
            && lower.len() > s.len() && lower.ends_with(s) && matches!(*s, "man" | "woman" | "person") {
            let stem = &word[..word.len() - s.len()];
            return format!("{stem}{p}");
        }
    }
    if INVARIANT_PLURALS.contains(&lower.as_str()) {
        return word.to_string();
    }
    if F_TO_VES.contains(&lower.as_str()) {
        let stem = word.strip_suffix("fe").or_else(|| word.strip_suffix('f')).unwrap_or(word);
        return format!("{stem}ves");
    }
    if O_TO_OES.contains(&lower.as_str()) {
        return format!("{word}es");
    }
    if ["s", "x", "z", "ch", "sh"].iter().any(|e| lower.ends_with(e)) {
        return format!("{word}es");
    }
    if lower.ends_with('y') {
        let before = lower.chars().rev().nth(1);
        if before.is_some_and(|c| !"aeiou".contains(c)) {
            return format!("{}ies", &word[..word.len() - 1]);
        }
    }
    format!("{word}s")
}

fn match_case(original: &str, replacement: &str) -> String {
    if original.chars().next().is_some_and(char::is_uppercase) {
        capitalize(replacement)
    } else {
        replacement.to_string()
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Vowel-letter words pronounced with a consonant sound.
const CONSONANT_SOUND_PREFIXES: &[&str] = &[
    "uni", "use", "usu", "uti", "ure", "uro", "euro", "eu", "ewe", "one", "once", "ubiq", "ufo",
];

/// Consonant-letter words pronounced with a vowel sound.
const VOWEL_SOUND_PREFIXES: &[&str] = &["hour", "honest", "honor", "honour", "heir", "herb"];

/// `"a"` or `"an"` for the word that follows, by initial sound.
pub fn indefinite_article(next_word: &str) -> &'static str {
    let w = next_word.to_lowercase();
    if VOWEL_SOUND_PREFIXES.iter().any(|p| w.starts_with(p)) {
        return "an";
    }
    if CONSONANT_SOUND_PREFIXES.iter().any(|p| w.starts_with(p)) {
        return "a";
    }
    match w.chars().next() {
        Some(c) if "aeiou".contains(c) => "an",
        _ => "a",
    }
}

/// The syntactic head of tokens `l..=r`: the last token whose governor
/// falls outside the span.
pub fn span_head(node: &ParsedNode, l: usize, r: usize) -> usize {
    (l..=r)
        .rev()
        .find(|&i| {
            let h = node.token(i).head;
            h < l || h > r
        })
        .unwrap_or(r)
}

/// A nominal token whose form differs from its lemma is taken as plural.
pub fn is_plural(node: &ParsedNode, k: usize) -> bool {
    let t = node.token(k);
    t.is_nominal() && t.form.to_lowercase() != t.lemma.to_lowercase()
}

/// Text of `node` with tokens `l..=r` replaced by `replacement`.
///
/// In surface mode the replacement's last word is pluralized when the
/// replaced span head was plural, and an indefinite article right before
/// the span is rewritten to agree with the replacement (or dropped when
/// the replacement became plural).
pub fn repair_grammar(node: &ParsedNode, span: (usize, usize), replacement: &str, mode: TextMode) -> String {
    let (l, r) = span;
    let text = node.text();
    let (start, end) = node.byte_range(l, r);
    if mode == TextMode::Lemmatized {
        return format!("{}{}{}", &text[..start], replacement, &text[end..]);
    }

    let plural = is_plural(node, span_head(node, l, r));
    let mut inserted = if plural {
        match replacement.rsplit_once(' ') {
            Some((rest, last)) => format!("{rest} {}", pluralize(last)),
            None => pluralize(replacement),
        }
    } else {
        replacement.to_string()
    };

    let mut region_start = start;
    if l > 1 {
        let article = &node.token(l - 1).form;
        let lower = article.to_lowercase();
        if lower == "a" || lower == "an" {
            let (art_start, art_end) = node.byte_range(l - 1, l - 1);
            region_start = art_start;
            if !plural {
                let first_word = inserted.split(' ').next().unwrap_or("");
                let gap = &text[art_end..start];
                inserted = format!("{}{gap}{inserted}", match_case(article, indefinite_article(first_word)));
            }
        }
    }
    if region_start == 0 && text[region_start..].chars().next().is_some_and(char::is_uppercase) {
        inserted = capitalize(&inserted);
    }
    format!("{}{}{}", &text[..region_start], inserted, &text[end..])
}
