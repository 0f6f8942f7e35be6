//! Concept coverage: does a sentence mention every concept of its set?
//!
//! Matching is exact-token or stem-equal. The stemmer is a small suffix
//! table aimed at English inflection only (plural, -ing, -ed); derivational
//! forms are left to human review.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::model::{Concept, ConceptSet};

/// One row of the stemming rule table, in application order.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct StemRule {
    pub suffix: &'static str,
    pub replacement: &'static str,
    pub condition: &'static str,
    pub example: (&'static str, &'static str),
}

pub const STEM_RULES: &[StemRule] = &[
    StemRule { suffix: "ies", replacement: "y", condition: "word longer than 4 letters", example: ("flies", "fly") },
    StemRule {
        suffix: "es",
        replacement: "",
        condition: "preceded by ss, x, z, ch or sh",
        example: ("watches", "watch"),
    },
    StemRule {
        suffix: "s",
        replacement: "",
        condition: "word longer than 3 letters, not ending in ss, us or is",
        example: ("boats", "boat"),
    },
    StemRule {
        suffix: "eed",
        replacement: "ee",
        condition: "stem before the suffix has measure > 0 (otherwise left alone)",
        example: ("agreed", "agree"),
    },
    StemRule {
        suffix: "ied",
        replacement: "y",
        condition: "word longer than 4 letters; \"ie\" otherwise",
        example: ("cried", "cry"),
    },
    StemRule {
        suffix: "ing",
        replacement: "",
        condition: "remaining stem contains a vowel; then repair the stem",
        example: ("looking", "look"),
    },
    StemRule {
        suffix: "ed",
        replacement: "",
        condition: "remaining stem contains a vowel; then repair the stem",
        example: ("jumped", "jump"),
    },
    StemRule {
        suffix: "(repair) doubled consonant",
        replacement: "single consonant",
        condition: "after -ing/-ed, unless the double is l, s or z",
        example: ("running", "run"),
    },
    StemRule {
        suffix: "(repair) short stem",
        replacement: "stem + e",
        condition: "after -ing/-ed, measure 1 with a consonant-vowel-consonant ending, or a two-letter vowel-consonant stem (last not w, x, y)",
        example: ("racing", "race"),
    },
    StemRule { suffix: "ie", replacement: "y", condition: "word longer than 3 letters", example: ("movie", "movy") },
    StemRule {
        suffix: "e",
        replacement: "",
        condition: "remaining stem has 3+ letters, does not end in e, and has measure > 1 or measure 1 without a consonant-vowel-consonant ending",
        example: ("dance", "danc"),
    },
];

fn is_consonant(w: &[u8], i: usize) -> bool {
    match w[i] {
        b'a' | b'e' | b'i' | b'o' | b'u' => false,
        b'y' => i == 0 || !is_consonant(w, i - 1),
        _ => true,
    }
}

/// Number of vowel-consonant sequences, as in Porter's algorithm.
fn measure(w: &[u8]) -> usize {
    let mut m = 0;
    let mut prev_vowel = false;
    for i in 0..w.len() {
        let vowel = !is_consonant(w, i);
        if prev_vowel && !vowel {
            m += 1;
        }
        prev_vowel = vowel;
    }
    m
}

fn has_vowel(w: &[u8]) -> bool {
    (0..w.len()).any(|i| !is_consonant(w, i))
}

fn ends_cvc(w: &[u8]) -> bool {
    let n = w.len();
    n >= 3
        && is_consonant(w, n - 3)
        && !is_consonant(w, n - 2)
        && is_consonant(w, n - 1)
        && !matches!(w[n - 1], b'w' | b'x' | b'y')
}

fn is_short_vc(w: &[u8]) -> bool {
    w.len() == 2 && !is_consonant(w, 0) && is_consonant(w, 1) && !matches!(w[1], b'w' | b'x' | b'y')
}

fn strip_plural(w: &str) -> Option<String> {
    if w.len() > 4 && w.ends_with("ies") {
        return Some(format!("{}y", &w[..w.len() - 3]));
    }
    if let Some(stem) = w.strip_suffix("es") {
        if ["ss", "x", "z", "ch", "sh"]
            .iter()
            .any(|s| stem.ends_with(s))
        {
            return Some(stem.to_string());
        }
    }
    if w.len() > 3 && w.ends_with('s') && !["ss", "us", "is"].iter().any(|s| w.ends_with(s)) {
        return Some(w[..w.len() - 1].to_string());
    }
    None
}

fn strip_verbal(w: &str) -> Option<String> {
    if let Some(stem) = w.strip_suffix("eed") {
        return (measure(stem.as_bytes()) > 0).then(|| format!("{stem}ee"));
    }
    if let Some(stem) = w.strip_suffix("ied") {
        return Some(if w.len() > 4 {
            format!("{stem}y")
        } else {
            format!("{stem}ie")
        });
    }
    let stem = ["ing", "ed"].iter().find_map(|s| w.strip_suffix(s))?;
    let b = stem.as_bytes();
    if !has_vowel(b) {
        return None;
    }
    let n = b.len();
    if n >= 2
        && b[n - 1] == b[n - 2]
        && is_consonant(b, n - 1)
        && !matches!(b[n - 1], b'l' | b's' | b'z')
    {
        return Some(stem[..n - 1].to_string());
    }
    if (measure(b) == 1 && ends_cvc(b)) || is_short_vc(b) {
        return Some(format!("{stem}e"));
    }
    Some(stem.to_string())
}

fn normalize_ending(w: &str) -> Option<String> {
    if w.len() > 3 && w.ends_with("ie") {
        return Some(format!("{}y", &w[..w.len() - 2]));
    }
    let stem = w.strip_suffix('e')?;
    let b = stem.as_bytes();
    let m = measure(b);
    (b.len() >= 3 && !stem.ends_with('e') && (m > 1 || (m == 1 && !ends_cvc(b))))
        .then(|| stem.to_string())
}

/// Lowercases and strips inflectional suffixes until no rule applies.
///
/// Every rule that fires shortens the word, so the loop terminates and the
/// result is a fixed point: `stem(stem(w)) == stem(w)`. Non-ASCII words are
/// only lowercased. Results are match keys, not dictionary words.
pub fn stem(word: &str) -> String {
    let mut w = word.to_lowercase();
    if !w.is_ascii() {
        return w;
    }
    loop {
        let mut next = strip_plural(&w).unwrap_or_else(|| w.clone());
        if let Some(v) = strip_verbal(&next) {
            next = v;
        }
        if let Some(v) = normalize_ending(&next) {
            next = v;
        }
        if next == w {
            return w;
        }
        w = next;
    }
}

/// Lowercased alphabetic runs; anything else (digits, hyphens, apostrophes) splits.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphabetic())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub covered: Vec<Concept>,
    pub missing: Vec<Concept>,
    pub bit: u8,
    /// Concept → sentence text that matched it (space-joined for multiword concepts).
    pub matches: IndexMap<Concept, String>,
}

fn word_matches(token: &str, word: &str, word_stem: &str) -> bool {
    token == word || stem(token) == word_stem
}

/// Position of the first run of tokens matching `words` in order.
fn find_phrase(tokens: &[String], words: &[(String, String)]) -> Option<usize> {
    if words.is_empty() || tokens.len() < words.len() {
        return None;
    }
    (0..=tokens.len() - words.len()).find(|&start| {
        words
            .iter()
            .enumerate()
            .all(|(k, (w, s))| word_matches(&tokens[start + k], w, s))
    })
}

pub fn check_coverage(sentence: &str, set: &ConceptSet) -> CoverageResult {
    let tokens = tokenize(sentence);
    let mut result = CoverageResult {
        covered: vec![],
        missing: vec![],
        bit: 0,
        matches: IndexMap::new(),
    };
    for concept in set.iter() {
        let words: Vec<(String, String)> = tokenize(concept.surface())
            .into_iter()
            .map(|w| {
                let s = stem(&w);
                (w, s)
            })
            .collect();
        match find_phrase(&tokens, &words) {
            Some(start) => {
                result.matches.insert(
                    concept.clone(),
                    tokens[start..start + words.len()].join(" "),
                );
                result.covered.push(concept.clone());
            }
            None => result.missing.push(concept.clone()),
        }
    }
    result.bit = u8::from(result.missing.is_empty());
    result
}
