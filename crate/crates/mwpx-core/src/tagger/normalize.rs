//! Word normalization: lowercase, then lemmatize (inflectional suffixes plus
//! an exception lexicon), then a conservative Porter-style derivational
//! suffix strip.
//!
//! The whole pipeline is deterministic and idempotent: lemma candidates are
//! validated against the bundled lexicon where possible, fallback rules carry
//! minimum-stem guards, and the derivational pass runs to a fixpoint.

use std::collections::HashMap;
use std::sync::OnceLock;

use super::lexicon;

/// Irregular forms. Be-verb forms (is/are/was/were) are deliberately absent:
/// they normalize to themselves and are counted as distinct words.
const EXCEPTIONS: &[(&str, &str)] = &[
    // verbs
    ("has", "have"),
    ("had", "have"),
    ("having", "have"),
    ("does", "do"),
    ("did", "do"),
    ("done", "do"),
    ("gave", "give"),
    ("given", "give"),
    ("took", "take"),
    ("taken", "take"),
    ("made", "make"),
    ("went", "go"),
    ("goes", "go"),
    ("gone", "go"),
    ("got", "get"),
    ("gotten", "get"),
    ("bought", "buy"),
    ("brought", "bring"),
    ("sold", "sell"),
    ("told", "tell"),
    ("ate", "eat"),
    ("eaten", "eat"),
    ("saw", "see"),
    ("seen", "see"),
    ("came", "come"),
    ("ran", "run"),
    ("won", "win"),
    ("spent", "spend"),
    ("sent", "send"),
    ("kept", "keep"),
    ("slept", "sleep"),
    ("held", "hold"),
    ("stood", "stand"),
    ("sat", "sit"),
    ("found", "find"),
    ("lost", "lose"),
    ("threw", "throw"),
    ("thrown", "throw"),
    ("caught", "catch"),
    ("paid", "pay"),
    ("said", "say"),
    ("wrote", "write"),
    ("written", "write"),
    ("grew", "grow"),
    ("grown", "grow"),
    ("flew", "fly"),
    ("drew", "draw"),
    ("drawn", "draw"),
    ("lent", "lend"),
    ("began", "begin"),
    ("begun", "begin"),
    // nouns
    ("children", "child"),
    ("men", "man"),
    ("women", "woman"),
    ("feet", "foot"),
    ("teeth", "tooth"),
    ("geese", "goose"),
    ("mice", "mouse"),
    ("people", "person"),
    ("leaves", "leaf"),
    ("knives", "knife"),
    ("loaves", "loaf"),
    ("halves", "half"),
    ("shelves", "shelf"),
    ("wolves", "wolf"),
    ("calves", "calf"),
    ("elves", "elf"),
    ("scarves", "scarf"),
    ("thieves", "thief"),
    ("wives", "wife"),
    ("cookies", "cookie"),
];

fn exceptions() -> &'static HashMap<&'static str, &'static str> {
    static MAP: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    MAP.get_or_init(|| EXCEPTIONS.iter().copied().collect())
}

/// Derivational suffixes stripped in the final pass, longest first.
const DERIVATIONAL_SUFFIXES: &[&str] = &["ness", "ment", "less", "ful", "ize"];

/// Lowercase, lemmatize, then apply Porter-style suffix stripping.
///
/// The lemma+stem pass runs to a fixpoint, which makes idempotence
/// structural: a pass can expose a new strippable suffix or an irregular
/// form ("hasness" strips to "has", which lemmatizes to "have"), and the
/// loop settles it in the same call. Non-exception passes strictly shorten
/// the word and exception outputs are stable, so this terminates.
pub fn normalize_word(word: &str) -> String {
    let mut current = word.to_lowercase();
    for _ in 0..32 {
        let next = strip_derivational(lemmatize(&current));
        if next == current {
            break;
        }
        current = next;
    }
    current
}

fn lemmatize(lower: &str) -> String {
    if let Some(mapped) = exceptions().get(lower) {
        return (*mapped).to_string();
    }
    let lex = lexicon::bundled();

    // Prefer a suffix-rule candidate the lexicon recognizes.
    for candidate in suffix_candidates(lower) {
        if lex.contains(&candidate) {
            return candidate;
        }
    }
    // A known word is already a base form.
    if lex.contains(lower) {
        return lower.to_string();
    }
    fallback_strip(lower)
}

/// Candidate base forms for an inflected word, best guess first.
fn suffix_candidates(word: &str) -> Vec<String> {
    let mut out = Vec::new();
    let n = word.len();
    if let Some(stem) = word.strip_suffix("ies") {
        if stem.len() >= 2 {
            out.push(format!("{stem}y"));
        }
    }
    if let Some(stem) = word.strip_suffix("ied") {
        if stem.len() >= 2 {
            out.push(format!("{stem}y"));
        }
    }
    if let Some(stem) = word.strip_suffix("es") {
        if stem.len() >= 2 {
            out.push(stem.to_string());
        }
    }
    if word.ends_with('s') && !word.ends_with("ss") && n >= 3 {
        out.push(word[..n - 1].to_string());
    }
    if let Some(stem) = word.strip_suffix("ed") {
        if stem.len() >= 3 {
            out.push(format!("{stem}e"));
            out.push(stem.to_string());
            out.push(undouble(stem));
        }
    }
    if let Some(stem) = word.strip_suffix("ing") {
        if stem.len() >= 3 {
            out.push(format!("{stem}e"));
            out.push(stem.to_string());
            out.push(undouble(stem));
        }
    }
    if let Some(stem) = word.strip_suffix("er") {
        out.push(stem.to_string());
        out.push(undouble(stem));
    }
    if let Some(stem) = word.strip_suffix("est") {
        out.push(stem.to_string());
        out.push(undouble(stem));
    }
    out
}

/// Rule-based strip for words the lexicon does not know.
fn fallback_strip(word: &str) -> String {
    let n = word.len();
    // agreed -> agree; speed/feed unchanged (no vowel before "eed")
    if let Some(stem) = word.strip_suffix("eed") {
        return if has_vowel(stem) {
            format!("{stem}ee")
        } else {
            word.to_string()
        };
    }
    if let Some(stem) = word.strip_suffix("ies") {
        if stem.len() >= 3 {
            return format!("{stem}y");
        }
    }
    if let Some(stem) = word.strip_suffix("ied") {
        if stem.len() >= 3 {
            return format!("{stem}y");
        }
    }
    if word.ends_with("xes")
        || word.ends_with("ses")
        || word.ends_with("zes")
        || word.ends_with("ches")
        || word.ends_with("shes")
    {
        let stem = &word[..n - 2];
        if stem.len() >= 3 {
            return stem.to_string();
        }
    }
    if word.ends_with('s')
        && !word.ends_with("ss")
        && !word.ends_with("us")
        && !word.ends_with("is")
    {
        let stem = &word[..n - 1];
        if stem.len() >= 3 && has_vowel(stem) {
            return stem.to_string();
        }
    }
    if let Some(stem) = word.strip_suffix("ed") {
        if stem.len() >= 3 && has_vowel(stem) {
            return undouble(stem);
        }
    }
    if let Some(stem) = word.strip_suffix("ing") {
        if stem.len() >= 3 && has_vowel(stem) {
            return undouble(stem);
        }
    }
    word.to_string()
}

/// Fixpoint derivational strip; guards keep it idempotent and conservative.
fn strip_derivational(mut word: String) -> String {
    loop {
        let mut changed = false;
        for suffix in DERIVATIONAL_SUFFIXES {
            if let Some(stem) = word.strip_suffix(suffix) {
                if stem.len() >= 3 && has_vowel(stem) {
                    word = stem.to_string();
                    changed = true;
                    break;
                }
            }
        }
        if !changed {
            return word;
        }
    }
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(|b| matches!(b, b'a' | b'e' | b'i' | b'o' | b'u' | b'y'))
}

/// Undo consonant doubling left by -ed/-ing stripping (planned -> plan).
/// Vowels and double l/s stay (tell, miss, agree).
fn undouble(stem: &str) -> String {
    let bytes = stem.as_bytes();
    let n = bytes.len();
    if n >= 2 && bytes[n - 1] == bytes[n - 2] {
        let c = bytes[n - 1];
        let is_vowel = matches!(c, b'a' | b'e' | b'i' | b'o' | b'u');
        if c.is_ascii_alphabetic() && !is_vowel && !matches!(c, b'l' | b's') {
            return stem[..n - 1].to_string();
        }
    }
    stem.to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_normalizations() {
        assert_eq!(normalize_word("balloons"), "balloon");
        assert_eq!(normalize_word("dollars"), "dollar");
        assert_eq!(normalize_word("the"), "the");
    }

    #[test]
    fn plural_handling() {
        assert_eq!(normalize_word("boxes"), "box");
        assert_eq!(normalize_word("inches"), "inch");
        assert_eq!(normalize_word("pieces"), "piece");
        assert_eq!(normalize_word("cards"), "card");
        assert_eq!(normalize_word("pennies"), "penny");
        assert_eq!(normalize_word("children"), "child");
        assert_eq!(normalize_word("glass"), "glass");
        assert_eq!(normalize_word("bus"), "bus");
    }

    #[test]
    fn verb_inflection() {
        assert_eq!(normalize_word("picked"), "pick");
        assert_eq!(normalize_word("gives"), "give");
        assert_eq!(normalize_word("collects"), "collect");
        assert_eq!(normalize_word("made"), "make");
        assert_eq!(normalize_word("running"), "run");
        assert_eq!(normalize_word("taking"), "take");
        assert_eq!(normalize_word("planned"), "plan");
        assert_eq!(normalize_word("agreed"), "agree");
        assert_eq!(normalize_word("speed"), "speed");
    }

    #[test]
    fn be_forms_stay_distinct() {
        // Frequency tables count these as separate words.
        assert_eq!(normalize_word("is"), "is");
        assert_eq!(normalize_word("were"), "were");
        assert_eq!(normalize_word("was"), "was");
        assert_eq!(normalize_word("his"), "his");
        assert_eq!(normalize_word("will"), "will");
    }

    #[test]
    fn derivational_stripping() {
        assert_eq!(normalize_word("darkness"), "dark");
        assert_eq!(normalize_word("useful"), "use");
        assert_eq!(normalize_word("careless"), "care");
        assert_eq!(normalize_word("thoughtfulness"), "thought");
        // guards
        assert_eq!(normalize_word("less"), "less");
        assert_eq!(normalize_word("unless"), "unless");
        assert_eq!(normalize_word("size"), "size");
    }

    #[test]
    fn lowercases() {
        assert_eq!(normalize_word("Emily"), "emily");
        assert_eq!(normalize_word("BALLOONS"), "balloon");
    }

    #[test]
    fn idempotent_on_common_words() {
        for w in [
            "balloons", "dollars", "the", "boxes", "pieces", "picked", "running",
            "darkness", "thoughtfulness", "is", "his", "was", "morning", "things",
            "kiwis", "blipped", "families", "candies", "only", "early", "father",
            "number0", "'s", "?", "a", "speed", "agreed", "less", "address",
        ] {
            let once = normalize_word(w);
            assert_eq!(normalize_word(&once), once, "not idempotent for {w:?}");
        }
    }

    proptest::proptest! {
        #[test]
        fn idempotent_and_lowercase_on_arbitrary_words(w in "[a-zA-Z']{1,14}") {
            let once = normalize_word(&w);
            proptest::prop_assert_eq!(normalize_word(&once), once.clone());
            proptest::prop_assert_eq!(once.to_lowercase(), once);
        }
    }
}
