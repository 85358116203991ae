//! Perturbed dataset variants: remove (or exclusively keep) tag classes
//! while always preserving number tokens.
//!
//! Tags are computed once on the original tokens, so combined removals equal
//! unions of single removals. Equation, numbers, answer, id, and category are
//! never touched; only the token sequence changes.

use serde::{Deserialize, Serialize};

use crate::corpus::{MathWordProblem, ProblemFlag};
use crate::tagger::{detect_named_entities, tag_tokens, Tag, TaggedToken, TaggerBackend};

/// Selects a class of tokens by tag or by a derived property.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Selector {
    /// All tokens with the given tag.
    Tag(Tag),
    /// ADJ tokens (wh-words excluded; they carry the WH tag).
    CommonAdj,
    /// WH-class tokens ("how", "what", ...).
    WhAdj,
    /// Person-name tokens (PROPN minus months and other listed non-persons).
    NamedEntity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    /// Delete tokens matching any selector.
    Remove,
    /// Keep only tokens matching a selector, plus number tokens.
    KeepOnly,
}

/// A named dataset transformation defining one report variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub name: String,
    pub mode: Mode,
    pub classes: Vec<Selector>,
}

impl PerturbationSpec {
    pub fn new(name: &str, mode: Mode, classes: Vec<Selector>) -> Self {
        Self {
            name: name.to_string(),
            mode,
            classes,
        }
    }

    /// The 13 standard variants, in report order.
    pub fn standard_suite() -> Vec<PerturbationSpec> {
        use Mode::{KeepOnly, Remove};
        let noun = Selector::Tag(Tag::Noun);
        let propn = Selector::Tag(Tag::Propn);
        let verb = Selector::Tag(Tag::Verb);
        let prep = Selector::Tag(Tag::Prep);
        vec![
            Self::new("common_adjectives_removed", Remove, vec![Selector::CommonAdj]),
            Self::new("wh_adjectives_removed", Remove, vec![Selector::WhAdj]),
            Self::new(
                "all_adjectives_removed",
                Remove,
                vec![Selector::CommonAdj, Selector::WhAdj],
            ),
            Self::new("named_entities_removed", Remove, vec![Selector::NamedEntity]),
            Self::new("nouns_removed", Remove, vec![noun, propn]),
            Self::new("prepositions_removed", Remove, vec![prep]),
            Self::new("verbs_removed", Remove, vec![verb]),
            Self::new("nouns_and_verbs_removed", Remove, vec![noun, propn, verb]),
            Self::new("prepositions_and_verbs_removed", Remove, vec![prep, verb]),
            Self::new("only_nouns_and_number_tokens", KeepOnly, vec![noun, propn]),
            Self::new("only_prepositions_and_number_tokens", KeepOnly, vec![prep]),
            Self::new("only_verbs_and_number_tokens", KeepOnly, vec![verb]),
            Self::new("all_words_except_number_tokens_removed", KeepOnly, vec![]),
        ]
    }

    pub fn by_name(name: &str) -> Option<PerturbationSpec> {
        Self::standard_suite().into_iter().find(|s| s.name == name)
    }
}

fn matches_selector(
    token: &TaggedToken,
    named_entity: bool,
    selector: &Selector,
) -> bool {
    match selector {
        Selector::Tag(tag) => token.tag == *tag,
        Selector::CommonAdj => token.tag == Tag::Adj,
        Selector::WhAdj => token.tag == Tag::Wh,
        Selector::NamedEntity => named_entity,
    }
}

/// Decide, per token of an already-tagged sentence, which survive the
/// transformation. Number tokens always survive.
pub fn keep_mask(tagged: &[TaggedToken], spec: &PerturbationSpec) -> Vec<bool> {
    let named = detect_named_entities(tagged);
    tagged
        .iter()
        .zip(&named)
        .map(|(tok, &is_name)| {
            if tok.tag == Tag::Numtok {
                return true;
            }
            let selected = spec
                .classes
                .iter()
                .any(|sel| matches_selector(tok, is_name, sel));
            match spec.mode {
                Mode::Remove => !selected,
                Mode::KeepOnly => selected,
            }
        })
        .collect()
}

/// Apply one perturbation to a problem. Tags come from the original tokens.
pub fn apply_perturbation(
    problem: &MathWordProblem,
    spec: &PerturbationSpec,
    backend: &dyn TaggerBackend,
) -> MathWordProblem {
    let tagged = tag_tokens(&problem.tokens, backend);
    let mask = keep_mask(&tagged, spec);
    let tokens: Vec<String> = problem
        .tokens
        .iter()
        .zip(&mask)
        .filter(|(_, keep)| **keep)
        .map(|(t, _)| t.clone())
        .collect();

    let mut out = problem.clone();
    if tokens.is_empty() {
        // Possible only when the problem had no number tokens. Keep the
        // record so variant datasets stay index-aligned with the original.
        if !out.flags.contains(&ProblemFlag::EmptyAfterPerturbation) {
            out.flags.push(ProblemFlag::EmptyAfterPerturbation);
        }
    }
    out.tokens = tokens;
    out
}

/// Produce all 13 standard variants of a dataset, in report order.
pub fn generate_suite(
    dataset: &[MathWordProblem],
    backend: &dyn TaggerBackend,
) -> Vec<(PerturbationSpec, Vec<MathWordProblem>)> {
    PerturbationSpec::standard_suite()
        .into_iter()
        .map(|spec| {
            let variant: Vec<MathWordProblem> = dataset
                .iter()
                .map(|p| apply_perturbation(p, &spec, backend))
                .collect();
            (spec, variant)
        })
        .collect()
}

/// File name for a variant written next to its source dataset.
pub fn variant_file_name(dataset_stem: &str, variant: &str) -> String {
    format!("{dataset_stem}__{variant}.jsonl")
}
