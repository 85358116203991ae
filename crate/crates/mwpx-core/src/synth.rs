//! Deterministic templated corpus of single-operation problems, used for
//! desk-scale training runs and the end-to-end suite.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{classify_operation, mask_numbers, Category, MathWordProblem};
use crate::equation::{evaluate, PrefixEquation};

const NAMES: &[&str] = &[
    "Tom", "Sara", "Emily", "Jake", "Mia", "Noah", "Lily", "Ben", "Ava", "Sam",
];
const OBJECTS: &[&str] = &[
    "apples", "cards", "marbles", "books", "pencils", "balloons", "stickers", "coins",
    "shells", "cookies",
];

/// Generate `n` templated problems, cycling through the four single-operation
/// categories. Same seed, same corpus.
pub fn generate_corpus(n: usize, seed: u64) -> Vec<MathWordProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let category = Category::ALL[i % 4];
        out.push(generate_problem(i, category, &mut rng));
    }
    out
}

fn generate_problem(index: usize, category: Category, rng: &mut ChaCha8Rng) -> MathWordProblem {
    let name = *NAMES.choose(rng).expect("names nonempty");
    let mut other = *NAMES.choose(rng).expect("names nonempty");
    while other == name {
        other = *NAMES.choose(rng).expect("names nonempty");
    }
    let obj = *OBJECTS.choose(rng).expect("objects nonempty");
    let template = rng.gen_range(0..3);

    let (text, eq) = match category {
        Category::Add => {
            let a = rng.gen_range(2..60);
            let b = rng.gen_range(2..60);
            let text = match template {
                0 => format!(
                    "{name} had {a} {obj} . {other} gave {name} {b} more . How many {obj} does {name} have now ?"
                ),
                1 => format!(
                    "There are {a} {obj} in the box . {name} puts in {b} more . How many {obj} are in the box now ?"
                ),
                _ => format!(
                    "{name} picked {a} {obj} and {other} picked {b} {obj} . How many {obj} did they pick in all ?"
                ),
            };
            (text, "+ number0 number1")
        }
        Category::Sub => {
            let a = rng.gen_range(10..80);
            let b = rng.gen_range(2..a);
            let text = match template {
                0 => format!(
                    "{name} had {a} {obj} . {name} ate {b} of them . How many {obj} are left ?"
                ),
                1 => format!(
                    "{name} has {a} {obj} . {other} takes {b} away . How many {obj} does {name} have left ?"
                ),
                _ => format!(
                    "There were {a} {obj} . Then {b} of them were lost . How many {obj} remain ?"
                ),
            };
            (text, "- number0 number1")
        }
        Category::Mul => {
            let a = rng.gen_range(2..13);
            let b = rng.gen_range(2..13);
            let text = match template {
                0 => format!(
                    "Each box holds {a} {obj} . There are {b} boxes . How many {obj} are there in all ?"
                ),
                1 => format!(
                    "{name} buys {a} bags with {b} {obj} in each bag . How many {obj} does {name} buy ?"
                ),
                _ => format!("There are {a} rows of {b} {obj} . How many {obj} are there ?"),
            };
            (text, "* number0 number1")
        }
        _ => {
            // DIV (MULTI never comes up in the 0..4 cycle)
            let divisor = rng.gen_range(2..10);
            let quotient = rng.gen_range(2..13);
            let a = divisor * quotient;
            let text = match template {
                0 => format!(
                    "{name} has {a} {obj} . {name} puts them equally into {divisor} boxes . How many {obj} are in each box ?"
                ),
                1 => format!(
                    "{a} {obj} are shared equally among {divisor} kids . How many {obj} does each kid get ?"
                ),
                _ => format!(
                    "{name} made {a} {obj} and packs {divisor} in each bag . How many bags does {name} make ?"
                ),
            };
            (text, "/ number0 number1")
        }
    };

    let (tokens, numbers) = mask_numbers(&text);
    let equation: PrefixEquation = eq.parse().expect("template equation is valid");
    let answer = evaluate(&equation, &numbers).expect("template equation evaluates");
    debug_assert_eq!(classify_operation(&equation).unwrap(), category);
    MathWordProblem {
        id: format!("synth{index:04}"),
        tokens,
        numbers,
        equation,
        answer,
        category,
        flags: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_balanced() {
        let a = generate_corpus(100, 42);
        let b = generate_corpus(100, 42);
        assert_eq!(a, b);
        for cat in [Category::Add, Category::Sub, Category::Mul, Category::Div] {
            assert_eq!(a.iter().filter(|p| p.category == cat).count(), 25);
        }
        assert!(a.iter().all(|p| p.category != Category::Multi));
    }

    #[test]
    fn problems_are_internally_consistent() {
        for p in generate_corpus(200, 7) {
            let value = evaluate(&p.equation, &p.numbers).unwrap();
            assert!(crate::equation::answers_match(value, p.answer), "{}", p.id);
            assert_eq!(p.numbers.len(), 2);
            assert!(p.tokens.iter().filter(|t| t.starts_with("number")).count() >= 2);
        }
    }
}
