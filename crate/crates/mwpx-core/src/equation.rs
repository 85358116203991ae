//! Prefix-notation equations: parsing, evaluation, and answer matching.
//!
//! Equations are serialized as space-separated prefix token strings
//! (`"- number1 number0"`), exactly as they appear in dataset files.
//! Operands are either number tokens binding into a problem's extracted
//! number list or literal numeric constants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relative-or-absolute tolerance used by [`answers_match`].
pub const ANSWER_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error, PartialEq)]
pub enum EquationError {
    #[error("arity error: {0}")]
    Arity(String),
    #[error("unknown token {0:?}")]
    UnknownToken(String),
    #[error("number token number{index} is unbound (only {available} numbers available)")]
    UnboundNumberToken { index: usize, available: usize },
    #[error("division by zero")]
    DivisionByZero,
    #[error("equation contains no operator")]
    DegenerateEquation,
}

/// The four binary operators of the equation vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Operator {
    Add,
    Sub,
    Mul,
    Div,
}

impl Operator {
    pub fn apply(self, lhs: f64, rhs: f64) -> Result<f64, EquationError> {
        match self {
            Operator::Add => Ok(lhs + rhs),
            Operator::Sub => Ok(lhs - rhs),
            Operator::Mul => Ok(lhs * rhs),
            Operator::Div => {
                if rhs == 0.0 {
                    Err(EquationError::DivisionByZero)
                } else {
                    Ok(lhs / rhs)
                }
            }
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Operator::Add => "+",
            Operator::Sub => "-",
            Operator::Mul => "*",
            Operator::Div => "/",
        }
    }
}

/// One token of a prefix equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EqToken {
    Op(Operator),
    /// `numberk`, binding to the k-th extracted number of a problem.
    Number(usize),
    /// A literal constant. Never produced by the reference solver, but
    /// accepted in dataset files.
    Const(f64),
}

impl fmt::Display for EqToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EqToken::Op(op) => f.write_str(op.symbol()),
            EqToken::Number(k) => write!(f, "number{k}"),
            EqToken::Const(c) => write!(f, "{c}"),
        }
    }
}

/// Parse a single equation token.
pub fn parse_token(tok: &str) -> Result<EqToken, EquationError> {
    match tok {
        "+" => return Ok(EqToken::Op(Operator::Add)),
        "-" => return Ok(EqToken::Op(Operator::Sub)),
        "*" => return Ok(EqToken::Op(Operator::Mul)),
        "/" => return Ok(EqToken::Op(Operator::Div)),
        _ => {}
    }
    if let Some(rest) = tok.strip_prefix("number") {
        if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
            // Index widths stay tiny in practice; overflow means garbage input.
            return rest
                .parse::<usize>()
                .map(EqToken::Number)
                .map_err(|_| EquationError::UnknownToken(tok.to_string()));
        }
    }
    if let Ok(c) = tok.parse::<f64>() {
        if c.is_finite() {
            return Ok(EqToken::Const(c));
        }
    }
    Err(EquationError::UnknownToken(tok.to_string()))
}

/// An arity-valid prefix equation.
///
/// Arity validity: scanning the token sequence right to left with a stack,
/// every operator finds exactly two operands and exactly one value remains.
/// The constructor enforces this, so a held `PrefixEquation` is always
/// evaluable modulo unbound number tokens and division by zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct PrefixEquation {
    tokens: Vec<EqToken>,
}

impl PrefixEquation {
    pub fn new(tokens: Vec<EqToken>) -> Result<Self, EquationError> {
        validate_arity(&tokens)?;
        Ok(Self { tokens })
    }

    pub fn tokens(&self) -> &[EqToken] {
        &self.tokens
    }

    /// Surface strings of the tokens, as they appear in dataset files.
    pub fn token_strings(&self) -> Vec<String> {
        self.tokens.iter().map(|t| t.to_string()).collect()
    }

    pub fn operator_count(&self) -> usize {
        self.tokens
            .iter()
            .filter(|t| matches!(t, EqToken::Op(_)))
            .count()
    }

    /// Largest number-token index referenced, if any.
    pub fn max_number_index(&self) -> Option<usize> {
        self.tokens
            .iter()
            .filter_map(|t| match t {
                EqToken::Number(k) => Some(*k),
                _ => None,
            })
            .max()
    }
}

impl FromStr for PrefixEquation {
    type Err = EquationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let tokens = s
            .split_whitespace()
            .map(parse_token)
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(tokens)
    }
}

impl fmt::Display for PrefixEquation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for t in &self.tokens {
            if !first {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
            first = false;
        }
        Ok(())
    }
}

impl TryFrom<String> for PrefixEquation {
    type Error = EquationError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<PrefixEquation> for String {
    fn from(eq: PrefixEquation) -> String {
        eq.to_string()
    }
}

fn validate_arity(tokens: &[EqToken]) -> Result<(), EquationError> {
    if tokens.is_empty() {
        return Err(EquationError::Arity("empty token stream".into()));
    }
    let mut values = 0usize;
    for tok in tokens.iter().rev() {
        match tok {
            EqToken::Op(_) => {
                if values < 2 {
                    return Err(EquationError::Arity(format!(
                        "operator {tok} is missing an operand"
                    )));
                }
                values -= 1;
            }
            _ => values += 1,
        }
    }
    if values != 1 {
        return Err(EquationError::Arity(format!(
            "{} values remain after reduction",
            values
        )));
    }
    Ok(())
}

/// A binary expression tree. Leaves hold operand tokens.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Leaf(EqToken),
    Node {
        op: Operator,
        left: Box<Expr>,
        right: Box<Expr>,
    },
}

impl Expr {
    /// Preorder token sequence; reproduces the parsed input.
    pub fn preorder(&self) -> Vec<EqToken> {
        let mut out = Vec::new();
        self.collect_preorder(&mut out);
        out
    }

    fn collect_preorder(&self, out: &mut Vec<EqToken>) {
        match self {
            Expr::Leaf(t) => out.push(*t),
            Expr::Node { op, left, right } => {
                out.push(EqToken::Op(*op));
                left.collect_preorder(out);
                right.collect_preorder(out);
            }
        }
    }
}

/// Parse a prefix token stream into a binary expression tree.
///
/// Rejects streams with missing or leftover tokens.
pub fn parse_prefix(tokens: &[EqToken]) -> Result<Expr, EquationError> {
    let mut pos = 0usize;
    let expr = parse_at(tokens, &mut pos)?;
    if pos != tokens.len() {
        return Err(EquationError::Arity(format!(
            "{} extra tokens after a complete expression",
            tokens.len() - pos
        )));
    }
    Ok(expr)
}

/// Parse a prefix equation string directly into a tree.
pub fn parse_prefix_str(s: &str) -> Result<Expr, EquationError> {
    let tokens = s
        .split_whitespace()
        .map(parse_token)
        .collect::<Result<Vec<_>, _>>()?;
    parse_prefix(&tokens)
}

fn parse_at(tokens: &[EqToken], pos: &mut usize) -> Result<Expr, EquationError> {
    let Some(tok) = tokens.get(*pos) else {
        return Err(EquationError::Arity("unexpected end of tokens".into()));
    };
    *pos += 1;
    match tok {
        EqToken::Op(op) => {
            let left = parse_at(tokens, pos)?;
            let right = parse_at(tokens, pos)?;
            Ok(Expr::Node {
                op: *op,
                left: Box::new(left),
                right: Box::new(right),
            })
        }
        operand => Ok(Expr::Leaf(*operand)),
    }
}

/// Evaluate a prefix equation against a problem's extracted numbers.
///
/// Scans right to left with a value stack, so it shares no code with the
/// tree-building parser above. Division is real-valued.
pub fn evaluate(equation: &PrefixEquation, numbers: &[f64]) -> Result<f64, EquationError> {
    evaluate_tokens(equation.tokens(), numbers)
}

/// Stack evaluation over a raw token slice. Also validates arity, so it is
/// usable on unvalidated predicted sequences.
pub fn evaluate_tokens(tokens: &[EqToken], numbers: &[f64]) -> Result<f64, EquationError> {
    let mut stack: Vec<f64> = Vec::with_capacity(tokens.len());
    for tok in tokens.iter().rev() {
        match tok {
            EqToken::Number(k) => {
                let value = numbers.get(*k).copied().ok_or({
                    EquationError::UnboundNumberToken {
                        index: *k,
                        available: numbers.len(),
                    }
                })?;
                stack.push(value);
            }
            EqToken::Const(c) => stack.push(*c),
            EqToken::Op(op) => {
                // Right-to-left scan: top of stack is the left operand.
                let lhs = stack
                    .pop()
                    .ok_or_else(|| EquationError::Arity(format!("operator {tok} lacks operands")))?;
                let rhs = stack
                    .pop()
                    .ok_or_else(|| EquationError::Arity(format!("operator {tok} lacks operands")))?;
                stack.push(op.apply(lhs, rhs)?);
            }
        }
    }
    if stack.len() != 1 {
        return Err(EquationError::Arity(format!(
            "{} values remain after reduction",
            stack.len()
        )));
    }
    Ok(stack[0])
}

/// Parse and evaluate a predicted token-string sequence in one step.
pub fn evaluate_token_strings(tokens: &[String], numbers: &[f64]) -> Result<f64, EquationError> {
    let parsed = tokens
        .iter()
        .map(|t| parse_token(t))
        .collect::<Result<Vec<_>, _>>()?;
    evaluate_tokens(&parsed, numbers)
}

/// Answer accuracy test: true iff `|predicted - gold|` is within `1e-4`
/// relative-or-absolute tolerance. The scale is `max(1, |predicted|, |gold|)`
/// so the relation is symmetric.
///
/// Non-finite inputs never match.
pub fn answers_match(predicted: f64, gold: f64) -> bool {
    if !predicted.is_finite() || !gold.is_finite() {
        return false;
    }
    let scale = predicted.abs().max(gold.abs()).max(1.0);
    (predicted - gold).abs() <= ANSWER_TOLERANCE * scale
}
