//! Factor models: attributes, their discrete levels, and forbidding constraints.
//!
//! A [`FactorModel`] describes the full design space `A = A_1 x ... x A_n` and,
//! through its constraints, the valid subspace `B`. Constraint expressions mark
//! combinations that are *forbidden*; an empty constraint list means every
//! combination is valid.
//!
//! Models are read from and written to JSON:
//!
//! ```json
//! {"factors": [{"name": "temperature", "values": ["low", "medium", "high"]}],
//!  "constraints": [{"op": "and", "args": [{"factor": "generation", "value": "greedy"},
//!                                          {"factor": "temperature", "value": "high"}]}]}
//! ```

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Enumeration cap for exact valid-combination counts.
pub const ENUMERATION_CAP: u128 = 1_000_000;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("malformed model document: {0}")]
    Malformed(String),
    #[error("model declares no factors")]
    NoFactors,
    #[error("factor name must be nonempty")]
    EmptyName,
    #[error("duplicate factor name {0:?}")]
    DuplicateFactor(String),
    #[error("factor {0:?} must declare at least 2 values")]
    TooFewValues(String),
    #[error("factor {factor:?} declares value {value:?} more than once")]
    DuplicateValue { factor: String, value: String },
    #[error("unknown factor {0:?}")]
    UnknownFactor(String),
    #[error("unknown value {value:?} for factor {factor:?}")]
    UnknownValue { factor: String, value: String },
    #[error("operator {op:?} expects {expected} argument(s), got {got}")]
    Arity {
        op: &'static str,
        expected: &'static str,
        got: usize,
    },
    #[error("combination assigns {got} values but the model has {expected} factors")]
    IncompleteCombination { expected: usize, got: usize },
}

/// One attribute of the design space with its ordered, distinct levels.
///
/// The first level is the reference level used by treatment coding.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub name: String,
    pub values: Vec<String>,
}

impl Factor {
    pub fn new<S: Into<String>>(
        name: S,
        values: impl IntoIterator<Item = impl Into<String>>,
    ) -> Self {
        Self {
            name: name.into(),
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn levels(&self) -> usize {
        self.values.len()
    }

    pub fn value_index(&self, label: &str) -> Option<usize> {
        self.values.iter().position(|v| v == label)
    }
}

/// A constraint expression as written in a model document.
///
/// A combination that satisfies the expression is forbidden.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Constraint {
    Atom { factor: String, value: String },
    Op { op: Operator, args: Vec<Constraint> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Operator {
    Not,
    And,
    Or,
    Implies,
}

impl Operator {
    fn name(self) -> &'static str {
        match self {
            Operator::Not => "not",
            Operator::And => "and",
            Operator::Or => "or",
            Operator::Implies => "implies",
        }
    }
}

impl Constraint {
    pub fn atom(factor: impl Into<String>, value: impl Into<String>) -> Self {
        Constraint::Atom {
            factor: factor.into(),
            value: value.into(),
        }
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(arg: Constraint) -> Self {
        Constraint::Op {
            op: Operator::Not,
            args: vec![arg],
        }
    }

    pub fn and(args: Vec<Constraint>) -> Self {
        Constraint::Op {
            op: Operator::And,
            args,
        }
    }

    pub fn or(args: Vec<Constraint>) -> Self {
        Constraint::Op {
            op: Operator::Or,
            args,
        }
    }

    pub fn implies(lhs: Constraint, rhs: Constraint) -> Self {
        Constraint::Op {
            op: Operator::Implies,
            args: vec![lhs, rhs],
        }
    }
}

/// Constraint with atoms resolved to (factor index, level index).
#[derive(Debug, Clone, PartialEq, Eq)]
enum Expr {
    Atom(usize, usize),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
    /// Rule `lhs -> rhs`; true when the rule is broken, so that as a
    /// constraint it forbids exactly the rows with lhs and not rhs.
    Implies(Box<Expr>, Box<Expr>),
}

/// Kleene three-valued truth, used to evaluate constraints on partial rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Truth {
    True,
    False,
    Unknown,
}

impl Truth {
    fn not(self) -> Truth {
        match self {
            Truth::True => Truth::False,
            Truth::False => Truth::True,
            Truth::Unknown => Truth::Unknown,
        }
    }
}

impl Expr {
    fn eval(&self, assignment: &[Option<usize>]) -> Truth {
        match self {
            Expr::Atom(f, v) => match assignment[*f] {
                None => Truth::Unknown,
                Some(x) if x == *v => Truth::True,
                Some(_) => Truth::False,
            },
            Expr::Not(e) => e.eval(assignment).not(),
            Expr::And(es) => {
                let mut acc = Truth::True;
                for e in es {
                    match e.eval(assignment) {
                        Truth::False => return Truth::False,
                        Truth::Unknown => acc = Truth::Unknown,
                        Truth::True => {}
                    }
                }
                acc
            }
            Expr::Or(es) => {
                let mut acc = Truth::False;
                for e in es {
                    match e.eval(assignment) {
                        Truth::True => return Truth::True,
                        Truth::Unknown => acc = Truth::Unknown,
                        Truth::False => {}
                    }
                }
                acc
            }
            Expr::Implies(a, b) => match (a.eval(assignment), b.eval(assignment)) {
                (Truth::False, _) | (_, Truth::True) => Truth::False,
                (Truth::True, Truth::False) => Truth::True,
                _ => Truth::Unknown,
            },
        }
    }
}

/// A full assignment: one level index per factor, in model factor order.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Combination(Vec<usize>);

impl Combination {
    /// Wraps level indices without validation; use [`FactorModel::combination`]
    /// or [`FactorModel::check_combination`] for checked construction.
    pub fn from_levels(levels: Vec<usize>) -> Self {
        Combination(levels)
    }

    pub fn levels(&self) -> &[usize] {
        &self.0
    }

    pub fn level(&self, factor: usize) -> usize {
        self.0[factor]
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Sizes of the full and the constraint-valid design space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceSize {
    pub full: u128,
    /// `None` when `full` exceeds [`ENUMERATION_CAP`].
    pub valid: Option<u128>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDocument {
    factors: Vec<Factor>,
    #[serde(default)]
    constraints: Vec<Constraint>,
}

/// The declared design space. Immutable after construction.
#[derive(Debug, Clone)]
pub struct FactorModel {
    factors: Vec<Factor>,
    constraints: Vec<Constraint>,
    compiled: Vec<Expr>,
}

impl PartialEq for FactorModel {
    fn eq(&self, other: &Self) -> bool {
        self.factors == other.factors && self.constraints == other.constraints
    }
}

impl FactorModel {
    pub fn new(factors: Vec<Factor>, constraints: Vec<Constraint>) -> Result<Self, ModelError> {
        if factors.is_empty() {
            return Err(ModelError::NoFactors);
        }
        let mut names = HashSet::new();
        for f in &factors {
            if f.name.is_empty() {
                return Err(ModelError::EmptyName);
            }
            if !names.insert(f.name.as_str()) {
                return Err(ModelError::DuplicateFactor(f.name.clone()));
            }
            if f.values.len() < 2 {
                return Err(ModelError::TooFewValues(f.name.clone()));
            }
            let mut seen = HashSet::new();
            for v in &f.values {
                if !seen.insert(v.as_str()) {
                    return Err(ModelError::DuplicateValue {
                        factor: f.name.clone(),
                        value: v.clone(),
                    });
                }
            }
        }
        let mut model = FactorModel {
            factors,
            constraints: Vec::new(),
            compiled: Vec::new(),
        };
        let compiled = constraints
            .iter()
            .map(|c| model.compile(c))
            .collect::<Result<Vec<_>, _>>()?;
        model.constraints = constraints;
        model.compiled = compiled;
        Ok(model)
    }

    /// Parses and validates a JSON model document.
    pub fn from_json(document: &str) -> Result<Self, ModelError> {
        let doc: ModelDocument =
            serde_json::from_str(document).map_err(|e| ModelError::Malformed(e.to_string()))?;
        Self::new(doc.factors, doc.constraints)
    }

    pub fn to_json(&self) -> String {
        let doc = ModelDocument {
            factors: self.factors.clone(),
            constraints: self.constraints.clone(),
        };
        serde_json::to_string_pretty(&doc).expect("model serializes")
    }

    /// The bundled running example: twelve two-level and three three-level factors
    /// describing an LLM code-summarization pipeline.
    pub fn running_example() -> Self {
        Self::from_json(include_str!("../data/running_example.json"))
            .expect("bundled model is valid")
    }

    fn compile(&self, c: &Constraint) -> Result<Expr, ModelError> {
        match c {
            Constraint::Atom { factor, value } => {
                let fi = self
                    .factor_index(factor)
                    .ok_or_else(|| ModelError::UnknownFactor(factor.clone()))?;
                let vi = self.factors[fi].value_index(value).ok_or_else(|| {
                    ModelError::UnknownValue {
                        factor: factor.clone(),
                        value: value.clone(),
                    }
                })?;
                Ok(Expr::Atom(fi, vi))
            }
            Constraint::Op { op, args } => {
                let arity_err = |expected| ModelError::Arity {
                    op: op.name(),
                    expected,
                    got: args.len(),
                };
                let mut sub = args
                    .iter()
                    .map(|a| self.compile(a))
                    .collect::<Result<Vec<_>, _>>()?;
                match op {
                    Operator::Not => {
                        if sub.len() != 1 {
                            return Err(arity_err("exactly 1"));
                        }
                        Ok(Expr::Not(Box::new(sub.remove(0))))
                    }
                    Operator::Implies => {
                        if sub.len() != 2 {
                            return Err(arity_err("exactly 2"));
                        }
                        let rhs = sub.pop().expect("two args");
                        let lhs = sub.pop().expect("two args");
                        Ok(Expr::Implies(Box::new(lhs), Box::new(rhs)))
                    }
                    Operator::And if sub.is_empty() => Err(arity_err("at least 1")),
                    Operator::Or if sub.is_empty() => Err(arity_err("at least 1")),
                    Operator::And => Ok(Expr::And(sub)),
                    Operator::Or => Ok(Expr::Or(sub)),
                }
            }
        }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn factor(&self, index: usize) -> &Factor {
        &self.factors[index]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn has_constraints(&self) -> bool {
        !self.compiled.is_empty()
    }

    pub fn num_factors(&self) -> usize {
        self.factors.len()
    }

    pub fn factor_index(&self, name: &str) -> Option<usize> {
        self.factors.iter().position(|f| f.name == name)
    }

    pub fn level_counts(&self) -> Vec<usize> {
        self.factors.iter().map(Factor::levels).collect()
    }

    /// Builds a combination from value labels given in factor order.
    pub fn combination<S: AsRef<str>>(&self, labels: &[S]) -> Result<Combination, ModelError> {
        if labels.len() != self.factors.len() {
            return Err(ModelError::IncompleteCombination {
                expected: self.factors.len(),
                got: labels.len(),
            });
        }
        labels
            .iter()
            .zip(&self.factors)
            .map(|(label, f)| {
                f.value_index(label.as_ref())
                    .ok_or_else(|| ModelError::UnknownValue {
                        factor: f.name.clone(),
                        value: label.as_ref().to_string(),
                    })
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Combination)
    }

    /// Value labels of a combination, in factor order.
    pub fn labels<'a>(&'a self, c: &Combination) -> Vec<&'a str> {
        c.0.iter()
            .zip(&self.factors)
            .map(|(&v, f)| f.values[v].as_str())
            .collect()
    }

    /// Checks that `c` is complete and every level index is in range.
    pub fn check_combination(&self, c: &Combination) -> Result<(), ModelError> {
        if c.0.len() != self.factors.len() {
            return Err(ModelError::IncompleteCombination {
                expected: self.factors.len(),
                got: c.0.len(),
            });
        }
        for (&v, f) in c.0.iter().zip(&self.factors) {
            if v >= f.values.len() {
                return Err(ModelError::UnknownValue {
                    factor: f.name.clone(),
                    value: format!("#{v}"),
                });
            }
        }
        Ok(())
    }

    /// True iff `c` satisfies none of the forbidding constraints.
    pub fn is_valid(&self, c: &Combination) -> Result<bool, ModelError> {
        self.check_combination(c)?;
        let partial: Vec<Option<usize>> = c.0.iter().copied().map(Some).collect();
        Ok(self.forbidden(&partial) == Truth::False)
    }

    /// Evaluates the disjunction of all constraints on a partial assignment.
    /// `True` means some constraint already forbids every completion.
    pub fn forbidden(&self, partial: &[Option<usize>]) -> Truth {
        let mut acc = Truth::False;
        for e in &self.compiled {
            match e.eval(partial) {
                Truth::True => return Truth::True,
                Truth::Unknown => acc = Truth::Unknown,
                Truth::False => {}
            }
        }
        acc
    }

    pub fn space_size(&self) -> SpaceSize {
        let full = self
            .factors
            .iter()
            .fold(1u128, |acc, f| acc.saturating_mul(f.values.len() as u128));
        let valid = if !self.has_constraints() {
            Some(full)
        } else if full <= ENUMERATION_CAP {
            Some(self.count_valid())
        } else {
            None
        };
        SpaceSize { full, valid }
    }

    fn count_valid(&self) -> u128 {
        let mut partial = vec![None; self.factors.len()];
        self.count_from(0, &mut partial)
    }

    fn count_from(&self, depth: usize, partial: &mut Vec<Option<usize>>) -> u128 {
        match self.forbidden(partial) {
            Truth::True => return 0,
            // no constraint can fire below this node
            Truth::False => {
                return self.factors[depth..]
                    .iter()
                    .map(|f| f.values.len() as u128)
                    .product();
            }
            Truth::Unknown => {}
        }
        let mut total = 0;
        for v in 0..self.factors[depth].values.len() {
            partial[depth] = Some(v);
            total += self.count_from(depth + 1, partial);
        }
        partial[depth] = None;
        total
    }

    /// All combinations of the full space in lexicographic level order.
    /// Intended for small models; the caller is responsible for size.
    pub fn enumerate_all(&self) -> impl Iterator<Item = Combination> + '_ {
        let counts = self.level_counts();
        let total: usize = counts.iter().product();
        (0..total).map(move |mut i| {
            let mut levels = vec![0; counts.len()];
            for (slot, &m) in levels.iter_mut().zip(&counts).rev() {
                *slot = i % m;
                i /= m;
            }
            Combination(levels)
        })
    }
}

impl fmt::Display for FactorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for factor in &self.factors {
            writeln!(f, "{}: {}", factor.name, factor.values.join(", "))?;
        }
        write!(f, "{} constraint(s)", self.constraints.len())
    }
}
