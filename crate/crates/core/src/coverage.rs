//! k-way interaction requirements and plan coverage checking.
//!
//! A [`CoverageRequirement`] names the strength `k`, the factors whose
//! interactions must be covered, and fixed values for factors kept out of the
//! experiment. Only *feasible* interactions are required: those that extend,
//! together with the fixed values, to at least one constraint-valid combination.

use std::collections::HashSet;
use std::fmt;

use crate::factor_model::{Combination, FactorModel, Truth};
use crate::plan::Plan;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum CoverageError {
    #[error("strength must be at least 1")]
    ZeroStrength,
    #[error("strength {strength} exceeds the {scope} factor(s) in scope")]
    StrengthTooLarge { strength: usize, scope: usize },
    #[error("unknown factor {0:?}")]
    UnknownFactor(String),
    #[error("unknown value {value:?} for factor {factor:?}")]
    UnknownValue { factor: String, value: String },
    #[error("factor {0:?} listed twice")]
    Duplicate(String),
    #[error("factor {0:?} is both fixed and in the coverage scope")]
    FixedInScope(String),
    #[error("plan row {row_id} is invalid: {reason}")]
    InvalidRow { row_id: usize, reason: String },
}

/// Which interactions a plan must cover.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverageRequirement {
    strength: usize,
    /// Factor indices in model order.
    scope: Vec<usize>,
    /// (factor, level) pairs in model order.
    fixed: Vec<(usize, usize)>,
}

impl CoverageRequirement {
    /// Builds a requirement from factor names and value labels.
    ///
    /// When `scope` is `None` every factor that is not fixed is in scope.
    pub fn new<S: AsRef<str>>(
        model: &FactorModel,
        strength: usize,
        scope: Option<&[S]>,
        fixed: &[(S, S)],
    ) -> Result<Self, CoverageError> {
        let mut fixed_idx = Vec::with_capacity(fixed.len());
        for (name, value) in fixed {
            let (name, value) = (name.as_ref(), value.as_ref());
            let fi = model
                .factor_index(name)
                .ok_or_else(|| CoverageError::UnknownFactor(name.into()))?;
            let vi =
                model
                    .factor(fi)
                    .value_index(value)
                    .ok_or_else(|| CoverageError::UnknownValue {
                        factor: name.into(),
                        value: value.into(),
                    })?;
            if fixed_idx.iter().any(|&(f, _)| f == fi) {
                return Err(CoverageError::Duplicate(name.into()));
            }
            fixed_idx.push((fi, vi));
        }
        fixed_idx.sort_unstable();

        let scope_idx = match scope {
            Some(names) => {
                let mut idx = Vec::with_capacity(names.len());
                for name in names {
                    let name = name.as_ref();
                    let fi = model
                        .factor_index(name)
                        .ok_or_else(|| CoverageError::UnknownFactor(name.into()))?;
                    if idx.contains(&fi) {
                        return Err(CoverageError::Duplicate(name.into()));
                    }
                    if fixed_idx.iter().any(|&(f, _)| f == fi) {
                        return Err(CoverageError::FixedInScope(name.into()));
                    }
                    idx.push(fi);
                }
                idx.sort_unstable();
                idx
            }
            None => (0..model.num_factors())
                .filter(|f| !fixed_idx.iter().any(|&(g, _)| g == *f))
                .collect(),
        };
        Self::from_indices(strength, scope_idx, fixed_idx)
    }

    /// Full-scope requirement of the given strength with nothing fixed.
    pub fn full(model: &FactorModel, strength: usize) -> Result<Self, CoverageError> {
        Self::from_indices(strength, (0..model.num_factors()).collect(), Vec::new())
    }

    fn from_indices(
        strength: usize,
        scope: Vec<usize>,
        fixed: Vec<(usize, usize)>,
    ) -> Result<Self, CoverageError> {
        if strength == 0 {
            return Err(CoverageError::ZeroStrength);
        }
        if strength > scope.len() {
            return Err(CoverageError::StrengthTooLarge {
                strength,
                scope: scope.len(),
            });
        }
        Ok(Self {
            strength,
            scope,
            fixed,
        })
    }

    pub fn strength(&self) -> usize {
        self.strength
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn fixed(&self) -> &[(usize, usize)] {
        &self.fixed
    }

    /// Partial assignment holding only the fixed values.
    pub fn fixed_assignment(&self, model: &FactorModel) -> Vec<Option<usize>> {
        let mut partial = vec![None; model.num_factors()];
        for &(f, v) in &self.fixed {
            partial[f] = Some(v);
        }
        partial
    }

    pub fn scope_names<'a>(&self, model: &'a FactorModel) -> Vec<&'a str> {
        self.scope
            .iter()
            .map(|&f| model.factor(f).name.as_str())
            .collect()
    }

    pub fn fixed_labels<'a>(&self, model: &'a FactorModel) -> Vec<(&'a str, &'a str)> {
        self.fixed
            .iter()
            .map(|&(f, v)| {
                let factor = model.factor(f);
                (factor.name.as_str(), factor.values[v].as_str())
            })
            .collect()
    }
}

/// A value assignment to exactly `k` distinct scoped factors.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interaction {
    /// (factor, level) pairs in increasing factor order.
    pub terms: Vec<(usize, usize)>,
}

impl Interaction {
    pub fn new(mut terms: Vec<(usize, usize)>) -> Self {
        terms.sort_unstable();
        Self { terms }
    }

    pub fn covered_by(&self, row: &Combination) -> bool {
        self.terms.iter().all(|&(f, v)| row.level(f) == v)
    }

    pub fn display<'a>(&'a self, model: &'a FactorModel) -> InteractionDisplay<'a> {
        InteractionDisplay {
            interaction: self,
            model,
        }
    }
}

pub struct InteractionDisplay<'a> {
    interaction: &'a Interaction,
    model: &'a FactorModel,
}

impl fmt::Display for InteractionDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, &(fi, vi)) in self.interaction.terms.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            let factor = self.model.factor(fi);
            write!(f, "{}={}", factor.name, factor.values[vi])?;
        }
        Ok(())
    }
}

/// Finds a constraint-valid completion of `partial`, if one exists.
///
/// Depth-first over unassigned factors in declared order, levels in declared
/// order, pruning any node where a constraint is already definitely violated.
pub fn complete_assignment(model: &FactorModel, partial: &[Option<usize>]) -> Option<Combination> {
    let mut work = partial.to_vec();
    if extend(model, &mut work, 0) {
        Some(Combination::from_levels(
            work.into_iter().map(|v| v.unwrap_or(0)).collect(),
        ))
    } else {
        None
    }
}

fn extend(model: &FactorModel, work: &mut [Option<usize>], from: usize) -> bool {
    match model.forbidden(work) {
        Truth::True => return false,
        // unassigned factors may take any level; fill with the first
        Truth::False => return true,
        Truth::Unknown => {}
    }
    let Some(next) = (from..work.len()).find(|&f| work[f].is_none()) else {
        // fully assigned yet undecided cannot happen with two-valued leaves
        return false;
    };
    for v in 0..model.factor(next).levels() {
        work[next] = Some(v);
        if extend(model, work, next + 1) {
            return true;
        }
    }
    work[next] = None;
    false
}

/// True iff some valid combination agrees with both `t` and the fixed values.
pub fn interaction_feasible(
    model: &FactorModel,
    req: &CoverageRequirement,
    t: &Interaction,
) -> bool {
    let mut partial = req.fixed_assignment(model);
    for &(f, v) in &t.terms {
        match partial[f] {
            Some(existing) if existing != v => return false,
            _ => partial[f] = Some(v),
        }
    }
    if !model.has_constraints() {
        return true;
    }
    complete_assignment(model, &partial).is_some()
}

/// Calls `visit` with every k-subset of `items` in lexicographic order.
pub(crate) fn for_each_subset(items: &[usize], k: usize, mut visit: impl FnMut(&[usize])) {
    if k > items.len() {
        return;
    }
    let mut pos: Vec<usize> = (0..k).collect();
    let mut subset = vec![0; k];
    loop {
        for (s, &p) in subset.iter_mut().zip(&pos) {
            *s = items[p];
        }
        visit(&subset);
        // advance the rightmost position that can still move
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if pos[i] < items.len() - k + i {
                break;
            }
            if i == 0 {
                return;
            }
        }
        pos[i] += 1;
        for j in i + 1..k {
            pos[j] = pos[j - 1] + 1;
        }
    }
}

/// Every candidate interaction in deterministic order, before feasibility filtering.
fn all_interactions(model: &FactorModel, req: &CoverageRequirement) -> Vec<Interaction> {
    let mut out = Vec::new();
    for_each_subset(&req.scope, req.strength, |subset| {
        let sizes: Vec<usize> = subset.iter().map(|&f| model.factor(f).levels()).collect();
        let mut levels = vec![0; subset.len()];
        loop {
            out.push(Interaction {
                terms: subset.iter().copied().zip(levels.iter().copied()).collect(),
            });
            let mut i = levels.len();
            loop {
                if i == 0 {
                    return;
                }
                i -= 1;
                levels[i] += 1;
                if levels[i] < sizes[i] {
                    break;
                }
                levels[i] = 0;
            }
        }
    });
    out
}

/// Feasible interactions the requirement asks for, and the infeasible ones dropped.
#[derive(Debug, Clone, Default)]
pub struct InteractionSet {
    pub feasible: Vec<Interaction>,
    pub infeasible: Vec<Interaction>,
}

pub fn partition_interactions(model: &FactorModel, req: &CoverageRequirement) -> InteractionSet {
    let mut set = InteractionSet::default();
    for t in all_interactions(model, req) {
        if interaction_feasible(model, req, &t) {
            set.feasible.push(t);
        } else {
            set.infeasible.push(t);
        }
    }
    set
}

/// Feasible interactions, ordered by factor subset then by level tuple.
pub fn required_interactions(model: &FactorModel, req: &CoverageRequirement) -> Vec<Interaction> {
    partition_interactions(model, req).feasible
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageReport {
    pub required: usize,
    pub covered: usize,
    pub missing: Vec<Interaction>,
    pub coverage_ratio: f64,
}

impl CoverageReport {
    pub fn is_complete(&self) -> bool {
        self.missing.is_empty()
    }
}

/// Checks that every plan row is complete, valid and agrees with the fixed values.
pub fn validate_plan(
    model: &FactorModel,
    req: &CoverageRequirement,
    plan: &Plan,
) -> Result<(), CoverageError> {
    for row in plan.rows() {
        let invalid = |reason: String| CoverageError::InvalidRow {
            row_id: row.id,
            reason,
        };
        match model.is_valid(&row.combination) {
            Err(e) => return Err(invalid(e.to_string())),
            Ok(false) => return Err(invalid("violates a model constraint".into())),
            Ok(true) => {}
        }
        for &(f, v) in req.fixed() {
            if row.combination.level(f) != v {
                let factor = model.factor(f);
                return Err(invalid(format!(
                    "{} must be fixed to {:?}, found {:?}",
                    factor.name,
                    factor.values[v],
                    factor.values[row.combination.level(f)]
                )));
            }
        }
    }
    Ok(())
}

pub fn coverage_report(
    model: &FactorModel,
    req: &CoverageRequirement,
    plan: &Plan,
) -> Result<CoverageReport, CoverageError> {
    validate_plan(model, req, plan)?;
    let required = required_interactions(model, req);

    let mut present: HashSet<Interaction> = HashSet::new();
    for row in plan.rows() {
        for_each_subset(&req.scope, req.strength, |subset| {
            present.insert(Interaction {
                terms: subset
                    .iter()
                    .map(|&f| (f, row.combination.level(f)))
                    .collect(),
            });
        });
    }
    let missing: Vec<Interaction> = required
        .iter()
        .filter(|t| !present.contains(*t))
        .cloned()
        .collect();
    let covered = required.len() - missing.len();
    let coverage_ratio = if required.is_empty() {
        1.0
    } else {
        covered as f64 / required.len() as f64
    };
    Ok(CoverageReport {
        required: required.len(),
        covered,
        missing,
        coverage_ratio,
    })
}
