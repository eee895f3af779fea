//! Greedy covering-plan construction.
//!
//! Each step builds [`CANDIDATES`] candidate rows and keeps the one that covers
//! the most still-uncovered interactions. A candidate starts from a random
//! uncovered interaction plus the fixed values, then assigns the remaining
//! factors in a shuffled order, each time picking the level that covers the
//! most uncovered interactions together with the factors assigned so far. A
//! level is only eligible if the partial row still has a valid completion.
//! All ties are broken with the seeded RNG, so a given seed always yields the
//! same plan.
//!
//! One greedy pass can walk into a trap (two complementary early rows on binary
//! factors force extra rows later), so the whole construction is repeated
//! [`RESTARTS`] times on separate RNG streams and the shortest plan is kept.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coverage::{
    complete_assignment, for_each_subset, required_interactions, CoverageRequirement, Interaction,
};
use crate::factor_model::{Combination, FactorModel};
use crate::plan::{Plan, Provenance};

/// Candidate rows built per greedy step.
pub const CANDIDATES: usize = 50;

/// Independent greedy passes per seed; the first shortest plan wins.
pub const RESTARTS: u64 = 8;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum GenerateError {
    #[error("nothing to cover: the requirement has no feasible interactions")]
    NothingToCover,
    #[error("internal error: {0}")]
    Internal(String),
}

/// Dense numbering of every k-way interaction over the scope.
struct InteractionIndex {
    strength: usize,
    scope: Vec<usize>,
    /// factor -> position in scope
    position: Vec<Option<usize>>,
    sizes: Vec<usize>,
    /// offsets by colex rank of the position subset
    offsets: Vec<usize>,
    binom: Vec<Vec<usize>>,
    total: usize,
}

impl InteractionIndex {
    fn new(model: &FactorModel, req: &CoverageRequirement) -> Self {
        let scope = req.scope().to_vec();
        let k = req.strength();
        let mut position = vec![None; model.num_factors()];
        for (p, &f) in scope.iter().enumerate() {
            position[f] = Some(p);
        }
        let sizes: Vec<usize> = scope.iter().map(|&f| model.factor(f).levels()).collect();
        let n = scope.len();
        let mut binom = vec![vec![0usize; k + 1]; n + 1];
        for i in 0..=n {
            binom[i][0] = 1;
            for j in 1..=k.min(i) {
                binom[i][j] = binom[i - 1][j - 1] + if j < i { binom[i - 1][j] } else { 0 };
            }
        }
        let mut index = Self {
            strength: k,
            scope,
            position,
            sizes,
            offsets: vec![0; binom[n][k]],
            binom,
            total: 0,
        };
        let positions: Vec<usize> = (0..n).collect();
        let mut total = 0;
        let mut offsets = vec![0; index.offsets.len()];
        for_each_subset(&positions, k, |subset| {
            offsets[index.rank(subset)] = total;
            total += subset.iter().map(|&p| index.sizes[p]).product::<usize>();
        });
        index.offsets = offsets;
        index.total = total;
        index
    }

    /// Colex rank of a sorted position subset.
    fn rank(&self, positions: &[usize]) -> usize {
        positions
            .iter()
            .enumerate()
            .map(|(i, &p)| self.binom[p][i + 1])
            .sum()
    }

    /// `terms` are (scope position, level) pairs sorted by position.
    fn id(&self, terms: &[(usize, usize)]) -> usize {
        let mut ranked = 0;
        let mut local = 0;
        for (i, &(p, v)) in terms.iter().enumerate() {
            ranked += self.binom[p][i + 1];
            local = local * self.sizes[p] + v;
        }
        self.offsets[ranked] + local
    }

    fn id_of(&self, t: &Interaction) -> usize {
        let terms: Vec<(usize, usize)> = t
            .terms
            .iter()
            .map(|&(f, v)| (self.position[f].expect("scoped factor"), v))
            .collect();
        self.id(&terms)
    }

    /// Calls `visit` with the id of every interaction in `row` that involves
    /// scope position `pivot`, restricted to positions assigned in `row`.
    fn for_each_through(&self, row: &[Option<usize>], pivot: usize, mut visit: impl FnMut(usize)) {
        let others: Vec<usize> = (0..self.scope.len())
            .filter(|&p| p != pivot && row[self.scope[p]].is_some())
            .collect();
        let mut terms = Vec::with_capacity(self.strength);
        for_each_subset(&others, self.strength - 1, |subset| {
            terms.clear();
            terms.extend(subset.iter().map(|&p| (p, row[self.scope[p]].unwrap())));
            let at = terms.partition_point(|&(p, _)| p < pivot);
            terms.insert(at, (pivot, row[self.scope[pivot]].unwrap()));
            visit(self.id(&terms));
        });
    }

    fn for_each_in_row(&self, row: &Combination, mut visit: impl FnMut(usize)) {
        let positions: Vec<usize> = (0..self.scope.len()).collect();
        let mut terms = Vec::with_capacity(self.strength);
        for_each_subset(&positions, self.strength, |subset| {
            terms.clear();
            terms.extend(subset.iter().map(|&p| (p, row.level(self.scope[p]))));
            visit(self.id(&terms));
        });
    }
}

struct Greedy<'a> {
    model: &'a FactorModel,
    req: &'a CoverageRequirement,
    index: InteractionIndex,
    uncovered: Vec<bool>,
    /// uncovered interactions, for seed selection
    pending: Vec<Interaction>,
    rng: ChaCha8Rng,
}

impl Greedy<'_> {
    fn gain_of_row(&self, row: &Combination) -> usize {
        let mut gain = 0;
        self.index
            .for_each_in_row(row, |id| gain += self.uncovered[id] as usize);
        gain
    }

    fn candidate(&mut self) -> Result<Combination, GenerateError> {
        let seed = self
            .pending
            .choose(&mut self.rng)
            .expect("pending is nonempty")
            .clone();
        let mut row = self.req.fixed_assignment(self.model);
        for &(f, v) in &seed.terms {
            row[f] = Some(v);
        }
        let mut order: Vec<usize> = (0..row.len()).filter(|&f| row[f].is_none()).collect();
        order.shuffle(&mut self.rng);

        let mut best = Vec::new();
        for f in order {
            best.clear();
            let mut best_gain = 0;
            for v in 0..self.model.factor(f).levels() {
                row[f] = Some(v);
                if self.model.has_constraints() && complete_assignment(self.model, &row).is_none() {
                    continue;
                }
                let mut gain = 0;
                if let Some(p) = self.index.position[f] {
                    self.index
                        .for_each_through(&row, p, |id| gain += self.uncovered[id] as usize);
                }
                if best.is_empty() || gain > best_gain {
                    best.clear();
                    best_gain = gain;
                }
                if gain == best_gain {
                    best.push(v);
                }
            }
            if best.is_empty() {
                let partial = row.iter().filter(|v| v.is_some()).count();
                return Err(GenerateError::Internal(format!(
                    "no valid level for factor {:?} after assigning {partial} factor(s)",
                    self.model.factor(f).name
                )));
            }
            row[f] = Some(best[self.rng.gen_range(0..best.len())]);
        }
        Ok(Combination::from_levels(
            row.into_iter().map(|v| v.expect("all assigned")).collect(),
        ))
    }
}

/// Builds a plan covering every feasible interaction of `req`.
pub fn generate_plan(
    model: &FactorModel,
    req: &CoverageRequirement,
    seed: u64,
) -> Result<Plan, GenerateError> {
    let required = required_interactions(model, req);
    if required.is_empty() {
        return Err(GenerateError::NothingToCover);
    }
    let mut best: Option<Vec<Combination>> = None;
    for restart in 0..RESTARTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(restart);
        let rows = greedy_pass(model, req, required.clone(), rng)?;
        if best.as_ref().is_none_or(|b| rows.len() < b.len()) {
            best = Some(rows);
        }
    }
    let rows = best.expect("at least one pass");

    let provenance = Provenance {
        seed,
        strength: req.strength(),
        scope: req
            .scope_names(model)
            .into_iter()
            .map(str::to_string)
            .collect(),
        fixed: req
            .fixed_labels(model)
            .into_iter()
            .map(|(f, v)| (f.to_string(), v.to_string()))
            .collect(),
    };
    Plan::new(model, rows)
        .map(|p| p.with_provenance(provenance))
        .map_err(|e| GenerateError::Internal(e.to_string()))
}

fn greedy_pass(
    model: &FactorModel,
    req: &CoverageRequirement,
    required: Vec<Interaction>,
    rng: ChaCha8Rng,
) -> Result<Vec<Combination>, GenerateError> {
    let index = InteractionIndex::new(model, req);
    let mut uncovered = vec![false; index.total];
    for t in &required {
        uncovered[index.id_of(t)] = true;
    }
    let mut greedy = Greedy {
        model,
        req,
        index,
        uncovered,
        pending: required,
        rng,
    };

    let mut rows = Vec::new();
    while !greedy.pending.is_empty() {
        let mut winner: Option<(Combination, usize)> = None;
        for _ in 0..CANDIDATES {
            let row = greedy.candidate()?;
            let gain = greedy.gain_of_row(&row);
            if winner.as_ref().is_none_or(|(_, g)| gain > *g) {
                winner = Some((row, gain));
            }
        }
        let (row, gain) = winner.expect("at least one candidate");
        if gain == 0 {
            return Err(GenerateError::Internal(
                "best candidate covers no new interaction".into(),
            ));
        }
        let mut newly = Vec::new();
        greedy.index.for_each_in_row(&row, |id| newly.push(id));
        for id in newly {
            greedy.uncovered[id] = false;
        }
        let (index, uncovered) = (&greedy.index, &greedy.uncovered);
        greedy.pending.retain(|t| uncovered[index.id_of(t)]);
        rows.push(row);
    }

    Ok(rows)
}

/// Draws `rows` distinct valid combinations uniformly at random (by rejection).
///
/// Used to build large plans for regression studies; returns fewer rows only if
/// the valid space is smaller than requested.
pub fn random_plan(model: &FactorModel, rows: usize, seed: u64) -> Result<Plan, GenerateError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let counts = model.level_counts();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(rows);
    let mut attempts = 0usize;
    let budget = rows.saturating_mul(1000).max(10_000);
    while out.len() < rows && attempts < budget {
        attempts += 1;
        let c = Combination::from_levels(counts.iter().map(|&m| rng.gen_range(0..m)).collect());
        if model.is_valid(&c).unwrap_or(false) && seen.insert(c.clone()) {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(GenerateError::NothingToCover);
    }
    Plan::new(model, out).map_err(|e| GenerateError::Internal(e.to_string()))
}
