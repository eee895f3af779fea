//! Treatment-coded design matrices built from a plan and its scores.

use std::collections::BTreeSet;

use super::RegressionError;
use crate::factor_model::FactorModel;
use crate::plan::Plan;
use crate::scalar::Scalar;
use crate::scores::ScoreDataset;

pub const INTERCEPT: &str = "Intercept";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnKind {
    Intercept,
    /// Indicator of `factor == level` (level is never the reference level).
    Main {
        factor: usize,
        level: usize,
    },
    /// Product of two main-effect indicators from different factors.
    Interaction {
        a: (usize, usize),
        b: (usize, usize),
    },
    /// Supplied directly through [`DesignMatrix::from_parts`].
    Raw,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// A named set of columns tested jointly by the Wald table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Group {
    pub name: String,
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DroppedColumn {
    pub name: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix<F> {
    columns: Vec<Column>,
    groups: Vec<Group>,
    /// row-major, one row per observation
    data: Vec<F>,
    target: Vec<F>,
    dropped: Vec<DroppedColumn>,
    notes: Vec<String>,
}

/// `factor=level`
pub fn main_name(model: &FactorModel, factor: usize, level: usize) -> String {
    let f = model.factor(factor);
    format!("{}={}", f.name, f.values[level])
}

impl<F: Scalar> DesignMatrix<F> {
    /// Assembles a design from raw parts. Groups default to one per column,
    /// with the intercept (if the first column is named so) as its own group.
    pub fn from_parts(
        names: Vec<String>,
        data: Vec<F>,
        target: Vec<F>,
    ) -> Result<Self, RegressionError> {
        let p = names.len();
        if p == 0 || target.is_empty() || data.len() != p * target.len() {
            return Err(RegressionError::Shape(format!(
                "{} values for {} columns x {} rows",
                data.len(),
                p,
                target.len()
            )));
        }
        if target.iter().any(|&y| y != F::zero() && y != F::one()) {
            return Err(RegressionError::Shape("target must be 0/1".into()));
        }
        let columns: Vec<Column> = names
            .into_iter()
            .enumerate()
            .map(|(i, name)| {
                let kind = if i == 0 && name == INTERCEPT {
                    ColumnKind::Intercept
                } else {
                    ColumnKind::Raw
                };
                Column { name, kind }
            })
            .collect();
        let groups = columns
            .iter()
            .enumerate()
            .map(|(i, c)| Group {
                name: c.name.clone(),
                columns: vec![i],
            })
            .collect();
        Ok(Self {
            columns,
            groups,
            data,
            target,
            dropped: Vec::new(),
            notes: Vec::new(),
        })
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn dropped(&self) -> &[DroppedColumn] {
        &self.dropped
    }

    /// Diagnostics about the data (dropped levels, shared rows).
    pub fn notes(&self) -> &[String] {
        &self.notes
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row(&self, i: usize) -> &[F] {
        let p = self.columns.len();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn target(&self) -> &[F] {
        &self.target
    }

    /// Removes columns with no nonzero entry. Groups are rebuilt per column.
    pub fn without_zero_columns(&self) -> Self {
        let keep: Vec<usize> = (0..self.n_cols())
            .filter(|&j| (0..self.n_rows()).any(|i| self.row(i)[j] != F::zero()))
            .collect();
        let names = keep.iter().map(|&j| self.columns[j].name.clone()).collect();
        let data = (0..self.n_rows())
            .flat_map(|i| keep.iter().map(move |&j| self.row(i)[j]))
            .collect();
        Self::from_parts(names, data, self.target.clone()).expect("subset of a valid design")
    }
}

/// Expands every observation's plan row into treatment-coded indicators.
///
/// `interaction_order` is 1 (main effects) or 2 (adds pairwise products).
/// Levels never observed among the scored rows are dropped with a note, and a
/// factor showing a single level is dropped entirely.
pub fn build_design_matrix<F: Scalar>(
    model: &FactorModel,
    plan: &Plan,
    dataset: &ScoreDataset,
    interaction_order: usize,
) -> Result<DesignMatrix<F>, RegressionError> {
    if !(1..=2).contains(&interaction_order) {
        return Err(RegressionError::InteractionOrder(interaction_order));
    }
    if dataset.is_empty() {
        return Err(RegressionError::Shape("no observations".into()));
    }
    let scored: BTreeSet<usize> = dataset.observations().iter().map(|o| o.row_id).collect();
    let scored_rows: Vec<_> = plan
        .rows()
        .iter()
        .filter(|r| scored.contains(&r.id))
        .collect();
    let mut notes = Vec::new();
    let mut dropped = Vec::new();

    let mut columns = vec![Column {
        name: INTERCEPT.into(),
        kind: ColumnKind::Intercept,
    }];
    let mut groups = vec![Group {
        name: INTERCEPT.into(),
        columns: vec![0],
    }];
    // retained (factor, level) indicators, per factor
    let mut retained: Vec<Vec<usize>> = vec![Vec::new(); model.num_factors()];
    for (fi, factor) in model.factors().iter().enumerate() {
        let observed: BTreeSet<usize> = scored_rows
            .iter()
            .map(|r| r.combination.level(fi))
            .collect();
        if observed.len() < 2 {
            let level = observed
                .iter()
                .next()
                .map(|&l| factor.values[l].as_str())
                .unwrap_or("-");
            for level_idx in 1..factor.levels() {
                dropped.push(DroppedColumn {
                    name: main_name(model, fi, level_idx),
                    reason: format!("factor constant at {level:?} in the scored rows"),
                });
            }
            notes.push(format!(
                "factor {} is constant ({level}) in the scored rows and was dropped",
                factor.name
            ));
            continue;
        }
        let mut group = Group {
            name: factor.name.clone(),
            columns: Vec::new(),
        };
        for level in 1..factor.levels() {
            let name = main_name(model, fi, level);
            if !observed.contains(&level) {
                notes.push(format!("level {name} never observed; column dropped"));
                dropped.push(DroppedColumn {
                    name,
                    reason: "level never observed".into(),
                });
                continue;
            }
            group.columns.push(columns.len());
            columns.push(Column {
                name,
                kind: ColumnKind::Main { factor: fi, level },
            });
            retained[fi].push(level);
        }
        groups.push(group);
    }

    if interaction_order == 2 {
        for a in 0..model.num_factors() {
            for b in a + 1..model.num_factors() {
                let mut group = Group {
                    name: format!("{}:{}", model.factor(a).name, model.factor(b).name),
                    columns: Vec::new(),
                };
                for &la in &retained[a] {
                    for &lb in &retained[b] {
                        let name =
                            format!("{}:{}", main_name(model, a, la), main_name(model, b, lb));
                        let seen = scored_rows
                            .iter()
                            .any(|r| r.combination.level(a) == la && r.combination.level(b) == lb);
                        if !seen {
                            notes
                                .push(format!("interaction {name} never observed; column dropped"));
                            dropped.push(DroppedColumn {
                                name,
                                reason: "level pair never observed".into(),
                            });
                            continue;
                        }
                        group.columns.push(columns.len());
                        columns.push(Column {
                            name,
                            kind: ColumnKind::Interaction {
                                a: (a, la),
                                b: (b, lb),
                            },
                        });
                    }
                }
                if !group.columns.is_empty() {
                    groups.push(group);
                }
            }
        }
    }

    if columns.len() == 1 {
        return Err(RegressionError::RankDeficient {
            columns: dropped.iter().map(|d| d.name.clone()).collect(),
            detail: "no factor varies across the scored rows".into(),
        });
    }

    let p = columns.len();
    let mut data = Vec::with_capacity(dataset.len() * p);
    let mut target = Vec::with_capacity(dataset.len());
    for o in dataset.observations() {
        let row = plan
            .row(o.row_id)
            .ok_or_else(|| RegressionError::Shape(format!("row {} not in plan", o.row_id)))?;
        let c = &row.combination;
        let on = |(f, l): (usize, usize)| c.level(f) == l;
        for col in &columns {
            let v = match col.kind {
                ColumnKind::Intercept => true,
                ColumnKind::Main { factor, level } => on((factor, level)),
                ColumnKind::Interaction { a, b } => on(a) && on(b),
                ColumnKind::Raw => unreachable!("builder emits no raw columns"),
            };
            data.push(if v { F::one() } else { F::zero() });
        }
        target.push(if o.score { F::one() } else { F::zero() });
    }
    if dataset.len() > scored.len() {
        notes.push(format!(
            "{} observations share {} plan rows; they are treated as independent",
            dataset.len(),
            scored.len()
        ));
    }
    Ok(DesignMatrix {
        columns,
        groups,
        data,
        target,
        dropped,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_model::Factor;
    use crate::scores::Observation;

    fn obs(row_id: usize, i: usize, score: bool) -> Observation {
        Observation {
            row_id,
            sample_id: format!("s{i}"),
            score,
        }
    }

    #[test]
    fn single_boolean_factor() {
        let m = FactorModel::new(vec![Factor::new("x", ["F", "T"])], vec![]).unwrap();
        let plan = Plan::new(&m, m.enumerate_all().collect()).unwrap();
        let ds = ScoreDataset::new(
            &plan,
            vec![
                obs(1, 0, true),
                obs(1, 1, false),
                obs(2, 0, true),
                obs(2, 1, true),
            ],
        )
        .unwrap();
        let dm = build_design_matrix::<f64>(&m, &plan, &ds, 1).unwrap();
        assert_eq!(dm.column_names(), vec!["Intercept", "x=T"]);
        assert_eq!(dm.n_rows(), 4);
        assert_eq!(dm.row(2), &[1.0, 1.0]);
        assert_eq!(dm.target(), &[1.0, 0.0, 1.0, 1.0]);
    }

    #[test]
    fn order_two_adds_product() {
        let m = FactorModel::new(
            vec![Factor::new("x", ["F", "T"]), Factor::new("y", ["F", "T"])],
            vec![],
        )
        .unwrap();
        let plan = Plan::new(&m, m.enumerate_all().collect()).unwrap();
        let ds =
            ScoreDataset::new(&plan, (1..=4).map(|r| obs(r, 0, r % 2 == 0)).collect()).unwrap();
        let dm = build_design_matrix::<f64>(&m, &plan, &ds, 2).unwrap();
        assert_eq!(
            dm.column_names(),
            vec!["Intercept", "x=T", "y=T", "x=T:y=T"]
        );
        assert_eq!(dm.row(3), &[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(dm.groups().last().unwrap().name, "x:y");
    }

    #[test]
    fn running_example_has_nineteen_columns() {
        let m = FactorModel::running_example();
        let plan = crate::generator::random_plan(&m, 300, 1).unwrap();
        let ds = ScoreDataset::new(
            &plan,
            plan.rows()
                .iter()
                .map(|r| obs(r.id, 0, r.id % 3 == 0))
                .collect(),
        )
        .unwrap();
        let dm = build_design_matrix::<f64>(&m, &plan, &ds, 1).unwrap();
        assert_eq!(dm.n_cols(), 19, "{:?} {:?}", dm.column_names(), dm.notes());
        assert_eq!(dm.groups().len(), 16);
        assert!(dm.dropped().is_empty());
    }

    #[test]
    fn unobserved_levels_and_constant_factors() {
        let m = FactorModel::new(
            vec![
                Factor::new("t", ["low", "medium", "high"]),
                Factor::new("x", ["F", "T"]),
                Factor::new("c", ["a", "b"]),
            ],
            vec![],
        )
        .unwrap();
        let rows = vec![
            m.combination(&["low", "F", "b"]).unwrap(),
            m.combination(&["high", "T", "b"]).unwrap(),
            m.combination(&["low", "T", "b"]).unwrap(),
        ];
        let plan = Plan::new(&m, rows).unwrap();
        let ds = ScoreDataset::new(&plan, (1..=3).map(|r| obs(r, 0, r == 2)).collect()).unwrap();
        let dm = build_design_matrix::<f64>(&m, &plan, &ds, 1).unwrap();
        assert_eq!(dm.column_names(), vec!["Intercept", "t=high", "x=T"]);
        let dropped: Vec<_> = dm.dropped().iter().map(|d| d.name.as_str()).collect();
        assert_eq!(dropped, vec!["t=medium", "c=b"]);
    }

    #[test]
    fn single_row_is_rank_deficient() {
        let m = FactorModel::new(
            vec![Factor::new("x", ["F", "T"]), Factor::new("y", ["F", "T"])],
            vec![],
        )
        .unwrap();
        let plan = Plan::new(&m, m.enumerate_all().collect()).unwrap();
        let ds = ScoreDataset::new(&plan, vec![obs(2, 0, true), obs(2, 1, false)]).unwrap();
        let err = build_design_matrix::<f64>(&m, &plan, &ds, 1).unwrap_err();
        assert!(
            matches!(err, RegressionError::RankDeficient { .. }),
            "{err}"
        );
    }

    #[test]
    fn bad_order() {
        let m = FactorModel::new(vec![Factor::new("x", ["F", "T"])], vec![]).unwrap();
        let plan = Plan::new(&m, m.enumerate_all().collect()).unwrap();
        let ds = ScoreDataset::new(&plan, vec![obs(1, 0, true)]).unwrap();
        assert_eq!(
            build_design_matrix::<f64>(&m, &plan, &ds, 3).unwrap_err(),
            RegressionError::InteractionOrder(3)
        );
    }
}
