//! Experiment plans and their CSV representation.
//!
//! The plan file has a header `row_id,<factor1>,<factor2>,...` followed by one
//! line per combination holding the literal value labels.

use std::collections::HashSet;

use crate::factor_model::{Combination, FactorModel};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("plan CSV: {0}")]
    Csv(String),
    #[error(
        "plan header must start with row_id and name every model factor exactly once; got {0:?}"
    )]
    Header(Vec<String>),
    #[error("plan line {line}: {reason}")]
    Line { line: usize, reason: String },
    #[error("duplicate row id {0}")]
    DuplicateId(usize),
    #[error("rows {first} and {second} are the same combination")]
    DuplicateRow { first: usize, second: usize },
    #[error("row {row_id}: {reason}")]
    InvalidRow { row_id: usize, reason: String },
    #[error("plan has no rows")]
    Empty,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlanRow {
    /// Stable 1-based identifier referenced by score files.
    pub id: usize,
    pub combination: Combination,
}

/// How a generated plan came to be.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub seed: u64,
    pub strength: usize,
    pub scope: Vec<String>,
    pub fixed: Vec<(String, String)>,
}

/// An ordered list of distinct, complete combinations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plan {
    rows: Vec<PlanRow>,
    provenance: Option<Provenance>,
}

impl Plan {
    /// Numbers rows 1..=n in the given order.
    pub fn new(model: &FactorModel, rows: Vec<Combination>) -> Result<Self, PlanError> {
        let rows = rows
            .into_iter()
            .enumerate()
            .map(|(i, combination)| PlanRow {
                id: i + 1,
                combination,
            })
            .collect();
        Self::with_ids(model, rows)
    }

    /// Keeps caller-supplied row ids; they must be unique.
    pub fn with_ids(model: &FactorModel, rows: Vec<PlanRow>) -> Result<Self, PlanError> {
        if rows.is_empty() {
            return Err(PlanError::Empty);
        }
        let mut ids = HashSet::new();
        let mut seen = std::collections::HashMap::new();
        for row in &rows {
            if !ids.insert(row.id) {
                return Err(PlanError::DuplicateId(row.id));
            }
            model
                .check_combination(&row.combination)
                .map_err(|e| PlanError::InvalidRow {
                    row_id: row.id,
                    reason: e.to_string(),
                })?;
            if let Some(first) = seen.insert(&row.combination, row.id) {
                return Err(PlanError::DuplicateRow {
                    first,
                    second: row.id,
                });
            }
        }
        Ok(Self {
            rows,
            provenance: None,
        })
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = Some(provenance);
        self
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn rows(&self) -> &[PlanRow] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn row(&self, id: usize) -> Option<&PlanRow> {
        self.rows.iter().find(|r| r.id == id)
    }

    pub fn combinations(&self) -> impl Iterator<Item = &Combination> {
        self.rows.iter().map(|r| &r.combination)
    }

    pub fn from_csv(model: &FactorModel, text: &str) -> Result<Self, PlanError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| PlanError::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        // column position -> factor index
        let bad_header = || PlanError::Header(header.clone());
        if header.first().map(String::as_str) != Some("row_id")
            || header.len() != model.num_factors() + 1
        {
            return Err(bad_header());
        }
        let mut column_factor = Vec::with_capacity(model.num_factors());
        for name in &header[1..] {
            let fi = model.factor_index(name).ok_or_else(bad_header)?;
            if column_factor.contains(&fi) {
                return Err(bad_header());
            }
            column_factor.push(fi);
        }

        let mut rows = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| PlanError::Csv(e.to_string()))?;
            let id: usize = record[0]
                .parse()
                .ok()
                .filter(|&id| id >= 1)
                .ok_or_else(|| PlanError::Line {
                    line,
                    reason: format!("row_id {:?} is not a positive integer", &record[0]),
                })?;
            let mut levels = vec![0; model.num_factors()];
            for (col, &fi) in column_factor.iter().enumerate() {
                let label = &record[col + 1];
                let factor = model.factor(fi);
                levels[fi] = factor.value_index(label).ok_or_else(|| PlanError::Line {
                    line,
                    reason: format!("unknown value {label:?} for factor {:?}", factor.name),
                })?;
            }
            rows.push(PlanRow {
                id,
                combination: Combination::from_levels(levels),
            });
        }
        Self::with_ids(model, rows)
    }

    /// Serializes with factors in model order. Output is byte-stable.
    pub fn to_csv(&self, model: &FactorModel) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["row_id".to_string()];
        header.extend(model.factors().iter().map(|f| f.name.clone()));
        writer.write_record(&header).expect("in-memory write");
        for row in &self.rows {
            let mut record = vec![row.id.to_string()];
            record.extend(
                model
                    .labels(&row.combination)
                    .into_iter()
                    .map(str::to_string),
            );
            writer.write_record(&record).expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("labels are utf-8")
    }
}

/// Row ids of a plan file, read without a model. The header must start with
/// `row_id`; ids must be positive and unique.
pub fn read_row_ids(text: &str) -> Result<Vec<usize>, PlanError> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| PlanError::Csv(e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.first().map(String::as_str) != Some("row_id") {
        return Err(PlanError::Header(header));
    }
    let mut seen = HashSet::new();
    let mut ids = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| PlanError::Csv(e.to_string()))?;
        let id = record[0]
            .parse::<usize>()
            .ok()
            .filter(|&id| id >= 1)
            .ok_or_else(|| PlanError::Line {
                line: i + 2,
                reason: format!("row_id {:?} is not a positive integer", &record[0]),
            })?;
        if !seen.insert(id) {
            return Err(PlanError::DuplicateId(id));
        }
        ids.push(id);
    }
    if ids.is_empty() {
        return Err(PlanError::Empty);
    }
    Ok(ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_model::Factor;

    fn model() -> FactorModel {
        FactorModel::new(
            vec![
                Factor::new("x", ["T", "F"]),
                Factor::new("temp", ["low", "medium", "high"]),
            ],
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn csv_layout() {
        let m = model();
        let plan = Plan::new(
            &m,
            vec![
                m.combination(&["T", "high"]).unwrap(),
                m.combination(&["F", "low"]).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(plan.to_csv(&m), "row_id,x,temp\n1,T,high\n2,F,low\n");
        assert_eq!(Plan::from_csv(&m, &plan.to_csv(&m)).unwrap(), plan);
    }

    #[test]
    fn columns_may_be_reordered_and_ids_sparse() {
        let m = model();
        let plan = Plan::from_csv(&m, "row_id,temp,x\n1,low,T\n4,high,F\n").unwrap();
        assert_eq!(plan.rows()[1].id, 4);
        assert_eq!(m.labels(&plan.rows()[1].combination), vec!["F", "high"]);
    }

    #[test]
    fn rejects_bad_files() {
        let m = model();
        assert!(matches!(
            Plan::from_csv(&m, "id,x,temp\n1,T,low\n"),
            Err(PlanError::Header(_))
        ));
        assert!(matches!(
            Plan::from_csv(&m, "row_id,x\n1,T\n"),
            Err(PlanError::Header(_))
        ));
        assert!(matches!(
            Plan::from_csv(&m, "row_id,x,temp\n1,T,hot\n"),
            Err(PlanError::Line { line: 2, .. })
        ));
        assert!(matches!(
            Plan::from_csv(&m, "row_id,x,temp\n0,T,low\n"),
            Err(PlanError::Line { .. })
        ));
        assert_eq!(
            Plan::from_csv(&m, "row_id,x,temp\n1,T,low\n1,F,low\n"),
            Err(PlanError::DuplicateId(1))
        );
        assert_eq!(
            Plan::from_csv(&m, "row_id,x,temp\n1,T,low\n2,T,low\n"),
            Err(PlanError::DuplicateRow {
                first: 1,
                second: 2
            })
        );
        assert_eq!(Plan::from_csv(&m, "row_id,x,temp\n"), Err(PlanError::Empty));
    }

    #[test]
    fn row_ids_without_model() {
        assert_eq!(
            read_row_ids("row_id,a,b\n3,x,y\n1,x,z\n").unwrap(),
            vec![3, 1]
        );
        assert_eq!(
            read_row_ids("row_id,a\n2,x\n2,y\n").unwrap_err(),
            PlanError::DuplicateId(2)
        );
        assert!(matches!(
            read_row_ids("id,a\n1,x\n"),
            Err(PlanError::Header(_))
        ));
        assert_eq!(read_row_ids("row_id,a\n").unwrap_err(), PlanError::Empty);
    }
}
