//! Binary score observations per plan row and their per-row sample statistics.
//!
//! Score files are CSV with header `row_id,sample_id,score`, where `score` is
//! exactly `0` or `1` and `(row_id, sample_id)` is unique.

use std::collections::{BTreeMap, HashSet};

use crate::plan::Plan;
use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ScoreError {
    #[error("scores CSV: {0}")]
    Csv(String),
    #[error("scores header must be row_id,sample_id,score; got {0:?}")]
    Header(Vec<String>),
    #[error("scores file has no observations")]
    Empty,
    #[error("line {line}: unknown row {row_id:?} (not in the plan)")]
    UnknownRow { line: usize, row_id: String },
    #[error("line {line}: score must be 0 or 1, got {value:?}")]
    BadScore { line: usize, value: String },
    #[error("duplicate observation for row {row_id}, sample {sample_id:?}")]
    Duplicate { row_id: usize, sample_id: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub row_id: usize,
    pub sample_id: String,
    pub score: bool,
}

/// Validated observations linked to the row ids of one plan.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoreDataset {
    observations: Vec<Observation>,
    /// row ids of the linked plan, in plan order
    plan_rows: Vec<usize>,
}

impl ScoreDataset {
    pub fn new(plan: &Plan, observations: Vec<Observation>) -> Result<Self, ScoreError> {
        Self::for_rows(plan.rows().iter().map(|r| r.id).collect(), observations)
    }

    /// Like [`ScoreDataset::new`] when only the plan's row ids are known.
    pub fn for_rows(
        plan_rows: Vec<usize>,
        observations: Vec<Observation>,
    ) -> Result<Self, ScoreError> {
        if observations.is_empty() {
            return Err(ScoreError::Empty);
        }
        let known: HashSet<usize> = plan_rows.iter().copied().collect();
        let mut keys = HashSet::new();
        for (i, o) in observations.iter().enumerate() {
            if !known.contains(&o.row_id) {
                return Err(ScoreError::UnknownRow {
                    line: i + 2,
                    row_id: o.row_id.to_string(),
                });
            }
            if !keys.insert((o.row_id, o.sample_id.as_str())) {
                return Err(ScoreError::Duplicate {
                    row_id: o.row_id,
                    sample_id: o.sample_id.clone(),
                });
            }
        }
        Ok(Self {
            observations,
            plan_rows,
        })
    }

    pub fn from_csv(plan: &Plan, text: &str) -> Result<Self, ScoreError> {
        Self::from_csv_for_rows(plan.rows().iter().map(|r| r.id).collect(), text)
    }

    pub fn from_csv_for_rows(plan_rows: Vec<usize>, text: &str) -> Result<Self, ScoreError> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| ScoreError::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if header != ["row_id", "sample_id", "score"] {
            return Err(ScoreError::Header(header));
        }
        let known: HashSet<usize> = plan_rows.iter().copied().collect();
        let mut observations = Vec::new();
        for (i, record) in reader.records().enumerate() {
            let line = i + 2;
            let record = record.map_err(|e| ScoreError::Csv(e.to_string()))?;
            let row_id = record[0]
                .parse::<usize>()
                .ok()
                .filter(|id| known.contains(id))
                .ok_or_else(|| ScoreError::UnknownRow {
                    line,
                    row_id: record[0].to_string(),
                })?;
            let score = match &record[2] {
                "0" => false,
                "1" => true,
                other => {
                    return Err(ScoreError::BadScore {
                        line,
                        value: other.to_string(),
                    })
                }
            };
            observations.push(Observation {
                row_id,
                sample_id: record[1].to_string(),
                score,
            });
        }
        Self::for_rows(plan_rows, observations)
    }

    pub fn to_csv(&self) -> String {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(["row_id", "sample_id", "score"])
            .expect("in-memory write");
        for o in &self.observations {
            writer
                .write_record([
                    o.row_id.to_string(),
                    o.sample_id.clone(),
                    (o.score as u8).to_string(),
                ])
                .expect("in-memory write");
        }
        String::from_utf8(writer.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn plan_rows(&self) -> &[usize] {
        &self.plan_rows
    }

    /// (successes, count) per row id, for rows with at least one observation.
    pub fn tallies(&self) -> BTreeMap<usize, (usize, usize)> {
        let mut t = BTreeMap::new();
        for o in &self.observations {
            let e = t.entry(o.row_id).or_insert((0, 0));
            e.0 += o.score as usize;
            e.1 += 1;
        }
        t
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowStats<F> {
    pub row_id: usize,
    pub n: usize,
    pub successes: usize,
    pub mean: F,
    /// Sample standard deviation (n-1 denominator); `None` when n = 1.
    pub std: Option<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleStats<F> {
    /// Scored rows in plan order.
    pub rows: Vec<RowStats<F>>,
    /// Plan rows with no observations; excluded from `rows`.
    pub unscored: Vec<usize>,
}

impl<F: Scalar> SampleStats<F> {
    pub fn get(&self, row_id: usize) -> Option<&RowStats<F>> {
        self.rows.iter().find(|r| r.row_id == row_id)
    }

    pub fn total_observations(&self) -> usize {
        self.rows.iter().map(|r| r.n).sum()
    }
}

impl<F: Scalar> RowStats<F> {
    pub fn from_counts(row_id: usize, successes: usize, n: usize) -> Self {
        assert!(n >= 1 && successes <= n, "need 0 <= successes <= n, n >= 1");
        let mean = F::of_usize(successes) / F::of_usize(n);
        // For 0/1 data: sum of squared deviations = n * mean * (1 - mean).
        let std = (n >= 2).then(|| {
            let nf = F::of_usize(n);
            (mean * (F::one() - mean) * nf / (nf - F::one())).sqrt()
        });
        Self {
            row_id,
            n,
            successes,
            mean,
            std,
        }
    }
}

pub fn sample_stats<F: Scalar>(dataset: &ScoreDataset) -> SampleStats<F> {
    let tallies = dataset.tallies();
    let mut rows = Vec::new();
    let mut unscored = Vec::new();
    for &id in &dataset.plan_rows {
        match tallies.get(&id) {
            Some(&(s, n)) => rows.push(RowStats::from_counts(id, s, n)),
            None => unscored.push(id),
        }
    }
    SampleStats { rows, unscored }
}
