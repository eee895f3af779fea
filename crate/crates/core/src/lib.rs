//! Combinatorial test plans for LLM benchmark variants and the statistics used
//! to compare the scored variants.
//!
//! A [`FactorModel`] lists the factors, their levels and any forbidding
//! constraints. [`generate_plan`] builds a plan covering every feasible
//! k-way interaction, [`ScoreDataset`] ingests binary judgments per plan row,
//! and the analysis side offers pairwise proportion tests with Holm–Šidák
//! correction ([`pairwise_report`]) and logistic regression on the factor
//! levels ([`fit_logistic`], [`coefficient_table`], [`wald_table`]).
//!
//! Statistics are generic over [`Scalar`] (`f32` or `f64`); the `*64` aliases
//! name the common double-precision instantiations.

pub mod coverage;
pub mod factor_model;
pub mod format;
pub mod generator;
pub mod pairwise;
pub mod plan;
pub mod regression;
pub mod scalar;
pub mod scores;
pub mod simulation;

pub use coverage::{
    coverage_report, partition_interactions, required_interactions, validate_plan, CoverageError,
    CoverageReport, CoverageRequirement, Interaction,
};
pub use factor_model::{Combination, Constraint, Factor, FactorModel, ModelError, SpaceSize};
pub use generator::{generate_plan, random_plan, GenerateError};
pub use pairwise::{
    holm_sidak_adjust, pairwise_report, proportion_ztest, PairTest, PairwiseError, PairwiseReport,
};
pub use plan::{read_row_ids, Plan, PlanError, PlanRow, Provenance};
pub use regression::{
    build_design_matrix, coefficient_table, fit_logistic, significance_symbol, wald_table,
    CoefficientTable, DesignMatrix, RegressionError, RegressionFit, WaldTable,
};
pub use scalar::Scalar;
pub use scores::{sample_stats, Observation, RowStats, SampleStats, ScoreDataset, ScoreError};
pub use simulation::{
    run_paper_simulation, simulate_with_effects, SimulatedDataset, SimulationConfig,
    SimulationError,
};

pub type RowStats64 = RowStats<f64>;
pub type SampleStats64 = SampleStats<f64>;
pub type SampleStats32 = SampleStats<f32>;
pub type PairwiseReport64 = PairwiseReport<f64>;
pub type PairwiseReport32 = PairwiseReport<f32>;
pub type DesignMatrix64 = DesignMatrix<f64>;
pub type RegressionFit64 = RegressionFit<f64>;
pub type RegressionFit32 = RegressionFit<f32>;
pub type CoefficientTable64 = CoefficientTable<f64>;
pub type WaldTable64 = WaldTable<f64>;
