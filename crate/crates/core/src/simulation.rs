//! Synthetic score datasets.
//!
//! Two generators are provided. [`run_paper_simulation`] draws each plan row's
//! success rate from a Beta distribution whose parameters are themselves Gamma
//! distributed, independently of the row's factor levels. [`simulate_with_effects`]
//! makes the success rate a logistic function of the row's levels, which gives
//! the regression code a known truth to recover.
//!
//! Randomness comes from ChaCha8 keyed by the master seed. Stream 0 derives the
//! per-generation plan seeds; stream `row_id` holds every draw for that row, so
//! adding rows never changes the draws of existing ones.

use std::collections::{BTreeMap, HashSet};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coverage::CoverageRequirement;
use crate::factor_model::{Combination, FactorModel};
use crate::generator::{generate_plan, GenerateError};
use crate::plan::{Plan, PlanError};
use crate::regression::{main_name, INTERCEPT};
use crate::scores::{Observation, ScoreDataset, ScoreError};

#[derive(Debug, thiserror::Error)]
pub enum SimulationError {
    #[error("invalid simulation config: {0}")]
    Config(String),
    #[error("unknown design column {0:?} in coefficient map")]
    UnknownColumn(String),
    #[error(transparent)]
    Generate(#[from] GenerateError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    Score(#[from] ScoreError),
}

/// Gamma parameters are (shape, rate).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimulationConfig {
    pub alpha_shape: f64,
    pub alpha_rate: f64,
    pub beta_shape: f64,
    pub beta_rate: f64,
    pub samples_per_row: usize,
    pub generations: usize,
    pub seed: u64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            alpha_shape: 5.0,
            alpha_rate: 1.0,
            beta_shape: 2.0,
            beta_rate: 1.0,
            samples_per_row: 30,
            generations: 20,
            seed: 0,
        }
    }
}

impl SimulationConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), SimulationError> {
        let params = [
            ("alpha_shape", self.alpha_shape),
            ("alpha_rate", self.alpha_rate),
            ("beta_shape", self.beta_shape),
            ("beta_rate", self.beta_rate),
        ];
        for (name, v) in params {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SimulationError::Config(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.samples_per_row == 0 {
            return Err(SimulationError::Config(
                "samples_per_row must be at least 1".into(),
            ));
        }
        if self.generations == 0 {
            return Err(SimulationError::Config(
                "generations must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SimulatedDataset {
    pub plan: Plan,
    pub dataset: ScoreDataset,
    /// `(row_id, theta)` in plan order.
    pub theta: Vec<(usize, f64)>,
}

impl SimulatedDataset {
    pub fn theta_of(&self, row_id: usize) -> Option<f64> {
        self.theta
            .iter()
            .find(|(id, _)| *id == row_id)
            .map(|&(_, t)| t)
    }

    pub fn mean_theta(&self) -> f64 {
        self.theta.iter().map(|&(_, t)| t).sum::<f64>() / self.theta.len().max(1) as f64
    }

    /// Sidecar CSV `row_id,theta_true`.
    pub fn theta_csv(&self) -> String {
        let mut out = String::from("row_id,theta_true\n");
        for (id, t) in &self.theta {
            out.push_str(&format!("{id},{t}\n"));
        }
        out
    }
}

/// Generator for stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on the open interval (0, 1).
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Standard normal by the Marsaglia polar method (second variate discarded).
pub fn sample_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * rng.gen::<f64>() - 1.0;
        let v = 2.0 * rng.gen::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Gamma(shape, rate) by Marsaglia and Tsang. Shapes below one use the
/// `G(a + 1) * U^(1/a)` boost.
pub fn sample_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, rate: f64) -> f64 {
    assert!(
        shape > 0.0 && rate > 0.0,
        "gamma parameters must be positive"
    );
    if shape < 1.0 {
        let g = sample_gamma(rng, shape + 1.0, 1.0);
        return g * open_unit(rng).powf(1.0 / shape) / rate;
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = sample_normal(rng);
        let t = 1.0 + c * x;
        if t <= 0.0 {
            continue;
        }
        let v = t * t * t;
        let u = open_unit(rng);
        let x2 = x * x;
        if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
            return d * v / rate;
        }
    }
}

/// Beta(a, b) as `X / (X + Y)` with independent unit-rate Gammas.
pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let x = sample_gamma(rng, a, 1.0);
    let y = sample_gamma(rng, b, 1.0);
    x / (x + y)
}

pub fn sample_bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.gen::<f64>() < p
}

/// Draws one row of the hierarchical model: `(theta, scores)`.
pub fn hierarchical_row(cfg: &SimulationConfig, row_id: usize) -> (f64, Vec<bool>) {
    let mut rng = stream_rng(cfg.seed, row_id as u64);
    let alpha = sample_gamma(&mut rng, cfg.alpha_shape, cfg.alpha_rate);
    let beta = sample_gamma(&mut rng, cfg.beta_shape, cfg.beta_rate);
    let theta = sample_beta(&mut rng, alpha, beta);
    let scores = (0..cfg.samples_per_row)
        .map(|_| sample_bernoulli(&mut rng, theta))
        .collect();
    (theta, scores)
}

fn observations(row_id: usize, scores: Vec<bool>) -> impl Iterator<Item = Observation> {
    scores
        .into_iter()
        .enumerate()
        .map(move |(j, score)| Observation {
            row_id,
            sample_id: format!("s{}", j + 1),
            score,
        })
}

/// `n` distinct plan seeds from stream 0.
pub fn generation_seeds(master: u64, n: usize) -> Vec<u64> {
    let mut rng = stream_rng(master, 0);
    let mut seen = HashSet::new();
    let mut seeds = Vec::with_capacity(n);
    while seeds.len() < n {
        let s = rng.next_u64();
        if seen.insert(s) {
            seeds.push(s);
        }
    }
    seeds
}

/// Distinct rows of `generations` generated plans, in first-occurrence order
/// with ids from 1.
pub fn pooled_plan(
    model: &FactorModel,
    req: &CoverageRequirement,
    generations: usize,
    seed: u64,
) -> Result<Plan, SimulationError> {
    let mut seen: HashSet<Combination> = HashSet::new();
    let mut rows = Vec::new();
    for seed in generation_seeds(seed, generations) {
        for c in generate_plan(model, req, seed)?.combinations() {
            if seen.insert(c.clone()) {
                rows.push(c.clone());
            }
        }
    }
    Ok(Plan::new(model, rows)?)
}

/// Generates `cfg.generations` plans, pools their distinct rows (first
/// occurrence order, ids from 1) and scores each row under the hierarchy.
pub fn run_paper_simulation(
    model: &FactorModel,
    req: &CoverageRequirement,
    cfg: &SimulationConfig,
) -> Result<SimulatedDataset, SimulationError> {
    cfg.validate()?;
    let plan = pooled_plan(model, req, cfg.generations, cfg.seed)?;
    let mut theta = Vec::with_capacity(plan.len());
    let mut obs = Vec::with_capacity(plan.len() * cfg.samples_per_row);
    for row in plan.rows() {
        let (t, scores) = hierarchical_row(cfg, row.id);
        theta.push((row.id, t));
        obs.extend(observations(row.id, scores));
    }
    let dataset = ScoreDataset::new(&plan, obs)?;
    Ok(SimulatedDataset {
        plan,
        dataset,
        theta,
    })
}

/// Column names of the first-order design, before any column is dropped.
pub fn effect_columns(model: &FactorModel) -> Vec<String> {
    let mut names = vec![INTERCEPT.to_string()];
    for (f, factor) in model.factors().iter().enumerate() {
        names.extend((1..factor.levels()).map(|l| main_name(model, f, l)));
    }
    names
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Scores each plan row with success rate `logistic(x' beta)`. Columns absent
/// from `coefficients` are zero.
pub fn simulate_with_effects(
    model: &FactorModel,
    plan: &Plan,
    coefficients: &BTreeMap<String, f64>,
    samples_per_row: usize,
    seed: u64,
) -> Result<SimulatedDataset, SimulationError> {
    if samples_per_row == 0 {
        return Err(SimulationError::Config(
            "samples_per_row must be at least 1".into(),
        ));
    }
    let columns = effect_columns(model);
    if let Some(unknown) = coefficients.keys().find(|k| !columns.contains(k)) {
        return Err(SimulationError::UnknownColumn(unknown.clone()));
    }
    let coef = |name: &str| coefficients.get(name).copied().unwrap_or(0.0);
    let intercept = coef(INTERCEPT);
    let mut theta = Vec::with_capacity(plan.len());
    let mut obs = Vec::with_capacity(plan.len() * samples_per_row);
    for row in plan.rows() {
        let eta = row
            .combination
            .levels()
            .iter()
            .enumerate()
            .filter(|&(_, &l)| l > 0)
            .fold(intercept, |acc, (f, &l)| {
                acc + coef(&main_name(model, f, l))
            });
        let t = logistic(eta);
        let mut rng = stream_rng(seed, row.id as u64);
        let scores = (0..samples_per_row)
            .map(|_| sample_bernoulli(&mut rng, t))
            .collect();
        theta.push((row.id, t));
        obs.extend(observations(row.id, scores));
    }
    let dataset = ScoreDataset::new(plan, obs)?;
    Ok(SimulatedDataset {
        plan: plan.clone(),
        dataset,
        theta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::factor_model::Factor;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (
            m,
            xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0),
        )
    }

    #[test]
    fn gamma_moments() {
        let mut rng = stream_rng(11, 1);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_gamma(&mut rng, 5.0, 1.0)).collect();
        let (m, v) = moments(&xs);
        assert!(
            (m - 5.0).abs() < 3.0 * 5f64.sqrt() / (n as f64).sqrt(),
            "mean {m}"
        );
        assert!((v - 5.0).abs() < 0.15, "var {v}");
    }

    #[test]
    fn gamma_rate_and_small_shape() {
        let mut rng = stream_rng(12, 1);
        let n = 100_000;
        let xs: Vec<f64> = (0..n).map(|_| sample_gamma(&mut rng, 0.5, 2.0)).collect();
        let (m, v) = moments(&xs);
        // mean a/r = 0.25, var a/r^2 = 0.125
        assert!((m - 0.25).abs() < 0.006, "mean {m}");
        assert!((v - 0.125).abs() < 0.006, "var {v}");
    }

    #[test]
    fn normal_and_beta_moments() {
        let mut rng = stream_rng(13, 2);
        let n = 100_000;
        let zs: Vec<f64> = (0..n).map(|_| sample_normal(&mut rng)).collect();
        let (m, v) = moments(&zs);
        assert!(m.abs() < 0.012 && (v - 1.0).abs() < 0.02);
        let bs: Vec<f64> = (0..n).map(|_| sample_beta(&mut rng, 5.0, 2.0)).collect();
        let (m, v) = moments(&bs);
        // Beta(5, 2): mean 5/7, var 10 / (49 * 8)
        assert!((m - 5.0 / 7.0).abs() < 0.003, "mean {m}");
        assert!((v - 10.0 / 392.0).abs() < 0.001, "var {v}");
    }

    #[test]
    fn streams_are_independent_of_row_count() {
        let cfg = SimulationConfig::with_seed(3);
        assert_eq!(hierarchical_row(&cfg, 7), hierarchical_row(&cfg, 7));
        assert_ne!(hierarchical_row(&cfg, 7).0, hierarchical_row(&cfg, 8).0);
        assert_eq!(hierarchical_row(&cfg, 7).1.len(), 30);
    }

    #[test]
    fn config_validation() {
        assert!(SimulationConfig::default().validate().is_ok());
        let bad = SimulationConfig {
            alpha_rate: 0.0,
            ..SimulationConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SimulationConfig {
            generations: 0,
            ..SimulationConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    fn two_bool_model() -> FactorModel {
        FactorModel::new(
            vec![Factor::new("x", ["F", "T"]), Factor::new("y", ["F", "T"])],
            vec![],
        )
        .unwrap()
    }

    fn full_plan(model: &FactorModel) -> Plan {
        Plan::new(model, model.enumerate_all().collect()).unwrap()
    }

    #[test]
    fn effects_set_theta() {
        let model = two_bool_model();
        let plan = full_plan(&model);
        let zero = simulate_with_effects(&model, &plan, &BTreeMap::new(), 5, 1).unwrap();
        assert!(zero.theta.iter().all(|&(_, t)| t == 0.5));
        assert_eq!(zero.dataset.len(), 20);

        let coef = BTreeMap::from([("x=T".to_string(), 9f64.ln())]);
        let sim = simulate_with_effects(&model, &plan, &coef, 5, 1).unwrap();
        for row in plan.rows() {
            let expect = if row.combination.level(0) == 1 {
                0.9
            } else {
                0.5
            };
            assert!((sim.theta_of(row.id).unwrap() - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_effect_column() {
        let model = two_bool_model();
        let coef = BTreeMap::from([("x=F".to_string(), 1.0)]);
        let err = simulate_with_effects(&model, &full_plan(&model), &coef, 5, 1).unwrap_err();
        assert!(matches!(err, SimulationError::UnknownColumn(c) if c == "x=F"));
    }

    #[test]
    fn single_generation_counts() {
        let model = two_bool_model();
        let req = CoverageRequirement::full(&model, 2).unwrap();
        let cfg = SimulationConfig {
            generations: 1,
            ..SimulationConfig::with_seed(5)
        };
        let sim = run_paper_simulation(&model, &req, &cfg).unwrap();
        assert_eq!(sim.plan.len(), 4);
        assert_eq!(sim.dataset.len(), 4 * 30);
        assert!(sim.theta_csv().starts_with("row_id,theta_true\n1,"));
    }
}
