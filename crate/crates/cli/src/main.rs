//! `factorplan`: generate covering plans for benchmark variants, verify them,
//! and analyze the binary scores collected for each plan row.
//!
//! Exit status: 0 on success, 1 for usage or validation errors (including a
//! plan that fails verification), 2 for internal errors.

mod output;

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use factorplan::pairwise::DEFAULT_ALPHA;
use factorplan::simulation::pooled_plan;
use factorplan::{
    build_design_matrix, coefficient_table, coverage_report, fit_logistic, generate_plan,
    pairwise_report, partition_interactions, read_row_ids, run_paper_simulation, sample_stats,
    simulate_with_effects, wald_table, CoverageRequirement, FactorModel, GenerateError, Plan,
    ScoreDataset, SimulationConfig,
};

use output::{Manifest, OutputDir};

/// Model argument naming the built-in running example instead of a file.
const BUILTIN_EXAMPLE: &str = "builtin:running-example";

pub enum Failure {
    Usage(anyhow::Error),
    Internal(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Usage(e)
    }
}

macro_rules! user_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::Usage(e.into())
            }
        }
    )*};
}

user_errors!(
    factorplan::CoverageError,
    factorplan::PairwiseError,
    factorplan::RegressionError
);

impl From<factorplan::SimulationError> for Failure {
    fn from(e: factorplan::SimulationError) -> Self {
        match e {
            factorplan::SimulationError::Generate(g) => generation_failure(g),
            other => Failure::Usage(other.into()),
        }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "factorplan",
    version,
    about = "Covering plans and score analysis for benchmark variants"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or check a covering plan.
    #[command(subcommand)]
    Plan(PlanCommand),
    /// Analyze collected scores.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Write a synthetic scored dataset.
    Simulate(SimulateArgs),
}

#[derive(Subcommand)]
enum PlanCommand {
    /// Generate a plan covering every feasible k-way interaction.
    Generate(GenerateArgs),
    /// Check that a plan covers every feasible k-way interaction.
    Verify(VerifyArgs),
}

#[derive(Subcommand)]
enum AnalyzeCommand {
    /// Pairwise two-proportion z-tests with Holm-Sidak adjustment.
    Pairwise(PairwiseArgs),
    /// Logistic regression of the scores on the factor levels.
    Regression(RegressionArgs),
}

#[derive(Args)]
struct RequirementArgs {
    /// Factor model JSON file, or `builtin:running-example`.
    #[arg(long)]
    model: String,
    /// Interaction strength k.
    #[arg(long, default_value_t = 2)]
    strength: usize,
    /// Factors to cover (default: all factors that are not fixed).
    #[arg(long, value_delimiter = ',')]
    scope: Option<Vec<String>>,
    /// Pin a factor to one value in every row; repeatable.
    #[arg(long = "fix", value_name = "NAME=VALUE", value_parser = parse_fix)]
    fix: Vec<(String, String)>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    req: RequirementArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for plan.csv and manifest.json (default: plan to stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    req: RequirementArgs,
    #[arg(long)]
    plan: PathBuf,
}

#[derive(Args)]
struct PairwiseArgs {
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    scores: PathBuf,
    /// Optional; when given, plan labels are checked against the model.
    #[arg(long)]
    model: Option<String>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    /// Output directory for pairwise.csv, pairwise.txt and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RegressionArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    plan: PathBuf,
    #[arg(long)]
    scores: PathBuf,
    /// 1 for main effects, 2 to add pairwise interaction terms.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=2))]
    interactions: u8,
    /// Output directory for the coefficient and Wald tables.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    req: RequirementArgs,
    /// Number of generated plans pooled into the simulated plan.
    #[arg(long, default_value_t = 20)]
    generations: usize,
    /// Scores drawn per plan row.
    #[arg(long, default_value_t = 30)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// JSON object mapping design columns (`Intercept`, `factor=value`) to
    /// true logistic coefficients; replaces the Gamma/Beta hierarchy.
    #[arg(long)]
    effects: Option<PathBuf>,
    /// Output directory for plan.csv, scores.csv, theta.csv and manifest.json.
    #[arg(long)]
    out: PathBuf,
}

fn parse_fix(s: &str) -> Result<(String, String), String> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| format!("expected NAME=VALUE, got {s:?}"))?;
    if name.trim().is_empty() {
        return Err(format!("missing factor name in {s:?}"));
    }
    Ok((name.trim().to_string(), value.trim().to_string()))
}

fn read_input(path: &std::path::Path) -> Result<String, Failure> {
    Ok(fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?)
}

/// Loads the model and records it in the manifest.
fn load_model(spec: &str, manifest: &mut Manifest) -> Result<FactorModel, Failure> {
    if spec == BUILTIN_EXAMPLE {
        let model = FactorModel::running_example();
        manifest.input("model", spec, model.to_json().as_bytes());
        return Ok(model);
    }
    let text = read_input(spec.as_ref())?;
    manifest.input("model", spec, text.as_bytes());
    Ok(FactorModel::from_json(&text).with_context(|| format!("invalid model {spec}"))?)
}

fn requirement(
    model: &FactorModel,
    args: &RequirementArgs,
    manifest: &mut Manifest,
) -> Result<CoverageRequirement, Failure> {
    let fixed: Vec<(&str, &str)> = args
        .fix
        .iter()
        .map(|(f, v)| (f.as_str(), v.as_str()))
        .collect();
    let scope: Option<Vec<&str>> = args
        .scope
        .as_ref()
        .map(|s| s.iter().map(String::as_str).collect());
    let req = CoverageRequirement::new(model, args.strength, scope.as_deref(), &fixed)?;
    manifest.param("strength", args.strength);
    manifest.param("scope", json!(req.scope_names(model)));
    manifest.param(
        "fixed",
        json!(req
            .fixed_labels(model)
            .into_iter()
            .collect::<BTreeMap<_, _>>()),
    );
    Ok(req)
}

fn generation_failure(e: GenerateError) -> Failure {
    match e {
        GenerateError::NothingToCover => Failure::Usage(e.into()),
        GenerateError::Internal(_) => Failure::Internal(e.into()),
    }
}

fn plan_generate(args: GenerateArgs) -> CmdResult {
    let mut manifest = Manifest::new("plan generate");
    let model = load_model(&args.req.model, &mut manifest)?;
    let req = requirement(&model, &args.req, &mut manifest)?;
    manifest.param("seed", args.seed);
    let interactions = partition_interactions(&model, &req);
    let plan = generate_plan(&model, &req, args.seed).map_err(generation_failure)?;
    let report = coverage_report(&model, &req, &plan).map_err(|e| Failure::Internal(e.into()))?;
    if !report.is_complete() {
        return Err(Failure::Internal(anyhow!(
            "generated plan misses {} interaction(s)",
            report.missing.len()
        )));
    }

    let csv = plan.to_csv(&model);
    let out = OutputDir::new(args.out);
    let mut lines = vec![format!(
        "plan: {} rows; covered {}/{} interactions (strength {} over {} factors)",
        plan.len(),
        report.covered,
        report.required,
        req.strength(),
        req.scope().len()
    )];
    if !interactions.infeasible.is_empty() {
        lines.push(format!(
            "excluded {} infeasible interaction(s):",
            interactions.infeasible.len()
        ));
        lines.extend(
            interactions
                .infeasible
                .iter()
                .map(|t| format!("  {}", t.display(&model))),
        );
    }
    if out.is_set() {
        out.write(&mut manifest, "plan.csv", &csv)?;
        out.finish(&manifest)?;
        lines.iter().for_each(|l| println!("{l}"));
    } else {
        print!("{csv}");
        lines.iter().for_each(|l| eprintln!("{l}"));
    }
    Ok(())
}

fn plan_verify(args: VerifyArgs) -> CmdResult {
    let mut manifest = Manifest::new("plan verify");
    let model = load_model(&args.req.model, &mut manifest)?;
    let req = requirement(&model, &args.req, &mut manifest)?;
    let plan = Plan::from_csv(&model, &read_input(&args.plan)?)
        .with_context(|| format!("invalid plan {}", args.plan.display()))?;
    let report = coverage_report(&model, &req, &plan)
        .with_context(|| format!("invalid plan {}", args.plan.display()))?;
    println!(
        "covered {}/{} interactions ({} rows)",
        report.covered,
        report.required,
        plan.len()
    );
    let infeasible = partition_interactions(&model, &req).infeasible;
    if !infeasible.is_empty() {
        println!(
            "{} infeasible interaction(s) not required",
            infeasible.len()
        );
    }
    if report.is_complete() {
        return Ok(());
    }
    println!("missing {} interaction(s):", report.missing.len());
    for t in &report.missing {
        println!("  {}", t.display(&model));
    }
    Err(Failure::Usage(anyhow!(
        "plan does not cover {} required interaction(s)",
        report.missing.len()
    )))
}

fn analyze_pairwise(args: PairwiseArgs) -> CmdResult {
    let mut manifest = Manifest::new("analyze pairwise");
    let plan_text = read_input(&args.plan)?;
    manifest.input("plan", &args.plan.to_string_lossy(), plan_text.as_bytes());
    let row_ids = match &args.model {
        Some(spec) => {
            let model = load_model(spec, &mut manifest)?;
            let plan = Plan::from_csv(&model, &plan_text)
                .with_context(|| format!("invalid plan {}", args.plan.display()))?;
            plan.rows().iter().map(|r| r.id).collect()
        }
        None => read_row_ids(&plan_text)
            .with_context(|| format!("invalid plan {}", args.plan.display()))?,
    };
    let scores_text = read_input(&args.scores)?;
    manifest.input(
        "scores",
        &args.scores.to_string_lossy(),
        scores_text.as_bytes(),
    );
    let dataset = ScoreDataset::from_csv_for_rows(row_ids, &scores_text)
        .with_context(|| format!("invalid scores {}", args.scores.display()))?;
    manifest.param("alpha", args.alpha);

    let stats = sample_stats::<f64>(&dataset);
    let report = pairwise_report(&stats, args.alpha)?;
    let out = OutputDir::new(args.out);
    let text = report.to_text();
    if out.is_set() {
        out.write(&mut manifest, "pairwise.csv", &report.to_csv())?;
        out.write(&mut manifest, "pairwise.txt", &text)?;
        out.finish(&manifest)?;
        println!("{}", report.summary());
    } else {
        print!("{text}");
    }
    if !stats.unscored.is_empty() {
        eprintln!(
            "note: {} plan row(s) have no scores and were left out",
            stats.unscored.len()
        );
    }
    if report.pairs.iter().any(|p| p.approximation_questionable) {
        eprintln!("note: some pairs have fewer than 5 expected successes or failures; the normal approximation is rough there");
    }
    Ok(())
}

fn analyze_regression(args: RegressionArgs) -> CmdResult {
    let mut manifest = Manifest::new("analyze regression");
    let model = load_model(&args.model, &mut manifest)?;
    let plan_text = read_input(&args.plan)?;
    manifest.input("plan", &args.plan.to_string_lossy(), plan_text.as_bytes());
    let plan = Plan::from_csv(&model, &plan_text)
        .with_context(|| format!("invalid plan {}", args.plan.display()))?;
    let scores_text = read_input(&args.scores)?;
    manifest.input(
        "scores",
        &args.scores.to_string_lossy(),
        scores_text.as_bytes(),
    );
    let dataset = ScoreDataset::from_csv(&plan, &scores_text)
        .with_context(|| format!("invalid scores {}", args.scores.display()))?;
    manifest.param("interactions", args.interactions);

    let design = build_design_matrix::<f64>(&model, &plan, &dataset, args.interactions as usize)?;
    let fit = fit_logistic(&design)?;
    let coefficients = coefficient_table(&fit);
    let wald = wald_table(&fit)?;
    for note in design.notes() {
        eprintln!("note: {note}");
    }
    let out = OutputDir::new(args.out);
    if out.is_set() {
        out.write(&mut manifest, "coefficients.csv", &coefficients.to_csv())?;
        out.write(&mut manifest, "coefficients.txt", &coefficients.to_text())?;
        out.write(&mut manifest, "wald.csv", &wald.to_csv())?;
        out.write(&mut manifest, "wald.txt", &wald.to_text())?;
        out.finish(&manifest)?;
        println!(
            "fitted {} coefficients on {} observations in {} iterations; {} Wald groups",
            coefficients.len(),
            fit.n_obs,
            fit.iterations,
            wald.len()
        );
    } else {
        print!("{}\n{}", coefficients.to_text(), wald.to_text());
    }
    Ok(())
}

fn simulate(args: SimulateArgs) -> CmdResult {
    let mut manifest = Manifest::new("simulate");
    let model = load_model(&args.req.model, &mut manifest)?;
    let req = requirement(&model, &args.req, &mut manifest)?;
    let cfg = SimulationConfig {
        samples_per_row: args.samples,
        generations: args.generations,
        seed: args.seed,
        ..SimulationConfig::default()
    };
    cfg.validate()?;
    manifest.param("generations", args.generations);
    manifest.param("samples", args.samples);
    manifest.param("seed", args.seed);

    let sim = match &args.effects {
        None => {
            manifest.param(
                "hyperparameters",
                json!({
                    "alpha": { "shape": cfg.alpha_shape, "rate": cfg.alpha_rate },
                    "beta": { "shape": cfg.beta_shape, "rate": cfg.beta_rate },
                }),
            );
            run_paper_simulation(&model, &req, &cfg)?
        }
        Some(path) => {
            let text = read_input(path)?;
            manifest.input("effects", &path.to_string_lossy(), text.as_bytes());
            let effects: BTreeMap<String, f64> =
                serde_json::from_str(&text).with_context(|| {
                    format!(
                        "effects file {} must be a JSON object of numbers",
                        path.display()
                    )
                })?;
            let plan = pooled_plan(&model, &req, cfg.generations, cfg.seed)?;
            simulate_with_effects(&model, &plan, &effects, cfg.samples_per_row, cfg.seed)?
        }
    };

    let out = OutputDir::new(Some(args.out));
    out.write(&mut manifest, "plan.csv", &sim.plan.to_csv(&model))?;
    out.write(&mut manifest, "scores.csv", &sim.dataset.to_csv())?;
    out.write(&mut manifest, "theta.csv", &sim.theta_csv())?;
    out.finish(&manifest)?;
    println!(
        "simulated {} unique rows x {} samples = {} scores; mean theta {:.4}",
        sim.plan.len(),
        cfg.samples_per_row,
        sim.dataset.len(),
        sim.mean_theta()
    );
    Ok(())
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Plan(PlanCommand::Generate(a)) => plan_generate(a),
        Command::Plan(PlanCommand::Verify(a)) => plan_verify(a),
        Command::Analyze(AnalyzeCommand::Pairwise(a)) => analyze_pairwise(a),
        Command::Analyze(AnalyzeCommand::Regression(a)) => analyze_regression(a),
        Command::Simulate(a) => simulate(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // clap would exit 2 on usage errors; 2 is reserved for internal failures here
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(e)) => {
            eprintln!("internal error: {e:#}");
            ExitCode::from(2)
        }
    }
}
