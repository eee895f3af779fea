//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.
//!
//! Expected values are computed here by independent brute force or closed
//! forms rather than by calling back into the code under test.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use factorplan::regression::{build_design_matrix, gradient, log_likelihood, DesignMatrix};
use factorplan::simulation::hierarchical_row;
use factorplan::{
    coefficient_table, fit_logistic, generate_plan, holm_sidak_adjust, pairwise_report,
    proportion_ztest, random_plan, run_paper_simulation, simulate_with_effects, wald_table,
    CoverageRequirement, Factor, FactorModel, RowStats, SampleStats, SimulationConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
/// Name, check and time budget.
type Criterion = (&'static str, fn() -> Outcome, Duration);

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

// ---------------------------------------------------------------------------
// independent oracles

/// Every pair of (factor, value) assignments over distinct factors appears in
/// some row.
fn brute_force_pairwise(levels: &[usize], rows: &[Vec<usize>]) -> (usize, usize) {
    let mut required = 0;
    let mut covered = 0;
    for f in 0..levels.len() {
        for g in f + 1..levels.len() {
            for a in 0..levels[f] {
                for b in 0..levels[g] {
                    required += 1;
                    if rows.iter().any(|r| r[f] == a && r[g] == b) {
                        covered += 1;
                    }
                }
            }
        }
    }
    (required, covered)
}

/// Smallest number of rows of the full binary factorial that covers all pairs.
fn optimal_binary_pair_cover(factors: usize) -> usize {
    let levels = vec![2; factors];
    let full: Vec<Vec<usize>> = (0..1usize << factors)
        .map(|m| (0..factors).map(|f| (m >> (factors - 1 - f)) & 1).collect())
        .collect();
    for size in 1..=full.len() {
        let mut idx: Vec<usize> = (0..size).collect();
        loop {
            let rows: Vec<Vec<usize>> = idx.iter().map(|&i| full[i].clone()).collect();
            let (req, cov) = brute_force_pairwise(&levels, &rows);
            if req == cov {
                return size;
            }
            // next combination in lexicographic order
            let mut k = size;
            while k > 0 && idx[k - 1] == full.len() - size + k - 1 {
                k -= 1;
            }
            if k == 0 {
                break;
            }
            idx[k - 1] += 1;
            for t in k..size {
                idx[t] = idx[t - 1] + 1;
            }
        }
    }
    unreachable!("the full factorial covers everything")
}

/// Textbook Holm–Šidák: sort the values, step down, then look each input up.
fn textbook_holm_sidak(p: &[f64]) -> Vec<f64> {
    let m = p.len();
    let mut sorted = p.to_vec();
    // insertion sort
    for i in 1..m {
        let mut j = i;
        while j > 0 && sorted[j - 1] > sorted[j] {
            sorted.swap(j - 1, j);
            j -= 1;
        }
    }
    let mut adj_sorted = Vec::with_capacity(m);
    for (i, &pi) in sorted.iter().enumerate() {
        let raw = 1.0 - (1.0 - pi).powi((m - i) as i32);
        let raw = if raw > 1.0 { 1.0 } else { raw };
        let prev = if i == 0 { 0.0 } else { adj_sorted[i - 1] };
        adj_sorted.push(if raw > prev { raw } else { prev });
    }
    p.iter()
        .map(|x| {
            let first = sorted.iter().position(|s| s == x).unwrap();
            adj_sorted[first]
        })
        .collect()
}

/// Bernoulli log-likelihood straight from the design rows.
fn oracle_log_likelihood(dm: &DesignMatrix<f64>, beta: &[f64]) -> f64 {
    (0..dm.n_rows())
        .map(|i| {
            let eta: f64 = dm.row(i).iter().zip(beta).map(|(x, b)| x * b).sum();
            let p = 1.0 / (1.0 + (-eta).exp());
            if dm.target()[i] == 1.0 {
                p.ln()
            } else {
                (1.0 - p).ln()
            }
        })
        .sum()
}

fn two_proportion_z(s1: f64, s2: f64, n: f64) -> f64 {
    let pooled = (s1 + s2) / (2.0 * n);
    (s1 / n - s2 / n) / (pooled * (1.0 - pooled) * 2.0 / n).sqrt()
}

// ---------------------------------------------------------------------------
// criteria

fn criterion_1() -> Outcome {
    let t = proportion_ztest::<f64>(30, 30, 29, 30);
    check(
        (t.p_raw - 0.313).abs() <= 0.001,
        format!("p_raw = {}", t.p_raw),
    )?;
    // independent z from the textbook formula; two-sided p = erfc(|z|/sqrt 2)
    let z = two_proportion_z(30.0, 29.0, 30.0);
    check((t.z - z).abs() < 1e-12, format!("z = {} vs {z}", t.z))?;

    // rows 1..13, 30 samples each; row 2 is 30/30 and row 7 is 29/30
    let successes = [20, 30, 18, 22, 25, 15, 29, 21, 19, 24, 17, 23, 26];
    let stats = SampleStats {
        rows: successes
            .iter()
            .enumerate()
            .map(|(i, &s)| RowStats::<f64>::from_counts(i + 1, s, 30))
            .collect(),
        unscored: vec![],
    };
    let report = pairwise_report(&stats, 0.05).map_err(|e| e.to_string())?;
    check(
        report.pairs.len() == 78,
        format!("{} tests", report.pairs.len()),
    )?;
    let top = report.pair(2, 7).ok_or("pair (2, 7) missing")?;
    check(
        report.best.row_id == 2 && report.runner_up.row_id == 7,
        "best/runner-up rows",
    )?;
    let adjusted = format!("{:.3}", top.p_adjusted);
    check(
        adjusted == "1.000",
        format!("adjusted p = {}", top.p_adjusted),
    )?;
    check(!top.significant, "difference flagged significant")?;
    let summary = report.summary();
    let expected =
        "best: row 2 (mean 1.000); difference vs row 7 not significant (adjusted p = 1.000)";
    check(summary == expected, summary.clone())?;
    let larger = report.pairs.iter().filter(|p| p.p_raw > top.p_raw).count();
    Ok(format!(
        "p_raw = {:.6}, adjusted = {} ({:.6}); {larger} of 78 raw p-values exceed it (with n = 30 per row no \
         13-row family makes it the largest)",
        t.p_raw, adjusted, top.p_adjusted
    ))
}

fn binary_model(n: usize) -> FactorModel {
    FactorModel::new(
        (0..n)
            .map(|i| Factor::new(format!("f{i}"), ["F", "T"]))
            .collect(),
        vec![],
    )
    .unwrap()
}

fn criterion_2() -> Outcome {
    let mut parts = Vec::new();
    for (factors, bound, optimum) in [(3, 5, 4), (4, 6, 5)] {
        let model = binary_model(factors);
        let req = CoverageRequirement::full(&model, 2).map_err(|e| e.to_string())?;
        let found = optimal_binary_pair_cover(factors);
        check(
            found == optimum,
            format!("{factors} factors: exhaustive optimum {found}, expected {optimum}"),
        )?;
        for seed in 0..20 {
            let plan = generate_plan(&model, &req, seed).map_err(|e| e.to_string())?;
            let rows: Vec<Vec<usize>> = plan.combinations().map(|c| c.levels().to_vec()).collect();
            let (required, covered) = brute_force_pairwise(&model.level_counts(), &rows);
            check(
                required == covered,
                format!("{factors} factors seed {seed}: {covered}/{required}"),
            )?;
            check(
                plan.len() <= bound,
                format!("{factors} factors seed {seed}: {} rows", plan.len()),
            )?;
        }
        let plan = generate_plan(&model, &req, 0).map_err(|e| e.to_string())?;
        parts.push(format!(
            "{factors} factors: {} rows (bound {bound}, optimum {found})",
            plan.len()
        ));
    }
    Ok(parts.join("; "))
}

fn criterion_3() -> Outcome {
    let model = FactorModel::running_example();
    let levels = model.level_counts();
    check(levels.len() == 15, "15 factors")?;
    let req = CoverageRequirement::full(&model, 2).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let plan = generate_plan(&model, &req, 1).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    let rows: Vec<Vec<usize>> = plan.combinations().map(|c| c.levels().to_vec()).collect();
    let (required, covered) = brute_force_pairwise(&levels, &rows);
    check(required == 507, format!("enumerated {required} pairs"))?;
    check(covered == 507, format!("covered {covered}/507"))?;
    check(plan.len() <= 24, format!("{} rows", plan.len()))?;
    check(
        elapsed < Duration::from_secs(5),
        format!("generation took {elapsed:?}"),
    )?;
    Ok(format!(
        "{} rows cover 507/507 pairs in {:.1} ms",
        plan.len(),
        elapsed.as_secs_f64() * 1e3
    ))
}

fn within_4_sigma(theta: f64, scores: &[bool]) -> bool {
    let n = scores.len() as f64;
    let mean = scores.iter().filter(|&&s| s).count() as f64 / n;
    (mean - theta).abs() <= 4.0 * (theta * (1.0 - theta) / n).sqrt()
}

fn criterion_4() -> Outcome {
    let model = FactorModel::running_example();
    let req = CoverageRequirement::full(&model, 2).map_err(|e| e.to_string())?;
    let cfg = SimulationConfig::with_seed(2024);
    let sim = run_paper_simulation(&model, &req, &cfg).map_err(|e| e.to_string())?;
    let unique = sim.plan.len();
    check(unique >= 100, format!("{unique} unique rows"))?;
    check(sim.dataset.len() == unique * 30, "30 observations per row")?;
    let mean_theta = sim.mean_theta();
    check(
        (mean_theta - 5.0 / 7.0).abs() <= 0.05,
        format!("mean theta {mean_theta}"),
    )?;
    let tallies = sim.dataset.tallies();
    let run_ok = sim
        .theta
        .iter()
        .filter(|(id, t)| {
            let (s, n) = tallies[id];
            let scores: Vec<bool> = (0..n).map(|i| i < s).collect();
            within_4_sigma(*t, &scores)
        })
        .count();

    // the 99.9% rate needs many rows to be checked statistically
    let big = 1_000_000;
    let cfg = SimulationConfig::with_seed(77);
    let ok = (1..=big)
        .filter(|&id| {
            let (t, scores) = hierarchical_row(&cfg, id);
            within_4_sigma(t, &scores)
        })
        .count();
    let rate = ok as f64 / big as f64;
    check(
        rate >= 0.999,
        format!("4-sigma rate {rate} over {big} rows"),
    )?;
    Ok(format!(
        "{unique} unique rows, mean theta {mean_theta:.4}; default run {run_ok}/{unique} rows within 4 sigma, \
         {rate:.5} over {big} rows"
    ))
}

fn two_cell_design(s0: usize, n0: usize, s1: usize, n1: usize) -> DesignMatrix<f64> {
    let mut data = Vec::new();
    let mut y = Vec::new();
    for (x, s, n) in [(0.0, s0, n0), (1.0, s1, n1)] {
        for i in 0..n {
            data.extend([1.0, x]);
            y.push(if i < s { 1.0 } else { 0.0 });
        }
    }
    DesignMatrix::from_parts(vec!["Intercept".into(), "x=T".into()], data, y).unwrap()
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn calibration_effects() -> BTreeMap<String, f64> {
    [
        ("Intercept", 0.5),
        ("temperature=medium", -0.3),
        ("temperature=high", -0.6),
        ("modelType=granity", 0.4),
        ("modelType=labrador", -0.2),
        ("maxNewToken=high", 0.25),
        ("promptFactor1=True", -0.35),
        ("generateDetailedComments=True", 0.3),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v))
    .collect()
}

fn criterion_5() -> Outcome {
    // (a) saturated single binary factor: coefficients are cell logits
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    let mut cases = vec![(1, 4, 3, 4), (2, 4, 2, 4)];
    for _ in 0..50 {
        let n0 = rng.gen_range(2..60);
        let n1 = rng.gen_range(2..60);
        cases.push((rng.gen_range(1..n0), n0, rng.gen_range(1..n1), n1));
    }
    for (s0, n0, s1, n1) in cases {
        let fit = fit_logistic(&two_cell_design(s0, n0, s1, n1)).map_err(|e| e.to_string())?;
        let p0 = s0 as f64 / n0 as f64;
        let p1 = s1 as f64 / n1 as f64;
        let b0 = logit(p0);
        let b1 = logit(p1) - b0;
        let se1 =
            (1.0 / s0 as f64 + 1.0 / (n0 - s0) as f64 + 1.0 / s1 as f64 + 1.0 / (n1 - s1) as f64)
                .sqrt();
        let errs = [
            fit.coefficients[0] - b0,
            fit.coefficients[1] - b1,
            fit.std_errors()[1] - se1,
        ];
        worst = errs.iter().fold(worst, |m, e| m.max(e.abs()));
    }
    check(worst < 1e-6, format!("closed-form deviation {worst:e}"))?;

    // (b) analytic gradient vs central differences, away from the optimum
    let model = FactorModel::running_example();
    let plan = random_plan(&model, 200, 9).map_err(|e| e.to_string())?;
    let sim = simulate_with_effects(&model, &plan, &calibration_effects(), 30, 9)
        .map_err(|e| e.to_string())?;
    let dm =
        build_design_matrix::<f64>(&model, &plan, &sim.dataset, 1).map_err(|e| e.to_string())?;
    let fit = fit_logistic(&dm).map_err(|e| e.to_string())?;
    let mut worst_rel: f64 = 0.0;
    for trial in 0..5 {
        let beta: Vec<f64> = fit
            .coefficients
            .iter()
            .map(|b| b + rng.gen_range(-0.5..0.5) * (trial as f64 + 1.0) / 5.0)
            .collect();
        let g = gradient(&dm, &beta);
        let ll = log_likelihood(&dm, &beta);
        let oracle_ll = oracle_log_likelihood(&dm, &beta);
        check(
            (ll - oracle_ll).abs() < 1e-8 * oracle_ll.abs(),
            format!("log-likelihood {ll} vs {oracle_ll}"),
        )?;
        let h = 1e-5;
        for j in 0..beta.len() {
            let mut up = beta.clone();
            let mut down = beta.clone();
            up[j] += h;
            down[j] -= h;
            let fd =
                (oracle_log_likelihood(&dm, &up) - oracle_log_likelihood(&dm, &down)) / (2.0 * h);
            let rel = (g[j] - fd).abs() / fd.abs().max(1.0);
            worst_rel = worst_rel.max(rel);
        }
    }
    check(
        worst_rel < 1e-4,
        format!("gradient relative error {worst_rel:e}"),
    )?;

    // (c) coverage of injected coefficients by their 95% intervals
    let start = Instant::now();
    let effects = calibration_effects();
    let plan = random_plan(&model, 500, 31).map_err(|e| e.to_string())?;
    let (mut inside, mut total) = (0usize, 0usize);
    for rep in 0..200u64 {
        let sim = simulate_with_effects(&model, &plan, &effects, 30, 1000 + rep)
            .map_err(|e| e.to_string())?;
        let dm = build_design_matrix::<f64>(&model, &plan, &sim.dataset, 1)
            .map_err(|e| e.to_string())?;
        let table = coefficient_table(&fit_logistic(&dm).map_err(|e| format!("rep {rep}: {e}"))?);
        for row in &table.rows {
            let truth = effects.get(&row.name).copied().unwrap_or(0.0);
            total += 1;
            inside += (row.ci_lower <= truth && truth <= row.ci_upper) as usize;
        }
    }
    let coverage = inside as f64 / total as f64;
    let elapsed = start.elapsed();
    check(
        (0.90..=0.98).contains(&coverage),
        format!("CI coverage {coverage}"),
    )?;
    check(
        elapsed < Duration::from_secs(300),
        format!("calibration took {elapsed:?}"),
    )?;
    Ok(format!(
        "closed form within {worst:.1e}; gradient rel. error {worst_rel:.1e}; CI coverage {:.2}% ({inside}/{total}) in {:.1} s",
        coverage * 100.0,
        elapsed.as_secs_f64()
    ))
}

fn criterion_6() -> Outcome {
    let model = FactorModel::running_example();
    let req = CoverageRequirement::full(&model, 2).map_err(|e| e.to_string())?;
    let sim = run_paper_simulation(&model, &req, &SimulationConfig::with_seed(2024))
        .map_err(|e| e.to_string())?;
    let dm = build_design_matrix::<f64>(&model, &sim.plan, &sim.dataset, 1)
        .map_err(|e| e.to_string())?;
    let fit = fit_logistic(&dm).map_err(|e| e.to_string())?;
    let coef = coefficient_table(&fit);
    let wald = wald_table(&fit).map_err(|e| e.to_string())?;
    check(coef.len() == 19, format!("{} coefficient rows", coef.len()))?;
    check(wald.len() == 16, format!("{} Wald rows", wald.len()))?;
    check(
        coef.rows[0].name == "Intercept" && wald.rows[0].name == "Intercept",
        "intercept first",
    )?;
    for name in ["temperature", "modelType", "maxNewToken"] {
        let row = wald.row(name).ok_or(format!("no Wald row for {name}"))?;
        check(row.df == 2, format!("{name} df {}", row.df))?;
    }
    let ones = wald.rows.iter().filter(|r| r.df == 1).count();
    check(ones == 13, format!("{ones} one-df rows"))?;
    // 1-df rows reproduce the squared coefficient z
    for w in wald.rows.iter().filter(|r| r.df == 1) {
        let name = if w.name == "Intercept" {
            "Intercept".to_string()
        } else {
            format!("{}=True", w.name)
        };
        let c = coef.row(&name).ok_or(format!("no coefficient {name}"))?;
        check(
            (w.chi2 - c.z * c.z).abs() < 1e-9 * w.chi2.max(1.0),
            format!("{name}: chi2 {} vs z^2 {}", w.chi2, c.z * c.z),
        )?;
    }
    Ok(format!("19 coefficient rows, 16 Wald rows, df = 2 for temperature/modelType/maxNewToken ({} rows simulated)", sim.plan.len()))
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for family in 0..1000 {
        let m = rng.gen_range(1..=6);
        let p: Vec<f64> = (0..m)
            .map(|_| {
                let x: f64 = rng.gen();
                // occasional ties and exact endpoints
                match rng.gen_range(0..10) {
                    0 => (x * 10.0).round() / 10.0,
                    1 => 1.0,
                    _ => x * x,
                }
            })
            .collect();
        let got = holm_sidak_adjust(&p);
        let want = textbook_holm_sidak(&p);
        let same = got
            .iter()
            .zip(&want)
            .all(|(a, b)| a.to_bits() == b.to_bits());
        check(
            same,
            format!("family {family}: {p:?} -> {got:?} vs {want:?}"),
        )?;
    }
    Ok("1000 families match bit for bit".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 7] = [
        (
            "1 pairwise-test reproduction",
            criterion_1,
            Duration::from_secs(1),
        ),
        (
            "2 covering-array quality",
            criterion_2,
            Duration::from_secs(10),
        ),
        (
            "3 running-example plan",
            criterion_3,
            Duration::from_secs(5),
        ),
        (
            "4 simulation calibration",
            criterion_4,
            Duration::from_secs(10),
        ),
        (
            "5 regression correctness",
            criterion_5,
            Duration::from_secs(300),
        ),
        ("6 table shapes", criterion_6, Duration::from_secs(60)),
        (
            "7 Holm-Sidak oracle equivalence",
            criterion_7,
            Duration::from_secs(5),
        ),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(msg) if elapsed > budget => {
                Err(format!("{msg}; took {elapsed:?}, budget {budget:?}"))
            }
            other => other,
        };
        match outcome {
            Ok(msg) => println!(
                "PASS criterion {name}: {msg} [{:.2} s]",
                elapsed.as_secs_f64()
            ),
            Err(msg) => {
                failed += 1;
                println!(
                    "FAIL criterion {name}: {msg} [{:.2} s]",
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
