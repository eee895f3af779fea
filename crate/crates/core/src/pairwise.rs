//! All-pairs comparison of plan rows: pooled two-proportion z-tests, jointly
//! adjusted with the Holm–Šidák step-down procedure.

use crate::format::{aligned_table, sig6};
use crate::scalar::{two_sided_normal_p, Scalar};
use crate::scores::{RowStats, SampleStats};

/// Default family-wise significance level.
pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PairwiseError {
    #[error("need at least 2 scored rows, got {0}")]
    TooFewRows(usize),
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOutcome<F> {
    pub z: F,
    /// Two-sided p-value `2 * (1 - Phi(|z|))`.
    pub p_raw: F,
}

/// Pooled two-sample proportion z-test, two-sided, no continuity correction.
///
/// When the pooled proportion is 0 or 1 the two samples are identical and the
/// result is `z = 0, p = 1`.
pub fn proportion_ztest<F: Scalar>(
    successes1: usize,
    n1: usize,
    successes2: usize,
    n2: usize,
) -> TestOutcome<F> {
    assert!(n1 >= 1 && n2 >= 1, "sample sizes must be positive");
    assert!(
        successes1 <= n1 && successes2 <= n2,
        "successes cannot exceed sample size"
    );
    let (n1f, n2f) = (F::of_usize(n1), F::of_usize(n2));
    let p1 = F::of_usize(successes1) / n1f;
    let p2 = F::of_usize(successes2) / n2f;
    let pooled = F::of_usize(successes1 + successes2) / (n1f + n2f);
    let var = pooled * (F::one() - pooled) * (n1f.recip() + n2f.recip());
    if var <= F::zero() {
        return TestOutcome {
            z: F::zero(),
            p_raw: F::one(),
        };
    }
    let z = (p1 - p2) / var.sqrt();
    TestOutcome {
        z,
        p_raw: two_sided_normal_p(z),
    }
}

/// Holm–Šidák step-down adjustment; results are in input order.
///
/// With p-values sorted ascending, `adj_(i) = max_{j<=i} min(1, 1 - (1 - p_(j))^(m-j+1))`.
pub fn holm_sidak_adjust<F: Scalar>(p_values: &[F]) -> Vec<F> {
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    // stable: equal p-values keep input order
    order.sort_by(|&a, &b| {
        p_values[a]
            .partial_cmp(&p_values[b])
            .expect("p-values are not NaN")
    });
    let mut adjusted = vec![F::zero(); m];
    let mut running = F::zero();
    for (rank, &i) in order.iter().enumerate() {
        let remaining = (m - rank) as i32;
        let step = (F::one() - (F::one() - p_values[i]).powi(remaining)).min(F::one());
        running = running.max(step);
        adjusted[i] = running;
    }
    adjusted
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairTest<F> {
    pub row_i: usize,
    pub row_j: usize,
    pub mean_i: F,
    pub mean_j: F,
    pub n_i: usize,
    pub n_j: usize,
    pub z: F,
    pub p_raw: F,
    pub p_adjusted: F,
    pub significant: bool,
    /// Fewer than 5 expected successes or failures in either sample.
    pub approximation_questionable: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseReport<F> {
    pub alpha: F,
    pub pairs: Vec<PairTest<F>>,
    pub best: RowStats<F>,
    pub runner_up: RowStats<F>,
}

impl<F: Scalar> PairwiseReport<F> {
    pub fn pair(&self, a: usize, b: usize) -> Option<&PairTest<F>> {
        self.pairs
            .iter()
            .find(|p| (p.row_i == a && p.row_j == b) || (p.row_i == b && p.row_j == a))
    }

    /// The test between the best row and the runner-up.
    pub fn best_vs_runner_up(&self) -> &PairTest<F> {
        self.pair(self.best.row_id, self.runner_up.row_id)
            .expect("every pair is tested")
    }

    pub fn summary(&self) -> String {
        let top = self.best_vs_runner_up();
        let verdict = if top.significant {
            "significant"
        } else {
            "not significant"
        };
        format!(
            "best: row {} (mean {:.3}); difference vs row {} {} (adjusted p = {:.3})",
            self.best.row_id,
            self.best.mean.as_f64(),
            self.runner_up.row_id,
            verdict,
            top.p_adjusted.as_f64()
        )
    }

    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("row_i,row_j,mean_i,mean_j,n_i,n_j,z,p_raw,p_adjusted,significant\n");
        for p in &self.pairs {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                p.row_i,
                p.row_j,
                sig6(p.mean_i.as_f64()),
                sig6(p.mean_j.as_f64()),
                p.n_i,
                p.n_j,
                sig6(p.z.as_f64()),
                sig6(p.p_raw.as_f64()),
                sig6(p.p_adjusted.as_f64()),
                p.significant
            ));
        }
        out
    }

    pub fn to_text(&self) -> String {
        let header = [
            "row_i",
            "row_j",
            "mean_i",
            "mean_j",
            "n_i",
            "n_j",
            "z",
            "p_raw",
            "p_adjusted",
            "significant",
            "note",
        ];
        let rows: Vec<Vec<String>> = self
            .pairs
            .iter()
            .map(|p| {
                vec![
                    p.row_i.to_string(),
                    p.row_j.to_string(),
                    sig6(p.mean_i.as_f64()),
                    sig6(p.mean_j.as_f64()),
                    p.n_i.to_string(),
                    p.n_j.to_string(),
                    sig6(p.z.as_f64()),
                    sig6(p.p_raw.as_f64()),
                    sig6(p.p_adjusted.as_f64()),
                    if p.significant { "yes" } else { "no" }.to_string(),
                    if p.approximation_questionable {
                        "small-sample"
                    } else {
                        ""
                    }
                    .to_string(),
                ]
            })
            .collect();
        let mut out = aligned_table(&header, &rows);
        out.push_str(&format!(
            "alpha = {}\n{}\n",
            sig6(self.alpha.as_f64()),
            self.summary()
        ));
        out
    }
}

fn questionable<F: Scalar>(a: &RowStats<F>, b: &RowStats<F>) -> bool {
    let pooled = (a.successes + b.successes) as f64 / (a.n + b.n) as f64;
    [a.n, b.n]
        .iter()
        .any(|&n| (n as f64 * pooled).min(n as f64 * (1.0 - pooled)) < 5.0)
}

/// Highest mean first; equal means ordered by lower row id.
fn ranking<F: Scalar>(rows: &[RowStats<F>]) -> Vec<&RowStats<F>> {
    let mut ranked: Vec<&RowStats<F>> = rows.iter().collect();
    ranked.sort_by(|a, b| {
        b.mean
            .partial_cmp(&a.mean)
            .expect("means are finite")
            .then(a.row_id.cmp(&b.row_id))
    });
    ranked
}

pub fn pairwise_report<F: Scalar>(
    stats: &SampleStats<F>,
    alpha: F,
) -> Result<PairwiseReport<F>, PairwiseError> {
    if !(alpha > F::zero() && alpha < F::one()) {
        return Err(PairwiseError::Alpha(alpha.as_f64()));
    }
    let rows = &stats.rows;
    if rows.len() < 2 {
        return Err(PairwiseError::TooFewRows(rows.len()));
    }
    let mut pairs = Vec::with_capacity(rows.len() * (rows.len() - 1) / 2);
    for (i, a) in rows.iter().enumerate() {
        for b in &rows[i + 1..] {
            let t = proportion_ztest::<F>(a.successes, a.n, b.successes, b.n);
            pairs.push(PairTest {
                row_i: a.row_id,
                row_j: b.row_id,
                mean_i: a.mean,
                mean_j: b.mean,
                n_i: a.n,
                n_j: b.n,
                z: t.z,
                p_raw: t.p_raw,
                p_adjusted: F::zero(),
                significant: false,
                approximation_questionable: questionable(a, b),
            });
        }
    }
    let raw: Vec<F> = pairs.iter().map(|p| p.p_raw).collect();
    for (p, adj) in pairs.iter_mut().zip(holm_sidak_adjust(&raw)) {
        p.p_adjusted = adj;
        p.significant = adj < alpha;
    }
    let ranked = ranking(rows);
    Ok(PairwiseReport {
        alpha,
        pairs,
        best: ranked[0].clone(),
        runner_up: ranked[1].clone(),
    })
}
