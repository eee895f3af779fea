use super::fit::RegressionFit;
use super::linalg::Cholesky;
use super::RegressionError;
use crate::format::{aligned_table, sig6};
use crate::scalar::{chi2_sf, two_sided_normal_p, Scalar};

/// Normal quantile for the 95% Wald interval.
pub const CI_QUANTILE: f64 = 1.96;

/// R-style significance code.
pub fn significance_symbol(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else if p < 0.1 {
        "."
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRow<F> {
    pub name: String,
    pub coefficient: F,
    pub std_error: F,
    pub z: F,
    pub ci_lower: F,
    pub ci_upper: F,
    pub p_value: F,
    pub odds_ratio: F,
    pub symbol: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTable<F> {
    pub rows: Vec<CoefficientRow<F>>,
}

impl<F: Scalar> CoefficientTable<F> {
    pub fn row(&self, name: &str) -> Option<&CoefficientRow<F>> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn cells(r: &CoefficientRow<F>) -> Vec<String> {
        vec![
            r.name.clone(),
            sig6(r.coefficient.as_f64()),
            sig6(r.std_error.as_f64()),
            sig6(r.z.as_f64()),
            sig6(r.ci_lower.as_f64()),
            sig6(r.ci_upper.as_f64()),
            sig6(r.p_value.as_f64()),
            sig6(r.odds_ratio.as_f64()),
            r.symbol.to_string(),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "name",
            "coefficient",
            "std_error",
            "z",
            "ci_0.025",
            "ci_0.975",
            "p_value",
            "odds_ratio",
            "symbol",
        ])
        .expect("in-memory write");
        for r in &self.rows {
            w.write_record(Self::cells(r)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_text(&self) -> String {
        let header = [
            "",
            "coefficient",
            "std err",
            "z",
            "[0.025",
            "0.975]",
            "p-value",
            "odds ratio",
            "",
        ];
        let rows: Vec<Vec<String>> = self.rows.iter().map(Self::cells).collect();
        aligned_table(&header, &rows)
    }
}

pub fn coefficient_table<F: Scalar>(fit: &RegressionFit<F>) -> CoefficientTable<F> {
    let q = F::of(CI_QUANTILE);
    let rows = fit
        .columns
        .iter()
        .zip(&fit.coefficients)
        .zip(fit.std_errors())
        .map(|((name, &b), se)| {
            let z = if se > F::zero() { b / se } else { F::zero() };
            let p = two_sided_normal_p(z);
            CoefficientRow {
                name: name.clone(),
                coefficient: b,
                std_error: se,
                z,
                ci_lower: b - q * se,
                ci_upper: b + q * se,
                p_value: p,
                odds_ratio: b.exp(),
                symbol: significance_symbol(p.as_f64()),
            }
        })
        .collect();
    CoefficientTable { rows }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaldRow<F> {
    pub name: String,
    pub chi2: F,
    pub p_value: F,
    pub df: usize,
    pub symbol: &'static str,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaldTable<F> {
    pub rows: Vec<WaldRow<F>>,
}

impl<F: Scalar> WaldTable<F> {
    pub fn row(&self, name: &str) -> Option<&WaldRow<F>> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn cells(r: &WaldRow<F>) -> Vec<String> {
        vec![
            r.name.clone(),
            sig6(r.chi2.as_f64()),
            sig6(r.p_value.as_f64()),
            r.df.to_string(),
            r.symbol.to_string(),
        ]
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["name", "chi2", "p_value", "df", "symbol"])
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record(Self::cells(r)).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
    }

    pub fn to_text(&self) -> String {
        let header = ["", "chi2", "p-value", "df constraint", ""];
        let rows: Vec<Vec<String>> = self.rows.iter().map(Self::cells).collect();
        aligned_table(&header, &rows)
    }
}

/// Joint Wald test per column group: `b' S^-1 b` on `df = |group|`.
pub fn wald_table<F: Scalar>(fit: &RegressionFit<F>) -> Result<WaldTable<F>, RegressionError> {
    let mut rows = Vec::with_capacity(fit.groups.len());
    for group in &fit.groups {
        let sigma = fit.covariance.submatrix(&group.columns);
        let beta: Vec<F> = group.columns.iter().map(|&j| fit.coefficients[j]).collect();
        let chol = Cholesky::new(&sigma)
            .map_err(|_| RegressionError::SingularGroup(group.name.clone()))?;
        let chi2 = beta
            .iter()
            .zip(chol.solve(&beta))
            .fold(F::zero(), |acc, (&b, s)| acc + b * s);
        let df = group.columns.len();
        let p = chi2_sf(chi2, df);
        rows.push(WaldRow {
            name: group.name.clone(),
            chi2,
            p_value: p,
            df,
            symbol: significance_symbol(p.as_f64()),
        });
    }
    Ok(WaldTable { rows })
}
