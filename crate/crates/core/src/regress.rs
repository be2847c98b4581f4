//! Least squares and the reduced-form VAR(1) laws of motion.
//!
//! Coefficients are always ordered `(intercept, i, π, y, dummies…)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::ingest::{MacroPanel, Quarter};
use crate::skedastic::Equation;

/// Named regressor columns.
#[derive(Debug, Clone, Default)]
pub struct Design {
    names: Vec<String>,
    columns: Vec<Vec<f64>>,
}

impl Design {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_intercept(rows: usize) -> Self {
        let mut d = Self::new();
        d.push("constant", vec![1.0; rows]);
        d
    }

    pub fn push(&mut self, name: impl Into<String>, column: Vec<f64>) -> &mut Self {
        self.names.push(name.into());
        self.columns.push(column);
        self
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows(), self.cols(), |r, c| self.columns[c][r])
    }

    fn has_intercept(&self) -> bool {
        self.columns.iter().any(|c| c.iter().all(|&v| v == 1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    pub fitted: Vec<f64>,
    pub r_squared: f64,
    pub adjusted_r_squared: f64,
    pub n_obs: usize,
}

impl OlsFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|j| self.coefficients[j])
    }
}

/// Householder QR least squares with classical standard errors.
pub fn ols(design: &Design, response: &[f64]) -> Result<OlsFit> {
    let n = design.rows();
    let k = design.cols();
    if k == 0 {
        return Err(Error::InvalidData("design has no columns".into()));
    }
    if response.len() != n || design.columns.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidData("design and response lengths differ".into()));
    }
    if n < k {
        return Err(Error::InvalidData(format!("{n} observations for {k} regressors")));
    }
    if design.columns.iter().flatten().chain(response).any(|v| !v.is_finite()) {
        return Err(Error::InvalidData("non-finite value in regression data".into()));
    }

    let x = design.matrix();
    let qr = x.clone().qr();
    let r = qr.r();

    // A column lying in the span of its predecessors leaves a (near) zero pivot.
    let collinear: Vec<String> = (0..k)
        .filter(|&j| {
            let norm = x.column(j).norm();
            norm == 0.0 || r[(j, j)].abs() <= 1e-10 * norm
        })
        .map(|j| design.names[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(Error::RankDeficient { columns: collinear });
    }

    let yv = DVector::from_column_slice(response);
    let qty = qr.q().transpose() * &yv;
    let beta = r.solve_upper_triangular(&qty).ok_or_else(|| Error::RankDeficient { columns: design.names.clone() })?;
    let fitted_v = &x * &beta;
    let resid_v = &yv - &fitted_v;
    let rss = resid_v.norm_squared();

    let dof = n - k;
    let sigma2 = if dof > 0 { rss / dof as f64 } else { f64::NAN };
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::RankDeficient { columns: design.names.clone() })?;
    // diag((RᵀR)⁻¹) = squared row norms of R⁻¹
    let standard_errors = (0..k).map(|j| (sigma2 * r_inv.row(j).norm_squared()).sqrt()).collect();

    let mean = response.iter().sum::<f64>() / n as f64;
    let tss: f64 = if design.has_intercept() {
        response.iter().map(|v| (v - mean).powi(2)).sum()
    } else {
        response.iter().map(|v| v * v).sum()
    };
    let r_squared = if tss > 0.0 {
        1.0 - rss / tss
    } else if rss == 0.0 {
        1.0
    } else {
        0.0
    };
    let adjusted_r_squared = if dof > 0 { 1.0 - (1.0 - r_squared) * (n as f64 - 1.0) / dof as f64 } else { f64::NAN };

    Ok(OlsFit {
        names: design.names.clone(),
        coefficients: beta.iter().copied().collect(),
        standard_errors,
        residuals: resid_v.iter().copied().collect(),
        fitted: fitted_v.iter().copied().collect(),
        r_squared,
        adjusted_r_squared,
        n_obs: n,
    })
}

/// Coefficients of one law-of-motion equation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Coefficients {
    pub constant: f64,
    /// Response to the policy rate, α_{·i}.
    pub rate: f64,
    pub pi: f64,
    pub y: f64,
    pub dummies: Vec<f64>,
}

impl Coefficients {
    pub fn new(constant: f64, rate: f64, pi: f64, y: f64) -> Self {
        Self { constant, rate, pi, y, dummies: Vec::new() }
    }

    /// Conditional mean `α_0 + α_i·i + α_π·π + α_y·y` (dummies at zero).
    pub fn mean(&self, pi: f64, y: f64, i: f64) -> f64 {
        self.constant + self.rate * i + self.pi * pi + self.y * y
    }

    fn from_fit(fit: &OlsFit) -> Self {
        let c = &fit.coefficients;
        Self { constant: c[0], rate: c[1], pi: c[2], y: c[3], dummies: c[4..].to_vec() }
    }
}

/// Which quarter's indicator values enter the equation explaining quarter `t+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DummyTiming {
    /// Dated with the dependent variable, `t+1`.
    #[default]
    Dependent,
    /// Dated with the lagged regressors, `t`.
    Regressor,
}

impl DummyTiming {
    pub fn row(self, t: usize) -> usize {
        match self {
            DummyTiming::Dependent => t + 1,
            DummyTiming::Regressor => t,
        }
    }
}

/// Estimation output attached to a law of motion fitted from data.
#[derive(Debug, Clone, PartialEq)]
pub struct VarEstimation {
    /// Dates of the dependent variables (`t+1`).
    pub quarters: Vec<Quarter>,
    pub inflation: OlsFit,
    pub output_gap: OlsFit,
    pub timing: DummyTiming,
    pub dummy_names: Vec<String>,
}

/// Two-equation VAR(1) for inflation and the output gap with the policy rate
/// as an exogenous regressor.
#[derive(Debug, Clone, PartialEq)]
pub struct LawOfMotion {
    pub inflation: Coefficients,
    pub output_gap: Coefficients,
    pub estimation: Option<VarEstimation>,
}

impl LawOfMotion {
    pub fn from_coefficients(inflation: Coefficients, output_gap: Coefficients) -> Self {
        Self { inflation, output_gap, estimation: None }
    }

    /// Full-sample baseline estimates without dummies, as published for 1954Q4–2025Q2.
    pub fn reference_baseline() -> Self {
        Self::from_coefficients(
            Coefficients::new(0.114, 0.024, 0.719, 0.006),
            Coefficients::new(0.215, -0.029, -0.130, 0.904),
        )
    }

    pub fn equation(&self, eq: Equation) -> &Coefficients {
        match eq {
            Equation::Inflation => &self.inflation,
            Equation::OutputGap => &self.output_gap,
        }
    }

    pub fn residuals(&self, eq: Equation) -> Option<&[f64]> {
        self.estimation.as_ref().map(|e| match eq {
            Equation::Inflation => e.inflation.residuals.as_slice(),
            Equation::OutputGap => e.output_gap.residuals.as_slice(),
        })
    }
}

/// Lagged-state design `(1, i_t, π_t, y_t [, dummies])` for `t` in `rows`.
pub(crate) fn lagged_design(
    panel: &MacroPanel,
    rows: std::ops::Range<usize>,
    include_rate: bool,
    include_dummies: bool,
    timing: DummyTiming,
) -> Design {
    let mut d = Design::with_intercept(rows.len());
    if include_rate {
        d.push("i", panel.i[rows.clone()].to_vec());
    }
    d.push("pi", panel.pi[rows.clone()].to_vec());
    d.push("y", panel.y[rows.clone()].to_vec());
    if include_dummies {
        for col in &panel.dummies {
            d.push(col.name.clone(), rows.clone().map(|t| col.values[timing.row(t)]).collect());
        }
    }
    d
}

/// OLS of `π_{t+1}` and `y_{t+1}` on `(1, i_t, π_t, y_t [, dummies])`.
pub fn fit_var1(panel: &MacroPanel, include_dummies: bool, timing: DummyTiming) -> Result<LawOfMotion> {
    let n = panel.len();
    if n < 10 {
        return Err(Error::InvalidData(format!("VAR(1) needs at least 10 quarters, got {n}")));
    }
    let rows = 0..n - 1;
    let design = lagged_design(panel, rows, true, include_dummies, timing);
    let inflation = ols(&design, &panel.pi[1..])?;
    let output_gap = ols(&design, &panel.y[1..])?;
    Ok(LawOfMotion {
        inflation: Coefficients::from_fit(&inflation),
        output_gap: Coefficients::from_fit(&output_gap),
        estimation: Some(VarEstimation {
            quarters: panel.quarters[1..].to_vec(),
            inflation,
            output_gap,
            timing,
            dummy_names: if include_dummies { panel.dummy_names() } else { Vec::new() },
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: &[(&str, Vec<f64>)]) -> Design {
        let mut d = Design::new();
        for (n, c) in cols {
            d.push(*n, c.clone());
        }
        d
    }

    #[test]
    fn three_point_line() {
        let d = design(&[("constant", vec![1.0; 3]), ("x", vec![0.0, 1.0, 2.0])]);
        let fit = ols(&d, &[1.0, 3.0, 5.0]).unwrap();
        assert!((fit.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((fit.coefficients[1] - 2.0).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_fit_on_one_regressor() {
        let x = vec![0.3, -1.2, 2.5, 0.7, 1.1];
        let z = vec![1.0, 0.0, 2.0, -3.0, 0.5];
        let d = design(&[("constant", vec![1.0; 5]), ("x", x.clone()), ("z", z)]);
        let fit = ols(&d, &x).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-12);
        assert!(fit.coefficients[2].abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn textbook_standard_errors() {
        // y = 1 + 2x + e on x = 0..4, e = (0.1, -0.2, 0.1, 0.0, 0.0); SEs from the closed forms.
        let x: Vec<f64> = (0..5).map(f64::from).collect();
        let e = [0.1, -0.2, 0.1, 0.0, 0.0];
        let y: Vec<f64> = x.iter().zip(e).map(|(x, e)| 1.0 + 2.0 * x + e).collect();
        let d = design(&[("constant", vec![1.0; 5]), ("x", x.clone())]);
        let fit = ols(&d, &y).unwrap();
        let xbar = 2.0;
        let sxx: f64 = x.iter().map(|v| (v - xbar) * (v - xbar)).sum();
        let rss: f64 = fit.residuals.iter().map(|r| r * r).sum();
        let s2 = rss / 3.0;
        assert!((fit.standard_errors[1] - (s2 / sxx).sqrt()).abs() < 1e-12);
        assert!((fit.standard_errors[0] - (s2 * (1.0 / 5.0 + xbar * xbar / sxx)).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn duplicated_column_names_culprit() {
        let x = vec![1.0, 2.0, 4.0, 8.0];
        let d = design(&[("constant", vec![1.0; 4]), ("x", x.clone()), ("x_copy", x)]);
        match ols(&d, &[1.0, 2.0, 3.0, 4.0]) {
            Err(Error::RankDeficient { columns }) => assert_eq!(columns, vec!["x_copy".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn all_zero_dummy_is_rank_deficient() {
        let d = design(&[("constant", vec![1.0; 5]), ("x", vec![1.0, 3.0, 2.0, 5.0, 4.0]), ("GFC", vec![0.0; 5])]);
        assert!(matches!(ols(&d, &[1.0, 2.0, 3.0, 4.0, 5.0]), Err(Error::RankDeficient { .. })));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn data() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
            (8usize..40).prop_flat_map(|n| {
                (
                    prop::collection::vec(-5f64..5.0, n),
                    prop::collection::vec(-5f64..5.0, n),
                    prop::collection::vec(-5f64..5.0, n),
                )
            })
        }

        proptest! {
            #[test]
            fn residuals_orthogonal_and_centered((x, z, y) in data()) {
                let n = x.len();
                let d = design(&[("constant", vec![1.0; n]), ("x", x.clone()), ("z", z.clone())]);
                let Ok(fit) = ols(&d, &y) else { return Ok(()); };
                let scale = y.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
                prop_assert!(fit.residuals.iter().sum::<f64>().abs() < 1e-10 * scale);
                for col in [&x, &z] {
                    let dot: f64 = fit.residuals.iter().zip(col.iter()).map(|(r, c)| r * c).sum();
                    prop_assert!(dot.abs() < 1e-9 * scale);
                }
                prop_assert!((0.0..=1.0 + 1e-12).contains(&fit.r_squared));
            }

            #[test]
            fn projection_is_idempotent((x, z, y) in data()) {
                let n = x.len();
                let d = design(&[("constant", vec![1.0; n]), ("x", x), ("z", z)]);
                let Ok(fit) = ols(&d, &y) else { return Ok(()); };
                let refit = ols(&d, &fit.fitted).unwrap();
                for (a, b) in fit.coefficients.iter().zip(&refit.coefficients) {
                    prop_assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()));
                }
            }
        }
    }
}
