//! Conditional scale functions `h_π`, `h_y` and standardized shocks.
//!
//! The scale of each equation's shock is a function of the lagged state,
//!
//! ```text
//! linear_sqrt:  h_a = sqrt(max(L_a, floor))
//! exp_sqrt:     h_a = exp(sqrt(max(L_a, floor)))
//! L_a = γ_a0 + γ_aπ·π + γ_ay·y + γ_ai·i (+ dummy terms)
//! ```
//!
//! with `γ` taken from a regression of squared VAR residuals on the lagged
//! state. Squared-residual OLS does not guarantee `L_a > 0`, hence the floor.

use crate::error::{Error, Result};
use crate::ingest::{MacroPanel, Quarter};
use crate::regress::{lagged_design, ols, LawOfMotion, OlsFit};

pub const DEFAULT_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Equation {
    Inflation,
    OutputGap,
}

impl Equation {
    pub fn name(self) -> &'static str {
        match self {
            Equation::Inflation => "inflation",
            Equation::OutputGap => "output_gap",
        }
    }
}

/// Point `(π, y, i)` at which scale functions are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub pi: f64,
    pub y: f64,
    pub i: f64,
}

impl State {
    pub fn new(pi: f64, y: f64, i: f64) -> Self {
        Self { pi, y, i }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SkedasticForm {
    #[default]
    LinearSqrt,
    ExpSqrt,
}

impl std::str::FromStr for SkedasticForm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "linear_sqrt" => Ok(Self::LinearSqrt),
            "exp_sqrt" => Ok(Self::ExpSqrt),
            other => Err(Error::Config(format!("unknown skedastic form '{other}'"))),
        }
    }
}

/// `γ` coefficients of one scale equation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScaleCoefficients {
    pub constant: f64,
    pub pi: f64,
    pub y: f64,
    /// `γ_ai`; zero when the rate is excluded.
    pub rate: f64,
    pub dummies: Vec<f64>,
}

impl ScaleCoefficients {
    pub fn new(constant: f64, pi: f64, y: f64, rate: f64) -> Self {
        Self { constant, pi, y, rate, dummies: Vec::new() }
    }

    pub fn linear(&self, s: State, dummies: &[f64]) -> f64 {
        let d: f64 = self.dummies.iter().zip(dummies).map(|(g, d)| g * d).sum();
        self.constant + self.pi * s.pi + self.y * s.y + self.rate * s.i + d
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradient {
    pub pi: f64,
    pub y: f64,
    pub i: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkedasticFits {
    pub inflation: OlsFit,
    pub output_gap: OlsFit,
    pub dummy_names: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkedasticModel {
    pub gamma_pi: ScaleCoefficients,
    pub gamma_y: ScaleCoefficients,
    pub form: SkedasticForm,
    pub floor: f64,
    pub fits: Option<SkedasticFits>,
}

impl SkedasticModel {
    pub fn new(
        gamma_pi: ScaleCoefficients,
        gamma_y: ScaleCoefficients,
        form: SkedasticForm,
        floor: f64,
    ) -> Result<Self> {
        if !(floor > 0.0 && floor.is_finite()) {
            return Err(Error::Config(format!("skedastic floor must be positive, got {floor}")));
        }
        Ok(Self { gamma_pi, gamma_y, form, floor, fits: None })
    }

    /// Constant scales `h_π ≡ h_pi`, `h_y ≡ h_y` under the square-root form.
    pub fn constant(h_pi: f64, h_y: f64) -> Self {
        Self::new(
            ScaleCoefficients::new(h_pi * h_pi, 0.0, 0.0, 0.0),
            ScaleCoefficients::new(h_y * h_y, 0.0, 0.0, 0.0),
            SkedasticForm::LinearSqrt,
            DEFAULT_FLOOR,
        )
        .expect("default floor is valid")
    }

    /// Full-sample baseline squared-residual regressions as published (rate excluded).
    pub fn reference_baseline() -> Self {
        Self::new(
            ScaleCoefficients::new(0.087, 0.045, -0.010, 0.0),
            ScaleCoefficients::new(1.153, -0.311, -0.217, 0.0),
            SkedasticForm::LinearSqrt,
            DEFAULT_FLOOR,
        )
        .expect("default floor is valid")
    }

    pub fn gamma(&self, eq: Equation) -> &ScaleCoefficients {
        match eq {
            Equation::Inflation => &self.gamma_pi,
            Equation::OutputGap => &self.gamma_y,
        }
    }

    /// True when neither scale depends on the policy rate.
    pub fn rate_free(&self) -> bool {
        self.gamma_pi.rate == 0.0 && self.gamma_y.rate == 0.0
    }

    /// True when neither scale depends on anything (pure location shift).
    pub fn is_constant(&self) -> bool {
        [&self.gamma_pi, &self.gamma_y]
            .iter()
            .all(|g| g.pi == 0.0 && g.y == 0.0 && g.rate == 0.0 && g.dummies.iter().all(|&d| d == 0.0))
    }

    fn transform(&self, linear: f64) -> f64 {
        let root = linear.max(self.floor).sqrt();
        match self.form {
            SkedasticForm::LinearSqrt => root,
            SkedasticForm::ExpSqrt => root.exp(),
        }
    }

    /// `h_a` at `state`, indicator columns at zero.
    pub fn h(&self, eq: Equation, state: State) -> f64 {
        self.transform(self.gamma(eq).linear(state, &[]))
    }

    pub fn h_with_dummies(&self, eq: Equation, state: State, dummies: &[f64]) -> f64 {
        self.transform(self.gamma(eq).linear(state, dummies))
    }

    pub fn floor_binds(&self, eq: Equation, state: State) -> bool {
        self.gamma(eq).linear(state, &[]) <= self.floor
    }

    /// Partial derivatives of `h_a`; undefined where the floor binds.
    pub fn gradient(&self, eq: Equation, state: State) -> Result<Gradient> {
        let g = self.gamma(eq);
        let linear = g.linear(state, &[]);
        if linear <= self.floor {
            return Err(Error::FloorBinding { equation: eq.name(), linear });
        }
        let root = linear.sqrt();
        let scale = match self.form {
            SkedasticForm::LinearSqrt => 0.5 / root,
            SkedasticForm::ExpSqrt => root.exp() * 0.5 / root,
        };
        Ok(Gradient { pi: g.pi * scale, y: g.y * scale, i: g.rate * scale })
    }

    /// `∂h_a/∂i`, zero whenever `γ_ai = 0` (the floor is then irrelevant).
    pub fn dh_di(&self, eq: Equation, state: State) -> Result<f64> {
        if self.gamma(eq).rate == 0.0 {
            return Ok(0.0);
        }
        Ok(self.gradient(eq, state)?.i)
    }
}

/// `h_pi(π, y, i)` / `h_y(π, y, i)` as a free function.
pub fn h_value(model: &SkedasticModel, equation: Equation, pi: f64, y: f64, i: f64) -> f64 {
    model.h(equation, State::new(pi, y, i))
}

/// Aligned standardized shock pairs `(ẑ_π, ẑ_y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ShockPanel {
    /// Dates of the shocks; empty for synthetic panels.
    pub quarters: Vec<Quarter>,
    pub z_pi: Vec<f64>,
    pub z_y: Vec<f64>,
}

impl ShockPanel {
    pub fn new(z_pi: Vec<f64>, z_y: Vec<f64>) -> Result<Self> {
        if z_pi.len() != z_y.len() {
            return Err(Error::InvalidData(format!(
                "shock columns differ in length ({} vs {})",
                z_pi.len(),
                z_y.len()
            )));
        }
        if z_pi.iter().chain(&z_y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("non-finite shock".into()));
        }
        Ok(Self { quarters: Vec::new(), z_pi, z_y })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
    }

    pub fn len(&self) -> usize {
        self.z_pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_pi.is_empty()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.z_pi.iter().copied().zip(self.z_y.iter().copied())
    }
}

fn estimation_of(law: &LawOfMotion) -> Result<&crate::regress::VarEstimation> {
    law.estimation
        .as_ref()
        .ok_or_else(|| Error::InvalidData("law of motion carries no residuals (not estimated from data)".into()))
}

/// Regresses squared VAR residuals on the lagged state.
///
/// Residual `û_{t+1}` is paired with `(1, π_t, y_t [, i_t] [, dummies])`.
/// The first residual is not used, so a panel of `n` quarters yields `n − 2`
/// observations against the VAR's `n − 1`.
pub fn fit_skedastic(
    law: &LawOfMotion,
    panel: &MacroPanel,
    form: SkedasticForm,
    include_dummies: bool,
    restrict_gamma_i: bool,
    floor: f64,
) -> Result<SkedasticModel> {
    let est = estimation_of(law)?;
    let n = panel.len();
    if est.inflation.residuals.len() != n - 1 {
        return Err(Error::InvalidData("law of motion was not fitted on this panel".into()));
    }
    let rows = 1..n - 1;
    let design = lagged_design(panel, rows.clone(), !restrict_gamma_i, include_dummies, est.timing);
    let squared = |r: &[f64]| rows.clone().map(|t| r[t] * r[t]).collect::<Vec<f64>>();
    let fit_pi = ols(&design, &squared(&est.inflation.residuals))?;
    let fit_y = ols(&design, &squared(&est.output_gap.residuals))?;

    let gamma = |fit: &OlsFit| {
        let c = &fit.coefficients;
        let (rate, rest) = if restrict_gamma_i { (0.0, 1) } else { (c[1], 2) };
        ScaleCoefficients { constant: c[0], rate, pi: c[rest], y: c[rest + 1], dummies: c[rest + 2..].to_vec() }
    };
    let mut model = SkedasticModel::new(gamma(&fit_pi), gamma(&fit_y), form, floor)?;
    model.fits = Some(SkedasticFits {
        inflation: fit_pi,
        output_gap: fit_y,
        dummy_names: if include_dummies { panel.dummy_names() } else { Vec::new() },
    });
    Ok(model)
}

/// Fitted scales `ĥ_{a,t+1}` for every VAR residual, using the state at `t`.
pub fn fitted_scales(law: &LawOfMotion, model: &SkedasticModel, panel: &MacroPanel) -> Result<(Vec<f64>, Vec<f64>)> {
    let est = estimation_of(law)?;
    let n = panel.len();
    if est.inflation.residuals.len() != n - 1 {
        return Err(Error::InvalidData("law of motion was not fitted on this panel".into()));
    }
    let mut h_pi = Vec::with_capacity(n - 1);
    let mut h_y = Vec::with_capacity(n - 1);
    let uses_dummies = model.gamma_pi.dummies.len() + model.gamma_y.dummies.len() > 0;
    for t in 0..n - 1 {
        let state = State::new(panel.pi[t], panel.y[t], panel.i[t]);
        let d = if uses_dummies { panel.dummies_at(est.timing.row(t)) } else { Vec::new() };
        h_pi.push(model.h_with_dummies(Equation::Inflation, state, &d));
        h_y.push(model.h_with_dummies(Equation::OutputGap, state, &d));
    }
    Ok((h_pi, h_y))
}

/// Number of residual dates at which the floor binds, per equation.
pub fn floor_bindings(law: &LawOfMotion, model: &SkedasticModel, panel: &MacroPanel) -> Result<[usize; 2]> {
    let (h_pi, h_y) = fitted_scales(law, model, panel)?;
    let at_floor = model.transform(model.floor);
    let count = |h: &[f64]| h.iter().filter(|&&v| v <= at_floor).count();
    Ok([count(&h_pi), count(&h_y)])
}

/// `ẑ_{a,t+1} = û_{a,t+1} / ĥ_{a,t+1}`, keeping the pairs aligned.
pub fn standardize_shocks(law: &LawOfMotion, model: &SkedasticModel, panel: &MacroPanel) -> Result<ShockPanel> {
    let est = estimation_of(law)?;
    let (h_pi, h_y) = fitted_scales(law, model, panel)?;
    let [b_pi, b_y] = floor_bindings(law, model, panel)?;
    if b_pi + b_y > 0 {
        log::warn!("skedastic floor binds at {b_pi} inflation and {b_y} output-gap residual dates");
    }
    let z = |u: &[f64], h: &[f64]| u.iter().zip(h).map(|(u, h)| u / h).collect::<Vec<f64>>();
    let mut panel_z = ShockPanel::new(z(&est.inflation.residuals, &h_pi), z(&est.output_gap.residuals, &h_y))?;
    panel_z.quarters = est.quarters.clone();
    Ok(panel_z)
}

/// Raw residual pairs as shocks, i.e. standardization with `h ≡ 1`.
pub fn residual_shocks(law: &LawOfMotion) -> Result<ShockPanel> {
    let est = estimation_of(law)?;
    let mut p = ShockPanel::new(est.inflation.residuals.clone(), est.output_gap.residuals.clone())?;
    p.quarters = est.quarters.clone();
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_scale() {
        let m = SkedasticModel::new(
            ScaleCoefficients::new(1.0, 0.0, 0.0, 0.0),
            ScaleCoefficients::new(4.0, 0.0, 0.0, 0.0),
            SkedasticForm::LinearSqrt,
            DEFAULT_FLOOR,
        )
        .unwrap();
        for (pi, y, i) in [(0.0, 0.0, 0.0), (3.0, -7.0, 12.0)] {
            assert_eq!(h_value(&m, Equation::Inflation, pi, y, i), 1.0);
            assert_eq!(h_value(&m, Equation::OutputGap, pi, y, i), 2.0);
        }
        assert!(m.is_constant());
    }

    #[test]
    fn reference_inflation_scale_at_means() {
        let m = SkedasticModel::reference_baseline();
        // 0.087 + 0.045·0.78 + 0.010·0.27
        let expected = 0.1248_f64.sqrt();
        assert!((h_value(&m, Equation::Inflation, 0.78, -0.27, 4.62) - expected).abs() < 1e-12);
    }

    #[test]
    fn floor_applies() {
        let m = SkedasticModel::new(
            ScaleCoefficients::new(-1.0, 0.0, 0.0, 0.0),
            ScaleCoefficients::new(1.0, 0.0, 0.0, 0.0),
            SkedasticForm::LinearSqrt,
            1e-8,
        )
        .unwrap();
        assert_eq!(h_value(&m, Equation::Inflation, 0.0, 0.0, 0.0), 1e-8_f64.sqrt());
        assert!(matches!(m.gradient(Equation::Inflation, State::new(0.0, 0.0, 0.0)), Err(Error::FloorBinding { .. })));
        assert!(SkedasticModel::new(Default::default(), Default::default(), SkedasticForm::LinearSqrt, 0.0).is_err());
    }

    #[test]
    fn exp_form_as_printed() {
        let m = SkedasticModel::new(
            ScaleCoefficients::new(4.0, 0.0, 0.0, 0.0),
            ScaleCoefficients::new(4.0, 0.0, 0.0, 0.0),
            SkedasticForm::ExpSqrt,
            DEFAULT_FLOOR,
        )
        .unwrap();
        assert!((h_value(&m, Equation::Inflation, 1.0, 1.0, 1.0) - 2.0_f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_difference() {
        for form in [SkedasticForm::LinearSqrt, SkedasticForm::ExpSqrt] {
            let m = SkedasticModel::new(
                ScaleCoefficients::new(0.5, 0.1, -0.05, 0.03),
                ScaleCoefficients::new(1.0, -0.2, 0.1, -0.02),
                form,
                DEFAULT_FLOOR,
            )
            .unwrap();
            let s = State::new(0.7, -0.4, 3.0);
            for eq in [Equation::Inflation, Equation::OutputGap] {
                let g = m.gradient(eq, s).unwrap();
                let eps = 1e-6;
                let fd = |ds: State| (m.h(eq, ds) - m.h(eq, s)) / eps;
                assert!((g.pi - fd(State::new(s.pi + eps, s.y, s.i))).abs() < 1e-5);
                assert!((g.y - fd(State::new(s.pi, s.y + eps, s.i))).abs() < 1e-5);
                assert!((g.i - fd(State::new(s.pi, s.y, s.i + eps))).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn shock_panel_validation() {
        assert!(ShockPanel::new(vec![1.0], vec![]).is_err());
        assert!(ShockPanel::new(vec![f64::NAN], vec![0.0]).is_err());
        assert_eq!(ShockPanel::from_pairs(&[(1.0, 2.0)]).unwrap().len(), 1);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scale_strictly_positive(
                g in prop::array::uniform4(-10f64..10.0),
                s in prop::array::uniform3(-1e3f64..1e3),
                exp in any::<bool>(),
            ) {
                let form = if exp { SkedasticForm::ExpSqrt } else { SkedasticForm::LinearSqrt };
                let c = ScaleCoefficients::new(g[0], g[1], g[2], g[3]);
                let m = SkedasticModel::new(c.clone(), c, form, DEFAULT_FLOOR).unwrap();
                let h = m.h(Equation::Inflation, State::new(s[0], s[1], s[2]));
                prop_assert!(h >= DEFAULT_FLOOR.sqrt() && h.is_finite());
            }

            #[test]
            fn constant_gamma_gives_exact_root(c in 1e-6f64..100.0, s in prop::array::uniform3(-50f64..50.0)) {
                let m = SkedasticModel::new(
                    ScaleCoefficients::new(c, 0.0, 0.0, 0.0),
                    ScaleCoefficients::new(c, 0.0, 0.0, 0.0),
                    SkedasticForm::LinearSqrt,
                    DEFAULT_FLOOR,
                ).unwrap();
                prop_assert_eq!(m.h(Equation::OutputGap, State::new(s[0], s[1], s[2])), c.sqrt());
            }
        }
    }
}
