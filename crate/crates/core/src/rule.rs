//! Quantile-preference Taylor rules and the implied quantile index.
//!
//! With per-period utility `−(π−π*)²/2 − λy²/2 − δ(i−i₋₁)²/2` and the law of
//! motion `a' = α_a0 + α_ai·i + α_aπ·π + α_ay·y + h_a·z_a`, the Euler condition
//!
//! ```text
//! −δ(i − i₋₁) + β·Q_τ[ −(π' − π*)·∂π'/∂i − λ·y'·∂y'/∂i ] = 0
//! ```
//!
//! is linear in `i` whenever `∂h/∂i = 0`. Translation equivariance of the
//! quantile then gives the closed form
//!
//! ```text
//! i* = i₋₁ + β·(Q_τ(W) − M(π, y) − A·i₋₁) / (δ + β·A)
//! A  = α_πi² + λ·α_yi²
//! W  = −h_π·α_πi·z_π − λ·h_y·α_yi·z_y
//! M  = (α_ππα_πi + λα_yπα_yi)·π + (α_πyα_πi + λα_yyα_yi)·y + α_πi(α_π0 − π*) + λα_yiα_y0
//! ```
//!
//! which is algebraically `(δ·i₋₁ − β·M + β·Q_τ(W)) / (δ + β·A)`, written so
//! that `β = 0` returns `i₋₁` bit for bit. When the scale depends on the rate
//! the condition has both `z` and `z²` inside the quantile and is solved by
//! bisection.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::{MacroPanel, Quarter};
use crate::quantile::{combine_shocks, empirical_quantile_in_place, SortedSample, TauGrid};
use crate::regress::LawOfMotion;
use crate::skedastic::{Equation, ShockPanel, SkedasticModel, State};

/// Structural preference parameters. The output-gap target is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub beta: f64,
    pub lambda: f64,
    pub delta: f64,
    pub pi_star: f64,
}

impl Calibration {
    pub fn new(beta: f64, lambda: f64, delta: f64, pi_star: f64) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) && beta != 0.0 {
            return Err(Error::Config(format!("beta must lie in (0, 1), got {beta}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be positive, got {lambda}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::Config(format!("delta must be nonnegative, got {delta}")));
        }
        if !pi_star.is_finite() {
            return Err(Error::Config("pi_star must be finite".into()));
        }
        Ok(Self { beta, lambda, delta, pi_star })
    }

    /// β = 0.99, λ = 1, δ = 0.1, π* = 0.496 (2% annual in quarterly log points).
    pub fn quarterly_default() -> Self {
        Self { beta: 0.99, lambda: 1.0, delta: 0.1, pi_star: 0.496 }
    }
}

impl Default for Calibration {
    fn default() -> Self {
        Self::quarterly_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RuleCase {
    /// Constant scales.
    LocationShift,
    /// Scales depend on `(π, y)` only.
    #[default]
    LocationScaleStates,
    /// Scales may depend on the rate; solved numerically.
    General,
}

impl std::str::FromStr for RuleCase {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "location_shift" => Ok(Self::LocationShift),
            "location_scale_states" | "location_scale" => Ok(Self::LocationScaleStates),
            "general" => Ok(Self::General),
            other => Err(Error::Config(format!("unknown rule case '{other}'"))),
        }
    }
}

/// Placement of λ in the state coefficients of the closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Grouping {
    /// `(α_ππα_πi + λα_yπα_yi)·π + (α_πyα_πi + λα_yyα_yi)·y`, from differentiating the Euler condition.
    #[default]
    Rederived,
    /// `(α_ππα_πi + α_yπα_yi)·π + λ(α_πyα_πi + α_yyα_yi)·y`.
    Printed,
}

impl std::str::FromStr for Grouping {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "rederived" => Ok(Self::Rederived),
            "printed" => Ok(Self::Printed),
            other => Err(Error::Config(format!("unknown grouping '{other}'"))),
        }
    }
}

/// Everything a rule evaluation needs.
#[derive(Debug, Clone)]
pub struct RuleContext {
    pub law: LawOfMotion,
    pub sked: Option<SkedasticModel>,
    pub shocks: ShockPanel,
    pub calib: Calibration,
    pub case: RuleCase,
    pub grouping: Grouping,
}

impl RuleContext {
    pub fn new(
        law: LawOfMotion,
        sked: Option<SkedasticModel>,
        shocks: ShockPanel,
        calib: Calibration,
        case: RuleCase,
    ) -> Result<Self> {
        if shocks.is_empty() {
            return Err(Error::EmptySample);
        }
        match (case, &sked) {
            (RuleCase::LocationShift, _) => {}
            (_, None) => return Err(Error::CaseMismatch(format!("{case:?} needs a skedastic model"))),
            (RuleCase::LocationScaleStates, Some(m)) if !m.rate_free() => {
                return Err(Error::CaseMismatch(
                    "location-scale rule needs gamma_ai = 0 in both scale equations".into(),
                ))
            }
            _ => {}
        }
        Ok(Self { law, sked, shocks, calib, case, grouping: Grouping::Rederived })
    }

    pub fn with_grouping(mut self, grouping: Grouping) -> Self {
        self.grouping = grouping;
        self
    }

    /// `A = α_πi² + λ·α_yi²`.
    pub fn policy_leverage(&self) -> f64 {
        let (api, ayi) = (self.law.inflation.rate, self.law.output_gap.rate);
        api * api + self.calib.lambda * ayi * ayi
    }

    pub fn denominator(&self) -> f64 {
        self.calib.delta + self.calib.beta * self.policy_leverage()
    }

    /// Deterministic part `M(π, y)` of the Euler bracket.
    pub fn mean_bracket(&self, pi: f64, y: f64) -> f64 {
        let p = &self.law.inflation;
        let o = &self.law.output_gap;
        let lam = self.calib.lambda;
        let (c_pi, c_y) = match self.grouping {
            Grouping::Rederived => (p.pi * p.rate + lam * o.pi * o.rate, p.y * p.rate + lam * o.y * o.rate),
            Grouping::Printed => (p.pi * p.rate + o.pi * o.rate, lam * (p.y * p.rate + o.y * o.rate)),
        };
        c_pi * pi + c_y * y + p.rate * (p.constant - self.calib.pi_star) + lam * o.rate * o.constant
    }

    /// `(h_π, h_y)` at the state; `(1, 1)` for the location-shift case.
    pub fn scales(&self, state: State) -> (f64, f64) {
        match (self.case, &self.sked) {
            (RuleCase::LocationShift, _) | (_, None) => (1.0, 1.0),
            (_, Some(m)) => (m.h(Equation::Inflation, state), m.h(Equation::OutputGap, state)),
        }
    }

    /// Weights of `W = w_π·z_π + w_y·z_y` at `(π, y)`.
    pub fn quantile_weights(&self, pi: f64, y: f64) -> (f64, f64) {
        let (h_pi, h_y) = self.scales(State::new(pi, y, 0.0));
        (-h_pi * self.law.inflation.rate, -self.calib.lambda * h_y * self.law.output_gap.rate)
    }

    fn checked_denominator(&self) -> Result<f64> {
        let den = self.denominator();
        if den > 0.0 && den.is_finite() {
            Ok(den)
        } else {
            Err(Error::ZeroDenominator(den))
        }
    }

    fn closed_form_with_quantile(&self, quantile: f64, den: f64, pi: f64, y: f64, i_prev: f64) -> f64 {
        let b = self.calib.beta;
        i_prev + b * (quantile - self.mean_bracket(pi, y) - self.policy_leverage() * i_prev) / den
    }

    /// Closed-form rule for the shift and state-scale cases.
    pub fn closed_form(&self, tau: f64, pi: f64, y: f64, i_prev: f64) -> Result<f64> {
        if self.case == RuleCase::General {
            return Err(Error::CaseMismatch("closed form needs gamma_ai = 0".into()));
        }
        let den = self.checked_denominator()?;
        let (w_pi, w_y) = self.quantile_weights(pi, y);
        let mut sample = combine_shocks(&self.shocks, w_pi, w_y);
        let q = empirical_quantile_in_place(&mut sample, tau)?;
        Ok(self.closed_form_with_quantile(q, den, pi, y, i_prev))
    }

    /// Closed-form rule at every grid value, sharing one sorted sample.
    pub fn closed_form_curve(&self, grid: &TauGrid, pi: f64, y: f64, i_prev: f64) -> Result<Vec<f64>> {
        let den = self.checked_denominator()?;
        let (w_pi, w_y) = self.quantile_weights(pi, y);
        let sorted = SortedSample::new(combine_shocks(&self.shocks, w_pi, w_y))?;
        grid.values()
            .iter()
            .map(|&t| Ok(self.closed_form_with_quantile(sorted.quantile(t)?, den, pi, y, i_prev)))
            .collect()
    }

    /// Optimal rate under the context's case: closed form, or bisection for the general case.
    pub fn optimal_rate(&self, tau: f64, pi: f64, y: f64, i_prev: f64) -> Result<f64> {
        match self.case {
            RuleCase::General => solve_euler_numeric(self, tau, pi, y, i_prev, default_bracket(i_prev)).map(|r| r.rate),
            _ => self.closed_form(tau, pi, y, i_prev),
        }
    }

    /// Optimal rates over a τ grid.
    pub fn rule_curve(&self, grid: &TauGrid, pi: f64, y: f64, i_prev: f64) -> Result<Vec<f64>> {
        match self.case {
            RuleCase::General => grid.values().iter().map(|&t| self.optimal_rate(t, pi, y, i_prev)).collect(),
            _ => self.closed_form_curve(grid, pi, y, i_prev),
        }
    }

    /// Scale and its rate derivative for the numerical Euler condition.
    fn euler_scales(&self, eq: Equation, state: State) -> Result<(f64, f64)> {
        match (self.case, &self.sked) {
            (RuleCase::LocationShift, _) | (_, None) => Ok((1.0, 0.0)),
            (RuleCase::LocationScaleStates, Some(m)) => Ok((m.h(eq, State::new(state.pi, state.y, 0.0)), 0.0)),
            (RuleCase::General, Some(m)) => Ok((m.h(eq, state), m.dh_di(eq, state)?)),
        }
    }

    /// Values inside the quantile of the Euler condition, one per shock pair.
    pub fn euler_inner(&self, i: f64, pi: f64, y: f64) -> Result<Vec<f64>> {
        let state = State::new(pi, y, i);
        let (h_pi, dh_pi) = self.euler_scales(Equation::Inflation, state)?;
        let (h_y, dh_y) = self.euler_scales(Equation::OutputGap, state)?;
        let p = &self.law.inflation;
        let o = &self.law.output_gap;
        let mean_pi = p.mean(pi, y, i);
        let mean_y = o.mean(pi, y, i);
        let lam = self.calib.lambda;
        let pi_star = self.calib.pi_star;
        Ok(self
            .shocks
            .pairs()
            .map(|(zp, zy)| {
                let next_pi = mean_pi + h_pi * zp;
                let next_y = mean_y + h_y * zy;
                -(next_pi - pi_star) * (p.rate + dh_pi * zp) - lam * next_y * (o.rate + dh_y * zy)
            })
            .collect())
    }

    /// True when the inner expression contains squared shocks.
    pub fn has_quadratic_shocks(&self, i: f64, pi: f64, y: f64) -> bool {
        let state = State::new(pi, y, i);
        [Equation::Inflation, Equation::OutputGap]
            .iter()
            .any(|&eq| self.euler_scales(eq, state).is_ok_and(|(_, d)| d != 0.0))
    }
}

/// Closed-form rule with constant scales.
pub fn taylor_rule_location_shift(ctx: &RuleContext, tau: f64, pi: f64, y: f64, i_prev: f64) -> Result<f64> {
    if ctx.case != RuleCase::LocationShift {
        return Err(Error::CaseMismatch("location-shift rule needs case = location_shift".into()));
    }
    ctx.closed_form(tau, pi, y, i_prev)
}

/// Closed-form rule with state-dependent scales (`γ_ai = 0`).
pub fn taylor_rule_location_scale(ctx: &RuleContext, tau: f64, pi: f64, y: f64, i_prev: f64) -> Result<f64> {
    if ctx.case != RuleCase::LocationScaleStates {
        return Err(Error::CaseMismatch("location-scale rule needs case = location_scale_states".into()));
    }
    match &ctx.sked {
        None => Err(Error::CaseMismatch("location-scale rule needs a skedastic model".into())),
        Some(m) if !m.rate_free() => Err(Error::CaseMismatch("location-scale rule needs gamma_ai = 0".into())),
        Some(_) => ctx.closed_form(tau, pi, y, i_prev),
    }
}

/// Left side of the Euler condition at a candidate rate, by direct substitution
/// over the shock sample. Valid for every case.
pub fn euler_residual(ctx: &RuleContext, i_candidate: f64, tau: f64, pi: f64, y: f64, i_prev: f64) -> Result<f64> {
    let mut inner = ctx.euler_inner(i_candidate, pi, y)?;
    let q = empirical_quantile_in_place(&mut inner, tau)?;
    Ok(-ctx.calib.delta * (i_candidate - i_prev) + ctx.calib.beta * q)
}

/// Euler residual for the general case, where the scale depends on the rate.
pub fn euler_residual_general(
    ctx: &RuleContext,
    i_candidate: f64,
    tau: f64,
    pi: f64,
    y: f64,
    i_prev: f64,
) -> Result<f64> {
    if ctx.case != RuleCase::General {
        return Err(Error::CaseMismatch("general Euler residual needs case = general".into()));
    }
    euler_residual(ctx, i_candidate, tau, pi, y, i_prev)
}

/// Initial search interval, 25 points either side of the lagged rate.
pub fn default_bracket(i_prev: f64) -> (f64, f64) {
    (i_prev - 25.0, i_prev + 25.0)
}

/// Number of times the bracket half-width is doubled before giving up (25 → 800).
pub const MAX_BRACKET_EXPANSIONS: usize = 5;

pub const EULER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct EulerRoot {
    pub rate: f64,
    pub residual: f64,
    pub iterations: usize,
    /// Sign-changing interval the search settled on.
    pub bracket: (f64, f64),
    pub warnings: Vec<String>,
}

/// Bisection on the Euler residual. The bracket is widened symmetrically until
/// the residual changes sign; the first sign change found is used and further
/// roots are not searched for.
pub fn solve_euler_numeric(
    ctx: &RuleContext,
    tau: f64,
    pi: f64,
    y: f64,
    i_prev: f64,
    bracket: (f64, f64),
) -> Result<EulerRoot> {
    let f = |i: f64| euler_residual(ctx, i, tau, pi, y, i_prev);
    let mut root = bisect_expanding(f, bracket)?;
    let (lo, hi) = root.bracket;
    if ctx.has_quadratic_shocks(0.5 * (lo + hi), pi, y) {
        root.warnings.push(
            "Euler inner expression contains squared shocks; quantile/derivative interchange may not hold".into(),
        );
    }
    if ctx.case == RuleCase::General {
        root.warnings.push("first sign-changing bracket used; additional roots are not searched for".into());
    }
    Ok(root)
}

/// Bisection of `f` after widening `bracket` until it changes sign.
pub(crate) fn bisect_expanding<F>(f: F, bracket: (f64, f64)) -> Result<EulerRoot>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut lo, mut hi) = if bracket.0 <= bracket.1 { bracket } else { (bracket.1, bracket.0) };
    let mut f_lo = f(lo)?;
    let mut f_hi = f(hi)?;
    let mut expansions = 0;
    while f_lo.signum() == f_hi.signum() && f_lo != 0.0 && f_hi != 0.0 {
        if expansions == MAX_BRACKET_EXPANSIONS {
            return Err(Error::NoSignChange { lo, hi, f_lo, f_hi });
        }
        let mid = 0.5 * (lo + hi);
        let half = hi - lo;
        lo = mid - half;
        hi = mid + half;
        f_lo = f(lo)?;
        f_hi = f(hi)?;
        expansions += 1;
    }

    let mut warnings = Vec::new();

    let bracket_found = (lo, hi);
    if f_lo == 0.0 {
        return Ok(EulerRoot { rate: lo, residual: 0.0, iterations: 0, bracket: bracket_found, warnings });
    }
    if f_hi == 0.0 {
        return Ok(EulerRoot { rate: hi, residual: 0.0, iterations: 0, bracket: bracket_found, warnings });
    }

    let mut iterations = 0;
    let (mut best, mut best_f) = if f_lo.abs() < f_hi.abs() { (lo, f_lo) } else { (hi, f_hi) };
    while iterations < 200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = f(mid)?;
        iterations += 1;
        if f_mid.abs() < best_f.abs() {
            best = mid;
            best_f = f_mid;
        }
        if f_mid == 0.0 {
            break;
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    if best_f.abs() >= EULER_TOLERANCE {
        warnings
            .push(format!("residual jumps across zero near {best}; smallest attained |residual| = {:e}", best_f.abs()));
    }
    Ok(EulerRoot { rate: best, residual: best_f, iterations, bracket: bracket_found, warnings })
}

/// Implied-τ result for one quarter.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpliedTauRow {
    pub quarter: Quarter,
    pub i_observed: f64,
    /// Optimal rate at each grid value; empty when the quarter is invalid.
    pub rule: Vec<f64>,
    pub tau_hat: Option<f64>,
    pub fit_error: f64,
    /// Every grid value attaining the minimal distance.
    pub minimizers: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImpliedTauSeries {
    pub grid: TauGrid,
    pub rows: Vec<ImpliedTauRow>,
}

impl ImpliedTauSeries {
    pub fn taus(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.tau_hat).collect()
    }

    /// Lower median of the valid τ̂ values.
    pub fn median_tau(&self) -> Option<f64> {
        let t = self.taus();
        if t.is_empty() {
            return None;
        }
        crate::quantile::empirical_quantile(&t, 0.5).ok()
    }

    pub fn invalid_count(&self) -> usize {
        self.rows.iter().filter(|r| r.tau_hat.is_none()).count()
    }
}

/// Grid argmin of `|i_observed − i*_τ|`; ties go to the smallest τ.
pub fn match_tau(grid: &TauGrid, rule: &[f64], i_observed: f64) -> (f64, f64, Vec<f64>) {
    let dist: Vec<f64> = rule.iter().map(|r| (i_observed - r).abs()).collect();
    let best = dist.iter().copied().fold(f64::INFINITY, f64::min);
    let minimizers: Vec<f64> = grid.values().iter().zip(&dist).filter(|(_, &d)| d == best).map(|(&t, _)| t).collect();
    (minimizers[0], best, minimizers)
}

/// For each quarter `t ≥ 1`, the grid τ whose rule at `(π_t, y_t, i_{t−1})` is closest to `i_t`.
pub fn implied_tau_series(panel: &MacroPanel, ctx: &RuleContext, grid: &TauGrid) -> Result<ImpliedTauSeries> {
    if panel.len() < 2 {
        return Err(Error::InvalidData("implied tau needs at least two quarters".into()));
    }
    let rows = (1..panel.len())
        .into_par_iter()
        .map(|t| {
            let quarter = panel.quarters[t];
            let i_observed = panel.i[t];
            match ctx.rule_curve(grid, panel.pi[t], panel.y[t], panel.i[t - 1]) {
                Ok(rule) if rule.iter().all(|v| v.is_finite()) => {
                    let (tau, err, minimizers) = match_tau(grid, &rule, i_observed);
                    ImpliedTauRow {
                        quarter,
                        i_observed,
                        rule,
                        tau_hat: Some(tau),
                        fit_error: err,
                        minimizers,
                        error: None,
                    }
                }
                Ok(_) => invalid_row(quarter, i_observed, "non-finite rule value".into()),
                Err(e) => invalid_row(quarter, i_observed, e.to_string()),
            }
        })
        .collect();
    Ok(ImpliedTauSeries { grid: grid.clone(), rows })
}

fn invalid_row(quarter: Quarter, i_observed: f64, error: String) -> ImpliedTauRow {
    log::warn!("implied tau invalid at {quarter}: {error}");
    ImpliedTauRow {
        quarter,
        i_observed,
        rule: Vec::new(),
        tau_hat: None,
        fit_error: f64::NAN,
        minimizers: Vec::new(),
        error: Some(error),
    }
}
