//! Left-continuous empirical quantiles and the directional reductions built on them.
//!
//! Every quantile in the crate goes through [`quantile_rank`]: for a sample of
//! size `n` the τ-quantile is the order statistic `x_(k)` with `k` the smallest
//! rank whose empirical CDF value `k / n` reaches τ,
//!
//! ```text
//! Q_τ = inf { x : F̂(x) ≥ τ } = x_(k),   k = min { k ≥ 1 : k/n ≥ τ }.
//! ```
//!
//! No interpolation between order statistics is ever performed.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::regress::LawOfMotion;
use crate::skedastic::{Equation, ShockPanel, SkedasticModel, State};

/// Strictly increasing grid of quantile indices inside (0, 1).
#[derive(Debug, Clone, PartialEq)]
pub struct TauGrid {
    values: Vec<f64>,
}

impl TauGrid {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Config("tau grid is empty".into()));
        }
        for &t in &values {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidTau(t));
            }
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("tau grid must be strictly increasing".into()));
        }
        Ok(Self { values })
    }

    /// `{step, 2·step, …}` below one, built by integer multiples so that
    /// `percent()` yields exactly 0.01, 0.02, …, 0.99.
    pub fn uniform(count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Config("tau grid needs at least one point".into()));
        }
        let denom = (count + 1) as f64;
        Self::new((1..=count).map(|k| k as f64 / denom).collect())
    }

    /// The default `{0.01, 0.02, …, 0.99}` grid.
    pub fn percent() -> Self {
        Self::uniform(99).expect("static grid is valid")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn contains(&self, tau: f64) -> bool {
        self.values.contains(&tau)
    }
}

/// One-based rank `k` of the order statistic returned as the τ-quantile.
///
/// The comparison `k / n ≥ τ` is carried out in floating point, the same way
/// the empirical CDF is evaluated, so a grid value such as `0.07` with `n = 100`
/// selects `x_(7)` even though `0.07 * 100.0` rounds above seven.
pub fn quantile_rank(n: usize, tau: f64) -> usize {
    debug_assert!(n > 0);
    let nf = n as f64;
    let mut k = ((tau * nf).ceil() as usize).clamp(1, n);
    while k > 1 && ((k - 1) as f64 / nf) >= tau {
        k -= 1;
    }
    while k < n && (k as f64 / nf) < tau {
        k += 1;
    }
    k
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidTau(tau))
    }
}

/// τ-quantile of `sample` under the left-continuous generalized inverse.
pub fn empirical_quantile(sample: &[f64], tau: f64) -> Result<f64> {
    let mut scratch = sample.to_vec();
    empirical_quantile_in_place(&mut scratch, tau)
}

/// Same as [`empirical_quantile`] but reorders `sample` instead of copying it.
pub fn empirical_quantile_in_place(sample: &mut [f64], tau: f64) -> Result<f64> {
    check_tau(tau)?;
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let k = quantile_rank(sample.len(), tau);
    let (_, kth, _) = sample.select_nth_unstable_by(k - 1, f64::total_cmp);
    Ok(*kth)
}

/// A sorted sample, for reading many quantiles of the same data.
#[derive(Debug, Clone)]
pub struct SortedSample {
    sorted: Vec<f64>,
}

impl SortedSample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self { sorted: values })
    }

    pub fn quantile(&self, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        Ok(self.sorted[quantile_rank(self.sorted.len(), tau) - 1])
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.sorted.len() - 1]
    }
}

/// Values `w_pi·z_pi + w_y·z_y` over the aligned shock pairs.
pub fn combine_shocks(shocks: &ShockPanel, w_pi: f64, w_y: f64) -> Vec<f64> {
    shocks.z_pi.iter().zip(&shocks.z_y).map(|(zp, zy)| w_pi * zp + w_y * zy).collect()
}

/// τ-quantile of the scalar combination `w_pi·z_pi + w_y·z_y`, treating the
/// shock pairs as exchangeable draws from their joint distribution.
pub fn shock_combination_quantile(shocks: &ShockPanel, w_pi: f64, w_y: f64, tau: f64) -> Result<f64> {
    if shocks.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut combined = combine_shocks(shocks, w_pi, w_y);
    empirical_quantile_in_place(&mut combined, tau)
}

/// Unit direction `(d_pi, d_y)` along which the rule's quantile term is taken.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionWeights {
    pub d_pi: f64,
    pub d_y: f64,
}

impl DirectionWeights {
    /// Normalizes `(a, b)`; fails when both are zero.
    pub fn normalize(a: f64, b: f64) -> Result<Self> {
        let norm = a.hypot(b);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::NoPolicyEffect);
        }
        Ok(Self { d_pi: a / norm, d_y: b / norm })
    }

    /// True when the combined shock is nondecreasing in both components, the
    /// condition under which quantile and derivative may be interchanged.
    pub fn is_monotone_increasing(&self) -> bool {
        self.d_pi >= 0.0 && self.d_y >= 0.0
    }

    /// True when the two weights carry opposite signs.
    pub fn has_mixed_signs(&self) -> bool {
        self.d_pi.partial_cmp(&0.0).zip(self.d_y.partial_cmp(&0.0)).is_some_and(|(a, b)| {
            matches!((a, b), (Ordering::Less, Ordering::Greater) | (Ordering::Greater, Ordering::Less))
        })
    }
}

/// Direction proportional to `(−α_πi, −λ·α_yi)` for the location-shift model.
pub fn direction_weights_location_shift(law: &LawOfMotion, lambda: f64) -> Result<DirectionWeights> {
    DirectionWeights::normalize(-law.inflation.rate, -lambda * law.output_gap.rate)
}

/// State-dependent direction `(−h_π·α_πi, −λ·h_y·α_yi)` for the location-scale model.
pub fn direction_weights_location_scale(
    law: &LawOfMotion,
    sked: &SkedasticModel,
    lambda: f64,
    pi: f64,
    y: f64,
) -> Result<DirectionWeights> {
    let state = State::new(pi, y, 0.0);
    let h_pi = sked.h(Equation::Inflation, state);
    let h_y = sked.h(Equation::OutputGap, state);
    DirectionWeights::normalize(-h_pi * law.inflation.rate, -lambda * h_y * law.output_gap.rate)
}

/// Random-coefficient view of the conditional quantile at a given state.
///
/// Returns `(α_0(τ), α_i(τ), α_π(τ), α_y(τ))` in the crate's coefficient order.
/// Slopes are `α_b + ∂h/∂b · Q_τ(z)`; the intercept is set so that the
/// coefficients reproduce the conditional quantile exactly at `state`
/// (tangent plane of `h` at the evaluation point).
pub fn conditional_quantile_coefficients(
    law: &LawOfMotion,
    sked: &SkedasticModel,
    shocks: &ShockPanel,
    equation: Equation,
    tau: f64,
    state: State,
) -> Result<[f64; 4]> {
    let z = match equation {
        Equation::Inflation => &shocks.z_pi,
        Equation::OutputGap => &shocks.z_y,
    };
    let q = empirical_quantile(z, tau)?;
    let h = sked.h(equation, state);
    let grad = sked.gradient(equation, state)?;
    let alpha = law.equation(equation);
    let tangent_level = h - grad.pi * state.pi - grad.y * state.y - grad.i * state.i;
    Ok([alpha.constant + tangent_level * q, alpha.rate + grad.i * q, alpha.pi + grad.pi * q, alpha.y + grad.y * q])
}
