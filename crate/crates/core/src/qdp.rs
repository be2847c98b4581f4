//! Quantile dynamic programming: value iteration with the τ-quantile of the
//! continuation value in place of its expectation,
//!
//! ```text
//! v(π, y, i₋₁) = max_{i ∈ I} { u(π, y, i, i₋₁) + β·Q_τ[ v(π', y', i) ] }
//! ```
//!
//! on a `π × y × i₋₁` grid. The action set is the `i` grid itself, so the
//! next state's lagged rate always sits on a grid node and only `(π', y')`
//! needs interpolation (bilinear, clamped to the edge values outside).
//!
//! The continuation term does not depend on `i₋₁`, so each update evaluates
//! it once per `(π, y, i)` and reuses it across the lagged-rate dimension.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::write_record;
use crate::quantile::empirical_quantile_in_place;
use crate::regress::LawOfMotion;
use crate::rule::{Calibration, RuleCase, RuleContext};
use crate::skedastic::{Equation, SkedasticModel, State};

pub const MIN_GRID_POINTS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct QdpProblem {
    pub pi_grid: Vec<f64>,
    pub y_grid: Vec<f64>,
    /// Actions, and the lagged-rate dimension of the state.
    pub i_grid: Vec<f64>,
    pub shock_pairs: Vec<(f64, f64)>,
    pub calib: Calibration,
    pub law: LawOfMotion,
    /// Scale functions; `None` means the shocks enter unscaled.
    pub sked: Option<SkedasticModel>,
    pub tau: f64,
}

/// Evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|k| if k == n - 1 { hi } else { lo + step * k as f64 }).collect()
}

/// Grid layout for a problem built around observed data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub pi_points: usize,
    pub y_points: usize,
    /// Margin added beyond the observed min/max of π and y.
    pub padding: f64,
    pub i_min: f64,
    pub i_max: f64,
    pub i_points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { pi_points: 41, y_points: 41, padding: 1.0, i_min: 0.0, i_max: 20.0, i_points: 81 }
    }
}

impl GridSpec {
    pub fn grids(&self, pi_range: (f64, f64), y_range: (f64, f64)) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        (
            linspace(pi_range.0 - self.padding, pi_range.1 + self.padding, self.pi_points),
            linspace(y_range.0 - self.padding, y_range.1 + self.padding, self.y_points),
            linspace(self.i_min, self.i_max, self.i_points),
        )
    }
}

impl QdpProblem {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        pi_grid: Vec<f64>,
        y_grid: Vec<f64>,
        i_grid: Vec<f64>,
        shock_pairs: Vec<(f64, f64)>,
        calib: Calibration,
        law: LawOfMotion,
        sked: Option<SkedasticModel>,
        tau: f64,
    ) -> Result<Self> {
        for (name, g) in [("pi", &pi_grid), ("y", &y_grid), ("i", &i_grid)] {
            if g.len() < MIN_GRID_POINTS {
                return Err(Error::Config(format!("{name} grid needs at least {MIN_GRID_POINTS} points")));
            }
            if g.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(Error::Config(format!("{name} grid must be strictly increasing")));
            }
        }
        if shock_pairs.is_empty() {
            return Err(Error::EmptySample);
        }
        if !(tau > 0.0 && tau < 1.0) {
            return Err(Error::InvalidTau(tau));
        }
        Ok(Self { pi_grid, y_grid, i_grid, shock_pairs, calib, law, sked, tau })
    }

    /// Problem sharing the law, scales, shocks and calibration of a rule context.
    pub fn from_context(
        ctx: &RuleContext,
        pi_grid: Vec<f64>,
        y_grid: Vec<f64>,
        i_grid: Vec<f64>,
        tau: f64,
    ) -> Result<Self> {
        let sked = match ctx.case {
            RuleCase::LocationShift => None,
            _ => ctx.sked.clone(),
        };
        Self::new(pi_grid, y_grid, i_grid, ctx.shocks.pairs().collect(), ctx.calib, ctx.law.clone(), sked, tau)
    }

    fn dims(&self) -> (usize, usize, usize) {
        (self.pi_grid.len(), self.y_grid.len(), self.i_grid.len())
    }

    /// `u(π, y, i, i₋₁)`.
    pub fn utility(&self, pi: f64, y: f64, i: f64, i_prev: f64) -> f64 {
        let c = &self.calib;
        -0.5 * (pi - c.pi_star).powi(2) - 0.5 * c.lambda * y * y - 0.5 * c.delta * (i - i_prev).powi(2)
    }

    /// Next-period `(π', y')` for one shock pair.
    pub fn next_state(&self, pi: f64, y: f64, i: f64, shock: (f64, f64)) -> (f64, f64) {
        let (h_pi, h_y) = self.scales(pi, y, i);
        (self.law.inflation.mean(pi, y, i) + h_pi * shock.0, self.law.output_gap.mean(pi, y, i) + h_y * shock.1)
    }

    fn scales(&self, pi: f64, y: f64, i: f64) -> (f64, f64) {
        match &self.sked {
            None => (1.0, 1.0),
            Some(m) => {
                let s = State::new(pi, y, i);
                (m.h(Equation::Inflation, s), m.h(Equation::OutputGap, s))
            }
        }
    }
}

/// Values and greedy policy over `(π, y, i₋₁)`; index with [`ValueFunction::at`].
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFunction {
    pub n_pi: usize,
    pub n_y: usize,
    pub n_i: usize,
    /// Stored lagged-rate major: `(m·n_pi + j)·n_y + k`.
    pub values: Vec<f64>,
    /// Index into the `i` grid of the maximizing action.
    pub policy: Vec<usize>,
    pub iterations: usize,
    /// Sup-norm change of each update.
    pub changes: Vec<f64>,
}

impl ValueFunction {
    pub fn zeros(problem: &QdpProblem) -> Self {
        let (n_pi, n_y, n_i) = problem.dims();
        let len = n_pi * n_y * n_i;
        Self { n_pi, n_y, n_i, values: vec![0.0; len], policy: vec![0; len], iterations: 0, changes: Vec::new() }
    }

    #[inline]
    pub fn index(&self, j: usize, k: usize, m: usize) -> usize {
        (m * self.n_pi + j) * self.n_y + k
    }

    pub fn at(&self, j: usize, k: usize, m: usize) -> f64 {
        self.values[self.index(j, k, m)]
    }

    pub fn policy_at(&self, j: usize, k: usize, m: usize) -> usize {
        self.policy[self.index(j, k, m)]
    }

    fn plane(&self, m: usize) -> &[f64] {
        let size = self.n_pi * self.n_y;
        &self.values[m * size..(m + 1) * size]
    }

    pub fn last_change(&self) -> f64 {
        self.changes.last().copied().unwrap_or(f64::INFINITY)
    }

    /// Ratios of successive sup-norm changes; these settle at or below β when
    /// the update contracts.
    pub fn contraction_ratios(&self) -> Vec<f64> {
        self.changes.windows(2).filter(|w| w[0] > 0.0).map(|w| w[1] / w[0]).collect()
    }

    /// Writes the `(π, y)` slice at lagged-rate index `m`: `pi,y,i_prev,value,policy_rate`.
    pub fn write_slice<W: Write>(&self, problem: &QdpProblem, m: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        write_record(&mut w, &["pi", "y", "i_prev", "value", "policy_rate"].map(String::from))?;
        for j in 0..self.n_pi {
            for k in 0..self.n_y {
                write_record(
                    &mut w,
                    &[
                        crate::fmt_num(problem.pi_grid[j]),
                        crate::fmt_num(problem.y_grid[k]),
                        crate::fmt_num(problem.i_grid[m]),
                        crate::fmt_num(self.at(j, k, m)),
                        crate::fmt_num(problem.i_grid[self.policy_at(j, k, m)]),
                    ],
                )?;
            }
        }
        w.flush().map_err(crate::ingest::csv_io)?;
        Ok(())
    }
}

/// Locates `x` on a sorted grid: lower node and weight on the upper node, clamped.
#[derive(Debug, Clone)]
enum Locator {
    Uniform { start: f64, step: f64, n: usize },
    Sorted(Vec<f64>),
}

impl Locator {
    fn new(grid: &[f64]) -> Self {
        let n = grid.len();
        let step = (grid[n - 1] - grid[0]) / (n - 1) as f64;
        let uniform =
            grid.iter().enumerate().all(|(k, &g)| (g - (grid[0] + step * k as f64)).abs() <= 1e-12 * (1.0 + g.abs()));
        if uniform {
            Locator::Uniform { start: grid[0], step, n }
        } else {
            Locator::Sorted(grid.to_vec())
        }
    }

    #[inline]
    fn locate(&self, x: f64) -> (usize, f64) {
        match self {
            Locator::Uniform { start, step, n } => {
                let pos = (x - start) / step;
                if !(pos > 0.0) {
                    (0, 0.0)
                } else if pos >= (n - 1) as f64 {
                    (n - 2, 1.0)
                } else {
                    let j = pos.floor() as usize;
                    (j, pos - j as f64)
                }
            }
            Locator::Sorted(g) => {
                let n = g.len();
                if !(x > g[0]) {
                    (0, 0.0)
                } else if x >= g[n - 1] {
                    (n - 2, 1.0)
                } else {
                    let j = g.partition_point(|&v| v <= x) - 1;
                    (j, (x - g[j]) / (g[j + 1] - g[j]))
                }
            }
        }
    }
}

#[inline]
fn bilinear(plane: &[f64], n_y: usize, (j, wj): (usize, f64), (k, wk): (usize, f64)) -> f64 {
    let v00 = plane[j * n_y + k];
    let v01 = plane[j * n_y + k + 1];
    let v10 = plane[(j + 1) * n_y + k];
    let v11 = plane[(j + 1) * n_y + k + 1];
    (1.0 - wj) * ((1.0 - wk) * v00 + wk * v01) + wj * ((1.0 - wk) * v10 + wk * v11)
}

/// Clamped bilinear interpolation of the `i₋₁ = i_grid[m]` plane at `(π, y)`.
pub fn interpolate(v: &ValueFunction, problem: &QdpProblem, m: usize, pi: f64, y: f64) -> f64 {
    let lp = Locator::new(&problem.pi_grid);
    let ly = Locator::new(&problem.y_grid);
    bilinear(v.plane(m), v.n_y, lp.locate(pi), ly.locate(y))
}

/// One application of the quantile Bellman operator.
pub fn quantile_bellman_update(v: &ValueFunction, problem: &QdpProblem) -> Result<ValueFunction> {
    let (n_pi, n_y, n_i) = problem.dims();
    if (v.n_pi, v.n_y, v.n_i) != (n_pi, n_y, n_i) {
        return Err(Error::GridMismatch(format!(
            "value function is {}x{}x{}, problem grids are {n_pi}x{n_y}x{n_i}",
            v.n_pi, v.n_y, v.n_i
        )));
    }
    let lp = Locator::new(&problem.pi_grid);
    let ly = Locator::new(&problem.y_grid);
    let beta = problem.calib.beta;
    let delta = problem.calib.delta;
    let tau = problem.tau;

    // Per (π, y) node: the best value and action for every lagged rate.
    let cells: Vec<(Vec<f64>, Vec<usize>)> = (0..n_pi * n_y)
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(problem.shock_pairs.len()),
            |scratch, cell| {
                let (j, k) = (cell / n_y, cell % n_y);
                let (pi, y) = (problem.pi_grid[j], problem.y_grid[k]);
                let continuation: Vec<f64> = (0..n_i)
                    .map(|a| {
                        let plane = v.plane(a);
                        let i = problem.i_grid[a];
                        let (h_pi, h_y) = problem.scales(pi, y, i);
                        let m_pi = problem.law.inflation.mean(pi, y, i);
                        let m_y = problem.law.output_gap.mean(pi, y, i);
                        scratch.clear();
                        scratch.extend(problem.shock_pairs.iter().map(|&(zp, zy)| {
                            bilinear(plane, n_y, lp.locate(m_pi + h_pi * zp), ly.locate(m_y + h_y * zy))
                        }));
                        empirical_quantile_in_place(scratch, tau).expect("nonempty shock sample")
                    })
                    .collect();
                let base = -0.5 * (pi - problem.calib.pi_star).powi(2) - 0.5 * problem.calib.lambda * y * y;
                let mut best_values = Vec::with_capacity(n_i);
                let mut best_actions = Vec::with_capacity(n_i);
                for &i_prev in &problem.i_grid {
                    let mut best = f64::NEG_INFINITY;
                    let mut arg = 0;
                    for (a, &c) in continuation.iter().enumerate() {
                        let d = problem.i_grid[a] - i_prev;
                        let val = -0.5 * delta * d * d + beta * c;
                        if val > best {
                            best = val;
                            arg = a;
                        }
                    }
                    best_values.push(base + best);
                    best_actions.push(arg);
                }
                (best_values, best_actions)
            },
        )
        .collect();

    let mut out = ValueFunction::zeros(problem);
    for (cell, (vals, acts)) in cells.into_iter().enumerate() {
        let (j, k) = (cell / n_y, cell % n_y);
        for m in 0..n_i {
            let idx = out.index(j, k, m);
            out.values[idx] = vals[m];
            out.policy[idx] = acts[m];
        }
    }
    out.iterations = v.iterations + 1;
    out.changes = v.changes.clone();
    out.changes.push(sup_norm_diff(&out.values, &v.values));
    Ok(out)
}

fn sup_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stopping {
    /// Stop when successive iterates differ by less than `tol` in sup norm.
    #[default]
    SupNorm,
    /// Stop when the McQueen–Porteus bounds on the fixed point are within `tol`
    /// of each other; the returned values are the bounds' midpoint. Valid because
    /// the operator maps `v + c` to `T v + β·c`.
    McQueenPorteus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub stopping: Stopping,
}

impl Default for IterationOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 5_000, stopping: Stopping::SupNorm }
    }
}

/// Value iteration from zero until the sup-norm change falls below `tol`.
pub fn solve_value_iteration(problem: &QdpProblem, tol: f64, max_iter: usize) -> Result<ValueFunction> {
    solve_value_iteration_with(problem, IterationOptions { tol, max_iter, stopping: Stopping::SupNorm })
}

pub fn solve_value_iteration_with(problem: &QdpProblem, opts: IterationOptions) -> Result<ValueFunction> {
    let beta = problem.calib.beta;
    if !(beta < 1.0) {
        return Err(Error::Config(format!("value iteration needs beta < 1, got {beta}")));
    }
    let mut v = ValueFunction::zeros(problem);
    for _ in 0..opts.max_iter {
        let next = quantile_bellman_update(&v, problem)?;
        let change = next.last_change();
        match opts.stopping {
            Stopping::SupNorm => {
                if change < opts.tol {
                    log::debug!("value iteration converged after {} updates (change {change:e})", next.iterations);
                    return Ok(next);
                }
            }
            Stopping::McQueenPorteus => {
                let (lo, hi) = next
                    .values
                    .iter()
                    .zip(&v.values)
                    .map(|(a, b)| a - b)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
                let factor = beta / (1.0 - beta);
                if factor * (hi - lo) < opts.tol {
                    let shift = factor * 0.5 * (lo + hi);
                    let mut done = next;
                    done.values.iter_mut().for_each(|x| *x += shift);
                    return Ok(done);
                }
            }
        }
        v = next;
    }
    Err(Error::NotConverged { iterations: v.iterations, change: v.last_change(), last: Box::new(v) })
}

/// Deviation of the oracle's greedy policy from a closed-form rule over interior states.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviationReport {
    pub max_abs: f64,
    pub mean_abs: f64,
    /// `max_abs` in units of the `i` grid step.
    pub max_steps: f64,
    pub states: usize,
    /// `(π, y, i₋₁)` where the largest deviation occurs.
    pub worst_state: (f64, f64, f64),
}

/// Compares `vf.policy` against `ctx`'s rule at the problem's τ, skipping
/// `interior_margin` grid cells at every edge of every dimension.
pub fn compare_policy_to_closed_form(
    vf: &ValueFunction,
    problem: &QdpProblem,
    ctx: &RuleContext,
    interior_margin: usize,
) -> Result<DeviationReport> {
    compare_policy_with(vf, problem, interior_margin, |pi, y, ip| ctx.optimal_rate(problem.tau, pi, y, ip)).and_then(
        |r| {
            if ctx.calib != problem.calib {
                Err(Error::GridMismatch("rule and oracle calibrations differ".into()))
            } else {
                Ok(r)
            }
        },
    )
}

/// Same as [`compare_policy_to_closed_form`] for an arbitrary rule.
pub fn compare_policy_with<F>(
    vf: &ValueFunction,
    problem: &QdpProblem,
    interior_margin: usize,
    rule: F,
) -> Result<DeviationReport>
where
    F: Fn(f64, f64, f64) -> Result<f64>,
{
    let (n_pi, n_y, n_i) = problem.dims();
    if (vf.n_pi, vf.n_y, vf.n_i) != (n_pi, n_y, n_i) {
        return Err(Error::GridMismatch("value function and problem grids differ".into()));
    }
    let range = |n: usize| {
        if 2 * interior_margin >= n {
            Err(Error::GridMismatch(format!("margin {interior_margin} leaves no interior points on a {n}-point grid")))
        } else {
            Ok(interior_margin..n - interior_margin)
        }
    };
    let (rj, rk, rm) = (range(n_pi)?, range(n_y)?, range(n_i)?);
    let step = (problem.i_grid[n_i - 1] - problem.i_grid[0]) / (n_i - 1) as f64;
    let mut max_abs = 0.0;
    let mut sum = 0.0;
    let mut states = 0;
    let mut worst_state = (f64::NAN, f64::NAN, f64::NAN);
    for j in rj {
        for k in rk.clone() {
            for m in rm.clone() {
                let (pi, y, ip) = (problem.pi_grid[j], problem.y_grid[k], problem.i_grid[m]);
                let closed = rule(pi, y, ip)?;
                let dev = (problem.i_grid[vf.policy_at(j, k, m)] - closed).abs();
                if dev > max_abs {
                    max_abs = dev;
                    worst_state = (pi, y, ip);
                }
                sum += dev;
                states += 1;
            }
        }
    }
    Ok(DeviationReport { max_abs, mean_abs: sum / states as f64, max_steps: max_abs / step, states, worst_state })
}
