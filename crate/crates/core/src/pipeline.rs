//! End-to-end run: raw files → panel → law of motion → scales and shocks →
//! rule evaluation → implied τ, with an optional oracle comparison and a
//! robustness sweep.
//!
//! Every file written is listed in `manifest.txt` with its SHA-256, together
//! with a reproducibility hash over the canonical configuration and the input
//! bytes. If a stage fails, the files already written stay in place, a
//! `FAILED` marker names the stage, and the manifest still covers everything.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::fmt_num;
use crate::ingest::{
    assemble_panel, build_inflation, build_output_gap, descriptive_stats, load_series, monthly_to_quarterly,
    write_record, Frequency, MacroPanel,
};
use crate::qdp::{
    compare_policy_to_closed_form, solve_value_iteration_with, DeviationReport, IterationOptions, QdpProblem,
};
use crate::quantile::TauGrid;
use crate::regress::{fit_var1, LawOfMotion, OlsFit};
use crate::rule::{implied_tau_series, Calibration, ImpliedTauSeries, RuleCase, RuleContext};
use crate::skedastic::{
    fit_skedastic, floor_bindings, residual_shocks, standardize_shocks, ShockPanel, SkedasticModel,
};

/// How far a run goes; each stage includes the ones before it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Prepare,
    Estimate,
    Rule,
    ImpliedTau,
    ValidateDp,
}

impl Stage {
    pub fn name(self) -> &'static str {
        match self {
            Stage::Prepare => "prepare",
            Stage::Estimate => "estimate",
            Stage::Rule => "rule",
            Stage::ImpliedTau => "implied-tau",
            Stage::ValidateDp => "validate-dp",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Error from a run, tagged with the stage that raised it.
#[derive(Debug)]
pub struct StageError {
    pub stage: String,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {} failed: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    pub reproducibility_hash: String,
    pub files: Vec<ManifestEntry>,
}

/// Output directory that records every file written to it.
struct Outputs {
    root: PathBuf,
    written: Vec<ManifestEntry>,
}

impl Outputs {
    fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).map_err(|source| Error::Io { path: root.to_path_buf(), source })?;
        for stale in ["FAILED", "manifest.txt"] {
            let p = root.join(stale);
            if p.exists() {
                fs::remove_file(&p).map_err(|source| Error::Io { path: p.clone(), source })?;
            }
        }
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    fn write_bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|source| Error::Io { path: parent.to_path_buf(), source })?;
        }
        fs::write(&path, bytes).map_err(|source| Error::Io { path: path.clone(), source })?;
        self.written.retain(|e| e.path != rel);
        self.written.push(ManifestEntry { path: rel.to_string(), sha256: hex::encode(Sha256::digest(bytes)) });
        Ok(())
    }

    fn write_table(&mut self, rel: &str, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        write_record(&mut w, &header.iter().map(|s| s.to_string()).collect::<Vec<_>>())?;
        for row in rows {
            write_record(&mut w, row)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidData(format!("csv buffer: {e}")))?;
        self.write_bytes(rel, &bytes)
    }

    fn write_lines(&mut self, rel: &str, lines: &[String]) -> Result<()> {
        let mut text = lines.join("\n");
        text.push('\n');
        self.write_bytes(rel, text.as_bytes())
    }

    fn finish(mut self, reproducibility_hash: String) -> Result<Manifest> {
        self.written.sort_by(|a, b| a.path.cmp(&b.path));
        let mut lines = vec![format!("reproducibility_hash {reproducibility_hash}")];
        lines.extend(self.written.iter().map(|e| format!("{}  {}", e.sha256, e.path)));
        let mut text = lines.join("\n");
        text.push('\n');
        let path = self.root.join("manifest.txt");
        fs::write(&path, text).map_err(|source| Error::Io { path, source })?;
        Ok(Manifest { reproducibility_hash, files: self.written })
    }
}

/// SHA-256 over the canonical configuration followed by each input file's bytes.
pub fn reproducibility_hash(cfg: &RunConfig) -> Result<String> {
    let mut h = Sha256::new();
    h.update(cfg.canonical().as_bytes());
    for path in input_paths(cfg) {
        let bytes = fs::read(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        h.update(Sha256::digest(&bytes));
    }
    Ok(hex::encode(h.finalize()))
}

fn input_paths(cfg: &RunConfig) -> [&Path; 4] {
    let i = &cfg.inputs;
    [&i.gdp, &i.potential, &i.price_index, &i.rate]
}

/// Panel and the warnings raised while building it.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub panel: MacroPanel,
    pub warnings: Vec<String>,
}

/// Loads the four raw series and assembles the estimation panel.
pub fn prepare_panel(cfg: &RunConfig) -> Result<Prepared> {
    let inputs = &cfg.inputs;
    let gdp = load_series(&inputs.gdp, Frequency::Quarterly)?;
    let potential = load_series(&inputs.potential, Frequency::Quarterly)?;
    let price = load_series(&inputs.price_index, Frequency::Quarterly)?;
    let rate_raw = load_series(&inputs.rate, inputs.rate_frequency)?;
    let mut warnings = Vec::new();
    let rate = match inputs.rate_frequency {
        Frequency::Monthly => {
            let (q, w) = monthly_to_quarterly(&rate_raw)?;
            warnings.extend(w);
            q
        }
        Frequency::Quarterly => rate_raw,
    };
    let y = build_output_gap(&gdp, &potential)?;
    let (pi, w) = build_inflation(&price)?;
    warnings.extend(w);
    let panel = assemble_panel(&pi, &y, &rate, cfg.window, &cfg.dummies)?;
    Ok(Prepared { panel, warnings })
}

/// Law of motion, scale model and the shock sample the rule uses.
#[derive(Debug, Clone)]
pub struct Estimates {
    pub law: LawOfMotion,
    pub sked: SkedasticModel,
    pub shocks: ShockPanel,
    pub floor_bindings: [usize; 2],
}

pub fn estimate(cfg: &RunConfig, panel: &MacroPanel) -> Result<Estimates> {
    let law = fit_var1(panel, cfg.include_dummies, cfg.dummy_timing)?;
    let sked = fit_skedastic(&law, panel, cfg.skedastic_form, cfg.include_dummies, cfg.restrict_gamma_i, cfg.floor)?;
    let bindings = floor_bindings(&law, &sked, panel)?;
    let shocks = match cfg.rule_case {
        RuleCase::LocationShift => residual_shocks(&law)?,
        _ => standardize_shocks(&law, &sked, panel)?,
    };
    Ok(Estimates { law, sked, shocks, floor_bindings: bindings })
}

pub fn rule_context(cfg: &RunConfig, est: &Estimates) -> Result<RuleContext> {
    let sked = match cfg.rule_case {
        RuleCase::LocationShift => None,
        _ => Some(est.sked.clone()),
    };
    Ok(RuleContext::new(est.law.clone(), sked, est.shocks.clone(), cfg.calibration, cfg.rule_case)?
        .with_grouping(cfg.grouping))
}

/// Everything a run produced, for callers that keep going in memory.
#[derive(Debug, Clone)]
pub struct RunOutputs {
    pub panel: Option<MacroPanel>,
    pub estimates: Option<Estimates>,
    pub implied: Option<ImpliedTauSeries>,
    pub dp: Option<DeviationReport>,
    pub manifest: Manifest,
}

/// Runs every stage up to `through`, writing into `cfg.output_dir`.
pub fn run_pipeline(cfg: &RunConfig, through: Stage) -> std::result::Result<RunOutputs, StageError> {
    let at = |stage: &str| {
        let stage = stage.to_string();
        move |source: Error| StageError { stage: stage.clone(), source }
    };
    cfg.validate().map_err(at("config"))?;
    let hash = reproducibility_hash(cfg).map_err(at("config"))?;
    let mut out = Outputs::create(&cfg.output_dir).map_err(at("config"))?;
    let mut result = RunOutputs {
        panel: None,
        estimates: None,
        implied: None,
        dp: None,
        manifest: Manifest { reproducibility_hash: hash.clone(), files: Vec::new() },
    };
    match run_stages(cfg, through, &mut out, &mut result) {
        Ok(()) => {
            result.manifest = out.finish(hash).map_err(at("manifest"))?;
            Ok(result)
        }
        Err((stage, source)) => {
            let marker = format!("stage: {stage}\nerror: {source}\n");
            let _ = out.write_bytes("FAILED", marker.as_bytes());
            let _ = out.finish(hash);
            Err(StageError { stage: stage.to_string(), source })
        }
    }
}

type StageResult = std::result::Result<(), (Stage, Error)>;

fn run_stages(cfg: &RunConfig, through: Stage, out: &mut Outputs, res: &mut RunOutputs) -> StageResult {
    let tag = |stage: Stage| move |e: Error| (stage, e);
    let mut diagnostics = vec![format!("reproducibility_hash {}", res.manifest.reproducibility_hash)];

    let prepared = prepare_panel(cfg).map_err(tag(Stage::Prepare))?;
    write_prepare(out, &prepared).map_err(tag(Stage::Prepare))?;
    diagnostics.push(format!("panel_rows {}", prepared.panel.len()));
    diagnostics.extend(prepared.warnings.iter().map(|w| format!("warning {w}")));
    let panel = prepared.panel;
    res.panel = Some(panel.clone());
    let finish_diag = |out: &mut Outputs, diagnostics: &[String], stage: Stage| {
        out.write_lines("diagnostics.txt", diagnostics).map_err(tag(stage))
    };
    if through == Stage::Prepare {
        return finish_diag(out, &diagnostics, Stage::Prepare);
    }

    let est = estimate(cfg, &panel).map_err(tag(Stage::Estimate))?;
    write_estimates(out, &est).map_err(tag(Stage::Estimate))?;
    diagnostics.push(format!("var_observations {}", est.law.estimation.as_ref().map_or(0, |e| e.inflation.n_obs)));
    diagnostics.push(format!("skedastic_observations {}", est.sked.fits.as_ref().map_or(0, |f| f.inflation.n_obs)));
    diagnostics
        .push(format!("floor_bindings inflation={} output_gap={}", est.floor_bindings[0], est.floor_bindings[1]));
    res.estimates = Some(est.clone());
    if through == Stage::Estimate {
        return finish_diag(out, &diagnostics, Stage::Estimate);
    }

    let ctx = rule_context(cfg, &est).map_err(tag(Stage::Rule))?;
    write_rule(out, cfg, &ctx, &panel).map_err(tag(Stage::Rule))?;
    if through == Stage::Rule {
        return finish_diag(out, &diagnostics, Stage::Rule);
    }

    let implied = implied_tau_series(&panel, &ctx, &cfg.tau_grid).map_err(tag(Stage::ImpliedTau))?;
    write_implied(out, cfg, &ctx, &panel, &implied).map_err(tag(Stage::ImpliedTau))?;
    diagnostics.push(format!("implied_tau_invalid {}", implied.invalid_count()));
    diagnostics.push(format!("implied_tau_median {}", implied.median_tau().map_or("NA".into(), fmt_num)));
    for row in implied.rows.iter().filter(|r| r.error.is_some()) {
        diagnostics.push(format!("invalid_quarter {} {}", row.quarter, row.error.as_deref().unwrap_or("")));
    }
    res.implied = Some(implied);
    if through == Stage::ImpliedTau {
        return finish_diag(out, &diagnostics, Stage::ImpliedTau);
    }

    let report = validate_dp(out, cfg, &ctx, &panel).map_err(tag(Stage::ValidateDp))?;
    diagnostics.push(format!(
        "qdp_max_deviation {} steps={} mean={} states={}",
        fmt_num(report.max_abs),
        fmt_num(report.max_steps),
        fmt_num(report.mean_abs),
        report.states
    ));
    res.dp = Some(report);
    finish_diag(out, &diagnostics, Stage::ValidateDp)
}

fn n(x: f64) -> String {
    if x.is_nan() {
        "NA".into()
    } else {
        fmt_num(x)
    }
}

fn write_prepare(out: &mut Outputs, prepared: &Prepared) -> Result<()> {
    let mut buf = Vec::new();
    prepared.panel.write_csv(&mut buf)?;
    out.write_bytes("panel.csv", &buf)?;
    let rows = descriptive_stats(&prepared.panel)?
        .into_iter()
        .map(|(name, s)| {
            vec![name.to_string(), n(s.mean), n(s.min), n(s.first_quartile), n(s.median), n(s.third_quartile), n(s.max)]
        })
        .collect::<Vec<_>>();
    out.write_table("descriptive_stats.csv", &["variable", "mean", "min", "q1", "median", "q3", "max"], &rows)
}

/// Two-equation coefficient table: one row per term, then observations and fit.
fn coefficient_table(
    out: &mut Outputs,
    rel: &str,
    labels: [&str; 2],
    fits: [&OlsFit; 2],
    order: &[&str],
) -> Result<()> {
    let header = ["term", labels[0], &format!("{}_se", labels[0]), labels[1], &format!("{}_se", labels[1])]
        .map(|s| s.to_string());
    let mut terms: Vec<&str> = order.iter().copied().filter(|t| fits[0].names.iter().any(|n| n == t)).collect();
    for name in &fits[0].names {
        if !terms.contains(&name.as_str()) {
            terms.push(name);
        }
    }
    let mut rows = Vec::new();
    for term in terms {
        let j = fits[0].names.iter().position(|n| n == term).expect("term present");
        rows.push(vec![
            term.to_string(),
            n(fits[0].coefficients[j]),
            n(fits[0].standard_errors[j]),
            n(fits[1].coefficients[j]),
            n(fits[1].standard_errors[j]),
        ]);
    }
    rows.push(vec![
        "observations".into(),
        fits[0].n_obs.to_string(),
        String::new(),
        fits[1].n_obs.to_string(),
        String::new(),
    ]);
    rows.push(vec!["r_squared".into(), n(fits[0].r_squared), String::new(), n(fits[1].r_squared), String::new()]);
    rows.push(vec![
        "adjusted_r_squared".into(),
        n(fits[0].adjusted_r_squared),
        String::new(),
        n(fits[1].adjusted_r_squared),
        String::new(),
    ]);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_table(rel, &header, &rows)
}

fn write_estimates(out: &mut Outputs, est: &Estimates) -> Result<()> {
    let var = est.law.estimation.as_ref().ok_or_else(|| Error::InvalidData("law of motion not estimated".into()))?;
    coefficient_table(
        out,
        "var_coefficients.csv",
        ["inflation", "output_gap"],
        [&var.inflation, &var.output_gap],
        &["i", "pi", "y", "constant"],
    )?;
    let fits = est.sked.fits.as_ref().ok_or_else(|| Error::InvalidData("scale model not estimated".into()))?;
    coefficient_table(
        out,
        "skedastic_coefficients.csv",
        ["u_pi_sq", "u_y_sq"],
        [&fits.inflation, &fits.output_gap],
        &["i", "pi", "y"],
    )?;
    let rows: Vec<Vec<String>> = est
        .shocks
        .pairs()
        .enumerate()
        .map(|(t, (zp, zy))| {
            let q = est.shocks.quarters.get(t).map(|q| q.to_string()).unwrap_or_default();
            vec![q, n(zp), n(zy)]
        })
        .collect();
    out.write_table("shocks.csv", &["quarter", "z_pi", "z_y"], &rows)
}

fn tau_label(t: f64) -> String {
    format!("i_star_{}", fmt_num(t))
}

fn write_rule(out: &mut Outputs, cfg: &RunConfig, ctx: &RuleContext, panel: &MacroPanel) -> Result<()> {
    let taus = TauGrid::new(cfg.representative_taus.clone()).map_err(|e| Error::Config(e.to_string()))?;
    let mut header = vec!["quarter".to_string(), "pi".into(), "y".into(), "i_prev".into(), "i_observed".into()];
    header.extend(taus.values().iter().map(|&t| tau_label(t)));
    let mut rows = Vec::with_capacity(panel.len());
    for t in 1..panel.len() {
        let mut row =
            vec![panel.quarters[t].to_string(), n(panel.pi[t]), n(panel.y[t]), n(panel.i[t - 1]), n(panel.i[t])];
        match ctx.rule_curve(&taus, panel.pi[t], panel.y[t], panel.i[t - 1]) {
            Ok(curve) => row.extend(curve.into_iter().map(n)),
            Err(_) => row.extend(std::iter::repeat_n("NA".to_string(), taus.len())),
        }
        rows.push(row);
    }
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_table("rule_representative.csv", &header_refs, &rows)?;

    // Rule surface in π at the sample medians of y and i.
    let med = |v: &[f64]| crate::quantile::empirical_quantile(v, 0.5);
    let (y_med, i_med) = (med(&panel.y)?, med(&panel.i)?);
    let (lo, hi) = panel.pi.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let mut rows = Vec::new();
    for pi in crate::qdp::linspace(lo, hi, 25) {
        let curve = ctx.rule_curve(&taus, pi, y_med, i_med);
        for (k, &tau) in taus.values().iter().enumerate() {
            let v = curve.as_ref().map(|c| n(c[k])).unwrap_or_else(|_| "NA".into());
            rows.push(vec![n(tau), n(pi), n(y_med), n(i_med), v]);
        }
    }
    out.write_table("rule_surface.csv", &["tau", "pi", "y", "i_prev", "i_star"], &rows)
}

fn write_implied(
    out: &mut Outputs,
    cfg: &RunConfig,
    ctx: &RuleContext,
    panel: &MacroPanel,
    implied: &ImpliedTauSeries,
) -> Result<()> {
    let grid = implied.grid.values();
    let mut header = vec!["quarter".to_string(), "i_observed".into()];
    header.extend(grid.iter().map(|&t| tau_label(t)));
    header.extend(["tau_hat".to_string(), "fit_error".into()]);
    let rows: Vec<Vec<String>> = implied
        .rows
        .iter()
        .map(|r| {
            let mut row = vec![r.quarter.to_string(), n(r.i_observed)];
            if r.rule.is_empty() {
                row.extend(std::iter::repeat_n("NA".to_string(), grid.len()));
            } else {
                row.extend(r.rule.iter().map(|&v| n(v)));
            }
            row.push(r.tau_hat.map_or("NA".into(), n));
            row.push(n(r.fit_error));
            row
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    out.write_table("implied_tau.csv", &header_refs, &rows)?;

    // Long-format plot data: observed rate, representative rules, implied τ.
    let mut rows = Vec::new();
    for r in &implied.rows {
        rows.push(vec![r.quarter.to_string(), "i_observed".into(), n(r.i_observed)]);
    }
    for t in 1..panel.len() {
        let q = panel.quarters[t].to_string();
        for &tau in &cfg.representative_taus {
            let v =
                ctx.optimal_rate(tau, panel.pi[t], panel.y[t], panel.i[t - 1]).map(n).unwrap_or_else(|_| "NA".into());
            rows.push(vec![q.clone(), tau_label(tau), v]);
        }
    }
    for r in &implied.rows {
        rows.push(vec![r.quarter.to_string(), "tau_hat".into(), r.tau_hat.map_or("NA".into(), n)]);
    }
    out.write_table("plot_data.csv", &["quarter", "series", "value"], &rows)
}

/// Oracle grids spanning the panel's observed π and y.
pub fn qdp_problem(cfg: &RunConfig, ctx: &RuleContext, panel: &MacroPanel) -> Result<QdpProblem> {
    let range = |v: &[f64]| v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let (pi_grid, y_grid, i_grid) = cfg.qdp.grid.grids(range(&panel.pi), range(&panel.y));
    QdpProblem::from_context(ctx, pi_grid, y_grid, i_grid, cfg.qdp.tau)
}

fn validate_dp(out: &mut Outputs, cfg: &RunConfig, ctx: &RuleContext, panel: &MacroPanel) -> Result<DeviationReport> {
    if ctx.case == RuleCase::General {
        return Err(Error::CaseMismatch("oracle comparison needs a closed-form rule case".into()));
    }
    let problem = qdp_problem(cfg, ctx, panel)?;
    let opts = IterationOptions { tol: cfg.qdp.tol, max_iter: cfg.qdp.max_iter, stopping: cfg.qdp.stopping };
    let vf = solve_value_iteration_with(&problem, opts)?;
    let rows: Vec<Vec<String>> = vf.changes.iter().enumerate().map(|(k, &c)| vec![(k + 1).to_string(), n(c)]).collect();
    out.write_table("qdp_convergence.csv", &["iteration", "sup_norm_change"], &rows)?;
    let m = problem.i_grid.len() / 2;
    let mut buf = Vec::new();
    vf.write_slice(&problem, m, &mut buf)?;
    out.write_bytes("qdp_value_slice.csv", &buf)?;
    let report = compare_policy_to_closed_form(&vf, &problem, ctx, cfg.qdp.margin)?;
    let rows = vec![
        vec!["max_abs_deviation".into(), n(report.max_abs)],
        vec!["max_deviation_steps".into(), n(report.max_steps)],
        vec!["mean_abs_deviation".into(), n(report.mean_abs)],
        vec!["interior_states".into(), report.states.to_string()],
        vec!["worst_pi".into(), n(report.worst_state.0)],
        vec!["worst_y".into(), n(report.worst_state.1)],
        vec!["worst_i_prev".into(), n(report.worst_state.2)],
        vec!["iterations".into(), vf.iterations.to_string()],
    ];
    out.write_table("qdp_comparison.csv", &["statistic", "value"], &rows)?;
    Ok(report)
}

/// One robustness variant of a base configuration.
#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub config: RunConfig,
}

/// λ ∈ {0.5, 1, 2} on the configured sample and the post-1979Q4 subsample.
pub fn robustness_presets(base: &RunConfig) -> Result<Vec<Preset>> {
    let mut presets = Vec::new();
    for lambda in [0.5, 1.0, 2.0] {
        let mut cfg = base.clone();
        let c = base.calibration;
        cfg.calibration = Calibration::new(c.beta, lambda, c.delta, c.pi_star)?;
        let name = format!("lambda_{}", fmt_num(lambda));
        cfg.output_dir = base.output_dir.join(&name);
        presets.push(Preset { name, config: cfg });
    }
    let mut post = base.clone();
    post.window = (crate::Quarter::new(1979, 4)?, base.window.1);
    post.output_dir = base.output_dir.join("post_1979q4");
    presets.push(Preset { name: "post_1979q4".into(), config: post });
    Ok(presets)
}

/// Summary of one preset run.
#[derive(Debug, Clone)]
pub struct PresetSummary {
    pub name: String,
    pub var_observations: usize,
    pub skedastic_observations: usize,
    pub median_tau: Option<f64>,
    /// `∂i*/∂π` at τ = 0.5 and the sample medians, by central difference.
    pub inflation_response: f64,
}

/// Runs every preset through implied τ, each in its own subdirectory, and
/// writes `robustness_summary.csv` plus a manifest at the top level.
pub fn run_robustness(base: &RunConfig) -> std::result::Result<Vec<PresetSummary>, StageError> {
    let presets = robustness_presets(base).map_err(|source| StageError { stage: "robustness".into(), source })?;
    let mut summaries = Vec::new();
    for preset in &presets {
        let res = run_pipeline(&preset.config, Stage::ImpliedTau)
            .map_err(|e| StageError { stage: format!("robustness/{}/{}", preset.name, e.stage), source: e.source })?;
        let panel = res.panel.expect("panel after implied-tau");
        let est = res.estimates.expect("estimates after implied-tau");
        let ctx =
            rule_context(&preset.config, &est).map_err(|source| StageError { stage: preset.name.clone(), source })?;
        let med = |v: &[f64]| crate::quantile::empirical_quantile(v, 0.5).unwrap_or(0.0);
        let (pi0, y0, i0) = (med(&panel.pi), med(&panel.y), med(&panel.i));
        let h = 1e-3;
        let response = ctx
            .optimal_rate(0.5, pi0 + h, y0, i0)
            .and_then(|a| ctx.optimal_rate(0.5, pi0 - h, y0, i0).map(|b| (a - b) / (2.0 * h)))
            .unwrap_or(f64::NAN);
        summaries.push(PresetSummary {
            name: preset.name.clone(),
            var_observations: est.law.estimation.as_ref().map_or(0, |e| e.inflation.n_obs),
            skedastic_observations: est.sked.fits.as_ref().map_or(0, |f| f.inflation.n_obs),
            median_tau: res.implied.and_then(|s| s.median_tau()),
            inflation_response: response,
        });
    }
    let tag = |source| StageError { stage: "robustness".into(), source };
    let hash = reproducibility_hash(base).map_err(tag)?;
    let mut out = Outputs::create(&base.output_dir).map_err(tag)?;
    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            vec![
                s.name.clone(),
                s.var_observations.to_string(),
                s.skedastic_observations.to_string(),
                s.median_tau.map_or("NA".into(), n),
                n(s.inflation_response),
            ]
        })
        .collect();
    out.write_table(
        "robustness_summary.csv",
        &["preset", "var_observations", "skedastic_observations", "median_tau_hat", "inflation_response"],
        &rows,
    )
    .map_err(tag)?;
    for preset in &presets {
        let sub = fs::read_to_string(preset.config.output_dir.join("manifest.txt"))
            .map_err(|source| tag(Error::Io { path: preset.config.output_dir.join("manifest.txt"), source }))?;
        out.write_bytes(&format!("{}/manifest.txt", preset.name), sub.as_bytes()).map_err(tag)?;
        for line in sub.lines().skip(1) {
            if let Some((sha, path)) = line.split_once("  ") {
                out.written.push(ManifestEntry { path: format!("{}/{}", preset.name, path), sha256: sha.to_string() });
            }
        }
    }
    out.finish(hash).map_err(tag)?;
    Ok(summaries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stages_are_ordered() {
        assert!(Stage::Prepare < Stage::Estimate && Stage::Rule < Stage::ValidateDp);
        assert_eq!(Stage::ImpliedTau.to_string(), "implied-tau");
    }

    #[test]
    fn manifest_lists_files_sorted() {
        let dir = std::env::temp_dir().join(format!("qutaylor-manifest-{}", std::process::id()));
        let mut out = Outputs::create(&dir).unwrap();
        out.write_lines("b.txt", &["x".into()]).unwrap();
        out.write_lines("a.txt", &["y".into()]).unwrap();
        out.write_lines("b.txt", &["z".into()]).unwrap();
        let m = out.finish("h".into()).unwrap();
        assert_eq!(m.files.iter().map(|e| e.path.as_str()).collect::<Vec<_>>(), ["a.txt", "b.txt"]);
        assert_eq!(m.files[1].sha256, hex::encode(Sha256::digest(b"z\n")));
        let text = fs::read_to_string(dir.join("manifest.txt")).unwrap();
        assert!(text.starts_with("reproducibility_hash h\n"));
        fs::remove_dir_all(dir).unwrap();
    }
}
