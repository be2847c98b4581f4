//! Run configuration as plain `key = value` text.
//!
//! Blank lines and lines starting with `#` are ignored. Relative paths are
//! resolved against the directory holding the configuration file. Keys:
//!
//! | key | default | meaning |
//! |---|---|---|
//! | `gdp`, `potential`, `price_index`, `rate` | required | input files (`DATE,VALUE`) |
//! | `rate_frequency` | `monthly` | frequency of the rate file |
//! | `window` | `1954Q4:2025Q2` | inclusive sample window |
//! | `dummy` | none | `NAME:START:END`, repeatable; `gfc` and `covid` expand to the standard spans |
//! | `include_dummies` | `false` | add the dummy columns to the regressions |
//! | `dummy_timing` | `dependent` | `dependent` (dated with `t+1`) or `regressor` (dated with `t`) |
//! | `beta`, `lambda`, `delta`, `pi_star` | `0.99`, `1`, `0.1`, `0.496` | calibration |
//! | `skedastic_form` | `linear_sqrt` | `linear_sqrt` or `exp_sqrt` |
//! | `restrict_gamma_i` | `true` | drop the rate from the scale regressions |
//! | `floor` | `1e-8` | lower bound on the linear scale index |
//! | `rule_case` | `location_scale_states` | `location_shift`, `location_scale_states` or `general` |
//! | `grouping` | `rederived` | `rederived` or `printed` |
//! | `tau_grid` | `percent` | `percent` (0.01..0.99), `uniform:N`, or a comma list |
//! | `representative_taus` | `0.1,0.25,0.5,0.75,0.9` | τ values for the rule table |
//! | `qdp_pi_points`, `qdp_y_points`, `qdp_i_points` | `41`, `41`, `81` | oracle grid sizes |
//! | `qdp_padding` | `1` | margin beyond the observed π and y range |
//! | `qdp_i_min`, `qdp_i_max` | `0`, `20` | oracle rate grid |
//! | `qdp_tau` | `0.5` | oracle quantile index |
//! | `qdp_tol`, `qdp_max_iter` | `1e-6`, `5000` | value-iteration stopping |
//! | `qdp_stopping` | `bounds` | `bounds` (McQueen–Porteus) or `sup_norm` |
//! | `qdp_margin` | `2` | edge cells excluded from the comparison |
//! | `output_dir` | `output` | where results are written |

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::ingest::{DummySpec, Frequency, Quarter};
use crate::qdp::{GridSpec, Stopping};
use crate::quantile::TauGrid;
use crate::regress::DummyTiming;
use crate::rule::{Calibration, Grouping, RuleCase};
use crate::skedastic::{SkedasticForm, DEFAULT_FLOOR};

#[derive(Debug, Clone, PartialEq)]
pub struct InputPaths {
    pub gdp: PathBuf,
    pub potential: PathBuf,
    pub price_index: PathBuf,
    pub rate: PathBuf,
    pub rate_frequency: Frequency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QdpSettings {
    pub grid: GridSpec,
    pub tau: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub stopping: Stopping,
    pub margin: usize,
}

impl Default for QdpSettings {
    fn default() -> Self {
        Self {
            grid: GridSpec::default(),
            tau: 0.5,
            tol: 1e-6,
            max_iter: 5_000,
            stopping: Stopping::McQueenPorteus,
            margin: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: InputPaths,
    pub window: (Quarter, Quarter),
    pub dummies: Vec<DummySpec>,
    pub include_dummies: bool,
    pub dummy_timing: DummyTiming,
    pub calibration: Calibration,
    pub skedastic_form: SkedasticForm,
    pub restrict_gamma_i: bool,
    pub floor: f64,
    pub rule_case: RuleCase,
    pub grouping: Grouping,
    pub tau_grid: TauGrid,
    pub representative_taus: Vec<f64>,
    pub qdp: QdpSettings,
    pub output_dir: PathBuf,
}

pub const DEFAULT_WINDOW: (Quarter, Quarter) = (Quarter { year: 1954, quarter: 4 }, Quarter { year: 2025, quarter: 2 });

impl RunConfig {
    /// Defaults around the given input files.
    pub fn with_inputs(inputs: InputPaths) -> Self {
        Self {
            inputs,
            window: DEFAULT_WINDOW,
            dummies: Vec::new(),
            include_dummies: false,
            dummy_timing: DummyTiming::default(),
            calibration: Calibration::default(),
            skedastic_form: SkedasticForm::default(),
            restrict_gamma_i: true,
            floor: DEFAULT_FLOOR,
            rule_case: RuleCase::default(),
            grouping: Grouping::default(),
            tau_grid: TauGrid::percent(),
            representative_taus: vec![0.1, 0.25, 0.5, 0.75, 0.9],
            qdp: QdpSettings::default(),
            output_dir: PathBuf::from("output"),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let mut paths: [Option<PathBuf>; 4] = Default::default();
        let mut rate_frequency = Frequency::Monthly;
        let mut entries = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value", lineno + 1)))?;
            let (key, value) = (key.trim(), value.trim());
            let slot = match key {
                "gdp" => Some(0),
                "potential" => Some(1),
                "price_index" => Some(2),
                "rate" => Some(3),
                _ => None,
            };
            match slot {
                Some(k) => paths[k] = Some(resolve(base_dir, value)?),
                None if key == "rate_frequency" => {
                    rate_frequency = match value {
                        "monthly" => Frequency::Monthly,
                        "quarterly" => Frequency::Quarterly,
                        other => return Err(Error::Config(format!("rate_frequency: unknown value {other:?}"))),
                    }
                }
                None => entries.push((lineno + 1, key.to_string(), value.to_string())),
            }
        }
        let names = ["gdp", "potential", "price_index", "rate"];
        let mut it = paths
            .into_iter()
            .zip(names)
            .map(|(p, n)| p.ok_or_else(|| Error::Config(format!("missing required key {n}"))));
        let inputs = InputPaths {
            gdp: it.next().unwrap()?,
            potential: it.next().unwrap()?,
            price_index: it.next().unwrap()?,
            rate: it.next().unwrap()?,
            rate_frequency,
        };
        let mut cfg = Self::with_inputs(inputs);
        let mut calib = cfg.calibration;
        for (lineno, key, value) in entries {
            let ctx = |e: Error| Error::Config(format!("line {lineno} ({key}): {}", strip_config_prefix(e)));
            match key.as_str() {
                "window" => cfg.window = parse_window(&value).map_err(ctx)?,
                "dummy" => cfg.dummies.push(parse_dummy(&value).map_err(ctx)?),
                "include_dummies" => cfg.include_dummies = parse_bool(&value).map_err(ctx)?,
                "dummy_timing" => {
                    cfg.dummy_timing = match value.as_str() {
                        "dependent" => DummyTiming::Dependent,
                        "regressor" => DummyTiming::Regressor,
                        other => return Err(ctx(Error::Config(format!("unknown value {other:?}")))),
                    }
                }
                "beta" => calib.beta = parse_num(&value).map_err(ctx)?,
                "lambda" => calib.lambda = parse_num(&value).map_err(ctx)?,
                "delta" => calib.delta = parse_num(&value).map_err(ctx)?,
                "pi_star" => calib.pi_star = parse_num(&value).map_err(ctx)?,
                "skedastic_form" => cfg.skedastic_form = SkedasticForm::from_str(&value).map_err(ctx)?,
                "restrict_gamma_i" => cfg.restrict_gamma_i = parse_bool(&value).map_err(ctx)?,
                "floor" => cfg.floor = parse_num(&value).map_err(ctx)?,
                "rule_case" => cfg.rule_case = RuleCase::from_str(&value).map_err(ctx)?,
                "grouping" => cfg.grouping = Grouping::from_str(&value).map_err(ctx)?,
                "tau_grid" => cfg.tau_grid = parse_tau_grid(&value).map_err(ctx)?,
                "representative_taus" => cfg.representative_taus = parse_list(&value).map_err(ctx)?,
                "qdp_pi_points" => cfg.qdp.grid.pi_points = parse_num(&value).map_err(ctx)?,
                "qdp_y_points" => cfg.qdp.grid.y_points = parse_num(&value).map_err(ctx)?,
                "qdp_i_points" => cfg.qdp.grid.i_points = parse_num(&value).map_err(ctx)?,
                "qdp_padding" => cfg.qdp.grid.padding = parse_num(&value).map_err(ctx)?,
                "qdp_i_min" => cfg.qdp.grid.i_min = parse_num(&value).map_err(ctx)?,
                "qdp_i_max" => cfg.qdp.grid.i_max = parse_num(&value).map_err(ctx)?,
                "qdp_tau" => cfg.qdp.tau = parse_num(&value).map_err(ctx)?,
                "qdp_tol" => cfg.qdp.tol = parse_num(&value).map_err(ctx)?,
                "qdp_max_iter" => cfg.qdp.max_iter = parse_num(&value).map_err(ctx)?,
                "qdp_stopping" => {
                    cfg.qdp.stopping = match value.as_str() {
                        "bounds" => Stopping::McQueenPorteus,
                        "sup_norm" => Stopping::SupNorm,
                        other => return Err(ctx(Error::Config(format!("unknown value {other:?}")))),
                    }
                }
                "qdp_margin" => cfg.qdp.margin = parse_num(&value).map_err(ctx)?,
                "output_dir" => cfg.output_dir = resolve(base_dir, &value)?,
                _ => return Err(Error::Config(format!("line {lineno}: unknown key {key:?}"))),
            }
        }
        cfg.calibration = Calibration::new(calib.beta, calib.lambda, calib.delta, calib.pi_star)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window.0 > self.window.1 {
            return Err(Error::Config(format!("window start {} after end {}", self.window.0, self.window.1)));
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return Err(Error::Config(format!("floor must be positive, got {}", self.floor)));
        }
        for &t in &self.representative_taus {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::Config(format!("representative tau {t} outside (0, 1)")));
            }
        }
        if !(self.qdp.tau > 0.0 && self.qdp.tau < 1.0) {
            return Err(Error::Config(format!("qdp_tau {} outside (0, 1)", self.qdp.tau)));
        }
        if self.rule_case == RuleCase::LocationScaleStates && !self.restrict_gamma_i {
            return Err(Error::Config("rule_case location_scale_states needs restrict_gamma_i = true".into()));
        }
        let mut names: Vec<&str> = self.dummies.iter().map(|d| d.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("duplicate dummy names".into()));
        }
        Ok(())
    }

    /// Canonical text of every setting, used for the reproducibility hash.
    pub fn canonical(&self) -> String {
        let c = &self.calibration;
        let q = &self.qdp;
        let dummies: Vec<String> = self.dummies.iter().map(|d| format!("{}:{}:{}", d.name, d.start, d.end)).collect();
        let taus: Vec<String> = self.tau_grid.values().iter().map(|&t| crate::fmt_num(t)).collect();
        let reps: Vec<String> = self.representative_taus.iter().map(|&t| crate::fmt_num(t)).collect();
        format!(
            "window={}:{}\ndummies={}\ninclude_dummies={}\ndummy_timing={:?}\nbeta={}\nlambda={}\ndelta={}\npi_star={}\n\
             skedastic_form={:?}\nrestrict_gamma_i={}\nfloor={}\nrule_case={:?}\ngrouping={:?}\ntau_grid={}\n\
             representative_taus={}\nqdp={:?}\nrate_frequency={:?}\n",
            self.window.0,
            self.window.1,
            dummies.join(","),
            self.include_dummies,
            self.dummy_timing,
            crate::fmt_num(c.beta),
            crate::fmt_num(c.lambda),
            crate::fmt_num(c.delta),
            crate::fmt_num(c.pi_star),
            self.skedastic_form,
            self.restrict_gamma_i,
            crate::fmt_num(self.floor),
            self.rule_case,
            self.grouping,
            taus.join(","),
            reps.join(","),
            q,
            self.inputs.rate_frequency,
        )
    }
}

fn strip_config_prefix(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

fn resolve(base: &Path, value: &str) -> Result<PathBuf> {
    if value.is_empty() {
        return Err(Error::Config("empty path".into()));
    }
    let p = PathBuf::from(value);
    Ok(if p.is_absolute() { p } else { base.join(p) })
}

fn parse_num<T: FromStr>(value: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config(format!("cannot parse {value:?}")))
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        other => Err(Error::Config(format!("expected true or false, got {other:?}"))),
    }
}

fn parse_list(value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|s| parse_num(s.trim())).collect()
}

pub fn parse_window(value: &str) -> Result<(Quarter, Quarter)> {
    let (a, b) = value.split_once(':').ok_or_else(|| Error::Config(format!("window {value:?}: expected START:END")))?;
    let start: Quarter = a.trim().parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let end: Quarter = b.trim().parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    if start > end {
        return Err(Error::Config(format!("window start {start} after end {end}")));
    }
    Ok((start, end))
}

pub fn parse_dummy(value: &str) -> Result<DummySpec> {
    match value.to_ascii_lowercase().as_str() {
        "gfc" => return Ok(DummySpec::gfc()),
        "covid" => return Ok(DummySpec::covid()),
        _ => {}
    }
    let parts: Vec<&str> = value.split(':').map(str::trim).collect();
    if parts.len() != 3 || parts[0].is_empty() {
        return Err(Error::Config(format!("dummy {value:?}: expected NAME:START:END")));
    }
    let start: Quarter = parts[1].parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let end: Quarter = parts[2].parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    DummySpec::new(parts[0], start, end)
}

pub fn parse_tau_grid(value: &str) -> Result<TauGrid> {
    if value == "percent" {
        return Ok(TauGrid::percent());
    }
    if let Some(n) = value.strip_prefix("uniform:") {
        return TauGrid::uniform(parse_num(n.trim())?).map_err(|e| Error::Config(e.to_string()));
    }
    TauGrid::new(parse_list(value)?).map_err(|e| Error::Config(e.to_string()))
}
