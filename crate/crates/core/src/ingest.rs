//! Raw series loading, frequency conversion, variable construction and the
//! quarterly estimation panel.
//!
//! Input files are two-column delimited text with a header row (`DATE,VALUE`
//! or any pair of column names). Dates are ISO `YYYY-MM-DD`; a quarterly
//! observation is stamped with the first month of its quarter.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::quantile::empirical_quantile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Quarter {
    pub year: i32,
    pub quarter: u8,
}

impl Quarter {
    pub fn new(year: i32, quarter: u8) -> Result<Self> {
        if !(1..=4).contains(&quarter) {
            return Err(Error::Parse {
                context: format!("quarter {year}Q{quarter}"),
                message: "quarter must be in 1..=4".into(),
            });
        }
        Ok(Self { year, quarter })
    }

    pub fn succ(self) -> Self {
        if self.quarter == 4 {
            Self { year: self.year + 1, quarter: 1 }
        } else {
            Self { year: self.year, quarter: self.quarter + 1 }
        }
    }

    pub fn pred(self) -> Self {
        if self.quarter == 1 {
            Self { year: self.year - 1, quarter: 4 }
        } else {
            Self { year: self.year, quarter: self.quarter - 1 }
        }
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 4 + (self.quarter as i64 - 1)
    }

    /// Number of quarters from `self` to `end`, both inclusive; zero when `end < self`.
    pub fn count_through(self, end: Quarter) -> usize {
        (end.ordinal() - self.ordinal() + 1).max(0) as usize
    }

    /// Inclusive iterator `self ..= end`.
    pub fn through(self, end: Quarter) -> impl Iterator<Item = Quarter> {
        std::iter::successors(Some(self), move |q| Some(q.succ())).take(self.count_through(end))
    }

    pub fn first_month(self) -> Month {
        Month { year: self.year, month: (self.quarter - 1) * 3 + 1 }
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}Q{}", self.year, self.quarter)
    }
}

impl FromStr for Quarter {
    type Err = Error;

    /// Accepts `1954Q4` or an ISO date inside the quarter.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((y, q)) = s.split_once(['Q', 'q']) {
            let bad = || Error::Parse { context: format!("quarter '{s}'"), message: "expected YYYYQn".into() };
            let year = y.parse().map_err(|_| bad())?;
            let quarter = q.parse().map_err(|_| bad())?;
            return Quarter::new(year, quarter);
        }
        Ok(s.parse::<Month>()?.quarter())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Month {
    pub year: i32,
    pub month: u8,
}

impl Month {
    pub fn quarter(self) -> Quarter {
        Quarter { year: self.year, quarter: (self.month - 1) / 3 + 1 }
    }
}

impl fmt::Display for Month {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-{:02}-01", self.year, self.month)
    }
}

impl FromStr for Month {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |message: &str| Error::Parse { context: format!("date '{s}'"), message: message.into() };
        let mut parts = s.trim().splitn(3, '-');
        let year: i32 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(|| bad("expected YYYY-MM-DD"))?;
        let month: u8 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(|| bad("expected YYYY-MM-DD"))?;
        let day: u8 = parts.next().and_then(|p| p.parse().ok()).ok_or_else(|| bad("expected YYYY-MM-DD"))?;
        if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
            return Err(bad("month or day out of range"));
        }
        Ok(Month { year, month })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Frequency {
    Monthly,
    Quarterly,
}

/// An observed series. Quarterly observations are stored under the first
/// month of their quarter.
#[derive(Debug, Clone, PartialEq)]
pub struct RawSeries {
    pub label: String,
    pub frequency: Frequency,
    pub dates: Vec<Month>,
    pub values: Vec<f64>,
}

impl RawSeries {
    pub fn new(label: impl Into<String>, frequency: Frequency, dates: Vec<Month>, values: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if dates.len() != values.len() {
            return Err(Error::InvalidData(format!("{label}: {} dates but {} values", dates.len(), values.len())));
        }
        let key = |m: Month| match frequency {
            Frequency::Monthly => m,
            Frequency::Quarterly => m.quarter().first_month(),
        };
        for w in dates.windows(2) {
            if key(w[0]) >= key(w[1]) {
                return Err(Error::NonMonotoneDates { label, previous: w[0].to_string(), next: w[1].to_string() });
            }
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::MissingValue { label, date: dates[pos].to_string() });
        }
        let dates = dates.into_iter().map(key).collect();
        Ok(Self { label, frequency, dates, values })
    }

    /// Convenience constructor for a quarterly series starting at `start`.
    pub fn quarterly(label: impl Into<String>, start: Quarter, values: Vec<f64>) -> Self {
        let dates = std::iter::successors(Some(start), |q| Some(q.succ()))
            .take(values.len())
            .map(Quarter::first_month)
            .collect();
        Self::new(label, Frequency::Quarterly, dates, values).expect("contiguous quarters are increasing")
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn quarters(&self) -> impl Iterator<Item = Quarter> + '_ {
        self.dates.iter().map(|m| m.quarter())
    }

    fn by_quarter(&self) -> BTreeMap<Quarter, f64> {
        self.quarters().zip(self.values.iter().copied()).collect()
    }

    fn require(&self, frequency: Frequency) -> Result<()> {
        if self.frequency != frequency {
            return Err(Error::InvalidData(format!(
                "{}: expected {frequency:?} series, found {:?}",
                self.label, self.frequency
            )));
        }
        Ok(())
    }
}

/// Reads a two-column delimited file with a header row.
pub fn load_series(path: &Path, frequency: Frequency) -> Result<RawSeries> {
    let label =
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string());
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_series(&text, &label, frequency)
}

/// Parses the contents of a series file; `label` names the series in errors.
pub fn parse_series(text: &str, label: &str, frequency: Frequency) -> Result<RawSeries> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| Error::Parse { context: format!("{label} row {}", row + 2), message: e.to_string() })?;
        if record.len() < 2 {
            return Err(Error::Parse {
                context: format!("{label} row {}", row + 2),
                message: "expected two columns (date, value)".into(),
            });
        }
        let date: Month = record[0].parse()?;
        let raw = &record[1];
        // FRED exports mark gaps with '.'.
        if raw.is_empty() || raw == "." || raw.eq_ignore_ascii_case("nan") || raw.eq_ignore_ascii_case("na") {
            return Err(Error::MissingValue { label: label.to_string(), date: date.to_string() });
        }
        let value: f64 = raw.parse().map_err(|_| Error::Parse {
            context: format!("{label} row {}", row + 2),
            message: format!("'{raw}' is not a number"),
        })?;
        dates.push(date);
        values.push(value);
    }
    if dates.is_empty() {
        return Err(Error::NoObservations(label.to_string()));
    }
    RawSeries::new(label, frequency, dates, values)
}

/// Averages complete quarters of a monthly series. Incomplete quarters at the
/// start or end are dropped with a warning; a gap inside the span is an error.
pub fn monthly_to_quarterly(series: &RawSeries) -> Result<(RawSeries, Vec<String>)> {
    series.require(Frequency::Monthly)?;
    let mut groups: Vec<(Quarter, Vec<f64>)> = Vec::new();
    for (date, &value) in series.dates.iter().zip(&series.values) {
        match groups.last_mut() {
            Some((q, vals)) if *q == date.quarter() => vals.push(value),
            _ => groups.push((date.quarter(), vec![value])),
        }
    }
    let mut warnings = Vec::new();
    let last = groups.len().saturating_sub(1);
    let mut quarters = Vec::new();
    let mut values = Vec::new();
    for (idx, (q, vals)) in groups.iter().enumerate() {
        if vals.len() == 3 {
            quarters.push(*q);
            values.push(vals.iter().sum::<f64>() / 3.0);
        } else if idx == 0 || idx == last {
            warnings.push(format!("{}: dropped incomplete quarter {q} ({} of 3 months)", series.label, vals.len()));
        } else {
            return Err(Error::MissingValue {
                label: series.label.clone(),
                date: format!("{q} ({} of 3 months present)", vals.len()),
            });
        }
    }
    for w in quarters.windows(2) {
        if w[0].succ() != w[1] {
            return Err(Error::MissingValue { label: series.label.clone(), date: w[0].succ().to_string() });
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    let dates = quarters.iter().map(|q| q.first_month()).collect();
    Ok((RawSeries::new(series.label.clone(), Frequency::Quarterly, dates, values)?, warnings))
}

/// Percent output gap `(gdp / potential − 1)·100` on the quarters both series cover.
pub fn build_output_gap(gdp: &RawSeries, potential: &RawSeries) -> Result<RawSeries> {
    gdp.require(Frequency::Quarterly)?;
    potential.require(Frequency::Quarterly)?;
    let pot = potential.by_quarter();
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for (q, &g) in gdp.quarters().zip(&gdp.values) {
        if let Some(&p) = pot.get(&q) {
            if p <= 0.0 {
                return Err(Error::InvalidData(format!(
                    "{}: nonpositive potential output {p} at {q}",
                    potential.label
                )));
            }
            dates.push(q.first_month());
            values.push((g / p - 1.0) * 100.0);
        }
    }
    if dates.is_empty() {
        return Err(Error::InvalidData(format!("{} and {} do not overlap", gdp.label, potential.label)));
    }
    RawSeries::new("output_gap", Frequency::Quarterly, dates, values)
}

/// Quarterly inflation `100·Δ ln P`. The first quarter is consumed by the difference.
pub fn build_inflation(price_index: &RawSeries) -> Result<(RawSeries, Vec<String>)> {
    price_index.require(Frequency::Quarterly)?;
    if let Some(pos) = price_index.values.iter().position(|&p| p <= 0.0) {
        return Err(Error::InvalidData(format!(
            "{}: nonpositive price level at {}",
            price_index.label,
            price_index.dates[pos].quarter()
        )));
    }
    let mut warnings = Vec::new();
    if price_index.len() < 2 {
        warnings.push(format!("{}: a single observation yields no inflation values", price_index.label));
    }
    let quarters: Vec<Quarter> = price_index.quarters().collect();
    let mut dates = Vec::new();
    let mut values = Vec::new();
    for idx in 1..price_index.len() {
        if quarters[idx - 1].succ() != quarters[idx] {
            return Err(Error::MissingValue {
                label: price_index.label.clone(),
                date: quarters[idx - 1].succ().to_string(),
            });
        }
        dates.push(quarters[idx].first_month());
        values.push(100.0 * (price_index.values[idx].ln() - price_index.values[idx - 1].ln()));
    }
    Ok((RawSeries::new("inflation", Frequency::Quarterly, dates, values)?, warnings))
}

/// Inclusive quarter range marking an indicator column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DummySpec {
    pub name: String,
    pub start: Quarter,
    pub end: Quarter,
}

impl DummySpec {
    pub fn new(name: impl Into<String>, start: Quarter, end: Quarter) -> Result<Self> {
        let name = name.into();
        if start > end {
            return Err(Error::Config(format!("dummy {name}: start {start} after end {end}")));
        }
        Ok(Self { name, start, end })
    }

    pub fn covers(&self, q: Quarter) -> bool {
        self.start <= q && q <= self.end
    }

    pub fn gfc() -> Self {
        Self::new("GFC", Quarter { year: 2007, quarter: 4 }, Quarter { year: 2009, quarter: 4 }).unwrap()
    }

    pub fn covid() -> Self {
        Self::new("COVID", Quarter { year: 2020, quarter: 1 }, Quarter { year: 2021, quarter: 1 }).unwrap()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DummyColumn {
    pub name: String,
    pub values: Vec<f64>,
}

/// Aligned quarterly panel: inflation, output gap, policy rate and indicator columns.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroPanel {
    pub quarters: Vec<Quarter>,
    pub pi: Vec<f64>,
    pub y: Vec<f64>,
    pub i: Vec<f64>,
    pub dummies: Vec<DummyColumn>,
}

impl MacroPanel {
    /// Builds a panel from columns, checking the invariants.
    pub fn new(first: Quarter, pi: Vec<f64>, y: Vec<f64>, i: Vec<f64>, dummies: Vec<DummyColumn>) -> Result<Self> {
        let n = pi.len();
        if n < 2 {
            return Err(Error::InvalidData(format!("panel needs at least 2 rows, got {n}")));
        }
        if y.len() != n || i.len() != n || dummies.iter().any(|d| d.values.len() != n) {
            return Err(Error::InvalidData("panel columns differ in length".into()));
        }
        for d in &dummies {
            if d.values.iter().any(|&v| v != 0.0 && v != 1.0) {
                return Err(Error::InvalidData(format!("dummy {} has values outside {{0, 1}}", d.name)));
            }
        }
        if pi.iter().chain(&y).chain(&i).any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("panel contains non-finite values".into()));
        }
        let quarters = std::iter::successors(Some(first), |q| Some(q.succ())).take(n).collect();
        Ok(Self { quarters, pi, y, i, dummies })
    }

    pub fn len(&self) -> usize {
        self.quarters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quarters.is_empty()
    }

    pub fn dummy_names(&self) -> Vec<String> {
        self.dummies.iter().map(|d| d.name.clone()).collect()
    }

    /// Dummy values at row `t`, in column order.
    pub fn dummies_at(&self, t: usize) -> Vec<f64> {
        self.dummies.iter().map(|d| d.values[t]).collect()
    }

    /// Restricts the panel to the inclusive window.
    pub fn window(&self, start: Quarter, end: Quarter) -> Result<Self> {
        let lo = self.quarters.iter().position(|&q| q == start);
        let hi = self.quarters.iter().position(|&q| q == end);
        let (Some(lo), Some(hi)) = (lo, hi) else {
            return Err(Error::Coverage {
                label: "panel".into(),
                missing: start.through(end).filter(|q| !self.quarters.contains(q)).collect(),
            });
        };
        MacroPanel::new(
            start,
            self.pi[lo..=hi].to_vec(),
            self.y[lo..=hi].to_vec(),
            self.i[lo..=hi].to_vec(),
            self.dummies
                .iter()
                .map(|d| DummyColumn { name: d.name.clone(), values: d.values[lo..=hi].to_vec() })
                .collect(),
        )
    }

    /// Writes `quarter,pi,y,i,<dummies...>`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["quarter".to_string(), "pi".into(), "y".into(), "i".into()];
        header.extend(self.dummy_names());
        write_record(&mut w, &header)?;
        for t in 0..self.len() {
            let mut row = vec![
                self.quarters[t].to_string(),
                crate::fmt_num(self.pi[t]),
                crate::fmt_num(self.y[t]),
                crate::fmt_num(self.i[t]),
            ];
            row.extend(self.dummies.iter().map(|d| crate::fmt_num(d.values[t])));
            write_record(&mut w, &row)?;
        }
        w.flush().map_err(csv_io)?;
        Ok(())
    }

    /// Reads the format produced by [`MacroPanel::write_csv`].
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| Error::Parse { context: "panel header".into(), message: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        if header.len() < 4 || header[..4] != ["quarter", "pi", "y", "i"] {
            return Err(Error::Parse { context: "panel header".into(), message: "expected quarter,pi,y,i,...".into() });
        }
        let mut quarters = Vec::new();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len() - 1];
        for (row, rec) in reader.records().enumerate() {
            let rec =
                rec.map_err(|e| Error::Parse { context: format!("panel row {}", row + 2), message: e.to_string() })?;
            quarters.push(rec[0].parse::<Quarter>()?);
            for (c, col) in cols.iter_mut().enumerate() {
                let raw = rec.get(c + 1).unwrap_or("");
                col.push(raw.parse().map_err(|_| Error::Parse {
                    context: format!("panel row {}", row + 2),
                    message: format!("'{raw}' is not a number"),
                })?);
            }
        }
        if quarters.is_empty() {
            return Err(Error::NoObservations("panel".into()));
        }
        for w in quarters.windows(2) {
            if w[0].succ() != w[1] {
                return Err(Error::InvalidData(format!("panel quarters not contiguous at {}", w[0])));
            }
        }
        let mut cols = cols.into_iter();
        let pi = cols.next().unwrap();
        let y = cols.next().unwrap();
        let i = cols.next().unwrap();
        let dummies =
            header[4..].iter().zip(cols).map(|(name, values)| DummyColumn { name: name.clone(), values }).collect();
        MacroPanel::new(quarters[0], pi, y, i, dummies)
    }
}

pub(crate) fn write_record<W: Write>(w: &mut csv::Writer<W>, row: &[String]) -> Result<()> {
    w.write_record(row).map_err(|e| Error::Parse { context: "writing delimited output".into(), message: e.to_string() })
}

pub(crate) fn csv_io(e: std::io::Error) -> Error {
    Error::Io { path: "<output>".into(), source: e }
}

/// Aligns the three series on the window and adds indicator columns.
pub fn assemble_panel(
    pi: &RawSeries,
    y: &RawSeries,
    i: &RawSeries,
    window: (Quarter, Quarter),
    dummies: &[DummySpec],
) -> Result<MacroPanel> {
    let (start, end) = window;
    if start > end {
        return Err(Error::Config(format!("window start {start} after end {end}")));
    }
    let mut columns = Vec::with_capacity(3);
    for series in [pi, y, i] {
        series.require(Frequency::Quarterly)?;
        let map = series.by_quarter();
        let mut missing = Vec::new();
        let mut col = Vec::with_capacity(start.count_through(end));
        for q in start.through(end) {
            match map.get(&q) {
                Some(&v) => col.push(v),
                None => missing.push(q),
            }
        }
        if !missing.is_empty() {
            return Err(Error::Coverage { label: series.label.clone(), missing });
        }
        columns.push(col);
    }
    let dummy_cols = dummies
        .iter()
        .map(|d| DummyColumn {
            name: d.name.clone(),
            values: start.through(end).map(|q| if d.covers(q) { 1.0 } else { 0.0 }).collect(),
        })
        .collect();
    let mut columns = columns.into_iter();
    MacroPanel::new(start, columns.next().unwrap(), columns.next().unwrap(), columns.next().unwrap(), dummy_cols)
}

/// Summary row for one panel column.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnStats {
    pub mean: f64,
    pub min: f64,
    pub first_quartile: f64,
    pub median: f64,
    pub third_quartile: f64,
    pub max: f64,
}

impl ColumnStats {
    pub fn of(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptySample);
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        Ok(Self {
            mean,
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            first_quartile: empirical_quantile(values, 0.25)?,
            median: empirical_quantile(values, 0.5)?,
            third_quartile: empirical_quantile(values, 0.75)?,
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

/// Descriptive statistics for `i`, `y` and `pi`, in that order.
pub fn descriptive_stats(panel: &MacroPanel) -> Result<Vec<(&'static str, ColumnStats)>> {
    if panel.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(vec![("i", ColumnStats::of(&panel.i)?), ("y", ColumnStats::of(&panel.y)?), ("pi", ColumnStats::of(&panel.pi)?)])
}
