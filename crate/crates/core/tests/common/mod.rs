//! Synthetic raw input files in the layout of the public data exports.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub struct Paths {
    pub gdp: PathBuf,
    pub potential: PathBuf,
    pub price_index: PathBuf,
    pub rate: PathBuf,
}

/// Quarterly path from 1954Q3 through 2025Q2 driven by the baseline law with
/// a smoothed rate equation; returns (pi, y, i) per quarter.
pub fn simulate_path(seed: u64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let quarters = 4 * (2025 - 1954); // 1954Q3 ..= 2025Q2
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let e_pi = Normal::new(0.0, 0.3).unwrap();
    let e_y = Normal::new(0.0, 0.9).unwrap();
    let e_i = Normal::new(0.0, 0.5).unwrap();
    let (mut pi, mut y, mut i) = (vec![0.8], vec![-0.3], vec![4.5]);
    for t in 1..quarters {
        let p = 0.114 + 0.024 * i[t - 1] + 0.719 * pi[t - 1] + 0.006 * y[t - 1] + e_pi.sample(&mut rng);
        let g = 0.215 - 0.029 * i[t - 1] - 0.130 * pi[t - 1] + 0.904 * y[t - 1] + e_y.sample(&mut rng);
        let r = 0.35 + 0.9 * i[t - 1] + 0.15 * p + 0.05 * g + e_i.sample(&mut rng);
        pi.push(p);
        y.push(g);
        i.push(r);
    }
    (pi, y, i)
}

fn iso(year: i32, month: u32) -> String {
    format!("{year:04}-{month:02}-01")
}

/// Writes the four series for 1954Q2..2025Q2 (price index starts one quarter
/// earlier so the first inflation value lands on 1954Q3).
pub fn write_inputs(dir: &Path, seed: u64) -> Paths {
    write_inputs_with(dir, seed, |_, r| r)
}

/// Same as [`write_inputs`], with a hook to rewrite each monthly rate.
pub fn write_inputs_with(dir: &Path, seed: u64, rate_hook: impl Fn(usize, f64) -> f64) -> Paths {
    fs::create_dir_all(dir).unwrap();
    let (pi, y, i) = simulate_path(seed);
    let mut gdp = String::from("DATE,GDPC1\n");
    let mut pot = String::from("DATE,GDPPOT\n");
    let mut price = String::from("DATE,PCECTPI\n");
    let mut rate = String::from("DATE,FEDFUNDS\n");
    let mut level = 15.0f64;
    writeln!(price, "{},{:.6}", iso(1954, 4), level).unwrap();
    let mut month_index = 0;
    for t in 0..pi.len() {
        let q0 = 2 + t; // quarters since 1954Q1, zero-based: 1954Q3 is 2
        let year = 1954 + (q0 / 4) as i32;
        let month = 3 * (q0 % 4) as u32 + 1;
        let potential = 2500.0 * 1.0075f64.powi(t as i32);
        writeln!(pot, "{},{:.4}", iso(year, month), potential).unwrap();
        writeln!(gdp, "{},{:.4}", iso(year, month), potential * (1.0 + y[t] / 100.0)).unwrap();
        level *= (pi[t] / 100.0).exp();
        writeln!(price, "{},{:.6}", iso(year, month), level).unwrap();
        for (k, wiggle) in [-0.05, 0.0, 0.05].into_iter().enumerate() {
            writeln!(rate, "{},{:.4}", iso(year, month + k as u32), rate_hook(month_index, i[t] + wiggle)).unwrap();
            month_index += 1;
        }
    }
    let paths = Paths {
        gdp: dir.join("GDPC1.csv"),
        potential: dir.join("GDPPOT.csv"),
        price_index: dir.join("PCECTPI.csv"),
        rate: dir.join("FEDFUNDS.csv"),
    };
    fs::write(&paths.gdp, gdp).unwrap();
    fs::write(&paths.potential, pot).unwrap();
    fs::write(&paths.price_index, price).unwrap();
    fs::write(&paths.rate, rate).unwrap();
    paths
}

/// Configuration text pointing at the synthetic inputs.
pub fn config_text(paths: &Paths, output: &Path, extra: &str) -> String {
    format!(
        "gdp = {}\npotential = {}\nprice_index = {}\nrate = {}\noutput_dir = {}\n{extra}",
        paths.gdp.display(),
        paths.potential.display(),
        paths.price_index.display(),
        paths.rate.display(),
        output.display()
    )
}
