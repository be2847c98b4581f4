//! Quantile-preference Taylor rules.
//!
//! Estimates a first-order law of motion for inflation and the output gap,
//! fits skedastic scale functions, evaluates the optimal policy rate as a
//! function of the quantile index τ, recovers the τ implied by observed rates,
//! and checks the closed-form rule against a quantile dynamic-programming
//! oracle.

// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod qdp;
pub mod quantile;
pub mod regress;
pub mod rule;
pub mod skedastic;

pub use error::{Error, ErrorClass, Result};
pub use ingest::{MacroPanel, Quarter};
pub use quantile::{empirical_quantile, TauGrid};
pub use regress::{fit_var1, LawOfMotion};
pub use rule::{Calibration, RuleCase, RuleContext};
pub use skedastic::{fit_skedastic, SkedasticForm, SkedasticModel};

/// Formats a float with 12 significant digits, trailing zeros trimmed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.11e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}
