//! Exact and asymptotic decoding-error analytics for the random parity-check
//! matrix ensemble over the q-ary erasure channel.

pub mod cli;
pub mod ensemble;
pub mod error;
pub mod exponents;
pub mod formulas;
pub mod gfmat;
pub mod qcomb;

pub use error::{Error, Result};

/// A double with 12 significant digits, positional unless very large or small.
pub fn fmt_g12(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        // Rounding can carry into a new leading digit; that only drops precision.
        let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
        if s == "-0" { "0".to_string() } else { s }
    } else {
        let s = format!("{x:.11e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    }
}
