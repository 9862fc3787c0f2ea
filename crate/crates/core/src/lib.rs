//! Construction, simulation and verification of stochastic differential
//! systems whose trajectories stay on a level set `M(t, x) = const`.

pub mod autodiff;
pub mod definition;
pub mod expr;
pub mod geometry;
pub mod harness;
pub mod simulate;
pub mod synthesis;

/// `v` with 6 significant digits, `%g` style.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v}");
    }
    let exp = v.abs().log10().floor() as i32;
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        let s = format!("{v:.decimals$}");
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let s = format!("{v:.5e}");
        let (mant, e) = s.split_once('e').expect("exponent form");
        let mant = if mant.contains('.') {
            mant.trim_end_matches('0').trim_end_matches('.')
        } else {
            mant
        };
        format!("{mant}e{e}")
    }
}
