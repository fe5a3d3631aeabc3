//! Standard normal and low-dimensional (d ≤ 4) multivariate normal CDFs.
//!
//! Every routine is deterministic: Φ₂ uses fixed Gauss–Legendre rules and
//! Φ₃/Φ₄ use a fixed Gauss–Kronrod bisection scheme, so repeated calls are
//! bit-identical. Infinite upper limits are accepted: `+∞` marginalises the
//! coordinate out, `-∞` gives probability zero.

mod bvn;
mod corr;
mod normal;
mod plackett;
pub(crate) mod quad;

pub use corr::{SmallCorrMatrix, PSD_TOLERANCE};
pub use normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile};

pub(crate) use bvn::bvn_lower;
pub(crate) use normal::phi;
pub(crate) use plackett::{qvn_lower, tvn_lower};

use crate::error::{Error, Result};

/// Absolute accuracy of [`bvn_cdf`].
pub const BVN_TOLERANCE: f64 = 1e-12;
/// Absolute accuracy of [`tvn_cdf`].
pub const TVN_TOLERANCE: f64 = 1e-7;
/// Absolute accuracy of [`qvn_cdf`].
pub const QVN_TOLERANCE: f64 = 1e-6;

/// Φ₂(a, b; ρ).
pub fn bvn_cdf(a: f64, b: f64, rho: f64) -> Result<f64> {
    if rho.is_nan() || rho.abs() > 1.0 {
        return Err(Error::domain(format!("correlation {rho} outside [-1, 1]")));
    }
    if a.is_nan() || b.is_nan() {
        return Err(Error::domain("NaN upper limit"));
    }
    Ok(bvn_lower(a, b, rho))
}

/// Φ₃(upper; corr).
pub fn tvn_cdf(upper: [f64; 3], corr: &SmallCorrMatrix) -> Result<f64> {
    if corr.dim() != 3 {
        return Err(Error::InvalidCorrelation(format!(
            "expected a 3x3 matrix, got {0}x{0}",
            corr.dim()
        )));
    }
    mvn_cdf(&upper, corr)
}

/// Φ₄(upper; corr).
pub fn qvn_cdf(upper: [f64; 4], corr: &SmallCorrMatrix) -> Result<f64> {
    if corr.dim() != 4 {
        return Err(Error::InvalidCorrelation(format!(
            "expected a 4x4 matrix, got {0}x{0}",
            corr.dim()
        )));
    }
    mvn_cdf(&upper, corr)
}

/// Drops `+∞` coordinates and dispatches on the remaining dimension.
fn mvn_cdf(upper: &[f64], corr: &SmallCorrMatrix) -> Result<f64> {
    if upper.iter().any(|x| x.is_nan()) {
        return Err(Error::domain("NaN upper limit"));
    }
    if upper.contains(&f64::NEG_INFINITY) {
        return Ok(0.0);
    }
    let idx: Vec<usize> = (0..upper.len()).filter(|&i| upper[i].is_finite()).collect();
    let a = |k: usize| upper[idx[k]];
    let r = |x: usize, y: usize| corr.get(idx[x], idx[y]);
    Ok(match idx.len() {
        0 => 1.0,
        1 => phi(a(0)),
        2 => bvn_lower(a(0), a(1), r(0, 1)),
        3 => tvn_lower([a(0), a(1), a(2)], corr.sub([idx[0], idx[1], idx[2]])),
        4 => qvn_lower([a(0), a(1), a(2), a(3)], corr.sub([0, 1, 2, 3])),
        _ => unreachable!("dimension is at most 4"),
    })
}
