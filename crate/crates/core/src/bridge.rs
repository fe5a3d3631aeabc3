//! Bridge functions F with E[τ̂] = F(r) for every pairing of continuous (C),
//! binary (B) and truncated (T) variables, and their inversion by bounded
//! scalar minimization.
//!
//! Argument order is fixed per case: the first threshold belongs to the
//! binary variable in BC, to the truncated variable in TC and TB (with the
//! binary threshold second in TB). Swapping variable roles is the
//! estimator's job.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mvn::{self, bvn_lower, phi, qvn_lower, tvn_lower};
use crate::optim::{brent_minimize, MinimizeError};

/// Lower end of the search interval for r.
pub const R_MIN: f64 = -0.999;
/// Upper end of the search interval for r.
pub const R_MAX: f64 = 0.999;
/// Convergence tolerance on r for the inversion.
pub const ORG_TOLERANCE: f64 = 1e-8;
const ORG_MAX_ITER: usize = 500;

/// Pair type combination selecting the bridge function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CaseKind {
    CC,
    BC,
    BB,
    TC,
    TT,
    TB,
}

impl CaseKind {
    pub const ALL: [CaseKind; 6] = [
        CaseKind::CC,
        CaseKind::BC,
        CaseKind::BB,
        CaseKind::TC,
        CaseKind::TT,
        CaseKind::TB,
    ];
    /// Cases that need an interpolation grid.
    pub const GRIDDED: [CaseKind; 5] = [CaseKind::BC, CaseKind::BB, CaseKind::TC, CaseKind::TT, CaseKind::TB];

    /// Number of thresholds the bridge function takes.
    pub fn delta_count(self) -> usize {
        match self {
            CaseKind::CC => 0,
            CaseKind::BC | CaseKind::TC => 1,
            CaseKind::BB | CaseKind::TT | CaseKind::TB => 2,
        }
    }

    pub fn tag(self) -> u8 {
        match self {
            CaseKind::CC => 0,
            CaseKind::BC => 1,
            CaseKind::BB => 2,
            CaseKind::TC => 3,
            CaseKind::TT => 4,
            CaseKind::TB => 5,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        CaseKind::ALL.get(tag as usize).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CaseKind::CC => "cc",
            CaseKind::BC => "bc",
            CaseKind::BB => "bb",
            CaseKind::TC => "tc",
            CaseKind::TT => "tt",
            CaseKind::TB => "tb",
        }
    }
}

impl fmt::Display for CaseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_ascii_uppercase())
    }
}

impl FromStr for CaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CaseKind::ALL
            .into_iter()
            .find(|c| c.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Input(format!("unknown case '{s}'")))
    }
}

/// Φ⁻¹(π₀), keeping track of the infinite ends.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Threshold {
    Finite(f64),
    /// π₀ = 0: no zeros observed.
    NegInfinite,
    /// π₀ = 1: every observation is zero.
    PosInfinite,
}

impl Threshold {
    pub fn value(self) -> f64 {
        match self {
            Threshold::Finite(v) => v,
            Threshold::NegInfinite => f64::NEG_INFINITY,
            Threshold::PosInfinite => f64::INFINITY,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, Threshold::Finite(_))
    }
}

/// Threshold estimate Δ̂ = Φ⁻¹(π₀).
pub fn delta_from_zero_proportion(pi0: f64) -> Result<Threshold> {
    if pi0 == 0.0 {
        return Ok(Threshold::NegInfinite);
    }
    if pi0 == 1.0 {
        return Ok(Threshold::PosInfinite);
    }
    mvn::std_normal_quantile(pi0).map(Threshold::Finite)
}

/// Closed-form CC inverse sin(πτ/2).
pub fn cc_inverse_closed(tau: f64) -> f64 {
    (0.5 * PI * tau.clamp(-1.0, 1.0)).sin()
}

/// A bridge function with its thresholds bound, plus the r-independent terms
/// precomputed.
#[derive(Debug, Clone, Copy)]
pub struct Bridge {
    case: CaseKind,
    d1: f64,
    d2: f64,
    offset: f64,
}

impl Bridge {
    pub fn new(case: CaseKind, deltas: &[f64]) -> Result<Self> {
        if deltas.len() != case.delta_count() {
            return Err(Error::domain(format!(
                "case {case} takes {} threshold(s), got {}",
                case.delta_count(),
                deltas.len()
            )));
        }
        if let Some(d) = deltas.iter().find(|d| !d.is_finite()) {
            return Err(Error::domain(format!("threshold {d} is not finite")));
        }
        let d1 = deltas.first().copied().unwrap_or(0.0);
        let d2 = deltas.get(1).copied().unwrap_or(0.0);
        let offset = match case {
            CaseKind::CC | CaseKind::TT => 0.0,
            CaseKind::BC => -2.0 * phi(d1),
            CaseKind::BB => -2.0 * phi(d1) * phi(d2),
            CaseKind::TC => -2.0 * bvn_lower(-d1, 0.0, FRAC_1_SQRT_2),
            CaseKind::TB => 2.0 * (1.0 - phi(d1)) * phi(d2),
        };
        Ok(Self { case, d1, d2, offset })
    }

    pub fn case(&self) -> CaseKind {
        self.case
    }

    pub fn deltas(&self) -> Vec<f64> {
        [self.d1, self.d2][..self.case.delta_count()].to_vec()
    }

    /// F(r) for |r| ≤ 1 (not checked).
    pub fn eval(&self, r: f64) -> f64 {
        let s = FRAC_1_SQRT_2;
        let (d1, d2) = (self.d1, self.d2);
        match self.case {
            CaseKind::CC => 2.0 / PI * r.asin(),
            CaseKind::BC => 4.0 * bvn_lower(d1, 0.0, r * s) + self.offset,
            CaseKind::BB => 2.0 * bvn_lower(d1, d2, r) + self.offset,
            CaseKind::TC => {
                let sigma3 = [[1.0, s, r * s], [s, 1.0, r], [r * s, r, 1.0]];
                self.offset + 4.0 * tvn_lower([-d1, 0.0, 0.0], sigma3)
            }
            CaseKind::TB => {
                let sigma3a = [[1.0, -r, s], [-r, 1.0, -r * s], [s, -r * s, 1.0]];
                let sigma3b = [[1.0, 0.0, -s], [0.0, 1.0, -r * s], [-s, -r * s, 1.0]];
                let upper = [-d1, d2, 0.0];
                self.offset - 2.0 * tvn_lower(upper, sigma3a) - 2.0 * tvn_lower(upper, sigma3b)
            }
            CaseKind::TT => {
                let sigma4a = [
                    [1.0, 0.0, s, -r * s],
                    [0.0, 1.0, -r * s, s],
                    [s, -r * s, 1.0, -r],
                    [-r * s, s, -r, 1.0],
                ];
                let sigma4b = [
                    [1.0, r, s, r * s],
                    [r, 1.0, r * s, s],
                    [s, r * s, 1.0, r],
                    [r * s, s, r, 1.0],
                ];
                let upper = [-d1, -d2, 0.0, 0.0];
                -2.0 * qvn_lower(upper, sigma4a) + 2.0 * qvn_lower(upper, sigma4b)
            }
        }
    }

    /// Solves argmin_r (F(r) - τ)² over [`R_MIN`, `R_MAX`].
    pub fn invert(&self, tau: f64) -> Result<OrgSolution> {
        if !(tau.is_finite() && tau.abs() <= 1.0) {
            return Err(Error::domain(format!("tau {tau} outside [-1, 1]")));
        }
        let objective = |r: f64| {
            let d = self.eval(r) - tau;
            d * d
        };
        let min = brent_minimize(objective, R_MIN, R_MAX, ORG_TOLERANCE, ORG_MAX_ITER).map_err(|e| {
            let iterations = match e {
                MinimizeError::MaxIterations { evaluations, .. } => evaluations,
                MinimizeError::NotANumber { .. } => 0,
            };
            Error::NonConvergence {
                case: self.case,
                tau,
                deltas: self.deltas(),
                iterations,
            }
        })?;

        let mut r = min.x;
        let mut evaluations = min.evaluations;
        let mut saturated = false;
        // Clamp to the interval end when τ lies beyond F's range there.
        let edge = 10.0 * ORG_TOLERANCE;
        if r > R_MAX - edge || r < R_MIN + edge {
            let bound = if r > 0.0 { R_MAX } else { R_MIN };
            let f_bound = self.eval(bound);
            evaluations += 1;
            if (bound > 0.0 && tau >= f_bound) || (bound < 0.0 && tau <= f_bound) {
                r = bound;
                saturated = true;
            }
        }
        Ok(OrgSolution {
            r,
            saturated,
            evaluations,
        })
    }

    /// (F(`R_MIN`), F(`R_MAX`)), the range of τ reachable on the search interval.
    pub fn attainable_range(&self) -> (f64, f64) {
        (self.eval(R_MIN), self.eval(R_MAX))
    }

    /// [`Bridge::invert`] with a precomputed [`Bridge::attainable_range`]:
    /// τ outside the range maps straight to the saturated interval end, which
    /// is where the minimizer would land. Used when inverting many τ values
    /// for the same thresholds.
    pub fn invert_within(&self, tau: f64, range: (f64, f64)) -> Result<OrgSolution> {
        let (lo, hi) = range;
        let end = |r| OrgSolution {
            r,
            saturated: true,
            evaluations: 0,
        };
        if tau.is_finite() && tau.abs() <= 1.0 {
            if tau >= hi {
                return Ok(end(R_MAX));
            }
            if tau <= lo {
                return Ok(end(R_MIN));
            }
        }
        self.invert(tau)
    }
}

/// Outcome of the bounded-minimization inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrgSolution {
    pub r: f64,
    /// τ was outside F's range on the search interval; `r` sits at an end.
    pub saturated: bool,
    pub evaluations: usize,
}

/// F(r; Δ…) for the given case.
pub fn bridge_forward(case: CaseKind, r: f64, deltas: &[f64]) -> Result<f64> {
    if !(r.is_finite() && r.abs() <= 1.0) {
        return Err(Error::domain(format!("latent correlation {r} outside [-1, 1]")));
    }
    Ok(Bridge::new(case, deltas)?.eval(r))
}

/// r̂ = argmin_r (F(r) - τ̂)² over [-0.999, 0.999].
pub fn bridge_inverse_org(case: CaseKind, tau_hat: f64, deltas: &[f64]) -> Result<OrgSolution> {
    Bridge::new(case, deltas)?.invert(tau_hat)
}
