//! Trivariate and quadrivariate normal CDFs via Plackett's identity.
//!
//! For a correlation path R(t) = R0 + t (R - R0) with R0 block diagonal,
//!
//!   Φ_d(a; R) = Φ_d(a; R0) + ∫₀¹ Σ_{(p,q) off-block} (R - R0)_pq
//!               · φ₂(a_p, a_q; R_pq(t)) · Φ_{d-2}(a_rest | x_p = a_p, x_q = a_q) dt
//!
//! so every evaluation is a one-dimensional integral of closed-form
//! bivariate densities times Φ or Φ₂. The integral uses a fixed G7/K15
//! bisection scheme, which keeps results deterministic.

use super::bvn::{bvn_lower, bvn_pdf};
use super::normal::phi;
use super::quad::integrate_adaptive;

const TVN_QUAD_TOL: f64 = 1e-13;
const QVN_QUAD_TOL: f64 = 5e-12;
const DEGENERATE_VAR: f64 = 1e-15;

/// Φ((a - μ) / σ) with the σ → 0 limit mapped to a step.
#[inline]
fn cond_phi(a: f64, mu: f64, var: f64) -> f64 {
    if var <= DEGENERATE_VAR {
        if a >= mu {
            1.0
        } else {
            0.0
        }
    } else {
        phi((a - mu) / var.sqrt())
    }
}

/// Φ₃(a; r) for finite `a`.
pub(crate) fn tvn_lower(a: [f64; 3], r: [[f64; 3]; 3]) -> f64 {
    // keep the strongest pair, decouple the third variable
    let pairs = [(0usize, 1usize, 2usize), (0, 2, 1), (1, 2, 0)];
    let &(i, j, k) = pairs
        .iter()
        .max_by(|x, y| r[x.0][x.1].abs().total_cmp(&r[y.0][y.1].abs()))
        .expect("non-empty");
    let base = bvn_lower(a[i], a[j], r[i][j]) * phi(a[k]);
    if r[i][k] == 0.0 && r[j][k] == 0.0 {
        return base;
    }
    // (p, q) is the decoupled pair, m the conditioned-out variable
    let terms = [(i, k, j), (j, k, i)];
    let integrand = |t: f64| {
        let mut sum = 0.0;
        for &(p, q, m) in &terms {
            let c = r[p][q];
            if c == 0.0 {
                continue;
            }
            let rho = t * c;
            let r_mp = r[m][p];
            let r_mq = t * r[m][q];
            let om = (1.0 - rho) * (1.0 + rho);
            let b1 = (r_mp - rho * r_mq) / om;
            let b2 = (r_mq - rho * r_mp) / om;
            let mu = b1 * a[p] + b2 * a[q];
            let var = 1.0 - b1 * r_mp - b2 * r_mq;
            sum += c * bvn_pdf(a[p], a[q], rho) * cond_phi(a[m], mu, var);
        }
        sum
    };
    (base + integrate_adaptive(integrand, 0.0, 1.0, TVN_QUAD_TOL)).clamp(0.0, 1.0)
}

/// Φ₂ of a conditional pair given its mean and covariance, handling
/// vanishing variances.
#[inline]
fn cond_bvn(a: [f64; 2], mu: [f64; 2], c11: f64, c22: f64, c12: f64) -> f64 {
    let d1 = c11 <= DEGENERATE_VAR;
    let d2 = c22 <= DEGENERATE_VAR;
    match (d1, d2) {
        (true, true) => cond_phi(a[0], mu[0], 0.0) * cond_phi(a[1], mu[1], 0.0),
        (true, false) => cond_phi(a[0], mu[0], 0.0) * cond_phi(a[1], mu[1], c22),
        (false, true) => cond_phi(a[0], mu[0], c11) * cond_phi(a[1], mu[1], 0.0),
        (false, false) => {
            let s1 = c11.sqrt();
            let s2 = c22.sqrt();
            let rho = (c12 / (s1 * s2)).clamp(-1.0, 1.0);
            bvn_lower((a[0] - mu[0]) / s1, (a[1] - mu[1]) / s2, rho)
        }
    }
}

/// Φ₄(a; r) for finite `a`.
pub(crate) fn qvn_lower(a: [f64; 4], r: [[f64; 4]; 4]) -> f64 {
    let pairings = [((0usize, 1usize), (2usize, 3usize)), ((0, 2), (1, 3)), ((0, 3), (1, 2))];
    let &((i, j), (k, l)) = pairings
        .iter()
        .max_by(|x, y| {
            let sx = r[x.0 .0][x.0 .1].abs() + r[x.1 .0][x.1 .1].abs();
            let sy = r[y.0 .0][y.0 .1].abs() + r[y.1 .0][y.1 .1].abs();
            sx.total_cmp(&sy)
        })
        .expect("non-empty");
    let base = bvn_lower(a[i], a[j], r[i][j]) * bvn_lower(a[k], a[l], r[k][l]);
    // cross pair (p, q) and the remaining pair (u, v)
    let cross = [(i, k, j, l), (i, l, j, k), (j, k, i, l), (j, l, i, k)];
    if cross.iter().all(|&(p, q, _, _)| r[p][q] == 0.0) {
        return base;
    }
    let mut kept = [[false; 4]; 4];
    for (x, y) in [(i, j), (k, l)] {
        kept[x][y] = true;
        kept[y][x] = true;
    }

    let integrand = |t: f64| {
        let e = |x: usize, y: usize| {
            if x == y {
                1.0
            } else if kept[x][y] {
                r[x][y]
            } else {
                t * r[x][y]
            }
        };
        let mut sum = 0.0;
        for &(p, q, u, v) in &cross {
            let c = r[p][q];
            if c == 0.0 {
                continue;
            }
            let rho = t * c;
            let om = (1.0 - rho) * (1.0 + rho);
            // rows of B A^{-1} for u and v
            let (up, uq) = (e(u, p), e(u, q));
            let (vp, vq) = (e(v, p), e(v, q));
            let bu = [(up - rho * uq) / om, (uq - rho * up) / om];
            let bv = [(vp - rho * vq) / om, (vq - rho * vp) / om];
            let mu = [bu[0] * a[p] + bu[1] * a[q], bv[0] * a[p] + bv[1] * a[q]];
            let c11 = 1.0 - (bu[0] * up + bu[1] * uq);
            let c22 = 1.0 - (bv[0] * vp + bv[1] * vq);
            let c12 = e(u, v) - (bu[0] * vp + bu[1] * vq);
            sum += c * bvn_pdf(a[p], a[q], rho) * cond_bvn([a[u], a[v]], mu, c11, c22, c12);
        }
        sum
    };
    (base + integrate_adaptive(integrand, 0.0, 1.0, QVN_QUAD_TOL)).clamp(0.0, 1.0)
}
