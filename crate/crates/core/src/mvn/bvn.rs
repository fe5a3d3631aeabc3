//! Bivariate normal CDF, after Genz's BVNU (Drezner–Wesolowsky reduction
//! with 6/12/20-point Gauss–Legendre depending on |ρ|).

use std::f64::consts::PI;

use super::normal::phi;
use super::quad::gauss_legendre;

const TWO_PI: f64 = 2.0 * PI;

/// P(X > h, Y > k) for standard bivariate normal with correlation `r`.
pub(crate) fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY { 1.0 } else { phi(-k) };
    }
    if k == f64::NEG_INFINITY {
        return phi(-h);
    }
    if r == 0.0 {
        return phi(-h) * phi(-k);
    }

    let rule = if r.abs() < 0.3 {
        gauss_legendre(6)
    } else if r.abs() < 0.75 {
        gauss_legendre(12)
    } else {
        gauss_legendre(20)
    };

    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = 0.5 * (h * h + k * k);
        let asr = 0.5 * r.asin();
        for (z, w) in rule.nodes.iter().zip(&rule.weights) {
            let sn = (asr * (1.0 + z)).sin();
            bvn += w * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
        }
        bvn = bvn * asr / TWO_PI + phi(-h) * phi(-k);
    } else {
        if r < 0.0 {
            k = -k;
            hk = -hk;
        }
        if r.abs() < 1.0 {
            let a_s = (1.0 - r) * (1.0 + r);
            let mut a = a_s.sqrt();
            let bs = (h - k) * (h - k);
            let asr = -0.5 * (bs / a_s + hk);
            let c = (4.0 - hk) / 8.0;
            let d = (12.0 - hk) / 80.0;
            if asr > -100.0 {
                bvn = a * asr.exp() * (1.0 - c * (bs - a_s) * (1.0 - d * bs) / 3.0 + c * d * a_s * a_s);
            }
            if hk > -100.0 {
                let b = bs.sqrt();
                let sp = TWO_PI.sqrt() * phi(-b / a);
                bvn -= (-0.5 * hk).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
            }
            a *= 0.5;
            let mut sum = 0.0;
            for (z, w) in rule.nodes.iter().zip(&rule.weights) {
                let xs = (a * (1.0 + z)).powi(2);
                let asr = -0.5 * (bs / xs + hk);
                if asr > -100.0 {
                    let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    let rs = (1.0 - xs).sqrt();
                    let ep = (-0.5 * hk * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                    sum += w * asr.exp() * (sp - ep);
                }
            }
            bvn = (a * sum - bvn) / TWO_PI;
        }
        if r > 0.0 {
            bvn += phi(-h.max(k));
        } else if h >= k {
            bvn = -bvn;
        } else {
            let l = if h < 0.0 { phi(k) - phi(h) } else { phi(-h) - phi(-k) };
            bvn = l - bvn;
        }
    }
    bvn.clamp(0.0, 1.0)
}

/// Φ₂(a, b; ρ) without argument validation.
#[inline]
pub(crate) fn bvn_lower(a: f64, b: f64, rho: f64) -> f64 {
    bvn_upper(-a, -b, rho)
}

/// Bivariate normal density φ₂(x, y; ρ), |ρ| < 1.
#[inline]
pub(crate) fn bvn_pdf(x: f64, y: f64, rho: f64) -> f64 {
    let om = (1.0 - rho) * (1.0 + rho);
    let q = (x * x - 2.0 * rho * x * y + y * y) / om;
    (-0.5 * q).exp() / (TWO_PI * om.sqrt())
}
