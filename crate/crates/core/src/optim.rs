//! Brent's bounded scalar minimizer (golden section with parabolic steps).

/// Result of [`brent_minimize`].
#[derive(Debug, Clone, Copy)]
pub struct Minimum {
    pub x: f64,
    pub fx: f64,
    pub evaluations: usize,
}

/// Failure modes of [`brent_minimize`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinimizeError {
    /// The objective returned NaN at `x`.
    NotANumber {
        x: f64,
    },
    MaxIterations {
        x: f64,
        evaluations: usize,
    },
}

/// Minimizes `f` on `[lower, upper]`. Stops when the bracket around the
/// current best point is within `2 (sqrt(eps)·|x| + tol/3)`, the same rule
/// as Brent's `fmin` and R's `optimize`.
pub fn brent_minimize<F>(mut f: F, lower: f64, upper: f64, tol: f64, max_iter: usize) -> Result<Minimum, MinimizeError>
where
    F: FnMut(f64) -> f64,
{
    let golden = 0.5 * (3.0 - 5f64.sqrt());
    let eps = f64::EPSILON.sqrt();
    let tol3 = tol / 3.0;

    let (mut a, mut b) = (lower, upper);
    let mut v = a + golden * (b - a);
    let mut w = v;
    let mut x = v;
    let mut d: f64 = 0.0;
    let mut e: f64 = 0.0;
    let mut fx = f(x);
    let mut evaluations = 1;
    if fx.is_nan() {
        return Err(MinimizeError::NotANumber { x });
    }
    let mut fv = fx;
    let mut fw = fx;

    for _ in 0..max_iter {
        let xm = 0.5 * (a + b);
        let tol1 = eps * x.abs() + tol3;
        let t2 = 2.0 * tol1;
        if (x - xm).abs() <= t2 - 0.5 * (b - a) {
            return Ok(Minimum { x, fx, evaluations });
        }

        let mut p = 0.0;
        let mut q = 0.0;
        let mut r = 0.0;
        if e.abs() > tol1 {
            r = (x - w) * (fx - fv);
            q = (x - v) * (fx - fw);
            p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            } else {
                q = -q;
            }
            r = e;
            e = d;
        }

        if p.abs() >= (0.5 * q * r).abs() || p <= q * (a - x) || p >= q * (b - x) {
            e = if x < xm { b - x } else { a - x };
            d = golden * e;
        } else {
            d = p / q;
            let u = x + d;
            if u - a < t2 || b - u < t2 {
                d = if x < xm { tol1 } else { -tol1 };
            }
        }

        let u = if d.abs() >= tol1 {
            x + d
        } else if d > 0.0 {
            x + tol1
        } else {
            x - tol1
        };
        let fu = f(u);
        evaluations += 1;
        if fu.is_nan() {
            return Err(MinimizeError::NotANumber { x: u });
        }

        if fu <= fx {
            if u < x {
                b = x;
            } else {
                a = x;
            }
            v = w;
            fv = fw;
            w = x;
            fw = fx;
            x = u;
            fx = fu;
        } else {
            if u < x {
                a = u;
            } else {
                b = u;
            }
            if fu <= fw || w == x {
                v = w;
                fv = fw;
                w = u;
                fw = fu;
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
    Err(MinimizeError::MaxIterations { x, evaluations })
}
