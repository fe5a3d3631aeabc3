//! Kendall's τ-a and zero-proportion statistics.
//!
//! τ-a counts tied pairs as zero and keeps the untied denominator
//! n(n-1)/2. The fast path sorts by (x, y), counts discordant pairs with a
//! merge sort on y, and corrects for ties with the usual identity
//!
//!   concordant - discordant = n0 - n1 - n2 + n3 - 2·swaps
//!
//! where n1, n2 count pairs tied in x and y, and n3 pairs tied in both.

use crate::error::{Error, Result};

fn check_shape(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::domain(format!(
            "vectors differ in length ({} vs {})",
            x.len(),
            y.len()
        )));
    }
    if x.len() < 2 {
        return Err(Error::domain("Kendall's tau needs at least two observations"));
    }
    Ok(())
}

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    check_shape(x, y)?;
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::domain("observations must be finite"));
    }
    Ok(())
}

/// Order-preserving integer key. Finite values only; -0.0 and 0.0 share a
/// key, matching sign(x - x') in the estimator.
#[inline]
fn key(v: f64) -> u64 {
    let bits = (v + 0.0).to_bits();
    if bits >> 63 == 1 {
        !bits
    } else {
        bits | (1 << 63)
    }
}

/// Sum of t(t-1)/2 over runs of equal adjacent keys.
fn tied_pairs<T: Copy + PartialEq>(sorted: &[T]) -> u64 {
    let mut total = 0u64;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts `v` and returns the number of strict inversions (i < j, v[i] > v[j]).
fn merge_count(v: &mut [u64], buf: &mut [u64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    if n <= 16 {
        // insertion sort; each shift is one inversion
        let mut swaps = 0u64;
        for i in 1..n {
            let cur = v[i];
            let mut j = i;
            while j > 0 && v[j - 1] > cur {
                v[j] = v[j - 1];
                j -= 1;
                swaps += 1;
            }
            v[j] = cur;
        }
        return swaps;
    }
    let mid = n / 2;
    let (left_buf, right_buf) = buf.split_at_mut(mid);
    let mut swaps = {
        let (l, r) = v.split_at_mut(mid);
        merge_count(l, left_buf) + merge_count(r, right_buf)
    };
    buf[..n].copy_from_slice(v);
    let (l, r) = buf[..n].split_at(mid);
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < l.len() && j < r.len() {
        if l[i] > r[j] {
            v[k] = r[j];
            j += 1;
            swaps += (l.len() - i) as u64;
        } else {
            v[k] = l[i];
            i += 1;
        }
        k += 1;
    }
    v[k..k + l.len() - i].copy_from_slice(&l[i..]);
    k += l.len() - i;
    v[k..].copy_from_slice(&r[j..]);
    swaps
}

/// Keys of the lower and upper level when `v` takes at most two values.
fn two_levels(v: &[f64]) -> Option<(u64, u64)> {
    let first = key(v[0]);
    let mut other = None;
    for k in v.iter().map(|&a| key(a)) {
        if k != first {
            match other {
                None => other = Some(k),
                Some(o) if o != k => return None,
                _ => {}
            }
        }
    }
    let o = other.unwrap_or(first);
    Some((first.min(o), first.max(o)))
}

/// Σ sign(x - x')·sign(y - y') when both variables take two levels.
fn concordance_2x2(x: &[f64], hx: u64, y: &[f64], hy: u64) -> i64 {
    let mut table = [0i64; 4];
    for (&a, &b) in x.iter().zip(y) {
        table[(usize::from(key(a) == hx) << 1) | usize::from(key(b) == hy)] += 1;
    }
    table[3] * table[0] - table[2] * table[1]
}

/// Σ sign(x - x')·sign(y - y') when `x` takes two levels: a rank-sum count
/// over the sorted `y` of each level.
fn concordance_two_level(x: &[f64], hx: u64, y: &[f64]) -> i64 {
    // high-level y keys fill the front, low-level ones the back
    let n = x.len();
    let mut keys = vec![0u64; n];
    let (mut h, mut l) = (0usize, n);
    for (&a, &b) in x.iter().zip(y) {
        if key(a) == hx {
            keys[h] = key(b);
            h += 1;
        } else {
            l -= 1;
            keys[l] = key(b);
        }
    }
    let (high, low) = keys.split_at_mut(h);
    high.sort_unstable();
    low.sort_unstable();
    // for each high value: (#low strictly below) - (#low strictly above)
    let (mut below, mut not_above, mut s) = (0usize, 0usize, 0i64);
    for &v in high.iter() {
        while below < low.len() && low[below] < v {
            below += 1;
        }
        not_above = not_above.max(below);
        while not_above < low.len() && low[not_above] <= v {
            not_above += 1;
        }
        s += below as i64 - (low.len() - not_above) as i64;
    }
    s
}

/// Sample Kendall's τ-a in O(n log n); O(n) when both variables are binary.
pub fn kendall_tau_a(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    Ok(tau_a_unchecked(x, y))
}

// Inputs are finite, of equal length and at least two long.
fn tau_a_unchecked(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as u64;
    let n0 = n * (n - 1) / 2;
    let s = match (two_levels(x), two_levels(y)) {
        (Some((_, hx)), Some((_, hy))) => Some(concordance_2x2(x, hx, y, hy)),
        (Some((_, hx)), None) => Some(concordance_two_level(x, hx, y)),
        (None, Some((_, hy))) => Some(concordance_two_level(y, hy, x)),
        (None, None) => None,
    };
    if let Some(s) = s {
        return s as f64 / n0 as f64;
    }
    let mut pairs: Vec<u128> = x
        .iter()
        .zip(y)
        .map(|(&a, &b)| (key(a) as u128) << 64 | key(b) as u128)
        .collect();
    pairs.sort_unstable();

    let n3 = tied_pairs(&pairs);
    let xs: Vec<u64> = pairs.iter().map(|&p| (p >> 64) as u64).collect();
    let n1 = tied_pairs(&xs);
    let mut ys: Vec<u64> = pairs.iter().map(|&p| p as u64).collect();
    let mut buf = vec![0u64; ys.len()];
    let swaps = merge_count(&mut ys, &mut buf);
    let n2 = tied_pairs(&ys);

    let numerator = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    numerator as f64 / n0 as f64
}

/// Literal double loop over all pairs. O(n²); used as a test oracle.
pub fn kendall_tau_a_bruteforce(x: &[f64], y: &[f64]) -> Result<f64> {
    check(x, y)?;
    let n = x.len();
    let sign = |d: f64| {
        if d > 0.0 {
            1i64
        } else if d < 0.0 {
            -1
        } else {
            0
        }
    };
    let mut s = 0i64;
    for i in 0..n {
        for j in (i + 1)..n {
            s += sign(x[i] - x[j]) * sign(y[i] - y[j]);
        }
    }
    let n0 = (n * (n - 1) / 2) as i64;
    Ok(s as f64 / n0 as f64)
}

/// Fraction of entries exactly equal to zero.
pub fn zero_proportion(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().filter(|&&v| v == 0.0).count() as f64 / x.len() as f64
}

/// τ̂, zero proportions and thresholds for one variable pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairStatistics {
    pub tau_hat: f64,
    pub pi0_x: f64,
    pub pi0_y: f64,
    /// Φ⁻¹(π₀ₓ); ±∞ when π₀ₓ is 0 or 1.
    pub delta_x: f64,
    pub delta_y: f64,
}

impl PairStatistics {
    pub fn compute(x: &[f64], y: &[f64]) -> Result<Self> {
        check(x, y)?;
        Self::compute_finite(x, y)
    }

    /// As [`compute`](Self::compute) for columns already known to be finite.
    pub(crate) fn compute_finite(x: &[f64], y: &[f64]) -> Result<Self> {
        check_shape(x, y)?;
        let tau_hat = tau_a_unchecked(x, y);
        let pi0_x = zero_proportion(x);
        let pi0_y = zero_proportion(y);
        Ok(Self {
            tau_hat,
            pi0_x,
            pi0_y,
            delta_x: crate::bridge::delta_from_zero_proportion(pi0_x)?.value(),
            delta_y: crate::bridge::delta_from_zero_proportion(pi0_y)?.value(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn worked_examples() {
        let tau = |x: &[f64], y: &[f64]| kendall_tau_a(x, y).unwrap();
        assert_eq!(tau(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]), 1.0);
        assert!((tau(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]) - 1.0 / 3.0).abs() < 1e-16);
        assert!((tau(&[0.0, 0.0, 1.0], &[0.0, 2.0, 3.0]) - 2.0 / 3.0).abs() < 1e-16);
        assert_eq!(tau(&[5.0; 7], &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0]), 0.0);
        // -0.0 ties with 0.0
        assert_eq!(
            tau(&[-0.0, 0.0, 1.0], &[3.0, 1.0, 2.0]),
            tau(&[0.0, 0.0, 1.0], &[3.0, 1.0, 2.0])
        );
    }

    #[test]
    fn errors() {
        assert!(kendall_tau_a(&[1.0, 2.0], &[1.0]).is_err());
        assert!(kendall_tau_a(&[1.0], &[1.0]).is_err());
        assert!(kendall_tau_a(&[1.0, f64::NAN], &[1.0, 2.0]).is_err());
        assert!(kendall_tau_a_bruteforce(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn zero_proportions() {
        assert_eq!(zero_proportion(&[0.0, 0.0, 1.0, 2.0]), 0.5);
        assert_eq!(zero_proportion(&[1.0, 2.0]), 0.0);
        assert_eq!(zero_proportion(&[0.0, 0.0]), 1.0);
    }

    #[test]
    fn fast_matches_bruteforce_with_heavy_ties() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..600 {
            let n = rng.gen_range(2..300);
            let zero_frac = [0.0, 0.3, 0.5, 0.8, 0.95][case % 5];
            let levels = [0u32, 3, 10, 1000, 2, 1][case % 6];
            let draw = |rng: &mut ChaCha8Rng| {
                if rng.gen::<f64>() < zero_frac {
                    0.0
                } else if levels > 0 {
                    rng.gen_range(0..levels) as f64
                } else {
                    rng.gen::<f64>() - 0.5
                }
            };
            let x: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
            let y: Vec<f64> = if case % 7 == 0 {
                (0..n).map(|_| rng.gen::<f64>() - 0.5).collect()
            } else {
                (0..n).map(|_| draw(&mut rng)).collect()
            };
            let fast = kendall_tau_a(&x, &y).unwrap();
            let slow = kendall_tau_a_bruteforce(&x, &y).unwrap();
            assert!((fast - slow).abs() <= 1e-15, "case {case}: {fast} vs {slow}");
        }
    }

    proptest! {
        #[test]
        fn antisymmetric_and_rank_invariant(
            data in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..80)
        ) {
            let x: Vec<f64> = data.iter().map(|p| p.0).collect();
            let y: Vec<f64> = data.iter().map(|p| p.1).collect();
            let t = kendall_tau_a(&x, &y).unwrap();
            prop_assert!(t.abs() <= 1.0);
            let neg: Vec<f64> = y.iter().map(|v| -v).collect();
            prop_assert_eq!(kendall_tau_a(&x, &neg).unwrap(), -t);
            let ex: Vec<f64> = x.iter().map(|v| v.exp()).collect();
            let cube: Vec<f64> = x.iter().map(|v| v * v * v).collect();
            prop_assert_eq!(kendall_tau_a(&ex, &y).unwrap(), t);
            prop_assert_eq!(kendall_tau_a(&cube, &y).unwrap(), t);
            let rev: Vec<f64> = y.iter().rev().copied().collect();
            let xr: Vec<f64> = x.iter().rev().copied().collect();
            prop_assert_eq!(kendall_tau_a(&xr, &rev).unwrap(), t);
        }
    }
}
