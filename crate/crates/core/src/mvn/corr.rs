use crate::error::{Error, Result};

/// PSD tolerance used by [`SmallCorrMatrix::new`].
pub const PSD_TOLERANCE: f64 = 1e-10;

/// A 2×2, 3×3 or 4×4 correlation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmallCorrMatrix {
    dim: usize,
    entries: [[f64; 4]; 4],
}

impl SmallCorrMatrix {
    /// Validates symmetry, unit diagonal, entry range and positive
    /// semi-definiteness (up to [`PSD_TOLERANCE`]).
    #[allow(clippy::needless_range_loop)]
    pub fn new<const D: usize>(rows: [[f64; D]; D]) -> Result<Self> {
        if !(2..=4).contains(&D) {
            return Err(Error::InvalidCorrelation(format!("dimension {D} is not in 2..=4")));
        }
        let mut entries = [[0.0; 4]; 4];
        for i in 0..D {
            for j in 0..D {
                let v = rows[i][j];
                if !v.is_finite() {
                    return Err(Error::InvalidCorrelation(format!("entry ({i}, {j}) is {v}")));
                }
                entries[i][j] = v;
            }
        }
        for i in 0..D {
            if entries[i][i] != 1.0 {
                return Err(Error::InvalidCorrelation(format!(
                    "diagonal entry {i} is {}",
                    entries[i][i]
                )));
            }
            for j in (i + 1)..D {
                if entries[i][j] != entries[j][i] {
                    return Err(Error::InvalidCorrelation(format!("not symmetric at ({i}, {j})")));
                }
                if entries[i][j].abs() > 1.0 {
                    return Err(Error::InvalidCorrelation(format!(
                        "entry ({i}, {j}) = {} outside [-1, 1]",
                        entries[i][j]
                    )));
                }
            }
        }
        let m = Self { dim: D, entries };
        let pivot = m.min_ldl_pivot();
        if pivot < -PSD_TOLERANCE {
            return Err(Error::InvalidCorrelation(format!(
                "not positive semi-definite (pivot {pivot:e})"
            )));
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    /// Smallest pivot of an LDLᵀ factorisation that treats tiny pivots as zero.
    fn min_ldl_pivot(&self) -> f64 {
        let n = self.dim;
        let mut l = [[0.0f64; 4]; 4];
        let mut d = [0.0f64; 4];
        let mut min_pivot = f64::INFINITY;
        for j in 0..n {
            let mut dj = self.entries[j][j];
            for k in 0..j {
                dj -= l[j][k] * l[j][k] * d[k];
            }
            d[j] = dj;
            min_pivot = min_pivot.min(dj);
            for i in (j + 1)..n {
                let mut v = self.entries[i][j];
                for k in 0..j {
                    v -= l[i][k] * l[j][k] * d[k];
                }
                l[i][j] = if dj > PSD_TOLERANCE { v / dj } else { 0.0 };
            }
        }
        min_pivot
    }

    pub(crate) fn sub<const D: usize>(&self, idx: [usize; D]) -> [[f64; D]; D] {
        let mut out = [[0.0; D]; D];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                out[a][b] = self.entries[i][j];
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_invalid() {
        assert!(SmallCorrMatrix::new([[1.0, 0.5], [0.4, 1.0]]).is_err());
        assert!(SmallCorrMatrix::new([[1.0, 1.5], [1.5, 1.0]]).is_err());
        assert!(SmallCorrMatrix::new([[0.9, 0.5], [0.5, 1.0]]).is_err());
        // pairwise-valid but indefinite
        let bad = [[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]];
        assert!(SmallCorrMatrix::new(bad).is_err());
        assert!(SmallCorrMatrix::new([[1.0, f64::NAN], [f64::NAN, 1.0]]).is_err());
    }

    #[test]
    fn accepts_singular_psd() {
        let m = SmallCorrMatrix::new([[1.0, 1.0, 0.3], [1.0, 1.0, 0.3], [0.3, 0.3, 1.0]]);
        assert!(m.is_ok());
        let id = SmallCorrMatrix::new([
            [1.0, 0.0, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert_eq!(id.dim(), 4);
    }
}
