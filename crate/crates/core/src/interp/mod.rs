//! Inverse-bridge lookup tables: grid construction, precomputation of
//! F⁻¹ on the grid, multilinear interpolation and a priori error bounds.
//!
//! A grid for a case with k thresholds is a (1 + k)-dimensional tensor
//! product of a τ axis and k Δ axes. Values are stored row-major with τ as
//! the slowest index.

use std::f64::consts::SQRT_2;
use std::fs;
use std::path::{Path, PathBuf};

use crate::bridge::{Bridge, CaseKind, ORG_TOLERANCE, R_MAX, R_MIN};
use crate::error::{Error, Result};
use crate::mvn::{phi, std_normal_quantile};
use crate::par::{self, Execution};

mod format;

pub use format::{deserialize_grid, serialize_grid, FORMAT_VERSION, MAGIC};

/// File name used for a case's grid inside a grid directory.
pub fn grid_file_name(case: CaseKind) -> String {
    format!("{}.lcg", case.as_str())
}

/// Number of points on each Δ axis.
pub const DELTA_AXIS_LEN: usize = 50;

/// A strictly increasing interpolation axis.
#[derive(Debug, Clone, PartialEq)]
pub struct GridAxis {
    points: Vec<f64>,
    h_max: f64,
}

impl GridAxis {
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("an axis needs at least two points"));
        }
        if points.iter().any(|p| !p.is_finite()) {
            return Err(Error::domain("axis points must be finite"));
        }
        let mut h_max: f64 = 0.0;
        for w in points.windows(2) {
            if w[1] <= w[0] {
                return Err(Error::domain(format!(
                    "axis not strictly increasing at {} -> {}",
                    w[0], w[1]
                )));
            }
            h_max = h_max.max(w[1] - w[0]);
        }
        Ok(Self { points, h_max })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Largest spacing between adjacent points.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn min(&self) -> f64 {
        self.points[0]
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min() && x <= self.max()
    }

    /// Lower cell index `i` and weight `α = (x - pᵢ)/(pᵢ₊₁ - pᵢ)`, or `None`
    /// when `x` lies outside the axis.
    pub fn locate(&self, x: f64) -> Option<(usize, f64)> {
        if !self.contains(x) {
            return None;
        }
        let p = &self.points;
        let i = p.partition_point(|&v| v <= x).saturating_sub(1).min(p.len() - 2);
        Some((i, (x - p[i]) / (p[i + 1] - p[i])))
    }
}

/// Which variable type a Δ axis discretizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AxisKind {
    Truncated,
    Binary,
}

/// Δ axes used by `case`, in bridge argument order.
pub fn delta_axis_kinds(case: CaseKind) -> &'static [AxisKind] {
    use AxisKind::*;
    match case {
        CaseKind::CC => &[],
        CaseKind::BC => &[Binary],
        CaseKind::BB => &[Binary, Binary],
        CaseKind::TC => &[Truncated],
        CaseKind::TT => &[Truncated, Truncated],
        CaseKind::TB => &[Truncated, Binary],
    }
}

/// τ axis: step 0.01 on [-0.99, 0.99] for TC/TT; for BC/BB/TB a mirrored
/// axis that is denser near zero and stops at ±0.5.
pub fn build_tau_axis(case: CaseKind) -> Result<GridAxis> {
    let points = match case {
        CaseKind::CC => return Err(Error::NoGridForCase(case)),
        CaseKind::TC | CaseKind::TT => (-99..=99).map(|k| k as f64 / 100.0).collect(),
        CaseKind::BC | CaseKind::BB | CaseKind::TB => {
            let half: Vec<f64> = (0..19)
                .map(|k| (1 + 5 * k) as f64 / 1000.0)
                .chain((0..58).map(|k| (101 + 7 * k) as f64 / 1000.0))
                .collect();
            half.iter()
                .rev()
                .map(|t| -t)
                .chain(std::iter::once(0.0))
                .chain(half.iter().copied())
                .collect()
        }
    };
    GridAxis::new(points)
}

/// Zero proportions underlying a Δ axis.
///
/// The truncated sequence log10(1 + k·(10^0.99 − 1)/49) starts at π₀ = 0,
/// whose threshold is −∞; that first node is replaced by half of the second
/// node's π₀ (see [`truncated_floor_pi0`]).
pub fn axis_zero_proportions(kind: AxisKind) -> Vec<f64> {
    let n = DELTA_AXIS_LEN;
    match kind {
        AxisKind::Binary => (0..n).map(|k| 0.01 + k as f64 * (0.98 / (n - 1) as f64)).collect(),
        AxisKind::Truncated => {
            let top = 10f64.powf(0.99);
            let by = (top - 1.0) / (n - 1) as f64;
            let mut pi0: Vec<f64> = (0..n).map(|k| (1.0 + k as f64 * by).log10()).collect();
            pi0[0] = 0.5 * pi0[1];
            pi0
        }
    }
}

/// π₀ used for the first node of a truncated Δ axis.
pub fn truncated_floor_pi0() -> f64 {
    axis_zero_proportions(AxisKind::Truncated)[0]
}

/// Δ axis for a truncated or binary variable, in Φ⁻¹(π₀) coordinates.
pub fn build_delta_axis(kind: AxisKind) -> GridAxis {
    let points = axis_zero_proportions(kind)
        .into_iter()
        .map(|p| std_normal_quantile(p).expect("axis proportions lie in (0, 1)"))
        .collect();
    GridAxis::new(points).expect("quantiles of an increasing sequence increase")
}

/// Provenance stored with a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridMeta {
    pub version: u8,
    /// Convergence tolerance of the inversions that produced the values.
    pub tolerance: f64,
    /// π₀ of the first truncated-axis node, when the grid has such an axis.
    pub truncated_floor_pi0: Option<f64>,
}

/// Precomputed F⁻¹ values on a τ × Δ (× Δ) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationGrid {
    case: CaseKind,
    tau_axis: GridAxis,
    delta_axes: Vec<GridAxis>,
    values: Vec<f64>,
    meta: GridMeta,
}

impl InterpolationGrid {
    /// Assembles a grid from its parts, checking shapes.
    pub fn from_parts(
        case: CaseKind,
        tau_axis: GridAxis,
        delta_axes: Vec<GridAxis>,
        values: Vec<f64>,
        meta: GridMeta,
    ) -> Result<Self> {
        if case == CaseKind::CC {
            return Err(Error::NoGridForCase(case));
        }
        if delta_axes.len() != case.delta_count() {
            return Err(Error::domain(format!(
                "case {case} needs {} delta axes, got {}",
                case.delta_count(),
                delta_axes.len()
            )));
        }
        let expected = tau_axis.len() * delta_axes.iter().map(GridAxis::len).product::<usize>();
        if values.len() != expected {
            return Err(Error::domain(format!(
                "expected {expected} grid values, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("grid values must be finite"));
        }
        Ok(Self {
            case,
            tau_axis,
            delta_axes,
            values,
            meta,
        })
    }

    pub fn case(&self) -> CaseKind {
        self.case
    }

    pub fn tau_axis(&self) -> &GridAxis {
        &self.tau_axis
    }

    pub fn delta_axes(&self) -> &[GridAxis] {
        &self.delta_axes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn meta(&self) -> &GridMeta {
        &self.meta
    }

    /// Writes the grid to `path` through a temporary file and a rename, so
    /// readers never observe a partial file.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut tmp = path.as_os_str().to_owned();
        tmp.push(format!(".tmp{}", std::process::id()));
        let tmp = PathBuf::from(tmp);
        fs::write(&tmp, format::to_bytes(self)).map_err(|e| Error::io(&tmp, e))?;
        fs::rename(&tmp, path).map_err(|e| {
            let _ = fs::remove_file(&tmp);
            Error::io(path, e)
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        format::from_bytes(&bytes)
    }

    /// Row-major strides for (τ, Δ₁[, Δ₂]).
    fn strides(&self) -> [usize; 3] {
        let n1 = self.delta_axes.first().map_or(1, GridAxis::len);
        let n2 = self.delta_axes.get(1).map_or(1, GridAxis::len);
        [n1 * n2, n2, 1]
    }

    /// Stored value at a node.
    pub fn node(&self, tau_index: usize, delta_indices: &[usize]) -> f64 {
        let s = self.strides();
        let mut k = tau_index * s[0];
        for (d, &i) in delta_indices.iter().enumerate() {
            k += i * s[d + 1];
        }
        self.values[k]
    }

    /// Whether `(tau, deltas)` lies inside every axis.
    pub fn in_hull(&self, tau: f64, deltas: &[f64]) -> bool {
        deltas.len() == self.delta_axes.len()
            && self.tau_axis.contains(tau)
            && self.delta_axes.iter().zip(deltas).all(|(a, &d)| a.contains(d))
    }

    /// Multilinear interpolation at `(tau, deltas)`, clamped to [-1, 1].
    /// `None` when the query is outside the grid hull.
    pub fn interpolate(&self, tau: f64, deltas: &[f64]) -> Option<f64> {
        if deltas.len() != self.delta_axes.len() {
            return None;
        }
        let dims = 1 + deltas.len();
        let mut cell = [(0usize, 0.0f64); 3];
        cell[0] = self.tau_axis.locate(tau)?;
        for (d, (axis, &x)) in self.delta_axes.iter().zip(deltas).enumerate() {
            cell[d + 1] = axis.locate(x)?;
        }
        let strides = self.strides();
        let base: usize = (0..dims).map(|d| cell[d].0 * strides[d]).sum();
        let mut acc = 0.0;
        for corner in 0..(1usize << dims) {
            let mut w = 1.0;
            let mut k = base;
            for (d, &(_, alpha)) in cell.iter().enumerate().take(dims) {
                if corner >> d & 1 == 1 {
                    w *= alpha;
                    k += strides[d];
                } else {
                    w *= 1.0 - alpha;
                }
            }
            if w != 0.0 {
                acc += w * self.values[k];
            }
        }
        Some(acc.clamp(-1.0, 1.0))
    }
}

/// Free-function form of [`InterpolationGrid::interpolate`].
pub fn multilinear_interpolate(grid: &InterpolationGrid, tau: f64, deltas: &[f64]) -> Option<f64> {
    grid.interpolate(tau, deltas)
}

/// Inverts the bridge function at every grid node.
///
/// Work is split over Δ cells; within a cell the attainable τ range is
/// evaluated once so that τ nodes beyond it map directly to the saturated
/// end. BB and TT are symmetric in their thresholds, so only the upper
/// triangle of Δ cells is solved and mirrored.
pub fn precompute_grid(case: CaseKind, exec: Execution) -> Result<InterpolationGrid> {
    let tau_axis = build_tau_axis(case)?;
    let kinds = delta_axis_kinds(case);
    let delta_axes: Vec<GridAxis> = kinds.iter().map(|&k| build_delta_axis(k)).collect();
    let n1 = delta_axes[0].len();
    let n2 = delta_axes.get(1).map_or(1, GridAxis::len);
    let symmetric = matches!(case, CaseKind::BB | CaseKind::TT);
    let cells: Vec<(usize, usize)> = (0..n1)
        .flat_map(|m| (0..n2).map(move |q| (m, q)))
        .filter(|&(m, q)| !symmetric || m <= q)
        .collect();

    let columns = par::map(exec, &cells, |&(m, q)| -> Result<Vec<f64>> {
        let indices: Vec<usize> = [m, q][..kinds.len()].to_vec();
        let deltas: Vec<f64> = indices.iter().zip(&delta_axes).map(|(&i, a)| a.points()[i]).collect();
        let bridge = Bridge::new(case, &deltas)?;
        let range = bridge.attainable_range();
        tau_axis
            .points()
            .iter()
            .enumerate()
            .map(|(t, &tau)| {
                bridge
                    .invert_within(tau, range)
                    .map(|s| s.r.clamp(R_MIN, R_MAX))
                    .map_err(|e| Error::GridPoint {
                        tau_index: t,
                        delta_indices: indices.clone(),
                        source: Box::new(e),
                    })
            })
            .collect()
    });

    let nt = tau_axis.len();
    let mut values = vec![0.0; nt * n1 * n2];
    for (&(m, q), column) in cells.iter().zip(columns) {
        let column = column?;
        for (t, v) in column.into_iter().enumerate() {
            values[t * n1 * n2 + m * n2 + q] = v;
            if symmetric {
                values[t * n1 * n2 + q * n2 + m] = v;
            }
        }
    }
    let meta = GridMeta {
        version: FORMAT_VERSION,
        tolerance: ORG_TOLERANCE,
        truncated_floor_pi0: kinds.contains(&AxisKind::Truncated).then(truncated_floor_pi0),
    };
    InterpolationGrid::from_parts(case, tau_axis, delta_axes, values, meta)
}

/// A priori bound on |ML − F⁻¹| for BC and TC grids with spacing `h`,
/// thresholds bounded by `m` and latent correlation `r`:
///
/// * BC: 2h²|r|(2M² + 1)·exp(M²)
/// * TC: 4h²/Φ(−√2M)² · max(|r|/Φ(−√2M), √(1 − r²))
pub fn interpolation_error_bound(case: CaseKind, h: f64, m: f64, r: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::domain(format!("grid spacing {h} must be positive")));
    }
    if !m.is_finite() {
        return Err(Error::domain("threshold bound must be finite"));
    }
    if r.is_nan() || r.abs() > 1.0 {
        return Err(Error::domain(format!("latent correlation {r} outside [-1, 1]")));
    }
    let h2 = h * h;
    match case {
        CaseKind::BC => Ok(2.0 * h2 * r.abs() * (2.0 * m * m + 1.0) * (m * m).exp()),
        CaseKind::TC => {
            let q = tail_mass(m);
            Ok(4.0 * h2 / (q * q) * (r.abs() / q).max((1.0 - r * r).sqrt()))
        }
        other => Err(Error::domain(format!("no interpolation error bound for case {other}"))),
    }
}

/// Φ(−√2·M), the quantity controlling the TC bound.
pub fn tail_mass(m: f64) -> f64 {
    phi(-SQRT_2 * m)
}
