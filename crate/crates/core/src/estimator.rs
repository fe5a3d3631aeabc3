//! Pairwise latent correlation estimation and matrix assembly.
//!
//! Each pair is classified into one of the six bridge cases, reordered into
//! the bridge's argument order, and inverted with one of three methods:
//!
//! * ORG: bounded minimization of (F(r) − τ̂)²;
//! * ML: multilinear interpolation on a precomputed grid;
//! * MLBD: ML when |τ̂| ≤ c·ABD, ORG otherwise (c = 0.9 by default).
//!
//! CC pairs always use the closed-form inverse sin(πτ̂/2).

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::bridge::{cc_inverse_closed, Bridge, CaseKind};
use crate::error::{Error, Result};
use crate::interp::{grid_file_name, InterpolationGrid};
use crate::kendall::PairStatistics;
use crate::par::{self, Execution};

/// Observed data type of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum VariableType {
    Continuous,
    Binary,
    Truncated,
}

impl VariableType {
    pub fn as_str(self) -> &'static str {
        match self {
            VariableType::Continuous => "continuous",
            VariableType::Binary => "binary",
            VariableType::Truncated => "truncated",
        }
    }
}

impl fmt::Display for VariableType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for VariableType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "continuous" | "con" | "c" => Ok(VariableType::Continuous),
            "binary" | "bin" | "b" => Ok(VariableType::Binary),
            "truncated" | "trunc" | "t" => Ok(VariableType::Truncated),
            other => Err(Error::Input(format!("unknown variable type '{other}'"))),
        }
    }
}

/// Inversion method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimationMethod {
    Org,
    Ml,
    Mlbd,
}

impl EstimationMethod {
    pub const ALL: [EstimationMethod; 3] = [EstimationMethod::Org, EstimationMethod::Ml, EstimationMethod::Mlbd];

    pub fn as_str(self) -> &'static str {
        match self {
            EstimationMethod::Org => "org",
            EstimationMethod::Ml => "ml",
            EstimationMethod::Mlbd => "mlbd",
        }
    }
}

impl fmt::Display for EstimationMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.as_str().to_ascii_uppercase())
    }
}

impl FromStr for EstimationMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimationMethod::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Input(format!("unknown method '{s}'")))
    }
}

/// How a pair's estimate was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    /// CC pair, closed-form inverse.
    ClosedForm,
    /// ORG requested.
    Org,
    /// Grid interpolation.
    Interpolated,
    /// MLBD with |τ̂| above the boundary, solved by ORG.
    BoundaryFallback,
    /// Query outside the grid hull, solved by ORG.
    HullFallback,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::ClosedForm => "closed",
            Route::Org => "org",
            Route::Interpolated => "ml",
            Route::BoundaryFallback => "org-boundary",
            Route::HullFallback => "org-hull",
        }
    }
}

/// Inversion actually used for a pair: ORG or ML. The CC closed form is the
/// exact inverse and counts as ORG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodUsed {
    Org,
    Ml,
}

/// Estimate for one pair of columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEstimate {
    pub r_hat: f64,
    /// Case after downgrading truncated columns without zeros.
    pub case: CaseKind,
    pub route: Route,
    /// ORG hit an end of the search interval because τ̂ was unattainable.
    pub saturated: bool,
    /// Statistics in the caller's (x, y) order.
    pub stats: PairStatistics,
}

impl PairEstimate {
    pub fn method_used(&self) -> MethodUsed {
        match self.route {
            Route::Interpolated => MethodUsed::Ml,
            _ => MethodUsed::Org,
        }
    }

    /// Short provenance label, e.g. `ml`, `org-boundary`, `org+sat`.
    pub fn label(&self) -> String {
        let mut s = self.route.as_str().to_owned();
        if self.saturated {
            s.push_str("+sat");
        }
        s
    }
}

/// Maps a pair of column types to its bridge case; `swap` is set when the
/// second column takes the first argument role.
pub fn classify_pair(a: VariableType, b: VariableType) -> (CaseKind, bool) {
    use VariableType::*;
    match (a, b) {
        (Continuous, Continuous) => (CaseKind::CC, false),
        (Binary, Continuous) => (CaseKind::BC, false),
        (Continuous, Binary) => (CaseKind::BC, true),
        (Binary, Binary) => (CaseKind::BB, false),
        (Truncated, Continuous) => (CaseKind::TC, false),
        (Continuous, Truncated) => (CaseKind::TC, true),
        (Truncated, Truncated) => (CaseKind::TT, false),
        (Truncated, Binary) => (CaseKind::TB, false),
        (Binary, Truncated) => (CaseKind::TB, true),
    }
}

/// Approximate bound on |τ̂| given zero proportions, in the case's argument
/// order (for TB the first proportion is the truncated variable's).
pub fn abd(case: CaseKind, pi0_x: f64, pi0_y: f64) -> f64 {
    match case {
        CaseKind::CC => 1.0,
        CaseKind::TC => 1.0 - pi0_x * pi0_x,
        CaseKind::TT => 1.0 - pi0_x.max(pi0_y).powi(2),
        CaseKind::BC => 2.0 * pi0_x * (1.0 - pi0_x),
        CaseKind::BB => 2.0 * pi0_x.min(pi0_y) * (1.0 - pi0_x.max(pi0_y)),
        CaseKind::TB => {
            let m = pi0_y.max(1.0 - pi0_y);
            2.0 * m * (1.0 - m.max(pi0_x))
        }
    }
}

/// Default boundary constant c in |τ̂| ≤ c·ABD.
pub const DEFAULT_BOUNDARY_CONSTANT: f64 = 0.9;

/// Boundary constant with optional per-case overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryConstants {
    pub default: f64,
    pub overrides: BTreeMap<CaseKind, f64>,
}

impl Default for BoundaryConstants {
    fn default() -> Self {
        Self::uniform(DEFAULT_BOUNDARY_CONSTANT)
    }
}

impl BoundaryConstants {
    pub fn uniform(c: f64) -> Self {
        Self {
            default: c,
            overrides: BTreeMap::new(),
        }
    }

    pub fn with_override(mut self, case: CaseKind, c: f64) -> Self {
        self.overrides.insert(case, c);
        self
    }

    pub fn get(&self, case: CaseKind) -> f64 {
        self.overrides.get(&case).copied().unwrap_or(self.default)
    }
}

/// What to do when a pair fails in [`estimate_matrix`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorPolicy {
    #[default]
    Abort,
    /// Record NaN for the pair and keep going.
    MarkMissing,
}

/// Estimation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub method: EstimationMethod,
    pub boundary: BoundaryConstants,
    pub on_error: ErrorPolicy,
    pub execution: Execution,
}

impl EstimatorConfig {
    pub fn new(method: EstimationMethod) -> Self {
        Self {
            method,
            boundary: BoundaryConstants::default(),
            on_error: ErrorPolicy::Abort,
            execution: Execution::Parallel,
        }
    }
}

/// Interpolation grids by case.
#[derive(Debug, Clone, Default)]
pub struct GridSet {
    grids: BTreeMap<CaseKind, Arc<InterpolationGrid>>,
}

impl GridSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, grid: impl Into<Arc<InterpolationGrid>>) {
        let grid = grid.into();
        self.grids.insert(grid.case(), grid);
    }

    pub fn with(mut self, grid: impl Into<Arc<InterpolationGrid>>) -> Self {
        self.insert(grid);
        self
    }

    pub fn get(&self, case: CaseKind) -> Option<&InterpolationGrid> {
        self.grids.get(&case).map(Arc::as_ref)
    }

    pub fn contains(&self, case: CaseKind) -> bool {
        self.grids.contains_key(&case)
    }

    /// Loads `<case>.lcg` from `dir` for each requested case.
    pub fn load_dir(dir: impl AsRef<Path>, cases: impl IntoIterator<Item = CaseKind>) -> Result<Self> {
        let mut set = Self::new();
        for case in cases {
            if case == CaseKind::CC {
                continue;
            }
            let path = dir.as_ref().join(grid_file_name(case));
            if !path.exists() {
                return Err(Error::MissingGrid(case));
            }
            let grid = InterpolationGrid::load(&path)?;
            if grid.case() != case {
                return Err(Error::Format {
                    offset: 5,
                    reason: format!("{} holds a {} grid", path.display(), grid.case()),
                });
            }
            set.insert(grid);
        }
        Ok(set)
    }
}

fn check_column(values: &[f64], ty: VariableType, name: &str) -> Result<VariableType> {
    let degenerate = |reason: &str| Error::DegenerateVariable {
        column: name.to_owned(),
        reason: reason.to_owned(),
    };
    if values.is_empty() {
        return Err(Error::Input(format!("column '{name}' is empty")));
    }
    let non_finite = |v: f64| Error::Input(format!("column '{name}' contains non-finite value {v}"));
    match ty {
        VariableType::Continuous => match values.iter().find(|v| !v.is_finite()) {
            Some(&v) => Err(non_finite(v)),
            None => Ok(ty),
        },
        VariableType::Binary => {
            let mut ones = 0usize;
            for &v in values {
                if v == 1.0 {
                    ones += 1;
                } else if v != 0.0 {
                    return Err(if v.is_finite() {
                        Error::Input(format!("binary column '{name}' contains {v}"))
                    } else {
                        non_finite(v)
                    });
                }
            }
            if ones == 0 || ones == values.len() {
                return Err(degenerate("binary column takes a single value"));
            }
            Ok(ty)
        }
        VariableType::Truncated => {
            let mut zeros = 0usize;
            for &v in values {
                if !v.is_finite() {
                    return Err(non_finite(v));
                }
                if v < 0.0 {
                    return Err(Error::Input(format!(
                        "truncated column '{name}' contains negative value {v}"
                    )));
                }
                zeros += usize::from(v == 0.0);
            }
            if zeros == values.len() {
                return Err(degenerate("every value is zero"));
            }
            // no zeros: the threshold is at −∞ and the column is continuous
            if zeros == 0 {
                return Ok(VariableType::Continuous);
            }
            Ok(ty)
        }
    }
}

/// Threshold and zero proportion of one side, in role order.
#[derive(Clone, Copy)]
struct Side {
    pi0: f64,
    delta: f64,
}

/// Estimates the latent correlation of columns `x` and `y`.
pub fn estimate_pair(
    x: &[f64],
    y: &[f64],
    types: (VariableType, VariableType),
    config: &EstimatorConfig,
    grids: &GridSet,
) -> Result<PairEstimate> {
    let tx = check_column(x, types.0, "x")?;
    let ty = check_column(y, types.1, "y")?;
    let stats = PairStatistics::compute_finite(x, y)?;
    estimate_from_stats(stats, (tx, ty), config, grids)
}

/// Estimate from precomputed statistics; `types` must already have
/// truncated columns without zeros downgraded to continuous.
pub fn estimate_from_stats(
    stats: PairStatistics,
    types: (VariableType, VariableType),
    config: &EstimatorConfig,
    grids: &GridSet,
) -> Result<PairEstimate> {
    let (case, swap) = classify_pair(types.0, types.1);
    let tau = stats.tau_hat;
    let done = |r_hat, route, saturated| PairEstimate {
        r_hat,
        case,
        route,
        saturated,
        stats,
    };
    if case == CaseKind::CC {
        return Ok(done(cc_inverse_closed(tau), Route::ClosedForm, false));
    }

    let sx = Side {
        pi0: stats.pi0_x,
        delta: stats.delta_x,
    };
    let sy = Side {
        pi0: stats.pi0_y,
        delta: stats.delta_y,
    };
    let (mut first, mut second) = if swap { (sy, sx) } else { (sx, sy) };
    // symmetric cases: fixed order so that column order never changes bits
    if matches!(case, CaseKind::BB | CaseKind::TT) && second.delta < first.delta {
        std::mem::swap(&mut first, &mut second);
    }
    let deltas_buf = [first.delta, second.delta];
    let deltas = &deltas_buf[..case.delta_count()];

    let org = |route| -> Result<PairEstimate> {
        let s = Bridge::new(case, deltas)?.invert(tau)?;
        Ok(done(s.r, route, s.saturated))
    };
    let ml = || -> Result<PairEstimate> {
        let grid = grids.get(case).ok_or(Error::MissingGrid(case))?;
        match grid.interpolate(tau, deltas) {
            Some(r) => Ok(done(r, Route::Interpolated, false)),
            None => org(Route::HullFallback),
        }
    };
    match config.method {
        EstimationMethod::Org => org(Route::Org),
        EstimationMethod::Ml => ml(),
        EstimationMethod::Mlbd => {
            let bound = config.boundary.get(case) * abd(case, first.pi0, second.pi0);
            if tau.abs() <= bound {
                ml()
            } else {
                // still require the grid so a missing file is reported consistently
                grids.get(case).ok_or(Error::MissingGrid(case))?;
                org(Route::BoundaryFallback)
            }
        }
    }
}

/// Named columns of equal length.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub columns: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Vec<f64>>) -> Result<Self> {
        if names.len() != columns.len() {
            return Err(Error::Input(format!(
                "{} names for {} columns",
                names.len(),
                columns.len()
            )));
        }
        if let Some(first) = columns.first() {
            if let Some((i, c)) = columns.iter().enumerate().find(|(_, c)| c.len() != first.len()) {
                return Err(Error::Input(format!(
                    "column '{}' has {} rows, expected {}",
                    names[i],
                    c.len(),
                    first.len()
                )));
            }
        }
        Ok(Self { names, columns })
    }

    /// Columns named `v1`, `v2`, ...
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let names = (1..=columns.len()).map(|i| format!("v{i}")).collect();
        Self::new(names, columns)
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }
}

/// Type of each column from its values: binary if it takes exactly the
/// values 0 and 1; truncated if non-negative with a zero and at least two
/// distinct non-zero values; continuous otherwise.
pub fn infer_types(data: &Dataset) -> Result<Vec<VariableType>> {
    data.columns
        .iter()
        .zip(&data.names)
        .map(|(col, name)| {
            if col.is_empty() {
                return Err(Error::Input(format!("column '{name}' is empty")));
            }
            let zero = col.contains(&0.0);
            let one = col.contains(&1.0);
            if zero && one && col.iter().all(|&v| v == 0.0 || v == 1.0) {
                return Ok(VariableType::Binary);
            }
            if zero && col.iter().all(|&v| v >= 0.0) {
                let mut nz: Vec<f64> = col.iter().copied().filter(|&v| v != 0.0).collect();
                nz.sort_by(f64::total_cmp);
                nz.dedup();
                if nz.len() >= 2 {
                    return Ok(VariableType::Truncated);
                }
            }
            Ok(VariableType::Continuous)
        })
        .collect()
}

/// Result for one off-diagonal entry.
#[derive(Debug, Clone, PartialEq)]
pub enum PairOutcome {
    Estimated(PairEstimate),
    Missing(String),
}

/// Symmetric latent correlation matrix with per-entry provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCorrelationMatrix {
    names: Vec<String>,
    values: Vec<f64>,
    /// Upper triangle in row-major order.
    pairs: Vec<PairOutcome>,
}

impl LatentCorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.dim() + j]
    }

    /// Row-major entries.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn pair_index(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        let p = self.dim();
        i * (2 * p - i - 1) / 2 + (j - i - 1)
    }

    /// Outcome for an off-diagonal entry, `None` on the diagonal.
    pub fn outcome(&self, i: usize, j: usize) -> Option<&PairOutcome> {
        (i != j).then(|| &self.pairs[self.pair_index(i, j)])
    }

    /// Provenance label of an entry: `diag`, `missing` or a [`PairEstimate::label`].
    pub fn label(&self, i: usize, j: usize) -> String {
        match self.outcome(i, j) {
            None => "diag".to_owned(),
            Some(PairOutcome::Missing(_)) => "missing".to_owned(),
            Some(PairOutcome::Estimated(e)) => e.label(),
        }
    }

    pub fn pair_estimates(&self) -> impl Iterator<Item = (usize, usize, &PairOutcome)> {
        let p = self.dim();
        (0..p)
            .flat_map(move |i| ((i + 1)..p).map(move |j| (i, j)))
            .zip(&self.pairs)
            .map(|((i, j), o)| (i, j, o))
    }
}

/// Estimates every pair of columns. Pairs are independent and may run in
/// parallel; the result does not depend on scheduling.
pub fn estimate_matrix(
    data: &Dataset,
    types: &[VariableType],
    config: &EstimatorConfig,
    grids: &GridSet,
) -> Result<LatentCorrelationMatrix> {
    let p = data.dim();
    if p < 2 {
        return Err(Error::Input("need at least two columns".into()));
    }
    if types.len() != p {
        return Err(Error::Input(format!("{} types for {p} columns", types.len())));
    }
    if data.rows() < 2 {
        return Err(Error::Input("need at least two rows".into()));
    }
    if config.on_error == ErrorPolicy::Abort {
        effective_types(data, types)?;
    }
    let checked: Vec<Result<VariableType>> = data
        .columns
        .iter()
        .zip(types)
        .zip(&data.names)
        .map(|((c, &t), name)| check_column(c, t, name))
        .collect();

    let index: Vec<(usize, usize)> = (0..p).flat_map(|i| ((i + 1)..p).map(move |j| (i, j))).collect();
    let results = par::map(config.execution, &index, |&(i, j)| {
        let (ti, tj) = match (&checked[i], &checked[j]) {
            (Ok(a), Ok(b)) => (*a, *b),
            (Err(e), _) | (_, Err(e)) => return Err(Error::Input(e.to_string())),
        };
        PairStatistics::compute_finite(&data.columns[i], &data.columns[j])
            .and_then(|s| estimate_from_stats(s, (ti, tj), config, grids))
    });

    let mut values = vec![0.0; p * p];
    let mut pairs = Vec::with_capacity(index.len());
    for (&(i, j), res) in index.iter().zip(results) {
        let (v, outcome) = match res {
            Ok(e) => (e.r_hat, PairOutcome::Estimated(e)),
            Err(e) if config.on_error == ErrorPolicy::MarkMissing && !matches!(e, Error::MissingGrid(_)) => {
                (f64::NAN, PairOutcome::Missing(e.to_string()))
            }
            Err(e) => {
                return Err(Error::Pair {
                    row: i,
                    col: j,
                    source: Box::new(e),
                })
            }
        };
        values[i * p + j] = v;
        values[j * p + i] = v;
        pairs.push(outcome);
    }
    for i in 0..p {
        values[i * p + i] = 1.0;
    }
    Ok(LatentCorrelationMatrix {
        names: data.names.clone(),
        values,
        pairs,
    })
}

/// Column types after validation, with truncated columns that have no
/// zeros treated as continuous.
pub fn effective_types(data: &Dataset, types: &[VariableType]) -> Result<Vec<VariableType>> {
    if types.len() != data.dim() {
        return Err(Error::Input(format!(
            "{} types for {} columns",
            types.len(),
            data.dim()
        )));
    }
    data.columns
        .iter()
        .zip(types)
        .zip(&data.names)
        .map(|((c, &t), name)| check_column(c, t, name))
        .collect()
}

/// Cases needed to estimate all pairs of the given column types.
pub fn required_cases(types: &[VariableType]) -> Vec<CaseKind> {
    let mut cases: Vec<CaseKind> = Vec::new();
    for (i, &a) in types.iter().enumerate() {
        for &b in &types[i + 1..] {
            let (c, _) = classify_pair(a, b);
            if c != CaseKind::CC && !cases.contains(&c) {
                cases.push(c);
            }
        }
    }
    cases.sort();
    cases
}
