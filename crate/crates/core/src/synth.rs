//! Synthetic latent-model data and the accuracy / timing experiments.
//!
//! Random streams come from ChaCha20 (`rand_chacha`), keyed by
//! `ChaCha20Rng::seed_from_u64(seed)` with the stream id set to the
//! replication index. Normal deviates use the ziggurat sampler of
//! `rand_distr::StandardNormal`; each row draws z₁ then z₂, and the pair is
//! x = z₁, y = r·z₁ + √(1 − r²)·z₂.

use std::fmt::Write as _;
use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::bridge::CaseKind;
use crate::error::{Error, Result};
use crate::estimator::{
    estimate_from_stats, estimate_pair, EstimationMethod, EstimatorConfig, GridSet, Route, VariableType,
};
use crate::kendall::PairStatistics;
use crate::par::{self, Execution};

/// Name of the generator, reported alongside results.
pub const GENERATOR: &str = "ChaCha20 (rand_chacha 0.3, seed_from_u64, stream = replication) + ziggurat normals";

/// Latent correlations of the accuracy sweep: 9 values from 0.05 to 0.91.
pub fn sweep_correlations() -> Vec<f64> {
    (0..9).map(|k| 0.05 + k as f64 * (0.86 / 8.0)).collect()
}

/// Zero proportions of the accuracy sweep: 11 values from 0.03 to 0.95.
pub fn sweep_zero_proportions() -> Vec<f64> {
    (0..11).map(|k| 0.03 + k as f64 * (0.92 / 10.0)).collect()
}

/// Default zero proportion of the second variable given the first one's.
pub fn default_second_pi0(case: CaseKind, pi0: f64) -> f64 {
    match case {
        CaseKind::TT => pi0 / 2.0,
        _ => 0.5,
    }
}

/// One simulation scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub case: CaseKind,
    pub r: f64,
    /// Zero proportions of the non-continuous variables, in case order.
    pub pi0: Vec<f64>,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    /// Scenario with the second zero proportion (if any) at its default.
    pub fn new(case: CaseKind, r: f64, pi0: f64, n: usize, replications: usize, seed: u64) -> Self {
        let pi0 = match case.delta_count() {
            0 => vec![],
            1 => vec![pi0],
            _ => vec![pi0, default_second_pi0(case, pi0)],
        };
        Self {
            case,
            r,
            pi0,
            n,
            replications,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.r.is_nan() || self.r.abs() >= 1.0 {
            return Err(Error::Input(format!(
                "latent correlation {} must lie in (-1, 1)",
                self.r
            )));
        }
        if self.pi0.len() != self.case.delta_count() {
            return Err(Error::Input(format!(
                "case {} takes {} zero proportion(s), got {}",
                self.case,
                self.case.delta_count(),
                self.pi0.len()
            )));
        }
        if let Some(p) = self.pi0.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::Input(format!("zero proportion {p} must lie in (0, 1)")));
        }
        if self.n < 10 {
            return Err(Error::Input(format!("sample size {} is below 10", self.n)));
        }
        if self.replications == 0 {
            return Err(Error::Input("at least one replication is required".into()));
        }
        Ok(())
    }

    /// Column types in case order.
    pub fn types(&self) -> (VariableType, VariableType) {
        use VariableType::*;
        match self.case {
            CaseKind::CC => (Continuous, Continuous),
            CaseKind::BC => (Binary, Continuous),
            CaseKind::BB => (Binary, Binary),
            CaseKind::TC => (Truncated, Continuous),
            CaseKind::TT => (Truncated, Truncated),
            CaseKind::TB => (Truncated, Binary),
        }
    }

    /// Observed pair for one replication.
    pub fn generate(&self, replication: usize) -> (Vec<f64>, Vec<f64>) {
        let (x, y) = generate_latent_pair_stream(self.n, self.r, self.seed, replication as u64);
        let (tx, ty) = self.types();
        let pi0 = |i: usize| self.pi0.get(i).copied().unwrap_or(0.0);
        (transform(x, tx, pi0(0)), transform(y, ty, pi0(1)))
    }
}

fn transform(v: Vec<f64>, ty: VariableType, pi0: f64) -> Vec<f64> {
    match ty {
        VariableType::Continuous => v,
        VariableType::Binary => apply_dichotomization(&v, pi0),
        VariableType::Truncated => apply_truncation(&v, pi0),
    }
}

/// n draws of a standard bivariate normal with correlation `r`, stream 0.
pub fn generate_latent_pair(n: usize, r: f64, seed: u64) -> (Vec<f64>, Vec<f64>) {
    generate_latent_pair_stream(n, r, seed, 0)
}

/// [`generate_latent_pair`] on an explicit ChaCha20 stream.
pub fn generate_latent_pair_stream(n: usize, r: f64, seed: u64, stream: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let c = (1.0 - r * r).sqrt();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let z2: f64 = StandardNormal.sample(&mut rng);
        x.push(z1);
        y.push(r * z1 + c * z2);
    }
    (x, y)
}

/// k-th smallest value (1-based), k = round(n·π₀); `None` when k = 0.
fn order_statistic(x: &[f64], pi0: f64) -> Option<f64> {
    let k = (x.len() as f64 * pi0).round() as usize;
    if k == 0 {
        return None;
    }
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    Some(s[k.min(s.len()) - 1])
}

/// Shifts `x` down by its type-1 π₀-quantile and zeroes the non-positive
/// part, giving round(n·π₀) zeros for tie-free input. Kept values are
/// positive and keep their order.
pub fn apply_truncation(x: &[f64], pi0: f64) -> Vec<f64> {
    let q = match order_statistic(x, pi0) {
        Some(q) => q,
        // no zeros wanted: shift everything above zero
        None => x.iter().copied().fold(f64::INFINITY, f64::min) - 1.0,
    };
    x.iter().map(|&v| if v > q { v - q } else { 0.0 }).collect()
}

/// 1 where `x` exceeds its type-1 π₀-quantile, 0 elsewhere.
pub fn apply_dichotomization(x: &[f64], pi0: f64) -> Vec<f64> {
    match order_statistic(x, pi0) {
        Some(q) => x.iter().map(|&v| if v > q { 1.0 } else { 0.0 }).collect(),
        None => vec![1.0; x.len()],
    }
}

/// Errors of ML and MLBD against ORG over the replications of one scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCell {
    pub case: CaseKind,
    pub r: f64,
    pub pi0: Vec<f64>,
    pub ml_max: f64,
    pub ml_mean: f64,
    pub mlbd_max: f64,
    pub mlbd_mean: f64,
    /// Replications where MLBD fell back to ORG at the boundary.
    pub boundary_active: usize,
    /// Replications where the query left the grid hull.
    pub hull_fallbacks: usize,
    pub replications: usize,
}

/// Accuracy results for one or more scenarios.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyReport {
    pub generator: &'static str,
    pub seed: u64,
    pub n: usize,
    pub cells: Vec<AccuracyCell>,
}

impl AccuracyReport {
    /// Writes `case,r,pi0,method,max_abs_err,mean_abs_err`, one row per
    /// cell and method.
    pub fn write_csv(&self, sink: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["case", "r", "pi0", "method", "max_abs_err", "mean_abs_err"])?;
        for c in &self.cells {
            let pi0 = c.pi0.first().map_or(String::new(), |p| fmt_num(*p));
            for (m, max, mean) in [("ml", c.ml_max, c.ml_mean), ("mlbd", c.mlbd_max, c.mlbd_mean)] {
                w.write_record([c.case.as_str(), &fmt_num(c.r), &pi0, m, &fmt_num(max), &fmt_num(mean)])?;
            }
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Mean of every |ML − ORG| over all cells and replications.
    pub fn grand_mean_ml(&self) -> f64 {
        let total: f64 = self.cells.iter().map(|c| c.ml_mean * c.replications as f64).sum();
        let count: usize = self.cells.iter().map(|c| c.replications).sum();
        total / count as f64
    }
}

/// Shortest round-trip decimal representation.
pub(crate) fn fmt_num(v: f64) -> String {
    let mut s = String::new();
    write!(s, "{v}").expect("writing to a String");
    s
}

struct Replicate {
    ml: f64,
    mlbd: f64,
    boundary: bool,
    hull: bool,
}

/// Runs ORG, ML and MLBD on every replication of `spec` and records the
/// absolute ML and MLBD deviations from ORG.
pub fn run_accuracy_experiment(
    spec: &ScenarioSpec,
    grids: &GridSet,
    boundary: f64,
    exec: Execution,
) -> Result<AccuracyCell> {
    spec.validate()?;
    let types = spec.types();
    let reps: Vec<usize> = (0..spec.replications).collect();
    let config = |m| {
        let mut c = EstimatorConfig::new(m);
        c.boundary = crate::estimator::BoundaryConstants::uniform(boundary);
        c
    };
    let (org_c, ml_c, mlbd_c) = (
        config(EstimationMethod::Org),
        config(EstimationMethod::Ml),
        config(EstimationMethod::Mlbd),
    );
    let results = par::map(exec, &reps, |&rep| -> Result<Replicate> {
        let (x, y) = spec.generate(rep);
        let types = effective(&x, &y, types);
        let stats = PairStatistics::compute(&x, &y)?;
        let org = estimate_from_stats(stats, types, &org_c, grids)?;
        let ml = estimate_from_stats(stats, types, &ml_c, grids)?;
        let mlbd = estimate_from_stats(stats, types, &mlbd_c, grids)?;
        Ok(Replicate {
            ml: (ml.r_hat - org.r_hat).abs(),
            mlbd: (mlbd.r_hat - org.r_hat).abs(),
            boundary: mlbd.route == Route::BoundaryFallback,
            hull: ml.route == Route::HullFallback,
        })
    });
    let results: Vec<Replicate> = results.into_iter().collect::<Result<_>>()?;
    let n = results.len() as f64;
    Ok(AccuracyCell {
        case: spec.case,
        r: spec.r,
        pi0: spec.pi0.clone(),
        ml_max: results.iter().map(|r| r.ml).fold(0.0, f64::max),
        ml_mean: results.iter().map(|r| r.ml).sum::<f64>() / n,
        mlbd_max: results.iter().map(|r| r.mlbd).fold(0.0, f64::max),
        mlbd_mean: results.iter().map(|r| r.mlbd).sum::<f64>() / n,
        boundary_active: results.iter().filter(|r| r.boundary).count(),
        hull_fallbacks: results.iter().filter(|r| r.hull).count(),
        replications: results.len(),
    })
}

/// Truncated columns without zeros (possible at small π₀) are continuous.
fn effective(x: &[f64], y: &[f64], (tx, ty): (VariableType, VariableType)) -> (VariableType, VariableType) {
    let f = |v: &[f64], t| {
        if t == VariableType::Truncated && v.iter().all(|&a| a != 0.0) {
            VariableType::Continuous
        } else {
            t
        }
    };
    (f(x, tx), f(y, ty))
}

/// A grid of (r, π₀) scenarios sharing n, replications and seed. The
/// second zero proportion follows [`default_second_pi0`].
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub case: CaseKind,
    pub correlations: Vec<f64>,
    pub zero_proportions: Vec<f64>,
    pub n: usize,
    pub replications: usize,
    pub seed: u64,
    pub boundary: f64,
}

impl SweepSpec {
    /// The 9 × 11 sweep of [`sweep_correlations`] × [`sweep_zero_proportions`].
    pub fn standard(case: CaseKind, n: usize, replications: usize, seed: u64) -> Self {
        Self {
            case,
            correlations: sweep_correlations(),
            zero_proportions: sweep_zero_proportions(),
            n,
            replications,
            seed,
            boundary: crate::estimator::DEFAULT_BOUNDARY_CONSTANT,
        }
    }

    pub fn scenarios(&self) -> impl Iterator<Item = ScenarioSpec> + '_ {
        self.correlations.iter().flat_map(move |&r| {
            self.zero_proportions
                .iter()
                .map(move |&p| ScenarioSpec::new(self.case, r, p, self.n, self.replications, self.seed))
        })
    }
}

/// Runs [`run_accuracy_experiment`] on every scenario of the sweep.
pub fn run_accuracy_sweep(sweep: &SweepSpec, grids: &GridSet, exec: Execution) -> Result<AccuracyReport> {
    let cells = sweep
        .scenarios()
        .map(|spec| run_accuracy_experiment(&spec, grids, sweep.boundary, exec))
        .collect::<Result<_>>()?;
    Ok(AccuracyReport {
        generator: GENERATOR,
        seed: sweep.seed,
        n: sweep.n,
        cells,
    })
}

/// Median per-pair run times for one case.
#[derive(Debug, Clone, PartialEq)]
pub struct TimingRow {
    pub case: CaseKind,
    pub org_us: f64,
    pub ml_us: f64,
    pub mlbd_us: f64,
    /// Datasets on which MLBD interpolated rather than falling back.
    pub inside_boundary: usize,
    pub datasets: usize,
}

impl TimingRow {
    pub fn org_over_ml(&self) -> f64 {
        self.org_us / self.ml_us
    }

    pub fn mlbd_over_ml(&self) -> f64 {
        self.mlbd_us / self.ml_us
    }
}

/// Writes the timing table as CSV.
pub fn write_timing_csv(rows: &[TimingRow], sink: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "case",
        "org_us",
        "ml_us",
        "mlbd_us",
        "org_over_ml",
        "mlbd_over_ml",
        "inside_boundary",
        "datasets",
    ])?;
    for r in rows {
        w.write_record([
            r.case.as_str().to_owned(),
            format!("{:.3}", r.org_us),
            format!("{:.3}", r.ml_us),
            format!("{:.3}", r.mlbd_us),
            format!("{:.3}", r.org_over_ml()),
            format!("{:.3}", r.mlbd_over_ml()),
            r.inside_boundary.to_string(),
            r.datasets.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Mean wall time in µs of `f`, repeated until at least `min_us` elapsed.
/// Mean time per call of `f` in µs: the fastest of `windows` runs of at
/// least `min_us` each, so scheduler interruptions do not inflate it.
fn time_us(mut f: impl FnMut(), windows: usize, min_us: f64) -> f64 {
    let mut best = f64::INFINITY;
    for _ in 0..windows {
        let mut reps = 0u32;
        let start = Instant::now();
        loop {
            f();
            reps += 1;
            let el = start.elapsed().as_secs_f64() * 1e6;
            if el >= min_us {
                best = best.min(el / reps as f64);
                break;
            }
        }
    }
    best
}

/// Times the full per-pair estimate (τ̂, π̂₀, Δ̂ and the inversion) for ORG,
/// ML and MLBD on `reps` datasets per case at r = 0.5 and π₀ = 0.5 (second
/// variable at its default). Runs sequentially on the calling thread.
pub fn run_timing_benchmark(
    cases: &[CaseKind],
    n: usize,
    reps: usize,
    seed: u64,
    grids: &GridSet,
) -> Result<Vec<TimingRow>> {
    if reps == 0 {
        return Err(Error::Input("at least one repetition is required".into()));
    }
    let mut rows = Vec::with_capacity(cases.len());
    for &case in cases {
        let spec = ScenarioSpec::new(case, 0.5, 0.5, n, reps, seed);
        spec.validate()?;
        let mut times = [Vec::new(), Vec::new(), Vec::new()];
        let mut inside = 0;
        for rep in 0..reps {
            let (x, y) = spec.generate(rep);
            let types = effective(&x, &y, spec.types());
            for (k, m) in EstimationMethod::ALL.into_iter().enumerate() {
                let config = EstimatorConfig::new(m);
                let e = estimate_pair(&x, &y, types, &config, grids)?;
                if m == EstimationMethod::Mlbd && e.route != Route::BoundaryFallback {
                    inside += 1;
                }
                let t = time_us(
                    || {
                        std::hint::black_box(estimate_pair(&x, &y, types, &config, grids).ok());
                    },
                    5,
                    100.0,
                );
                times[k].push(t);
            }
        }
        let [org, ml, mlbd] = times;
        rows.push(TimingRow {
            case,
            org_us: median(org),
            ml_us: median(ml),
            mlbd_us: median(mlbd),
            inside_boundary: inside,
            datasets: reps,
        });
    }
    Ok(rows)
}
