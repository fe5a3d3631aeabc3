//! The `latcorr` command line: grid precomputation, matrix estimation,
//! accuracy simulation and timing.
//!
//! Exit codes: 0 success, 1 usage, 2 I/O or numerical failure, 3 missing
//! grid, 4 degenerate data.

use std::collections::{BTreeMap, HashMap};
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand};

use crate::bridge::CaseKind;
use crate::error::Error;
use crate::estimator::{
    effective_types, estimate_matrix, infer_types, required_cases, BoundaryConstants, Dataset, EstimationMethod,
    EstimatorConfig, GridSet, LatentCorrelationMatrix, PairOutcome, VariableType, DEFAULT_BOUNDARY_CONSTANT,
};
use crate::interp::{grid_file_name, precompute_grid};
use crate::par::{self, Execution};
use crate::synth::{
    fmt_num, run_accuracy_experiment, run_accuracy_sweep, run_timing_benchmark, write_timing_csv, AccuracyReport,
    ScenarioSpec, SweepSpec, GENERATOR,
};

/// Environment variable overriding the default grid directory.
pub const GRID_DIR_ENV: &str = "LATCORR_GRID_DIR";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("no interpolation grid for case {case} in {dir}; run `latcorr precompute --case {tag} --out-dir {dir}`", tag = case.as_str(), dir = dir.display())]
    MissingGrid { case: CaseKind, dir: PathBuf },
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::MissingGrid { .. } => 3,
            CliError::Core(e) => match e.root() {
                Error::MissingGrid(_) => 3,
                Error::DegenerateVariable { .. } => 4,
                _ => 2,
            },
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Debug, Parser)]
#[command(
    name = "latcorr",
    version,
    about = "Latent Gaussian copula correlations for continuous, binary and zero-inflated data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute interpolation grids and write them as <case>.lcg files.
    Precompute(PrecomputeArgs),
    /// Estimate the latent correlation matrix of a CSV dataset.
    Estimate(EstimateArgs),
    /// Measure ML and MLBD deviations from ORG on simulated data.
    Simulate(SimulateArgs),
    /// Time ORG, ML and MLBD per variable pair.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct GridDirArg {
    /// Directory holding <case>.lcg files [default: $LATCORR_GRID_DIR, else
    /// $XDG_DATA_HOME/latcorr/grids or ~/.local/share/latcorr/grids].
    #[arg(long, value_name = "DIR")]
    grid_dir: Option<PathBuf>,
}

impl GridDirArg {
    fn resolve(&self) -> PathBuf {
        self.grid_dir.clone().unwrap_or_else(default_grid_dir)
    }
}

#[derive(Debug, Args)]
struct PrecomputeArgs {
    /// Case to compute: cc, bc, bb, tc, tt, tb or all (comma-separated list allowed).
    #[arg(long, value_name = "CASE")]
    case: String,
    /// Output directory [default: the grid directory used by `estimate`].
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    /// Worker threads [default: all cores].
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("type_source").required(true).args(["types", "infer_types"])))]
struct EstimateArgs {
    /// Input CSV: header row of column names, one sample per row.
    #[arg(long, value_name = "CSV")]
    input: PathBuf,
    /// Column types, one `name,continuous|binary|truncated` line per column.
    #[arg(long, value_name = "FILE")]
    types: Option<PathBuf>,
    /// Infer column types from the data.
    #[arg(long)]
    infer_types: bool,
    /// org, ml or mlbd.
    #[arg(long)]
    method: EstimationMethod,
    #[command(flatten)]
    grid: GridDirArg,
    /// Output CSV; labels go to <stem>.provenance.csv beside it.
    #[arg(long, value_name = "CSV")]
    output: PathBuf,
    /// Interpolate only when |tau| <= c * ABD (mlbd).
    #[arg(long, default_value_t = DEFAULT_BOUNDARY_CONSTANT, value_name = "C")]
    boundary_constant: f64,
    /// Worker threads [default: all cores]. Output does not depend on it.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Case kind: cc, bc, bb, tc, tt or tb.
    #[arg(long)]
    case: CaseKind,
    /// Latent correlation.
    #[arg(long, required_unless_present = "sweep", allow_hyphen_values = true)]
    r: Option<f64>,
    /// Zero proportion of the first non-continuous variable.
    #[arg(long)]
    pi0: Option<f64>,
    /// Zero proportion of the second variable (bb, tt, tb) [default: pi0/2 for tt, 0.5 otherwise].
    #[arg(long)]
    pi0b: Option<f64>,
    /// Run the full 9 x 11 (r, pi0) sweep instead of one scenario.
    #[arg(long, conflicts_with_all = ["r", "pi0", "pi0b"])]
    sweep: bool,
    /// Sample size.
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Replications per scenario.
    #[arg(long, default_value_t = 100)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV [default: stdout].
    #[arg(long, value_name = "CSV")]
    output: Option<PathBuf>,
    #[command(flatten)]
    grid: GridDirArg,
    #[arg(long, default_value_t = DEFAULT_BOUNDARY_CONSTANT, value_name = "C")]
    boundary_constant: f64,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    threads: Option<u32>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Comma-separated cases, or `all`.
    #[arg(long, value_name = "LIST")]
    cases: String,
    #[arg(long, default_value_t = 100)]
    n: usize,
    /// Simulated datasets per case; the median is reported.
    #[arg(long, default_value_t = 21)]
    reps: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output CSV [default: stdout].
    #[arg(long, value_name = "CSV")]
    output: Option<PathBuf>,
    #[command(flatten)]
    grid: GridDirArg,
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Precompute(a) => precompute(a),
        Command::Estimate(a) => estimate(a),
        Command::Simulate(a) => simulate(a),
        Command::Bench(a) => bench(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("latcorr: error: {e}");
            e.exit_code()
        }
    }
}

/// `$XDG_DATA_HOME/latcorr/grids`, falling back to `~/.local/share/latcorr/grids`.
pub fn default_grid_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(GRID_DIR_ENV).filter(|v| !v.is_empty()) {
        return PathBuf::from(dir);
    }
    let base = std::env::var_os("XDG_DATA_HOME")
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .or_else(|| std::env::var_os("HOME").map(|h| PathBuf::from(h).join(".local/share")))
        .unwrap_or_else(|| PathBuf::from("."));
    base.join("latcorr").join("grids")
}

/// Parses a comma-separated case list; `all` expands to every case.
pub fn parse_case_list(s: &str) -> Result<Vec<CaseKind>, CliError> {
    let mut cases = Vec::new();
    for token in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if token.eq_ignore_ascii_case("all") {
            cases.extend(CaseKind::ALL);
        } else {
            cases.push(token.parse().map_err(|_| usage(format!("unknown case '{token}'")))?);
        }
    }
    if cases.is_empty() {
        return Err(usage("empty case list"));
    }
    let mut seen = Vec::new();
    cases.retain(|c| {
        let fresh = !seen.contains(c);
        seen.push(*c);
        fresh
    });
    Ok(cases)
}

fn threads_of(t: Option<u32>) -> Option<usize> {
    t.map(|t| t as usize)
}

fn load_grids(dir: &Path, cases: &[CaseKind]) -> Result<GridSet, CliError> {
    GridSet::load_dir(dir, cases.iter().copied()).map_err(|e| match e {
        Error::MissingGrid(case) => CliError::MissingGrid {
            case,
            dir: dir.to_owned(),
        },
        other => other.into(),
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e).into())
}

fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

fn precompute(args: PrecomputeArgs) -> Result<(), CliError> {
    let cases = parse_case_list(&args.case)?;
    let dir = args.out_dir.unwrap_or_else(default_grid_dir);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    for case in cases {
        if case == CaseKind::CC {
            eprintln!("cc: closed-form inverse, no grid needed");
            continue;
        }
        let start = Instant::now();
        let grid = par::with_threads(threads_of(args.threads), || precompute_grid(case, Execution::Parallel))?;
        let path = dir.join(grid_file_name(case));
        grid.save(&path)?;
        eprintln!(
            "{}: {} nodes in {:.1} s -> {}",
            case.as_str(),
            grid.values().len(),
            start.elapsed().as_secs_f64(),
            path.display()
        );
    }
    Ok(())
}

/// Reads a dataset CSV: a header of column names, then one numeric row per
/// sample. Empty cells are rejected.
pub fn read_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let names: Vec<String> = reader
        .headers()
        .map_err(Error::from)?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut seen = HashMap::new();
    for (i, name) in names.iter().enumerate() {
        if name.is_empty() {
            return Err(Error::Input(format!("{}: column {} has an empty name", path.display(), i + 1)).into());
        }
        if seen.insert(name.as_str(), i).is_some() {
            return Err(Error::Input(format!("{}: duplicate column name '{name}'", path.display())).into());
        }
    }
    let mut columns = vec![Vec::new(); names.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(Error::from)?;
        for (col, cell) in record.iter().enumerate() {
            let line = row + 2;
            if cell.is_empty() {
                return Err(Error::Input(format!(
                    "{}: empty cell at line {line}, column '{}'",
                    path.display(),
                    names[col]
                ))
                .into());
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::Input(format!(
                    "{}: '{cell}' at line {line}, column '{}' is not a number",
                    path.display(),
                    names[col]
                ))
            })?;
            columns[col].push(v);
        }
    }
    if names.len() < 2 || columns[0].len() < 2 {
        return Err(Error::Input(format!("{}: need at least two rows and two columns", path.display())).into());
    }
    Ok(Dataset::new(names, columns)?)
}

/// Reads `name,type` lines and orders the types like `names`.
pub fn read_type_spec(path: &Path, names: &[String]) -> Result<Vec<VariableType>, CliError> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut by_name = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |msg: String| Error::Input(format!("{}:{}: {msg}", path.display(), i + 1));
        let (name, ty) = line
            .rsplit_once(',')
            .ok_or_else(|| bad(format!("expected `name,type`, got '{line}'")))?;
        let ty: VariableType = ty
            .trim()
            .parse()
            .map_err(|_| bad(format!("unknown type '{}'", ty.trim())))?;
        if by_name.insert(name.trim().to_owned(), ty).is_some() {
            return Err(bad(format!("column '{}' listed twice", name.trim())).into());
        }
    }
    let types = names
        .iter()
        .map(|n| {
            by_name
                .remove(n)
                .ok_or_else(|| Error::Input(format!("{}: no type for column '{n}'", path.display())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(extra) = by_name.keys().next() {
        return Err(Error::Input(format!("{}: column '{extra}' is not in the dataset", path.display())).into());
    }
    Ok(types)
}

/// `<stem>.provenance.csv` next to `output`.
pub fn provenance_path(output: &Path) -> PathBuf {
    let stem = output.file_stem().map(|s| s.to_os_string()).unwrap_or_default();
    let mut name = stem;
    name.push(".provenance.csv");
    output.with_file_name(name)
}

fn write_matrix(
    path: &Path,
    m: &LatentCorrelationMatrix,
    cell: impl Fn(usize, usize) -> String,
) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(m.names()).map_err(Error::from)?;
    for i in 0..m.dim() {
        w.write_record((0..m.dim()).map(|j| cell(i, j))).map_err(Error::from)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn estimate(args: EstimateArgs) -> Result<(), CliError> {
    if !(args.boundary_constant.is_finite() && args.boundary_constant >= 0.0) {
        return Err(usage(format!(
            "boundary constant {} must be finite and non-negative",
            args.boundary_constant
        )));
    }
    let data = read_dataset(&args.input)?;
    let types = match &args.types {
        Some(path) => read_type_spec(path, &data.names)?,
        None => infer_types(&data)?,
    };
    let effective = effective_types(&data, &types)?;
    let grids = match args.method {
        EstimationMethod::Org => GridSet::new(),
        _ => load_grids(&args.grid.resolve(), &required_cases(&effective))?,
    };
    let mut config = EstimatorConfig::new(args.method);
    config.boundary = BoundaryConstants::uniform(args.boundary_constant);
    config.execution = Execution::Parallel;

    let start = Instant::now();
    let matrix = par::with_threads(threads_of(args.threads), || {
        estimate_matrix(&data, &types, &config, &grids)
    })?;
    let elapsed = start.elapsed();

    write_matrix(&args.output, &matrix, |i, j| fmt_num(matrix.get(i, j)))?;
    write_matrix(&provenance_path(&args.output), &matrix, |i, j| matrix.label(i, j))?;

    let mut routes: BTreeMap<String, usize> = BTreeMap::new();
    for (_, _, outcome) in matrix.pair_estimates() {
        if let PairOutcome::Estimated(e) = outcome {
            *routes.entry(e.route.as_str().to_owned()).or_default() += 1;
        }
    }
    let summary: Vec<String> = routes.iter().map(|(k, v)| format!("{k}={v}")).collect();
    eprintln!(
        "{} variables, {} rows, method {}: {} pairs in {:.3} s ({})",
        data.dim(),
        data.rows(),
        args.method,
        data.dim() * (data.dim() - 1) / 2,
        elapsed.as_secs_f64(),
        summary.join(", ")
    );
    Ok(())
}

fn scenario(args: &SimulateArgs) -> Result<ScenarioSpec, CliError> {
    let case = args.case;
    let pi0 = match (case.delta_count(), args.pi0, args.pi0b) {
        (0, None, None) => vec![],
        (0, ..) => return Err(usage("case cc takes no zero proportions")),
        (_, None, _) => return Err(usage(format!("case {case} needs --pi0"))),
        (1, Some(p), None) => vec![p],
        (1, Some(_), Some(_)) => return Err(usage(format!("case {case} takes a single zero proportion"))),
        (_, Some(p), b) => vec![p, b.unwrap_or_else(|| crate::synth::default_second_pi0(case, p))],
    };
    let r = args.r.ok_or_else(|| usage("--r is required"))?;
    Ok(ScenarioSpec {
        pi0,
        ..ScenarioSpec::new(case, r, 0.0, args.n, args.reps, args.seed)
    })
}

fn simulate(args: SimulateArgs) -> Result<(), CliError> {
    if !(args.boundary_constant.is_finite() && args.boundary_constant >= 0.0) {
        return Err(usage(format!(
            "boundary constant {} must be finite and non-negative",
            args.boundary_constant
        )));
    }
    let sweep = SweepSpec {
        boundary: args.boundary_constant,
        ..SweepSpec::standard(args.case, args.n, args.reps, args.seed)
    };
    let single = if args.sweep { None } else { Some(scenario(&args)?) };
    match &single {
        Some(spec) => spec.validate(),
        None => sweep.scenarios().try_for_each(|spec| spec.validate()),
    }
    .map_err(|e| usage(e.to_string()))?;

    let grids = load_grids(&args.grid.resolve(), &[args.case])?;
    let start = Instant::now();
    let report = par::with_threads(threads_of(args.threads), || match &single {
        Some(spec) => run_accuracy_experiment(spec, &grids, args.boundary_constant, Execution::Parallel).map(|cell| {
            AccuracyReport {
                generator: GENERATOR,
                seed: args.seed,
                n: args.n,
                cells: vec![cell],
            }
        }),
        None => run_accuracy_sweep(&sweep, &grids, Execution::Parallel),
    })?;
    report.write_csv(sink(args.output.as_deref())?)?;
    eprintln!(
        "{} scenario(s) x {} replications in {:.1} s; generator: {}, seed {}",
        report.cells.len(),
        args.reps,
        start.elapsed().as_secs_f64(),
        report.generator,
        report.seed
    );
    Ok(())
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let cases = parse_case_list(&args.cases)?;
    if args.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    if args.n < 10 {
        return Err(usage("--n must be at least 10"));
    }
    let grids = load_grids(&args.grid.resolve(), &cases)?;
    let rows = run_timing_benchmark(&cases, args.n, args.reps, args.seed, &grids)?;
    write_timing_csv(&rows, sink(args.output.as_deref())?)?;
    Ok(())
}
