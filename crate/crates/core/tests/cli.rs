mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use latcorr::bridge::CaseKind;
use latcorr::interp::{grid_file_name, InterpolationGrid};
use latcorr::synth::{apply_dichotomization, apply_truncation, generate_latent_pair_stream};

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn latcorr(args: &[&str]) -> Run {
    latcorr_env(args, &[])
}

fn latcorr_env(args: &[&str], env: &[(&str, &Path)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_latcorr"));
    cmd.args(args).env_remove("LATCORR_GRID_DIR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("binary runs");
    Run {
        code: out.status.code().unwrap_or(-1),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_csv(path: &Path, names: &[&str], columns: &[Vec<f64>]) {
    let mut text = names.join(",");
    text.push('\n');
    for i in 0..columns[0].len() {
        let row: Vec<String> = columns.iter().map(|c| c[i].to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    fs::write(path, text).unwrap();
}

fn write_types(path: &Path, names: &[&str], types: &[&str]) {
    let text: String = names.iter().zip(types).map(|(n, t)| format!("{n},{t}\n")).collect();
    fs::write(path, text).unwrap();
}

fn read_matrix(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

/// One truncated and three continuous columns from correlated latent pairs.
fn tc_dataset(dir: &Path) -> (PathBuf, PathBuf) {
    let n = 100;
    let (z, a) = generate_latent_pair_stream(n, 0.5, 11, 0);
    let (_, b) = generate_latent_pair_stream(n, 0.3, 11, 0);
    let (_, c) = generate_latent_pair_stream(n, -0.4, 12, 3);
    let t = apply_truncation(&z, 0.5);
    let names = ["t", "a", "b", "c"];
    let data = dir.join("tc.csv");
    let types = dir.join("tc_types.csv");
    write_csv(&data, &names, &[t, a, b, c]);
    write_types(&types, &names, &["truncated", "continuous", "continuous", "continuous"]);
    (data, types)
}

/// Columns of every type, so that all six cases occur.
fn mixed_dataset(dir: &Path) -> (PathBuf, PathBuf) {
    let n = 150;
    let mut cols = Vec::new();
    let mut names = Vec::new();
    let mut types = Vec::new();
    for k in 0..9u64 {
        let (x, y) = generate_latent_pair_stream(n, 0.2 + 0.07 * k as f64, 40 + k, k);
        let (col, ty) = match k % 3 {
            0 => (y, "continuous"),
            1 => (apply_dichotomization(&x, 0.3 + 0.05 * k as f64), "binary"),
            _ => (apply_truncation(&y, 0.2 + 0.06 * k as f64), "truncated"),
        };
        cols.push(col);
        names.push(format!("v{k}"));
        types.push(ty);
    }
    let names: Vec<&str> = names.iter().map(String::as_str).collect();
    let data = dir.join("mixed.csv");
    let spec = dir.join("mixed_types.csv");
    write_csv(&data, &names, &cols);
    write_types(&spec, &names, &types);
    (data, spec)
}

#[test]
fn precompute_writes_loadable_grids() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let run = latcorr(&["precompute", "--case", "bc", "--out-dir", s(&out)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let cached = common::ensure_grid_files(&[CaseKind::BC]);
    let fresh = fs::read(out.join("bc.lcg")).unwrap();
    assert_eq!(fresh, fs::read(cached.join(grid_file_name(CaseKind::BC))).unwrap());
    let grid = InterpolationGrid::load(out.join("bc.lcg")).unwrap();
    for (t, idx) in common::sample_nodes(&grid, 50, 3) {
        let tau = grid.tau_axis().points()[t];
        let deltas: Vec<f64> = idx.iter().zip(grid.delta_axes()).map(|(&i, a)| a.points()[i]).collect();
        assert_eq!(grid.interpolate(tau, &deltas).unwrap(), grid.node(t, &idx));
    }

    let run = latcorr(&["precompute", "--case", "cc", "--out-dir", s(&out)]);
    assert_eq!(run.code, 0);
    assert!(run.stderr.contains("cc"));
    assert!(!out.join("cc.lcg").exists());
}

#[test]
fn precompute_failures() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let run = latcorr(&["precompute", "--case", "bc", "--out-dir", s(&blocker.join("sub"))]);
    assert_eq!(run.code, 2, "{}", run.stderr);
    assert!(run.stderr.contains("error"));
    assert_eq!(
        latcorr(&["precompute", "--case", "xy", "--out-dir", s(dir.path())]).code,
        1
    );
    assert_eq!(latcorr(&["precompute", "--out-dir", s(dir.path())]).code, 1);
}

#[test]
fn closed_form_pair() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.csv");
    let types = dir.path().join("t.csv");
    write_csv(&data, &["x", "y"], &[vec![1.0, 2.0, 3.0], vec![1.0, 3.0, 2.0]]);
    write_types(&types, &["x", "y"], &["continuous", "continuous"]);
    let out = dir.path().join("r.csv");
    let run = latcorr(&[
        "estimate",
        "--input",
        s(&data),
        "--types",
        s(&types),
        "--method",
        "org",
        "--output",
        s(&out),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let (header, rows) = read_matrix(&out);
    assert_eq!(header, ["x", "y"]);
    let v: f64 = rows[0][1].parse().unwrap();
    assert!((v - 0.5).abs() < 1e-15);
    assert_eq!(rows[1][0], rows[0][1]);
    assert_eq!(rows[0][0], "1");
    let (_, labels) = read_matrix(&dir.path().join("r.provenance.csv"));
    assert_eq!(labels, [["diag", "closed"], ["closed", "diag"]]);
}

#[test]
fn mlbd_close_to_org_within_boundary() {
    let dir = tempfile::tempdir().unwrap();
    let grids = common::ensure_grid_files(&[CaseKind::TC]);
    let (data, types) = tc_dataset(dir.path());
    let estimate = |method: &str, out: &Path| {
        let run = latcorr(&[
            "estimate",
            "--input",
            s(&data),
            "--types",
            s(&types),
            "--method",
            method,
            "--grid-dir",
            s(&grids),
            "--output",
            s(out),
        ]);
        assert_eq!(run.code, 0, "{}", run.stderr);
        read_matrix(out).1
    };
    let org = estimate("org", &dir.path().join("org.csv"));
    let mlbd = estimate("mlbd", &dir.path().join("mlbd.csv"));
    let mut max = 0.0f64;
    for (a, b) in org.iter().flatten().zip(mlbd.iter().flatten()) {
        max = max.max((a.parse::<f64>().unwrap() - b.parse::<f64>().unwrap()).abs());
    }
    assert!(max <= 5e-3, "max difference {max}");
    let (_, labels) = read_matrix(&dir.path().join("mlbd.provenance.csv"));
    assert_eq!(&labels[0][1..], ["ml", "ml", "ml"]);
    assert_eq!(labels[1][2], "closed");
}

#[test]
fn output_does_not_depend_on_threads() {
    let dir = tempfile::tempdir().unwrap();
    let grids = common::ensure_grid_files(&CaseKind::ALL);
    let (data, types) = mixed_dataset(dir.path());
    for method in ["org", "ml", "mlbd"] {
        let mut outputs = Vec::new();
        for (k, threads) in ["1", "8", "8"].iter().enumerate() {
            let out = dir.path().join(format!("{method}{k}.csv"));
            let run = latcorr(&[
                "estimate",
                "--input",
                s(&data),
                "--types",
                s(&types),
                "--method",
                method,
                "--grid-dir",
                s(&grids),
                "--output",
                s(&out),
                "--threads",
                threads,
            ]);
            assert_eq!(run.code, 0, "{}", run.stderr);
            outputs.push((
                fs::read(&out).unwrap(),
                fs::read(dir.path().join(format!("{method}{k}.provenance.csv"))).unwrap(),
            ));
        }
        assert!(outputs.windows(2).all(|w| w[0] == w[1]), "{method}");
    }
}

#[test]
fn grid_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let grids = common::ensure_grid_files(&[CaseKind::TC]);
    let (data, types) = tc_dataset(dir.path());
    let out = dir.path().join("r.csv");
    let args = [
        "estimate",
        "--input",
        s(&data),
        "--types",
        s(&types),
        "--method",
        "ml",
        "--output",
        s(&out),
    ];
    let run = latcorr_env(&args, &[("LATCORR_GRID_DIR", &grids)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let empty = dir.path().join("none");
    let run = latcorr_env(&args, &[("LATCORR_GRID_DIR", &empty)]);
    assert_eq!(run.code, 3);
}

#[test]
fn inferred_types() {
    let dir = tempfile::tempdir().unwrap();
    let grids = common::ensure_grid_files(&[CaseKind::TC]);
    let (data, types) = tc_dataset(dir.path());
    let run_with = |extra: &[&str], out: &Path| {
        let mut args = vec![
            "estimate",
            "--input",
            s(&data),
            "--method",
            "mlbd",
            "--grid-dir",
            s(&grids),
            "--output",
            s(out),
        ];
        args.extend_from_slice(extra);
        let run = latcorr(&args);
        assert_eq!(run.code, 0, "{}", run.stderr);
        fs::read(out).unwrap()
    };
    let a = run_with(&["--infer-types"], &dir.path().join("a.csv"));
    let b = run_with(&["--types", s(&types)], &dir.path().join("b.csv"));
    assert_eq!(a, b);
    let run = latcorr(&[
        "estimate",
        "--input",
        s(&data),
        "--infer-types",
        "--types",
        s(&types),
        "--method",
        "org",
        "--output",
        s(&dir.path().join("c.csv")),
    ]);
    assert_eq!(run.code, 1);
}

#[test]
fn estimate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (data, types) = tc_dataset(dir.path());
    let out = dir.path().join("r.csv");
    let empty = dir.path().join("no-grids");

    let run = latcorr(&[
        "estimate",
        "--input",
        s(&data),
        "--types",
        s(&types),
        "--method",
        "mlbd",
        "--grid-dir",
        s(&empty),
        "--output",
        s(&out),
    ]);
    assert_eq!(run.code, 3);
    assert!(
        run.stderr.contains("TC") && run.stderr.contains("precompute --case tc"),
        "{}",
        run.stderr
    );

    let deg = dir.path().join("deg.csv");
    let deg_types = dir.path().join("deg_types.csv");
    write_csv(&deg, &["a", "flat"], &[vec![0.1, 0.5, 0.2, 0.9], vec![1.0; 4]]);
    write_types(&deg_types, &["a", "flat"], &["continuous", "binary"]);
    let run = latcorr(&[
        "estimate",
        "--input",
        s(&deg),
        "--types",
        s(&deg_types),
        "--method",
        "org",
        "--output",
        s(&out),
    ]);
    assert_eq!(run.code, 4);
    assert!(run.stderr.contains("'flat'"), "{}", run.stderr);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "a,b\n1,2\n3,\n4,5\n").unwrap();
    let run = latcorr(&[
        "estimate",
        "--input",
        s(&bad),
        "--infer-types",
        "--method",
        "org",
        "--output",
        s(&out),
    ]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("empty cell"), "{}", run.stderr);

    let missing = dir.path().join("missing.csv");
    assert_eq!(
        latcorr(&[
            "estimate",
            "--input",
            s(&missing),
            "--infer-types",
            "--method",
            "org",
            "--output",
            s(&out)
        ])
        .code,
        2
    );

    let unwritable = dir.path().join("nope").join("r.csv");
    assert_eq!(
        latcorr(&[
            "estimate",
            "--input",
            s(&data),
            "--types",
            s(&types),
            "--method",
            "org",
            "--output",
            s(&unwritable)
        ])
        .code,
        2
    );

    for args in [
        vec![
            "estimate",
            "--input",
            s(&data),
            "--types",
            s(&types),
            "--method",
            "fast",
            "--output",
            s(&out),
        ],
        vec!["estimate", "--input", s(&data), "--method", "org", "--output", s(&out)],
        vec![
            "estimate",
            "--input",
            s(&data),
            "--types",
            s(&types),
            "--method",
            "org",
            "--output",
            s(&out),
            "--threads",
            "0",
        ],
        vec![
            "estimate",
            "--input",
            s(&data),
            "--types",
            s(&types),
            "--method",
            "org",
            "--output",
            s(&out),
            "--boundary-constant",
            "-1",
        ],
        vec!["frobnicate"],
        vec![],
    ] {
        assert_eq!(latcorr(&args).code, 1, "{args:?}");
    }
    assert_eq!(latcorr(&["--help"]).code, 0);
}

#[test]
fn simulate_reports() {
    let dir = tempfile::tempdir().unwrap();
    let grids = common::ensure_grid_files(&[CaseKind::TC]);
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let run = latcorr(&[
            "simulate",
            "--case",
            "tc",
            "--r",
            "0.5",
            "--pi0",
            "0.5",
            "--n",
            "100",
            "--reps",
            "100",
            "--seed",
            "9",
            "--grid-dir",
            s(&grids),
            "--output",
            s(out),
        ]);
        assert_eq!(run.code, 0, "{}", run.stderr);
        assert!(run.stderr.contains("ChaCha20") && run.stderr.contains("seed 9"));
    }
    let text = fs::read_to_string(&out_a).unwrap();
    assert_eq!(text, fs::read_to_string(&out_b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("tc,0.5,0.5,ml,") && lines[2].starts_with("tc,0.5,0.5,mlbd,"));

    let run = latcorr(&[
        "simulate",
        "--case",
        "tc",
        "--r",
        "0.5",
        "--pi0",
        "0.5",
        "--reps",
        "0",
        "--grid-dir",
        s(&grids),
    ]);
    assert_eq!(run.code, 1);
    for bad in [
        vec!["simulate", "--case", "tc", "--r", "0.5", "--grid-dir", s(&grids)],
        vec![
            "simulate",
            "--case",
            "tc",
            "--r",
            "1.5",
            "--pi0",
            "0.5",
            "--grid-dir",
            s(&grids),
        ],
        vec![
            "simulate",
            "--case",
            "tc",
            "--r",
            "0.5",
            "--pi0",
            "0.5",
            "--pi0b",
            "0.2",
            "--grid-dir",
            s(&grids),
        ],
        vec!["simulate", "--case", "qq", "--r", "0.5", "--pi0", "0.5"],
    ] {
        assert_eq!(latcorr(&bad).code, 1, "{bad:?}");
    }
    let run = latcorr(&[
        "simulate",
        "--case",
        "tc",
        "--sweep",
        "--reps",
        "2",
        "--n",
        "50",
        "--grid-dir",
        s(&grids),
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.stdout.lines().count(), 1 + 2 * 99);
}

#[test]
fn bench_table() {
    let grids = common::ensure_grid_files(&[CaseKind::TT, CaseKind::BC]);
    let run = latcorr(&["bench", "--cases", "tt,bc", "--reps", "5", "--grid-dir", s(&grids)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let lines: Vec<&str> = run.stdout.lines().collect();
    assert_eq!(
        lines[0],
        "case,org_us,ml_us,mlbd_us,org_over_ml,mlbd_over_ml,inside_boundary,datasets"
    );
    let tt: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(tt[0], "tt");
    let ratio: f64 = tt[4].parse().unwrap();
    assert!(ratio >= 10.0, "tt org/ml {ratio}");
    assert!(lines[2].starts_with("bc,"));

    assert_eq!(latcorr(&["bench", "--cases", "", "--grid-dir", s(&grids)]).code, 1);
    assert_eq!(latcorr(&["bench", "--cases", "tc,zz", "--grid-dir", s(&grids)]).code, 1);
    assert_eq!(
        latcorr(&["bench", "--cases", "tc", "--reps", "0", "--grid-dir", s(&grids)]).code,
        1
    );
}
