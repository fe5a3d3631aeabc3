//! Interpolation grids shared by the integration tests.
//!
//! Grids are cached under `$CARGO_TARGET_TMPDIR/grids`. A cached file is
//! reused only if a sample of its nodes matches a fresh inversion bit for
//! bit; otherwise it is rebuilt.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use latcorr::bridge::{Bridge, CaseKind, R_MAX, R_MIN};
use latcorr::estimator::GridSet;
use latcorr::interp::{grid_file_name, precompute_grid, InterpolationGrid};
use latcorr::par::Execution;

pub fn grid_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("grids")
}

/// Recomputes one node the way `precompute_grid` does.
pub fn fresh_node(grid: &InterpolationGrid, t: usize, idx: &[usize]) -> f64 {
    let case = grid.case();
    let mut idx = idx.to_vec();
    if matches!(case, CaseKind::BB | CaseKind::TT) {
        idx.sort_unstable();
    }
    let deltas: Vec<f64> = idx.iter().zip(grid.delta_axes()).map(|(&i, a)| a.points()[i]).collect();
    let bridge = Bridge::new(case, &deltas).unwrap();
    let tau = grid.tau_axis().points()[t];
    bridge
        .invert_within(tau, bridge.attainable_range())
        .unwrap()
        .r
        .clamp(R_MIN, R_MAX)
}

/// Deterministic sample of node coordinates.
pub fn sample_nodes(grid: &InterpolationGrid, count: usize, seed: u64) -> Vec<(usize, Vec<usize>)> {
    let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    let mut next = |n: usize| {
        state = state
            .wrapping_mul(6364136223846793005)
            .wrapping_add(1442695040888963407);
        ((state >> 33) % n as u64) as usize
    };
    (0..count)
        .map(|_| {
            let t = next(grid.tau_axis().len());
            let idx = grid.delta_axes().iter().map(|a| next(a.len())).collect();
            (t, idx)
        })
        .collect()
}

fn is_current(grid: &InterpolationGrid, case: CaseKind) -> bool {
    grid.case() == case
        && sample_nodes(grid, 24, 7)
            .iter()
            .all(|(t, idx)| grid.node(*t, idx).to_bits() == fresh_node(grid, *t, idx).to_bits())
}

fn load_or_build(case: CaseKind) -> Arc<InterpolationGrid> {
    let path = grid_dir().join(grid_file_name(case));
    if let Ok(grid) = InterpolationGrid::load(&path) {
        if is_current(&grid, case) {
            return Arc::new(grid);
        }
    }
    let grid = precompute_grid(case, Execution::Parallel).unwrap();
    std::fs::create_dir_all(grid_dir()).unwrap();
    grid.save(&path).unwrap();
    Arc::new(grid)
}

/// Grid for `case`, built at most once per process.
pub fn grid(case: CaseKind) -> Arc<InterpolationGrid> {
    static SLOTS: [OnceLock<Arc<InterpolationGrid>>; 6] = [const { OnceLock::new() }; 6];
    let slot = CaseKind::ALL.iter().position(|&c| c == case).unwrap();
    SLOTS[slot].get_or_init(|| load_or_build(case)).clone()
}

pub fn grid_set(cases: &[CaseKind]) -> GridSet {
    let mut set = GridSet::new();
    for &c in cases.iter().filter(|&&c| c != CaseKind::CC) {
        set.insert(grid(c));
    }
    set
}

/// Makes sure the files for `cases` are present and returns their directory.
pub fn ensure_grid_files(cases: &[CaseKind]) -> PathBuf {
    grid_set(cases);
    grid_dir()
}
