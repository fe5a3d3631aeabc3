//! Binary grid file format.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "LCG1"
//! 4       1     format version
//! 5       1     case tag (1 = BC, 2 = BB, 3 = TC, 4 = TT, 5 = TB)
//! 6       1     axis count (τ axis first)
//! 7       8     inversion tolerance, f64
//! 15      8     π₀ of the first truncated node, f64 (NaN if none)
//! 23      ...   per axis: u32 length, then that many f64 points
//!         ...   values, f64, row-major with τ slowest
//!         4     CRC-32 (IEEE) of every preceding byte
//! ```
//!
//! All integers and floats are little-endian.

use std::io::{Read, Write};

use super::{GridAxis, GridMeta, InterpolationGrid};
use crate::bridge::CaseKind;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"LCG1";
pub const FORMAT_VERSION: u8 = 1;

/// Writes `grid` in the LCG1 format.
pub fn serialize_grid(grid: &InterpolationGrid, mut sink: impl Write) -> std::io::Result<()> {
    sink.write_all(&to_bytes(grid))
}

/// Reads a grid written by [`serialize_grid`].
pub fn deserialize_grid(mut source: impl Read) -> Result<InterpolationGrid> {
    let mut bytes = Vec::new();
    source
        .read_to_end(&mut bytes)
        .map_err(|e| Error::io("<grid stream>", e))?;
    from_bytes(&bytes)
}

pub(crate) fn to_bytes(grid: &InterpolationGrid) -> Vec<u8> {
    let axes: Vec<&GridAxis> = std::iter::once(grid.tau_axis()).chain(grid.delta_axes()).collect();
    let mut out = Vec::with_capacity(32 + 8 * (grid.values().len() + axes.iter().map(|a| a.len()).sum::<usize>()));
    out.extend_from_slice(MAGIC);
    out.push(grid.meta().version);
    out.push(grid.case().tag());
    out.push(axes.len() as u8);
    out.extend_from_slice(&grid.meta().tolerance.to_le_bytes());
    out.extend_from_slice(&grid.meta().truncated_floor_pi0.unwrap_or(f64::NAN).to_le_bytes());
    for axis in &axes {
        out.extend_from_slice(&(axis.len() as u32).to_le_bytes());
        for p in axis.points() {
            out.extend_from_slice(&p.to_le_bytes());
        }
    }
    for v in grid.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format_err(self.pos, format!("unexpected end of data reading {what}"))),
        }
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(n.saturating_mul(8), what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

fn format_err(offset: usize, reason: impl Into<String>) -> Error {
    Error::Format {
        offset,
        reason: reason.into(),
    }
}

pub(crate) fn from_bytes(bytes: &[u8]) -> Result<InterpolationGrid> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4, "magic")? != MAGIC {
        return Err(format_err(0, "bad magic, not an LCG1 grid file"));
    }
    let version = cur.u8("version")?;
    if version != FORMAT_VERSION {
        return Err(format_err(4, format!("unsupported version {version}")));
    }
    let tag = cur.u8("case tag")?;
    let case = match CaseKind::from_tag(tag) {
        Some(c) if c != CaseKind::CC => c,
        _ => return Err(format_err(5, format!("invalid case tag {tag}"))),
    };
    let axis_count = cur.u8("axis count")? as usize;
    if axis_count != 1 + case.delta_count() {
        return Err(format_err(
            6,
            format!("case {case} needs {} axes, found {axis_count}", 1 + case.delta_count()),
        ));
    }
    let tolerance = cur.f64("tolerance")?;
    let floor = cur.f64("truncated floor")?;

    let mut axes = Vec::with_capacity(axis_count);
    for i in 0..axis_count {
        let at = cur.pos;
        let len = cur.u32("axis length")? as usize;
        let points = cur.f64s(len, "axis points")?;
        let axis = GridAxis::new(points).map_err(|e| format_err(at, format!("axis {i}: {e}")))?;
        axes.push(axis);
    }
    let count = axes.iter().try_fold(1usize, |acc, a| acc.checked_mul(a.len()));
    let count = count.ok_or_else(|| format_err(cur.pos, "grid too large"))?;
    let values_at = cur.pos;
    let values = cur.f64s(count, "values")?;
    let body_end = cur.pos;
    let stored = cur.u32("checksum")?;
    if cur.pos != bytes.len() {
        return Err(format_err(cur.pos, format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    let actual = crc32fast::hash(&bytes[..body_end]);
    if stored != actual {
        return Err(format_err(
            body_end,
            format!("checksum mismatch (stored {stored:08x}, computed {actual:08x})"),
        ));
    }

    let meta = GridMeta {
        version,
        tolerance,
        truncated_floor_pi0: (!floor.is_nan()).then_some(floor),
    };
    let mut axes = axes.into_iter();
    let tau_axis = axes.next().expect("at least one axis");
    InterpolationGrid::from_parts(case, tau_axis, axes.collect(), values, meta)
        .map_err(|e| format_err(values_at, e.to_string()))
}
