//! Snapshots and time-series output.
//!
//! Snapshot layout, little-endian:
//!
//! ```text
//! "CTNS" | version u32 | nx u32 | ny u32 | lx f64 | ly f64 | field_count u32 | time f64
//! n[nx*ny] | c[nx*ny] | u_x[nx*ny] | u_y[nx*ny]      (f64, row-major)
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coefficients::CoefficientSet;
use crate::diagnostics::{cell_entropy, entropy_with, fisher, mass, LambdaConstants};
use crate::error::{Error, Result};
use crate::field::{max_value, min_value, BcMode, Grid, ScalarField, VectorField};
use crate::stepper::State;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"CTNS";
pub const SNAPSHOT_VERSION: u32 = 1;
pub const SNAPSHOT_HEADER_BYTES: usize = 44;
const FIELD_COUNT: u32 = 4;

pub fn encode_snapshot(state: &State) -> Vec<u8> {
    let g = state.n.grid;
    let mut out = Vec::with_capacity(SNAPSHOT_HEADER_BYTES + 4 * 8 * g.len());
    out.extend_from_slice(SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(g.nx as u32).to_le_bytes());
    out.extend_from_slice(&(g.ny as u32).to_le_bytes());
    out.extend_from_slice(&g.lx.to_le_bytes());
    out.extend_from_slice(&g.ly.to_le_bytes());
    out.extend_from_slice(&FIELD_COUNT.to_le_bytes());
    out.extend_from_slice(&state.t.to_le_bytes());
    for field in [&state.n.values, &state.c.values, &state.u.x, &state.u.y] {
        for v in field.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let chunk = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| Error::Format(format!("truncated file: needed {end} bytes, have {}", self.bytes.len())))?;
        self.pos = end;
        Ok(chunk.try_into().expect("slice has length N"))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn array(&mut self, len: usize) -> Result<Vec<f64>> {
        (0..len).map(|_| self.f64()).collect()
    }
}

/// Decodes a snapshot. The format does not record the boundary mode, so it is supplied.
pub fn decode_snapshot(bytes: &[u8], bc_mode: BcMode) -> Result<State> {
    let mut cur = Cursor { bytes, pos: 0 };
    if &cur.take::<4>()? != SNAPSHOT_MAGIC {
        return Err(Error::Format("bad magic, not a snapshot file".into()));
    }
    let version = cur.u32()?;
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported version {version}, expected {SNAPSHOT_VERSION}")));
    }
    let (nx, ny) = (cur.u32()? as usize, cur.u32()? as usize);
    let (lx, ly) = (cur.f64()?, cur.f64()?);
    let count = cur.u32()?;
    if count != FIELD_COUNT {
        return Err(Error::Format(format!("expected {FIELD_COUNT} fields, header says {count}")));
    }
    let t = cur.f64()?;
    let grid = Grid::new(nx, ny, lx, ly, bc_mode).map_err(|e| Error::Format(format!("bad grid in header: {e}")))?;
    let len = grid.len();
    let n = ScalarField::from_values(grid, cur.array(len)?)?;
    let c = ScalarField::from_values(grid, cur.array(len)?)?;
    let u = VectorField::from_components(
        ScalarField::from_values(grid, cur.array(len)?)?,
        ScalarField::from_values(grid, cur.array(len)?)?,
    );
    if cur.pos != bytes.len() {
        return Err(Error::Format(format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    let mut state = State::new(n, c, u)?;
    state.t = t;
    Ok(state)
}

pub fn write_snapshot(path: impl AsRef<Path>, state: &State) -> Result<()> {
    let mut f = BufWriter::new(File::create(path)?);
    f.write_all(&encode_snapshot(state))?;
    f.flush()?;
    Ok(())
}

/// Reads a snapshot written on the torus.
pub fn read_snapshot(path: impl AsRef<Path>) -> Result<State> {
    read_snapshot_as(path, BcMode::Torus)
}

pub fn read_snapshot_as(path: impl AsRef<Path>, bc_mode: BcMode) -> Result<State> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    decode_snapshot(&bytes, bc_mode)
}

/// One line of the time-series output.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeseriesRecord {
    pub t: f64,
    pub mass: f64,
    pub sup_c: f64,
    pub min_n: f64,
    pub fisher: f64,
    pub entropy: f64,
    pub lambda0: f64,
    pub lambda1: f64,
}

impl TimeseriesRecord {
    /// Record for `state`; without `lambdas` the entropy column is `int n ln n`.
    pub fn of(state: &State, coeffs: &CoefficientSet, k: f64, lambdas: Option<&LambdaConstants>) -> Result<Self> {
        let entropy = match lambdas {
            Some(l) => entropy_with(state, coeffs, k, l)?.total,
            None => cell_entropy(&state.n),
        };
        Ok(TimeseriesRecord {
            t: state.t,
            mass: mass(&state.n),
            sup_c: max_value(&state.c),
            min_n: min_value(&state.n),
            fisher: fisher(&state.n).value,
            entropy,
            lambda0: lambdas.map_or(f64::NAN, |l| l.lambda0),
            lambda1: lambdas.map_or(f64::NAN, |l| l.lambda1),
        })
    }
}

/// Writes one JSON object per line. Non-finite numbers become `null`.
pub fn emit_timeseries<W: Write, T: Serialize>(mut out: W, records: &[T]) -> Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::gaussian;

    fn random_state(grid: Grid, seed: u64) -> State {
        let mut k = 0u64;
        let mut draw = || {
            k += 1;
            f64::from_bits(gaussian(seed, 0, k).to_bits() ^ (k << 1))
        };
        let mut f = || ScalarField::from_values(grid, (0..grid.len()).map(|_| draw()).collect()).unwrap();
        let (n, c, ux, uy) = (f(), f(), f(), f());
        let mut s = State::new(n, c, VectorField::from_components(ux, uy)).unwrap();
        s.t = 0.123456789;
        s
    }

    fn bits(s: &State) -> Vec<u64> {
        [&s.n.values, &s.c.values, &s.u.x, &s.u.y]
            .iter()
            .flat_map(|v| v.iter().map(|x| x.to_bits()))
            .chain([s.t.to_bits()])
            .collect()
    }

    #[test]
    fn roundtrip_is_bitwise() {
        let g = Grid::new(16, 8, 1.5, 0.5, BcMode::Torus).unwrap();
        let s = random_state(g, 3);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.bin");
        write_snapshot(&p, &s).unwrap();
        let r = read_snapshot(&p).unwrap();
        assert_eq!(bits(&r), bits(&s));
        assert_eq!(r.n.grid, g);
    }

    #[test]
    fn file_size_is_header_plus_payload() {
        let g = Grid::unit_torus(64).unwrap();
        let s = State::new(ScalarField::zeros(g), ScalarField::zeros(g), VectorField::zeros(g)).unwrap();
        assert_eq!(encode_snapshot(&s).len(), 44 + 4 * 64 * 64 * 8);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let g = Grid::unit_torus(8).unwrap();
        let bytes = encode_snapshot(&random_state(g, 1));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_snapshot(&bad, BcMode::Torus), Err(Error::Format(_))));
        let mut v2 = bytes.clone();
        v2[4] = 2;
        assert!(matches!(decode_snapshot(&v2, BcMode::Torus), Err(Error::Format(_))));
        assert!(matches!(decode_snapshot(&bytes[..bytes.len() - 1], BcMode::Torus), Err(Error::Format(_))));
        assert!(matches!(decode_snapshot(&bytes[..20], BcMode::Torus), Err(Error::Format(_))));
    }

    #[test]
    fn ndjson_lines_parse_independently() {
        let g = Grid::unit_torus(16).unwrap();
        let co = CoefficientSet::default_for(g);
        let s = State::new(ScalarField::constant(g, 1.0), ScalarField::constant(g, 0.5), VectorField::zeros(g)).unwrap();
        let l = crate::diagnostics::lambda_constants(&co).unwrap();
        let recs = vec![
            TimeseriesRecord::of(&s, &co, 1.0, Some(&l)).unwrap(),
            TimeseriesRecord::of(&s, &co, 1.0, None).unwrap(),
        ];
        let mut buf = Vec::new();
        emit_timeseries(&mut buf, &recs).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 2);
        for line in lines {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            for key in ["t", "mass", "sup_c", "min_n", "fisher", "entropy", "lambda0", "lambda1"] {
                assert!(v.get(key).is_some(), "{key}");
            }
        }
        assert!(!text.contains(",\n"));
    }
}
