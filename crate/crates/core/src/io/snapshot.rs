//! Binary state snapshots.
//!
//! Layout, all little-endian: the magic `PEQ1`, a `u32` format version, `Nx`,
//! `Ny`, `Nz` as `u32`, `Lx`, `Ly`, `h` and `t` as `f64`, then the arrays
//! `v1`, `v2`, `T` (`Nx Ny Nz` values each, x-fastest), `p_s` (`Nx Ny`) and
//! `w` (`Nx Ny Nz`).

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fields::State;
use crate::geometry::Grid;
use crate::operators::{Field2, Field3, VecField3};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"PEQ1";
pub const SNAPSHOT_VERSION: u32 = 1;
const HEADER_BYTES: usize = 4 + 4 + 3 * 4 + 4 * 8;

/// Contents of a snapshot file.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub grid: Grid,
    pub state: State,
    pub p_s: Field2,
    pub w: Field3,
}

fn encode(grid: &Grid, state: &State, p_s: &Field2, w: &Field3) -> Result<Vec<u8>> {
    let shape = (grid.nx, grid.ny, grid.nz);
    for (name, s) in [("v1", state.v.x.shape()), ("v2", state.v.y.shape()), ("T", state.temperature.shape()), ("w", w.shape())] {
        if s != shape {
            return Err(Error::Format(format!("{name} has shape {s:?}, grid is {shape:?}")));
        }
    }
    if p_s.shape() != (grid.nx, grid.ny) {
        return Err(Error::Format(format!("p_s has shape {:?}, grid is {:?}", p_s.shape(), (grid.nx, grid.ny))));
    }
    let cells = grid.cells();
    let mut out = Vec::with_capacity(HEADER_BYTES + 8 * (4 * cells + grid.columns()));
    out.extend_from_slice(&SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    for n in [grid.nx, grid.ny, grid.nz] {
        let n = u32::try_from(n).map_err(|_| Error::Format(format!("grid dimension {n} does not fit in u32")))?;
        out.extend_from_slice(&n.to_le_bytes());
    }
    for v in [grid.lx, grid.ly, grid.h, state.time] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for field in [state.v.x.data(), state.v.y.data(), state.temperature.data(), p_s.data(), w.data()] {
        for v in field {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

/// Writes a snapshot through a temporary file and a rename, so a reader never
/// sees a partially written file.
pub fn write_snapshot(state: &State, p_s: &Field2, w: &Field3, grid: &Grid, path: &Path) -> Result<()> {
    let bytes = encode(grid, state, p_s, w)?;
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().ok_or_else(|| Error::Format(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut a = [0u8; N];
        a.copy_from_slice(&self.bytes[self.pos..self.pos + N]);
        self.pos += N;
        a
    }

    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }

    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take())
    }

    fn array(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.f64()).collect()
    }
}

/// Decodes a snapshot; with `expected` set, the stored grid must match it.
pub fn decode_snapshot(bytes: &[u8], expected: Option<&Grid>) -> Result<Snapshot> {
    if bytes.len() < 8 {
        return Err(Error::Truncated { expected: HEADER_BYTES, found: bytes.len() });
    }
    if bytes[..4] != SNAPSHOT_MAGIC {
        return Err(Error::Format(format!("bad magic {:?}, expected {:?}", &bytes[..4], SNAPSHOT_MAGIC)));
    }
    let mut r = Reader { bytes, pos: 4 };
    let version = r.u32();
    if version != SNAPSHOT_VERSION {
        return Err(Error::Format(format!("unsupported snapshot version {version}, expected {SNAPSHOT_VERSION}")));
    }
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Truncated { expected: HEADER_BYTES, found: bytes.len() });
    }
    let (nx, ny, nz) = (r.u32() as usize, r.u32() as usize, r.u32() as usize);
    let (lx, ly, h, t) = (r.f64(), r.f64(), r.f64(), r.f64());
    let grid = Grid::new(lx, ly, h, nx, ny, nz).map_err(|e| Error::Format(format!("invalid grid in snapshot: {e}")))?;
    if let Some(g) = expected {
        if (g.nx, g.ny, g.nz) != (nx, ny, nz) || (g.lx, g.ly, g.h) != (lx, ly, h) {
            return Err(Error::Format(format!(
                "snapshot grid {nx}x{ny}x{nz} over {lx}x{ly}x{h} does not match expected {}x{}x{} over {}x{}x{}",
                g.nx, g.ny, g.nz, g.lx, g.ly, g.h
            )));
        }
    }
    let cells = grid.cells();
    let total = HEADER_BYTES + 8 * (4 * cells + grid.columns());
    if bytes.len() < total {
        return Err(Error::Truncated { expected: total, found: bytes.len() });
    }
    if bytes.len() > total {
        return Err(Error::Format(format!("{} trailing bytes after snapshot data", bytes.len() - total)));
    }
    let v1 = Field3::from_vec(nx, ny, nz, r.array(cells));
    let v2 = Field3::from_vec(nx, ny, nz, r.array(cells));
    let temperature = Field3::from_vec(nx, ny, nz, r.array(cells));
    let p_s = Field2::from_vec(nx, ny, r.array(grid.columns()));
    let w = Field3::from_vec(nx, ny, nz, r.array(cells));
    Ok(Snapshot { grid, state: State { v: VecField3 { x: v1, y: v2 }, temperature, time: t }, p_s, w })
}

pub fn read_snapshot(path: &Path, expected: Option<&Grid>) -> Result<Snapshot> {
    decode_snapshot(&std::fs::read(path)?, expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{apply_bcs_velocity, make_smooth_state};
    use crate::operators::diagnose_w;

    fn sample() -> (Grid, State, Field2, Field3) {
        let g = Grid::new(1.5, 0.75, 0.3, 6, 5, 4).unwrap();
        let mut s = make_smooth_state(&g, 1.0, 9);
        s.time = 0.125;
        let p = Field2::from_fn(6, 5, |i, j| (i as f64).sin() - (j as f64 * 0.3).cos() * 1e-300);
        let (vx, vy) = apply_bcs_velocity(&s);
        let w = diagnose_w(&vx, &vy, &g);
        (g, s, p, w)
    }

    fn bits(f: &[f64]) -> Vec<u64> {
        f.iter().map(|v| v.to_bits()).collect()
    }

    #[test]
    fn roundtrip_is_bit_identical() {
        let (g, s, p, w) = sample();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.peq");
        write_snapshot(&s, &p, &w, &g, &path).unwrap();
        let back = read_snapshot(&path, Some(&g)).unwrap();
        assert_eq!(back.grid, g);
        assert_eq!(back.state.time.to_bits(), s.time.to_bits());
        assert_eq!(bits(back.state.v.x.data()), bits(s.v.x.data()));
        assert_eq!(bits(back.state.v.y.data()), bits(s.v.y.data()));
        assert_eq!(bits(back.state.temperature.data()), bits(s.temperature.data()));
        assert_eq!(bits(back.p_s.data()), bits(p.data()));
        assert_eq!(bits(back.w.data()), bits(w.data()));
        let again = encode(&back.grid, &back.state, &back.p_s, &back.w).unwrap();
        assert_eq!(again, std::fs::read(&path).unwrap());
    }

    #[test]
    fn layout_matches_documentation() {
        let (g, s, p, w) = sample();
        let b = encode(&g, &s, &p, &w).unwrap();
        assert_eq!(&b[..4], b"PEQ1");
        assert_eq!(u32::from_le_bytes(b[4..8].try_into().unwrap()), 1);
        assert_eq!(u32::from_le_bytes(b[8..12].try_into().unwrap()), 6);
        assert_eq!(f64::from_le_bytes(b[44..52].try_into().unwrap()), 0.125);
        assert_eq!(f64::from_le_bytes(b[52..60].try_into().unwrap()), s.v.x.data()[0]);
        assert_eq!(b.len(), 52 + 8 * (4 * 120 + 30));
    }

    #[test]
    fn truncation_is_detected() {
        let (g, s, p, w) = sample();
        let b = encode(&g, &s, &p, &w).unwrap();
        for cut in [3, 20, 60, b.len() - 1] {
            match decode_snapshot(&b[..cut], None) {
                Err(Error::Truncated { found, .. }) => assert_eq!(found, cut),
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn wrong_magic_version_or_grid_is_rejected() {
        let (g, s, p, w) = sample();
        let mut b = encode(&g, &s, &p, &w).unwrap();
        let good = b.clone();
        b[0] = b'X';
        assert!(matches!(decode_snapshot(&b, None), Err(Error::Format(_))));
        let mut b = good.clone();
        b[4] = 2;
        assert!(decode_snapshot(&b, None).unwrap_err().to_string().contains("version"));
        let other = Grid::new(1.5, 0.75, 0.3, 6, 5, 5).unwrap();
        assert!(decode_snapshot(&good, Some(&other)).unwrap_err().to_string().contains("does not match"));
        let mut long = good;
        long.push(0);
        assert!(decode_snapshot(&long, None).is_err());
    }
}
