//! Binary field snapshots.
//!
//! Layout, all little-endian:
//!
//! | bytes        | content                      |
//! |--------------|------------------------------|
//! | 0..8         | magic `GMFIELD1`             |
//! | 8..12        | `nx` as `u32`                |
//! | 12..16       | `ny` as `u32`                |
//! | 16..24       | `t` as `f64`                 |
//! | 24..         | `nx * ny` `f64`, row-major   |

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use thiserror::Error;

use crate::grid::{Field, Grid, GridError};

pub const MAGIC: &[u8; 8] = b"GMFIELD1";
const HEADER_LEN: usize = 24;

#[derive(Debug, Error)]
pub enum SnapshotError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("bad magic: not a GMFIELD1 snapshot")]
    BadMagic,
    #[error("length mismatch: header promises {expected} bytes, file has {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("grid dimensions do not fit the 32-bit header")]
    TooLarge,
    #[error("snapshot is {nx}x{ny} but the target grid is {gx}x{gy}")]
    ShapeMismatch {
        nx: usize,
        ny: usize,
        gx: usize,
        gy: usize,
    },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Decoded snapshot; carries no physical extents.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub t: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    /// Attaches the snapshot to a grid of matching shape.
    pub fn into_field(self, grid: Grid) -> Result<Field, SnapshotError> {
        if grid.nx() != self.nx || grid.ny() != self.ny {
            return Err(SnapshotError::ShapeMismatch {
                nx: self.nx,
                ny: self.ny,
                gx: grid.nx(),
                gy: grid.ny(),
            });
        }
        Ok(Field::from_values(grid, self.values)?)
    }
}

pub fn encode_snapshot(field: &Field, t: f64) -> Result<Vec<u8>, SnapshotError> {
    let g = field.grid();
    let nx = u32::try_from(g.nx()).map_err(|_| SnapshotError::TooLarge)?;
    let ny = u32::try_from(g.ny()).map_err(|_| SnapshotError::TooLarge)?;
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * g.len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&nx.to_le_bytes());
    buf.extend_from_slice(&ny.to_le_bytes());
    buf.extend_from_slice(&t.to_le_bytes());
    for v in field.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

pub fn decode_snapshot(bytes: &[u8]) -> Result<Snapshot, SnapshotError> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(SnapshotError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(SnapshotError::LengthMismatch {
            expected: HEADER_LEN,
            got: bytes.len(),
        });
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    let nx = word(8);
    let ny = word(12);
    let t = f64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = nx
        .checked_mul(ny)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(HEADER_LEN))
        .ok_or(SnapshotError::TooLarge)?;
    if bytes.len() != expected {
        return Err(SnapshotError::LengthMismatch {
            expected,
            got: bytes.len(),
        });
    }
    let values = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(Snapshot { nx, ny, t, values })
}

pub fn write_snapshot(field: &Field, t: f64, path: &Path) -> Result<(), SnapshotError> {
    let bytes = encode_snapshot(field, t)?;
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, SnapshotError> {
    decode_snapshot(&fs::read(path)?)
}

/// Reads a snapshot and attaches it to `grid`.
pub fn read_snapshot_field(path: &Path, grid: Grid) -> Result<(Field, f64), SnapshotError> {
    let snap = read_snapshot(path)?;
    let t = snap.t;
    Ok((snap.into_field(grid)?, t))
}
