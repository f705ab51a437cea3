//! MEBF raster file format: a 24-byte header followed by raw little-endian
//! `f32` samples, band-major and row-major. Minimal on purpose so that
//! round-trips are bit-exact and tests can construct files byte by byte.
//!
//! Layout:
//! - bytes 0..4: magic `MEBF`
//! - bytes 4..8: version (u32, = 1)
//! - bytes 8..12: width (u32)
//! - bytes 12..16: height (u32)
//! - bytes 16..20: bands (u32)
//! - bytes 20..24: dtype (u32, = 0 for f32)
//! - payload: `width * height * bands` samples

use std::fs;
use std::path::Path;

use canopy_core::BinaryMask;

pub const MAGIC: [u8; 4] = *b"MEBF";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 0;
pub const HEADER_LEN: usize = 24;

#[derive(Debug, thiserror::Error)]
pub enum MebfError {
    #[error("reading {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: not an MEBF file (magic {magic:?})")]
    BadMagic { path: String, magic: [u8; 4] },
    #[error("{path}: unsupported version {version}")]
    BadVersion { path: String, version: u32 },
    #[error("{path}: unsupported dtype {dtype}")]
    BadDtype { path: String, dtype: u32 },
    #[error("{path}: payload holds {actual} bytes, header promises {expected}")]
    PayloadLength {
        path: String,
        expected: usize,
        actual: usize,
    },
    #[error("{path}: non-finite sample at index {index}")]
    NonFinite { path: String, index: usize },
    #[error("{path}: sample at index {index} is {value}, not a 0/1 mask value")]
    NotMaskValue {
        path: String,
        index: usize,
        value: f32,
    },
    #[error("{path}: {width}x{height}x{bands} raster does not fit in memory")]
    TooLarge {
        path: String,
        width: u32,
        height: u32,
        bands: u32,
    },
    #[error("sample buffer has {actual} samples, expected {expected}")]
    BufferLength { expected: usize, actual: usize },
}

/// A raster as stored on disk: dimensions plus samples, no acquisition
/// metadata. Callers attach meta from the manifest entry that referenced
/// the file.
#[derive(Debug, Clone, PartialEq)]
pub struct RawGrid {
    pub width: usize,
    pub height: usize,
    pub bands: usize,
    pub samples: Vec<f32>,
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

/// Serializes a grid to the MEBF byte layout.
pub fn encode(grid: &RawGrid) -> Result<Vec<u8>, MebfError> {
    let expected = grid.width * grid.height * grid.bands;
    if grid.samples.len() != expected {
        return Err(MebfError::BufferLength {
            expected,
            actual: grid.samples.len(),
        });
    }
    let mut bytes = Vec::with_capacity(HEADER_LEN + 4 * grid.samples.len());
    bytes.extend_from_slice(&MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(grid.width as u32).to_le_bytes());
    bytes.extend_from_slice(&(grid.height as u32).to_le_bytes());
    bytes.extend_from_slice(&(grid.bands as u32).to_le_bytes());
    bytes.extend_from_slice(&DTYPE_F32.to_le_bytes());
    for s in &grid.samples {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    Ok(bytes)
}

pub fn write_raster(path: &Path, grid: &RawGrid) -> Result<(), MebfError> {
    let bytes = encode(grid)?;
    fs::write(path, bytes).map_err(|source| MebfError::Write {
        path: path_str(path),
        source,
    })
}

/// Parses MEBF bytes. Rejects short payloads, trailing bytes, and
/// non-finite samples.
pub fn decode(path: &Path, bytes: &[u8]) -> Result<RawGrid, MebfError> {
    let p = || path_str(path);
    if bytes.len() < HEADER_LEN {
        return Err(MebfError::PayloadLength {
            path: p(),
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().expect("4-byte slice");
    if magic != MAGIC {
        return Err(MebfError::BadMagic { path: p(), magic });
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes"));
    let version = word(1);
    if version != VERSION {
        return Err(MebfError::BadVersion { path: p(), version });
    }
    let (width, height, bands) = (word(2), word(3), word(4));
    let dtype = word(5);
    if dtype != DTYPE_F32 {
        return Err(MebfError::BadDtype { path: p(), dtype });
    }

    let count = width as u64 * height as u64 * bands as u64;
    let payload_len = count.checked_mul(4).and_then(|n| usize::try_from(n).ok());
    let Some(payload_len) = payload_len else {
        return Err(MebfError::TooLarge {
            path: p(),
            width,
            height,
            bands,
        });
    };
    let actual = bytes.len() - HEADER_LEN;
    if actual != payload_len {
        return Err(MebfError::PayloadLength {
            path: p(),
            expected: payload_len,
            actual,
        });
    }

    let mut samples = Vec::with_capacity(count as usize);
    for (index, chunk) in bytes[HEADER_LEN..].chunks_exact(4).enumerate() {
        let s = f32::from_le_bytes(chunk.try_into().expect("4 bytes"));
        if !s.is_finite() {
            return Err(MebfError::NonFinite { path: p(), index });
        }
        samples.push(s);
    }
    Ok(RawGrid {
        width: width as usize,
        height: height as usize,
        bands: bands as usize,
        samples,
    })
}

pub fn read_raster(path: &Path) -> Result<RawGrid, MebfError> {
    let bytes = fs::read(path).map_err(|source| MebfError::Read {
        path: path_str(path),
        source,
    })?;
    decode(path, &bytes)
}

/// Writes a binary mask as a 1-band raster of exact 0.0/1.0 samples.
pub fn write_mask(path: &Path, mask: &BinaryMask) -> Result<(), MebfError> {
    let grid = RawGrid {
        width: mask.width(),
        height: mask.height(),
        bands: 1,
        samples: mask.bits().iter().map(|&b| b as f32).collect(),
    };
    write_raster(path, &grid)
}

/// Reads a 1-band raster whose samples are all exactly 0.0 or 1.0.
pub fn read_mask(path: &Path) -> Result<BinaryMask, MebfError> {
    let grid = read_raster(path)?;
    if grid.bands != 1 {
        return Err(MebfError::NotMaskValue {
            path: path_str(path),
            index: 0,
            value: grid.bands as f32,
        });
    }
    let mut bits = Vec::with_capacity(grid.samples.len());
    for (index, &s) in grid.samples.iter().enumerate() {
        if s == 0.0 {
            bits.push(0);
        } else if s == 1.0 {
            bits.push(1);
        } else {
            return Err(MebfError::NotMaskValue {
                path: path_str(path),
                index,
                value: s,
            });
        }
    }
    Ok(BinaryMask::new(grid.width, grid.height, bits).expect("bits sized to grid"))
}
