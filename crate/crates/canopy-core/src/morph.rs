//! Binary morphology: erosion, dilation, and the opening used to scrub
//! isolated false positives from fused masks.
//!
//! Out-of-bounds pixels read as 0 for both operations. Erosion therefore
//! clears any pixel whose structuring element spills past the border.

use alloc::vec;
use alloc::vec::Vec;

use crate::raster::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum SeShape {
    #[default]
    Square,
    Cross,
}

/// Structuring element centered on the origin: a full square of side
/// `2 * radius + 1`, or a cross of four axis-aligned arms of length
/// `radius`. Both are symmetric about the origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct StructElement {
    pub shape: SeShape,
    pub radius: u32,
}

impl Default for StructElement {
    fn default() -> Self {
        Self {
            shape: SeShape::Square,
            radius: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MorphError {
    #[error("structuring element radius must be at least 1, got {0}")]
    ZeroRadius(u32),
}

impl StructElement {
    pub fn validate(&self) -> Result<(), MorphError> {
        if self.radius == 0 {
            return Err(MorphError::ZeroRadius(self.radius));
        }
        Ok(())
    }

    /// Whether the element covers the given offset from its origin.
    pub fn contains(&self, dy: i64, dx: i64) -> bool {
        let r = self.radius as i64;
        match self.shape {
            SeShape::Square => dy.abs() <= r && dx.abs() <= r,
            SeShape::Cross => (dy == 0 && dx.abs() <= r) || (dx == 0 && dy.abs() <= r),
        }
    }

    fn offsets(&self) -> Vec<(i64, i64)> {
        let r = self.radius as i64;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if self.contains(dy, dx) {
                    out.push((dy, dx));
                }
            }
        }
        out
    }
}

/// 1D all-of-window pass along rows: `out[row][col]` is 1 iff the whole
/// window `col - r ..= col + r` lies in bounds and holds only 1s.
fn erode_rows(src: &[u8], w: usize, h: usize, r: usize) -> Vec<u8> {
    let mut out = vec![0u8; w * h];
    for row in 0..h {
        let line = &src[row * w..(row + 1) * w];
        for col in 0..w {
            if col < r || col + r >= w {
                continue;
            }
            if line[col - r..=col + r].iter().all(|&b| b == 1) {
                out[row * w + col] = 1;
            }
        }
    }
    out
}

/// 1D any-of-window pass along rows, window clipped at the borders.
fn dilate_rows(src: &[u8], w: usize, h: usize, r: usize) -> Vec<u8> {
    let mut out = vec![0u8; w * h];
    for row in 0..h {
        let line = &src[row * w..(row + 1) * w];
        for col in 0..w {
            let lo = col.saturating_sub(r);
            let hi = (col + r).min(w.saturating_sub(1));
            if line[lo..=hi].contains(&1) {
                out[row * w + col] = 1;
            }
        }
    }
    out
}

/// Transpose of a row-major bit grid, used to reuse the row passes for
/// columns.
fn transpose(src: &[u8], w: usize, h: usize) -> Vec<u8> {
    let mut out = vec![0u8; w * h];
    for row in 0..h {
        for col in 0..w {
            out[col * h + row] = src[row * w + col];
        }
    }
    out
}

fn scan_offsets(mask: &BinaryMask, se: &StructElement, require_all: bool) -> Vec<u8> {
    let (w, h) = (mask.width() as i64, mask.height() as i64);
    let offsets = se.offsets();
    let mut bits = vec![0u8; mask.bits().len()];
    for row in 0..h {
        for col in 0..w {
            let mut hit_any = false;
            let mut hit_all = true;
            for &(dy, dx) in &offsets {
                let (rr, cc) = (row + dy, col + dx);
                let v = if rr < 0 || cc < 0 || rr >= h || cc >= w {
                    0
                } else {
                    mask.get(rr as usize, cc as usize)
                };
                hit_any |= v == 1;
                hit_all &= v == 1;
            }
            let keep = if require_all { hit_all } else { hit_any };
            bits[(row * w + col) as usize] = keep as u8;
        }
    }
    bits
}

/// Erosion: a pixel survives iff every element offset lands on a 1 (out of
/// bounds counts as 0).
pub fn erode(mask: &BinaryMask, se: &StructElement) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let r = se.radius as usize;
    let bits = match se.shape {
        SeShape::Square => {
            // Separable: a square window of all-1s is a horizontal run of
            // all-1s in every row of a vertical run.
            let rows = erode_rows(mask.bits(), w, h, r);
            let cols = erode_rows(&transpose(&rows, w, h), h, w, r);
            transpose(&cols, h, w)
        }
        SeShape::Cross => scan_offsets(mask, se, true),
    };
    BinaryMask::new(w, h, bits).expect("same dimensions as input")
}

/// Dilation: a pixel lights up iff any element offset lands on a 1.
pub fn dilate(mask: &BinaryMask, se: &StructElement) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let r = se.radius as usize;
    let bits = match se.shape {
        SeShape::Square => {
            let rows = dilate_rows(mask.bits(), w, h, r);
            let cols = dilate_rows(&transpose(&rows, w, h), h, w, r);
            transpose(&cols, h, w)
        }
        SeShape::Cross => scan_offsets(mask, se, false),
    };
    BinaryMask::new(w, h, bits).expect("same dimensions as input")
}

/// Morphological opening: erosion followed by dilation with the same
/// element. Removes objects the element cannot fit inside while leaving
/// larger shapes as they were.
pub fn opening(mask: &BinaryMask, se: &StructElement) -> BinaryMask {
    dilate(&erode(mask, se), se)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn se(shape: SeShape, radius: u32) -> StructElement {
        StructElement { shape, radius }
    }

    fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> BinaryMask {
        let bits = (0..w * h)
            .map(|_| u8::from(rng.random_bool(density)))
            .collect();
        BinaryMask::new(w, h, bits).unwrap()
    }

    /// Direct neighborhood scan straight off the definitions; the
    /// implementation must match it bit for bit.
    fn oracle(mask: &BinaryMask, se: &StructElement, require_all: bool) -> BinaryMask {
        let (w, h) = (mask.width() as i64, mask.height() as i64);
        let r = se.radius as i64;
        let mut bits = vec![0u8; mask.bits().len()];
        for row in 0..h {
            for col in 0..w {
                let mut any = false;
                let mut all = true;
                for dy in -r..=r {
                    for dx in -r..=r {
                        if !se.contains(dy, dx) {
                            continue;
                        }
                        let (rr, cc) = (row + dy, col + dx);
                        let v = if rr < 0 || cc < 0 || rr >= h || cc >= w {
                            0
                        } else {
                            mask.get(rr as usize, cc as usize)
                        };
                        any |= v == 1;
                        all &= v == 1;
                    }
                }
                bits[(row * w + col) as usize] = if require_all { all } else { any } as u8;
            }
        }
        BinaryMask::new(mask.width(), mask.height(), bits).unwrap()
    }

    #[test]
    fn zeros_stay_zeros() {
        let m = BinaryMask::zeros(8, 8);
        let e = se(SeShape::Square, 1);
        assert_eq!(erode(&m, &e), m);
        assert_eq!(dilate(&m, &e), m);
    }

    #[test]
    fn isolated_pixel_erodes_away() {
        let mut bits = vec![0u8; 25];
        bits[12] = 1;
        let m = BinaryMask::new(5, 5, bits).unwrap();
        assert_eq!(erode(&m, &se(SeShape::Square, 1)).ones(), 0);
        assert_eq!(opening(&m, &se(SeShape::Square, 1)).ones(), 0);
    }

    #[test]
    fn dilated_center_pixel_is_a_block() {
        let mut bits = vec![0u8; 25];
        bits[12] = 1;
        let m = BinaryMask::new(5, 5, bits).unwrap();
        let d = dilate(&m, &se(SeShape::Square, 1));
        assert_eq!(d.ones(), 9);
        for row in 1..=3 {
            for col in 1..=3 {
                assert_eq!(d.get(row, col), 1);
            }
        }
    }

    #[test]
    fn cross_dilation_is_a_plus_sign() {
        let mut bits = vec![0u8; 25];
        bits[12] = 1;
        let m = BinaryMask::new(5, 5, bits).unwrap();
        let d = dilate(&m, &se(SeShape::Cross, 1));
        assert_eq!(d.ones(), 5);
        assert_eq!(d.get(2, 2), 1);
        assert_eq!(d.get(1, 2), 1);
        assert_eq!(d.get(3, 2), 1);
        assert_eq!(d.get(2, 1), 1);
        assert_eq!(d.get(2, 3), 1);
        assert_eq!(d.get(1, 1), 0);
    }

    #[test]
    fn matches_oracle_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for shape in [SeShape::Square, SeShape::Cross] {
            for radius in [1u32, 2] {
                let e = se(shape, radius);
                for _ in 0..8 {
                    let m = random_mask(&mut rng, 32, 32, 0.5);
                    assert_eq!(erode(&m, &e), oracle(&m, &e, true), "{e:?} erode");
                    assert_eq!(dilate(&m, &e), oracle(&m, &e, false), "{e:?} dilate");
                }
            }
        }
    }

    #[test]
    fn all_ones_opening_is_identity() {
        for n in [16usize, 256] {
            let m = BinaryMask::new(n, n, vec![1; n * n]).unwrap();
            assert_eq!(opening(&m, &se(SeShape::Square, 1)), m);
        }
    }

    #[test]
    fn opening_laws_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let e = se(SeShape::Square, 1);
        for _ in 0..10 {
            let m = random_mask(&mut rng, 24, 24, 0.6);
            let opened = opening(&m, &e);

            assert!(opened.subset_of(&m), "anti-extensive");
            assert_eq!(opening(&opened, &e), opened, "idempotent");

            // Grow m into a superset and check monotonicity.
            let grown_bits: Vec<u8> = m
                .bits()
                .iter()
                .map(|&b| b | u8::from(rng.random_bool(0.2)))
                .collect();
            let grown = BinaryMask::new(24, 24, grown_bits).unwrap();
            assert!(opening(&m, &e).subset_of(&opening(&grown, &e)), "monotone");
        }
    }

    #[test]
    fn interior_duality_with_complement() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for shape in [SeShape::Square, SeShape::Cross] {
            let e = se(shape, 1);
            let m = random_mask(&mut rng, 16, 16, 0.5);
            let eroded = erode(&m, &e);
            let dual = dilate(&m.complement(), &e).complement();
            for row in 2..14 {
                for col in 2..14 {
                    assert_eq!(eroded.get(row, col), dual.get(row, col));
                }
            }
        }
    }

    #[test]
    fn zero_radius_rejected() {
        assert_eq!(
            se(SeShape::Square, 0).validate().unwrap_err(),
            MorphError::ZeroRadius(0)
        );
    }
}
