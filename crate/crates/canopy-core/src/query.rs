//! Query keys: the (latitude, longitude, year, month) tuples at which a
//! deforestation decision is requested, with month-granular calendar
//! arithmetic for adjacent-month grouping.

use crate::raster::{ImageMeta, RasterError};

/// A location/time at which a prediction is requested. Equality is exact on
/// all four fields; ordering uses the IEEE total order on lat/lon so keys
/// can serve as deterministic map keys.
#[derive(Debug, Clone, Copy)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QueryKey {
    pub lat: f64,
    pub lon: f64,
    pub year: i32,
    pub month: u8,
}

impl QueryKey {
    pub fn new(lat: f64, lon: f64, year: i32, month: u8) -> Result<Self, RasterError> {
        if !(1..=12).contains(&month) {
            return Err(RasterError::BadMonth(month));
        }
        Ok(Self {
            lat,
            lon,
            year,
            month,
        })
    }

    pub fn from_meta(meta: &ImageMeta) -> Self {
        Self {
            lat: meta.lat,
            lon: meta.lon,
            year: meta.year,
            month: meta.month,
        }
    }

    /// Months since year 0: `12 * year + (month - 1)`. Calendar distance
    /// between two keys is the difference of their indices, so December and
    /// the following January are one month apart.
    pub fn month_index(&self) -> i64 {
        month_index(self.year, self.month)
    }

    /// Signed whole-month offset from `other` to `self`.
    pub fn months_from(&self, other: &QueryKey) -> i64 {
        self.month_index() - other.month_index()
    }

    /// True when both keys name the same (lat, lon), bit-for-bit.
    pub fn same_location(&self, other: &QueryKey) -> bool {
        self.lat.total_cmp(&other.lat).is_eq() && self.lon.total_cmp(&other.lon).is_eq()
    }
}

/// Month linearization shared by grouping and the synthetic generator.
pub fn month_index(year: i32, month: u8) -> i64 {
    12 * year as i64 + (month as i64 - 1)
}

impl PartialEq for QueryKey {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other).is_eq()
    }
}

impl Eq for QueryKey {}

impl PartialOrd for QueryKey {
    fn partial_cmp(&self, other: &Self) -> Option<core::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for QueryKey {
    fn cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.lat
            .total_cmp(&other.lat)
            .then(self.lon.total_cmp(&other.lon))
            .then(self.year.cmp(&other.year))
            .then(self.month.cmp(&other.month))
    }
}

impl core::fmt::Display for QueryKey {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(
            f,
            "({}, {}, {}-{:02})",
            self.lat, self.lon, self.year, self.month
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn month_arithmetic_crosses_year_boundary() {
        let dec = QueryKey::new(-3.5, -54.8, 2020, 12).unwrap();
        let jan = QueryKey::new(-3.5, -54.8, 2021, 1).unwrap();
        assert_eq!(jan.months_from(&dec), 1);
        assert_eq!(dec.months_from(&jan), -1);
    }

    #[test]
    fn month_index_is_twelve_per_year() {
        assert_eq!(month_index(2021, 1) - month_index(2020, 1), 12);
        assert_eq!(month_index(2020, 7) - month_index(2020, 6), 1);
    }

    #[test]
    fn equality_is_exact_on_all_fields() {
        let a = QueryKey::new(-3.5, -54.8, 2020, 6).unwrap();
        let b = QueryKey::new(-3.5, -54.8, 2020, 6).unwrap();
        let c = QueryKey::new(-3.5000001, -54.8, 2020, 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(!a.same_location(&c));
    }

    #[test]
    fn rejects_month_zero_and_thirteen() {
        assert!(QueryKey::new(0.0, 0.0, 2020, 0).is_err());
        assert!(QueryKey::new(0.0, 0.0, 2020, 13).is_err());
    }
}
