//! Temporal fusion of probability masks: month-based weighting, two-stage
//! sigma outlier filtering, weighted averaging, and the ensemble threshold
//! that produces the final per-query binary decision.
//!
//! The filter targets two observed failure modes: completely black masks
//! (a model predicting nothing) and masks whose deforestation fraction sits
//! far from the rest of the month group. Both show up as outlying mask
//! ratios, so filtering happens on the ratio statistic alone.

use alloc::vec::Vec;

use crate::raster::{BinaryMask, ProbMask, RasterError};

/// Knobs for the fusion stage. Thresholds are compared in `f32` (the
/// sample domain), so a mask holding exactly the threshold value is never
/// counted as exceeding it.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct FusionConfig {
    /// Weight of masks acquired in the query month itself.
    pub current_month_weight: f64,
    /// Weight of masks from neighboring months inside the window.
    pub adjacent_month_weight: f64,
    /// How many months before and after the query month contribute masks.
    pub window_months: u32,
    /// Stage-1 band half-width in standard deviations.
    pub sigma_stage1: f64,
    /// Stage-2 band half-width in standard deviations.
    pub sigma_stage2: f64,
    /// Below this population the filter passes input through untouched.
    pub min_population_for_filter: usize,
    /// Per-mask binarization cut used only to compute mask ratios.
    pub ratio_binarize_threshold: f64,
    /// Final cut on the weighted average; strictly above → deforested.
    pub ensemble_threshold: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            current_month_weight: 2.0,
            adjacent_month_weight: 1.0,
            window_months: 1,
            sigma_stage1: 3.0,
            sigma_stage2: 1.0,
            min_population_for_filter: 3,
            ratio_binarize_threshold: 0.5,
            ensemble_threshold: 0.4,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<(), FusionError> {
        for w in [self.current_month_weight, self.adjacent_month_weight] {
            if !(w.is_finite() && w > 0.0) {
                return Err(FusionError::NonPositiveWeight(w));
            }
        }
        if !(self.sigma_stage2 > 0.0 && self.sigma_stage1 >= self.sigma_stage2) {
            return Err(FusionError::SigmaOrder {
                stage1: self.sigma_stage1,
                stage2: self.sigma_stage2,
            });
        }
        if !(self.ensemble_threshold > 0.0 && self.ensemble_threshold < 1.0) {
            return Err(FusionError::ThresholdOutOfRange {
                name: "ensemble_threshold",
                value: self.ensemble_threshold,
            });
        }
        if !(0.0..=1.0).contains(&self.ratio_binarize_threshold) {
            return Err(FusionError::ThresholdOutOfRange {
                name: "ratio_binarize_threshold",
                value: self.ratio_binarize_threshold,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FusionError {
    #[error("month offset {offset} outside window of ±{window}")]
    OffsetOutsideWindow { offset: i32, window: u32 },
    #[error("no masks to fuse")]
    EmptyInput,
    #[error("mask is {actual_w}x{actual_h}, expected {expected_w}x{expected_h}")]
    ShapeMismatch {
        expected_w: usize,
        expected_h: usize,
        actual_w: usize,
        actual_h: usize,
    },
    #[error("weights must be positive and finite, got {0}")]
    NonPositiveWeight(f64),
    #[error("need sigma_stage1 >= sigma_stage2 > 0, got {stage1} and {stage2}")]
    SigmaOrder { stage1: f64, stage2: f64 },
    #[error("{name} out of range: {value}")]
    ThresholdOutOfRange { name: &'static str, value: f64 },
    #[error(transparent)]
    Raster(#[from] RasterError),
}

/// A probability mask annotated with its fusion weight and its month
/// distance from the query (0 = the query month itself).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedMask {
    pub mask: ProbMask,
    pub weight: f64,
    pub month_offset: i32,
}

/// Hard per-pixel cut of a probability mask: 1 iff `prob > threshold`.
pub fn binarize(mask: &ProbMask, threshold: f64) -> BinaryMask {
    let t = threshold as f32;
    let bits = mask.probs().iter().map(|&p| u8::from(p > t)).collect();
    BinaryMask::new(mask.width(), mask.height(), bits).expect("bits are 0/1 and sized to the mask")
}

/// Attaches weights by month offset: the query month gets
/// `current_month_weight`, everything else in the window gets
/// `adjacent_month_weight`.
pub fn assign_weights(
    group: Vec<(ProbMask, i32)>,
    cfg: &FusionConfig,
) -> Result<Vec<WeightedMask>, FusionError> {
    cfg.validate()?;
    let mut out = Vec::with_capacity(group.len());
    for (mask, month_offset) in group {
        if month_offset.unsigned_abs() > cfg.window_months {
            return Err(FusionError::OffsetOutsideWindow {
                offset: month_offset,
                window: cfg.window_months,
            });
        }
        let weight = if month_offset == 0 {
            cfg.current_month_weight
        } else {
            cfg.adjacent_month_weight
        };
        out.push(WeightedMask {
            mask,
            weight,
            month_offset,
        });
    }
    Ok(out)
}

/// What the sigma filter did to one mask group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FilterStats {
    pub input: usize,
    pub stage1_removed: usize,
    pub stage2_removed: usize,
    /// Population was below the minimum; both stages were bypassed.
    pub population_guarded: bool,
}

impl FilterStats {
    pub fn survivors(&self) -> usize {
        self.input - self.stage1_removed - self.stage2_removed
    }
}

fn ratio_of(mask: &ProbMask, cfg: &FusionConfig) -> f64 {
    binarize(mask, cfg.ratio_binarize_threshold)
        .mask_ratio()
        .unwrap_or(0.0)
}

fn mean_and_sigma(survivors: &[(usize, f64)]) -> (f64, f64) {
    let n = survivors.len() as f64;
    let mu = survivors.iter().map(|&(_, r)| r).sum::<f64>() / n;
    let var = survivors
        .iter()
        .map(|&(_, r)| (r - mu) * (r - mu))
        .sum::<f64>()
        / n;
    (mu, libm::sqrt(var))
}

/// Keeps survivors within `k` population standard deviations of the mean
/// (inclusive). A stage that would remove everything is skipped instead.
fn sigma_stage(survivors: Vec<(usize, f64)>, k: f64) -> (Vec<(usize, f64)>, usize) {
    let (mu, sigma) = mean_and_sigma(&survivors);
    let band = k * sigma;
    let kept: Vec<(usize, f64)> = survivors
        .iter()
        .copied()
        .filter(|&(_, r)| (r - mu).abs() <= band)
        .collect();
    if kept.is_empty() {
        (survivors, 0)
    } else {
        let removed = survivors.len() - kept.len();
        (kept, removed)
    }
}

/// Two-stage outlier filter on mask ratios, reporting per-stage removals.
///
/// Each mask's statistic is the 1-fraction of its binarization at
/// `ratio_binarize_threshold`. Stage 1 keeps masks within
/// `sigma_stage1` population standard deviations of the group mean; stage 2
/// recomputes mean and deviation over the stage-1 survivors and keeps those
/// within `sigma_stage2`. Both boundaries are inclusive, so a group of
/// identical ratios (sigma 0) keeps itself. The population guard applies at
/// entry only: groups below `min_population_for_filter` pass through, but a
/// stage-1 result that small still goes through stage 2.
pub fn sigma_filter_with_stats(
    masks: Vec<WeightedMask>,
    cfg: &FusionConfig,
) -> (Vec<WeightedMask>, FilterStats) {
    let mut stats = FilterStats {
        input: masks.len(),
        ..FilterStats::default()
    };
    if masks.len() < cfg.min_population_for_filter {
        stats.population_guarded = true;
        return (masks, stats);
    }

    let survivors: Vec<(usize, f64)> = masks
        .iter()
        .enumerate()
        .map(|(i, wm)| (i, ratio_of(&wm.mask, cfg)))
        .collect();
    let (survivors, removed1) = sigma_stage(survivors, cfg.sigma_stage1);
    let (survivors, removed2) = sigma_stage(survivors, cfg.sigma_stage2);
    stats.stage1_removed = removed1;
    stats.stage2_removed = removed2;

    let keep: alloc::collections::BTreeSet<usize> = survivors.into_iter().map(|(i, _)| i).collect();
    let kept = masks
        .into_iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, wm)| wm)
        .collect();
    (kept, stats)
}

/// [`sigma_filter_with_stats`] without the bookkeeping.
pub fn sigma_filter(masks: Vec<WeightedMask>, cfg: &FusionConfig) -> Vec<WeightedMask> {
    sigma_filter_with_stats(masks, cfg).0
}

/// Per-pixel weighted mean of the masks. Accumulates in `f64` in list
/// order; the result is always inside `[0, 1]`. Output meta is taken from
/// the first mask.
pub fn weighted_average(masks: &[WeightedMask]) -> Result<ProbMask, FusionError> {
    let first = masks.first().ok_or(FusionError::EmptyInput)?;
    let (w, h) = (first.mask.width(), first.mask.height());
    let plane = w * h;

    let mut num = alloc::vec![0.0f64; plane];
    let mut den = 0.0f64;
    for wm in masks {
        if wm.mask.width() != w || wm.mask.height() != h {
            return Err(FusionError::ShapeMismatch {
                expected_w: w,
                expected_h: h,
                actual_w: wm.mask.width(),
                actual_h: wm.mask.height(),
            });
        }
        if !(wm.weight.is_finite() && wm.weight > 0.0) {
            return Err(FusionError::NonPositiveWeight(wm.weight));
        }
        for (acc, &p) in num.iter_mut().zip(wm.mask.probs()) {
            *acc += wm.weight * p as f64;
        }
        den += wm.weight;
    }

    let probs: Vec<f32> = num
        .into_iter()
        .map(|n| ((n / den).clamp(0.0, 1.0)) as f32)
        .collect();
    Ok(ProbMask::new(w, h, probs, first.mask.meta.clone())?)
}

/// Final cut: pixel is deforested iff its averaged probability is strictly
/// above `ensemble_threshold`.
pub fn ensemble_threshold(avg: &ProbMask, cfg: &FusionConfig) -> BinaryMask {
    binarize(avg, cfg.ensemble_threshold)
}

/// Result of fusing one query's mask group.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionOutcome {
    pub mask: BinaryMask,
    pub filter: FilterStats,
    /// Masks that contributed to the average after filtering.
    pub masks_used: usize,
}

/// Full fusion of one query's masks, already screened and grouped:
/// weighting, sigma filtering, weighted averaging, thresholding.
pub fn fuse_masks(
    group: Vec<(ProbMask, i32)>,
    cfg: &FusionConfig,
) -> Result<FusionOutcome, FusionError> {
    if group.is_empty() {
        return Err(FusionError::EmptyInput);
    }
    let weighted = assign_weights(group, cfg)?;
    let (survivors, filter) = sigma_filter_with_stats(weighted, cfg);
    let avg = weighted_average(&survivors)?;
    Ok(FusionOutcome {
        mask: ensemble_threshold(&avg, cfg),
        filter,
        masks_used: survivors.len(),
    })
}
